import init, { Game, gumbel_frequency } from "./pkg/endi_web.js";

const $ = (id) => document.getElementById(id);
let game = null;

function show(err) {
  $("status").textContent = err ? String(err) : "";
}

function redraw() {
  $("board").textContent = game.render();
}

function newGame() {
  try {
    if (game) game.free();
    game = new Game($("env").value, $("stage").value, BigInt($("seed").value), Number($("agents").value));
    $("manualtext").textContent = game.manual();
    $("log").textContent = "";
    redraw();
    show();
  } catch (e) {
    game = null;
    show(e);
  }
}

function step(policy) {
  if (!game) return;
  try {
    const r = JSON.parse(game.step(policy));
    $("log").textContent += `t=${r.t} ${r.actions.join(",")} r=${r.rewards.join(",")} ${r.events.join(" ")}${r.done ? (r.win ? " WIN" : " LOSS") : ""}\n`;
    redraw();
    show();
  } catch (e) {
    show(e);
  }
}

function divide() {
  if (!game) return;
  try {
    const d = JSON.parse(game.subgoal(Number($("agent").value), BigInt($("pseed").value), Number($("tau").value)));
    const rows = d.entities
      .map((e) => `<tr class="${e.selected ? "sel" : ""}"><td>${e.name}</td><td>(${e.row}, ${e.col})</td><td>${e.rho.toFixed(3)}</td><td>${e.selected ? "self" : "others"}</td></tr>`)
      .join("");
    $("division").innerHTML = `<table><tr><th>entity</th><th>cell</th><th>ρ</th><th>mask</th></tr>${rows}</table><p>greedy action: ${d.action}</p>`;
    show();
  } catch (e) {
    show(e);
  }
}

function sample() {
  try {
    const g = JSON.parse(gumbel_frequency(Number($("logit").value), Number($("gtau").value), Number($("samples").value), 7n));
    $("gumbel").textContent =
      `selected  ${g.selected.toFixed(4)}\nsigmoid   ${g.sigmoid.toFixed(4)}\nrelaxed   ${g.relaxed_mean.toFixed(4)} (mean soft weight)\nsamples   ${g.samples}`;
    show();
  } catch (e) {
    show(e);
  }
}

await init();
$("new").onclick = newGame;
$("oracle").onclick = () => step("oracle");
$("random").onclick = () => step("random");
$("manual").onclick = () => step($("joint").value);
$("run").onclick = () => {
  while (game && !game.done()) step("oracle");
};
$("divide").onclick = divide;
$("sample").onclick = sample;
newGame();
