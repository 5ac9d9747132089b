//! Acceptance gate. Runs without the libtest harness so that the report
//! prints on success as well as on failure:
//!
//! ```text
//! cargo test -p endi --test acceptance
//! ```

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use endi::agents::{evaluate, run_episode, Oracle, PolicyKind, RandomPolicy};
use endi::endi::gradcheck::{check, check_params, GradCheck};
use endi::endi::{
    endi_loss, endi_step_with_noise, gumbel_mask_with_noise, kl_to_target, mask_apply, opponent_nll, reg_dis,
    reg_num, sample_noise, self_logits_with_mask, AgentView, EndiConfig, EndiParams, MaskMode, Targets,
    Vocabulary, DEFAULT_WIDTH,
};
use endi::geom::GridPos;
use endi::manualgen::corpus::SplitTag;
use endi::manualgen::vocab::{tokenize, RTFM_NEW_WORDS};
use endi::manualgen::{Split, SplitSpec, TemplateCorpus};
use endi::rng::derive_seed;
use endi::rtfm::{monster_direction, CHASE_PROB};
use endi::transcript::Transcript;
use endi::world::EventKind;
use endi::{Action, EnvKind, Episode, EpisodeConfig, Rng, Stage};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome, Option<Duration>);

fn verdict(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn stages(env: EnvKind) -> Vec<Stage> {
    (1..=env.max_stage()).map(|n| Stage::new(n).unwrap()).collect()
}

fn determinism() -> Outcome {
    let mut mismatched = Vec::new();
    let mut total = 0;
    for env in [EnvKind::Rtfm, EnvKind::Messenger] {
        let st = stages(env);
        for i in 0..100u64 {
            let seed = derive_seed(77, i);
            let stage = st[i as usize % st.len()];
            let n = if env == EnvKind::Rtfm { 2 + (i as usize % 2) } else { 2 };
            let cfg = EpisodeConfig::new(env, stage, Split::Train, seed, n);
            let a = run_episode(cfg, &mut RandomPolicy::new(seed)).map_err(|e| e.to_string())?;
            let b = run_episode(cfg, &mut RandomPolicy::new(seed)).map_err(|e| e.to_string())?;
            let text = a.transcript().to_text();
            let parsed = Transcript::parse(&text).map_err(|e| e.to_string())?;
            let replayed = parsed.replay().map_err(|e| e.to_string())?.to_text();
            total += 1;
            if text.as_bytes() != b.transcript().to_text().as_bytes() || text.as_bytes() != replayed.as_bytes() {
                mismatched.push(format!("{env}/{stage}/{seed}"));
            }
        }
    }
    verdict(
        mismatched.is_empty(),
        format!("{total} triples, {} mismatched {mismatched:?}", mismatched.len()),
    )
}

fn win_rates(cases: &[(EnvKind, Stage)], episodes: usize, seed: u64, floor: f64) -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for &(env, stage) in cases {
        let cfg = EpisodeConfig::new(env, stage, Split::Train, 0, 2);
        let r = evaluate(PolicyKind::Oracle, cfg, episodes, seed).map_err(|e| e.to_string())?;
        ok &= r.win_rate >= floor;
        parts.push(format!("{env}/{stage}={:.3}", r.win_rate));
    }
    verdict(ok, format!("{} over {episodes} episodes, floor {floor}", parts.join(" ")))
}

fn oracle_s1() -> Outcome {
    win_rates(&[(EnvKind::Rtfm, Stage::S1), (EnvKind::Messenger, Stage::S1)], 1000, 11, 0.99)
}

fn solvability() -> Outcome {
    win_rates(
        &[
            (EnvKind::Rtfm, Stage::S2),
            (EnvKind::Rtfm, Stage::S3),
            (EnvKind::Rtfm, Stage::S4),
            (EnvKind::Rtfm, Stage::S5),
            (EnvKind::Messenger, Stage::S2),
        ],
        500,
        12,
        0.95,
    )
}

fn reward_arithmetic() -> Outcome {
    let mut ok = true;
    let mut lengths = BTreeSet::new();
    for seed in 0..30 {
        let mut ep = Episode::new(EpisodeConfig::new(EnvKind::Rtfm, Stage::S1, Split::Train, seed, 2)).unwrap();
        let mut steps = 0u32;
        while !ep.is_done() && steps < 40 + seed as u32 {
            ep.step(&[Action::Stay, Action::Stay]).unwrap();
            steps += 1;
        }
        lengths.insert(steps);
        ok &= ep.returns().iter().all(|&r| r == -0.02 * f64::from(steps));
    }
    let mut full = Episode::new(EpisodeConfig::new(EnvKind::Rtfm, Stage::S1, Split::Train, 3, 2)).unwrap();
    while !full.is_done() {
        full.step(&[Action::Stay, Action::Stay]).unwrap();
    }
    let t = f64::from(full.step_count());
    ok &= full.returns().iter().all(|&r| r == -0.02 * t);

    let mut pickups = 0;
    for seed in 0..60 {
        let cfg = EpisodeConfig::new(EnvKind::Messenger, Stage::S3, Split::Train, seed, 2);
        let ep = run_episode(cfg, &mut Oracle).unwrap();
        for s in &ep.transcript().steps {
            for (agent, &r) in s.rewards.iter().enumerate() {
                let mine: Vec<EventKind> = s.events.iter().filter(|e| e.agent == Some(agent)).map(|e| e.kind).collect();
                if mine == [EventKind::Message] {
                    pickups += 1;
                    ok &= r == 0.2;
                }
            }
        }
    }
    ok &= pickups > 0;
    verdict(
        ok,
        format!(
            "idle lengths {}..={} plus a full {t}-step episode, {pickups} pickups at +0.2",
            lengths.first().unwrap(),
            lengths.last().unwrap()
        ),
    )
}

fn chase() -> Outcome {
    // Only the column distance shrinks toward the agent, so a chase step is
    // always Left and a uniform step is Left a quarter of the time.
    let expected = 0.6 + 0.4 * 0.25;
    let n = 100_000;
    let mut rng = Rng::split(2024, "chase");
    let agents = [GridPos::new(4, 0)];
    let left = (0..n)
        .filter(|_| monster_direction(GridPos::new(4, 4), &agents, CHASE_PROB, &mut rng) == Action::Left)
        .count();
    let freq = left as f64 / n as f64;
    verdict(
        (freq - expected).abs() <= 0.01,
        format!("P(left)={freq:.4}, analytic {expected:.2} +/- 0.01, n={n}"),
    )
}

fn splits() -> Outcome {
    let spec = SplitSpec::standard();
    let mut problems = Vec::new();

    // Every (monster partition, modifier partition) pair.
    let mut shared = 0usize;
    for m in 0..spec.monster_partition_count() {
        for d in 0..spec.modifier_partition_count() {
            if spec.rtfm_allows(Split::Train, m, d) && spec.rtfm_allows(Split::Eval, m, d) {
                shared += 1;
            }
        }
    }
    if shared > 0 {
        problems.push(format!("{shared} shared rtfm assignments"));
    }

    for seed in 0..200 {
        for split in [Split::Train, Split::Eval, Split::EvalNew] {
            let ep = Episode::new(EpisodeConfig::new(EnvKind::Rtfm, Stage::S5, split, seed, 2)).unwrap();
            let a = &ep.rtfm().unwrap().assignment;
            if !spec.rtfm_allows(split, a.monster_partition, a.modifier_partition) {
                problems.push(format!("{} seed {seed} outside its pool", split.name()));
            }
        }
    }

    let new_words: BTreeSet<String> = [RTFM_NEW_WORDS.monsters, RTFM_NEW_WORDS.weapons, RTFM_NEW_WORDS.modifiers, RTFM_NEW_WORDS.elements]
        .concat()
        .iter()
        .flat_map(|w| tokenize(w))
        .collect();
    for seed in 0..200 {
        let ep = Episode::new(EpisodeConfig::new(EnvKind::Rtfm, Stage::S5, Split::EvalNew, seed, 2)).unwrap();
        for e in ep.entities() {
            for w in tokenize(&e.name) {
                if !new_words.contains(&w) {
                    problems.push(format!("eval_new entity word `{w}`"));
                }
            }
        }
    }

    let train_combos: BTreeSet<[u8; 5]> = spec.messenger_combos(Split::Train).iter().map(|c| c.entities()).collect();
    let shared_combos = spec
        .messenger_combos(Split::Eval)
        .iter()
        .filter(|c| train_combos.contains(&c.entities()))
        .count();
    if shared_combos > 0 {
        problems.push(format!("{shared_combos} shared messenger combinations"));
    }
    let train_templates: BTreeSet<&String> = spec.messenger_templates(Split::Train).iter().collect();
    let mut eval_pairs = 0usize;
    for seed in 0..200 {
        let ep = Episode::new(EpisodeConfig::new(EnvKind::Messenger, Stage::S2, Split::Eval, seed, 2)).unwrap();
        let combo = ep.messenger().unwrap().assignment.combo.entities();
        for s in &ep.manual().document {
            if let Some(id) = &s.provenance.template {
                eval_pairs += 1;
                if train_templates.contains(id) && train_combos.contains(&combo) {
                    problems.push(format!("eval pair ({id}, {combo:?}) seen in train"));
                }
            }
        }
    }
    let corpus = TemplateCorpus::standard();
    let tagged_train: BTreeSet<String> = corpus.messenger_ids(SplitTag::Train).into_iter().collect();
    let leaked = corpus
        .messenger_ids(SplitTag::Eval)
        .iter()
        .filter(|id| tagged_train.contains(*id))
        .count();
    if leaked > 0 {
        problems.push(format!("{leaked} templates tagged for both splits"));
    }
    verdict(
        problems.is_empty(),
        format!(
            "{} rtfm pairs and {} messenger combinations scanned, {eval_pairs} eval sentences; problems: {problems:?}",
            spec.monster_partition_count() * spec.modifier_partition_count(),
            train_combos.len() + spec.messenger_combos(Split::Eval).len()
        ),
    )
}

fn corpus_counts() -> Outcome {
    let c = TemplateCorpus::standard().counts();
    let got = (c.rtfm_goal, c.rtfm_team, c.rtfm_modifier, c.messenger, c.messenger_fillings, c.messenger_descriptions);
    verdict(
        got == (12, 10, 10, 82, 27, 2214),
        format!(
            "rtfm {}/{}/{}, messenger {} x {} = {}",
            got.0, got.1, got.2, got.3, got.4, got.5
        ),
    )
}

fn view(env: EnvKind, stage: Stage, seed: u64, n: usize) -> (AgentView, Vocabulary) {
    let vocab = Vocabulary::for_split(Split::Train);
    let ep = Episode::new(EpisodeConfig::new(env, stage, Split::Train, seed, n)).unwrap();
    (AgentView::from_episode(&ep, 0, &vocab).unwrap(), vocab)
}

fn gradients() -> Outcome {
    let mut rng = Rng::split(31, "acceptance-fd");
    let views = [
        view(EnvKind::Rtfm, Stage::S2, 5, 2),
        view(EnvKind::Rtfm, Stage::S5, 6, 3),
        view(EnvKind::Messenger, Stage::S3, 7, 2),
    ];
    let mut per = [
        ("opponent_nll", GradCheck::default()),
        ("kl", GradCheck::default()),
        ("reg_num", GradCheck::default()),
        ("reg_dis", GradCheck::default()),
        ("loss", GradCheck::default()),
    ];
    for draw in 0..100 {
        let n = 2 + rng.below(2);
        let k = 2 + rng.below(6);
        let rho: Vec<f64> = (0..k).map(|_| 0.02 + 0.96 * rng.uniform()).collect();
        let rest: Vec<f64> = (0..k).map(|_| 0.02 + 0.96 * rng.uniform()).collect();

        let pred: Vec<Vec<f64>> = (1..n)
            .map(|_| {
                let raw: Vec<f64> = (0..5).map(|_| 0.05 + rng.uniform()).collect();
                let s: f64 = raw.iter().sum();
                raw.iter().map(|v| v / s).collect()
            })
            .collect();
        let actual: Vec<Action> = (1..n).map(|_| Action::ALL[rng.below(5)]).collect();
        let g = opponent_nll(&pred, &actual).unwrap().grads;
        let f = |x: &[Vec<f64>]| opponent_nll(x, &actual).unwrap().value;
        per[0].1.merge(&check(&f, &pred, &g, None, &mut rng));

        let g = kl_to_target(&rho, n).unwrap().grads;
        let f = |x: &[Vec<f64>]| kl_to_target(&x[0], n).unwrap().value;
        per[1].1.merge(&check(&f, &[rho.clone()], &g, None, &mut rng));

        let g = reg_num(&rho, &rest, n).unwrap().grads;
        let f = |x: &[Vec<f64>]| reg_num(&x[0], &x[1], n).unwrap().value;
        per[2].1.merge(&check(&f, &[rho.clone(), rest.clone()], &g, None, &mut rng));

        let cells: Vec<GridPos> = (0..k).map(|_| GridPos::new(rng.below(8), rng.below(8))).collect();
        let me = GridPos::new(rng.below(8), rng.below(8));
        let others: Vec<GridPos> = (1..n).map(|_| GridPos::new(rng.below(8), rng.below(8))).collect();
        let g = reg_dis(&rho, &rest, &cells, me, &others).unwrap().grads;
        let f = |x: &[Vec<f64>]| reg_dis(&x[0], &x[1], &cells, me, &others).unwrap().value;
        per[3].1.merge(&check(&f, &[rho.clone(), rest.clone()], &g, None, &mut rng));

        let (v, vocab) = &views[draw % views.len()];
        let params = EndiParams::random(vocab.len(), DEFAULT_WIDTH, v.n_agents(), 0.3, &mut rng).unwrap();
        let noise = sample_noise(v.n_entities(), &mut rng);
        let cfg = EndiConfig {
            mask_mode: MaskMode::Relaxed,
            ..EndiConfig::default()
        };
        let targets = Targets {
            self_action: Action::ALL[rng.below(5)],
            advantage: 2.0 * rng.uniform() - 1.0,
            others_actions: (1..v.n_agents()).map(|_| Action::ALL[rng.below(5)]).collect(),
        };
        let r = endi_loss(v, &params, &cfg, &noise, &targets).unwrap();
        let loss = |q: &EndiParams| endi_loss(v, q, &cfg, &noise, &targets).unwrap().total;
        per[4].1.merge(&check_params(&loss, &params, &r.grads, Some(6), &mut rng));
    }
    let ok = per.iter().all(|(_, g)| g.max_rel_err < 1e-6);
    let detail = per
        .iter()
        .map(|(name, g)| format!("{name} {:.1e}/{}", g.max_rel_err, g.checked))
        .collect::<Vec<_>>()
        .join(", ");
    verdict(ok, format!("100 draws, max rel err/coords: {detail}"))
}

fn gumbel() -> Outcome {
    let n = 100_000;
    let mut rng = Rng::split(41, "acceptance-gumbel");
    let mut worst: f64 = 0.0;
    let mut cells = Vec::new();
    for tau in [0.1, 1.0] {
        for l in [-2.0f64, 0.0, 2.0] {
            let logits = [[0.0, l]];
            let hits = (0..n)
                .filter(|_| {
                    let noise = sample_noise(1, &mut rng);
                    gumbel_mask_with_noise(&logits, &noise, tau).unwrap().mask[0]
                })
                .count();
            let freq = hits as f64 / n as f64;
            let sigma = 1.0 / (1.0 + (-l).exp());
            worst = worst.max((freq - sigma).abs());
            cells.push(format!("tau={tau} l={l}: {freq:.4}"));
        }
    }
    verdict(worst <= 0.01, format!("max deviation {worst:.4}; {}", cells.join(", ")))
}

fn partition_no_leakage() -> Outcome {
    let mut rng = Rng::split(51, "acceptance-leak");
    let mut failures = Vec::new();
    let draws = 300;
    for d in 0..draws {
        let (env, stage) = match d % 3 {
            0 => (EnvKind::Rtfm, Stage::S2),
            1 => (EnvKind::Rtfm, Stage::S5),
            _ => (EnvKind::Messenger, Stage::S3),
        };
        let n = if env == EnvKind::Rtfm { 2 + d % 2 } else { 2 };
        let (v, vocab) = view(env, stage, d as u64, n);
        let params = EndiParams::random(vocab.len(), DEFAULT_WIDTH, n, 0.5, &mut rng).unwrap();
        let noise = sample_noise(v.n_entities(), &mut rng);
        let out = endi_step_with_noise(&v, &params, &EndiConfig::default(), &noise).unwrap();
        let mask = out.subgoal.mask.clone();
        let (mine, theirs) = mask_apply(&v, &mask).unwrap();
        let mine_ids: BTreeSet<u32> = mine.entities.iter().filter_map(|e| e.entity).collect();
        let their_ids: BTreeSet<u32> = theirs.entities.iter().filter_map(|e| e.entity).collect();
        let all: BTreeSet<u32> = v.entities.iter().filter_map(|e| e.entity).collect();
        if !mine_ids.is_disjoint(&their_ids) || &mine_ids | &their_ids != all {
            failures.push(format!("draw {d}: not a partition"));
        }
        let mut moved = v.clone();
        for (e, &keep) in moved.entities.iter_mut().zip(&mask) {
            if !keep {
                e.pos = GridPos::new(rng.below(v.size), rng.below(v.size));
                e.tokens = vec![rng.below(vocab.len()), rng.below(vocab.len())];
            }
        }
        let after = self_logits_with_mask(&moved, &params, &mask).unwrap();
        if out.self_logits.map(f64::to_bits) != after.map(f64::to_bits) {
            failures.push(format!("draw {d}: logits changed"));
        }
    }
    verdict(failures.is_empty(), format!("{draws} draws, failures {failures:?}"))
}

fn closed_forms() -> Outcome {
    let mut bad = Vec::new();
    let mut expect = |name: &str, got: f64, want: f64| {
        if got != want {
            bad.push(format!("{name}: {got} != {want}"));
        }
    };
    let m = |k: usize| -> (Vec<f64>, Vec<f64>) {
        let s: Vec<f64> = (0..6).map(|i| if i < k { 1.0 } else { 0.0 }).collect();
        let o = s.iter().map(|x| 1.0 - x).collect();
        (s, o)
    };
    // |3 - 3/1|, |4 - 2/1|, |2 - 4/2|
    let (s, o) = m(3);
    expect("reg_num 3 of 6, n=2", reg_num(&s, &o, 2).unwrap().value, 0.0);
    let (s, o) = m(4);
    expect("reg_num 4 of 6, n=2", reg_num(&s, &o, 2).unwrap().value, 2.0);
    let (s, o) = m(2);
    expect("reg_num 2 of 6, n=3", reg_num(&s, &o, 3).unwrap().value, 0.0);

    let p = GridPos::new;
    // own (1,2) from (0,0) is 3; theirs (3,4) from (3,3) is 1
    expect(
        "reg_dis",
        reg_dis(&[1.0, 0.0], &[0.0, 1.0], &[p(1, 2), p(3, 4)], p(0, 0), &[p(3, 3)]).unwrap().value,
        4.0,
    );
    expect(
        "reg_dis on top",
        reg_dis(&[1.0, 0.0], &[0.0, 1.0], &[p(0, 0), p(3, 3)], p(0, 0), &[p(3, 3)]).unwrap().value,
        0.0,
    );
    expect(
        "reg_dis nearest other",
        reg_dis(&[0.0], &[1.0], &[p(5, 5)], p(0, 0), &[p(9, 9), p(5, 6)]).unwrap().value,
        1.0,
    );
    expect("kl n=2", kl_to_target(&[0.5; 5], 2).unwrap().value, 0.0);
    let kl3 = kl_to_target(&[1.0 / 3.0; 5], 3).unwrap().value;
    let kl4 = kl_to_target(&[0.25; 5], 4).unwrap().value;
    if kl3.abs() > 1e-15 || kl4.abs() > 1e-15 {
        bad.push(format!("kl at 1/n: {kl3}, {kl4}"));
    }
    verdict(bad.is_empty(), format!("reg_num x3, reg_dis x3, kl at 1/n for n=2,3,4; {bad:?}"))
}

fn main() {
    let criteria: [Criterion; 11] = [
        ("1  determinism", determinism, Some(Duration::from_secs(60))),
        ("2  oracle S1 win rate", oracle_s1, Some(Duration::from_secs(120))),
        ("3  oracle solvability", solvability, None),
        ("4  reward arithmetic", reward_arithmetic, None),
        ("5  chase statistics", chase, None),
        ("6  split disjointness", splits, None),
        ("7  corpus counts", corpus_counts, None),
        ("8  gradient suite", gradients, Some(Duration::from_secs(60))),
        ("9  gumbel frequency", gumbel, None),
        ("10 partition/no leakage", partition_no_leakage, None),
        ("11 closed forms", closed_forms, None),
    ];
    let mut failed = 0;
    for (name, run, budget) in criteria {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(run).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let took = start.elapsed();
        let over = budget.is_some_and(|b| took > b);
        let (ok, detail) = match outcome {
            Ok(d) if !over => (true, d),
            Ok(d) => (false, format!("{d}; over time budget {:?}", budget.unwrap())),
            Err(d) => (false, d),
        };
        if !ok {
            failed += 1;
        }
        println!(
            "[{}] {name:<26} {:>7.2}s  {detail}",
            if ok { "PASS" } else { "FAIL" },
            took.as_secs_f64()
        );
    }
    println!("acceptance: {} passed, {failed} failed", 11 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
