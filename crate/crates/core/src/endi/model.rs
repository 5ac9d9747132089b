//! Grounding, subgoal division and the two policy heads.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{joint_positional_feature, positional_feature, Action, GridMap};
use crate::rng::Rng;

use super::losses::{entity_distances, kl_from_logits_on_tape, nll_on_tape, reg_dis_on_tape, reg_num_on_tape};
use super::mask::{check_tau, relaxed_on_tape, sample_noise, GumbelNoise, SubgoalState};
use super::params::{EndiParams, ParamVars};
use super::tape::{Tape, Var};
use super::tensor::Tensor;
use super::view::AgentView;

pub const DEFAULT_TAU: f64 = 1.0;
pub const DEFAULT_KL_WEIGHT: f64 = 0.1;
pub const DEFAULT_REG_WEIGHT: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MaskMode {
    /// Forward pass uses the hard mask; gradients use the relaxed sample.
    StraightThrough,
    /// Forward pass uses the relaxed sample itself. Smooth, so finite
    /// differences agree with the analytic gradient.
    Relaxed,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regularizer {
    None,
    Num,
    Dis,
}

impl Regularizer {
    pub fn name(self) -> &'static str {
        match self {
            Regularizer::None => "none",
            Regularizer::Num => "num",
            Regularizer::Dis => "dis",
        }
    }
}

impl fmt::Display for Regularizer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Regularizer {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Regularizer::None),
            "num" => Ok(Regularizer::Num),
            "dis" => Ok(Regularizer::Dis),
            other => Err(Error::InvalidConfig(format!("unknown regularizer `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EndiConfig {
    pub tau: f64,
    pub mask_mode: MaskMode,
    pub regularizer: Regularizer,
    pub policy_weight: f64,
    pub opponent_weight: f64,
    pub kl_weight: f64,
    pub reg_weight: f64,
}

impl Default for EndiConfig {
    fn default() -> Self {
        Self {
            tau: DEFAULT_TAU,
            mask_mode: MaskMode::StraightThrough,
            regularizer: Regularizer::Dis,
            policy_weight: 1.0,
            opponent_weight: 1.0,
            kl_weight: DEFAULT_KL_WEIGHT,
            reg_weight: DEFAULT_REG_WEIGHT,
        }
    }
}

/// Linear temperature schedule from `start` to `end` over `steps`.
pub fn anneal_tau(start: f64, end: f64, step: usize, steps: usize) -> f64 {
    if steps == 0 || step >= steps {
        return end;
    }
    start + (end - start) * step as f64 / steps as f64
}

/// Constant matrices that turn the embedding table into per-item features.
struct ItemText {
    /// Token counts of each item.
    own: Vec<f64>,
    /// Σ over manual sentences of overlap(item, sentence) · sentence mean.
    manual: Vec<f64>,
    /// overlap(item, goal) · goal mean.
    goal: Vec<f64>,
    rows: usize,
}

fn overlap(a: &[usize], b: &BTreeSet<usize>) -> f64 {
    a.iter().collect::<BTreeSet<_>>().into_iter().filter(|t| b.contains(t)).count() as f64
}

fn mean_row(tokens: &[usize], vocab: usize) -> Vec<f64> {
    let mut row = vec![0.0; vocab];
    for &t in tokens {
        row[t] += 1.0 / tokens.len() as f64;
    }
    row
}

fn item_text(view: &AgentView, vocab: usize) -> Result<ItemText> {
    if let Some(&t) = view
        .items()
        .flat_map(|i| &i.tokens)
        .chain(view.manual.iter().flatten())
        .chain(&view.goal)
        .find(|&&t| t >= vocab)
    {
        return Err(Error::UnknownToken(format!("token id {t} beyond vocabulary of {vocab}")));
    }
    // Sorted so the summation order, and hence every bit of the result,
    // is independent of sentence order.
    let mut ordered: Vec<&Vec<usize>> = view.manual.iter().collect();
    ordered.sort();
    let sentences: Vec<(BTreeSet<usize>, Vec<f64>)> = ordered
        .into_iter()
        .filter(|s| !s.is_empty())
        .map(|s| (s.iter().copied().collect(), mean_row(s, vocab)))
        .collect();
    let goal_set: BTreeSet<usize> = view.goal.iter().copied().collect();
    let goal_mean = if view.goal.is_empty() {
        vec![0.0; vocab]
    } else {
        mean_row(&view.goal, vocab)
    };
    let mut own = Vec::new();
    let mut manual = Vec::new();
    let mut goal = Vec::new();
    let mut rows = 0;
    for item in view.items() {
        rows += 1;
        let mut row = vec![0.0; vocab];
        for &t in &item.tokens {
            row[t] += 1.0;
        }
        own.extend(row);
        let mut row = vec![0.0; vocab];
        for (set, mean) in &sentences {
            let k = overlap(&item.tokens, set);
            if k > 0.0 {
                for (r, m) in row.iter_mut().zip(mean) {
                    *r += k * m;
                }
            }
        }
        manual.extend(row);
        let k = overlap(&item.tokens, &goal_set);
        goal.extend(goal_mean.iter().map(|m| k * m));
    }
    Ok(ItemText {
        own,
        manual,
        goal,
        rows,
    })
}

fn check_positions(view: &AgentView) -> Result<()> {
    for p in view.items().map(|i| i.pos).chain(view.agent_pos.iter().copied()) {
        p.check(view.size, view.size)?;
    }
    if view.agent >= view.n_agents() {
        return Err(Error::BadActions {
            expected: view.n_agents(),
            got: view.agent + 1,
        });
    }
    Ok(())
}

fn positional_column(map: &GridMap<usize>) -> Vec<f64> {
    let scale = (map.h + map.w).saturating_sub(2).max(1) as f64;
    map.data.iter().map(|&d| d as f64 / scale).collect()
}

/// Toy grounding on the tape: an (h·w) × d map. `entity_weights` scales
/// each entity's contribution; agents and inventory always count fully.
fn ground_on_tape(
    tape: &mut Tape,
    pv: &ParamVars,
    view: &AgentView,
    text: &ItemText,
    vocab: usize,
    entity_weights: Var,
    positional: Option<&[f64]>,
) -> Var {
    let cells = view.size * view.size;
    let n_e = view.n_entities();
    let n_items = text.rows;
    let own = tape.leaf(n_items, vocab, text.own.clone());
    let man = tape.leaf(n_items, vocab, text.manual.clone());
    let gol = tape.leaf(n_items, vocab, text.goal.clone());
    let e_own = tape.matmul(own, pv.embed());
    let e_man = tape.matmul(man, pv.embed());
    let e_gol = tape.matmul(gol, pv.embed());
    let f_own = tape.matmul(e_own, pv.cell());
    let f_man = tape.matmul(e_man, pv.manual());
    let f_gol = tape.matmul(e_gol, pv.goal());
    let f = tape.add(f_own, f_man);
    let features = tape.add(f, f_gol);

    let cell_of = |i: &super::view::ViewItem| i.pos.index(view.size);
    let ent_rows: Vec<usize> = (0..n_e).collect();
    let fixed_rows: Vec<usize> = (n_e..n_items).collect();
    let ent = tape.pick_rows(features, &ent_rows);
    let fixed = tape.pick_rows(features, &fixed_rows);
    let ones = tape.leaf(fixed_rows.len(), 1, vec![1.0; fixed_rows.len()]);
    let a = tape.scatter_rows(ent, entity_weights, view.entities.iter().map(cell_of).collect(), cells);
    let b = tape.scatter_rows(fixed, ones, view.fixed.iter().map(cell_of).collect(), cells);
    let mut x = tape.add(a, b);
    if let Some(pos) = positional {
        let p = tape.leaf(cells, 1, pos.to_vec());
        let pw = tape.matmul(p, pv.position());
        x = tape.add(x, pw);
    }
    let x = tape.add_row(x, pv.bias());
    tape.tanh(x)
}

fn check_params(view: &AgentView, params: &EndiParams) -> Result<()> {
    if params.n_agents() != view.n_agents() {
        return Err(Error::Shape(format!(
            "parameters are for {} agents, view has {}",
            params.n_agents(),
            view.n_agents()
        )));
    }
    Ok(())
}

/// The grounded map with every entity visible and no positional channel,
/// as an h × w × d tensor.
pub fn ground_toy(view: &AgentView, params: &EndiParams) -> Result<Tensor> {
    check_positions(view)?;
    let vocab = params.vocab_size();
    let text = item_text(view, vocab)?;
    let mut tape = Tape::new();
    let pv = params.bind(&mut tape);
    let w = tape.leaf(view.n_entities(), 1, vec![1.0; view.n_entities()]);
    let x = ground_on_tape(&mut tape, &pv, view, &text, vocab, w, None);
    Tensor::new(vec![view.size, view.size, params.width()], tape.value(x).to_vec())
}

/// Entity logit pairs read from the mixed self/others goal maps.
fn subgoal_logits_on_tape(tape: &mut Tape, pv: &ParamVars, view: &AgentView, text: &ItemText, vocab: usize) -> Result<Var> {
    let n = view.size;
    let own_map = positional_column(&positional_feature(view.self_pos(), n, n)?);
    let others_map = positional_column(&joint_positional_feature(&view.other_pos(), n, n)?);
    let ones = tape.leaf(view.n_entities(), 1, vec![1.0; view.n_entities()]);
    let x_self = ground_on_tape(tape, pv, view, text, vocab, ones, Some(&own_map));
    let x_others = ground_on_tape(tape, pv, view, text, vocab, ones, Some(&others_map));
    let stacked = tape.concat_cols(x_self, x_others);
    let patches = tape.patches3x3(stacked, n, n);
    let mixed = tape.matmul(patches, pv.mix());
    let mixed = tape.add_row(mixed, pv.mix_bias());
    let rows: Vec<usize> = view.entities.iter().map(|e| e.pos.index(n)).collect();
    Ok(tape.pick_rows(mixed, &rows))
}

fn pairs(tape: &Tape, v: Var) -> Vec<[f64; 2]> {
    tape.value(v).chunks(2).map(|c| [c[0], c[1]]).collect()
}

pub fn subgoal_logits(view: &AgentView, params: &EndiParams) -> Result<Vec<[f64; 2]>> {
    check_positions(view)?;
    check_params(view, params)?;
    let vocab = params.vocab_size();
    let text = item_text(view, vocab)?;
    let mut tape = Tape::new();
    let pv = params.bind(&mut tape);
    let l = subgoal_logits_on_tape(&mut tape, &pv, view, &text, vocab)?;
    Ok(pairs(&tape, l))
}

/// Max-pooled policy maps and both heads. Returns (self logits 1×5,
/// others' distributions, each 1×5).
fn heads_on_tape(
    tape: &mut Tape,
    pv: &ParamVars,
    view: &AgentView,
    text: &ItemText,
    vocab: usize,
    weights: Var,
) -> (Var, Vec<Var>) {
    let inverse = tape.one_minus(weights);
    let x_self = ground_on_tape(tape, pv, view, text, vocab, weights, None);
    let x_others = ground_on_tape(tape, pv, view, text, vocab, inverse, None);
    let pooled_self = tape.max_rows(x_self);
    let pooled_others = tape.max_rows(x_others);
    let s = tape.matmul(pooled_self, pv.self_head());
    let self_logits = tape.add(s, pv.self_bias());
    let others = pv
        .heads
        .iter()
        .map(|&(w, b)| {
            let o = tape.matmul(pooled_others, w);
            let o = tape.add(o, b);
            tape.softmax_rows(o)
        })
        .collect();
    (self_logits, others)
}

fn five(xs: &[f64]) -> [f64; 5] {
    xs.try_into().expect("five actions")
}

/// π_self logits for a fixed hard mask.
pub fn self_logits_with_mask(view: &AgentView, params: &EndiParams, mask: &[bool]) -> Result<[f64; 5]> {
    check_positions(view)?;
    check_params(view, params)?;
    if mask.len() != view.n_entities() {
        return Err(Error::Shape(format!("mask has {} entries for {} entities", mask.len(), view.n_entities())));
    }
    let vocab = params.vocab_size();
    let text = item_text(view, vocab)?;
    let mut tape = Tape::new();
    let pv = params.bind(&mut tape);
    let w = tape.leaf(mask.len(), 1, mask.iter().map(|&m| f64::from(u8::from(m))).collect());
    let (s, _) = heads_on_tape(&mut tape, &pv, view, &text, vocab, w);
    Ok(five(tape.value(s)))
}

/// Greedy action from a logit vector; ties go to the earlier action.
pub fn greedy(logits: &[f64; 5]) -> Action {
    let mut best = 0;
    for i in 1..5 {
        if logits[i] > logits[best] {
            best = i;
        }
    }
    Action::ALL[best]
}

/// Linear head on pooled features: `features · weight + bias`.
pub fn policy_head(features: &[f64], weight: &Tensor, bias: &Tensor) -> Result<[f64; 5]> {
    let d = features.len();
    if weight.shape() != [d, Action::COUNT] || bias.len() != Action::COUNT {
        return Err(Error::Shape(format!("head {:?} for {d} features", weight.shape())));
    }
    let mut out = [0.0; 5];
    for (j, o) in out.iter_mut().enumerate() {
        *o = bias.data()[j] + (0..d).map(|i| features[i] * weight.data()[i * Action::COUNT + j]).sum::<f64>();
    }
    Ok(out)
}

struct Forward {
    tape: Tape,
    pv: ParamVars,
    self_logits: Var,
    others: Vec<Var>,
    selection: Var,
    rho: Var,
    state: SubgoalState,
}

fn forward(view: &AgentView, params: &EndiParams, config: &EndiConfig, noise: &[[f64; 2]]) -> Result<Forward> {
    check_tau(config.tau)?;
    check_positions(view)?;
    check_params(view, params)?;
    if noise.len() != view.n_entities() {
        return Err(Error::Shape(format!(
            "{} noise pairs for {} entities",
            noise.len(),
            view.n_entities()
        )));
    }
    let vocab = params.vocab_size();
    let text = item_text(view, vocab)?;
    let mut tape = Tape::new();
    let pv = params.bind(&mut tape);
    let logits = subgoal_logits_on_tape(&mut tape, &pv, view, &text, vocab)?;
    let l0 = tape.pick_col(logits, 0);
    let l1 = tape.pick_col(logits, 1);
    let selection = tape.sub(l1, l0);
    let rho = tape.sigmoid(selection);
    let (relaxed, mask) = relaxed_on_tape(&mut tape, logits, noise, config.tau);
    let soft = tape.pick_col(relaxed, 1);
    let weights = match config.mask_mode {
        MaskMode::Relaxed => soft,
        MaskMode::StraightThrough => {
            let hard = mask.iter().map(|&m| f64::from(u8::from(m))).collect();
            tape.straight(soft, hard)
        }
    };
    let (self_logits, others) = heads_on_tape(&mut tape, &pv, view, &text, vocab, weights);
    let state = SubgoalState {
        logits: pairs(&tape, logits),
        rho: tape.value(rho).to_vec(),
        relaxed: pairs(&tape, relaxed),
        mask,
        tau: config.tau,
    };
    Ok(Forward {
        tape,
        pv,
        self_logits,
        others,
        selection,
        rho,
        state,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepOutput {
    pub self_logits: [f64; 5],
    /// Predicted action distribution for each other agent, in id order.
    pub others: Vec<[f64; 5]>,
    pub subgoal: SubgoalState,
}

impl StepOutput {
    pub fn greedy(&self) -> Action {
        greedy(&self.self_logits)
    }
}

/// Full decision pass for one agent with explicit Gumbel noise.
pub fn endi_step_with_noise(
    view: &AgentView,
    params: &EndiParams,
    config: &EndiConfig,
    noise: &[[f64; 2]],
) -> Result<StepOutput> {
    let f = forward(view, params, config, noise)?;
    Ok(StepOutput {
        self_logits: five(f.tape.value(f.self_logits)),
        others: f.others.iter().map(|&o| five(f.tape.value(o))).collect(),
        subgoal: f.state,
    })
}

pub fn endi_step(view: &AgentView, params: &EndiParams, config: &EndiConfig, rng: &mut Rng) -> Result<StepOutput> {
    let noise = sample_noise(view.n_entities(), rng);
    endi_step_with_noise(view, params, config, &noise)
}

/// What the learner observed after acting.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Targets {
    pub self_action: Action,
    /// Multiplies the log-likelihood of `self_action`.
    pub advantage: f64,
    /// The other agents' actual actions, in id order.
    pub others_actions: Vec<Action>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LossReport {
    pub total: f64,
    /// −advantage · ln π_self(action)
    pub policy: f64,
    pub opponent_nll: f64,
    /// Actual actions whose predicted probability hit the floor.
    pub floored: usize,
    pub kl: f64,
    pub regularizer: Regularizer,
    /// Relaxed value, the one that enters the loss.
    pub reg: f64,
    /// Same regularizer on the hard mask.
    pub reg_hard: f64,
    pub mask_size: usize,
    pub n_entities: usize,
    pub grads: EndiParams,
}

impl LossReport {
    pub fn is_finite(&self) -> bool {
        [self.total, self.policy, self.opponent_nll, self.kl, self.reg, self.reg_hard]
            .iter()
            .all(|v| v.is_finite())
            && self.grads.is_finite()
    }

    pub fn key_values(&self) -> String {
        let mut out = format!(
            "total={}\npolicy={}\nopponent_nll={}\nfloored={}\nkl={}\nregularizer={}\nreg={}\nreg_hard={}\nmask_size={}\nentities={}\n",
            self.total,
            self.policy,
            self.opponent_nll,
            self.floored,
            self.kl,
            self.regularizer,
            self.reg,
            self.reg_hard,
            self.mask_size,
            self.n_entities
        );
        for (name, t) in self.grads.named() {
            out.push_str(&format!("grad_norm.{name}={}\n", t.norm()));
        }
        out
    }
}

/// Weighted loss and its gradient for one decision.
pub fn endi_loss(
    view: &AgentView,
    params: &EndiParams,
    config: &EndiConfig,
    noise: &[[f64; 2]],
    targets: &Targets,
) -> Result<LossReport> {
    let n_agents = view.n_agents();
    if targets.others_actions.len() != n_agents - 1 {
        return Err(Error::BadActions {
            expected: n_agents - 1,
            got: targets.others_actions.len(),
        });
    }
    let Forward {
        mut tape,
        pv,
        self_logits,
        others,
        selection,
        rho,
        state,
    } = forward(view, params, config, noise)?;
    let t = &mut tape;

    let logp = t.log_softmax_rows(self_logits);
    let picked = t.gather(logp, vec![Some(targets.self_action.index())], 1, 1);
    let policy = t.scale(picked, -targets.advantage);

    let mut probs = others[0];
    for &o in &others[1..] {
        probs = stack_rows(t, probs, o);
    }
    let (nll, floored) = nll_on_tape(t, probs, &targets.others_actions)?;
    let kl = kl_from_logits_on_tape(t, selection, n_agents)?;

    let entity_pos: Vec<_> = view.entities.iter().map(|e| e.pos).collect();
    let hard = state.hard();
    let not_hard: Vec<f64> = hard.iter().map(|m| 1.0 - m).collect();
    let not_rho = t.one_minus(rho);
    let (reg, reg_hard) = match config.regularizer {
        Regularizer::None => (t.scalar(0.0), 0.0),
        Regularizer::Num => {
            let r = reg_num_on_tape(t, rho, not_rho, n_agents)?;
            let h = super::losses::reg_num(&hard, &not_hard, n_agents)?.value;
            (r, h)
        }
        Regularizer::Dis => {
            let (own, other) = entity_distances(&entity_pos, view.self_pos(), &view.other_pos())?;
            let r = reg_dis_on_tape(t, rho, not_rho, &own, &other);
            let h = super::losses::reg_dis(&hard, &not_hard, &entity_pos, view.self_pos(), &view.other_pos())?.value;
            (r, h)
        }
    };
    let total = t.weighted_sum(&[
        (config.policy_weight, policy),
        (config.opponent_weight, nll),
        (config.kl_weight, kl),
        (config.reg_weight, reg),
    ]);
    let g = t.backward(total)?;
    Ok(LossReport {
        total: t.item(total),
        policy: t.item(policy),
        opponent_nll: t.item(nll),
        floored,
        kl: t.item(kl),
        regularizer: config.regularizer,
        reg: t.item(reg),
        reg_hard,
        mask_size: state.selected(),
        n_entities: view.n_entities(),
        grads: pv.gradients(params, &g),
    })
}

/// Appends the single row `b` below `a`: flatten `a` into one row, join,
/// then fold back.
fn stack_rows(t: &mut Tape, a: Var, b: Var) -> Var {
    let (ra, c) = t.shape(a);
    assert_eq!(t.shape(b), (1, c), "stack_rows: row shape");
    let flat = t.gather(a, (0..ra * c).map(Some).collect(), 1, ra * c);
    let both = t.concat_cols(flat, b);
    t.gather(both, (0..(ra + 1) * c).map(Some).collect(), ra + 1, c)
}

/// Gumbel noise for `view`, drawn from `rng`.
pub fn noise_for(view: &AgentView, rng: &mut Rng) -> GumbelNoise {
    sample_noise(view.n_entities(), rng)
}
