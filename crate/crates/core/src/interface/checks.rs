//! Self-check suites run by `endi check`.
//!
//! Each suite returns one [`CheckResult`]. `Scale::Full` uses the sample
//! sizes of the acceptance gate; `Scale::Quick` trims them for a fast smoke
//! run.

use std::collections::BTreeSet;
use std::fmt;

use crate::agents::{evaluate, run_episode, PolicyKind, RandomPolicy};
use crate::endi::gradcheck::{check, check_params, GradCheck};
use crate::endi::{
    endi_loss, endi_step_with_noise, gumbel_mask_with_noise, kl_to_target, opponent_nll, reg_dis, reg_num,
    sample_noise, self_logits_with_mask, AgentView, EndiConfig, EndiParams, MaskMode, Targets, Vocabulary,
    DEFAULT_WIDTH,
};
use crate::episode::{Episode, EpisodeConfig};
use crate::geom::{Action, GridPos};
use crate::manualgen::corpus::{
    MESSENGER_DESCRIPTIONS, MESSENGER_FILLINGS, MESSENGER_TEMPLATES, RTFM_GOAL_TEMPLATES, RTFM_MODIFIER_TEMPLATES,
    RTFM_TEAM_TEMPLATES,
};
use crate::manualgen::vocab::{RTFM_NEW_WORDS, RTFM_TRAIN_WORDS};
use crate::manualgen::{Split, SplitSpec, TemplateCorpus};
use crate::rng::{derive_seed, Rng};
use crate::rtfm::{monster_direction, CHASE_PROB, STEP_PENALTY};
use crate::world::{EnvKind, EventKind, Stage};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scale {
    Quick,
    Full,
}

impl Scale {
    fn pick(self, quick: usize, full: usize) -> usize {
        match self {
            Scale::Quick => quick,
            Scale::Full => full,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl CheckResult {
    fn new(name: &'static str, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            name,
            passed,
            detail: detail.into(),
        }
    }

    fn from_result(name: &'static str, r: crate::Result<(bool, String)>) -> Self {
        match r {
            Ok((passed, detail)) => Self::new(name, passed, detail),
            Err(e) => Self::new(name, false, format!("error: {e}")),
        }
    }
}

impl fmt::Display for CheckResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{tag} {:<14} {}", self.name, self.detail)
    }
}

pub fn run_all(scale: Scale) -> Vec<CheckResult> {
    vec![
        determinism(scale),
        oracle_s1(scale),
        solvability(scale),
        reward_arithmetic(),
        chase_statistics(scale),
        split_disjointness(),
        corpus_counts(),
        gradients(scale),
        gumbel_frequency(scale),
        mask_no_leakage(scale),
        closed_forms(),
    ]
}

fn stages(env: EnvKind) -> Vec<Stage> {
    (1..=env.max_stage()).map(|n| Stage::new(n).expect("valid stage")).collect()
}

/// Random-policy episodes replayed from their transcripts and from scratch.
pub fn determinism(scale: Scale) -> CheckResult {
    let per_env = scale.pick(10, 100);
    let run = || -> crate::Result<(bool, String)> {
        let mut bad = 0;
        for env in [EnvKind::Rtfm, EnvKind::Messenger] {
            let st = stages(env);
            for i in 0..per_env {
                let seed = derive_seed(0xD37E, i as u64);
                let cfg = EpisodeConfig::new(env, st[i % st.len()], Split::Train, seed, 2);
                let a = run_episode(cfg, &mut RandomPolicy::new(seed))?;
                let b = run_episode(cfg, &mut RandomPolicy::new(seed))?;
                let text = a.transcript().to_text();
                let replayed = a.transcript().replay()?.to_text();
                if text != b.transcript().to_text() || text != replayed {
                    bad += 1;
                }
            }
        }
        Ok((bad == 0, format!("{} triples, {bad} mismatched", 2 * per_env)))
    };
    CheckResult::from_result("determinism", run())
}

pub fn oracle_s1(scale: Scale) -> CheckResult {
    let n = scale.pick(100, 1000);
    let run = || -> crate::Result<(bool, String)> {
        let mut ok = true;
        let mut parts = Vec::new();
        for env in [EnvKind::Rtfm, EnvKind::Messenger] {
            let cfg = EpisodeConfig::new(env, Stage::S1, Split::Train, 0, 2);
            let r = evaluate(PolicyKind::Oracle, cfg, n, 1)?;
            ok &= r.win_rate >= 0.99;
            parts.push(format!("{env}={:.3}", r.win_rate));
        }
        Ok((ok, format!("{} (n={n}, need >= 0.99)", parts.join(" "))))
    };
    CheckResult::from_result("oracle_s1", run())
}

pub fn solvability(scale: Scale) -> CheckResult {
    let n = scale.pick(50, 500);
    let run = || -> crate::Result<(bool, String)> {
        let mut ok = true;
        let mut parts = Vec::new();
        let cases = [
            (EnvKind::Rtfm, Stage::S2),
            (EnvKind::Rtfm, Stage::S3),
            (EnvKind::Rtfm, Stage::S4),
            (EnvKind::Rtfm, Stage::S5),
            (EnvKind::Messenger, Stage::S2),
        ];
        for (env, stage) in cases {
            let cfg = EpisodeConfig::new(env, stage, Split::Train, 0, 2);
            let r = evaluate(PolicyKind::Oracle, cfg, n, 2)?;
            ok &= r.win_rate >= 0.95;
            parts.push(format!("{env}/{stage}={:.3}", r.win_rate));
        }
        Ok((ok, format!("{} (n={n}, need >= 0.95)", parts.join(" "))))
    };
    CheckResult::from_result("solvability", run())
}

/// Idle RTFM returns and the MESSENGER pickup reward, compared bit for bit.
pub fn reward_arithmetic() -> CheckResult {
    let run = || -> crate::Result<(bool, String)> {
        let mut ok = true;
        let mut idle_runs = 0;
        for seed in 0..20 {
            let mut ep = Episode::new(EpisodeConfig::new(EnvKind::Rtfm, Stage::S1, Split::Train, seed, 2))?;
            while !ep.is_done() {
                ep.step(&[Action::Stay, Action::Stay])?;
            }
            let t = f64::from(ep.step_count());
            ok &= ep.returns().iter().all(|&r| r == STEP_PENALTY * t);
            idle_runs += 1;
        }
        let mut pickups = 0;
        for seed in 0..50 {
            let cfg = EpisodeConfig::new(EnvKind::Messenger, Stage::S3, Split::Train, seed, 2);
            let ep = run_episode(cfg, &mut crate::agents::Oracle)?;
            for s in &ep.transcript().steps {
                for (agent, &r) in s.rewards.iter().enumerate() {
                    let mine: Vec<EventKind> = s
                        .events
                        .iter()
                        .filter(|e| e.agent == Some(agent))
                        .map(|e| e.kind)
                        .collect();
                    if mine == [EventKind::Message] {
                        pickups += 1;
                        ok &= r == 0.2;
                    }
                }
            }
        }
        ok &= pickups > 0;
        Ok((ok, format!("{idle_runs} idle episodes, {pickups} pickups")))
    };
    CheckResult::from_result("rewards", run())
}

/// Monster at (4,4), agent at (4,0): chase moves left, a random move also
/// picks left a quarter of the time.
pub fn chase_statistics(scale: Scale) -> CheckResult {
    let n = scale.pick(20_000, 100_000);
    let expected = CHASE_PROB + (1.0 - CHASE_PROB) * 0.25;
    let mut rng = Rng::split(5, "chase");
    let agents = [GridPos::new(4, 0)];
    let hits = (0..n)
        .filter(|_| monster_direction(GridPos::new(4, 4), &agents, CHASE_PROB, &mut rng) == Action::Left)
        .count();
    let freq = hits as f64 / n as f64;
    CheckResult::new(
        "chase",
        (freq - expected).abs() <= 0.01,
        format!("left={freq:.4} expected={expected:.4} n={n}"),
    )
}

pub fn split_disjointness() -> CheckResult {
    let spec = SplitSpec::standard();
    let (tm, td) = spec.rtfm_pools(Split::Train);
    let (em, ed) = spec.rtfm_pools(Split::Eval);
    let overlap_m = tm.iter().filter(|i| em.binary_search(i).is_ok()).count();
    let overlap_d = td.iter().filter(|i| ed.binary_search(i).is_ok()).count();

    let train_words: BTreeSet<&str> = [
        RTFM_TRAIN_WORDS.monsters,
        RTFM_TRAIN_WORDS.weapons,
        RTFM_TRAIN_WORDS.modifiers,
    ]
    .concat()
    .into_iter()
    .collect();
    let new_overlap = [RTFM_NEW_WORDS.monsters, RTFM_NEW_WORDS.weapons, RTFM_NEW_WORDS.modifiers]
        .concat()
        .into_iter()
        .filter(|w| train_words.contains(w))
        .count();

    let train: BTreeSet<[u8; 5]> = spec.messenger_combos(Split::Train).iter().map(|c| c.entities()).collect();
    let overlap_c = spec
        .messenger_combos(Split::Eval)
        .iter()
        .filter(|c| train.contains(&c.entities()))
        .count();
    let ok = overlap_m == 0 && overlap_d == 0 && new_overlap == 0 && overlap_c == 0;
    CheckResult::new(
        "splits",
        ok,
        format!(
            "rtfm overlap {overlap_m}+{overlap_d}, new-word overlap {new_overlap}, messenger overlap {overlap_c}, digest {}",
            spec.digest()
        ),
    )
}

pub fn corpus_counts() -> CheckResult {
    corpus_counts_of(&TemplateCorpus::standard())
}

pub fn corpus_counts_of(corpus: &TemplateCorpus) -> CheckResult {
    let c = corpus.counts();
    let ok = c.rtfm_goal == RTFM_GOAL_TEMPLATES
        && c.rtfm_team == RTFM_TEAM_TEMPLATES
        && c.rtfm_modifier == RTFM_MODIFIER_TEMPLATES
        && c.messenger == MESSENGER_TEMPLATES
        && c.messenger_fillings == MESSENGER_FILLINGS
        && c.messenger_descriptions == MESSENGER_DESCRIPTIONS;
    CheckResult::new(
        "corpus",
        ok,
        format!(
            "rtfm {}/{}/{}, messenger {}x{}={}",
            c.rtfm_goal, c.rtfm_team, c.rtfm_modifier, c.messenger, c.messenger_fillings, c.messenger_descriptions
        ),
    )
}

fn episode_view(env: EnvKind, stage: Stage, seed: u64, n: usize) -> crate::Result<(AgentView, Vocabulary)> {
    let vocab = Vocabulary::for_split(Split::Train);
    let ep = Episode::new(EpisodeConfig::new(env, stage, Split::Train, seed, n))?;
    Ok((AgentView::from_episode(&ep, 0, &vocab)?, vocab))
}

/// Finite-difference checks of every differentiable objective.
pub fn gradient_suite(draws: usize, per_tensor: usize) -> crate::Result<GradCheck> {
    let mut rng = Rng::split(8, "gradients");
    let mut total = GradCheck::default();
    let views = [
        episode_view(EnvKind::Rtfm, Stage::S3, 21, 2)?,
        episode_view(EnvKind::Rtfm, Stage::S5, 4, 3)?,
        episode_view(EnvKind::Messenger, Stage::S3, 9, 2)?,
    ];
    for draw in 0..draws {
        let n_agents = 2 + rng.below(2);
        let k = 3 + rng.below(5);
        let rho: Vec<f64> = (0..k).map(|_| 0.02 + 0.96 * rng.uniform()).collect();
        let other: Vec<f64> = (0..k).map(|_| 0.02 + 0.96 * rng.uniform()).collect();

        let kl = kl_to_target(&rho, n_agents)?;
        let f = |x: &[Vec<f64>]| kl_to_target(&x[0], n_agents).map(|o| o.value).unwrap_or(f64::NAN);
        total.merge(&check(&f, &[rho.clone()], &kl.grads, None, &mut rng));

        let rn = reg_num(&rho, &other, n_agents)?;
        let f = |x: &[Vec<f64>]| reg_num(&x[0], &x[1], n_agents).map(|o| o.value).unwrap_or(f64::NAN);
        total.merge(&check(&f, &[rho.clone(), other.clone()], &rn.grads, None, &mut rng));

        let cells: Vec<GridPos> = (0..k).map(|_| GridPos::new(rng.below(8), rng.below(8))).collect();
        let me = GridPos::new(rng.below(8), rng.below(8));
        let others: Vec<GridPos> = (1..n_agents).map(|_| GridPos::new(rng.below(8), rng.below(8))).collect();
        let rd = reg_dis(&rho, &other, &cells, me, &others)?;
        let f = |x: &[Vec<f64>]| {
            reg_dis(&x[0], &x[1], &cells, me, &others)
                .map(|o| o.value)
                .unwrap_or(f64::NAN)
        };
        total.merge(&check(&f, &[rho.clone(), other.clone()], &rd.grads, None, &mut rng));

        let pred: Vec<Vec<f64>> = (0..n_agents - 1)
            .map(|_| {
                let raw: Vec<f64> = (0..Action::COUNT).map(|_| 0.05 + rng.uniform()).collect();
                let s: f64 = raw.iter().sum();
                raw.into_iter().map(|v| v / s).collect()
            })
            .collect();
        let actual: Vec<Action> = pred.iter().map(|_| Action::ALL[rng.below(Action::COUNT)]).collect();
        let nll = opponent_nll(&pred, &actual)?;
        let f = |x: &[Vec<f64>]| opponent_nll(x, &actual).map(|o| o.value).unwrap_or(f64::NAN);
        total.merge(&check(&f, &pred, &nll.grads, None, &mut rng));

        let (view, vocab) = &views[draw % views.len()];
        let n = view.n_agents();
        let params = EndiParams::random(vocab.len(), DEFAULT_WIDTH, n, 0.3, &mut rng)?;
        let noise = sample_noise(view.n_entities(), &mut rng);
        let cfg = EndiConfig {
            mask_mode: MaskMode::Relaxed,
            ..EndiConfig::default()
        };
        let targets = Targets {
            self_action: Action::ALL[rng.below(Action::COUNT)],
            advantage: rng.uniform() * 2.0 - 1.0,
            others_actions: (1..n).map(|_| Action::ALL[rng.below(Action::COUNT)]).collect(),
        };
        let report = endi_loss(view, &params, &cfg, &noise, &targets)?;
        let loss = |q: &EndiParams| {
            endi_loss(view, q, &cfg, &noise, &targets)
                .map(|r| r.total)
                .unwrap_or(f64::NAN)
        };
        total.merge(&check_params(&loss, &params, &report.grads, Some(per_tensor), &mut rng));
    }
    Ok(total)
}

pub fn gradients(scale: Scale) -> CheckResult {
    let draws = scale.pick(10, 100);
    let run = || -> crate::Result<(bool, String)> {
        let g = gradient_suite(draws, 8)?;
        Ok((
            g.max_rel_err < 1e-6,
            format!(
                "max_rel={:.2e} max_abs={:.2e} checked={} draws={draws}",
                g.max_rel_err, g.max_abs_err, g.checked
            ),
        ))
    };
    CheckResult::from_result("gradients", run())
}

/// Hard-selection frequency against σ(ℓ) for a single entity whose logit
/// pair is (0, ℓ).
pub fn gumbel_frequency(scale: Scale) -> CheckResult {
    let n = scale.pick(20_000, 100_000);
    let run = || -> crate::Result<(bool, String)> {
        let mut worst: f64 = 0.0;
        let mut rng = Rng::split(9, "gumbel");
        for tau in [0.1, 1.0] {
            for l in [-2.0, 0.0, 2.0] {
                let logits = [[0.0, l]];
                let mut hits = 0usize;
                for _ in 0..n {
                    let noise = sample_noise(1, &mut rng);
                    if gumbel_mask_with_noise(&logits, &noise, tau)?.mask[0] {
                        hits += 1;
                    }
                }
                let expected = 1.0 / (1.0 + (-l).exp());
                worst = worst.max((hits as f64 / n as f64 - expected).abs());
            }
        }
        Ok((worst <= 0.01, format!("max |freq - sigmoid| = {worst:.4} n={n}")))
    };
    CheckResult::from_result("gumbel", run())
}

/// Sampled masks partition the entities, and moving or renaming entities
/// outside the mask leaves the self-policy logits bit-identical.
pub fn mask_no_leakage(scale: Scale) -> CheckResult {
    let draws = scale.pick(20, 200);
    let run = || -> crate::Result<(bool, String)> {
        let mut rng = Rng::split(10, "leakage");
        let mut bad = 0;
        for d in 0..draws {
            let env = if d % 2 == 0 { EnvKind::Rtfm } else { EnvKind::Messenger };
            let (view, vocab) = episode_view(env, Stage::S2, d as u64, 2)?;
            let params = EndiParams::random(vocab.len(), DEFAULT_WIDTH, 2, 0.5, &mut rng)?;
            let noise = sample_noise(view.n_entities(), &mut rng);
            let out = endi_step_with_noise(&view, &params, &EndiConfig::default(), &noise)?;
            let mask = &out.subgoal.mask;
            let (mine, theirs) = crate::endi::mask_apply(&view, mask)?;
            if mine.n_entities() + theirs.n_entities() != view.n_entities() {
                bad += 1;
                continue;
            }
            let mut perturbed = view.clone();
            for (e, &keep) in perturbed.entities.iter_mut().zip(mask) {
                if !keep {
                    e.pos = GridPos::new(rng.below(view.size), rng.below(view.size));
                    let tok = rng.below(vocab.len());
                    e.tokens = vec![tok];
                }
            }
            let after = self_logits_with_mask(&perturbed, &params, mask)?;
            if out.self_logits.map(f64::to_bits) != after.map(f64::to_bits) {
                bad += 1;
            }
        }
        Ok((bad == 0, format!("{draws} draws, {bad} failures")))
    };
    CheckResult::from_result("no_leakage", run())
}

pub fn closed_forms() -> CheckResult {
    let run = || -> crate::Result<(bool, String)> {
        let mut ok = true;
        ok &= kl_to_target(&[0.5, 0.5], 2)?.value == 0.0;
        ok &= kl_to_target(&[1.0 / 3.0; 4], 3)?.value.abs() < 1e-15;
        let split = |k: usize| -> (Vec<f64>, Vec<f64>) {
            let m: Vec<f64> = (0..6).map(|i| if i < k { 1.0 } else { 0.0 }).collect();
            let rest = m.iter().map(|x| 1.0 - x).collect();
            (m, rest)
        };
        for (k, n, want) in [(3, 2, 0.0), (4, 2, 2.0), (2, 3, 0.0)] {
            let (m, rest) = split(k);
            ok &= reg_num(&m, &rest, n)?.value == want;
        }
        let p = GridPos::new;
        for (cells, want) in [
            ([p(1, 2), p(3, 4)], 4.0),
            ([p(0, 0), p(3, 3)], 0.0),
            ([p(1, 3), p(3, 4)], 5.0),
        ] {
            ok &= reg_dis(&[1.0, 0.0], &[0.0, 1.0], &cells, p(0, 0), &[p(3, 3)])?.value == want;
        }
        ok &= reg_dis(&[0.0], &[1.0], &[p(5, 5)], p(0, 0), &[p(9, 9), p(5, 6)])?.value == 1.0;
        Ok((ok, "kl, reg_num, reg_dis closed forms".into()))
    };
    CheckResult::from_result("closed_forms", run())
}
