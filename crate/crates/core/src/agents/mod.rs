//! Scripted policies and the evaluation harness.

pub mod bfs;
pub mod oracle;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::episode::{Episode, EpisodeConfig, Game};
use crate::error::{Error, Result};
use crate::geom::Action;
use crate::rng::{derive_seed, Rng};

pub use oracle::{min_cost_matching, oracle_messenger, oracle_rtfm};

pub trait Policy {
    fn act(&mut self, episode: &Episode) -> Vec<Action>;
}

/// Ground-truth planner for either game.
#[derive(Clone, Copy, Debug, Default)]
pub struct Oracle;

impl Policy for Oracle {
    fn act(&mut self, episode: &Episode) -> Vec<Action> {
        match episode.game() {
            Game::Rtfm(s) => oracle_rtfm(s),
            Game::Messenger(s) => oracle_messenger(s),
        }
    }
}

/// Uniform over the five actions, independently per agent.
#[derive(Clone, Debug)]
pub struct RandomPolicy {
    rng: Rng,
}

impl RandomPolicy {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: Rng::split(seed, "policy"),
        }
    }
}

impl Policy for RandomPolicy {
    fn act(&mut self, episode: &Episode) -> Vec<Action> {
        (0..episode.n_agents())
            .map(|_| Action::ALL[self.rng.below(Action::COUNT)])
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolicyKind {
    Oracle,
    Random,
}

impl PolicyKind {
    /// A fresh policy for one episode.
    pub fn build(self, episode_seed: u64) -> Box<dyn Policy> {
        match self {
            PolicyKind::Oracle => Box::new(Oracle),
            PolicyKind::Random => Box::new(RandomPolicy::new(episode_seed)),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::Oracle => "oracle",
            PolicyKind::Random => "random",
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "oracle" => Ok(PolicyKind::Oracle),
            "random" => Ok(PolicyKind::Random),
            other => Err(Error::InvalidConfig(format!("unknown policy `{other}`"))),
        }
    }
}

/// Runs one episode to completion and returns it.
pub fn run_episode(config: EpisodeConfig, policy: &mut dyn Policy) -> Result<Episode> {
    let mut ep = Episode::new(config)?;
    while !ep.is_done() {
        let actions = policy.act(&ep);
        ep.step(&actions)?;
    }
    Ok(ep)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub env: String,
    pub stage: String,
    pub split: String,
    pub policy: String,
    pub seed: u64,
    pub episodes: usize,
    pub wins: usize,
    pub win_rate: f64,
    /// Mean over episodes of the agent-averaged return.
    pub mean_return: f64,
    pub mean_length: f64,
}

impl EvalReport {
    pub fn key_values(&self) -> String {
        format!(
            "env={}\nstage={}\nsplit={}\npolicy={}\nseed={}\nepisodes={}\nwins={}\nwin_rate={:.4}\nmean_return={:.4}\nmean_length={:.2}\n",
            self.env,
            self.stage,
            self.split,
            self.policy,
            self.seed,
            self.episodes,
            self.wins,
            self.win_rate,
            self.mean_return,
            self.mean_length
        )
    }

    pub fn json(&self) -> String {
        serde_json::to_string(self).expect("report serializes")
    }
}

/// Episode `i` uses seed `derive_seed(seed, i)`; `config.seed` is ignored.
pub fn evaluate(policy: PolicyKind, config: EpisodeConfig, episodes: usize, seed: u64) -> Result<EvalReport> {
    config.validate()?;
    let mut wins = 0;
    let mut ret = 0.0;
    let mut len = 0u64;
    for i in 0..episodes {
        let ep_seed = derive_seed(seed, i as u64);
        let mut p = policy.build(ep_seed);
        let ep = run_episode(config.with_seed(ep_seed), p.as_mut())?;
        if ep.outcome() == crate::world::Outcome::Won {
            wins += 1;
        }
        let r = ep.returns();
        ret += r.iter().sum::<f64>() / r.len() as f64;
        len += u64::from(ep.step_count());
    }
    let n = episodes.max(1) as f64;
    Ok(EvalReport {
        env: config.env.to_string(),
        stage: config.stage.to_string(),
        split: config.split.to_string(),
        policy: policy.to_string(),
        seed,
        episodes,
        wins,
        win_rate: wins as f64 / n,
        mean_return: ret / n,
        mean_length: len as f64 / n,
    })
}
