//! Browser bindings: step an episode, sample Gumbel masks and inspect the
//! subgoal division of a randomly initialised model.
//!
//! The `*_json` functions hold the logic and run natively as well; the
//! `#[wasm_bindgen]` wrappers only translate errors.

use serde_json::json;
use wasm_bindgen::prelude::*;

use endi::agents::{Oracle, Policy, RandomPolicy};
use endi::endi::{
    endi_step, gumbel_mask, AgentView, EndiConfig, EndiParams, Vocabulary, DEFAULT_WIDTH,
};
use endi::episode::parse_actions;
use endi::manualgen::Split;
use endi::{EnvKind, Episode, EpisodeConfig, Rng, Stage};

type Res<T> = Result<T, String>;

fn err<E: ToString>(e: E) -> String {
    e.to_string()
}

#[wasm_bindgen]
pub struct Game {
    episode: Episode,
    random: RandomPolicy,
}

impl Game {
    pub fn create(env: &str, stage: &str, seed: u64, agents: usize) -> Res<Game> {
        let env: EnvKind = env.parse().map_err(err)?;
        let stage: Stage = stage.parse().map_err(err)?;
        let episode = Episode::new(EpisodeConfig::new(env, stage, Split::Train, seed, agents)).map_err(err)?;
        Ok(Game {
            episode,
            random: RandomPolicy::new(seed),
        })
    }

    /// `policy` is `oracle`, `random`, or a joint action such as `up,stay`.
    pub fn step_json(&mut self, policy: &str) -> Res<String> {
        if self.episode.is_done() {
            return Err("episode is finished".into());
        }
        let actions = match policy {
            "oracle" => Oracle.act(&self.episode),
            "random" => self.random.act(&self.episode),
            joint => parse_actions(joint).map_err(err)?,
        };
        let r = self.episode.step(&actions).map_err(err)?;
        let events: Vec<String> = r.events.iter().map(|e| e.to_string()).collect();
        Ok(json!({
            "t": self.episode.step_count(),
            "actions": actions.iter().map(|a| a.name()).collect::<Vec<_>>(),
            "rewards": r.rewards,
            "events": events,
            "done": r.done,
            "win": r.win,
        })
        .to_string())
    }

    /// Selection probabilities and one sampled mask for `agent`'s view,
    /// under freshly drawn parameters.
    pub fn subgoal_json(&self, agent: usize, seed: u64, tau: f64) -> Res<String> {
        let vocab = Vocabulary::for_split(self.episode.config().split);
        let view = AgentView::from_episode(&self.episode, agent, &vocab).map_err(err)?;
        let mut rng = Rng::split(seed, "web-subgoal");
        let params =
            EndiParams::random(vocab.len(), DEFAULT_WIDTH, view.n_agents(), 0.5, &mut rng).map_err(err)?;
        let cfg = EndiConfig {
            tau,
            ..EndiConfig::default()
        };
        let out = endi_step(&view, &params, &cfg, &mut rng).map_err(err)?;
        let names: Vec<String> = view
            .entities
            .iter()
            .map(|item| {
                item.entity
                    .and_then(|uid| self.episode.entities().iter().find(|e| e.uid == uid))
                    .map(|e| e.name.clone())
                    .unwrap_or_default()
            })
            .collect();
        let rows: Vec<_> = names
            .iter()
            .zip(&view.entities)
            .enumerate()
            .map(|(i, (name, item))| {
                json!({
                    "name": name,
                    "row": item.pos.row,
                    "col": item.pos.col,
                    "rho": out.subgoal.rho[i],
                    "selected": out.subgoal.mask[i],
                })
            })
            .collect();
        Ok(json!({
            "agent": agent,
            "entities": rows,
            "action": out.greedy().name(),
        })
        .to_string())
    }
}

#[wasm_bindgen]
impl Game {
    #[wasm_bindgen(constructor)]
    pub fn new(env: &str, stage: &str, seed: u64, agents: usize) -> Result<Game, JsValue> {
        Game::create(env, stage, seed, agents).map_err(|e| JsValue::from_str(&e))
    }

    pub fn render(&self) -> String {
        self.episode.render().join("\n")
    }

    pub fn manual(&self) -> String {
        let m = self.episode.manual();
        let mut lines = vec![m.goal_text().to_owned()];
        lines.extend(m.sentences());
        lines.join("\n")
    }

    pub fn done(&self) -> bool {
        self.episode.is_done()
    }

    pub fn transcript(&self) -> String {
        self.episode.transcript().to_text()
    }

    pub fn step(&mut self, policy: &str) -> Result<String, JsValue> {
        self.step_json(policy).map_err(|e| JsValue::from_str(&e))
    }

    pub fn subgoal(&self, agent: usize, seed: u64, tau: f64) -> Result<String, JsValue> {
        self.subgoal_json(agent, seed, tau).map_err(|e| JsValue::from_str(&e))
    }
}

/// Fraction of `samples` hard masks that select an entity whose logit pair is
/// `(0, logit)`, next to the logistic value it should approach.
pub fn gumbel_frequency_json(logit: f64, tau: f64, samples: usize, seed: u64) -> Res<String> {
    let mut rng = Rng::split(seed, "web-gumbel");
    let mut hits = 0usize;
    let mut relaxed_sum = 0.0;
    for _ in 0..samples {
        let s = gumbel_mask(&[[0.0, logit]], tau, &mut rng).map_err(err)?;
        hits += usize::from(s.mask[0]);
        relaxed_sum += s.relaxed[0][1];
    }
    let n = samples.max(1) as f64;
    Ok(json!({
        "samples": samples,
        "selected": hits as f64 / n,
        "relaxed_mean": relaxed_sum / n,
        "sigmoid": 1.0 / (1.0 + (-logit).exp()),
    })
    .to_string())
}

#[wasm_bindgen]
pub fn gumbel_frequency(logit: f64, tau: f64, samples: usize, seed: u64) -> Result<String, JsValue> {
    gumbel_frequency_json(logit, tau, samples, seed).map_err(|e| JsValue::from_str(&e))
}
