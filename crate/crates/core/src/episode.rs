//! One running game of either kind, with its manual and transcript.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::Action;
use crate::manualgen::render::{render_messenger_manual, render_rtfm_manual, Manual};
use crate::manualgen::{Split, SplitSpec, TemplateCorpus};
use crate::messenger::{generate_messenger_with, MessengerConfig, MessengerObservation, MessengerState};
use crate::rng::Rng;
use crate::rtfm::{generate_rtfm_with, RtfmConfig, RtfmObservation, RtfmState};
use crate::transcript::{Transcript, TranscriptHeader, TranscriptStep};
use crate::world::{AgentState, Entity, EnvKind, Outcome, Stage, StepResult};

pub const DEFAULT_AGENTS: usize = 2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EpisodeConfig {
    pub env: EnvKind,
    pub stage: Stage,
    pub split: Split,
    pub seed: u64,
    pub n_agents: usize,
}

impl EpisodeConfig {
    pub fn new(env: EnvKind, stage: Stage, split: Split, seed: u64, n_agents: usize) -> Self {
        Self {
            env,
            stage,
            split,
            seed,
            n_agents,
        }
    }

    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        self.stage.check_for(self.env)?;
        match self.env {
            EnvKind::Rtfm => RtfmConfig::new(self.stage, self.split, self.n_agents).map(|_| ()),
            EnvKind::Messenger => {
                MessengerConfig::new(self.stage, self.split, self.n_agents).map(|_| ())
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Game {
    Rtfm(RtfmState),
    Messenger(MessengerState),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Observation {
    Rtfm(RtfmObservation),
    Messenger(MessengerObservation),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Episode {
    config: EpisodeConfig,
    game: Game,
    manual: Manual,
    transcript: Transcript,
}

impl Episode {
    pub fn new(config: EpisodeConfig) -> Result<Self> {
        Self::with_splits(config, SplitSpec::standard(), &TemplateCorpus::standard())
    }

    pub fn with_splits(config: EpisodeConfig, splits: &SplitSpec, corpus: &TemplateCorpus) -> Result<Self> {
        config.validate()?;
        let rng = Rng::split(config.seed, "episode");
        let mut manual_rng = rng.child("manual");
        let (game, manual, digest, size) = match config.env {
            EnvKind::Rtfm => {
                let cfg = RtfmConfig::new(config.stage, config.split, config.n_agents)?;
                let state = generate_rtfm_with(&cfg, splits, &rng)?;
                let manual = render_rtfm_manual(&state.assignment, config.stage, corpus, &mut manual_rng)?;
                let digest = state.assignment.digest();
                let size = state.size();
                (Game::Rtfm(state), manual, digest, size)
            }
            EnvKind::Messenger => {
                let cfg = MessengerConfig::new(config.stage, config.split, config.n_agents)?;
                let state = generate_messenger_with(&cfg, splits, &rng)?;
                let manual = render_messenger_manual(&state.assignment, corpus, splits, &mut manual_rng)?;
                let digest = state.assignment.digest();
                let size = state.size();
                (Game::Messenger(state), manual, digest, size)
            }
        };
        let transcript = Transcript::new(TranscriptHeader {
            config,
            grid: size,
            assignment: digest,
        });
        Ok(Self {
            config,
            game,
            manual,
            transcript,
        })
    }

    pub fn config(&self) -> &EpisodeConfig {
        &self.config
    }

    pub fn game(&self) -> &Game {
        &self.game
    }

    pub fn manual(&self) -> &Manual {
        &self.manual
    }

    pub fn transcript(&self) -> &Transcript {
        &self.transcript
    }

    pub fn n_agents(&self) -> usize {
        self.config.n_agents
    }

    pub fn size(&self) -> usize {
        match &self.game {
            Game::Rtfm(s) => s.size(),
            Game::Messenger(s) => s.size(),
        }
    }

    pub fn step_count(&self) -> u32 {
        match &self.game {
            Game::Rtfm(s) => s.step,
            Game::Messenger(s) => s.step,
        }
    }

    pub fn outcome(&self) -> Outcome {
        match &self.game {
            Game::Rtfm(s) => s.outcome,
            Game::Messenger(s) => s.outcome,
        }
    }

    pub fn is_done(&self) -> bool {
        self.outcome() != Outcome::Running
    }

    pub fn returns(&self) -> Vec<f64> {
        match &self.game {
            Game::Rtfm(s) => s.returns(),
            Game::Messenger(s) => s.returns(),
        }
    }

    pub fn agents(&self) -> &[AgentState] {
        match &self.game {
            Game::Rtfm(s) => &s.agents,
            Game::Messenger(s) => &s.agents,
        }
    }

    pub fn entities(&self) -> &[Entity] {
        match &self.game {
            Game::Rtfm(s) => &s.entities,
            Game::Messenger(s) => &s.entities,
        }
    }

    pub fn goal_text(&self) -> String {
        self.manual.goal_text().to_owned()
    }

    pub fn step(&mut self, actions: &[Action]) -> Result<StepResult> {
        let result = match &mut self.game {
            Game::Rtfm(s) => s.step(actions)?,
            Game::Messenger(s) => s.step(actions)?,
        };
        self.transcript.steps.push(TranscriptStep {
            t: self.step_count(),
            actions: actions.to_vec(),
            rewards: result.rewards.clone(),
            events: result.events.clone(),
            done: result.done,
            win: result.win,
        });
        Ok(result)
    }

    pub fn observe(&self, agent: usize) -> Result<Observation> {
        match &self.game {
            Game::Rtfm(s) => s.observe(agent).map(Observation::Rtfm),
            Game::Messenger(s) => s.observe(agent).map(Observation::Messenger),
        }
    }

    pub fn observations(&self) -> Vec<Observation> {
        (0..self.n_agents())
            .map(|i| self.observe(i).expect("agent index in range"))
            .collect()
    }

    pub fn render(&self) -> Vec<String> {
        match &self.game {
            Game::Rtfm(s) => s.render(),
            Game::Messenger(s) => s.render(),
        }
    }

    pub fn rtfm(&self) -> Option<&RtfmState> {
        match &self.game {
            Game::Rtfm(s) => Some(s),
            Game::Messenger(_) => None,
        }
    }

    pub fn messenger(&self) -> Option<&MessengerState> {
        match &self.game {
            Game::Messenger(s) => Some(s),
            Game::Rtfm(_) => None,
        }
    }
}

/// Parses a comma-separated joint action such as `up,stay`.
pub fn parse_actions(text: &str) -> Result<Vec<Action>> {
    if text.trim().is_empty() {
        return Err(Error::UnknownAction(String::new()));
    }
    text.split(',').map(|a| a.trim().parse()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn episodes_are_reproducible() {
        let cfg = EpisodeConfig::new(EnvKind::Rtfm, Stage::S3, Split::Train, 12, 2);
        let mut a = Episode::new(cfg).unwrap();
        let mut b = Episode::new(cfg).unwrap();
        for t in 0..30 {
            let act = [Action::ALL[t % 5], Action::ALL[(t * 3) % 5]];
            if a.is_done() {
                break;
            }
            assert_eq!(a.step(&act).unwrap(), b.step(&act).unwrap());
        }
        assert_eq!(a.transcript().to_text(), b.transcript().to_text());
    }

    #[test]
    fn messenger_rejects_new_word_split() {
        let cfg = EpisodeConfig::new(EnvKind::Messenger, Stage::S1, Split::EvalNew, 1, 2);
        assert!(Episode::new(cfg).is_err());
    }

    #[test]
    fn parse_joint_action() {
        assert_eq!(parse_actions("up, stay").unwrap(), vec![Action::Up, Action::Stay]);
        assert!(parse_actions("jump").is_err());
    }
}
