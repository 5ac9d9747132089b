//! Types shared by both games.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::GridPos;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnvKind {
    Rtfm,
    Messenger,
}

impl EnvKind {
    pub fn name(self) -> &'static str {
        match self {
            EnvKind::Rtfm => "rtfm",
            EnvKind::Messenger => "messenger",
        }
    }

    pub fn max_stage(self) -> u8 {
        match self {
            EnvKind::Rtfm => 5,
            EnvKind::Messenger => 3,
        }
    }
}

impl fmt::Display for EnvKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EnvKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rtfm" => Ok(EnvKind::Rtfm),
            "messenger" => Ok(EnvKind::Messenger),
            other => Err(Error::InvalidConfig(format!("unknown env `{other}`"))),
        }
    }
}

/// Curriculum stage, 1-based.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Stage(u8);

impl Stage {
    pub const S1: Stage = Stage(1);
    pub const S2: Stage = Stage(2);
    pub const S3: Stage = Stage(3);
    pub const S4: Stage = Stage(4);
    pub const S5: Stage = Stage(5);

    pub fn new(n: u8) -> Result<Self> {
        if (1..=5).contains(&n) {
            Ok(Stage(n))
        } else {
            Err(Error::InvalidConfig(format!("stage S{n} does not exist")))
        }
    }

    pub fn number(self) -> u8 {
        self.0
    }

    pub fn check_for(self, env: EnvKind) -> Result<Self> {
        if self.0 <= env.max_stage() {
            Ok(self)
        } else {
            Err(Error::InvalidConfig(format!(
                "{env} has stages S1..S{}, got {self}",
                env.max_stage()
            )))
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "S{}", self.0)
    }
}

impl FromStr for Stage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let digits = s.strip_prefix(['S', 's']).unwrap_or(s);
        let n: u8 = digits
            .parse()
            .map_err(|_| Error::InvalidConfig(format!("bad stage `{s}`")))?;
        Stage::new(n)
    }
}

impl TryFrom<String> for Stage {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Stage> for String {
    fn from(s: Stage) -> String {
        s.to_string()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Running,
    Won,
    Lost,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentState {
    pub id: usize,
    pub pos: GridPos,
    /// Uid of the carried item (RTFM).
    pub inventory: Option<u32>,
    /// MESSENGER only.
    pub has_message: bool,
    pub alive: bool,
}

impl AgentState {
    pub fn new(id: usize, pos: GridPos) -> Self {
        Self {
            id,
            pos,
            inventory: None,
            has_message: false,
            alive: true,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Enemy,
    Message,
    Goal,
}

impl Role {
    pub fn name(self) -> &'static str {
        match self {
            Role::Enemy => "enemy",
            Role::Message => "message",
            Role::Goal => "goal",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Movement {
    Stationary,
    Chasing,
    Fleeing,
    Random,
}

impl Movement {
    pub fn name(self) -> &'static str {
        match self {
            Movement::Stationary => "stationary",
            Movement::Chasing => "chasing",
            Movement::Fleeing => "fleeing",
            Movement::Random => "random",
        }
    }
}

/// Role-specific ground truth carried by an entity. Indices refer to the
/// episode's word lists.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Attributes {
    Monster {
        monster: u8,
        team: u8,
        element: u8,
        target: bool,
    },
    Item {
        modifier: u8,
        weapon: u8,
        /// Element the modifier beats.
        element: u8,
        correct: bool,
    },
    Messenger {
        entity: u8,
        role: Role,
        movement: Movement,
    },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Entity {
    pub uid: u32,
    /// Opaque render token.
    pub symbol: u32,
    pub name: String,
    pub attrs: Attributes,
    pub pos: GridPos,
    pub alive: bool,
}

impl Entity {
    pub fn is_monster(&self) -> bool {
        matches!(self.attrs, Attributes::Monster { .. })
    }

    pub fn is_item(&self) -> bool {
        matches!(self.attrs, Attributes::Item { .. })
    }

    pub fn role(&self) -> Option<Role> {
        match self.attrs {
            Attributes::Messenger { role, .. } => Some(role),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Pickup,
    Drop,
    Kill,
    /// Engaged the distractor monster.
    Distractor,
    /// Engaged a monster without an effective weapon.
    Unarmed,
    Message,
    Deliver,
    Enemy,
    /// Touched a goal while carrying no message.
    GoalWithoutMessage,
    Win,
    Timeout,
}

impl EventKind {
    pub fn name(self) -> &'static str {
        match self {
            EventKind::Pickup => "pickup",
            EventKind::Drop => "drop",
            EventKind::Kill => "kill",
            EventKind::Distractor => "distractor",
            EventKind::Unarmed => "unarmed",
            EventKind::Message => "message",
            EventKind::Deliver => "deliver",
            EventKind::Enemy => "enemy",
            EventKind::GoalWithoutMessage => "goal_without_message",
            EventKind::Win => "win",
            EventKind::Timeout => "timeout",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "pickup" => EventKind::Pickup,
            "drop" => EventKind::Drop,
            "kill" => EventKind::Kill,
            "distractor" => EventKind::Distractor,
            "unarmed" => EventKind::Unarmed,
            "message" => EventKind::Message,
            "deliver" => EventKind::Deliver,
            "enemy" => EventKind::Enemy,
            "goal_without_message" => EventKind::GoalWithoutMessage,
            "win" => EventKind::Win,
            "timeout" => EventKind::Timeout,
            _ => return None,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Event {
    pub kind: EventKind,
    pub agent: Option<usize>,
    pub entity: Option<u32>,
}

impl Event {
    pub fn new(kind: EventKind, agent: Option<usize>, entity: Option<u32>) -> Self {
        Self {
            kind,
            agent,
            entity,
        }
    }
}

impl fmt::Display for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.kind.name())?;
        let opt = |v: Option<String>| v.unwrap_or_else(|| "-".into());
        write!(
            f,
            "/{}/{}",
            opt(self.agent.map(|a| a.to_string())),
            opt(self.entity.map(|e| e.to_string()))
        )
    }
}

impl FromStr for Event {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Transcript(format!("bad event `{s}`"));
        let mut parts = s.split('/');
        let kind = parts.next().and_then(EventKind::parse).ok_or_else(bad)?;
        let agent = match parts.next().ok_or_else(bad)? {
            "-" => None,
            v => Some(v.parse().map_err(|_| bad())?),
        };
        let entity = match parts.next().ok_or_else(bad)? {
            "-" => None,
            v => Some(v.parse().map_err(|_| bad())?),
        };
        if parts.next().is_some() {
            return Err(bad());
        }
        Ok(Event::new(kind, agent, entity))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepResult {
    pub rewards: Vec<f64>,
    pub events: Vec<Event>,
    pub done: bool,
    pub win: bool,
}

/// Per-agent reward bookkeeping in integer hundredths, so that returns are
/// exact sums of event rewards plus `step_penalty * steps`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RewardLedger {
    cents: Vec<i64>,
    steps: u32,
    step_penalty: f64,
}

impl RewardLedger {
    pub fn new(n_agents: usize, step_penalty: f64) -> Self {
        Self {
            cents: vec![0; n_agents],
            steps: 0,
            step_penalty,
        }
    }

    /// Records one step; `step_cents` are this step's event rewards.
    pub fn record(&mut self, step_cents: &[i64]) -> Vec<f64> {
        self.steps += 1;
        step_cents
            .iter()
            .zip(self.cents.iter_mut())
            .map(|(&c, total)| {
                *total += c;
                c as f64 / 100.0 + self.step_penalty
            })
            .collect()
    }

    pub fn steps(&self) -> u32 {
        self.steps
    }

    /// Episode return per agent.
    pub fn returns(&self) -> Vec<f64> {
        self.cents
            .iter()
            .map(|&c| c as f64 / 100.0 + self.step_penalty * f64::from(self.steps))
            .collect()
    }

    pub fn event_cents(&self) -> &[i64] {
        &self.cents
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stage_parsing() {
        assert_eq!("S3".parse::<Stage>().unwrap(), Stage::S3);
        assert_eq!("4".parse::<Stage>().unwrap(), Stage::S4);
        assert!("S6".parse::<Stage>().is_err());
        assert!(Stage::S4.check_for(EnvKind::Messenger).is_err());
    }

    #[test]
    fn event_round_trip() {
        for e in [
            Event::new(EventKind::Kill, Some(1), Some(3)),
            Event::new(EventKind::Timeout, None, None),
        ] {
            assert_eq!(e.to_string().parse::<Event>().unwrap(), e);
        }
        assert!("kill/1".parse::<Event>().is_err());
    }

    #[test]
    fn idle_return_is_exact() {
        let mut l = RewardLedger::new(2, -0.02);
        for _ in 0..35 {
            l.record(&[0, 0]);
        }
        assert_eq!(l.returns(), vec![-0.02 * 35.0; 2]);
    }

    #[test]
    fn step_reward_includes_penalty() {
        let mut l = RewardLedger::new(2, -0.02);
        assert_eq!(l.record(&[100, -100]), vec![0.98, -1.02]);
    }
}
