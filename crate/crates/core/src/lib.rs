//! Deterministic multi-agent RTFM and MESSENGER engines with an entity-level
//! subgoal division core.

pub mod agents;
pub mod endi;
pub mod episode;
pub mod error;
pub mod geom;
pub mod interface;
pub mod manualgen;
pub mod messenger;
pub mod rng;
pub mod rtfm;
pub mod transcript;
pub mod world;

pub use episode::{Episode, EpisodeConfig, Observation};
pub use error::{Error, Result};
pub use geom::{Action, GridPos};
pub use rng::Rng;
pub use world::{EnvKind, Stage};
