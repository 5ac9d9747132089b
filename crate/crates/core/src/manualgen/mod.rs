//! Template corpus, manuals and train/eval splits.

pub mod corpus;
pub mod render;
pub mod splits;
pub mod vocab;

pub use corpus::{CorpusCounts, Section, SplitTag, Template, TemplateCorpus};
pub use render::{render_messenger_manual, render_rtfm_manual, Manual, Provenance, Sentence};
pub use splits::{make_splits, MessengerCombo, Split, SplitSpec};
