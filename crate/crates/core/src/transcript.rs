//! Episode transcripts.
//!
//! Text format, UTF-8, one record per line:
//!
//! ```text
//! endi-transcript v1 env=rtfm stage=S1 split=train seed=7 agents=2 grid=8 assignment=<16 hex>
//! t=1 a=up,stay r=-0.02,-0.02 ev=- done=0 win=0
//! t=2 a=left,down r=0.98,-0.02 ev=pickup/1/3;kill/0/0 done=0 win=0
//! ```
//!
//! Events are `kind/agent/entity` with `-` for an absent field, joined by `;`;
//! `ev=-` means no events. Rewards use the shortest decimal that round-trips
//! the 64-bit value.

use std::fmt::Write as _;

use crate::episode::{Episode, EpisodeConfig};
use crate::error::{Error, Result};
use crate::geom::Action;
use crate::world::Event;

pub const MAGIC: &str = "endi-transcript";
pub const VERSION: &str = "v1";

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TranscriptHeader {
    pub config: EpisodeConfig,
    pub grid: usize,
    pub assignment: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TranscriptStep {
    pub t: u32,
    pub actions: Vec<Action>,
    pub rewards: Vec<f64>,
    pub events: Vec<Event>,
    pub done: bool,
    pub win: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Transcript {
    pub header: TranscriptHeader,
    pub steps: Vec<TranscriptStep>,
}

fn join<T: ToString>(items: &[T], sep: &str) -> String {
    items.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(sep)
}

fn fields(line: &str) -> Result<Vec<(&str, &str)>> {
    line.split_whitespace()
        .map(|f| {
            f.split_once('=')
                .ok_or_else(|| Error::Transcript(format!("field `{f}` lacks `=`")))
        })
        .collect()
}

fn take<'a>(fields: &[(&'a str, &'a str)], idx: usize, key: &str) -> Result<&'a str> {
    match fields.get(idx) {
        Some((k, v)) if *k == key => Ok(v),
        _ => Err(Error::Transcript(format!("expected field `{key}` at position {idx}"))),
    }
}

fn parse_num<T: std::str::FromStr>(v: &str, what: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::Transcript(format!("bad {what} `{v}`")))
}

fn parse_flag(v: &str) -> Result<bool> {
    match v {
        "0" => Ok(false),
        "1" => Ok(true),
        _ => Err(Error::Transcript(format!("bad flag `{v}`"))),
    }
}

impl Transcript {
    pub fn new(header: TranscriptHeader) -> Self {
        Self {
            header,
            steps: Vec::new(),
        }
    }

    pub fn header_line(&self) -> String {
        let h = &self.header;
        let c = &h.config;
        format!(
            "{MAGIC} {VERSION} env={} stage={} split={} seed={} agents={} grid={} assignment={}",
            c.env, c.stage, c.split, c.seed, c.n_agents, h.grid, h.assignment
        )
    }

    pub fn to_text(&self) -> String {
        let mut out = self.header_line();
        out.push('\n');
        for s in &self.steps {
            let ev = if s.events.is_empty() {
                "-".to_owned()
            } else {
                join(&s.events, ";")
            };
            let _ = writeln!(
                out,
                "t={} a={} r={} ev={} done={} win={}",
                s.t,
                join(&s.actions, ","),
                join(&s.rewards, ","),
                ev,
                u8::from(s.done),
                u8::from(s.win)
            );
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let head = lines
            .next()
            .ok_or_else(|| Error::Transcript("empty transcript".into()))?;
        let mut words = head.splitn(3, ' ');
        if words.next() != Some(MAGIC) || words.next() != Some(VERSION) {
            return Err(Error::Transcript(format!("not a {MAGIC} {VERSION} file")));
        }
        let f = fields(words.next().unwrap_or(""))?;
        let config = EpisodeConfig {
            env: take(&f, 0, "env")?.parse()?,
            stage: take(&f, 1, "stage")?.parse()?,
            split: take(&f, 2, "split")?.parse()?,
            seed: parse_num(take(&f, 3, "seed")?, "seed")?,
            n_agents: parse_num(take(&f, 4, "agents")?, "agent count")?,
        };
        let header = TranscriptHeader {
            config,
            grid: parse_num(take(&f, 5, "grid")?, "grid size")?,
            assignment: take(&f, 6, "assignment")?.to_owned(),
        };
        let mut steps = Vec::new();
        for line in lines {
            let f = fields(line)?;
            if f.len() != 6 {
                return Err(Error::Transcript(format!("step line has {} fields", f.len())));
            }
            let actions = take(&f, 1, "a")?
                .split(',')
                .map(str::parse)
                .collect::<Result<Vec<Action>>>()?;
            let rewards = take(&f, 2, "r")?
                .split(',')
                .map(|r| parse_num(r, "reward"))
                .collect::<Result<Vec<f64>>>()?;
            let events = match take(&f, 3, "ev")? {
                "-" => Vec::new(),
                ev => ev.split(';').map(str::parse).collect::<Result<Vec<Event>>>()?,
            };
            steps.push(TranscriptStep {
                t: parse_num(take(&f, 0, "t")?, "step")?,
                actions,
                rewards,
                events,
                done: parse_flag(take(&f, 4, "done")?)?,
                win: parse_flag(take(&f, 5, "win")?)?,
            });
        }
        Ok(Self { header, steps })
    }

    pub fn actions(&self) -> impl Iterator<Item = &[Action]> {
        self.steps.iter().map(|s| s.actions.as_slice())
    }

    /// Re-runs the recorded actions from the header seed.
    pub fn replay(&self) -> Result<Transcript> {
        let mut ep = Episode::new(self.header.config)?;
        for actions in self.actions() {
            ep.step(actions)?;
        }
        Ok(ep.transcript().clone())
    }

    /// Whether replaying reproduces this transcript byte for byte.
    pub fn verify(&self) -> Result<bool> {
        Ok(self.replay()?.to_text() == self.to_text())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manualgen::Split;
    use crate::world::{EnvKind, Stage};

    fn sample() -> Transcript {
        let cfg = EpisodeConfig::new(EnvKind::Rtfm, Stage::S2, Split::Train, 5, 2);
        let mut ep = Episode::new(cfg).unwrap();
        for t in 0..40 {
            if ep.is_done() {
                break;
            }
            ep.step(&[Action::ALL[t % 4], Action::ALL[(t + 1) % 5]]).unwrap();
        }
        ep.transcript().clone()
    }

    #[test]
    fn text_round_trip() {
        let t = sample();
        let text = t.to_text();
        let parsed = Transcript::parse(&text).unwrap();
        assert_eq!(parsed, t);
        assert_eq!(parsed.to_text(), text);
        assert!(parsed.verify().unwrap());
    }

    #[test]
    fn tampered_transcript_fails_verification() {
        let text = sample().to_text().replacen("r=-0.02,", "r=-0.03,", 1);
        assert!(!Transcript::parse(&text).unwrap().verify().unwrap());
    }

    #[test]
    fn rejects_garbage() {
        assert!(Transcript::parse("").is_err());
        assert!(Transcript::parse("hello v1 env=rtfm").is_err());
        let head = sample().header_line();
        assert!(Transcript::parse(&format!("{head}\nt=1 a=up r=0 ev=- done=2 win=0")).is_err());
    }
}
