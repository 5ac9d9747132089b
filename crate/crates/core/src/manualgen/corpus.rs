//! Template corpus: parsing, validation and filling.
//!
//! The corpus is a UTF-8 line file. `[section]` headers open a template group;
//! template lines read `<id> <tag> | <text>` where blanks in the text are
//! written `{name}`. `#` starts a comment line.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const STANDARD_CORPUS: &str = include_str!("../../corpus/templates.txt");

pub const RTFM_GOAL_TEMPLATES: usize = 12;
pub const RTFM_TEAM_TEMPLATES: usize = 10;
pub const RTFM_MODIFIER_TEMPLATES: usize = 10;
pub const MESSENGER_TEMPLATES: usize = 82;
/// entity synonyms x role words x adjectives
pub const MESSENGER_FILLINGS: usize = 27;
pub const MESSENGER_DESCRIPTIONS: usize = MESSENGER_TEMPLATES * MESSENGER_FILLINGS;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Section {
    RtfmGoal,
    RtfmTeam,
    RtfmModifier,
    Messenger,
}

impl Section {
    fn parse(name: &str) -> Option<Self> {
        match name {
            "rtfm.goal" => Some(Section::RtfmGoal),
            "rtfm.team" => Some(Section::RtfmTeam),
            "rtfm.modifier" => Some(Section::RtfmModifier),
            "messenger" => Some(Section::Messenger),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Section::RtfmGoal => "rtfm.goal",
            Section::RtfmTeam => "rtfm.team",
            Section::RtfmModifier => "rtfm.modifier",
            Section::Messenger => "messenger",
        }
    }

    /// Blanks every template in the section must contain exactly once.
    pub fn blanks(self) -> &'static [&'static str] {
        match self {
            Section::RtfmGoal => &["team"],
            Section::RtfmTeam => &["monster", "team"],
            Section::RtfmModifier => &["modifier", "element"],
            Section::Messenger => &["entity", "role", "adjective"],
        }
    }

    fn expected_count(self) -> usize {
        match self {
            Section::RtfmGoal => RTFM_GOAL_TEMPLATES,
            Section::RtfmTeam => RTFM_TEAM_TEMPLATES,
            Section::RtfmModifier => RTFM_MODIFIER_TEMPLATES,
            Section::Messenger => MESSENGER_TEMPLATES,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitTag {
    All,
    Train,
    Eval,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Template {
    pub id: String,
    pub section: Section,
    pub tag: SplitTag,
    pub text: String,
}

impl Template {
    /// Substitutes `{name}` blanks from `fillers`.
    pub fn fill(&self, fillers: &BTreeMap<String, String>) -> Result<String> {
        fill_text(&self.text, fillers)
    }
}

pub(crate) fn fill_text(text: &str, fillers: &BTreeMap<String, String>) -> Result<String> {
    let mut out = String::with_capacity(text.len() + 16);
    let mut rest = text;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let close = rest[open..]
            .find('}')
            .ok_or_else(|| Error::Corpus {
                line: 0,
                msg: format!("unclosed blank in `{text}`"),
            })?
            + open;
        let name = &rest[open + 1..close];
        let value = fillers.get(name).ok_or_else(|| Error::Corpus {
            line: 0,
            msg: format!("no filler for blank `{name}`"),
        })?;
        out.push_str(value);
        rest = &rest[close + 1..];
    }
    out.push_str(rest);
    Ok(out)
}

fn blanks_of(text: &str) -> Vec<String> {
    let mut names = Vec::new();
    let mut rest = text;
    while let Some(open) = rest.find('{') {
        match rest[open..].find('}') {
            Some(close) => {
                names.push(rest[open + 1..open + close].to_owned());
                rest = &rest[open + close + 1..];
            }
            None => break,
        }
    }
    names
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TemplateCorpus {
    templates: Vec<Template>,
}

/// Template counts reported by `corpus --verify`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct CorpusCounts {
    pub rtfm_goal: usize,
    pub rtfm_team: usize,
    pub rtfm_modifier: usize,
    pub messenger: usize,
    pub messenger_fillings: usize,
    pub messenger_descriptions: usize,
    pub messenger_train: usize,
    pub messenger_eval: usize,
}

impl TemplateCorpus {
    pub fn standard() -> Self {
        Self::parse(STANDARD_CORPUS).expect("bundled corpus is valid")
    }

    pub fn parse(source: &str) -> Result<Self> {
        let mut section = None;
        let mut templates = Vec::new();
        let mut ids = BTreeSet::new();
        let mut texts = BTreeSet::new();
        for (n, raw) in source.lines().enumerate() {
            let line_no = n + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |msg: String| Error::Corpus { line: line_no, msg };
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                section =
                    Some(Section::parse(name).ok_or_else(|| err(format!("unknown section `{name}`")))?);
                continue;
            }
            let section = section.ok_or_else(|| err("template before any section".into()))?;
            let (head, text) = line
                .split_once('|')
                .ok_or_else(|| err("expected `<id> <tag> | <text>`".into()))?;
            let mut head = head.split_whitespace();
            let (Some(id), Some(tag), None) = (head.next(), head.next(), head.next()) else {
                return Err(err("expected `<id> <tag>` before `|`".into()));
            };
            let tag = match tag {
                "all" => SplitTag::All,
                "train" => SplitTag::Train,
                "eval" => SplitTag::Eval,
                other => return Err(err(format!("unknown tag `{other}`"))),
            };
            let text = text.trim().to_owned();
            let mut blanks = blanks_of(&text);
            blanks.sort();
            let mut want: Vec<String> = section.blanks().iter().map(|s| s.to_string()).collect();
            want.sort();
            if blanks != want {
                return Err(err(format!(
                    "template `{id}` has blanks {blanks:?}, expected {want:?}"
                )));
            }
            if text.chars().any(|c| c.is_ascii_digit()) {
                return Err(err(format!("template `{id}` contains a digit")));
            }
            if !ids.insert(id.to_owned()) {
                return Err(err(format!("duplicate template id `{id}`")));
            }
            if !texts.insert((section, text.clone())) {
                return Err(err(format!("duplicate template text `{text}`")));
            }
            templates.push(Template {
                id: id.to_owned(),
                section,
                tag,
                text,
            });
        }
        let corpus = Self { templates };
        corpus.validate_counts()?;
        Ok(corpus)
    }

    fn validate_counts(&self) -> Result<()> {
        for section in [
            Section::RtfmGoal,
            Section::RtfmTeam,
            Section::RtfmModifier,
            Section::Messenger,
        ] {
            let got = self.section(section).count();
            if got != section.expected_count() {
                return Err(Error::Corpus {
                    line: 0,
                    msg: format!(
                        "section {} has {got} templates, expected {}",
                        section.name(),
                        section.expected_count()
                    ),
                });
            }
        }
        let msg = |tag| {
            self.section(Section::Messenger)
                .filter(|t| t.tag == tag)
                .count()
        };
        if msg(SplitTag::Train) == 0 || msg(SplitTag::Eval) == 0 {
            return Err(Error::Corpus {
                line: 0,
                msg: "messenger templates need both train and eval tags".into(),
            });
        }
        Ok(())
    }

    pub fn templates(&self) -> &[Template] {
        &self.templates
    }

    pub fn section(&self, section: Section) -> impl Iterator<Item = &Template> {
        self.templates.iter().filter(move |t| t.section == section)
    }

    pub fn get(&self, id: &str) -> Option<&Template> {
        self.templates.iter().find(|t| t.id == id)
    }

    /// MESSENGER template ids usable in a split.
    pub fn messenger_ids(&self, tag: SplitTag) -> Vec<String> {
        self.section(Section::Messenger)
            .filter(|t| t.tag == tag || t.tag == SplitTag::All)
            .map(|t| t.id.clone())
            .collect()
    }

    pub fn counts(&self) -> CorpusCounts {
        let n = |s| self.section(s).count();
        let messenger = n(Section::Messenger);
        CorpusCounts {
            rtfm_goal: n(Section::RtfmGoal),
            rtfm_team: n(Section::RtfmTeam),
            rtfm_modifier: n(Section::RtfmModifier),
            messenger,
            messenger_fillings: MESSENGER_FILLINGS,
            messenger_descriptions: messenger * MESSENGER_FILLINGS,
            messenger_train: self.messenger_ids(SplitTag::Train).len(),
            messenger_eval: self.messenger_ids(SplitTag::Eval).len(),
        }
    }

    /// Every word appearing in template text (blanks excluded).
    pub fn words(&self) -> BTreeSet<String> {
        self.templates
            .iter()
            .flat_map(|t| {
                let mut stripped = t.text.clone();
                for b in blanks_of(&t.text) {
                    stripped = stripped.replace(&format!("{{{b}}}"), " ");
                }
                super::vocab::tokenize(&stripped)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standard_counts() {
        let c = TemplateCorpus::standard().counts();
        assert_eq!(
            (c.rtfm_goal, c.rtfm_team, c.rtfm_modifier),
            (12, 10, 10)
        );
        assert_eq!(c.messenger, 82);
        assert_eq!(c.messenger_descriptions, 2214);
        assert_eq!(c.messenger_train + c.messenger_eval, 82);
    }

    #[test]
    fn rejects_missing_blank() {
        let src = "[rtfm.goal]\ng01 all | defeat everyone\n";
        assert!(matches!(
            TemplateCorpus::parse(src),
            Err(Error::Corpus { line: 2, .. })
        ));
    }

    #[test]
    fn rejects_wrong_count() {
        let src = "[rtfm.goal]\ng01 all | defeat the {team}\n";
        assert!(TemplateCorpus::parse(src).is_err());
    }

    #[test]
    fn rejects_unknown_section_and_tag() {
        assert!(TemplateCorpus::parse("[nope]\n").is_err());
        assert!(TemplateCorpus::parse("[rtfm.goal]\ng01 maybe | defeat the {team}\n").is_err());
    }

    #[test]
    fn fill_replaces_blanks() {
        let t = Template {
            id: "x".into(),
            section: Section::RtfmTeam,
            tag: SplitTag::All,
            text: "{monster} belongs to the {team}".into(),
        };
        let fillers = BTreeMap::from([
            ("monster".to_string(), "goblin".to_string()),
            ("team".to_string(), "rebel enclave".to_string()),
        ]);
        assert_eq!(t.fill(&fillers).unwrap(), "goblin belongs to the rebel enclave");
    }
}
