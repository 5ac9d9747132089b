//! Manual rendering for both games.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::corpus::{fill_text, Section, TemplateCorpus, MESSENGER_FILLINGS};
use super::splits::SplitSpec;
use super::vocab::{
    ENEMY_ADJECTIVES, ENEMY_WORDS, GOAL_ADJECTIVES, GOAL_WORDS, MESSAGE_ADJECTIVES, MESSAGE_WORDS,
    MESSENGER_ENTITIES, MESSENGER_GOAL_SENTENCE,
};
use crate::error::{Error, Result};
use crate::messenger::{RoleAssignment, ROLES};
use crate::rng::Rng;
use crate::rtfm::RtfmAssignment;
use crate::world::{Role, Stage};

/// Surface forms used below the templated stage.
pub const CANONICAL_GOAL: &str = "defeat {team}";
pub const CANONICAL_TEAM: &str = "{monster} belongs to {team}";
pub const CANONICAL_MODIFIER: &str = "{modifier} beats {element}";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    /// Template id, or `None` for the canonical form of the section.
    pub template: Option<String>,
    pub section: Section,
    pub fillers: BTreeMap<String, String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sentence {
    pub text: String,
    pub provenance: Provenance,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manual {
    pub document: Vec<Sentence>,
    pub goal: Sentence,
}

impl Manual {
    pub fn sentences(&self) -> Vec<String> {
        self.document.iter().map(|s| s.text.clone()).collect()
    }

    pub fn goal_text(&self) -> &str {
        &self.goal.text
    }

    /// Rebuilds every sentence from provenance and the corpus.
    pub fn reconstruct(&self, corpus: &TemplateCorpus) -> Result<Vec<String>> {
        let one = |s: &Sentence| -> Result<String> {
            let text = match &s.provenance.template {
                Some(id) => {
                    &corpus
                        .get(id)
                        .ok_or_else(|| Error::Corpus {
                            line: 0,
                            msg: format!("unknown template `{id}`"),
                        })?
                        .text
                }
                None => canonical_form(s.provenance.section),
            };
            fill_text(text, &s.provenance.fillers)
        };
        let mut out = vec![one(&self.goal)?];
        for s in &self.document {
            out.push(one(s)?);
        }
        Ok(out)
    }
}

fn canonical_form(section: Section) -> &'static str {
    match section {
        Section::RtfmGoal => CANONICAL_GOAL,
        Section::RtfmTeam => CANONICAL_TEAM,
        Section::RtfmModifier => CANONICAL_MODIFIER,
        Section::Messenger => MESSENGER_GOAL_SENTENCE,
    }
}

fn fillers(pairs: &[(&str, &str)]) -> BTreeMap<String, String> {
    pairs
        .iter()
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect()
}

fn sentence(
    corpus: &TemplateCorpus,
    section: Section,
    templated: bool,
    fill: BTreeMap<String, String>,
    rng: &mut Rng,
) -> Result<Sentence> {
    let (template, text) = if templated {
        let pool: Vec<_> = corpus.section(section).collect();
        let t = rng.choose(&pool).ok_or_else(|| Error::Corpus {
            line: 0,
            msg: format!("no templates in section {}", section.name()),
        })?;
        (Some(t.id.clone()), t.fill(&fill)?)
    } else {
        (None, fill_text(canonical_form(section), &fill)?)
    };
    Ok(Sentence {
        text,
        provenance: Provenance {
            template,
            section,
            fillers: fill,
        },
    })
}

fn word(list: &'static [&'static str], idx: u8) -> Result<&'static str> {
    list.get(idx as usize)
        .copied()
        .ok_or_else(|| Error::OutOfVocabulary(format!("index {idx}")))
}

/// Goal plus shuffled team and modifier statements. Stages below S5 use the
/// canonical forms; S5 samples a template per statement.
pub fn render_rtfm_manual(
    assignment: &RtfmAssignment,
    stage: Stage,
    corpus: &TemplateCorpus,
    rng: &mut Rng,
) -> Result<Manual> {
    let words = assignment.words();
    let templated = stage >= Stage::S5;
    let team = word(words.teams, assignment.target_team)?;
    let goal = sentence(
        corpus,
        Section::RtfmGoal,
        templated,
        fillers(&[("team", team)]),
        rng,
    )?;
    let mut document = Vec::new();
    for m in assignment.described_monsters() {
        let monster = word(words.monsters, m)?;
        let team = word(words.teams, assignment.monster_team[m as usize])?;
        document.push(sentence(
            corpus,
            Section::RtfmTeam,
            templated,
            fillers(&[("monster", monster), ("team", team)]),
            rng,
        )?);
    }
    for m in assignment.described_modifiers() {
        let modifier = word(words.modifiers, m)?;
        let element = word(words.elements, assignment.modifier_element[m as usize])?;
        document.push(sentence(
            corpus,
            Section::RtfmModifier,
            templated,
            fillers(&[("modifier", modifier), ("element", element)]),
            rng,
        )?);
    }
    rng.shuffle(&mut document);
    Ok(Manual { document, goal })
}

/// (role words, adjectives) for a role.
pub fn role_words(role: Role) -> (&'static [&'static str; 3], &'static [&'static str; 3]) {
    match role {
        Role::Enemy => (&ENEMY_WORDS, &ENEMY_ADJECTIVES),
        Role::Message => (&MESSAGE_WORDS, &MESSAGE_ADJECTIVES),
        Role::Goal => (&GOAL_WORDS, &GOAL_ADJECTIVES),
    }
}

/// All ways to fill one template for one entity-role pair.
pub fn messenger_fillings(entity: u8, role: Role) -> Vec<BTreeMap<String, String>> {
    let (roles, adjectives) = role_words(role);
    let synonyms = MESSENGER_ENTITIES[entity as usize].1;
    let mut out = Vec::with_capacity(MESSENGER_FILLINGS);
    for e in synonyms {
        for r in roles {
            for a in adjectives {
                out.push(fillers(&[("entity", e), ("role", r), ("adjective", a)]));
            }
        }
    }
    out
}

/// One description per placed entity, shuffled, from the split's templates.
pub fn render_messenger_manual(
    assignment: &RoleAssignment,
    corpus: &TemplateCorpus,
    splits: &SplitSpec,
    rng: &mut Rng,
) -> Result<Manual> {
    let pool = splits.messenger_templates(assignment.split);
    let mut document = Vec::with_capacity(5);
    for (slot, &entity) in assignment.combo.entities().iter().enumerate() {
        let id = rng.choose(pool).ok_or_else(|| Error::Corpus {
            line: 0,
            msg: format!("no messenger templates for split {}", assignment.split),
        })?;
        let template = corpus.get(id).ok_or_else(|| Error::Corpus {
            line: 0,
            msg: format!("unknown template `{id}`"),
        })?;
        let options = messenger_fillings(entity, ROLES[slot]);
        let fill = options[rng.below(options.len())].clone();
        document.push(Sentence {
            text: template.fill(&fill)?,
            provenance: Provenance {
                template: Some(id.clone()),
                section: Section::Messenger,
                fillers: fill,
            },
        });
    }
    rng.shuffle(&mut document);
    let goal = Sentence {
        text: MESSENGER_GOAL_SENTENCE.to_owned(),
        provenance: Provenance {
            template: None,
            section: Section::Messenger,
            fillers: BTreeMap::new(),
        },
    };
    Ok(Manual { document, goal })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manualgen::corpus::SplitTag;
    use crate::manualgen::splits::Split;
    use crate::messenger::{generate_messenger, MessengerConfig};
    use crate::rtfm::{generate_rtfm, RtfmConfig};

    fn rtfm(stage: Stage, seed: u64) -> RtfmAssignment {
        let cfg = RtfmConfig::new(stage, Split::Train, 2).unwrap();
        generate_rtfm(&cfg, &Rng::split(seed, "episode"))
            .unwrap()
            .assignment
    }

    #[test]
    fn stage_one_manual_shape() {
        let a = rtfm(Stage::S1, 7);
        let m = render_rtfm_manual(&a, Stage::S1, &TemplateCorpus::standard(), &mut Rng::split(1, "manual")).unwrap();
        assert_eq!(m.document.len(), 4);
        let teams = m
            .document
            .iter()
            .filter(|s| s.provenance.section == Section::RtfmTeam)
            .count();
        assert_eq!(teams, 2);
        assert!(m.document.iter().all(|s| s.provenance.template.is_none()));
        assert!(m.goal.text.starts_with("defeat "));
    }

    #[test]
    fn stage_five_reshuffles_same_facts() {
        let corpus = TemplateCorpus::standard();
        let a = rtfm(Stage::S5, 3);
        let m1 = render_rtfm_manual(&a, Stage::S5, &corpus, &mut Rng::split(1, "manual")).unwrap();
        let m2 = render_rtfm_manual(&a, Stage::S5, &corpus, &mut Rng::split(2, "manual")).unwrap();
        let facts = |m: &Manual| {
            let mut f: Vec<_> = m.document.iter().map(|s| s.provenance.fillers.clone()).collect();
            f.sort();
            f
        };
        assert_eq!(facts(&m1), facts(&m2));
        assert_ne!(m1.sentences(), m2.sentences());
        assert!(m1.document.iter().all(|s| s.provenance.template.is_some()));
    }

    #[test]
    fn many_to_one_mentions_absent_monsters() {
        let corpus = TemplateCorpus::standard();
        let a = rtfm(Stage::S4, 9);
        let m = render_rtfm_manual(&a, Stage::S4, &corpus, &mut Rng::split(1, "manual")).unwrap();
        let present: Vec<&str> = a
            .targets
            .iter()
            .chain(a.distractor_monster.iter())
            .map(|t| a.words().monsters[t.monster as usize])
            .collect();
        let absent = m
            .document
            .iter()
            .filter_map(|s| s.provenance.fillers.get("monster"))
            .filter(|w| !present.contains(&w.as_str()))
            .count();
        assert!(absent >= 1);
    }

    #[test]
    fn fillings_per_template() {
        assert_eq!(messenger_fillings(0, Role::Enemy).len(), 27);
        let mut all = messenger_fillings(4, Role::Goal);
        all.sort();
        all.dedup();
        assert_eq!(all.len(), 27);
    }

    #[test]
    fn messenger_manual_round_trip() {
        let corpus = TemplateCorpus::standard();
        let cfg = MessengerConfig::new(Stage::S2, Split::Eval, 2).unwrap();
        let s = generate_messenger(&cfg, &Rng::split(4, "episode")).unwrap();
        let m = render_messenger_manual(&s.assignment, &corpus, SplitSpec::standard(), &mut Rng::split(4, "manual")).unwrap();
        assert_eq!(m.document.len(), 5);
        let mut want = vec![m.goal.text.clone()];
        want.extend(m.sentences());
        assert_eq!(m.reconstruct(&corpus).unwrap(), want);
        for sent in &m.document {
            let id = sent.provenance.template.as_ref().unwrap();
            assert_eq!(corpus.get(id).unwrap().tag, SplitTag::Eval);
        }
    }
}
