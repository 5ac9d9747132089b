//! Token-level view of one episode from one agent's seat.

use std::collections::{BTreeSet, HashMap};

use crate::episode::{Episode, Game};
use crate::error::{Error, Result};
use crate::geom::GridPos;
use crate::manualgen::render::{CANONICAL_GOAL, CANONICAL_MODIFIER, CANONICAL_TEAM};
use crate::manualgen::vocab::{
    tokenize, ALLY_TOKEN, ENEMY_ADJECTIVES, ENEMY_WORDS, GOAL_ADJECTIVES, GOAL_WORDS, MESSAGE_ADJECTIVES,
    MESSAGE_WORDS, MESSENGER_ENTITIES, MESSENGER_GOAL_SENTENCE, SELF_TOKEN,
};
use crate::manualgen::{Split, TemplateCorpus};
use crate::messenger::{ALLY_SYMBOL, ALLY_WITH_MESSAGE_SYMBOL, SELF_SYMBOL, SELF_WITH_MESSAGE_SYMBOL};

/// Highest symbol a MESSENGER observation can contain.
pub const MAX_SYMBOL: u32 = 16;

/// Token for a MESSENGER render symbol.
pub fn symbol_token(symbol: u32) -> String {
    format!("sym{symbol}")
}

/// Closed word list; lookups of anything else fail.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocabulary {
    words: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    pub fn new<I: IntoIterator<Item = String>>(words: I) -> Self {
        let words: Vec<String> = words.into_iter().collect::<BTreeSet<_>>().into_iter().collect();
        let index = words.iter().enumerate().map(|(i, w)| (w.clone(), i)).collect();
        Self { words, index }
    }

    /// Every word an episode of `split` can show: corpus words, the split's
    /// entity vocabulary, MESSENGER names and role words, agent tokens and
    /// render symbols.
    pub fn for_split(split: Split) -> Self {
        let mut words = TemplateCorpus::standard().words();
        let mut add = |text: &str| words.extend(tokenize(text));
        let w = split.rtfm_words();
        for list in [w.monsters, w.weapons, w.modifiers, w.elements, w.teams] {
            list.iter().for_each(|s| add(s));
        }
        for (name, synonyms) in MESSENGER_ENTITIES {
            add(name);
            synonyms.iter().for_each(|s| add(s));
        }
        for list in [
            &ENEMY_WORDS,
            &ENEMY_ADJECTIVES,
            &MESSAGE_WORDS,
            &MESSAGE_ADJECTIVES,
            &GOAL_WORDS,
            &GOAL_ADJECTIVES,
        ] {
            list.iter().for_each(|s| add(s));
        }
        for t in [CANONICAL_GOAL, CANONICAL_TEAM, CANONICAL_MODIFIER, MESSENGER_GOAL_SENTENCE] {
            add(&t.replace(['{', '}'], " "));
        }
        add(SELF_TOKEN);
        add(ALLY_TOKEN);
        words.extend((1..=MAX_SYMBOL).map(symbol_token));
        Self::new(words)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn id(&self, word: &str) -> Result<usize> {
        self.index
            .get(word)
            .copied()
            .ok_or_else(|| Error::UnknownToken(word.to_owned()))
    }

    pub fn encode(&self, text: &str) -> Result<Vec<usize>> {
        tokenize(text).iter().map(|w| self.id(w)).collect()
    }
}

/// Something drawn on the grid: an entity, an agent, or a held item.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ViewItem {
    pub pos: GridPos,
    pub tokens: Vec<usize>,
    /// Uid for maskable entities; `None` for agents and inventory.
    pub entity: Option<u32>,
}

/// Everything the grounding stage reads for one agent.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AgentView {
    pub size: usize,
    pub agent: usize,
    pub agent_pos: Vec<GridPos>,
    /// Live entities in uid order.
    pub entities: Vec<ViewItem>,
    /// Agents and inventory; never masked.
    pub fixed: Vec<ViewItem>,
    /// Manual sentences, sorted so sentence order cannot matter.
    pub manual: Vec<Vec<usize>>,
    pub goal: Vec<usize>,
}

impl AgentView {
    pub fn from_episode(ep: &Episode, agent: usize, vocab: &Vocabulary) -> Result<Self> {
        if agent >= ep.n_agents() {
            return Err(Error::BadActions {
                expected: ep.n_agents(),
                got: agent + 1,
            });
        }
        let agent_pos: Vec<GridPos> = ep.agents().iter().map(|a| a.pos).collect();
        let mut entities = Vec::new();
        let mut fixed = Vec::new();
        match ep.game() {
            Game::Rtfm(s) => {
                for e in s.live_entities() {
                    entities.push(ViewItem {
                        pos: e.pos,
                        tokens: vocab.encode(&e.name)?,
                        entity: Some(e.uid),
                    });
                }
                for a in &s.agents {
                    let token = if a.id == agent { SELF_TOKEN } else { ALLY_TOKEN };
                    fixed.push(ViewItem {
                        pos: a.pos,
                        tokens: vec![vocab.id(token)?],
                        entity: None,
                    });
                }
                if let Some(held) = s.agents[agent].inventory.and_then(|uid| s.entity(uid)) {
                    fixed.push(ViewItem {
                        pos: agent_pos[agent],
                        tokens: vocab.encode(&held.name)?,
                        entity: None,
                    });
                }
            }
            Game::Messenger(s) => {
                for e in s.entities.iter().filter(|e| e.alive) {
                    entities.push(ViewItem {
                        pos: e.pos,
                        tokens: vec![vocab.id(&symbol_token(e.symbol))?],
                        entity: Some(e.uid),
                    });
                }
                for a in &s.agents {
                    let symbol = match (a.id == agent, a.has_message) {
                        (true, false) => SELF_SYMBOL,
                        (true, true) => SELF_WITH_MESSAGE_SYMBOL,
                        (false, false) => ALLY_SYMBOL,
                        (false, true) => ALLY_WITH_MESSAGE_SYMBOL,
                    };
                    fixed.push(ViewItem {
                        pos: a.pos,
                        tokens: vec![vocab.id(&symbol_token(symbol))?],
                        entity: None,
                    });
                }
            }
        }
        let mut manual = ep
            .manual()
            .sentences()
            .iter()
            .map(|s| vocab.encode(s))
            .collect::<Result<Vec<_>>>()?;
        manual.sort();
        Ok(Self {
            size: ep.size(),
            agent,
            agent_pos,
            entities,
            fixed,
            manual,
            goal: vocab.encode(ep.manual().goal_text())?,
        })
    }

    pub fn n_agents(&self) -> usize {
        self.agent_pos.len()
    }

    pub fn n_entities(&self) -> usize {
        self.entities.len()
    }

    pub fn self_pos(&self) -> GridPos {
        self.agent_pos[self.agent]
    }

    pub fn other_pos(&self) -> Vec<GridPos> {
        self.agent_pos
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != self.agent)
            .map(|(_, &p)| p)
            .collect()
    }

    /// Entities, then fixed items.
    pub fn items(&self) -> impl Iterator<Item = &ViewItem> {
        self.entities.iter().chain(&self.fixed)
    }
}

/// Splits a view by a binary mask: selected entities stay in the first view,
/// the rest go to the second. Agents and inventory appear in both.
pub fn mask_apply(view: &AgentView, mask: &[bool]) -> Result<(AgentView, AgentView)> {
    if mask.len() != view.entities.len() {
        return Err(Error::Shape(format!(
            "mask has {} entries for {} entities",
            mask.len(),
            view.entities.len()
        )));
    }
    let pick = |keep: bool| AgentView {
        entities: view
            .entities
            .iter()
            .zip(mask)
            .filter(|&(_, &m)| m == keep)
            .map(|(e, _)| e.clone())
            .collect(),
        ..view.clone()
    };
    Ok((pick(true), pick(false)))
}
