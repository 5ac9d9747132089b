//! Train / evaluation partitions of the assignment space.
//!
//! An RTFM group assignment is a pair (monster-to-team partition,
//! modifier-to-element partition). Each factor's partitions are enumerated in
//! lexicographic order and shuffled into disjoint train and eval index sets, so
//! no full assignment can appear in both splits. MESSENGER episodes are keyed by
//! the (enemy, messages, goals) entity combination, partitioned the same way,
//! and eval manuals draw only from eval-tagged templates.

use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use super::corpus::{SplitTag, TemplateCorpus};
use super::vocab::{
    RtfmWords, MESSENGER_ENTITIES, MODIFIERS_PER_ELEMENT, MONSTERS_PER_TEAM, RTFM_NEW_WORDS,
    RTFM_TRAIN_WORDS,
};
use crate::error::{Error, Result};
use crate::rng::{fnv1a, Rng};

pub const STANDARD_SPLIT_SEED: u64 = 20_230_101;
const TRAIN_FRACTION_NUM: usize = 4;
const TRAIN_FRACTION_DEN: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Eval,
    EvalNew,
    #[serde(rename = "eval_10x10")]
    Eval10x10,
}

impl Split {
    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Eval => "eval",
            Split::EvalNew => "eval_new",
            Split::Eval10x10 => "eval_10x10",
        }
    }

    /// Which partition pool the split draws from.
    pub fn pool(self) -> SplitTag {
        match self {
            Split::Train => SplitTag::Train,
            _ => SplitTag::Eval,
        }
    }

    pub fn rtfm_words(self) -> RtfmWords {
        match self {
            Split::EvalNew => RTFM_NEW_WORDS,
            _ => RTFM_TRAIN_WORDS,
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "eval" => Ok(Split::Eval),
            "eval_new" | "eval-new" => Ok(Split::EvalNew),
            "eval_10x10" | "eval-10x10" | "eval10" => Ok(Split::Eval10x10),
            other => Err(Error::InvalidConfig(format!("unknown split `{other}`"))),
        }
    }
}

/// Team index per monster slot.
pub type MonsterPartition = [u8; 9];
/// Element index per modifier slot.
pub type ModifierPartition = [u8; 8];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MessengerCombo {
    pub enemy: u8,
    pub messages: [u8; 2],
    pub goals: [u8; 2],
}

impl MessengerCombo {
    pub fn entities(&self) -> [u8; 5] {
        [
            self.enemy,
            self.messages[0],
            self.messages[1],
            self.goals[0],
            self.goals[1],
        ]
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SplitSpec {
    seed: u64,
    monster_partitions: Vec<MonsterPartition>,
    modifier_partitions: Vec<ModifierPartition>,
    train_monster: Vec<usize>,
    eval_monster: Vec<usize>,
    train_modifier: Vec<usize>,
    eval_modifier: Vec<usize>,
    messenger_train: Vec<MessengerCombo>,
    messenger_eval: Vec<MessengerCombo>,
    messenger_train_templates: Vec<String>,
    messenger_eval_templates: Vec<String>,
}

/// Sequences over `groups` labels in which each label occurs exactly `per`
/// times, in lexicographic order.
fn balanced_sequences<const N: usize>(groups: usize, per: usize) -> Vec<[u8; N]> {
    fn rec<const N: usize>(
        pos: usize,
        cur: &mut [u8; N],
        counts: &mut Vec<usize>,
        per: usize,
        out: &mut Vec<[u8; N]>,
    ) {
        if pos == N {
            out.push(*cur);
            return;
        }
        for g in 0..counts.len() {
            if counts[g] < per {
                counts[g] += 1;
                cur[pos] = g as u8;
                rec(pos + 1, cur, counts, per, out);
                counts[g] -= 1;
            }
        }
    }
    let mut out = Vec::new();
    rec(0, &mut [0u8; N], &mut vec![0; groups], per, &mut out);
    out
}

fn messenger_combos() -> Vec<MessengerCombo> {
    let n = MESSENGER_ENTITIES.len() as u8;
    let mut out = Vec::new();
    for enemy in 0..n {
        for m0 in 0..n {
            for m1 in m0 + 1..n {
                if [m0, m1].contains(&enemy) {
                    continue;
                }
                for g0 in 0..n {
                    for g1 in g0 + 1..n {
                        if [enemy, m0, m1].contains(&g0) || [enemy, m0, m1].contains(&g1) {
                            continue;
                        }
                        out.push(MessengerCombo {
                            enemy,
                            messages: [m0, m1],
                            goals: [g0, g1],
                        });
                    }
                }
            }
        }
    }
    out
}

fn split_indices(n: usize, rng: &mut Rng) -> Result<(Vec<usize>, Vec<usize>)> {
    let n_train = n * TRAIN_FRACTION_NUM / TRAIN_FRACTION_DEN;
    if n_train == 0 || n_train == n {
        return Err(Error::Generation(format!(
            "cannot partition {n} assignments into train and eval"
        )));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    rng.shuffle(&mut idx);
    let mut eval = idx.split_off(n_train);
    idx.sort_unstable();
    eval.sort_unstable();
    Ok((idx, eval))
}

/// Deterministically partitions the assignment space.
pub fn make_splits(corpus: &TemplateCorpus, rng: &mut Rng) -> Result<SplitSpec> {
    let monster_partitions = balanced_sequences::<9>(RTFM_TRAIN_WORDS.teams.len(), MONSTERS_PER_TEAM);
    let modifier_partitions =
        balanced_sequences::<8>(RTFM_TRAIN_WORDS.elements.len(), MODIFIERS_PER_ELEMENT);
    let (train_monster, eval_monster) = split_indices(monster_partitions.len(), &mut rng.child("monsters"))?;
    let (train_modifier, eval_modifier) =
        split_indices(modifier_partitions.len(), &mut rng.child("modifiers"))?;

    let combos = messenger_combos();
    let (train_c, eval_c) = split_indices(combos.len(), &mut rng.child("messenger"))?;
    let messenger_train = train_c.iter().map(|&i| combos[i]).collect();
    let messenger_eval = eval_c.iter().map(|&i| combos[i]).collect();

    let messenger_train_templates = corpus.messenger_ids(SplitTag::Train);
    let messenger_eval_templates = corpus.messenger_ids(SplitTag::Eval);
    if messenger_train_templates
        .iter()
        .any(|t| messenger_eval_templates.contains(t))
    {
        return Err(Error::Generation(
            "messenger template tags overlap between splits".into(),
        ));
    }

    Ok(SplitSpec {
        seed: rng.seed(),
        monster_partitions,
        modifier_partitions,
        train_monster,
        eval_monster,
        train_modifier,
        eval_modifier,
        messenger_train,
        messenger_eval,
        messenger_train_templates,
        messenger_eval_templates,
    })
}

impl SplitSpec {
    /// The split spec used by default everywhere (fixed seed, bundled corpus).
    pub fn standard() -> &'static SplitSpec {
        static SPEC: OnceLock<SplitSpec> = OnceLock::new();
        SPEC.get_or_init(|| {
            make_splits(
                &TemplateCorpus::standard(),
                &mut Rng::split(STANDARD_SPLIT_SEED, "splits"),
            )
            .expect("standard splits are feasible")
        })
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn monster_partition(&self, idx: usize) -> &MonsterPartition {
        &self.monster_partitions[idx]
    }

    pub fn modifier_partition(&self, idx: usize) -> &ModifierPartition {
        &self.modifier_partitions[idx]
    }

    pub fn monster_partition_count(&self) -> usize {
        self.monster_partitions.len()
    }

    pub fn modifier_partition_count(&self) -> usize {
        self.modifier_partitions.len()
    }

    /// Allowed (monster partition, modifier partition) index pools.
    pub fn rtfm_pools(&self, split: Split) -> (&[usize], &[usize]) {
        match split.pool() {
            SplitTag::Train => (&self.train_monster, &self.train_modifier),
            _ => (&self.eval_monster, &self.eval_modifier),
        }
    }

    pub fn rtfm_allows(&self, split: Split, monster: usize, modifier: usize) -> bool {
        let (m, d) = self.rtfm_pools(split);
        m.binary_search(&monster).is_ok() && d.binary_search(&modifier).is_ok()
    }

    pub fn messenger_combos(&self, split: Split) -> &[MessengerCombo] {
        match split.pool() {
            SplitTag::Train => &self.messenger_train,
            _ => &self.messenger_eval,
        }
    }

    pub fn messenger_templates(&self, split: Split) -> &[String] {
        match split.pool() {
            SplitTag::Train => &self.messenger_train_templates,
            _ => &self.messenger_eval_templates,
        }
    }

    /// FNV digest over the full partition; printed by the CLI.
    pub fn digest(&self) -> String {
        let mut text = String::new();
        for (name, v) in [
            ("tm", &self.train_monster),
            ("em", &self.eval_monster),
            ("td", &self.train_modifier),
            ("ed", &self.eval_modifier),
        ] {
            text.push_str(name);
            for i in v {
                text.push_str(&format!(",{i}"));
            }
            text.push(';');
        }
        for (name, v) in [("mt", &self.messenger_train), ("me", &self.messenger_eval)] {
            text.push_str(name);
            for c in v {
                text.push_str(&format!(",{:?}", c.entities()));
            }
            text.push(';');
        }
        for (name, v) in [
            ("tt", &self.messenger_train_templates),
            ("et", &self.messenger_eval_templates),
        ] {
            text.push_str(name);
            for t in v {
                text.push_str(&format!(",{t}"));
            }
            text.push(';');
        }
        format!("{:016x}", fnv1a(text.as_bytes()))
    }
}
