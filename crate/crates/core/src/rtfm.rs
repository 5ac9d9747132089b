//! Multi-agent RTFM: agents collect weapons whose modifiers beat the element of
//! the target team's monsters and defeat every target monster.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{greedy_step, nearest, Action, GridPos};
use crate::manualgen::splits::{Split, SplitSpec};
use crate::manualgen::vocab::{RtfmWords, EMPTY_INVENTORY};
use crate::rng::{fnv1a, Rng};
use crate::world::{
    AgentState, Attributes, Entity, Event, EventKind, Outcome, RewardLedger, Stage, StepResult,
};

pub const MAX_STEPS: u32 = 1000;
pub const STEP_PENALTY: f64 = -0.02;
pub const CHASE_PROB: f64 = 0.6;
pub const TRAIN_GRID: usize = 8;
pub const LARGE_GRID: usize = 10;
pub const MAX_AGENTS: usize = 3;

const KILL_CENTS: i64 = 100;
const LOSS_CENTS: i64 = -100;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RtfmConfig {
    pub stage: Stage,
    pub n_agents: usize,
    pub size: usize,
    pub max_steps: u32,
    pub step_penalty: f64,
    pub chase_prob: f64,
    pub split: Split,
}

impl RtfmConfig {
    pub fn new(stage: Stage, split: Split, n_agents: usize) -> Result<Self> {
        let size = if split == Split::Eval10x10 {
            LARGE_GRID
        } else {
            TRAIN_GRID
        };
        let config = Self {
            stage,
            n_agents,
            size,
            max_steps: MAX_STEPS,
            step_penalty: STEP_PENALTY,
            chase_prob: CHASE_PROB,
            split,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=MAX_AGENTS).contains(&self.n_agents) {
            return Err(Error::InvalidConfig(format!(
                "rtfm supports 1..={MAX_AGENTS} agents, got {}",
                self.n_agents
            )));
        }
        let want = if self.split == Split::Eval10x10 {
            LARGE_GRID
        } else {
            TRAIN_GRID
        };
        if self.size != want {
            return Err(Error::InvalidConfig(format!(
                "split {} uses a {want}x{want} grid, got {}",
                self.split, self.size
            )));
        }
        if self.max_steps == 0 || !(0.0..=1.0).contains(&self.chase_prob) {
            return Err(Error::InvalidConfig("bad step limit or chase probability".into()));
        }
        Ok(())
    }

    pub fn moving_monsters(&self) -> bool {
        self.stage >= Stage::S3
    }

    pub fn has_distractors(&self) -> bool {
        self.stage >= Stage::S2
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MonsterSpec {
    pub monster: u8,
    pub element: u8,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ItemSpec {
    pub modifier: u8,
    pub weapon: u8,
}

/// The sampled dynamics of one episode. Word indices refer to
/// `split.rtfm_words()`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RtfmAssignment {
    pub split: Split,
    pub monster_partition: usize,
    pub modifier_partition: usize,
    pub monster_team: [u8; 9],
    pub modifier_element: [u8; 8],
    pub target_team: u8,
    pub targets: Vec<MonsterSpec>,
    pub correct_items: Vec<ItemSpec>,
    pub distractor_monster: Option<MonsterSpec>,
    pub distractor_item: Option<ItemSpec>,
    pub one_to_one: bool,
}

impl RtfmAssignment {
    pub fn words(&self) -> RtfmWords {
        self.split.rtfm_words()
    }

    pub fn monster_phrase(&self, m: MonsterSpec) -> String {
        let w = self.words();
        format!("{} {}", w.elements[m.element as usize], w.monsters[m.monster as usize])
    }

    pub fn item_phrase(&self, i: ItemSpec) -> String {
        let w = self.words();
        format!("{} {}", w.modifiers[i.modifier as usize], w.weapons[i.weapon as usize])
    }

    pub fn team_name(&self, team: u8) -> &'static str {
        self.words().teams[team as usize]
    }

    /// Element the item's modifier is effective against.
    pub fn item_element(&self, i: ItemSpec) -> u8 {
        self.modifier_element[i.modifier as usize]
    }

    /// Monsters whose team membership the manual states.
    pub fn described_monsters(&self) -> Vec<u8> {
        if self.one_to_one {
            let mut out: Vec<u8> = self.targets.iter().map(|m| m.monster).collect();
            out.extend(self.distractor_monster.map(|m| m.monster));
            out
        } else {
            let mut teams = vec![self.target_team];
            if let Some(d) = self.distractor_monster {
                teams.push(self.monster_team[d.monster as usize]);
            }
            (0..9u8)
                .filter(|&m| teams.contains(&self.monster_team[m as usize]))
                .collect()
        }
    }

    /// Modifiers whose effectiveness the manual states.
    pub fn described_modifiers(&self) -> Vec<u8> {
        let items = self.correct_items.iter().chain(self.distractor_item.iter());
        if self.one_to_one {
            items.map(|i| i.modifier).collect()
        } else {
            let elements: Vec<u8> = items.map(|&i| self.item_element(i)).collect();
            (0..8u8)
                .filter(|&m| elements.contains(&self.modifier_element[m as usize]))
                .collect()
        }
    }

    /// Short content hash written into transcript headers.
    pub fn digest(&self) -> String {
        let text = serde_json::to_string(self).expect("assignment serializes");
        format!("{:016x}", fnv1a(text.as_bytes()))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RtfmState {
    pub config: RtfmConfig,
    pub assignment: RtfmAssignment,
    pub entities: Vec<Entity>,
    pub agents: Vec<AgentState>,
    pub step: u32,
    pub outcome: Outcome,
    ledger: RewardLedger,
    move_rng: Rng,
}

/// Per-agent view: a matrix of texts plus the inventory.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RtfmObservation {
    pub grid: Vec<Vec<Vec<String>>>,
    pub inventory: String,
    pub position: GridPos,
}

pub fn generate_rtfm(config: &RtfmConfig, rng: &Rng) -> Result<RtfmState> {
    generate_rtfm_with(config, SplitSpec::standard(), rng)
}

pub fn generate_rtfm_with(config: &RtfmConfig, splits: &SplitSpec, rng: &Rng) -> Result<RtfmState> {
    config.validate()?;
    let assignment = sample_assignment(config, splits, &mut rng.child("assignment"))?;

    let mut specs: Vec<(String, Attributes)> = Vec::new();
    let monster_entry = |m: MonsterSpec, target: bool| {
        (
            assignment.monster_phrase(m),
            Attributes::Monster {
                monster: m.monster,
                team: assignment.monster_team[m.monster as usize],
                element: m.element,
                target,
            },
        )
    };
    let item_entry = |i: ItemSpec, correct: bool| {
        (
            assignment.item_phrase(i),
            Attributes::Item {
                modifier: i.modifier,
                weapon: i.weapon,
                element: assignment.item_element(i),
                correct,
            },
        )
    };
    for &m in &assignment.targets {
        specs.push(monster_entry(m, true));
    }
    for &i in &assignment.correct_items {
        specs.push(item_entry(i, true));
    }
    if let Some(m) = assignment.distractor_monster {
        specs.push(monster_entry(m, false));
    }
    if let Some(i) = assignment.distractor_item {
        specs.push(item_entry(i, false));
    }

    let n = config.size;
    let cells = rng
        .child("spawn")
        .sample_indices(n * n, config.n_agents + specs.len());
    if cells.len() < config.n_agents + specs.len() {
        return Err(Error::Generation("grid too small for the episode".into()));
    }
    let at = |k: usize| GridPos::new(cells[k] / n, cells[k] % n);
    let agents = (0..config.n_agents)
        .map(|i| AgentState::new(i, at(i)))
        .collect();
    let entities = specs
        .into_iter()
        .enumerate()
        .map(|(uid, (name, attrs))| Entity {
            uid: uid as u32,
            symbol: uid as u32 + 1,
            name,
            attrs,
            pos: at(config.n_agents + uid),
            alive: true,
        })
        .collect();

    Ok(RtfmState {
        config: config.clone(),
        assignment,
        entities,
        agents,
        step: 0,
        outcome: Outcome::Running,
        ledger: RewardLedger::new(config.n_agents, config.step_penalty),
        move_rng: rng.child("monster-move"),
    })
}

fn sample_assignment(config: &RtfmConfig, splits: &SplitSpec, rng: &mut Rng) -> Result<RtfmAssignment> {
    let (monster_pool, modifier_pool) = splits.rtfm_pools(config.split);
    let exhausted = || Error::Generation(format!("split {} has no assignments", config.split));
    let monster_partition = *rng.choose(monster_pool).ok_or_else(exhausted)?;
    let modifier_partition = *rng.choose(modifier_pool).ok_or_else(exhausted)?;
    let monster_team = *splits.monster_partition(monster_partition);
    let modifier_element = *splits.modifier_partition(modifier_partition);
    let words = config.split.rtfm_words();
    let n = config.n_agents;
    let n_elements = words.elements.len();
    if n >= n_elements {
        return Err(Error::Generation(format!(
            "{n} targets need {n} distinct elements plus one for the distractor"
        )));
    }

    let members = |team: u8| -> Vec<u8> { (0..9u8).filter(|&m| monster_team[m as usize] == team).collect() };
    let pick_item = |element: u8, rng: &mut Rng| -> Result<ItemSpec> {
        let mods: Vec<u8> = (0..8u8)
            .filter(|&m| modifier_element[m as usize] == element)
            .collect();
        let modifier = *rng
            .choose(&mods)
            .ok_or_else(|| Error::Generation(format!("no modifier beats element {element}")))?;
        Ok(ItemSpec {
            modifier,
            weapon: rng.below(words.weapons.len()) as u8,
        })
    };

    let target_team = rng.below(words.teams.len()) as u8;
    let team_members = members(target_team);
    if team_members.len() < n {
        return Err(Error::Generation(format!(
            "team has {} monsters, need {n}",
            team_members.len()
        )));
    }
    let chosen = rng.sample_indices(team_members.len(), n);
    let elements = rng.sample_indices(n_elements, n);
    let targets: Vec<MonsterSpec> = chosen
        .iter()
        .zip(&elements)
        .map(|(&m, &e)| MonsterSpec {
            monster: team_members[m],
            element: e as u8,
        })
        .collect();
    let correct_items = targets
        .iter()
        .map(|t| pick_item(t.element, rng))
        .collect::<Result<Vec<_>>>()?;

    let (distractor_monster, distractor_item) = if config.has_distractors() {
        let other_teams: Vec<u8> = (0..words.teams.len() as u8)
            .filter(|&t| t != target_team)
            .collect();
        let team = *rng.choose(&other_teams).ok_or_else(exhausted)?;
        let monster = *rng.choose(&members(team)).ok_or_else(exhausted)?;
        let free: Vec<u8> = (0..n_elements as u8)
            .filter(|e| !targets.iter().any(|t| t.element == *e))
            .collect();
        let element = *rng.choose(&free).ok_or_else(exhausted)?;
        let item = pick_item(element, rng)?;
        (Some(MonsterSpec { monster, element }), Some(item))
    } else {
        (None, None)
    };

    Ok(RtfmAssignment {
        split: config.split,
        monster_partition,
        modifier_partition,
        monster_team,
        modifier_element,
        target_team,
        targets,
        correct_items,
        distractor_monster,
        distractor_item,
        one_to_one: config.stage < Stage::S4,
    })
}

/// Chase move for a monster: greedy toward the nearest agent with
/// probability `chase_prob`, otherwise a uniformly random direction.
pub fn monster_direction(monster: GridPos, agents: &[GridPos], chase_prob: f64, rng: &mut Rng) -> Action {
    let chase = rng.bernoulli(chase_prob);
    if chase {
        match nearest(monster, agents) {
            Some(i) => greedy_step(monster, agents[i]),
            None => Action::Stay,
        }
    } else {
        Action::MOVES[rng.below(4)]
    }
}

impl RtfmState {
    pub fn size(&self) -> usize {
        self.config.size
    }

    pub fn is_done(&self) -> bool {
        self.outcome != Outcome::Running
    }

    pub fn returns(&self) -> Vec<f64> {
        self.ledger.returns()
    }

    pub fn entity(&self, uid: u32) -> Option<&Entity> {
        self.entities.iter().find(|e| e.uid == uid)
    }

    pub fn live_entities(&self) -> impl Iterator<Item = &Entity> {
        self.entities.iter().filter(|e| e.alive)
    }

    pub fn targets_remaining(&self) -> usize {
        self.live_entities()
            .filter(|e| matches!(e.attrs, Attributes::Monster { target: true, .. }))
            .count()
    }

    /// Whether `item` (an entity uid) defeats `monster`.
    pub fn effective(&self, item: Option<u32>, monster: &Entity) -> bool {
        let Attributes::Monster {
            element, target, ..
        } = monster.attrs
        else {
            return false;
        };
        let item_element = item
            .and_then(|uid| self.entity(uid))
            .and_then(|e| match e.attrs {
                Attributes::Item { element, .. } => Some(element),
                _ => None,
            });
        target && item_element == Some(element)
    }

    pub fn goal_text(&self) -> String {
        format!("defeat {}", self.assignment.team_name(self.assignment.target_team))
    }

    pub fn step(&mut self, actions: &[Action]) -> Result<StepResult> {
        if self.is_done() {
            return Err(Error::EpisodeDone);
        }
        if actions.len() != self.agents.len() {
            return Err(Error::BadActions {
                expected: self.agents.len(),
                got: actions.len(),
            });
        }
        let n = self.size();
        let mut cents = vec![0i64; self.agents.len()];
        let mut events = Vec::new();

        for (agent, &a) in self.agents.iter_mut().zip(actions) {
            agent.pos = a.apply(agent.pos, n, n);
        }

        // Pickups: the previously held item leaves play.
        for ai in 0..self.agents.len() {
            let pos = self.agents[ai].pos;
            let found = self
                .entities
                .iter()
                .position(|e| e.alive && e.is_item() && e.pos == pos);
            if let Some(idx) = found {
                let uid = self.entities[idx].uid;
                self.entities[idx].alive = false;
                if let Some(old) = self.agents[ai].inventory.replace(uid) {
                    events.push(Event::new(EventKind::Drop, Some(ai), Some(old)));
                }
                events.push(Event::new(EventKind::Pickup, Some(ai), Some(uid)));
            }
        }

        let mut lost = false;
        'combat: for ai in 0..self.agents.len() {
            let pos = self.agents[ai].pos;
            let engaged: Vec<usize> = (0..self.entities.len())
                .filter(|&i| {
                    let e = &self.entities[i];
                    e.alive && e.is_monster() && e.pos == pos
                })
                .collect();
            for idx in engaged {
                let monster = &self.entities[idx];
                let uid = monster.uid;
                let Attributes::Monster { target, .. } = monster.attrs else {
                    unreachable!()
                };
                if !target {
                    cents[ai] += LOSS_CENTS;
                    events.push(Event::new(EventKind::Distractor, Some(ai), Some(uid)));
                    lost = true;
                    break 'combat;
                } else if self.effective(self.agents[ai].inventory, monster) {
                    self.entities[idx].alive = false;
                    cents[ai] += KILL_CENTS;
                    events.push(Event::new(EventKind::Kill, Some(ai), Some(uid)));
                } else {
                    cents[ai] += LOSS_CENTS;
                    events.push(Event::new(EventKind::Unarmed, Some(ai), Some(uid)));
                    lost = true;
                    break 'combat;
                }
            }
        }

        if !lost && self.config.moving_monsters() {
            let agent_pos: Vec<GridPos> = self.agents.iter().map(|a| a.pos).collect();
            for e in self.entities.iter_mut().filter(|e| e.alive && e.is_monster()) {
                let a = monster_direction(e.pos, &agent_pos, self.config.chase_prob, &mut self.move_rng);
                e.pos = a.apply(e.pos, n, n);
            }
        }

        let rewards = self.ledger.record(&cents);
        self.step += 1;
        let win = !lost && self.targets_remaining() == 0;
        if lost {
            self.outcome = Outcome::Lost;
        } else if win {
            self.outcome = Outcome::Won;
            events.push(Event::new(EventKind::Win, None, None));
        } else if self.step >= self.config.max_steps {
            self.outcome = Outcome::Lost;
            events.push(Event::new(EventKind::Timeout, None, None));
        }
        Ok(StepResult {
            rewards,
            events,
            done: self.is_done(),
            win,
        })
    }

    /// Cell contents as word phrases; the viewer shows as `you`, others as
    /// `ally`.
    pub fn observe(&self, viewer: usize) -> Result<RtfmObservation> {
        let agent = self.agents.get(viewer).ok_or(Error::BadActions {
            expected: self.agents.len(),
            got: viewer + 1,
        })?;
        let n = self.size();
        let mut grid = vec![vec![Vec::new(); n]; n];
        for e in self.live_entities() {
            grid[e.pos.row][e.pos.col].push(e.name.clone());
        }
        for a in &self.agents {
            let token = if a.id == viewer {
                crate::manualgen::vocab::SELF_TOKEN
            } else {
                crate::manualgen::vocab::ALLY_TOKEN
            };
            grid[a.pos.row][a.pos.col].push(token.to_owned());
        }
        let inventory = agent
            .inventory
            .and_then(|uid| self.entity(uid))
            .map(|e| e.name.clone())
            .unwrap_or_else(|| EMPTY_INVENTORY.to_owned());
        Ok(RtfmObservation {
            grid,
            inventory,
            position: agent.pos,
        })
    }

    /// Text matrix for debugging: one line per row, cells separated by `|`.
    pub fn render(&self) -> Vec<String> {
        let n = self.size();
        let mut cells = vec![vec![Vec::<String>::new(); n]; n];
        for e in self.live_entities() {
            cells[e.pos.row][e.pos.col].push(e.name.clone());
        }
        for a in &self.agents {
            cells[a.pos.row][a.pos.col].push(format!("agent{}", a.id));
        }
        cells
            .into_iter()
            .map(|row| {
                row.into_iter()
                    .map(|c| if c.is_empty() { ".".to_owned() } else { c.join("+") })
                    .collect::<Vec<_>>()
                    .join(" | ")
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn state(stage: Stage, seed: u64) -> RtfmState {
        let cfg = RtfmConfig::new(stage, Split::Train, 2).unwrap();
        generate_rtfm(&cfg, &Rng::split(seed, "episode")).unwrap()
    }

    #[test]
    fn stage_one_has_four_entities() {
        let s = state(Stage::S1, 7);
        assert_eq!(s.entities.len(), 4);
        assert_eq!(s.agents.len(), 2);
        assert_eq!(s, state(Stage::S1, 7));
    }

    #[test]
    fn stage_two_adds_distractors() {
        for seed in 0..50 {
            let s = state(Stage::S2, seed);
            assert_eq!(s.entities.len(), 6);
            let distractors = s
                .entities
                .iter()
                .filter(|e| {
                    matches!(
                        e.attrs,
                        Attributes::Monster { target: false, .. } | Attributes::Item { correct: false, .. }
                    )
                })
                .count();
            assert_eq!(distractors, 2);
        }
    }

    #[test]
    fn assignment_invariants() {
        for seed in 0..200 {
            for stage in [Stage::S2, Stage::S5] {
                let s = state(stage, seed);
                let a = &s.assignment;
                for (t, i) in a.targets.iter().zip(&a.correct_items) {
                    assert_eq!(a.monster_team[t.monster as usize], a.target_team);
                    assert_eq!(a.item_element(*i), t.element);
                }
                let d = a.distractor_monster.unwrap();
                assert_ne!(a.monster_team[d.monster as usize], a.target_team);
                let mut cells: Vec<GridPos> = s.entities.iter().map(|e| e.pos).collect();
                cells.extend(s.agents.iter().map(|a| a.pos));
                let total = cells.len();
                cells.sort();
                cells.dedup();
                assert_eq!(cells.len(), total);
            }
        }
    }

    #[test]
    fn idle_episode_pays_only_penalty() {
        let mut s = state(Stage::S1, 3);
        // Agents never spawn on entities, and staying never moves them.
        for _ in 0..10 {
            s.step(&[Action::Stay, Action::Stay]).unwrap();
        }
        assert_eq!(s.returns(), vec![-0.02 * 10.0; 2]);
        assert_eq!(s.returns()[0], -0.2);
    }

    #[test]
    fn bad_action_count_rejected() {
        let mut s = state(Stage::S1, 3);
        assert!(matches!(
            s.step(&[Action::Stay]),
            Err(Error::BadActions { expected: 2, got: 1 })
        ));
        assert_eq!(s.step, 0);
    }

    #[test]
    fn chase_mixture_direction() {
        let mut rng = Rng::split(1, "monster-move");
        let agents = [GridPos::new(4, 0)];
        let n = 100_000;
        let left = (0..n)
            .filter(|_| monster_direction(GridPos::new(4, 4), &agents, CHASE_PROB, &mut rng) == Action::Left)
            .count();
        let f = left as f64 / n as f64;
        assert!((f - 0.7).abs() < 0.01, "{f}");
    }
}
