//! Multi-agent MESSENGER: agents fetch messages and bring them to goals while
//! avoiding the enemy. Entities are opaque symbols; only the manual says which
//! symbol plays which role.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{flee_step, greedy_step, nearest, Action, GridPos};
use crate::manualgen::splits::{MessengerCombo, Split, SplitSpec};
use crate::manualgen::vocab::MESSENGER_ENTITIES;
use crate::rng::{fnv1a, Rng};
use crate::world::{
    AgentState, Attributes, Entity, Event, EventKind, Movement, Outcome, RewardLedger, Role, Stage,
    StepResult,
};

pub const GRID: usize = 10;
pub const MAX_AGENTS: usize = 2;
pub const START: GridPos = GridPos::new(5, 5);
/// Spawn cells for the five entities.
pub const CANDIDATE_CELLS: [GridPos; 5] = [
    GridPos::new(2, 5),
    GridPos::new(8, 5),
    GridPos::new(5, 2),
    GridPos::new(5, 8),
    GridPos::new(3, 3),
];
pub const START_WITHOUT_MESSAGE_PROB: f64 = 0.8;

/// Render tokens for agents; entity symbols are `1..=12`.
pub const SELF_SYMBOL: u32 = 13;
pub const SELF_WITH_MESSAGE_SYMBOL: u32 = 14;
pub const ALLY_SYMBOL: u32 = 15;
pub const ALLY_WITH_MESSAGE_SYMBOL: u32 = 16;

const WIN_CENTS: i64 = 100;
const LOSS_CENTS: i64 = -100;
const MESSAGE_CENTS: i64 = 20;

pub fn step_limit(stage: Stage) -> u32 {
    match stage.number() {
        1 => 4,
        2 => 32,
        _ => 64,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MessengerConfig {
    pub stage: Stage,
    pub n_agents: usize,
    pub size: usize,
    pub max_steps: u32,
    pub split: Split,
}

impl MessengerConfig {
    pub fn new(stage: Stage, split: Split, n_agents: usize) -> Result<Self> {
        let config = Self {
            stage,
            n_agents,
            size: GRID,
            max_steps: step_limit(stage),
            split,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        self.stage.check_for(crate::world::EnvKind::Messenger)?;
        if !(1..=MAX_AGENTS).contains(&self.n_agents) {
            return Err(Error::InvalidConfig(format!(
                "messenger supports 1..={MAX_AGENTS} agents, got {}",
                self.n_agents
            )));
        }
        if !matches!(self.split, Split::Train | Split::Eval) {
            return Err(Error::InvalidConfig(format!(
                "messenger has train and eval splits, got {}",
                self.split
            )));
        }
        if self.size != GRID || self.max_steps != step_limit(self.stage) {
            return Err(Error::InvalidConfig(
                "messenger uses a 10x10 grid and the stage step limit".into(),
            ));
        }
        Ok(())
    }
}

/// Roles, movement and the symbol binding of one episode. Entities are
/// ordered enemy, message, message, goal, goal.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoleAssignment {
    pub split: Split,
    pub combo: MessengerCombo,
    pub movements: [Movement; 5],
    /// Symbol of each entity.
    pub symbols: [u32; 5],
    pub start_with_messages: bool,
}

pub const ROLES: [Role; 5] = [Role::Enemy, Role::Message, Role::Message, Role::Goal, Role::Goal];

impl RoleAssignment {
    pub fn entity_name(&self, slot: usize) -> &'static str {
        MESSENGER_ENTITIES[self.combo.entities()[slot] as usize].0
    }

    pub fn digest(&self) -> String {
        let text = serde_json::to_string(self).expect("assignment serializes");
        format!("{:016x}", fnv1a(text.as_bytes()))
    }
}

pub fn symbol_for(entity: u8) -> u32 {
    u32::from(entity) + 1
}

#[derive(Clone, Debug, PartialEq)]
pub struct MessengerState {
    pub config: MessengerConfig,
    pub assignment: RoleAssignment,
    pub entities: Vec<Entity>,
    pub agents: Vec<AgentState>,
    pub step: u32,
    pub outcome: Outcome,
    /// Entity credited to each agent toward the win condition.
    pub credit: Vec<Option<u32>>,
    ledger: RewardLedger,
    move_rng: Rng,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MessengerObservation {
    pub grid: Vec<Vec<Vec<u32>>>,
    pub has_message: bool,
    pub position: GridPos,
}

pub fn generate_messenger(config: &MessengerConfig, rng: &Rng) -> Result<MessengerState> {
    generate_messenger_with(config, SplitSpec::standard(), rng)
}

pub fn generate_messenger_with(
    config: &MessengerConfig,
    splits: &SplitSpec,
    rng: &Rng,
) -> Result<MessengerState> {
    config.validate()?;
    if CANDIDATE_CELLS.len() < 5 {
        return Err(Error::Generation("fewer than five candidate cells".into()));
    }
    let combo = *rng
        .child("roles")
        .choose(splits.messenger_combos(config.split))
        .ok_or_else(|| Error::Generation(format!("split {} has no combinations", config.split)))?;
    let mut move_pick = rng.child("movement");
    let movements = [0; 5].map(|_| match config.stage.number() {
        1 => Movement::Stationary,
        2 => Movement::Random,
        _ => [Movement::Stationary, Movement::Chasing, Movement::Fleeing][move_pick.below(3)],
    });
    let start_with_messages = config.stage < Stage::S3
        && !rng.child("start").bernoulli(START_WITHOUT_MESSAGE_PROB);
    let assignment = RoleAssignment {
        split: config.split,
        combo,
        movements,
        symbols: combo.entities().map(symbol_for),
        start_with_messages,
    };
    let mut cells = CANDIDATE_CELLS;
    rng.child("spawn").shuffle(&mut cells);
    Ok(MessengerState::from_layout(config, assignment, cells, rng.child("entity-move")))
}

/// One move for a MESSENGER entity.
pub fn entity_move(movement: Movement, pos: GridPos, agents: &[GridPos], size: usize, rng: &mut Rng) -> Action {
    match movement {
        Movement::Stationary => Action::Stay,
        Movement::Random => Action::MOVES[rng.below(4)],
        Movement::Chasing => match nearest(pos, agents) {
            Some(i) => greedy_step(pos, agents[i]),
            None => Action::Stay,
        },
        Movement::Fleeing => flee_step(pos, agents, size, size),
    }
}

impl MessengerState {
    fn from_layout(
        config: &MessengerConfig,
        assignment: RoleAssignment,
        cells: [GridPos; 5],
        move_rng: Rng,
    ) -> Self {
        let entities = (0..5)
            .map(|slot| Entity {
                uid: slot as u32,
                symbol: assignment.symbols[slot],
                name: assignment.entity_name(slot).to_owned(),
                attrs: Attributes::Messenger {
                    entity: assignment.combo.entities()[slot],
                    role: ROLES[slot],
                    movement: assignment.movements[slot],
                },
                pos: cells[slot],
                alive: true,
            })
            .collect();
        let agents = (0..config.n_agents)
            .map(|i| {
                let mut a = AgentState::new(i, START);
                a.has_message = assignment.start_with_messages;
                a
            })
            .collect();
        Self {
            config: config.clone(),
            assignment,
            entities,
            agents,
            step: 0,
            outcome: Outcome::Running,
            credit: vec![None; config.n_agents],
            ledger: RewardLedger::new(config.n_agents, 0.0),
            move_rng,
        }
    }

    /// The same layout with roles permuted among the placed entities: the
    /// entity in slot `k` takes the role of slot `perm[k]`. Each entity keeps
    /// its cell and symbol.
    pub fn with_permuted_roles(&self, perm: [usize; 5]) -> Result<Self> {
        let mut sorted = perm;
        sorted.sort_unstable();
        if sorted != [0, 1, 2, 3, 4] {
            return Err(Error::InvalidConfig(format!("{perm:?} is not a permutation")));
        }
        // new slot -> old slot
        let mut by_role = [0usize; 5];
        for (old, &role_slot) in perm.iter().enumerate() {
            by_role[role_slot] = old;
        }
        let ids = self.assignment.combo.entities();
        let pair = |a: usize, b: usize| if ids[a] <= ids[b] { [a, b] } else { [b, a] };
        let m = pair(by_role[1], by_role[2]);
        let g = pair(by_role[3], by_role[4]);
        let order = [by_role[0], m[0], m[1], g[0], g[1]];
        let combo = MessengerCombo {
            enemy: ids[order[0]],
            messages: [ids[order[1]], ids[order[2]]],
            goals: [ids[order[3]], ids[order[4]]],
        };
        let assignment = RoleAssignment {
            combo,
            movements: order.map(|o| self.assignment.movements[o]),
            symbols: order.map(|o| self.assignment.symbols[o]),
            ..self.assignment.clone()
        };
        let cells = order.map(|o| self.entities[o].pos);
        Ok(Self::from_layout(&self.config, assignment, cells, self.move_rng.clone()))
    }

    pub fn size(&self) -> usize {
        self.config.size
    }

    pub fn is_done(&self) -> bool {
        self.outcome != Outcome::Running
    }

    pub fn returns(&self) -> Vec<f64> {
        self.ledger.returns()
    }

    /// Role an agent must be credited with to win at S1/S2.
    pub fn required_role(&self) -> Role {
        if self.config.stage >= Stage::S3 || self.assignment.start_with_messages {
            Role::Goal
        } else {
            Role::Message
        }
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
        let stage = self.config.stage;
        let required = self.required_role();
        let mut cents = vec![0i64; self.agents.len()];
        let mut events = Vec::new();
        for (agent, &a) in self.agents.iter_mut().zip(actions) {
            agent.pos = a.apply(agent.pos, n, n);
        }

        let enemy = &self.entities[0];
        let mut lost = false;
        for a in &self.agents {
            if a.pos == enemy.pos {
                events.push(Event::new(EventKind::Enemy, Some(a.id), Some(enemy.uid)));
                lost = true;
            }
        }
        if !lost {
            'agents: for ai in 0..self.agents.len() {
                let pos = self.agents[ai].pos;
                for e in self.entities.iter().filter(|e| e.pos == pos) {
                    match e.role() {
                        Some(Role::Message) if !self.agents[ai].has_message => {
                            self.agents[ai].has_message = true;
                            events.push(Event::new(EventKind::Message, Some(ai), Some(e.uid)));
                            if stage == Stage::S3 {
                                cents[ai] += MESSAGE_CENTS;
                            }
                            if required == Role::Message && self.credit[ai].is_none() {
                                self.credit[ai] = Some(e.uid);
                            }
                        }
                        Some(Role::Goal) if !self.agents[ai].has_message => {
                            events.push(Event::new(
                                EventKind::GoalWithoutMessage,
                                Some(ai),
                                Some(e.uid),
                            ));
                            lost = true;
                            break 'agents;
                        }
                        Some(Role::Goal) => {
                            if self.credit[ai].is_none() && required == Role::Goal {
                                events.push(Event::new(EventKind::Deliver, Some(ai), Some(e.uid)));
                                self.credit[ai] = Some(e.uid);
                            }
                        }
                        _ => {}
                    }
                }
            }
        }

        let win = !lost && self.won();
        if !lost && !win {
            let agent_pos: Vec<GridPos> = self.agents.iter().map(|a| a.pos).collect();
            for e in &mut self.entities {
                let Attributes::Messenger { movement, .. } = e.attrs else {
                    continue;
                };
                let a = entity_move(movement, e.pos, &agent_pos, n, &mut self.move_rng);
                e.pos = a.apply(e.pos, n, n);
            }
        }
        self.step += 1;
        let timeout = !lost && !win && self.step >= self.config.max_steps;
        if lost || timeout {
            cents.iter_mut().for_each(|c| *c += LOSS_CENTS);
            self.outcome = Outcome::Lost;
            if timeout {
                events.push(Event::new(EventKind::Timeout, None, None));
            }
        } else if win {
            cents.iter_mut().for_each(|c| *c += WIN_CENTS);
            self.outcome = Outcome::Won;
            events.push(Event::new(EventKind::Win, None, None));
        }
        let rewards = self.ledger.record(&cents);
        Ok(StepResult {
            rewards,
            events,
            done: self.is_done(),
            win,
        })
    }

    fn won(&self) -> bool {
        if self.credit.iter().any(Option::is_none) {
            return false;
        }
        if self.config.stage >= Stage::S3 {
            return true;
        }
        let mut ids: Vec<u32> = self.credit.iter().flatten().copied().collect();
        ids.sort_unstable();
        ids.windows(2).all(|w| w[0] != w[1])
    }

    pub fn observe(&self, viewer: usize) -> Result<MessengerObservation> {
        let agent = self.agents.get(viewer).ok_or(Error::BadActions {
            expected: self.agents.len(),
            got: viewer + 1,
        })?;
        Ok(MessengerObservation {
            grid: self.symbol_grid(Some(viewer)),
            has_message: agent.has_message,
            position: agent.pos,
        })
    }

    /// Symbol ids per cell. With `viewer = None` only entities are drawn.
    pub fn symbol_grid(&self, viewer: Option<usize>) -> Vec<Vec<Vec<u32>>> {
        let n = self.size();
        let mut grid = vec![vec![Vec::new(); n]; n];
        for e in self.entities.iter().filter(|e| e.alive) {
            grid[e.pos.row][e.pos.col].push(e.symbol);
        }
        if let Some(v) = viewer {
            for a in &self.agents {
                let s = match (a.id == v, a.has_message) {
                    (true, false) => SELF_SYMBOL,
                    (true, true) => SELF_WITH_MESSAGE_SYMBOL,
                    (false, false) => ALLY_SYMBOL,
                    (false, true) => ALLY_WITH_MESSAGE_SYMBOL,
                };
                grid[a.pos.row][a.pos.col].push(s);
            }
        }
        grid
    }

    pub fn render(&self) -> Vec<String> {
        let n = self.size();
        let mut cells = vec![vec![Vec::<String>::new(); n]; n];
        for e in &self.entities {
            let role = e.role().map(Role::name).unwrap_or("?");
            cells[e.pos.row][e.pos.col].push(format!("{}:{}", e.name, role));
        }
        for a in &self.agents {
            let m = if a.has_message { "*" } else { "" };
            cells[a.pos.row][a.pos.col].push(format!("agent{}{m}", a.id));
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

    fn state(stage: Stage, seed: u64) -> MessengerState {
        let cfg = MessengerConfig::new(stage, Split::Train, 2).unwrap();
        generate_messenger(&cfg, &Rng::split(seed, "episode")).unwrap()
    }

    /// Moves the agents to `cells` in one step by teleporting them next door.
    fn walk(s: &mut MessengerState, targets: &[GridPos]) -> StepResult {
        for (a, t) in s.agents.iter_mut().zip(targets) {
            a.pos = Action::Up.apply(*t, GRID, GRID);
            if a.pos == *t {
                a.pos = Action::Down.apply(*t, GRID, GRID);
            }
        }
        let acts: Vec<Action> = s
            .agents
            .iter()
            .zip(targets)
            .map(|(a, &t)| greedy_step(a.pos, t))
            .collect();
        s.step(&acts).unwrap()
    }

    #[test]
    fn step_limits() {
        assert_eq!(
            [Stage::S1, Stage::S2, Stage::S3].map(step_limit),
            [4, 32, 64]
        );
    }

    #[test]
    fn layout_uses_candidate_cells() {
        let s = state(Stage::S1, 11);
        assert_eq!(s.entities.len(), 5);
        for e in &s.entities {
            assert!(CANDIDATE_CELLS.contains(&e.pos));
        }
        assert!(s.agents.iter().all(|a| a.pos == START));
        assert_eq!(s, state(Stage::S1, 11));
    }

    #[test]
    fn stage_three_starts_without_messages() {
        for seed in 0..100 {
            assert!(state(Stage::S3, seed).agents.iter().all(|a| !a.has_message));
        }
    }

    #[test]
    fn enemy_contact_loses_for_all() {
        let mut s = state(Stage::S1, 2);
        let enemy = s.entities[0].pos;
        let r = walk(&mut s, &[enemy, START]);
        assert!(r.done && !r.win);
        assert_eq!(r.rewards, vec![-1.0, -1.0]);
    }

    #[test]
    fn message_pickup_pays_at_stage_three() {
        let mut s = state(Stage::S3, 4);
        let msg = s.entities[1].pos;
        let r = walk(&mut s, &[msg, START]);
        assert_eq!(r.rewards[0], 0.2);
        assert_eq!(r.rewards[1], 0.0);
        assert!(s.agents[0].has_message);
    }

    #[test]
    fn same_message_is_not_a_win() {
        let seed = (0..100)
            .find(|&s| !state(Stage::S1, s).assignment.start_with_messages)
            .unwrap();
        let mut s = state(Stage::S1, seed);
        let msg = s.entities[1].pos;
        let r = walk(&mut s, &[msg, msg]);
        assert!(!r.win);
        let other = s.entities[2].pos;
        let r = walk(&mut s, &[msg, other]);
        assert!(!r.win, "agent 1 already holds a message");
    }

    #[test]
    fn distinct_messages_win() {
        let seed = (0..100)
            .find(|&s| !state(Stage::S1, s).assignment.start_with_messages)
            .unwrap();
        let mut s = state(Stage::S1, seed);
        let (a, b) = (s.entities[1].pos, s.entities[2].pos);
        let r = walk(&mut s, &[a, b]);
        assert!(r.done && r.win);
        assert_eq!(r.rewards, vec![1.0, 1.0]);
    }

    #[test]
    fn idle_stage_three_times_out() {
        // Chasing entities could walk into the idle agents; pick a layout
        // without any.
        let seed = (0..200)
            .find(|&s| {
                !state(Stage::S3, s)
                    .assignment
                    .movements
                    .contains(&Movement::Chasing)
            })
            .unwrap();
        let mut s = state(Stage::S3, seed);
        let mut last = None;
        while !s.is_done() {
            last = Some(s.step(&[Action::Stay, Action::Stay]).unwrap());
        }
        let r = last.unwrap();
        assert_eq!(s.step, 64);
        assert!(!r.win);
        assert_eq!(r.rewards, vec![-1.0, -1.0]);
    }

    #[test]
    fn flee_and_chase_moves() {
        let mut rng = Rng::split(0, "x");
        let agent = [GridPos::new(5, 9)];
        assert_eq!(
            entity_move(Movement::Chasing, GridPos::new(5, 5), &agent, GRID, &mut rng),
            Action::Right
        );
        assert_eq!(
            entity_move(Movement::Fleeing, GridPos::new(0, 0), &[GridPos::new(0, 1)], GRID, &mut rng),
            Action::Down
        );
        assert_eq!(
            entity_move(Movement::Stationary, GridPos::new(3, 3), &agent, GRID, &mut rng),
            Action::Stay
        );
    }

    #[test]
    fn permuted_roles_keep_symbols() {
        let s = state(Stage::S1, 5);
        let p = s.with_permuted_roles([3, 1, 2, 0, 4]).unwrap();
        assert_eq!(s.symbol_grid(None), p.symbol_grid(None));
        assert_ne!(s.assignment.combo, p.assignment.combo);
    }
}
