//! Ground-truth planners. They read the hidden assignment directly.

use crate::geom::{manhattan, Action, GridPos};
use crate::messenger::MessengerState;
use crate::rtfm::RtfmState;
use crate::world::{Attributes, Movement, Role, Stage};

use super::bfs::{distances, first_step};

/// (unmatched, total cost) and the assignment achieving it.
type Scored = ((usize, usize), Vec<Option<usize>>);

/// Tasks assigned per agent (`None` = idle) minimising total cost among
/// matchings that cover the most tasks. Exhaustive for up to three agents;
/// ties keep the first matching in enumeration order (agent 0 takes the
/// lowest task index first). Larger teams are matched greedily.
pub fn min_cost_matching(costs: &[Vec<Option<usize>>]) -> Vec<Option<usize>> {
    let n_agents = costs.len();
    let n_tasks = costs.first().map_or(0, Vec::len);
    if n_agents <= 3 {
        let mut best: Option<Scored> = None;
        let mut cur = vec![None; n_agents];
        let mut used = vec![false; n_tasks];
        exhaustive(costs, 0, &mut cur, &mut used, 0, 0, &mut best);
        best.map(|(_, m)| m).unwrap_or(cur)
    } else {
        greedy(costs, n_tasks)
    }
}

fn exhaustive(
    costs: &[Vec<Option<usize>>],
    agent: usize,
    cur: &mut Vec<Option<usize>>,
    used: &mut Vec<bool>,
    covered: usize,
    total: usize,
    best: &mut Option<Scored>,
) {
    if agent == costs.len() {
        // Rank by tasks covered (more is better), then by cost.
        let key = (usize::MAX - covered, total);
        if best.as_ref().is_none_or(|(k, _)| key < *k) {
            *best = Some((key, cur.clone()));
        }
        return;
    }
    for task in 0..used.len() {
        if let (false, Some(c)) = (used[task], costs[agent][task]) {
            used[task] = true;
            cur[agent] = Some(task);
            exhaustive(costs, agent + 1, cur, used, covered + 1, total + c, best);
            used[task] = false;
            cur[agent] = None;
        }
    }
    exhaustive(costs, agent + 1, cur, used, covered, total, best);
}

fn greedy(costs: &[Vec<Option<usize>>], n_tasks: usize) -> Vec<Option<usize>> {
    let mut out = vec![None; costs.len()];
    let mut used = vec![false; n_tasks];
    loop {
        let pick = costs
            .iter()
            .enumerate()
            .filter(|(a, _)| out[*a].is_none())
            .flat_map(|(a, row)| {
                row.iter()
                    .enumerate()
                    .filter(|(t, _)| !used[*t])
                    .filter_map(move |(t, c)| c.map(|c| (c, a, t)))
            })
            .min();
        match pick {
            Some((_, a, t)) => {
                out[a] = Some(t);
                used[t] = true;
            }
            None => return out,
        }
    }
}

/// Moves toward `to`, preferring a path that also avoids `near` cells when it
/// costs at most `slack` extra steps and fits in `budget`.
fn plan_move(
    from: GridPos,
    to: GridPos,
    size: usize,
    hard: &dyn Fn(GridPos) -> bool,
    near: &dyn Fn(GridPos) -> bool,
    budget: usize,
    slack: usize,
) -> Option<Action> {
    if hard(to) {
        return None;
    }
    if from == to {
        return Some(Action::Stay);
    }
    let (hard_move, hard_len) = first_step(from, to, size, hard)?;
    let soft = |p: GridPos| p != to && (hard(p) || near(p));
    match first_step(from, to, size, &soft) {
        Some((a, len)) if len <= hard_len + slack && len <= budget.max(hard_len) => Some(a),
        _ => Some(hard_move),
    }
}

/// Leaves a dangerous cell for the safe neighbour farthest from `threats`;
/// otherwise stays.
fn dodge(
    from: GridPos,
    size: usize,
    danger: &dyn Fn(GridPos) -> bool,
    blocked: &dyn Fn(GridPos) -> bool,
    threats: &[GridPos],
) -> Action {
    if !danger(from) {
        return Action::Stay;
    }
    let score = |p: GridPos| threats.iter().map(|&t| manhattan(p, t)).min().unwrap_or(0);
    let mut best: Option<(Action, usize)> = None;
    for a in Action::MOVES {
        let Some(next) = a.try_apply(from, size, size) else {
            continue;
        };
        if danger(next) || blocked(next) {
            continue;
        }
        let s = score(next);
        if best.is_none_or(|(_, b)| s > b) {
            best = Some((a, s));
        }
    }
    best.map_or(Action::Stay, |(a, _)| a)
}

fn near_any(p: GridPos, cells: &[GridPos]) -> bool {
    cells.iter().any(|&c| manhattan(p, c) <= 1)
}

/// One joint action for RTFM: matches agents to (item, target monster) tasks
/// and walks shortest paths that never enter a harmful monster's cell.
pub fn oracle_rtfm(state: &RtfmState) -> Vec<Action> {
    let n = state.size();
    if state.is_done() {
        return vec![Action::Stay; state.agents.len()];
    }
    struct Target {
        pos: GridPos,
        element: u8,
    }
    let targets: Vec<Target> = state
        .live_entities()
        .filter_map(|e| match e.attrs {
            Attributes::Monster {
                element,
                target: true,
                ..
            } => Some(Target { pos: e.pos, element }),
            _ => None,
        })
        .collect();
    let items: Vec<(GridPos, u8)> = state
        .live_entities()
        .filter_map(|e| match e.attrs {
            Attributes::Item { element, correct: true, .. } => Some((e.pos, element)),
            _ => None,
        })
        .collect();
    let item_cells: Vec<GridPos> = state.live_entities().filter(|e| e.is_item()).map(|e| e.pos).collect();
    let held: Vec<Option<u8>> = state
        .agents
        .iter()
        .map(|a| {
            a.inventory
                .and_then(|uid| state.entity(uid))
                .and_then(|e| match e.attrs {
                    Attributes::Item { element, .. } => Some(element),
                    _ => None,
                })
        })
        .collect();
    // Cells of monsters an agent carrying `element` must not enter.
    let harmful = |element: Option<u8>| -> Vec<GridPos> {
        state
            .live_entities()
            .filter(|e| match e.attrs {
                Attributes::Monster { element: me, target, .. } => !(target && Some(me) == element),
                _ => false,
            })
            .map(|e| e.pos)
            .collect()
    };
    let needed = |element: u8| targets.iter().any(|t| t.element == element);

    // Waypoint sequence per (agent, target).
    let route = |ai: usize, t: &Target| -> Option<(GridPos, usize)> {
        let a = &state.agents[ai];
        if held[ai] == Some(t.element) {
            let danger = harmful(held[ai]);
            let blocked = |p: GridPos| danger.contains(&p) || item_cells.contains(&p);
            let d = *distances(a.pos, n, &blocked).get(t.pos);
            return d.map(|d| (t.pos, d));
        }
        if held[ai].is_some_and(needed) {
            // Picking up another item would throw away a needed one.
            return None;
        }
        let &(item, _) = items.iter().find(|(_, e)| *e == t.element)?;
        let danger = harmful(held[ai]);
        let to_item = |p: GridPos| p != item && (danger.contains(&p) || item_cells.contains(&p));
        let d1 = (*distances(a.pos, n, &to_item).get(item))?;
        let armed = harmful(Some(t.element));
        let to_monster = |p: GridPos| p != item && (armed.contains(&p) || item_cells.contains(&p));
        let d2 = (*distances(item, n, &to_monster).get(t.pos))?;
        Some((item, d1 + d2))
    };

    let costs: Vec<Vec<Option<usize>>> = (0..state.agents.len())
        .map(|ai| targets.iter().map(|t| route(ai, t).map(|(_, c)| c)).collect())
        .collect();
    let matching = min_cost_matching(&costs);
    let moving = state.config.moving_monsters();

    state
        .agents
        .iter()
        .enumerate()
        .map(|(ai, a)| {
            let danger = harmful(held[ai]);
            let in_danger = |p: GridPos| danger.contains(&p);
            let planned = matching[ai].and_then(|t| {
                let (w, _) = route(ai, &targets[t])?;
                // A monster sharing its cell with an item would be fought
                // with the freshly picked-up item, so wait for it to move.
                let fight = w == targets[t].pos;
                let hard = |p: GridPos| {
                    if p == w {
                        danger.contains(&p) || (fight && item_cells.contains(&p))
                    } else {
                        danger.contains(&p) || item_cells.contains(&p)
                    }
                };
                let near = |p: GridPos| near_any(p, &danger);
                plan_move(a.pos, w, n, &hard, &near, usize::MAX, if moving { 2 } else { 4 })
            });
            planned.unwrap_or_else(|| dodge(a.pos, n, &in_danger, &|p| item_cells.contains(&p), &danger))
        })
        .collect()
}

/// One joint action for MESSENGER: distinct message or goal targets per
/// agent, never entering the enemy or an unsafe goal.
pub fn oracle_messenger(state: &MessengerState) -> Vec<Action> {
    let n = state.size();
    if state.is_done() {
        return vec![Action::Stay; state.agents.len()];
    }
    let stage3 = state.config.stage >= Stage::S3;
    let required = state.required_role();
    let remaining = (state.config.max_steps - state.step) as usize;
    let need: Vec<Option<Role>> = state
        .agents
        .iter()
        .map(|a| {
            if state.credit[a.id].is_some() {
                None
            } else if stage3 {
                Some(if a.has_message { Role::Goal } else { Role::Message })
            } else {
                Some(required)
            }
        })
        .collect();
    let claimed: Vec<u32> = state.credit.iter().flatten().copied().collect();
    let tasks: Vec<(u32, GridPos, Role)> = state
        .entities
        .iter()
        .filter_map(|e| {
            let role = e.role()?;
            (role != Role::Enemy && (stage3 || !claimed.contains(&e.uid))).then_some((e.uid, e.pos, role))
        })
        .collect();
    let enemy = state.entities[0].pos;
    let enemy_moves = !matches!(
        state.entities[0].attrs,
        Attributes::Messenger {
            movement: Movement::Stationary,
            ..
        }
    );
    // Cells agent `ai` must not enter on its way to `target`.
    let blocked = |ai: usize, target: Option<u32>| {
        let has_message = state.agents[ai].has_message;
        let idle = need[ai].is_none();
        let cells: Vec<GridPos> = state
            .entities
            .iter()
            .filter(|e| Some(e.uid) != target)
            .filter(|e| match e.role() {
                Some(Role::Enemy) => true,
                Some(Role::Goal) => !has_message || !idle,
                Some(Role::Message) => !idle && !(stage3 && has_message),
                None => false,
            })
            .map(|e| e.pos)
            .collect();
        cells
    };
    let costs: Vec<Vec<Option<usize>>> = (0..state.agents.len())
        .map(|ai| {
            tasks
                .iter()
                .map(|&(uid, pos, role)| {
                    if need[ai] != Some(role) {
                        return None;
                    }
                    let cells = blocked(ai, Some(uid));
                    if cells.contains(&pos) {
                        return None;
                    }
                    *distances(state.agents[ai].pos, n, &|p| p != pos && cells.contains(&p)).get(pos)
                })
                .collect()
        })
        .collect();
    let matching = min_cost_matching(&costs);

    state
        .agents
        .iter()
        .enumerate()
        .map(|(ai, a)| {
            // Unmatched agents still chase the cheapest reachable task; sharing
            // a target beats idling.
            let target = matching[ai]
                .or_else(|| {
                    (0..tasks.len())
                        .filter_map(|t| costs[ai][t].map(|c| (c, t)))
                        .min()
                        .map(|(_, t)| t)
                })
                .map(|t| tasks[t]);
            let cells = blocked(ai, target.map(|t| t.0));
            let hard = |p: GridPos| cells.contains(&p);
            let threats: Vec<GridPos> = state
                .entities
                .iter()
                .filter(|e| {
                    let harmful = match e.role() {
                        Some(Role::Enemy) => true,
                        Some(Role::Goal) => !a.has_message,
                        _ => false,
                    };
                    harmful && !matches!(e.attrs, Attributes::Messenger { movement: Movement::Stationary, .. })
                })
                .map(|e| e.pos)
                .collect();
            let near = |p: GridPos| (enemy_moves && manhattan(p, enemy) <= 1) || near_any(p, &threats);
            target
                .and_then(|(_, pos, _)| plan_move(a.pos, pos, n, &hard, &near, remaining, 2))
                .unwrap_or_else(|| {
                    let mut all_threats = threats.clone();
                    all_threats.push(enemy);
                    dodge(a.pos, n, &hard, &|_| false, &all_threats)
                })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matching_prefers_direct_pairing() {
        // Agent 0 is next to task 0, agent 1 next to task 1. Crossing costs
        // 10 + 10 = 20 against 1 + 1 = 2.
        let costs = vec![vec![Some(1), Some(10)], vec![Some(10), Some(1)]];
        assert_eq!(min_cost_matching(&costs), vec![Some(0), Some(1)]);
        let crossed = vec![vec![Some(10), Some(1)], vec![Some(1), Some(10)]];
        assert_eq!(min_cost_matching(&crossed), vec![Some(1), Some(0)]);
    }

    #[test]
    fn matching_covers_tasks_before_cost() {
        // Only agent 1 can reach task 1, so agent 0 takes task 0 even though
        // agent 1 would be cheaper there.
        let costs = vec![vec![Some(5), None], vec![Some(1), Some(9)]];
        assert_eq!(min_cost_matching(&costs), vec![Some(0), Some(1)]);
    }

    #[test]
    fn matching_leaves_extra_agents_idle() {
        let costs = vec![vec![Some(3)], vec![Some(2)], vec![Some(4)]];
        assert_eq!(min_cost_matching(&costs), vec![None, Some(0), None]);
    }

    #[test]
    fn greedy_for_large_teams() {
        let costs = vec![vec![Some(1)], vec![Some(2)], vec![Some(3)], vec![Some(0)]];
        assert_eq!(min_cost_matching(&costs), vec![None, None, None, Some(0)]);
    }

    #[test]
    fn dodge_leaves_danger() {
        let threat = [GridPos::new(2, 2)];
        let danger = |p: GridPos| p == threat[0];
        let a = dodge(GridPos::new(2, 2), 5, &danger, &|_| false, &threat);
        assert_ne!(a, Action::Stay);
        assert_eq!(dodge(GridPos::new(0, 0), 5, &danger, &|_| false, &threat), Action::Stay);
    }
}
