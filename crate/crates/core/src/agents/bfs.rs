//! Breadth-first shortest paths on the 4-connected grid.

use std::collections::VecDeque;

use crate::geom::{Action, GridMap, GridPos};

/// Step counts from `from` to every reachable cell, never entering a cell for
/// which `blocked` holds (the start cell is always allowed).
pub fn distances(from: GridPos, size: usize, blocked: &dyn Fn(GridPos) -> bool) -> GridMap<Option<usize>> {
    let mut dist = GridMap::filled(size, size, None);
    *dist.get_mut(from) = Some(0);
    let mut queue = VecDeque::from([from]);
    while let Some(p) = queue.pop_front() {
        let d = dist.get(p).expect("queued cells have a distance");
        for next in p.neighbours(size, size) {
            if dist.get(next).is_none() && !blocked(next) {
                *dist.get_mut(next) = Some(d + 1);
                queue.push_back(next);
            }
        }
    }
    dist
}

/// First move of a shortest path and the path length. Neighbours are tried
/// in up, down, left, right order, so ties resolve in that order. `to` is
/// reachable even if `blocked` holds there.
pub fn first_step(
    from: GridPos,
    to: GridPos,
    size: usize,
    blocked: &dyn Fn(GridPos) -> bool,
) -> Option<(Action, usize)> {
    if from == to {
        return Some((Action::Stay, 0));
    }
    // Search backwards from the goal so the first move can be read off the
    // neighbours of `from`.
    let back = distances(to, size, &|p| p != from && blocked(p));
    let total = (*back.get(from))?;
    Action::MOVES
        .into_iter()
        .find_map(|a| {
            let next = a.try_apply(from, size, size)?;
            let ok = next == to || !blocked(next);
            (ok && *back.get(next) == Some(total - 1)).then_some((a, total))
        })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(r: usize, c: usize) -> GridPos {
        GridPos::new(r, c)
    }

    #[test]
    fn open_grid_matches_manhattan() {
        let d = distances(p(0, 0), 5, &|_| false);
        assert_eq!(*d.get(p(4, 4)), Some(8));
        assert_eq!(first_step(p(0, 0), p(0, 3), 5, &|_| false), Some((Action::Right, 3)));
    }

    #[test]
    fn detours_around_walls() {
        let wall = |q: GridPos| q == p(0, 1);
        assert_eq!(first_step(p(0, 0), p(0, 2), 3, &wall), Some((Action::Down, 4)));
    }

    #[test]
    fn goal_may_be_blocked_cell() {
        let all = |_: GridPos| true;
        assert_eq!(first_step(p(0, 0), p(0, 1), 3, &all), Some((Action::Right, 1)));
        assert_eq!(first_step(p(0, 0), p(0, 2), 3, &all), None);
    }
}
