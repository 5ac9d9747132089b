use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GridPos {
    pub row: usize,
    pub col: usize,
}

impl GridPos {
    pub const fn new(row: usize, col: usize) -> Self {
        Self { row, col }
    }

    pub fn on_grid(self, h: usize, w: usize) -> bool {
        self.row < h && self.col < w
    }

    pub fn check(self, h: usize, w: usize) -> Result<Self> {
        if self.on_grid(h, w) {
            Ok(self)
        } else {
            Err(Error::OffGrid { pos: self, h, w })
        }
    }

    pub fn index(self, w: usize) -> usize {
        self.row * w + self.col
    }

    /// The 4-neighbourhood that lies on the grid.
    pub fn neighbours(self, h: usize, w: usize) -> impl Iterator<Item = GridPos> {
        Action::MOVES
            .into_iter()
            .filter_map(move |a| a.try_apply(self, h, w))
    }
}

impl fmt::Display for GridPos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.row, self.col)
    }
}

pub fn manhattan(a: GridPos, b: GridPos) -> usize {
    a.row.abs_diff(b.row) + a.col.abs_diff(b.col)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Action {
    Up,
    Down,
    Left,
    Right,
    Stay,
}

impl Action {
    pub const ALL: [Action; 5] = [
        Action::Up,
        Action::Down,
        Action::Left,
        Action::Right,
        Action::Stay,
    ];
    pub const MOVES: [Action; 4] = [Action::Up, Action::Down, Action::Left, Action::Right];
    pub const COUNT: usize = 5;

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Action> {
        Self::ALL.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Action::Up => "up",
            Action::Down => "down",
            Action::Left => "left",
            Action::Right => "right",
            Action::Stay => "stay",
        }
    }

    /// Destination if it stays on the grid.
    pub fn try_apply(self, pos: GridPos, h: usize, w: usize) -> Option<GridPos> {
        let GridPos { row, col } = pos;
        let next = match self {
            Action::Up => GridPos::new(row.checked_sub(1)?, col),
            Action::Down => GridPos::new(row + 1, col),
            Action::Left => GridPos::new(row, col.checked_sub(1)?),
            Action::Right => GridPos::new(row, col + 1),
            Action::Stay => pos,
        };
        next.on_grid(h, w).then_some(next)
    }

    /// Destination; off-grid moves resolve to staying put.
    pub fn apply(self, pos: GridPos, h: usize, w: usize) -> GridPos {
        self.try_apply(pos, h, w).unwrap_or(pos)
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Action {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "up" | "u" | "w" => Ok(Action::Up),
            "down" | "d" | "s" => Ok(Action::Down),
            "left" | "l" | "a" => Ok(Action::Left),
            "right" | "r" => Ok(Action::Right),
            "stay" | "x" | "." => Ok(Action::Stay),
            other => Err(Error::UnknownAction(other.to_owned())),
        }
    }
}

/// Dense row-major `h x w` map.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridMap<T> {
    pub h: usize,
    pub w: usize,
    pub data: Vec<T>,
}

impl<T: Clone> GridMap<T> {
    pub fn filled(h: usize, w: usize, value: T) -> Self {
        Self {
            h,
            w,
            data: vec![value; h * w],
        }
    }

    pub fn get(&self, pos: GridPos) -> &T {
        &self.data[pos.index(self.w)]
    }

    pub fn get_mut(&mut self, pos: GridPos) -> &mut T {
        &mut self.data[pos.index(self.w)]
    }

    pub fn rows(&self) -> Vec<Vec<T>> {
        self.data.chunks(self.w).map(|r| r.to_vec()).collect()
    }

    pub fn cells(&self) -> impl Iterator<Item = GridPos> + '_ {
        (0..self.h).flat_map(move |r| (0..self.w).map(move |c| GridPos::new(r, c)))
    }
}

/// Manhattan distance from `pos` to every cell.
pub fn positional_feature(pos: GridPos, h: usize, w: usize) -> Result<GridMap<usize>> {
    pos.check(h, w)?;
    let data = (0..h)
        .flat_map(|r| (0..w).map(move |c| manhattan(pos, GridPos::new(r, c))))
        .collect();
    Ok(GridMap { h, w, data })
}

/// Cellwise distance to the closest of `others`.
pub fn joint_positional_feature(others: &[GridPos], h: usize, w: usize) -> Result<GridMap<usize>> {
    if others.is_empty() {
        return Err(Error::NoOtherAgents);
    }
    for p in others {
        p.check(h, w)?;
    }
    let data = (0..h)
        .flat_map(|r| {
            (0..w).map(move |c| {
                let cell = GridPos::new(r, c);
                others.iter().map(|&o| manhattan(o, cell)).min().unwrap_or(0)
            })
        })
        .collect();
    Ok(GridMap { h, w, data })
}

/// Index of the closest target; ties go to the lowest index.
pub fn nearest(from: GridPos, targets: &[GridPos]) -> Option<usize> {
    targets
        .iter()
        .enumerate()
        .min_by_key(|(i, &t)| (manhattan(from, t), *i))
        .map(|(i, _)| i)
}

/// One greedy step from `from` toward `to`: along the axis with the larger
/// remaining distance, rows first on equality. Co-located gives `Stay`.
pub fn greedy_step(from: GridPos, to: GridPos) -> Action {
    let dr = from.row.abs_diff(to.row);
    let dc = from.col.abs_diff(to.col);
    if dr == 0 && dc == 0 {
        Action::Stay
    } else if dr >= dc {
        if to.row < from.row {
            Action::Up
        } else {
            Action::Down
        }
    } else if to.col < from.col {
        Action::Left
    } else {
        Action::Right
    }
}

/// The legal move maximising distance to the nearest of `threats`.
/// Candidates are tried in `Action::ALL` order and the first maximum wins.
pub fn flee_step(from: GridPos, threats: &[GridPos], h: usize, w: usize) -> Action {
    if threats.is_empty() {
        return Action::Stay;
    }
    let mut best = (Action::Stay, 0usize);
    let mut first = true;
    for a in Action::ALL {
        let Some(dest) = a.try_apply(from, h, w) else {
            continue;
        };
        let d = threats.iter().map(|&t| manhattan(dest, t)).min().unwrap_or(0);
        if first || d > best.1 {
            best = (a, d);
            first = false;
        }
    }
    best.0
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(r: usize, c: usize) -> GridPos {
        GridPos::new(r, c)
    }

    #[test]
    fn manhattan_examples() {
        assert_eq!(manhattan(p(0, 0), p(0, 0)), 0);
        assert_eq!(manhattan(p(0, 0), p(2, 3)), 5);
        assert_eq!(manhattan(p(7, 0), p(0, 7)), 14);
    }

    #[test]
    fn positional_feature_examples() {
        assert_eq!(
            positional_feature(p(0, 0), 2, 2).unwrap().rows(),
            vec![vec![0, 1], vec![1, 2]]
        );
        assert_eq!(
            positional_feature(p(1, 1), 3, 3).unwrap().rows(),
            vec![vec![2, 1, 2], vec![1, 0, 1], vec![2, 1, 2]]
        );
        assert_eq!(
            positional_feature(p(0, 2), 1, 3).unwrap().rows(),
            vec![vec![2, 1, 0]]
        );
        assert!(matches!(
            positional_feature(p(3, 0), 2, 2),
            Err(Error::OffGrid { .. })
        ));
    }

    #[test]
    fn joint_positional_feature_examples() {
        assert_eq!(
            joint_positional_feature(&[p(0, 0)], 2, 2).unwrap().rows(),
            vec![vec![0, 1], vec![1, 2]]
        );
        // Cellwise minimum of the two single-agent maps, computed by hand:
        // (0,0)->[[0,1],[1,2]], (1,1)->[[2,1],[1,0]].
        assert_eq!(
            joint_positional_feature(&[p(0, 0), p(1, 1)], 2, 2)
                .unwrap()
                .rows(),
            vec![vec![0, 1], vec![1, 0]]
        );
        assert_eq!(
            joint_positional_feature(&[p(0, 0), p(0, 1)], 1, 2)
                .unwrap()
                .rows(),
            vec![vec![0, 0]]
        );
        assert!(matches!(
            joint_positional_feature(&[], 2, 2),
            Err(Error::NoOtherAgents)
        ));
    }

    #[test]
    fn greedy_step_tie_break() {
        assert_eq!(greedy_step(p(4, 4), p(4, 0)), Action::Left);
        assert_eq!(greedy_step(p(0, 0), p(2, 0)), Action::Down);
        assert_eq!(greedy_step(p(3, 3), p(3, 3)), Action::Stay);
        assert_eq!(greedy_step(p(5, 5), p(5, 9)), Action::Right);
        // equal distances prefer the row axis
        assert_eq!(greedy_step(p(2, 2), p(0, 0)), Action::Up);
        assert_eq!(greedy_step(p(2, 2), p(5, 6)), Action::Right);
    }

    #[test]
    fn flee_from_corner() {
        assert_eq!(flee_step(p(0, 0), &[p(0, 1)], 10, 10), Action::Down);
    }

    #[test]
    fn off_grid_moves_stay() {
        assert_eq!(Action::Up.apply(p(0, 3), 4, 4), p(0, 3));
        assert_eq!(Action::Right.apply(p(0, 3), 4, 4), p(0, 3));
        assert_eq!(Action::Down.apply(p(0, 3), 4, 4), p(1, 3));
    }

    #[test]
    fn nearest_prefers_lowest_index() {
        assert_eq!(nearest(p(2, 2), &[p(0, 2), p(4, 2), p(2, 3)]), Some(2));
        assert_eq!(nearest(p(2, 2), &[p(0, 2), p(4, 2)]), Some(0));
        assert_eq!(nearest(p(2, 2), &[]), None);
    }
}
