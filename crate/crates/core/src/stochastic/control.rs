use std::fmt::Write as _;

use super::grid::TimeGrid;
use super::rng::keyed_index;
use crate::error::{Error, Result};

/// Hypercube partition of the state space at one time step with a generator
/// choice per cell.
#[derive(Debug, Clone, PartialEq)]
pub struct StatePartition {
    lower: Vec<f64>,
    width: Vec<f64>,
    bins_per_dim: usize,
    choices: Vec<u32>,
}

impl StatePartition {
    /// Equal-width cells over `[lower, upper]` in each dimension. Points
    /// outside are clamped to the outermost cells.
    pub fn new(lower: Vec<f64>, upper: Vec<f64>, bins_per_dim: usize, choices: Vec<u32>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::DimensionMismatch {
                expected: lower.len(),
                got: upper.len(),
            });
        }
        if bins_per_dim == 0 {
            return Err(Error::InvalidArgument("state_bins must be at least 1".into()));
        }
        let cells = bins_per_dim.pow(lower.len() as u32);
        if choices.len() != cells {
            return Err(Error::DimensionMismatch {
                expected: cells,
                got: choices.len(),
            });
        }
        let width = lower
            .iter()
            .zip(&upper)
            .map(|(l, u)| ((u - l) / bins_per_dim as f64).max(0.0))
            .collect();
        Ok(StatePartition {
            lower,
            width,
            bins_per_dim,
            choices,
        })
    }

    pub fn uniform(dim: usize, choice: u32) -> Self {
        StatePartition {
            lower: vec![0.0; dim],
            width: vec![0.0; dim],
            bins_per_dim: 1,
            choices: vec![choice],
        }
    }

    pub fn cell_of(&self, x: &[f64]) -> usize {
        let mut cell = 0;
        for (j, xj) in x.iter().enumerate() {
            let w = self.width[j];
            let b = if w > 0.0 {
                let raw = ((xj - self.lower[j]) / w).floor();
                raw.clamp(0.0, (self.bins_per_dim - 1) as f64) as usize
            } else {
                0
            };
            cell = cell * self.bins_per_dim + b;
        }
        cell
    }

    pub fn choose(&self, x: &[f64]) -> u32 {
        self.choices[self.cell_of(x)]
    }

    pub fn choices(&self) -> &[u32] {
        &self.choices
    }

    pub fn bins_per_dim(&self) -> usize {
        self.bins_per_dim
    }
}

/// State-feedback rule: one partition per fine time step.
#[derive(Debug, Clone, PartialEq)]
pub struct FeedbackRule {
    steps: Vec<StatePartition>,
}

impl FeedbackRule {
    pub fn new(steps: Vec<StatePartition>) -> Self {
        FeedbackRule { steps }
    }

    pub fn steps(&self) -> &[StatePartition] {
        &self.steps
    }

    /// `Some(i)` when every cell of every step picks generator `i`.
    pub fn constant_choice(&self) -> Option<u32> {
        let first = *self.steps.first()?.choices.first()?;
        self.steps
            .iter()
            .all(|s| s.choices.iter().all(|&c| c == first))
            .then_some(first)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ControlKind {
    /// Path-independent generator index per fine step.
    Sequence(Vec<u32>),
    /// Markovian rule `(step, state) -> index`.
    Feedback(FeedbackRule),
    /// Independent uniform choice per `(path, step)`; used to spread training
    /// paths over the reachable states.
    Randomized { count: u32, seed: u64 },
}

/// Piecewise-constant, right-continuous generator assignment on a time grid:
/// the choice made at `t_k` holds on `[t_k, t_{k+1})`.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlSchedule {
    grid: TimeGrid,
    kind: ControlKind,
}

impl ControlSchedule {
    pub fn constant(grid: TimeGrid, index: u32) -> Self {
        ControlSchedule {
            kind: ControlKind::Sequence(vec![index; grid.n_steps()]),
            grid,
        }
    }

    pub fn sequence(grid: TimeGrid, choices: Vec<u32>) -> Result<Self> {
        if choices.len() != grid.n_steps() {
            return Err(Error::DimensionMismatch {
                expected: grid.n_steps(),
                got: choices.len(),
            });
        }
        Ok(ControlSchedule {
            grid,
            kind: ControlKind::Sequence(choices),
        })
    }

    /// `K` coarse blocks over the fine grid; fine step `k` belongs to block
    /// `floor(k K / n)`.
    pub fn from_blocks(grid: TimeGrid, blocks: &[u32]) -> Result<Self> {
        let k_blocks = blocks.len();
        let n = grid.n_steps();
        if k_blocks == 0 || k_blocks > n {
            return Err(Error::InvalidArgument(format!(
                "block count {k_blocks} must lie in 1..={n}"
            )));
        }
        let choices = (0..n).map(|k| blocks[k * k_blocks / n]).collect();
        Self::sequence(grid, choices)
    }

    pub fn feedback(grid: TimeGrid, rule: FeedbackRule) -> Result<Self> {
        if rule.steps.len() != grid.n_steps() {
            return Err(Error::DimensionMismatch {
                expected: grid.n_steps(),
                got: rule.steps.len(),
            });
        }
        Ok(ControlSchedule {
            grid,
            kind: ControlKind::Feedback(rule),
        })
    }

    pub fn randomized(grid: TimeGrid, count: u32, seed: u64) -> Self {
        ControlSchedule {
            grid,
            kind: ControlKind::Randomized { count, seed },
        }
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn kind(&self) -> &ControlKind {
        &self.kind
    }

    #[inline]
    pub fn choose(&self, path: usize, step: usize, x: &[f64]) -> usize {
        match &self.kind {
            ControlKind::Sequence(c) => c[step] as usize,
            ControlKind::Feedback(rule) => rule.steps[step].choose(x) as usize,
            ControlKind::Randomized { count, seed } => {
                keyed_index(*seed, path as u64, step as u64, *count as u64) as usize
            }
        }
    }

    /// Largest index this schedule can select.
    pub fn max_index(&self) -> usize {
        match &self.kind {
            ControlKind::Sequence(c) => c.iter().copied().max().unwrap_or(0) as usize,
            ControlKind::Feedback(rule) => rule
                .steps
                .iter()
                .flat_map(|s| s.choices.iter().copied())
                .max()
                .unwrap_or(0) as usize,
            ControlKind::Randomized { count, .. } => count.saturating_sub(1) as usize,
        }
    }

    /// `Some(i)` if the schedule always picks generator `i`.
    pub fn constant_choice(&self) -> Option<u32> {
        match &self.kind {
            ControlKind::Sequence(c) => {
                let first = *c.first()?;
                c.iter().all(|&v| v == first).then_some(first)
            }
            ControlKind::Feedback(rule) => rule.constant_choice(),
            ControlKind::Randomized { count, .. } => (*count == 1).then_some(0),
        }
    }

    /// Compact text form: run-length `index x count` pairs for sequences,
    /// `feedback(...)` summary for rules.
    pub fn encode(&self) -> String {
        match &self.kind {
            ControlKind::Sequence(c) => run_length(c),
            ControlKind::Feedback(rule) => match rule.constant_choice() {
                Some(i) => format!("feedback(const={i})"),
                None => {
                    let bins = rule.steps.first().map_or(0, |s| s.bins_per_dim);
                    let per_step: Vec<u32> = rule
                        .steps
                        .iter()
                        .map(|s| s.choices.iter().copied().max().unwrap_or(0))
                        .collect();
                    format!("feedback(bins={bins};max={})", run_length(&per_step))
                }
            },
            ControlKind::Randomized { count, seed } => format!("randomized(count={count};seed={seed})"),
        }
    }
}

fn run_length(c: &[u32]) -> String {
    let mut out = String::new();
    let mut i = 0;
    while i < c.len() {
        let mut j = i;
        while j < c.len() && c[j] == c[i] {
            j += 1;
        }
        if !out.is_empty() {
            out.push(' ');
        }
        let _ = write!(out, "{}x{}", c[i], j - i);
        i = j;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn blocks_cover_the_grid() {
        let grid = TimeGrid::new(0.0, 1.0, 50).unwrap();
        let s = ControlSchedule::from_blocks(grid, &[0, 1, 1, 0]).unwrap();
        assert_eq!(s.encode(), "0x13 1x25 0x12");
        assert_eq!(s.max_index(), 1);
        assert_eq!(s.constant_choice(), None);
        let c = ControlSchedule::from_blocks(grid, &[1, 1, 1, 1]).unwrap();
        assert_eq!(c.constant_choice(), Some(1));
        assert!(ControlSchedule::from_blocks(grid, &[]).is_err());
    }

    #[test]
    fn partition_clamps_outside_points() {
        let p = StatePartition::new(vec![-1.0], vec![1.0], 4, vec![0, 1, 2, 3]).unwrap();
        assert_eq!(p.choose(&[-5.0]), 0);
        assert_eq!(p.choose(&[-0.9]), 0);
        assert_eq!(p.choose(&[0.1]), 2);
        assert_eq!(p.choose(&[7.0]), 3);
        let p2 = StatePartition::new(vec![0.0, 0.0], vec![1.0, 1.0], 2, vec![0, 1, 2, 3]).unwrap();
        assert_eq!(p2.choose(&[0.9, 0.1]), 2);
        assert_eq!(p2.choose(&[0.1, 0.9]), 1);
    }

    #[test]
    fn sequences_are_path_independent() {
        let grid = TimeGrid::new(0.0, 1.0, 4).unwrap();
        let s = ControlSchedule::sequence(grid, vec![0, 1, 0, 1]).unwrap();
        for m in 0..10 {
            assert_eq!(s.choose(m, 1, &[m as f64]), 1);
        }
    }
}
