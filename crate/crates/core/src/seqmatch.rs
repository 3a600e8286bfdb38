//! Difference matrices and constant-velocity trajectory scoring.
//!
//! Indices in this module follow the reference convention used across the
//! crate: end indices and columns are 1-based. A trajectory ending at column
//! `j` with velocity `v` visits, for testing frame `t` of `L`, column
//! `round(j - v * (L - t))` with halves rounded up. Velocities are stored in
//! hundredths so that the rounding is exact integer arithmetic.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::descriptor::{l1, Descriptor};
use crate::error::{Error, Result};

/// Testing-to-reference speed ratio in hundredths (`100` is 1.0).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(into = "f64", try_from = "f64")]
pub struct Velocity(u16);

impl Velocity {
    pub const UNIT: Velocity = Velocity(100);

    pub fn from_hundredths(h: u16) -> Result<Self> {
        if h == 0 {
            return Err(Error::Config("velocity must be positive".into()));
        }
        Ok(Self(h))
    }

    /// Rounds `ratio` to the nearest hundredth.
    pub fn from_ratio(ratio: f64) -> Result<Self> {
        if !ratio.is_finite() || ratio <= 0.0 || ratio > 10.0 {
            return Err(Error::Config(format!("velocity {ratio} outside (0, 10]")));
        }
        Self::from_hundredths((ratio * 100.0).round() as u16)
    }

    pub fn hundredths(self) -> u16 {
        self.0
    }

    pub fn ratio(self) -> f64 {
        f64::from(self.0) / 100.0
    }

    /// `round(end - self * offset)` with halves rounded up.
    #[inline]
    pub fn step_back(self, end: i64, offset: usize) -> i64 {
        (100 * end - i64::from(self.0) * offset as i64 + 50).div_euclid(100)
    }
}

impl fmt::Display for Velocity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.2}", self.ratio())
    }
}

impl From<Velocity> for f64 {
    fn from(v: Velocity) -> f64 {
        v.ratio()
    }
}

impl TryFrom<f64> for Velocity {
    type Error = Error;
    fn try_from(v: f64) -> Result<Self> {
        Velocity::from_ratio(v)
    }
}

/// Ascending, duplicate-free list of velocities tried at every end index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Velocity>", into = "Vec<Velocity>")]
pub struct VelocitySweep(Vec<Velocity>);

impl VelocitySweep {
    pub fn new(mut velocities: Vec<Velocity>) -> Result<Self> {
        velocities.sort_unstable();
        velocities.dedup();
        if velocities.is_empty() {
            return Err(Error::Config("velocity sweep is empty".into()));
        }
        Ok(Self(velocities))
    }

    pub fn single(v: Velocity) -> Self {
        Self(vec![v])
    }

    pub fn velocities(&self) -> &[Velocity] {
        &self.0
    }

    pub fn max(&self) -> Velocity {
        *self.0.last().expect("sweep is non-empty")
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl Default for VelocitySweep {
    fn default() -> Self {
        Self([80, 90, 100, 110, 120].into_iter().map(Velocity).collect())
    }
}

impl TryFrom<Vec<Velocity>> for VelocitySweep {
    type Error = Error;
    fn try_from(v: Vec<Velocity>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<VelocitySweep> for Vec<Velocity> {
    fn from(s: VelocitySweep) -> Self {
        s.0
    }
}

/// Read access to a grid of non-negative costs. Rows are testing frames,
/// columns reference frames; both 0-based here.
pub trait CostGrid {
    fn rows(&self) -> usize;
    fn cols(&self) -> usize;
    fn cost(&self, row: usize, col: usize) -> f64;
}

#[derive(Debug, Clone, PartialEq)]
pub struct DifferenceMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<f64>,
}

impl DifferenceMatrix {
    /// Pairwise distances between every testing frame and every frame of the
    /// reference window.
    pub fn build(test: &[Descriptor], reference: &[Descriptor]) -> Result<Self> {
        if test.is_empty() {
            return Err(Error::Empty("testing sequence"));
        }
        if reference.is_empty() {
            return Err(Error::Empty("reference window"));
        }
        let dim = test[0].len();
        if let Some(bad) = test.iter().chain(reference).find(|d| d.len() != dim) {
            return Err(Error::LengthMismatch {
                expected: dim,
                actual: bad.len(),
            });
        }
        let cols = reference.len();
        let mut entries = vec![0.0; test.len() * cols];
        entries
            .par_chunks_mut(cols)
            .zip(test.par_iter())
            .for_each(|(row, t)| {
                for (cell, r) in row.iter_mut().zip(reference) {
                    *cell = l1(t.values(), r.values());
                }
            });
        Ok(Self {
            rows: test.len(),
            cols,
            entries,
        })
    }

    pub fn from_entries(rows: usize, cols: usize, entries: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Empty("difference matrix"));
        }
        if entries.len() != rows * cols {
            return Err(Error::LengthMismatch {
                expected: rows * cols,
                actual: entries.len(),
            });
        }
        if entries.iter().any(|e| !e.is_finite() || *e < 0.0) {
            return Err(Error::Input("difference entries must be finite and non-negative".into()));
        }
        Ok(Self {
            rows,
            cols,
            entries,
        })
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.entries[row * self.cols + col]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    /// Local contrast enhancement: every entry is z-scored against the
    /// entries of its row within `radius` columns, and the whole matrix is
    /// then shifted so its minimum is zero.
    pub fn enhance_contrast(&self, radius: usize) -> Self {
        let mut out = vec![0.0; self.entries.len()];
        for r in 0..self.rows {
            let row = &self.entries[r * self.cols..(r + 1) * self.cols];
            for c in 0..self.cols {
                let lo = c.saturating_sub(radius);
                let hi = (c + radius + 1).min(self.cols);
                let window = &row[lo..hi];
                let n = window.len() as f64;
                let mean = window.iter().sum::<f64>() / n;
                let var = window.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
                out[r * self.cols + c] = (row[c] - mean) / var.sqrt().max(1e-12);
            }
        }
        let min = out.iter().copied().fold(f64::INFINITY, f64::min);
        out.iter_mut().for_each(|x| *x -= min);
        Self {
            rows: self.rows,
            cols: self.cols,
            entries: out,
        }
    }
}

impl CostGrid for DifferenceMatrix {
    fn rows(&self) -> usize {
        self.rows
    }
    fn cols(&self) -> usize {
        self.cols
    }
    fn cost(&self, row: usize, col: usize) -> f64 {
        self.get(row, col)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryScore {
    /// 1-based end column.
    pub end_index: usize,
    pub velocity: Velocity,
    pub score: f64,
}

/// Whether the line ending at `end` with velocity `v` stays inside a grid of
/// `rows` x `cols`.
#[inline]
pub fn line_fits(rows: usize, cols: usize, end: usize, v: Velocity) -> bool {
    end >= 1 && end <= cols && v.step_back(end as i64, rows - 1) >= 1
}

/// Sum of grid costs along the constant-velocity line ending at `end`.
pub fn trajectory_score<G: CostGrid + ?Sized>(grid: &G, end: usize, v: Velocity) -> Result<f64> {
    let rows = grid.rows();
    if rows == 0 || !line_fits(rows, grid.cols(), end, v) {
        return Err(Error::OutOfRange {
            end,
            velocity: v.ratio(),
            cols: grid.cols(),
        });
    }
    Ok(line_sum(grid, end, v))
}

#[inline]
pub(crate) fn line_sum<G: CostGrid + ?Sized>(grid: &G, end: usize, v: Velocity) -> f64 {
    let rows = grid.rows();
    (0..rows)
        .map(|t| {
            let col = v.step_back(end as i64, rows - 1 - t);
            grid.cost(t, (col - 1) as usize)
        })
        .sum()
}

/// Outcome of a local search around one prior index.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub best: TrajectoryScore,
    /// Number of trajectory scores computed.
    pub candidates: u64,
}

/// Scans end indices in `[prev - shift, prev + shift]` and every velocity
/// of `sweep`, returning the minimum score. Lines leaving the grid are
/// skipped. Ties go to the smallest index, then the smallest velocity.
pub fn evaluate_grid<G: CostGrid + ?Sized>(
    grid: &G,
    prev: usize,
    shift: usize,
    sweep: &VelocitySweep,
) -> Result<Evaluation> {
    evaluate_scored(grid.rows(), grid.cols(), prev, shift, sweep, |end, v| line_sum(grid, end, v))
}

/// Feasible `(end, velocity)` pairs of the search window around `prev`, in
/// tie-break order.
pub fn window_candidates(
    rows: usize,
    cols: usize,
    prev: usize,
    shift: usize,
    sweep: &VelocitySweep,
) -> impl Iterator<Item = (usize, Velocity)> + '_ {
    let lo = prev.saturating_sub(shift).max(1);
    let hi = prev.saturating_add(shift).min(cols);
    (lo..=hi).flat_map(move |end| {
        sweep
            .velocities()
            .iter()
            .filter(move |&&v| rows > 0 && line_fits(rows, cols, end, v))
            .map(move |&v| (end, v))
    })
}

/// [`evaluate_grid`] with the trajectory score supplied by `score`, e.g.
/// from a cache.
pub fn evaluate_scored(
    rows: usize,
    cols: usize,
    prev: usize,
    shift: usize,
    sweep: &VelocitySweep,
    mut score: impl FnMut(usize, Velocity) -> f64,
) -> Result<Evaluation> {
    if rows == 0 {
        return Err(Error::Empty("testing sequence"));
    }
    let mut best: Option<TrajectoryScore> = None;
    let mut candidates = 0;
    for (end, v) in window_candidates(rows, cols, prev, shift, sweep) {
        let s = score(end, v);
        candidates += 1;
        if best.is_none_or(|b| s < b.score) {
            best = Some(TrajectoryScore {
                end_index: end,
                velocity: v,
                score: s,
            });
        }
    }
    best.map(|best| Evaluation { best, candidates })
        .ok_or(Error::EvaluationInfeasible { prev, shift })
}

/// Builds the difference matrix of `test` against `reference_window` and
/// runs [`evaluate_grid`] on it. `prev` is a 1-based column of the window.
pub fn evaluate(
    reference_window: &[Descriptor],
    test: &[Descriptor],
    prev: usize,
    shift: usize,
    sweep: &VelocitySweep,
) -> Result<Evaluation> {
    let d = DifferenceMatrix::build(test, reference_window)?;
    evaluate_grid(&d, prev, shift, sweep)
}

#[derive(Debug, Clone, Default)]
pub struct BaselineOptions {
    pub sweep: VelocitySweep,
    /// Row-wise local contrast enhancement radius; `None` disables it.
    pub contrast_radius: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaselineResult {
    pub best: TrajectoryScore,
    /// Number of trajectory scores computed.
    pub evaluations: u64,
}

/// Exhaustive sequence matching over every feasible end index and velocity.
pub fn seqslam_baseline(reference: &[Descriptor], test: &[Descriptor]) -> Result<BaselineResult> {
    seqslam_baseline_with(reference, test, &BaselineOptions::default())
}

pub fn seqslam_baseline_with(
    reference: &[Descriptor],
    test: &[Descriptor],
    opts: &BaselineOptions,
) -> Result<BaselineResult> {
    if test.len() > reference.len() {
        return Err(Error::Input(format!(
            "testing sequence ({}) is longer than the reference ({})",
            test.len(),
            reference.len()
        )));
    }
    let mut d = DifferenceMatrix::build(test, reference)?;
    if let Some(radius) = opts.contrast_radius {
        d = d.enhance_contrast(radius);
    }
    let cols = d.cols();
    let eval = evaluate_grid(&d, cols.div_ceil(2), cols, &opts.sweep)?;
    Ok(BaselineResult {
        best: eval.best,
        evaluations: eval.candidates,
    })
}
