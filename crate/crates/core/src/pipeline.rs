//! Coarse-to-fine particle search over a reference sequence.
//!
//! Each level decimates both sequences, lets the particle population
//! iterate (local search, weight update, resampling) until map coverage
//! collapses, then carries the better half of the population to the next
//! finer level. Descriptor distances are computed lazily into one
//! full-resolution cache shared by every level, since coarse frames are a
//! subset of the full-resolution frames.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::descriptor::{l1, Descriptor};
use crate::error::{Error, Result};
use crate::particle::{
    initial_particle_count, CoverageSet, ParticleSet, ScoreScale,
};
use crate::pyramid::{Level, LevelSchedule, DEFAULT_MIN_TEST_LEN};
use crate::seqmatch::{
    evaluate_scored, line_sum, window_candidates, CostGrid, Evaluation, Velocity, VelocitySweep,
};

/// Half-width of the local index search inside one particle evaluation.
///
/// The default keeps per-particle cost independent of the testing length:
/// a radius of 2 is the smallest that still recovers the index rounding
/// lost when promoting to a finer level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum IdShiftPolicy {
    /// `ceil(L / 2)` at every level, `L` being the level's testing length.
    HalfTest,
    Fixed { shift: usize },
}

impl Default for IdShiftPolicy {
    fn default() -> Self {
        IdShiftPolicy::Fixed { shift: 2 }
    }
}

impl IdShiftPolicy {
    pub fn shift(&self, level: &Level) -> usize {
        match *self {
            IdShiftPolicy::HalfTest => level.test_len.div_ceil(2),
            IdShiftPolicy::Fixed { shift } => shift,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ScoreScalePolicy {
    /// Median-centered, scaled by the interquartile range of the
    /// iteration's scores.
    #[default]
    InterQuartile,
    /// Median-centered with a constant scale.
    Fixed { scale: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub l_max: usize,
    pub tau: f64,
    pub id_shift: IdShiftPolicy,
    /// Resample when `N_eff < resample_fraction * particle count`.
    pub resample_fraction: f64,
    /// Advance to the next level when the coverage rate drops below this.
    pub coverage_threshold: f64,
    pub velocities: VelocitySweep,
    pub score_scale: ScoreScalePolicy,
    pub coverage_set: CoverageSet,
    pub iteration_cap: usize,
    pub min_test_len: usize,
    pub seed: u64,
    /// Worker threads; 0 uses every available core. Results do not depend
    /// on it, so it is left out of serialized reports.
    #[serde(skip_serializing)]
    pub workers: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self::with_seed(0)
    }
}

impl PipelineConfig {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            l_max: 3,
            tau: 2.0,
            id_shift: IdShiftPolicy::default(),
            resample_fraction: 0.5,
            coverage_threshold: 0.5,
            velocities: VelocitySweep::default(),
            score_scale: ScoreScalePolicy::default(),
            coverage_set: CoverageSet::All,
            iteration_cap: 8,
            min_test_len: DEFAULT_MIN_TEST_LEN,
            seed,
            workers: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.l_max == 0 {
            return bad("l_max must be at least 1".into());
        }
        if !(self.tau.is_finite() && self.tau > 0.0) {
            return bad(format!("tau must be positive, got {}", self.tau));
        }
        if !(0.0..=1.0).contains(&self.resample_fraction) {
            return bad(format!("resample_fraction {} outside [0, 1]", self.resample_fraction));
        }
        if !(self.coverage_threshold > 0.0 && self.coverage_threshold <= 1.0) {
            return bad(format!("coverage_threshold {} outside (0, 1]", self.coverage_threshold));
        }
        if self.iteration_cap == 0 {
            return bad("iteration_cap must be at least 1".into());
        }
        if self.min_test_len == 0 {
            return bad("min_test_len must be at least 1".into());
        }
        if let ScoreScalePolicy::Fixed { scale } = self.score_scale {
            if !(scale.is_finite() && scale > 0.0) {
                return bad(format!("score scale must be positive, got {scale}"));
            }
        }
        Ok(())
    }

    pub(crate) fn thread_pool(&self) -> Result<rayon::ThreadPool> {
        rayon::ThreadPoolBuilder::new()
            .num_threads(self.workers)
            .build()
            .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedParticle {
    /// 1-based full-resolution end index.
    pub index: usize,
    pub weight: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LevelTrace {
    pub level: usize,
    pub interval: usize,
    pub test_len: usize,
    pub ref_len: usize,
    pub shift: usize,
    pub particles: usize,
    pub iterations: usize,
    pub n_eff: Vec<f64>,
    pub coverage: Vec<usize>,
    pub coverage_rate: Vec<f64>,
    pub resampled: Vec<bool>,
    /// Trajectory scores computed at this level.
    pub evaluations: u64,
    /// Per-particle evaluations requested, including repeats served from
    /// the per-level memo.
    pub particle_evaluations: u64,
    pub distance_computations: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchResult {
    /// 1-based full-resolution end index of the best trajectory.
    pub best_index: usize,
    pub best_score: f64,
    pub best_velocity: Velocity,
    pub ranked_particles: Vec<RankedParticle>,
    pub levels: Vec<LevelTrace>,
    /// Trajectory scores computed by the closing evaluation pass.
    pub final_evaluations: u64,
}

impl MatchResult {
    pub fn evaluations(&self) -> u64 {
        evaluations_counter(self)
    }

    pub fn distance_computations(&self) -> u64 {
        self.levels.iter().map(|l| l.distance_computations).sum()
    }
}

/// Total trajectory-score invocations of a completed run.
pub fn evaluations_counter(result: &MatchResult) -> u64 {
    result.levels.iter().map(|l| l.evaluations).sum::<u64>() + result.final_evaluations
}

/// Analytic baseline-to-multi-resolution cost ratio
/// `(N / tau) * 2^l_max / l_max`.
pub fn predicted_speedup(test_len: usize, tau: f64, l_max: usize) -> f64 {
    (test_len as f64 / tau) * (2f64.powi(l_max as i32) / l_max as f64)
}

/// Full-resolution distance cache; `NaN` marks cells not computed yet.
struct DistanceCache<'a> {
    test: &'a [Descriptor],
    reference: &'a [Descriptor],
    values: Vec<f64>,
}

impl<'a> DistanceCache<'a> {
    fn new(test: &'a [Descriptor], reference: &'a [Descriptor]) -> Self {
        Self {
            test,
            reference,
            values: vec![f64::NAN; test.len() * reference.len()],
        }
    }

    /// Computes every missing cell on the level's rows for the given
    /// 0-based level columns. Returns the number of distances computed.
    fn fill(&mut self, level: &Level, cols: &[usize]) -> u64 {
        let m = self.reference.len();
        let (test, reference) = (self.test, self.reference);
        let s = level.interval;
        self.values
            .par_chunks_mut(m)
            .enumerate()
            .filter(|(r, _)| r % s == 0)
            .map(|(r, row)| {
                let mut computed = 0;
                for &c in cols {
                    let j = c * s;
                    if row[j].is_nan() {
                        row[j] = l1(test[r].values(), reference[j].values());
                        computed += 1;
                    }
                }
                computed
            })
            .sum()
    }

    fn view(&self, level: Level) -> LevelGrid<'_> {
        LevelGrid {
            values: &self.values,
            m: self.reference.len(),
            level,
        }
    }
}

/// One level of the cache seen as a `test_len x ref_len` grid.
struct LevelGrid<'a> {
    values: &'a [f64],
    m: usize,
    level: Level,
}

impl CostGrid for LevelGrid<'_> {
    fn rows(&self) -> usize {
        self.level.test_len
    }
    fn cols(&self) -> usize {
        self.level.ref_len
    }
    fn cost(&self, row: usize, col: usize) -> f64 {
        let s = self.level.interval;
        let v = self.values[row * s * self.m + col * s];
        debug_assert!(!v.is_nan(), "distance ({row}, {col}) not filled");
        v
    }
}

struct LevelSearch<'c, 'a> {
    cache: &'c mut DistanceCache<'a>,
    level: Level,
    shift: usize,
    sweep: &'c VelocitySweep,
    /// Trajectory scores by `(column - 1) * velocities + velocity slot`;
    /// `NaN` marks scores not computed yet.
    scores: Vec<f64>,
    memo: BTreeMap<usize, Option<Evaluation>>,
    trace: LevelTrace,
}

impl<'c, 'a> LevelSearch<'c, 'a> {
    fn new(cache: &'c mut DistanceCache<'a>, level: Level, shift: usize, sweep: &'c VelocitySweep) -> Self {
        Self {
            cache,
            level,
            shift,
            sweep,
            scores: vec![f64::NAN; level.ref_len * sweep.len()],
            memo: BTreeMap::new(),
            trace: LevelTrace {
                level: level.level,
                interval: level.interval,
                test_len: level.test_len,
                ref_len: level.ref_len,
                shift,
                ..LevelTrace::default()
            },
        }
    }

    fn slot(&self, end: usize, v: Velocity) -> usize {
        let k = self.sweep.velocities().iter().position(|&w| w == v).expect("velocity in sweep");
        (end - 1) * self.sweep.len() + k
    }

    /// Evaluates every particle at its current index, moves it to the best
    /// index found and records the score. Returns the number of trajectory
    /// scores computed; scores already known at this level are reused.
    fn evaluate_all(&mut self, set: &mut ParticleSet) -> u64 {
        let (rows, cols) = (self.level.test_len, self.level.ref_len);
        let mut pending: Vec<usize> = set
            .particles()
            .iter()
            .map(|p| p.index)
            .filter(|i| !self.memo.contains_key(i))
            .collect();
        pending.sort_unstable();
        pending.dedup();

        let mut missing: Vec<(usize, Velocity)> = pending
            .iter()
            .flat_map(|&idx| window_candidates(rows, cols, idx, self.shift, self.sweep))
            .filter(|&(end, v)| self.scores[self.slot(end, v)].is_nan())
            .collect();
        missing.sort_unstable();
        missing.dedup();

        if !missing.is_empty() {
            let mut ends: Vec<usize> = missing.iter().map(|&(end, _)| end).collect();
            ends.dedup();
            let cols = self.needed_columns(&ends);
            self.trace.distance_computations += self.cache.fill(&self.level, &cols);
            let grid = self.cache.view(self.level);
            let fresh: Vec<f64> = missing.par_iter().map(|&(end, v)| line_sum(&grid, end, v)).collect();
            for (&(end, v), score) in missing.iter().zip(fresh) {
                let slot = self.slot(end, v);
                self.scores[slot] = score;
            }
        }
        for idx in pending {
            let res = evaluate_scored(rows, cols, idx, self.shift, self.sweep, |end, v| self.scores[self.slot(end, v)]).ok();
            self.memo.insert(idx, res);
        }
        for p in set.particles_mut() {
            match self.memo[&p.index] {
                Some(e) => {
                    p.index = e.best.end_index;
                    p.score = e.best.score;
                }
                None => p.score = f64::INFINITY,
            }
        }
        self.trace.particle_evaluations += set.len() as u64;
        missing.len() as u64
    }

    /// 0-based level columns read by lines ending at the given 1-based ends.
    fn needed_columns(&self, ends: &[usize]) -> Vec<usize> {
        let cols = self.level.ref_len;
        let reach = (-self.sweep.max().step_back(0, self.level.test_len - 1)) as usize + 1;
        let mut mask = vec![false; cols];
        for &end in ends {
            let lo = end.saturating_sub(reach).max(1);
            mask[lo - 1..end].iter_mut().for_each(|m| *m = true);
        }
        mask.iter()
            .enumerate()
            .filter_map(|(c, &m)| m.then_some(c))
            .collect()
    }
}

fn apply_scores(set: &mut ParticleSet, policy: ScoreScalePolicy) {
    let scores: Vec<f64> = set.particles().iter().map(|p| p.score).collect();
    let mut scale = ScoreScale::from_scores(&scores);
    if let ScoreScalePolicy::Fixed { scale: s } = policy {
        scale.scale = s;
    }
    for p in set.particles_mut() {
        p.weight *= scale.multiplier(p.score);
    }
    if set.normalize().is_err() {
        log::debug!("degenerate particle weights; resetting to uniform");
        set.reset_uniform();
    }
}

/// Runs the multi-resolution particle search of `test` inside `reference`.
pub fn run_mrs(reference: &[Descriptor], test: &[Descriptor], cfg: &PipelineConfig) -> Result<MatchResult> {
    cfg.validate()?;
    if test.is_empty() {
        return Err(Error::Empty("testing sequence"));
    }
    if reference.is_empty() {
        return Err(Error::Empty("reference sequence"));
    }
    if test.len() > reference.len() {
        return Err(Error::Input(format!(
            "testing sequence ({}) is longer than the reference ({})",
            test.len(),
            reference.len()
        )));
    }
    let dim = test[0].len();
    if let Some(bad) = test.iter().chain(reference).find(|d| d.len() != dim) {
        return Err(Error::LengthMismatch {
            expected: dim,
            actual: bad.len(),
        });
    }
    let schedule = LevelSchedule::build(reference.len(), test.len(), cfg.l_max, cfg.min_test_len)?;
    let pool = cfg.thread_pool()?;
    pool.install(|| search(reference, test, cfg, &schedule))
}

fn search(
    reference: &[Descriptor],
    test: &[Descriptor],
    cfg: &PipelineConfig,
    schedule: &LevelSchedule,
) -> Result<MatchResult> {
    let p_init = initial_particle_count(reference.len(), test.len(), cfg.tau)?;
    let coarsest = schedule.level(1);
    let count = p_init.min(coarsest.ref_len - coarsest.min_index() + 1);
    let mut set = ParticleSet::init_uniform(count, coarsest.ref_len, coarsest.min_index(), cfg.seed)?;
    let mut cache = DistanceCache::new(test, reference);
    let mut traces = Vec::with_capacity(schedule.l_max());
    let mut final_evaluations = 0;
    let mut best_velocity = None;

    for level in schedule.levels().iter().copied() {
        if level.level > 1 {
            let keep = p_init.div_ceil(1 << (level.level - 1)).max(1);
            let from = level.level - 1;
            set.carry_forward(keep, |i| schedule.promote_index(i, from, level.level))?;
        }
        let mut search = LevelSearch::new(&mut cache, level, cfg.id_shift.shift(&level), &cfg.velocities);
        search.trace.particles = set.len();
        let jitter = level.test_len.div_ceil(4);
        let mut previous_span = None;
        loop {
            search.trace.iterations += 1;
            search.trace.evaluations += search.evaluate_all(&mut set);
            apply_scores(&mut set, cfg.score_scale);
            let n_eff = set.effectiveness()?;
            let resample = n_eff < cfg.resample_fraction * set.len() as f64;
            if resample {
                set.resample(jitter, level.min_index(), level.max_index());
            }
            let span = set.coverage_span(level.test_len, level.ref_len, cfg.coverage_set);
            let rate = crate::particle::coverage_rate(span, previous_span);
            search.trace.n_eff.push(n_eff);
            search.trace.resampled.push(resample);
            search.trace.coverage.push(span);
            search.trace.coverage_rate.push(rate);
            if rate < cfg.coverage_threshold || search.trace.iterations >= cfg.iteration_cap {
                break;
            }
            previous_span = Some(span.max(1));
        }
        if level.level == schedule.l_max() {
            // closing pass: every particle is evaluated at its final index
            final_evaluations = search.evaluate_all(&mut set);
            apply_scores(&mut set, cfg.score_scale);
            let best = &set.ranked()[0];
            best_velocity = search
                .memo
                .values()
                .flatten()
                .find(|e| e.best.end_index == best.index && e.best.score == best.score)
                .map(|e| e.best.velocity);
        }
        log::debug!(
            "level {} (s={}): {} particles, {} iterations, {} scores",
            level.level,
            level.interval,
            search.trace.particles,
            search.trace.iterations,
            search.trace.evaluations
        );
        traces.push(search.trace);
    }

    let ranked = set.ranked();
    let best = &ranked[0];
    let best_velocity = match best_velocity {
        Some(v) if best.score.is_finite() => v,
        _ => {
            return Err(Error::EvaluationInfeasible {
                prev: best.index,
                shift: cfg.id_shift.shift(schedule.level(schedule.l_max())),
            })
        }
    };
    Ok(MatchResult {
        best_index: best.index,
        best_score: best.score,
        best_velocity,
        ranked_particles: ranked
            .iter()
            .map(|p| RankedParticle {
                index: p.index,
                weight: p.weight,
            })
            .collect(),
        levels: traces,
        final_evaluations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::{generate, SyntheticSpec};
    use crate::seqmatch::seqslam_baseline;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_seq(len: usize, dim: usize, seed: u64) -> Vec<Descriptor> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..len)
            .map(|_| Descriptor::new((0..dim).map(|_| rng.random::<f64>()).collect()).unwrap())
            .collect()
    }

    /// Smooth reference trajectory.
    fn walk(len: usize, dim: usize, seed: u64) -> Vec<Descriptor> {
        let spec = SyntheticSpec { ref_len: len, test_len: 1, dim, seed, ..Default::default() };
        generate(&spec).unwrap().reference
    }

    #[test]
    fn exact_embedding_found() {
        let reference = walk(512, 64, 1);
        for end in [64, 200, 511, 512] {
            let test = reference[end - 64..end].to_vec();
            let r = run_mrs(&reference, &test, &PipelineConfig::with_seed(end as u64)).unwrap();
            assert_eq!(r.best_index, end);
            assert_eq!(r.best_score, 0.0);
            assert_eq!(r.best_velocity, Velocity::UNIT);
        }
    }

    #[test]
    fn input_errors() {
        let reference = random_seq(100, 8, 2);
        let cfg = PipelineConfig::with_seed(0);
        assert!(matches!(run_mrs(&reference[..40], &reference, &cfg), Err(Error::Input(_))));
        assert!(matches!(run_mrs(&reference, &[], &cfg), Err(Error::Empty(_))));
        let short = vec![Descriptor::new(vec![0.0; 3]).unwrap(); 64];
        assert!(matches!(
            run_mrs(&reference, &short, &cfg),
            Err(Error::LengthMismatch { expected: 3, actual: 8 })
        ));
        let deep = PipelineConfig { l_max: 4, ..cfg.clone() };
        assert!(matches!(
            run_mrs(&reference, &reference[..64], &deep),
            Err(Error::ScheduleInfeasible { test_len: 8, .. })
        ));
        let bad = PipelineConfig { tau: 0.0, ..cfg };
        assert!(matches!(run_mrs(&reference, &reference[..64], &bad), Err(Error::Config(_))));
    }

    #[test]
    fn particle_count_halves_per_level() {
        let reference = walk(3000, 16, 3);
        let test = reference[1000..1100].to_vec();
        let r = run_mrs(&reference, &test, &PipelineConfig::with_seed(4)).unwrap();
        // 3000 / 100 * 2 = 60 initial particles
        let counts: Vec<usize> = r.levels.iter().map(|l| l.particles).collect();
        assert_eq!(counts, vec![60, 30, 15]);
        assert_eq!(r.ranked_particles.len(), 15);
        assert_eq!(r.best_index, 1100);
    }

    #[test]
    fn level_costs_are_bounded() {
        let reference = random_seq(2000, 16, 5);
        let test = reference[700..800].to_vec();
        let cfg = PipelineConfig::with_seed(6);
        let r = run_mrs(&reference, &test, &cfg).unwrap();
        let k = cfg.velocities.len() as u64;
        for l in &r.levels {
            let window = 2 * l.shift as u64 + 1;
            assert!(l.evaluations <= l.particle_evaluations * window * k);
            assert!(l.evaluations <= l.ref_len as u64 * k);
            assert!(l.distance_computations <= (l.test_len * l.ref_len) as u64);
            assert!(l.iterations >= 1 && l.iterations <= cfg.iteration_cap);
            assert_eq!(l.n_eff.len(), l.iterations);
        }
    }

    #[test]
    fn single_wide_particle_matches_baseline() {
        // one particle whose window spans the whole reference sees every
        // candidate the exhaustive search sees
        for seed in 0..5 {
            let reference = random_seq(300, 12, 10 + seed);
            let test = random_seq(40, 12, 20 + seed);
            let cfg = PipelineConfig {
                l_max: 1,
                tau: 0.1,
                id_shift: IdShiftPolicy::Fixed { shift: 300 },
                ..PipelineConfig::with_seed(seed)
            };
            let r = run_mrs(&reference, &test, &cfg).unwrap();
            let b = seqslam_baseline(&reference, &test).unwrap();
            assert_eq!(r.levels[0].particles, 1);
            assert_eq!((r.best_index, r.best_velocity), (b.best.end_index, b.best.velocity));
            assert!((r.best_score - b.best.score).abs() < 1e-9);
            assert_eq!(r.levels[0].evaluations, b.evaluations);
        }
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let reference = random_seq(1500, 24, 7);
        let mut test = reference[900..980].to_vec();
        test.reverse(); // no exact match, so the search has to discriminate
        let base = PipelineConfig::with_seed(11);
        let one = run_mrs(&reference, &test, &base).unwrap();
        for workers in [2, 4, 0] {
            let cfg = PipelineConfig { workers, ..base.clone() };
            assert_eq!(run_mrs(&reference, &test, &cfg).unwrap(), one);
        }
        assert_eq!(run_mrs(&reference, &test, &base).unwrap(), one);
    }

    #[test]
    fn half_test_policy_scales_with_level() {
        let level = Level { level: 2, interval: 2, ref_len: 500, test_len: 49 };
        assert_eq!(IdShiftPolicy::HalfTest.shift(&level), 25);
        assert_eq!(IdShiftPolicy::default().shift(&level), 2);
    }

    #[test]
    fn speedup_worked_values() {
        assert_eq!(predicted_speedup(300, 2.0, 3), 400.0);
        assert!((predicted_speedup(1, 2.0, 3) - 4.0 / 3.0).abs() < 1e-12);
        assert_eq!(predicted_speedup(77, 77.0, 1), 2.0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]

        /// With at least two levels and tau at most N/2 the search computes
        /// fewer trajectory scores than the exhaustive baseline.
        #[test]
        fn cheaper_than_exhaustive(seed in 0u64..1000, l_max in 2usize..4, tau in 0.5f64..4.0, end in 100usize..1200) {
            let reference = random_seq(1200, 8, seed);
            let test = reference[end - 64..end].to_vec();
            let cfg = PipelineConfig { l_max, tau, ..PipelineConfig::with_seed(seed) };
            let r = run_mrs(&reference, &test, &cfg).unwrap();
            let b = seqslam_baseline(&reference, &test).unwrap();
            prop_assert!(r.evaluations() < b.evaluations);
            prop_assert!(r.distance_computations() < (reference.len() * test.len()) as u64);
        }
    }
}
