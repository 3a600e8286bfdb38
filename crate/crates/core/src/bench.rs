//! Synthetic trajectories with ground truth, precision-recall evaluation and
//! the baseline-versus-multi-resolution comparison harness.

use std::time::Instant;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::descriptor::Descriptor;
use crate::error::{Error, Result};
use crate::pipeline::{predicted_speedup, run_mrs, MatchResult, PipelineConfig};
use crate::pyramid::LevelSchedule;
use crate::seqmatch::{seqslam_baseline_with, BaselineOptions, BaselineResult, Velocity};

/// Parameters of one synthetic reference/testing pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyntheticSpec {
    pub ref_len: usize,
    pub test_len: usize,
    /// 1-based reference index of the last testing frame; drawn from the
    /// seed when absent.
    pub embed_end: Option<usize>,
    /// Half-width of the additive uniform noise on testing descriptors.
    pub noise: f64,
    /// Fraction of descriptor elements shuffled within each testing frame.
    pub viewpoint_jitter: f64,
    /// Testing-to-reference speed ratio.
    pub warp: f64,
    pub dim: usize,
    /// Per-element step length of the reference walk.
    pub step: f64,
    /// Autocorrelation of the walk direction.
    pub momentum: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            ref_len: 3000,
            test_len: 100,
            embed_end: None,
            noise: 0.0,
            viewpoint_jitter: 0.0,
            warp: 1.0,
            dim: 768,
            step: 0.06,
            momentum: 0.95,
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.test_len == 0 || self.dim == 0 {
            return bad("test_len and dim must be positive".into());
        }
        if self.test_len > self.ref_len {
            return bad(format!("test_len {} exceeds ref_len {}", self.test_len, self.ref_len));
        }
        if !(0.8..=1.2).contains(&self.warp) {
            return bad(format!("warp {} outside [0.8, 1.2]", self.warp));
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return bad(format!("noise {} must be non-negative", self.noise));
        }
        if !(0.0..=1.0).contains(&self.viewpoint_jitter) {
            return bad(format!("viewpoint_jitter {} outside [0, 1]", self.viewpoint_jitter));
        }
        if !(self.step > 0.0 && self.step < 0.5) {
            return bad(format!("step {} outside (0, 0.5)", self.step));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad(format!("momentum {} outside [0, 1)", self.momentum));
        }
        Ok(())
    }

    fn warp_velocity(&self) -> Result<Velocity> {
        Velocity::from_ratio(self.warp)
    }

    /// Smallest end index whose warped window still fits.
    pub fn min_embed_end(&self) -> Result<usize> {
        let back = self.warp_velocity()?.step_back(1, self.test_len - 1);
        Ok((2 - back) as usize)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    /// 1-based reference index matched by the last testing frame.
    pub end_index: usize,
    pub start_index: usize,
    pub warp: f64,
    /// 1-based reference frame copied into each testing frame.
    pub source_indices: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct SyntheticData {
    pub reference: Vec<Descriptor>,
    pub test: Vec<Descriptor>,
    pub truth: GroundTruth,
}

/// Reference: a reflected random walk in `[0, 1]^dim` whose direction
/// evolves as an AR(1) process, so nearby frames are similar and distant
/// ones are not. Testing: a speed-warped, noise-perturbed copy of one
/// window of the reference.
pub fn generate(spec: &SyntheticSpec) -> Result<SyntheticData> {
    spec.validate()?;
    let warp = spec.warp_velocity()?;
    let n = spec.test_len;
    let min_end = spec.min_embed_end()?;
    if min_end > spec.ref_len {
        return Err(Error::Input(format!(
            "a warped window of {n} frames does not fit in {} reference frames",
            spec.ref_len
        )));
    }

    let mut walk_rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut test_rng = ChaCha8Rng::seed_from_u64(spec.seed ^ 0x9e37_79b9_7f4a_7c15);

    let end = match spec.embed_end {
        Some(e) if (min_end..=spec.ref_len).contains(&e) => e,
        Some(e) => {
            return Err(Error::Input(format!(
                "embed_end {e} outside the feasible range [{min_end}, {}]",
                spec.ref_len
            )))
        }
        None => test_rng.random_range(min_end..=spec.ref_len),
    };

    let reference = reflected_walk(spec, &mut walk_rng);

    let source_indices: Vec<usize> = (0..n)
        .map(|k| warp.step_back(end as i64, n - 1 - k) as usize)
        .collect();
    let jitter_count = (spec.viewpoint_jitter * spec.dim as f64).round() as usize;
    let test = source_indices
        .iter()
        .map(|&src| {
            let mut v = reference[src - 1].values().to_vec();
            if spec.noise > 0.0 {
                for x in &mut v {
                    *x = (*x + test_rng.random_range(-spec.noise..=spec.noise)).clamp(0.0, 1.0);
                }
            }
            if jitter_count > 1 {
                let picked = sample(&mut test_rng, spec.dim, jitter_count).into_vec();
                let mut values: Vec<f64> = picked.iter().map(|&i| v[i]).collect();
                // Fisher-Yates over the picked slots
                for i in (1..values.len()).rev() {
                    let j = test_rng.random_range(0..=i);
                    values.swap(i, j);
                }
                for (&i, x) in picked.iter().zip(values) {
                    v[i] = x;
                }
            }
            Descriptor::new(v)
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(SyntheticData {
        reference,
        test,
        truth: GroundTruth {
            end_index: end,
            start_index: source_indices[0],
            warp: warp.ratio(),
            source_indices,
        },
    })
}

fn reflected_walk(spec: &SyntheticSpec, rng: &mut ChaCha8Rng) -> Vec<Descriptor> {
    let rho = spec.momentum;
    let innovation = (1.0 - rho * rho).sqrt();
    let mut x: Vec<f64> = (0..spec.dim).map(|_| rng.random::<f64>()).collect();
    let mut dir: Vec<f64> = (0..spec.dim).map(|_| StandardNormal.sample(rng)).collect();
    let mut frames = Vec::with_capacity(spec.ref_len);
    for _ in 0..spec.ref_len {
        frames.push(Descriptor::new(x.clone()).expect("walk stays finite"));
        for (xi, di) in x.iter_mut().zip(dir.iter_mut()) {
            let z: f64 = StandardNormal.sample(rng);
            *di = rho * *di + innovation * z;
            *xi += spec.step * *di;
            if *xi < 0.0 {
                *xi = -*xi;
                *di = -*di;
            } else if *xi > 1.0 {
                *xi = 2.0 - *xi;
                *di = -*di;
            }
        }
    }
    frames
}

/// One localization attempt, as consumed by [`pr_curve`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub score: f64,
    pub predicted: usize,
    pub truth: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrPoint {
    pub threshold: f64,
    pub recall: f64,
    pub precision: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrCurve {
    pub points: Vec<PrPoint>,
    pub auc: f64,
}

/// Precision-recall curve traced by thresholding the best-match score.
///
/// A trial is reported as a match when its score is at or below the
/// threshold, and is correct when its prediction lies within `tolerance`
/// frames of the truth. Recall is relative to the number of trials (every
/// testing sequence has a true match). The curve starts at recall 0 with the
/// precision of the first threshold; the area is integrated by trapezoids
/// over recall.
pub fn pr_curve(trials: &[TrialOutcome], tolerance: usize) -> Result<PrCurve> {
    if trials.is_empty() {
        return Err(Error::Empty("trial set"));
    }
    let mut order: Vec<&TrialOutcome> = trials.iter().collect();
    order.sort_by(|a, b| a.score.total_cmp(&b.score));
    let total = trials.len() as f64;
    let mut points = Vec::new();
    let (mut positives, mut correct) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let threshold = order[i].score;
        while i < order.len() && order[i].score.total_cmp(&threshold).is_eq() {
            positives += 1;
            if order[i].predicted.abs_diff(order[i].truth) <= tolerance {
                correct += 1;
            }
            i += 1;
        }
        points.push(PrPoint {
            threshold,
            recall: correct as f64 / total,
            precision: correct as f64 / positives as f64,
        });
    }
    let mut auc = 0.0;
    let mut prev = (0.0, points[0].precision);
    for p in &points {
        auc += (p.recall - prev.0) * (p.precision + prev.1) / 2.0;
        prev = (p.recall, p.precision);
    }
    Ok(PrCurve {
        points,
        auc: auc.clamp(0.0, 1.0),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MethodOutcome {
    pub index: usize,
    pub score: f64,
    pub velocity: Velocity,
    /// Absolute index error against the ground truth, when known.
    pub error: Option<usize>,
    pub evaluations: u64,
    pub distance_computations: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub mrs_seconds: f64,
    pub baseline_seconds: f64,
    pub wall_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub truth: Option<usize>,
    pub mrs: MethodOutcome,
    pub baseline: MethodOutcome,
    pub predicted_speedup: f64,
    /// Baseline trajectory scores divided by multi-resolution ones.
    pub evaluation_ratio: f64,
    #[serde(skip)]
    pub mrs_result: Option<MatchResult>,
    pub timing: Timing,
}

/// Runs the exhaustive baseline and the multi-resolution search on the same
/// input and reports both.
pub fn compare(
    reference: &[Descriptor],
    test: &[Descriptor],
    truth: Option<usize>,
    cfg: &PipelineConfig,
) -> Result<Comparison> {
    cfg.validate()?;
    let pool = cfg.thread_pool()?;
    let opts = BaselineOptions {
        sweep: cfg.velocities.clone(),
        contrast_radius: None,
    };
    let started = Instant::now();
    let base: BaselineResult = pool.install(|| seqslam_baseline_with(reference, test, &opts))?;
    let baseline_seconds = started.elapsed().as_secs_f64();

    let started = Instant::now();
    let mrs = run_mrs(reference, test, cfg)?;
    let mrs_seconds = started.elapsed().as_secs_f64();

    let err = |i: usize| truth.map(|t| i.abs_diff(t));
    let mrs_evals = mrs.evaluations();
    Ok(Comparison {
        truth,
        mrs: MethodOutcome {
            index: mrs.best_index,
            score: mrs.best_score,
            velocity: mrs.best_velocity,
            error: err(mrs.best_index),
            evaluations: mrs_evals,
            distance_computations: mrs.distance_computations(),
        },
        baseline: MethodOutcome {
            index: base.best.end_index,
            score: base.best.score,
            velocity: base.best.velocity,
            error: err(base.best.end_index),
            evaluations: base.evaluations,
            distance_computations: (reference.len() * test.len()) as u64,
        },
        predicted_speedup: predicted_speedup(test.len(), cfg.tau, cfg.l_max),
        evaluation_ratio: base.evaluations as f64 / mrs_evals.max(1) as f64,
        mrs_result: Some(mrs),
        timing: Timing {
            mrs_seconds,
            baseline_seconds,
            wall_ratio: baseline_seconds / mrs_seconds.max(1e-12),
        },
    })
}

/// A family of synthetic trials: trial `k` uses seed `seed + k` for both the
/// data and the particle filter, and warp `warps[k % warps.len()]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchPlan {
    pub spec: SyntheticSpec,
    pub pipeline: PipelineConfig,
    pub warps: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    /// Frames of slack for a correct match in the precision-recall curve.
    pub match_tolerance: usize,
    /// Frames of slack counted as a successful localization.
    pub accuracy_tolerance: usize,
}

impl BenchPlan {
    pub fn new(spec: SyntheticSpec, pipeline: PipelineConfig, trials: usize, seed: u64) -> Self {
        Self {
            warps: vec![spec.warp],
            spec,
            pipeline,
            trials,
            seed,
            match_tolerance: 3,
            accuracy_tolerance: 2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if self.warps.is_empty() {
            return Err(Error::Config("warps must not be empty".into()));
        }
        self.pipeline.validate()?;
        for &w in &self.warps {
            SyntheticSpec { warp: w, ..self.spec.clone() }.validate()?;
        }
        Ok(())
    }

    pub fn trial_spec(&self, trial: usize) -> SyntheticSpec {
        SyntheticSpec {
            warp: self.warps[trial % self.warps.len()],
            seed: self.seed + trial as u64,
            ..self.spec.clone()
        }
    }

    pub fn trial_pipeline(&self, trial: usize) -> PipelineConfig {
        PipelineConfig {
            seed: self.seed + trial as u64,
            ..self.pipeline.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub seed: u64,
    pub warp: f64,
    pub truth: usize,
    pub mrs_index: usize,
    pub mrs_error: usize,
    pub mrs_score: f64,
    pub mrs_evaluations: u64,
    pub mrs_distances: u64,
    pub baseline_index: usize,
    pub baseline_error: usize,
    pub baseline_score: f64,
    pub baseline_evaluations: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub success_rate: f64,
    pub median_error: f64,
    pub q1_error: f64,
    pub q3_error: f64,
    pub auc: f64,
    pub evaluations: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub plan: BenchPlan,
    pub trials: Vec<TrialRecord>,
    pub mrs: MethodSummary,
    pub baseline: MethodSummary,
    pub predicted_speedup: f64,
    pub evaluation_ratio: f64,
    pub mrs_pr: Vec<PrPoint>,
    pub baseline_pr: Vec<PrPoint>,
    /// Excluded from the serialized report so repeated runs compare equal.
    #[serde(skip)]
    pub timing: Timing,
}

/// Linear-interpolated quantile of an ascending slice.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = p * (sorted.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

fn summarize(errors: &[usize], outcomes: &[TrialOutcome], evaluations: u64, plan: &BenchPlan) -> Result<(MethodSummary, Vec<PrPoint>)> {
    let mut e: Vec<f64> = errors.iter().map(|&x| x as f64).collect();
    e.sort_by(f64::total_cmp);
    let pr = pr_curve(outcomes, plan.match_tolerance)?;
    let ok = errors.iter().filter(|&&x| x <= plan.accuracy_tolerance).count();
    Ok((
        MethodSummary {
            success_rate: ok as f64 / errors.len() as f64,
            median_error: quantile(&e, 0.5),
            q1_error: quantile(&e, 0.25),
            q3_error: quantile(&e, 0.75),
            auc: pr.auc,
            evaluations,
        },
        pr.points,
    ))
}

/// Generates every trial of `plan`, runs [`compare`] on each in trial order
/// and aggregates the results.
pub fn run_bench(plan: &BenchPlan) -> Result<EvalReport> {
    plan.validate()?;
    let mut trials = Vec::with_capacity(plan.trials);
    let (mut mrs_time, mut base_time) = (0.0, 0.0);
    for k in 0..plan.trials {
        let spec = plan.trial_spec(k);
        let data = generate(&spec)?;
        let cmp = compare(&data.reference, &data.test, Some(data.truth.end_index), &plan.trial_pipeline(k))?;
        mrs_time += cmp.timing.mrs_seconds;
        base_time += cmp.timing.baseline_seconds;
        trials.push(TrialRecord {
            trial: k,
            seed: spec.seed,
            warp: spec.warp,
            truth: data.truth.end_index,
            mrs_index: cmp.mrs.index,
            mrs_error: cmp.mrs.error.unwrap_or_default(),
            mrs_score: cmp.mrs.score,
            mrs_evaluations: cmp.mrs.evaluations,
            mrs_distances: cmp.mrs.distance_computations,
            baseline_index: cmp.baseline.index,
            baseline_error: cmp.baseline.error.unwrap_or_default(),
            baseline_score: cmp.baseline.score,
            baseline_evaluations: cmp.baseline.evaluations,
        });
    }
    let outcomes = |pick: fn(&TrialRecord) -> (f64, usize)| -> Vec<TrialOutcome> {
        trials
            .iter()
            .map(|t| {
                let (score, predicted) = pick(t);
                TrialOutcome { score, predicted, truth: t.truth }
            })
            .collect()
    };
    let mrs_evals: u64 = trials.iter().map(|t| t.mrs_evaluations).sum();
    let base_evals: u64 = trials.iter().map(|t| t.baseline_evaluations).sum();
    let mrs_errors: Vec<usize> = trials.iter().map(|t| t.mrs_error).collect();
    let base_errors: Vec<usize> = trials.iter().map(|t| t.baseline_error).collect();
    let (mrs, mrs_pr) = summarize(&mrs_errors, &outcomes(|t| (t.mrs_score, t.mrs_index)), mrs_evals, plan)?;
    let (baseline, baseline_pr) =
        summarize(&base_errors, &outcomes(|t| (t.baseline_score, t.baseline_index)), base_evals, plan)?;
    Ok(EvalReport {
        plan: plan.clone(),
        trials,
        mrs,
        baseline,
        predicted_speedup: predicted_speedup(plan.spec.test_len, plan.pipeline.tau, plan.pipeline.l_max),
        evaluation_ratio: base_evals as f64 / mrs_evals.max(1) as f64,
        mrs_pr,
        baseline_pr,
        timing: Timing {
            mrs_seconds: mrs_time,
            baseline_seconds: base_time,
            wall_ratio: base_time / f64::max(mrs_time, 1e-12),
        },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub l_max: usize,
    pub tau: f64,
    /// `ok` or `infeasible`.
    pub status: String,
    pub message: String,
    pub trials: usize,
    pub success_rate: f64,
    pub median_error: f64,
    pub q1_error: f64,
    pub q3_error: f64,
    pub mean_evaluations: f64,
    pub predicted_speedup: f64,
    pub errors: Vec<usize>,
}

/// Multi-resolution runs over the grid `l_maxes x taus`; each cell reuses
/// the plan's trials. Schedules that cannot be built are reported as
/// infeasible rows rather than errors.
pub fn sweep(plan: &BenchPlan, l_maxes: &[usize], taus: &[f64]) -> Result<Vec<SweepRow>> {
    plan.validate()?;
    let data: Vec<SyntheticData> = (0..plan.trials)
        .map(|k| generate(&plan.trial_spec(k)))
        .collect::<Result<_>>()?;
    let mut rows = Vec::with_capacity(l_maxes.len() * taus.len());
    for &l_max in l_maxes {
        for &tau in taus {
            let mut row = SweepRow {
                l_max,
                tau,
                status: "ok".into(),
                message: String::new(),
                trials: plan.trials,
                success_rate: f64::NAN,
                median_error: f64::NAN,
                q1_error: f64::NAN,
                q3_error: f64::NAN,
                mean_evaluations: f64::NAN,
                predicted_speedup: predicted_speedup(plan.spec.test_len, tau, l_max),
                errors: Vec::new(),
            };
            let base = PipelineConfig { l_max, tau, ..plan.pipeline.clone() };
            base.validate()?;
            if let Err(e) = LevelSchedule::build(plan.spec.ref_len, plan.spec.test_len, l_max, base.min_test_len) {
                row.status = "infeasible".into();
                row.message = e.to_string();
                rows.push(row);
                continue;
            }
            let mut evals = 0u64;
            for (k, d) in data.iter().enumerate() {
                let cfg = PipelineConfig { seed: plan.seed + k as u64, ..base.clone() };
                let r = run_mrs(&d.reference, &d.test, &cfg)?;
                evals += r.evaluations();
                row.errors.push(r.best_index.abs_diff(d.truth.end_index));
            }
            let mut e: Vec<f64> = row.errors.iter().map(|&x| x as f64).collect();
            e.sort_by(f64::total_cmp);
            row.success_rate =
                row.errors.iter().filter(|&&x| x <= plan.accuracy_tolerance).count() as f64 / plan.trials as f64;
            row.median_error = quantile(&e, 0.5);
            row.q1_error = quantile(&e, 0.25);
            row.q3_error = quantile(&e, 0.75);
            row.mean_evaluations = evals as f64 / plan.trials as f64;
            rows.push(row);
        }
    }
    Ok(rows)
}
