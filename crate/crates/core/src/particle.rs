//! Particle population: uniform initialization, logistic weight update,
//! normalization, effective sample size, systematic resampling with index
//! jitter, and map coverage.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance for "weights sum to one".
pub const NORMALIZED_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Particle {
    pub id: usize,
    /// 1-based end index at the current level.
    pub index: usize,
    pub weight: f64,
    /// Score of the most recent evaluation at `index` (or of the ancestor,
    /// for fresh offspring). `INFINITY` before the first evaluation.
    pub score: f64,
}

/// `ceil((M / N) * tau)`, at least 1.
pub fn initial_particle_count(ref_len: usize, test_len: usize, tau: f64) -> Result<usize> {
    if test_len == 0 {
        return Err(Error::Empty("testing sequence"));
    }
    if test_len > ref_len {
        return Err(Error::Input(format!(
            "testing sequence ({test_len}) is longer than the reference ({ref_len})"
        )));
    }
    if !(tau.is_finite() && tau > 0.0) {
        return Err(Error::Config(format!("tau must be positive, got {tau}")));
    }
    let raw = ref_len as f64 / test_len as f64 * tau;
    // absorb representation error such as 30 * 1.1 = 33.000000000000004
    Ok(((raw - 1e-9).ceil() as usize).max(1))
}

/// Fraction of a sequence window shared with its neighbor, `(tau - 1) / tau`.
pub fn overlap_rate(tau: f64) -> f64 {
    if tau < 1.0 {
        log::warn!("tau {tau} < 1: neighboring particle windows do not overlap");
        return 0.0;
    }
    (tau - 1.0) / tau
}

fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Centering and scale applied to raw difference scores before the
/// logistic weight update.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreScale {
    pub center: f64,
    pub scale: f64,
}

impl ScoreScale {
    pub const MIN_SCALE: f64 = 1e-6;

    /// Median and interquartile range (linear-interpolated quantiles) of the
    /// finite scores.
    pub fn from_scores(scores: &[f64]) -> Self {
        let mut s: Vec<f64> = scores.iter().copied().filter(|x| x.is_finite()).collect();
        if s.is_empty() {
            return Self {
                center: 0.0,
                scale: 1.0,
            };
        }
        s.sort_by(f64::total_cmp);
        let q = |p: f64| {
            let pos = p * (s.len() - 1) as f64;
            let lo = pos.floor() as usize;
            let hi = pos.ceil() as usize;
            s[lo] + (s[hi] - s[lo]) * (pos - lo as f64)
        };
        Self {
            center: q(0.5),
            scale: (q(0.75) - q(0.25)).max(Self::MIN_SCALE),
        }
    }

    /// Weight multiplier for `score`; strictly decreasing, 0.5 at the center.
    pub fn multiplier(&self, score: f64) -> f64 {
        if score.is_nan() {
            return 0.0;
        }
        logistic(-(score - self.center) / self.scale)
    }
}

/// `prior * logistic(-(score - center) / scale)`.
pub fn update_weight(prior: f64, score: f64, scale: &ScoreScale) -> f64 {
    prior * scale.multiplier(score)
}

/// `current / previous`; the first iteration of a level has no previous
/// span and is defined as 1.
pub fn coverage_rate(current: usize, previous: Option<usize>) -> f64 {
    match previous {
        None => 1.0,
        Some(prev) => {
            assert!(prev > 0, "previous coverage must be positive");
            current as f64 / prev as f64
        }
    }
}

/// Which particles count toward map coverage.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CoverageSet {
    #[default]
    All,
    AboveMedianWeight,
}

#[derive(Debug, Clone)]
pub struct ParticleSet {
    particles: Vec<Particle>,
    rng: ChaCha8Rng,
}

impl ParticleSet {
    /// `count` particles evenly spaced over `[min_index, ref_len]` with equal
    /// weights. A single particle sits at the midpoint.
    pub fn init_uniform(count: usize, ref_len: usize, min_index: usize, seed: u64) -> Result<Self> {
        if count == 0 {
            return Err(Error::Input("particle count must be at least 1".into()));
        }
        if ref_len < count {
            return Err(Error::Input(format!(
                "reference length {ref_len} cannot hold {count} particles"
            )));
        }
        let lo = min_index.clamp(1, ref_len);
        let span = ref_len - lo;
        let w = 1.0 / count as f64;
        let particles = (0..count)
            .map(|k| {
                let index = if count == 1 {
                    lo + span.div_ceil(2)
                } else {
                    // lo + round(k * span / (count - 1)), halves up
                    lo + (2 * k * span + (count - 1)) / (2 * (count - 1))
                };
                Particle {
                    id: k,
                    index,
                    weight: w,
                    score: f64::INFINITY,
                }
            })
            .collect();
        Ok(Self {
            particles,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    pub fn from_particles(particles: Vec<Particle>, seed: u64) -> Result<Self> {
        if particles.is_empty() {
            return Err(Error::Empty("particle set"));
        }
        Ok(Self {
            particles,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    pub fn particles(&self) -> &[Particle] {
        &self.particles
    }

    pub fn particles_mut(&mut self) -> &mut [Particle] {
        &mut self.particles
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn weight_sum(&self) -> f64 {
        self.particles.iter().map(|p| p.weight).sum()
    }

    pub fn normalize(&mut self) -> Result<()> {
        let total = self.weight_sum();
        if !(total > 0.0 && total.is_finite()) {
            return Err(Error::DegeneratePopulation);
        }
        for p in &mut self.particles {
            p.weight /= total;
        }
        Ok(())
    }

    pub fn reset_uniform(&mut self) {
        let w = 1.0 / self.particles.len() as f64;
        for p in &mut self.particles {
            p.weight = w;
        }
    }

    /// Effective sample size `1 / sum(w^2)` of a normalized set.
    pub fn effectiveness(&self) -> Result<f64> {
        let total = self.weight_sum();
        if (total - 1.0).abs() > 1e-6 {
            return Err(Error::NotNormalized(total));
        }
        Ok(1.0 / self.particles.iter().map(|p| p.weight * p.weight).sum::<f64>())
    }

    /// Systematic resampling. Each offspring index is displaced by a rounded
    /// normal draw with standard deviation `sigma` and clamped to
    /// `[lo, hi]`; weights are reset to uniform and ids renumbered.
    pub fn resample(&mut self, sigma: usize, lo: usize, hi: usize) {
        let n = self.particles.len();
        let total = self.weight_sum();
        let mut cumulative = Vec::with_capacity(n);
        let mut acc = 0.0;
        for p in &self.particles {
            acc += p.weight / total;
            cumulative.push(acc);
        }
        let u: f64 = self.rng.random();
        let mut ancestor = 0;
        let mut offspring = Vec::with_capacity(n);
        for i in 0..n {
            let pos = (i as f64 + u) / n as f64;
            while ancestor + 1 < n && cumulative[ancestor] <= pos {
                ancestor += 1;
            }
            offspring.push(ancestor);
        }
        let jitter = (sigma > 0).then(|| Normal::new(0.0, sigma as f64).expect("finite sigma"));
        let w = 1.0 / n as f64;
        let next = offspring
            .into_iter()
            .enumerate()
            .map(|(id, a)| {
                let parent = &self.particles[a];
                let mut index = parent.index as i64;
                if let Some(normal) = &jitter {
                    index += normal.sample(&mut self.rng).round() as i64;
                }
                Particle {
                    id,
                    index: index.clamp(lo as i64, hi as i64) as usize,
                    weight: w,
                    score: parent.score,
                }
            })
            .collect();
        self.particles = next;
    }

    /// Length of the union of windows `[index - window, index]`, clipped to
    /// `[1, ref_len]`.
    pub fn coverage_span(&self, window: usize, ref_len: usize, which: CoverageSet) -> usize {
        let median = match which {
            CoverageSet::All => None,
            CoverageSet::AboveMedianWeight => {
                let mut w: Vec<f64> = self.particles.iter().map(|p| p.weight).collect();
                w.sort_by(f64::total_cmp);
                Some(w[(w.len() - 1) / 2])
            }
        };
        let mut spans: Vec<(usize, usize)> = self
            .particles
            .iter()
            .filter(|p| median.is_none_or(|m| p.weight >= m))
            .map(|p| (p.index.saturating_sub(window).max(1), p.index.min(ref_len)))
            .filter(|(a, b)| a <= b)
            .collect();
        spans.sort_unstable();
        let mut total = 0;
        let mut current: Option<(usize, usize)> = None;
        for (a, b) in spans {
            current = match current {
                Some((ca, cb)) if a <= cb + 1 => Some((ca, cb.max(b))),
                Some((ca, cb)) => {
                    total += cb - ca + 1;
                    Some((a, b))
                }
                None => Some((a, b)),
            };
        }
        if let Some((a, b)) = current {
            total += b - a + 1;
        }
        total
    }

    /// Particles ordered best first: weight descending, then score, index
    /// and id ascending.
    pub fn ranked(&self) -> Vec<Particle> {
        let mut out = self.particles.clone();
        out.sort_by(|a, b| {
            b.weight
                .total_cmp(&a.weight)
                .then(a.score.total_cmp(&b.score))
                .then(a.index.cmp(&b.index))
                .then(a.id.cmp(&b.id))
        });
        out
    }

    /// Keeps the `count` best-ranked particles, renumbers ids and maps
    /// indices through `remap`. Weights are renormalized, not reset.
    pub fn carry_forward(&mut self, count: usize, remap: impl Fn(usize) -> usize) -> Result<()> {
        let mut kept = self.ranked();
        kept.truncate(count.max(1));
        for (id, p) in kept.iter_mut().enumerate() {
            p.id = id;
            p.index = remap(p.index);
        }
        self.particles = kept;
        if self.normalize().is_err() {
            self.reset_uniform();
        }
        Ok(())
    }
}
