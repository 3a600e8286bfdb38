//! Coarse-to-fine level schedule. Level `i` of `l_max` keeps every
//! `2^(l_max - i)`-th frame, so the last level is full resolution.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sequence::FrameSequence;

pub const DEFAULT_MIN_TEST_LEN: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Level {
    /// 1-based level number; 1 is the coarsest.
    pub level: usize,
    pub interval: usize,
    pub ref_len: usize,
    pub test_len: usize,
}

impl Level {
    /// Smallest end index at which a full-length unit-velocity line fits.
    pub fn min_index(&self) -> usize {
        self.test_len
    }

    pub fn max_index(&self) -> usize {
        self.ref_len
    }

    /// 0-based full-resolution positions kept at this level.
    pub fn positions(&self, full_len: usize) -> impl Iterator<Item = usize> + Clone {
        (0..full_len).step_by(self.interval)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelSchedule {
    l_max: usize,
    levels: Vec<Level>,
}

impl LevelSchedule {
    pub fn build(ref_len: usize, test_len: usize, l_max: usize, min_test_len: usize) -> Result<Self> {
        if l_max == 0 {
            return Err(Error::Config("l_max must be at least 1".into()));
        }
        if l_max > 16 {
            return Err(Error::Config(format!("l_max {l_max} is unreasonably deep")));
        }
        if test_len == 0 {
            return Err(Error::Empty("testing sequence"));
        }
        if test_len > ref_len {
            return Err(Error::Input(format!(
                "testing sequence ({test_len}) is longer than the reference ({ref_len})"
            )));
        }
        let levels: Vec<Level> = (1..=l_max)
            .map(|level| {
                let interval = 1usize << (l_max - level);
                Level {
                    level,
                    interval,
                    ref_len: ref_len.div_ceil(interval),
                    test_len: test_len.div_ceil(interval),
                }
            })
            .collect();
        let coarsest = levels[0];
        if coarsest.test_len < min_test_len {
            return Err(Error::ScheduleInfeasible {
                level: coarsest.level,
                test_len: coarsest.test_len,
                minimum: min_test_len,
            });
        }
        Ok(Self { l_max, levels })
    }

    pub fn l_max(&self) -> usize {
        self.l_max
    }

    /// Initial skip interval.
    pub fn s0(&self) -> usize {
        self.levels[0].interval
    }

    pub fn levels(&self) -> &[Level] {
        &self.levels
    }

    /// 1-based level lookup.
    pub fn level(&self, level: usize) -> &Level {
        &self.levels[level - 1]
    }

    pub fn total_test_frames(&self) -> usize {
        self.levels.iter().map(|l| l.test_len).sum()
    }

    /// Maps an end index from `from` to the next finer level, clamped to the
    /// finer level's index bounds.
    pub fn promote_index(&self, index: usize, from: usize, to: usize) -> usize {
        assert!(to == from + 1 && to <= self.l_max, "promotion must go one level finer");
        let ratio = self.level(from).interval / self.level(to).interval;
        let next = self.level(to);
        (index * ratio).clamp(next.min_index(), next.max_index())
    }

    /// Inverse of [`promote_index`](Self::promote_index) for unclamped indices.
    pub fn demote_index(&self, index: usize, from: usize, to: usize) -> usize {
        assert!(from == to + 1 && to >= 1, "demotion must go one level coarser");
        index / (self.level(to).interval / self.level(from).interval)
    }
}

pub fn downsample<T: Clone>(seq: &FrameSequence<T>, interval: usize) -> FrameSequence<T> {
    seq.downsample(interval)
}
