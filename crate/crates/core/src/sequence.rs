use crate::descriptor::Descriptor;
use crate::error::{Error, Result};

/// Ordered frames at one resolution level. `source[k]` is the 1-based
/// full-resolution position of `frames[k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSequence<T> {
    frames: Vec<T>,
    source: Vec<usize>,
}

impl<T> FrameSequence<T> {
    /// Wraps a full-resolution sequence.
    pub fn new(frames: Vec<T>) -> Self {
        let source = (1..=frames.len()).collect();
        Self { frames, source }
    }

    pub fn frames(&self) -> &[T] {
        &self.frames
    }

    pub fn source_indices(&self) -> &[usize] {
        &self.source
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn into_frames(self) -> Vec<T> {
        self.frames
    }

    /// Keeps every `interval`-th frame starting with the first.
    pub fn downsample(&self, interval: usize) -> Self
    where
        T: Clone,
    {
        assert!(interval >= 1, "sampling interval must be at least 1");
        let keep = (0..self.frames.len()).step_by(interval);
        Self {
            frames: keep.clone().map(|i| self.frames[i].clone()).collect(),
            source: keep.map(|i| self.source[i]).collect(),
        }
    }
}

impl FrameSequence<Descriptor> {
    /// Checks that the sequence is non-empty and every descriptor has the
    /// same length; returns that length.
    pub fn descriptor_len(&self) -> Result<usize> {
        let first = self.frames.first().ok_or(Error::Empty("descriptor sequence"))?;
        let dim = first.len();
        match self.frames.iter().find(|d| d.len() != dim) {
            Some(bad) => Err(Error::LengthMismatch {
                expected: dim,
                actual: bad.len(),
            }),
            None => Ok(dim),
        }
    }
}

impl<T> From<Vec<T>> for FrameSequence<T> {
    fn from(frames: Vec<T>) -> Self {
        Self::new(frames)
    }
}
