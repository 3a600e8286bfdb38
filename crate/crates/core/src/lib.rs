//! Sequence-based visual place recognition with a coarse-to-fine particle
//! search.
//!
//! A short testing sequence is located inside a long reference sequence.
//! [`pipeline::run_mrs`] decimates both sequences into a pyramid of
//! resolution levels, seeds particles uniformly over the coarsest reference,
//! and refines the surviving hypotheses level by level. The exhaustive
//! matcher [`seqmatch::seqslam_baseline`] serves as oracle and comparator,
//! and [`bench`] generates synthetic trajectories with known ground truth.
//!
//! ```
//! use mrs_vpr::bench::{generate, SyntheticSpec};
//! use mrs_vpr::pipeline::{run_mrs, PipelineConfig};
//!
//! let spec = SyntheticSpec { ref_len: 512, test_len: 64, embed_end: Some(300), dim: 64, ..SyntheticSpec::default() };
//! let data = generate(&spec).unwrap();
//! let result = run_mrs(&data.reference, &data.test, &PipelineConfig::with_seed(7)).unwrap();
//! assert_eq!(result.best_index, 300);
//! ```

pub mod bench;
pub mod cli;
pub mod descriptor;
pub mod error;
pub mod particle;
pub mod pipeline;
pub mod pyramid;
pub mod seqmatch;
pub mod sequence;

pub use descriptor::{Descriptor, DescriptorConfig, RawFrame};
pub use error::{Error, Result};
pub use pipeline::{run_mrs, MatchResult, PipelineConfig};
pub use seqmatch::{seqslam_baseline, Velocity, VelocitySweep};
pub use sequence::FrameSequence;
