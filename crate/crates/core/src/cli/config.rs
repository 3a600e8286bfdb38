//! File-backed run configuration (TOML). Every section is optional and
//! unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bench::{BenchPlan, SyntheticSpec};
use crate::descriptor::DescriptorConfig;
use crate::error::{Error, Result};
use crate::pipeline::PipelineConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Json,
    Csv,
}

/// Where `match` and `baseline` read their sequences from. Each path is a
/// descriptor CSV or a directory of images.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetConfig {
    pub reference: Option<PathBuf>,
    pub test: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    pub trials: usize,
    /// Speed warps cycled over trials; defaults to the synthetic spec's warp.
    pub warps: Vec<f64>,
    pub match_tolerance: usize,
    pub accuracy_tolerance: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            trials: 20,
            warps: Vec::new(),
            match_tolerance: 3,
            accuracy_tolerance: 2,
        }
    }
}

/// Options for the standalone `baseline` command.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineConfig {
    /// Row-wise local contrast enhancement radius; absent disables it.
    pub contrast_radius: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub output_dir: Option<PathBuf>,
    pub formats: Vec<ReportFormat>,
    pub dataset: DatasetConfig,
    pub descriptor: DescriptorConfig,
    pub pipeline: PipelineConfig,
    pub synthetic: SyntheticSpec,
    pub bench: BenchConfig,
    pub baseline: BaselineConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            output_dir: None,
            formats: vec![ReportFormat::Json, ReportFormat::Csv],
            dataset: DatasetConfig::default(),
            descriptor: DescriptorConfig::default(),
            pipeline: PipelineConfig::default(),
            synthetic: SyntheticSpec::default(),
            bench: BenchConfig::default(),
            baseline: BaselineConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn load_or_default(path: Option<&Path>) -> Result<Self> {
        path.map_or_else(|| Ok(Self::default()), Self::load)
    }

    /// Checks every section; nothing runs on an invalid configuration.
    pub fn validate(&self) -> Result<()> {
        self.descriptor.validate()?;
        self.pipeline.validate()?;
        self.synthetic.validate()?;
        self.bench_plan().validate()?;
        if self.baseline.contrast_radius == Some(0) {
            return Err(Error::Config("baseline.contrast_radius must be at least 1".into()));
        }
        if self.formats.is_empty() {
            return Err(Error::Config("formats must name at least one report format".into()));
        }
        Ok(())
    }

    pub fn wants(&self, format: ReportFormat) -> bool {
        self.formats.contains(&format)
    }

    pub fn bench_plan(&self) -> BenchPlan {
        let warps = if self.bench.warps.is_empty() {
            vec![self.synthetic.warp]
        } else {
            self.bench.warps.clone()
        };
        BenchPlan {
            spec: self.synthetic.clone(),
            pipeline: self.pipeline.clone(),
            warps,
            trials: self.bench.trials,
            seed: self.synthetic.seed,
            match_tolerance: self.bench.match_tolerance,
            accuracy_tolerance: self.bench.accuracy_tolerance,
        }
    }
}
