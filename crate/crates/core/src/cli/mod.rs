//! Command-line front end: argument parsing, run orchestration and report
//! emission. Results go to standard output as JSON; logs go to standard
//! error.

pub mod config;
pub mod ingest;
pub mod report;

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::bench::{generate, run_bench, sweep, PrPoint, SweepRow};
use crate::error::{Error, Result};
use crate::pipeline::{run_mrs, MatchResult};
use crate::seqmatch::{seqslam_baseline_with, BaselineOptions};
use config::{ReportFormat, RunConfig};
use ingest::{load_descriptors, write_csv};
use report::{ManifestEntry, Payload, ReportWriter};

#[derive(Debug, Parser)]
#[command(name = "mrs-vpr", version, about = "Multi-resolution sequence matching for visual place recognition")]
pub struct Cli {
    /// Increase log verbosity (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Localize a testing sequence with the multi-resolution particle search.
    Match(MatchArgs),
    /// Localize with the exhaustive single-resolution search.
    Baseline(PairArgs),
    /// Compare both methods on synthetic trials and write a report.
    Bench(BenchArgs),
    /// Grid of multi-resolution runs over depth and overlap.
    Sweep(SweepArgs),
    /// Write a synthetic reference/testing pair as descriptor CSVs.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct PairArgs {
    /// Reference descriptors: a CSV file or an image directory.
    #[arg(long = "ref")]
    pub reference: Option<PathBuf>,
    /// Testing descriptors: a CSV file or an image directory.
    #[arg(long)]
    pub test: Option<PathBuf>,
    /// TOML run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Worker threads (0 = all cores); overrides the configuration.
    #[arg(long)]
    pub workers: Option<usize>,
    /// Report directory; overrides the configuration.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MatchArgs {
    #[command(flatten)]
    pub pair: PairArgs,
    /// Seed for particle initialization and resampling.
    #[arg(long)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct SpecArgs {
    /// Run configuration holding the synthetic spec.
    #[arg(long, visible_alias = "config")]
    pub spec: Option<PathBuf>,
    /// Seeded trials per configuration; overrides the configuration.
    #[arg(long)]
    pub trials: Option<usize>,
    /// Worker threads (0 = all cores).
    #[arg(long)]
    pub workers: Option<usize>,
    /// Report directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub spec: SpecArgs,
    /// Base seed; trial k uses base + k.
    #[arg(long)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub spec: SpecArgs,
    /// Depths as `a..b` (inclusive) or a comma list.
    #[arg(long, default_value = "1..4")]
    pub lmax: String,
    /// Overlap values as a comma list.
    #[arg(long, default_value = "1.0,1.5,2.0,2.5")]
    pub tau: String,
    /// Base seed; defaults to `synthetic.seed` from the configuration.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Run configuration holding the synthetic spec.
    #[arg(long, visible_alias = "config")]
    pub spec: Option<PathBuf>,
    /// Overrides `synthetic.seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory for reference.csv, test.csv and truth.json.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Exit status for an error: 2 for invalid configuration, 1 otherwise.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) => 2,
        _ => 1,
    }
}

/// Single-line, machine-parsable rendering of an error.
pub fn error_line(kind: &str, message: &str) -> String {
    let message = serde_json::to_string(message).expect("strings serialize");
    format!("error: kind={kind} message={message}")
}

/// Parses a depth list: `1..4`, `1..=4` or `1,2,3`.
pub fn parse_depths(text: &str) -> Result<Vec<usize>> {
    let bad = || Error::Config(format!("cannot parse depth list `{text}`"));
    let num = |s: &str| s.trim().parse::<usize>().map_err(|_| bad());
    let out: Vec<usize> = if let Some((a, b)) = text.split_once("..") {
        let (a, b) = (num(a)?, num(b.trim_start_matches('='))?);
        (a..=b).collect()
    } else {
        text.split(',').map(num).collect::<Result<_>>()?
    };
    if out.is_empty() {
        return Err(bad());
    }
    Ok(out)
}

pub fn parse_taus(text: &str) -> Result<Vec<f64>> {
    let taus: Vec<f64> = text
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .ok()
                .filter(|t| t.is_finite() && *t > 0.0)
                .ok_or_else(|| Error::Config(format!("cannot parse tau `{s}`")))
        })
        .collect::<Result<_>>()?;
    Ok(taus)
}

fn print_json<T: Serialize>(value: &T) {
    use std::io::Write;
    let text = serde_json::to_string_pretty(value).expect("results serialize");
    // a closed pipe (e.g. `| head`) is not an error for the run itself
    let _ = writeln!(std::io::stdout().lock(), "{text}");
}

#[derive(Serialize)]
struct Seconds {
    seconds: f64,
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Match(args) => run_match(args),
        Command::Baseline(args) => run_baseline(args),
        Command::Bench(args) => run_bench_cmd(args),
        Command::Sweep(args) => run_sweep(args),
        Command::Synth(args) => run_synth(args),
    }
}

fn load_pair(args: &PairArgs, cfg: &RunConfig) -> Result<(Vec<crate::Descriptor>, Vec<crate::Descriptor>)> {
    let pick = |flag: &Option<PathBuf>, fallback: &Option<PathBuf>, what: &str| {
        flag.clone()
            .or_else(|| fallback.clone())
            .ok_or_else(|| Error::Config(format!("no {what} sequence given (--{what} or [dataset])")))
    };
    let reference = pick(&args.reference, &cfg.dataset.reference, "ref")?;
    let test = pick(&args.test, &cfg.dataset.test, "test")?;
    Ok((
        load_descriptors(&reference, &cfg.descriptor)?,
        load_descriptors(&test, &cfg.descriptor)?,
    ))
}

fn pair_config(args: &PairArgs) -> Result<RunConfig> {
    let mut cfg = RunConfig::load_or_default(args.config.as_deref())?;
    if let Some(w) = args.workers {
        cfg.pipeline.workers = w;
    }
    if args.out.is_some() {
        cfg.output_dir = args.out.clone();
    }
    Ok(cfg)
}

#[derive(Serialize)]
struct ParticleRow {
    rank: usize,
    index: usize,
    weight: f64,
}

#[derive(Serialize)]
struct LevelRow {
    level: usize,
    interval: usize,
    test_len: usize,
    ref_len: usize,
    shift: usize,
    particles: usize,
    iterations: usize,
    evaluations: u64,
    distance_computations: u64,
}

fn match_files(dir: &Path, cfg: &RunConfig, doc: &impl Serialize, result: &MatchResult) -> Result<Vec<ManifestEntry>> {
    let mut w = ReportWriter::create(dir)?;
    if cfg.wants(ReportFormat::Json) {
        w.json("match.json", doc, "match result and level trace")?;
    }
    if cfg.wants(ReportFormat::Csv) {
        let particles: Vec<ParticleRow> = result
            .ranked_particles
            .iter()
            .enumerate()
            .map(|(k, p)| ParticleRow { rank: k + 1, index: p.index, weight: p.weight })
            .collect();
        w.csv("particles.csv", &particles, "final particles by rank")?;
        let levels: Vec<LevelRow> = result
            .levels
            .iter()
            .map(|l| LevelRow {
                level: l.level,
                interval: l.interval,
                test_len: l.test_len,
                ref_len: l.ref_len,
                shift: l.shift,
                particles: l.particles,
                iterations: l.iterations,
                evaluations: l.evaluations,
                distance_computations: l.distance_computations,
            })
            .collect();
        w.csv("levels.csv", &levels, "per-level search trace")?;
    }
    w.finish()
}

fn run_match(args: MatchArgs) -> Result<()> {
    let mut cfg = pair_config(&args.pair)?;
    cfg.pipeline.seed = args.seed;
    cfg.validate()?;
    let (reference, test) = load_pair(&args.pair, &cfg)?;
    let started = Instant::now();
    let result = run_mrs(&reference, &test, &cfg.pipeline)?;
    let timing = Seconds { seconds: started.elapsed().as_secs_f64() };
    let manifest = match &cfg.output_dir {
        Some(dir) => {
            let doc = Payload { result: &result, timing: &timing, manifest: None };
            Some(match_files(dir, &cfg, &doc, &result)?)
        }
        None => None,
    };
    print_json(&Payload { result: &result, timing: &timing, manifest: manifest.as_deref() });
    Ok(())
}

fn run_baseline(args: PairArgs) -> Result<()> {
    let cfg = pair_config(&args)?;
    let (reference, test) = load_pair(&args, &cfg)?;
    let opts = BaselineOptions { sweep: cfg.pipeline.velocities.clone(), contrast_radius: cfg.baseline.contrast_radius };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.pipeline.workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    let started = Instant::now();
    let result = pool.install(|| seqslam_baseline_with(&reference, &test, &opts))?;
    let timing = Seconds { seconds: started.elapsed().as_secs_f64() };
    let manifest = match &cfg.output_dir {
        Some(dir) => {
            let mut w = ReportWriter::create(dir)?;
            w.json("baseline.json", &Payload { result: &result, timing: &timing, manifest: None }, "baseline result")?;
            Some(w.finish()?)
        }
        None => None,
    };
    print_json(&Payload { result: &result, timing: &timing, manifest: manifest.as_deref() });
    Ok(())
}

fn spec_config(args: &SpecArgs) -> Result<RunConfig> {
    let mut cfg = RunConfig::load_or_default(args.spec.as_deref())?;
    if let Some(t) = args.trials {
        cfg.bench.trials = t;
    }
    if let Some(w) = args.workers {
        cfg.pipeline.workers = w;
    }
    if args.out.is_some() {
        cfg.output_dir = args.out.clone();
    }
    Ok(cfg)
}

#[derive(Serialize)]
struct PrRow {
    recall: f64,
    precision: f64,
}

fn pr_rows(points: &[PrPoint]) -> Vec<PrRow> {
    points.iter().map(|p| PrRow { recall: p.recall, precision: p.precision }).collect()
}

fn run_bench_cmd(args: BenchArgs) -> Result<()> {
    let mut cfg = spec_config(&args.spec)?;
    cfg.synthetic.seed = args.seed;
    cfg.validate()?;
    let dir = cfg.output_dir.clone().unwrap_or_else(|| PathBuf::from("bench-report"));
    let report = run_bench(&cfg.bench_plan())?;
    let mut w = ReportWriter::create(&dir)?;
    if cfg.wants(ReportFormat::Json) {
        w.json("report.json", &Payload { result: &report, timing: &report.timing, manifest: None }, "benchmark report")?;
    }
    if cfg.wants(ReportFormat::Csv) {
        w.csv("trials.csv", &report.trials, "one row per trial")?;
        w.csv("pr_mrs.csv", &pr_rows(&report.mrs_pr), "multi-resolution precision-recall points")?;
        w.csv("pr_baseline.csv", &pr_rows(&report.baseline_pr), "baseline precision-recall points")?;
    }
    let manifest = w.finish()?;
    print_json(&Payload { result: &report, timing: &report.timing, manifest: Some(&manifest) });
    Ok(())
}

#[derive(Serialize)]
struct SweepCsvRow<'a> {
    l_max: usize,
    tau: f64,
    status: &'a str,
    trials: usize,
    success_rate: f64,
    median_error: f64,
    q1_error: f64,
    q3_error: f64,
    mean_evaluations: f64,
    predicted_speedup: f64,
}

fn run_sweep(args: SweepArgs) -> Result<()> {
    let mut cfg = spec_config(&args.spec)?;
    if let Some(seed) = args.seed {
        cfg.synthetic.seed = seed;
    }
    let depths = parse_depths(&args.lmax)?;
    let taus = parse_taus(&args.tau)?;
    cfg.validate()?;
    let started = Instant::now();
    let rows: Vec<SweepRow> = sweep(&cfg.bench_plan(), &depths, &taus)?;
    let timing = Seconds { seconds: started.elapsed().as_secs_f64() };
    let manifest = match &cfg.output_dir {
        Some(dir) => {
            let mut w = ReportWriter::create(dir)?;
            if cfg.wants(ReportFormat::Json) {
                w.json("sweep.json", &rows, "one entry per (l_max, tau)")?;
            }
            if cfg.wants(ReportFormat::Csv) {
                let flat: Vec<SweepCsvRow> = rows
                    .iter()
                    .map(|r| SweepCsvRow {
                        l_max: r.l_max,
                        tau: r.tau,
                        status: &r.status,
                        trials: r.trials,
                        success_rate: r.success_rate,
                        median_error: r.median_error,
                        q1_error: r.q1_error,
                        q3_error: r.q3_error,
                        mean_evaluations: r.mean_evaluations,
                        predicted_speedup: r.predicted_speedup,
                    })
                    .collect();
                w.csv("sweep.csv", &flat, "one row per (l_max, tau)")?;
            }
            Some(w.finish()?)
        }
        None => None,
    };
    print_json(&Payload { result: &rows, timing: &timing, manifest: manifest.as_deref() });
    Ok(())
}

fn run_synth(args: SynthArgs) -> Result<()> {
    let mut cfg = RunConfig::load_or_default(args.spec.as_deref())?;
    if let Some(seed) = args.seed {
        cfg.synthetic.seed = seed;
    }
    if args.out.is_some() {
        cfg.output_dir = args.out;
    }
    cfg.validate()?;
    let dir = cfg
        .output_dir
        .clone()
        .ok_or_else(|| Error::Config("synth needs an output directory (--out or output_dir)".into()))?;
    let data = generate(&cfg.synthetic)?;
    let mut w = ReportWriter::create(&dir)?;
    write_csv(&w.path("reference.csv"), &data.reference)?;
    w.record("reference.csv", "reference descriptors, one row per frame")?;
    write_csv(&w.path("test.csv"), &data.test)?;
    w.record("test.csv", "testing descriptors, one row per frame")?;
    w.json("truth.json", &data.truth, "ground-truth alignment")?;
    let manifest = w.finish()?;
    print_json(&Payload { result: &data.truth, timing: &(), manifest: Some(&manifest) });
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn depth_lists() {
        assert_eq!(parse_depths("1..4").unwrap(), vec![1, 2, 3, 4]);
        assert_eq!(parse_depths("2..=3").unwrap(), vec![2, 3]);
        assert_eq!(parse_depths("3, 1").unwrap(), vec![3, 1]);
        assert!(parse_depths("4..1").is_err());
        assert!(parse_depths("x").is_err());
        assert_eq!(parse_taus("1.0,1.5").unwrap(), vec![1.0, 1.5]);
        assert!(parse_taus("1.0,-2").is_err());
    }

    #[test]
    fn error_lines_are_single_line() {
        let line = error_line("config", "bad\nvalue \"x\"");
        assert_eq!(line, r#"error: kind=config message="bad\nvalue \"x\"""#);
        assert!(!line.contains('\n'));
        assert_eq!(exit_code(&Error::Config("x".into())), 2);
        assert_eq!(exit_code(&Error::Empty("x")), 1);
    }

    #[test]
    fn cli_parses() {
        let cli = Cli::try_parse_from(["mrs-vpr", "match", "--ref", "a.csv", "--test", "b.csv", "--seed", "7"]).unwrap();
        assert!(matches!(cli.command, Command::Match(MatchArgs { seed: 7, .. })));
        assert!(Cli::try_parse_from(["mrs-vpr", "match", "--ref", "a.csv"]).is_err());
        assert!(Cli::try_parse_from(["mrs-vpr", "bench", "--spec", "s.toml"]).is_err());
    }
}
