//! C ABI for the `mrs-vpr` sequence matcher.
//!
//! Sequences and match results are opaque handles owned by the caller and
//! released with the matching `*_free` function. Every fallible call
//! returns an [`MrsStatus`]; on failure, [`mrs_last_error`] describes the
//! error for the calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use mrs_vpr::bench::{generate, SyntheticSpec};
use mrs_vpr::cli::ingest::ingest_csv;
use mrs_vpr::particle::initial_particle_count;
use mrs_vpr::pipeline::{predicted_speedup, run_mrs, IdShiftPolicy, MatchResult, PipelineConfig};
use mrs_vpr::{seqslam_baseline, Descriptor, Error};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MrsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidConfig = 2,
    InvalidInput = 3,
    ScheduleInfeasible = 4,
    SearchFailed = 5,
    Io = 6,
    Panic = 7,
}

impl From<&Error> for MrsStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::Config(_) => MrsStatus::InvalidConfig,
            Error::Input(_) | Error::Empty(_) | Error::LengthMismatch { .. } | Error::Csv { .. } => {
                MrsStatus::InvalidInput
            }
            Error::ScheduleInfeasible { .. } => MrsStatus::ScheduleInfeasible,
            Error::OutOfRange { .. }
            | Error::EvaluationInfeasible { .. }
            | Error::DegeneratePopulation
            | Error::NotNormalized(_) => MrsStatus::SearchFailed,
            Error::Io { .. } | Error::Decode { .. } => MrsStatus::Io,
        }
    }
}

/// Search parameters. Obtain defaults from [`mrs_params_default`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MrsParams {
    pub l_max: usize,
    pub tau: f64,
    /// Local search radius; 0 selects half the testing length per level.
    pub id_shift: usize,
    pub resample_fraction: f64,
    pub coverage_threshold: f64,
    pub iteration_cap: usize,
    pub min_test_len: usize,
    pub seed: u64,
    /// Worker threads; 0 uses every core.
    pub workers: usize,
}

impl MrsParams {
    fn to_config(self) -> PipelineConfig {
        PipelineConfig {
            l_max: self.l_max,
            tau: self.tau,
            id_shift: match self.id_shift {
                0 => IdShiftPolicy::HalfTest,
                shift => IdShiftPolicy::Fixed { shift },
            },
            resample_fraction: self.resample_fraction,
            coverage_threshold: self.coverage_threshold,
            iteration_cap: self.iteration_cap,
            min_test_len: self.min_test_len,
            seed: self.seed,
            workers: self.workers,
            ..PipelineConfig::default()
        }
    }
}

/// Opaque frame-descriptor sequence.
pub struct MrsSequence {
    frames: Vec<Descriptor>,
}

/// Opaque multi-resolution match result.
pub struct MrsMatch {
    result: MatchResult,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn fail(e: Error) -> MrsStatus {
    let status = MrsStatus::from(&e);
    set_error(format!("{}: {e}", e.kind()));
    status
}

fn null(name: &str) -> MrsStatus {
    set_error(format!("null pointer: {name}"));
    MrsStatus::NullPointer
}

/// Runs `body`, converting panics into [`MrsStatus::Panic`].
fn guard(body: impl FnOnce() -> MrsStatus) -> MrsStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => status,
        Err(panic) => {
            let msg = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            MrsStatus::Panic
        }
    }
}

/// Message for the last failed call on this thread, or NULL. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn mrs_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Static, NUL-terminated name of a status code.
#[no_mangle]
pub extern "C" fn mrs_status_name(status: MrsStatus) -> *const c_char {
    let name: &'static CStr = match status {
        MrsStatus::Ok => c"ok",
        MrsStatus::NullPointer => c"null_pointer",
        MrsStatus::InvalidConfig => c"invalid_config",
        MrsStatus::InvalidInput => c"invalid_input",
        MrsStatus::ScheduleInfeasible => c"schedule_infeasible",
        MrsStatus::SearchFailed => c"search_failed",
        MrsStatus::Io => c"io",
        MrsStatus::Panic => c"panic",
    };
    name.as_ptr()
}

#[no_mangle]
pub extern "C" fn mrs_params_default() -> MrsParams {
    let d = PipelineConfig::default();
    MrsParams {
        l_max: d.l_max,
        tau: d.tau,
        id_shift: match d.id_shift {
            IdShiftPolicy::Fixed { shift } => shift,
            IdShiftPolicy::HalfTest => 0,
        },
        resample_fraction: d.resample_fraction,
        coverage_threshold: d.coverage_threshold,
        iteration_cap: d.iteration_cap,
        min_test_len: d.min_test_len,
        seed: d.seed,
        workers: d.workers,
    }
}

/// Copies `frames * dim` row-major values into a new sequence.
///
/// # Safety
/// `values` must point to `frames * dim` readable doubles; `out` must be a
/// valid pointer to writable storage.
#[no_mangle]
pub unsafe extern "C" fn mrs_sequence_new(
    values: *const f64,
    frames: usize,
    dim: usize,
    out: *mut *mut MrsSequence,
) -> MrsStatus {
    guard(|| {
        if values.is_null() {
            return null("values");
        }
        if out.is_null() {
            return null("out");
        }
        if frames == 0 || dim == 0 {
            return fail(Error::Empty("sequence"));
        }
        let Some(total) = frames.checked_mul(dim) else {
            return fail(Error::Input("frames * dim overflows".into()));
        };
        let data = std::slice::from_raw_parts(values, total);
        let frames: Result<Vec<Descriptor>, Error> = data.chunks(dim).map(|c| Descriptor::new(c.to_vec())).collect();
        match frames {
            Ok(frames) => {
                *out = Box::into_raw(Box::new(MrsSequence { frames }));
                MrsStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Loads a descriptor CSV (one frame per row).
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mrs_sequence_from_csv(path: *const c_char, out: *mut *mut MrsSequence) -> MrsStatus {
    guard(|| {
        if path.is_null() {
            return null("path");
        }
        if out.is_null() {
            return null("out");
        }
        let Ok(path) = CStr::from_ptr(path).to_str() else {
            return fail(Error::Input("path is not UTF-8".into()));
        };
        match ingest_csv(Path::new(path)) {
            Ok(seq) => {
                *out = Box::into_raw(Box::new(MrsSequence { frames: seq.into_frames() }));
                MrsStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Number of frames, or 0 for NULL.
///
/// # Safety
/// `seq` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mrs_sequence_len(seq: *const MrsSequence) -> usize {
    seq.as_ref().map_or(0, |s| s.frames.len())
}

/// Descriptor length, or 0 for NULL.
///
/// # Safety
/// `seq` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mrs_sequence_dim(seq: *const MrsSequence) -> usize {
    seq.as_ref().and_then(|s| s.frames.first()).map_or(0, |d| d.len())
}

/// # Safety
/// `seq` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mrs_sequence_free(seq: *mut MrsSequence) {
    if !seq.is_null() {
        drop(Box::from_raw(seq));
    }
}

/// Generates a synthetic reference and a warped, noisy testing copy of one
/// of its windows. `end_index` receives the 1-based ground-truth end.
///
/// # Safety
/// All output pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn mrs_synthetic_generate(
    ref_len: usize,
    test_len: usize,
    dim: usize,
    noise: f64,
    warp: f64,
    seed: u64,
    reference: *mut *mut MrsSequence,
    test: *mut *mut MrsSequence,
    end_index: *mut usize,
) -> MrsStatus {
    guard(|| {
        if reference.is_null() || test.is_null() || end_index.is_null() {
            return null("output");
        }
        let spec = SyntheticSpec {
            ref_len,
            test_len,
            dim,
            noise,
            warp,
            seed,
            ..SyntheticSpec::default()
        };
        match generate(&spec) {
            Ok(d) => {
                *reference = Box::into_raw(Box::new(MrsSequence { frames: d.reference }));
                *test = Box::into_raw(Box::new(MrsSequence { frames: d.test }));
                *end_index = d.truth.end_index;
                MrsStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Multi-resolution search of `test` inside `reference`. `params` may be
/// NULL for defaults.
///
/// # Safety
/// Handles must be live; `params` NULL or readable; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mrs_match(
    reference: *const MrsSequence,
    test: *const MrsSequence,
    params: *const MrsParams,
    out: *mut *mut MrsMatch,
) -> MrsStatus {
    guard(|| {
        let (Some(r), Some(t)) = (reference.as_ref(), test.as_ref()) else {
            return null("sequence");
        };
        if out.is_null() {
            return null("out");
        }
        let cfg = params.as_ref().copied().unwrap_or_else(|| mrs_params_default()).to_config();
        match run_mrs(&r.frames, &t.frames, &cfg) {
            Ok(result) => {
                *out = Box::into_raw(Box::new(MrsMatch { result }));
                MrsStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Exhaustive search; any output pointer may be NULL.
///
/// # Safety
/// Handles must be live; non-NULL outputs writable.
#[no_mangle]
pub unsafe extern "C" fn mrs_baseline(
    reference: *const MrsSequence,
    test: *const MrsSequence,
    end_index: *mut usize,
    velocity: *mut f64,
    score: *mut f64,
) -> MrsStatus {
    guard(|| {
        let (Some(r), Some(t)) = (reference.as_ref(), test.as_ref()) else {
            return null("sequence");
        };
        match seqslam_baseline(&r.frames, &t.frames) {
            Ok(b) => {
                if !end_index.is_null() {
                    *end_index = b.best.end_index;
                }
                if !velocity.is_null() {
                    *velocity = b.best.velocity.ratio();
                }
                if !score.is_null() {
                    *score = b.best.score;
                }
                MrsStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// 1-based end index of the best match, or 0 for NULL.
///
/// # Safety
/// `m` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mrs_match_index(m: *const MrsMatch) -> usize {
    m.as_ref().map_or(0, |m| m.result.best_index)
}

/// # Safety
/// `m` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mrs_match_score(m: *const MrsMatch) -> f64 {
    m.as_ref().map_or(f64::NAN, |m| m.result.best_score)
}

/// # Safety
/// `m` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mrs_match_velocity(m: *const MrsMatch) -> f64 {
    m.as_ref().map_or(f64::NAN, |m| m.result.best_velocity.ratio())
}

/// Trajectory scores computed by the run.
///
/// # Safety
/// `m` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mrs_match_evaluations(m: *const MrsMatch) -> u64 {
    m.as_ref().map_or(0, |m| m.result.evaluations())
}

/// # Safety
/// `m` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mrs_match_particle_count(m: *const MrsMatch) -> usize {
    m.as_ref().map_or(0, |m| m.result.ranked_particles.len())
}

/// Final particle at 0-based `rank` (best first).
///
/// # Safety
/// `m` must be a live handle; `index` and `weight` writable.
#[no_mangle]
pub unsafe extern "C" fn mrs_match_particle(
    m: *const MrsMatch,
    rank: usize,
    index: *mut usize,
    weight: *mut f64,
) -> MrsStatus {
    guard(|| {
        let Some(m) = m.as_ref() else { return null("match") };
        if index.is_null() || weight.is_null() {
            return null("output");
        }
        match m.result.ranked_particles.get(rank) {
            Some(p) => {
                *index = p.index;
                *weight = p.weight;
                MrsStatus::Ok
            }
            None => fail(Error::Input(format!("rank {rank} out of range"))),
        }
    })
}

/// # Safety
/// `m` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mrs_match_free(m: *mut MrsMatch) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

#[no_mangle]
pub extern "C" fn mrs_predicted_speedup(test_len: usize, tau: f64, l_max: usize) -> f64 {
    predicted_speedup(test_len, tau, l_max)
}

/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mrs_initial_particle_count(
    ref_len: usize,
    test_len: usize,
    tau: f64,
    out: *mut usize,
) -> MrsStatus {
    guard(|| {
        if out.is_null() {
            return null("out");
        }
        match initial_particle_count(ref_len, test_len, tau) {
            Ok(n) => {
                *out = n;
                MrsStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}
