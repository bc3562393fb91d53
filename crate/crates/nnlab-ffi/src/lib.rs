//! C ABI over the nnlab core: opaque handles, integer status codes, and
//! exact points passed as `m/2^e` strings so foreign callers never lose
//! precision. The generated header lives at `include/nnlab.h`.
//!
//! Conventions: functions returning [`NnlabStatus`] set a thread-local
//! message retrievable via [`nnlab_last_error_message`] on failure. Strings
//! returned as `*mut c_char` are owned by the caller and must be released
//! with [`nnlab_string_free`]; `const` strings are borrowed and must not be
//! freed.

use std::cell::RefCell;
use std::ffi::{CStr, CString};
use std::os::raw::c_char;
use std::path::PathBuf;

use nnlab::experiment::{self, cmd_run, parse_learner, preset_config};
use nnlab::learners::Learner;
use nnlab::processes::Trajectory;
use nnlab::spaces::Label;
use nnlab::{Dyadic, OnlinePredictor};

/// Status codes shared by every fallible entry point.
#[repr(C)]
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum NnlabStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidUtf8 = 3,
    /// predict/reveal called out of order.
    ProtocolError = 4,
    RuntimeError = 5,
    IndexOutOfRange = 6,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<Vec<u8>>) {
    let cstring = CString::new(msg).unwrap_or_else(|_| {
        CString::new("error message contained a NUL byte").expect("static message")
    });
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(cstring));
}

fn fail(status: NnlabStatus, msg: impl Into<Vec<u8>>) -> NnlabStatus {
    set_error(msg);
    status
}

/// Message for the most recent failure on this thread, or NULL. Borrowed;
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn nnlab_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| {
        slot.borrow()
            .as_ref()
            .map(|s| s.as_ptr())
            .unwrap_or(std::ptr::null())
    })
}

/// Crate version as a static string; do not free.
#[no_mangle]
pub extern "C" fn nnlab_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Releases a string previously returned by an owning accessor.
///
/// # Safety
/// `s` must be NULL or a pointer obtained from this library's owning string
/// accessors, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn nnlab_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

unsafe fn read_str<'a>(ptr: *const c_char, what: &str) -> Result<&'a str, NnlabStatus> {
    if ptr.is_null() {
        set_error(format!("{what} is NULL"));
        return Err(NnlabStatus::NullPointer);
    }
    CStr::from_ptr(ptr).to_str().map_err(|_| {
        set_error(format!("{what} is not valid UTF-8"));
        NnlabStatus::InvalidUtf8
    })
}

/// Opaque online learner handle.
pub struct NnlabLearner {
    inner: Learner,
}

/// Creates a learner from a rule spec (`memo`, `1nn`, `<k>c1nn`,
/// `knn:floor_log2`, `knn:floor_sqrt`, `knn:<k>`).
///
/// # Safety
/// `rule` must be a valid NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn nnlab_learner_new(
    rule: *const c_char,
    default_label: u32,
    out: *mut *mut NnlabLearner,
) -> NnlabStatus {
    if out.is_null() {
        return fail(NnlabStatus::NullPointer, "out is NULL");
    }
    let rule = match read_str(rule, "rule") {
        Ok(s) => s,
        Err(status) => return status,
    };
    let parsed = match parse_learner(rule) {
        Ok(r) => r,
        Err(e) => return fail(NnlabStatus::InvalidArgument, e.to_string()),
    };
    match Learner::new(parsed, Label(default_label)) {
        Ok(inner) => {
            *out = Box::into_raw(Box::new(NnlabLearner { inner }));
            NnlabStatus::Ok
        }
        Err(e) => fail(NnlabStatus::InvalidArgument, e.to_string()),
    }
}

/// # Safety
/// `learner` must be NULL or a live handle from [`nnlab_learner_new`].
#[no_mangle]
pub unsafe extern "C" fn nnlab_learner_free(learner: *mut NnlabLearner) {
    if !learner.is_null() {
        drop(Box::from_raw(learner));
    }
}

/// Predicts the label for the exact point `x` (`m/2^e`). Must be followed by
/// [`nnlab_learner_reveal`] before the next predict.
///
/// # Safety
/// `learner` must be a live handle; `x` a valid string; `out_label` a valid
/// pointer.
#[no_mangle]
pub unsafe extern "C" fn nnlab_learner_predict(
    learner: *mut NnlabLearner,
    x: *const c_char,
    out_label: *mut u32,
) -> NnlabStatus {
    if learner.is_null() || out_label.is_null() {
        return fail(NnlabStatus::NullPointer, "learner or out_label is NULL");
    }
    let x = match read_str(x, "x") {
        Ok(s) => s,
        Err(status) => return status,
    };
    let point: Dyadic = match x.parse() {
        Ok(p) => p,
        Err(e) => return fail(NnlabStatus::InvalidArgument, format!("{e}")),
    };
    let learner = &mut *learner;
    match learner.inner.predict(&point) {
        Ok(label) => {
            *out_label = label.0;
            NnlabStatus::Ok
        }
        Err(e) => fail(NnlabStatus::ProtocolError, e.to_string()),
    }
}

/// Reveals the true label for the step whose prediction was just taken.
///
/// # Safety
/// `learner` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn nnlab_learner_reveal(learner: *mut NnlabLearner, y: u32) -> NnlabStatus {
    if learner.is_null() {
        return fail(NnlabStatus::NullPointer, "learner is NULL");
    }
    let learner = &mut *learner;
    match learner.inner.reveal(Label(y)) {
        Ok(()) => NnlabStatus::Ok,
        Err(e) => fail(NnlabStatus::ProtocolError, e.to_string()),
    }
}

/// Current dataset size (eligible neighbor count).
///
/// # Safety
/// `learner` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn nnlab_learner_dataset_size(
    learner: *const NnlabLearner,
    out: *mut u64,
) -> NnlabStatus {
    if learner.is_null() || out.is_null() {
        return fail(NnlabStatus::NullPointer, "learner or out is NULL");
    }
    let learner = &*learner;
    *out = learner.inner.dataset_size();
    NnlabStatus::Ok
}

/// Opaque trajectory handle.
pub struct NnlabTrajectory {
    inner: Trajectory,
}

/// Generates the input trajectory of a named preset (`thm4-1nn-fails`,
/// `thm4-2c1nn-succeeds`, `thm3-knn-fails`, `crf-check`, `smv-grid`).
///
/// # Safety
/// `preset` must be a valid string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn nnlab_trajectory_preset(
    preset: *const c_char,
    seed: u64,
    horizon: u64,
    out: *mut *mut NnlabTrajectory,
) -> NnlabStatus {
    if out.is_null() {
        return fail(NnlabStatus::NullPointer, "out is NULL");
    }
    let name = match read_str(preset, "preset") {
        Ok(s) => s,
        Err(status) => return status,
    };
    let Some(mut cfg) = preset_config(name) else {
        return fail(
            NnlabStatus::InvalidArgument,
            format!("unknown preset {name:?}"),
        );
    };
    cfg.seed = seed;
    cfg.horizon = horizon;
    match cfg.process.generate(seed, horizon, &cfg.target) {
        Ok(inner) => {
            *out = Box::into_raw(Box::new(NnlabTrajectory { inner }));
            NnlabStatus::Ok
        }
        Err(e) => fail(NnlabStatus::RuntimeError, e.to_string()),
    }
}

/// # Safety
/// `traj` must be NULL or a live handle from [`nnlab_trajectory_preset`].
#[no_mangle]
pub unsafe extern "C" fn nnlab_trajectory_free(traj: *mut NnlabTrajectory) {
    if !traj.is_null() {
        drop(Box::from_raw(traj));
    }
}

/// Number of samples in the trajectory.
///
/// # Safety
/// `traj` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn nnlab_trajectory_len(traj: *const NnlabTrajectory) -> u64 {
    if traj.is_null() {
        return 0;
    }
    let traj = &*traj;
    traj.inner.len()
}

/// The exact point at `index` (0-based) as a newly allocated `m/2^e` string;
/// NULL when out of range. Free with [`nnlab_string_free`].
///
/// # Safety
/// `traj` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn nnlab_trajectory_point(
    traj: *const NnlabTrajectory,
    index: u64,
) -> *mut c_char {
    if traj.is_null() {
        set_error("traj is NULL");
        return std::ptr::null_mut();
    }
    let traj = &*traj;
    match traj.inner.samples.get(index as usize) {
        Some(s) => CString::new(s.x.to_string())
            .map(CString::into_raw)
            .unwrap_or(std::ptr::null_mut()),
        None => {
            set_error(format!("index {index} out of range"));
            std::ptr::null_mut()
        }
    }
}

/// The true label at `index` (0-based).
///
/// # Safety
/// `traj` must be a live handle and `out_label` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn nnlab_trajectory_label(
    traj: *const NnlabTrajectory,
    index: u64,
    out_label: *mut u32,
) -> NnlabStatus {
    if traj.is_null() || out_label.is_null() {
        return fail(NnlabStatus::NullPointer, "traj or out_label is NULL");
    }
    let traj = &*traj;
    match traj.inner.samples.get(index as usize) {
        Some(s) => {
            *out_label = s.y.0;
            NnlabStatus::Ok
        }
        None => fail(
            NnlabStatus::IndexOutOfRange,
            format!("index {index} out of range"),
        ),
    }
}

/// Runs a preset end to end and writes report.csv / report.json / plot.svg
/// into `out_dir`. Pass 0 for `trials` or `workers` to keep preset defaults.
///
/// # Safety
/// `preset` and `out_dir` must be valid strings.
#[no_mangle]
pub unsafe extern "C" fn nnlab_run_preset(
    preset: *const c_char,
    seed: u64,
    horizon: u64,
    trials: u64,
    workers: u64,
    out_dir: *const c_char,
) -> NnlabStatus {
    let name = match read_str(preset, "preset") {
        Ok(s) => s,
        Err(status) => return status,
    };
    let dir = match read_str(out_dir, "out_dir") {
        Ok(s) => s,
        Err(status) => return status,
    };
    let Some(mut cfg) = preset_config(name) else {
        return fail(
            NnlabStatus::InvalidArgument,
            format!("unknown preset {name:?}"),
        );
    };
    cfg.seed = seed;
    cfg.horizon = horizon;
    if cfg
        .checkpoints
        .as_ref()
        .is_some_and(|cp| cp.last().is_some_and(|&t| t > horizon))
    {
        cfg.checkpoints = None;
    }
    if trials > 0 {
        cfg.trials = trials;
    }
    if workers > 0 {
        cfg.workers = workers as usize;
    }
    cfg.out_dir = PathBuf::from(dir);
    match cmd_run(&cfg) {
        Ok(_) => NnlabStatus::Ok,
        Err(experiment::ExperimentError::Config(msg)) => fail(NnlabStatus::InvalidArgument, msg),
        Err(e) => fail(NnlabStatus::RuntimeError, e.to_string()),
    }
}

/// Runs the built-in self-test suites; returns 0 when all pass, 3 otherwise.
#[no_mangle]
pub extern "C" fn nnlab_selftest() -> i32 {
    let lines = experiment::cmd_selftest();
    if lines.iter().all(|l| l.passed) {
        0
    } else {
        let failed: Vec<&str> = lines.iter().filter(|l| !l.passed).map(|l| l.name).collect();
        set_error(format!("self-test failures: {}", failed.join(", ")));
        3
    }
}
