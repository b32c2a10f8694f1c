//! C ABI over `cafda-core`.
//!
//! Two opaque handles are exposed:
//!
//! * `CafdaWeights` — a bare mixture weight vector with the multiplicative
//!   update, for hosts that drive their own strategies;
//! * `CafdaRun` — a complete run (dataset, split, strategies, mixture) that
//!   proposes one row at a time and takes the analyst's label back.
//!
//! Every function returns a [`CafdaStatus`]; on failure a description is
//! available from [`cafda_last_error`] on the same thread. Panics never cross
//! the boundary. Handles must be released with their `_free` function and
//! must not be shared between threads without external locking.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::sync::Arc;

use cafda_core::cafda::{init_weights, pick_strategy, sample_query, update_weights, CafdaConfig, WeightVector};
use cafda_core::config::{PolicyKind, RunConfig};
use cafda_core::datapool::{Dataset, Label, RowId};
use cafda_core::harness::{log_lines, RunEngine};
use cafda_core::strategies::AdviceVector;
use cafda_core::{Error, ErrorCategory};

/// Result code of every exported function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CafdaStatus {
    Ok = 0,
    /// A required pointer argument was NULL.
    NullPointer = 1,
    /// An argument is out of range or not valid UTF-8.
    InvalidArgument = 2,
    /// The configuration was rejected.
    InvalidConfig = 3,
    /// The dataset could not be read or split.
    DataError = 4,
    /// The run failed while stepping.
    RuntimeError = 5,
    /// The run has reached its horizon or exhausted its pool.
    Finished = 6,
    /// An internal panic was caught.
    Panic = 7,
}

/// Mixture parameters: penalty `k0`, boost `k1`, weight bounds `[p_min, p_max]`.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CafdaParams {
    pub k0: f64,
    pub k1: f64,
    pub p_min: f64,
    pub p_max: f64,
}

impl From<CafdaParams> for CafdaConfig {
    fn from(p: CafdaParams) -> Self {
        CafdaConfig {
            k0: p.k0,
            k1: p.k1,
            p_min: p.p_min,
            p_max: p.p_max,
        }
    }
}

/// Opaque mixture weight vector.
pub struct CafdaWeights {
    weights: WeightVector,
    config: CafdaConfig,
}

/// Opaque step-by-step run.
pub struct CafdaRun {
    engine: RunEngine,
    dataset: Arc<Dataset>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = CString::new(msg.into().replace('\0', " ")).expect("NUL bytes were replaced");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

fn fail(status: CafdaStatus, msg: impl Into<String>) -> CafdaStatus {
    set_error(msg);
    status
}

fn from_core(e: Error) -> CafdaStatus {
    let status = match e.category() {
        ErrorCategory::Usage => CafdaStatus::InvalidConfig,
        ErrorCategory::Data => CafdaStatus::DataError,
        ErrorCategory::Runtime => CafdaStatus::RuntimeError,
    };
    fail(status, e.to_string())
}

fn guard(f: impl FnOnce() -> CafdaStatus) -> CafdaStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|payload| {
        let msg = payload
            .downcast_ref::<&str>()
            .map(|s| s.to_string())
            .or_else(|| payload.downcast_ref::<String>().cloned())
            .unwrap_or_else(|| "unknown panic".into());
        fail(CafdaStatus::Panic, format!("internal panic: {msg}"))
    })
}

macro_rules! non_null {
    ($($p:ident),+) => {
        $(if $p.is_null() {
            return fail(CafdaStatus::NullPointer, concat!("`", stringify!($p), "` is NULL"));
        })+
    };
}

unsafe fn utf8<'a>(s: *const c_char, what: &str) -> Result<&'a str, CafdaStatus> {
    CStr::from_ptr(s)
        .to_str()
        .map_err(|_| fail(CafdaStatus::InvalidArgument, format!("{what} is not valid UTF-8")))
}

/// The message of the last failed call on this thread, or NULL. The pointer
/// stays valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn cafda_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn cafda_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// The default mixture parameters (0.8, 1.2, 0.001, 0.95).
#[no_mangle]
pub extern "C" fn cafda_params_default() -> CafdaParams {
    let c = CafdaConfig::default();
    CafdaParams {
        k0: c.k0,
        k1: c.k1,
        p_min: c.p_min,
        p_max: c.p_max,
    }
}

/// Release a string returned by this library. NULL is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed already.
#[no_mangle]
pub unsafe extern "C" fn cafda_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Uniform weights over `k` experts. `params` may be NULL for the defaults.
///
/// # Safety
/// `out` must be writable; `params`, when not NULL, must point to a `CafdaParams`.
#[no_mangle]
pub unsafe extern "C" fn cafda_weights_new(k: usize, params: *const CafdaParams, out: *mut *mut CafdaWeights) -> CafdaStatus {
    guard(|| {
        non_null!(out);
        let config: CafdaConfig = if params.is_null() {
            CafdaConfig::default()
        } else {
            (*params).into()
        };
        if let Err(e) = config.validate() {
            return from_core(e);
        }
        match init_weights(k) {
            Ok(weights) => {
                *out = Box::into_raw(Box::new(CafdaWeights { weights, config }));
                CafdaStatus::Ok
            }
            Err(e) => fail(CafdaStatus::InvalidArgument, e.to_string()),
        }
    })
}

/// # Safety
/// `w` must be NULL or a handle from [`cafda_weights_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cafda_weights_free(w: *mut CafdaWeights) {
    if !w.is_null() {
        drop(Box::from_raw(w));
    }
}

/// Number of experts, 0 for NULL.
///
/// # Safety
/// `w` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cafda_weights_len(w: *const CafdaWeights) -> usize {
    w.as_ref().map_or(0, |w| w.weights.len())
}

/// Copy the weights into `buf`, which must hold at least `cap` doubles.
///
/// # Safety
/// `w` must be a live handle; `buf` must be writable for `cap` doubles.
#[no_mangle]
pub unsafe extern "C" fn cafda_weights_copy(w: *const CafdaWeights, buf: *mut f64, cap: usize) -> CafdaStatus {
    guard(|| {
        non_null!(w, buf);
        let src = (&*w).weights.as_slice();
        if cap < src.len() {
            return fail(CafdaStatus::InvalidArgument, format!("buffer holds {cap} values, {} needed", src.len()));
        }
        ptr::copy_nonoverlapping(src.as_ptr(), buf, src.len());
        CafdaStatus::Ok
    })
}

/// Apply the reward of expert `chosen`: positive rewards multiply its weight
/// by `k1`, others by `k0`; all weights are clamped and renormalized.
///
/// # Safety
/// `w` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn cafda_weights_update(w: *mut CafdaWeights, chosen: usize, reward: f64) -> CafdaStatus {
    guard(|| {
        non_null!(w);
        let w = &mut *w;
        match update_weights(&w.weights, chosen, reward, &w.config) {
            Ok(u) => {
                w.weights = u.weights;
                CafdaStatus::Ok
            }
            Err(e) => fail(CafdaStatus::InvalidArgument, e.to_string()),
        }
    })
}

/// Expert selected by the uniform draw `u` in `[0, 1)` (inverse CDF).
///
/// # Safety
/// `w` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cafda_weights_pick(w: *const CafdaWeights, u: f64, out: *mut usize) -> CafdaStatus {
    guard(|| {
        non_null!(w, out);
        if !(0.0..1.0).contains(&u) {
            return fail(CafdaStatus::InvalidArgument, format!("u = {u} is outside [0, 1)"));
        }
        *out = pick_strategy(&(*w).weights, u);
        CafdaStatus::Ok
    })
}

/// Index drawn from the distribution `probs[0..n]` with the uniform draw `u`.
///
/// # Safety
/// `probs` must be readable for `n` doubles and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cafda_sample_index(probs: *const f64, n: usize, u: f64, out: *mut usize) -> CafdaStatus {
    guard(|| {
        non_null!(probs, out);
        if n == 0 || !(0.0..1.0).contains(&u) {
            return fail(CafdaStatus::InvalidArgument, "need n > 0 and u in [0, 1)");
        }
        let probs = std::slice::from_raw_parts(probs, n).to_vec();
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return fail(CafdaStatus::InvalidArgument, "probabilities must be finite and non-negative");
        }
        let advice = AdviceVector {
            row_ids: (0..n).map(RowId).collect(),
            probs,
        };
        match sample_query(&advice, u) {
            Ok(row) => {
                *out = row.0;
                CafdaStatus::Ok
            }
            Err(e) => fail(CafdaStatus::InvalidArgument, e.to_string()),
        }
    })
}

/// Start a run from configuration text (`key = value` lines). `policy` is a
/// strategy name or `"cafda"`; NULL selects the first configured strategy.
///
/// # Safety
/// `config_text` must be a NUL-terminated string, `policy` NULL or one, and
/// `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cafda_run_new(config_text: *const c_char, policy: *const c_char, out: *mut *mut CafdaRun) -> CafdaStatus {
    guard(|| {
        non_null!(config_text, out);
        let text = match utf8(config_text, "config_text") {
            Ok(t) => t,
            Err(s) => return s,
        };
        let config = match RunConfig::from_text(text).and_then(|c| c.validate().map(|_| c)) {
            Ok(c) => c,
            Err(e) => return from_core(e),
        };
        let policy: PolicyKind = if policy.is_null() {
            match config.strategies.first() {
                Some(p) => *p,
                None => return fail(CafdaStatus::InvalidConfig, "`strategies` is empty"),
            }
        } else {
            match utf8(policy, "policy").map(|p| p.parse::<PolicyKind>()) {
                Ok(Ok(p)) => p,
                Ok(Err(e)) => return from_core(e),
                Err(s) => return s,
            }
        };
        let dataset = match config.load_dataset() {
            Ok(d) => Arc::new(d),
            Err(e) => return from_core(e),
        };
        match RunEngine::new(Arc::clone(&dataset), &config, policy) {
            Ok(engine) => {
                *out = Box::into_raw(Box::new(CafdaRun { engine, dataset }));
                CafdaStatus::Ok
            }
            Err(e) => from_core(e),
        }
    })
}

/// # Safety
/// `run` must be NULL or a handle from [`cafda_run_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cafda_run_free(run: *mut CafdaRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}

/// The row to label next and its 1-based step. Repeated calls return the
/// same row until it is answered. Returns `FINISHED` at the end of the run.
///
/// # Safety
/// `run` must be a live handle; `out_row` and `out_t` writable.
#[no_mangle]
pub unsafe extern "C" fn cafda_run_next(run: *mut CafdaRun, out_row: *mut usize, out_t: *mut usize) -> CafdaStatus {
    guard(|| {
        non_null!(run, out_row, out_t);
        match (&mut *run).engine.propose() {
            Ok(Some(p)) => {
                *out_row = p.row_id.0;
                *out_t = p.t;
                CafdaStatus::Ok
            }
            Ok(None) => CafdaStatus::Finished,
            Err(e) => from_core(e),
        }
    })
}

/// Answer the pending row with `label` (0 legit, 1 fraud). `out_reward` and
/// `out_cum_reward` may be NULL.
///
/// # Safety
/// `run` must be a live handle; non-NULL output pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn cafda_run_answer(
    run: *mut CafdaRun,
    label: u8,
    out_reward: *mut f64,
    out_cum_reward: *mut f64,
) -> CafdaStatus {
    guard(|| {
        non_null!(run);
        let Some(label) = Label::from_u8(label) else {
            return fail(CafdaStatus::InvalidArgument, format!("label {label} is not 0 or 1"));
        };
        let run = &mut *run;
        if run.engine.pending().is_none() {
            return fail(CafdaStatus::InvalidArgument, "no row is pending; call cafda_run_next first");
        }
        match run.engine.resolve(label) {
            Ok(rec) => {
                if !out_reward.is_null() {
                    *out_reward = rec.reward;
                }
                if !out_cum_reward.is_null() {
                    *out_cum_reward = rec.cum_reward;
                }
                CafdaStatus::Ok
            }
            Err(e) => from_core(e),
        }
    })
}

/// The dataset's recorded label of `row`, for simulated analysts.
///
/// # Safety
/// `run` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cafda_run_hidden_label(run: *const CafdaRun, row: usize, out: *mut u8) -> CafdaStatus {
    guard(|| {
        non_null!(run, out);
        match (&*run).dataset.labels.label(RowId(row)) {
            Ok(l) => {
                *out = l.as_u8();
                CafdaStatus::Ok
            }
            Err(e) => fail(CafdaStatus::InvalidArgument, e.to_string()),
        }
    })
}

/// Current mixture weights. `*out_len` receives the number of experts (0 for
/// single-strategy runs); nothing is copied when `cap` is too small.
///
/// # Safety
/// `run` must be a live handle, `out_len` writable, and `buf` writable for
/// `cap` doubles (it may be NULL when `cap` is 0).
#[no_mangle]
pub unsafe extern "C" fn cafda_run_weights(run: *const CafdaRun, buf: *mut f64, cap: usize, out_len: *mut usize) -> CafdaStatus {
    guard(|| {
        non_null!(run, out_len);
        let w = (&*run).engine.weights().map_or(&[][..], |w| w.as_slice());
        *out_len = w.len();
        if w.is_empty() {
            return CafdaStatus::Ok;
        }
        if buf.is_null() || cap < w.len() {
            return fail(CafdaStatus::InvalidArgument, format!("buffer holds {cap} values, {} needed", w.len()));
        }
        ptr::copy_nonoverlapping(w.as_ptr(), buf, w.len());
        CafdaStatus::Ok
    })
}

/// Cumulative reward so far, or NaN for NULL.
///
/// # Safety
/// `run` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cafda_run_cum_reward(run: *const CafdaRun) -> f64 {
    run.as_ref().map_or(f64::NAN, |r| r.engine.cum_reward())
}

/// The step log as JSON lines. Release with [`cafda_string_free`].
///
/// # Safety
/// `run` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cafda_run_log_json(run: *const CafdaRun, out: *mut *mut c_char) -> CafdaStatus {
    guard(|| {
        non_null!(run, out);
        let text = log_lines((&*run).engine.records());
        match CString::new(text) {
            Ok(s) => {
                *out = s.into_raw();
                CafdaStatus::Ok
            }
            Err(e) => fail(CafdaStatus::RuntimeError, e.to_string()),
        }
    })
}

/// The run's progress (step, reward, pool sizes, weights) as one JSON object.
///
/// # Safety
/// `run` must be a live handle and `out` writable. Release with [`cafda_string_free`].
#[no_mangle]
pub unsafe extern "C" fn cafda_run_state_json(run: *const CafdaRun, out: *mut *mut c_char) -> CafdaStatus {
    guard(|| {
        non_null!(run, out);
        let e = &(*run).engine;
        let state = serde_json::json!({
            "policy": e.policy().name(),
            "t": e.records().len(),
            "horizon": e.horizon(),
            "cum_reward": e.cum_reward(),
            "n_labeled": e.pool().n_labeled(),
            "n_unlabeled": e.pool().n_unlabeled(),
            "weights": e.weights().map(|w| w.as_slice().to_vec()),
            "finished": e.is_finished(),
        });
        *out = CString::new(state.to_string()).expect("JSON has no NUL").into_raw();
        CafdaStatus::Ok
    })
}
