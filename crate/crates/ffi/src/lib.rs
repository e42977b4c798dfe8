//! C ABI over the simulator's latency model, privacy accountant,
//! importance weights, and language model.
//!
//! Every function returns a [`PflStatus`]. On failure the message is kept
//! in a thread-local slot readable with [`pfl_last_error_message`]. Models
//! are opaque handles created by `pfl_model_new`/`pfl_model_load` and
//! released with `pfl_model_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use pfl_sim::federated::relative_weight;
use pfl_sim::langmodel::{self, init_params, load_checkpoint, save_checkpoint, ModelConfig, ModelParams};
use pfl_sim::population::{latency_estimate, latency_monte_carlo, PopulationConfig};
use pfl_sim::privacy::{calibrate_sigma, default_orders, epsilon_for};
use pfl_sim::Seed;

/// Result code of every call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PflStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    PopulationError = 3,
    PrivacyError = 4,
    ModelError = 5,
    IoError = 6,
    Panic = 7,
}

/// Expected round latency and its closed-form bounds.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PflLatency {
    pub lower: f64,
    pub exact: f64,
    pub upper: f64,
}

/// Opaque language-model handle.
pub struct PflModel {
    params: ModelParams,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

struct Failure(PflStatus, String);

impl From<pfl_sim::population::PopulationError> for Failure {
    fn from(e: pfl_sim::population::PopulationError) -> Self {
        Failure(PflStatus::PopulationError, e.to_string())
    }
}

impl From<pfl_sim::privacy::PrivacyError> for Failure {
    fn from(e: pfl_sim::privacy::PrivacyError) -> Self {
        Failure(PflStatus::PrivacyError, e.to_string())
    }
}

impl From<langmodel::ModelError> for Failure {
    fn from(e: langmodel::ModelError) -> Self {
        let status = match e {
            langmodel::ModelError::Io { .. } => PflStatus::IoError,
            _ => PflStatus::ModelError,
        };
        Failure(status, e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(PflStatus::NullPointer, format!("{what} is null"))
}

fn invalid(msg: impl Into<String>) -> Failure {
    Failure(PflStatus::InvalidArgument, msg.into())
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> PflStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            PflStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            PflStatus::Panic
        }
    }
}

unsafe fn out_ref<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn path_arg(p: *const c_char) -> Result<PathBuf, Failure> {
    if p.is_null() {
        return Err(null("path"));
    }
    CStr::from_ptr(p)
        .to_str()
        .map(PathBuf::from)
        .map_err(|_| invalid("path is not valid UTF-8"))
}

/// Message of the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn pfl_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Round latency for `N` devices, eligible fraction `p`, sampling rate `q`,
/// cohort `C` and arrival rate `lambda`.
///
/// # Safety
/// `out` must be null or point to writable memory for one `PflLatency`.
#[no_mangle]
pub unsafe extern "C" fn pfl_latency(
    population: u64,
    eligible_frac: f64,
    sample_rate: f64,
    cohort: u64,
    rate_lambda: f64,
    out: *mut PflLatency,
) -> PflStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let est = latency_estimate(&PopulationConfig {
            population,
            eligible_frac,
            sample_rate,
            cohort,
            rate_lambda,
        })?;
        *out = PflLatency {
            lower: est.lower,
            exact: est.exact,
            upper: est.upper,
        };
        Ok(())
    })
}

/// Monte Carlo mean and standard error of the round latency.
///
/// # Safety
/// `mean` and `std_error` must be null or writable.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn pfl_latency_monte_carlo(
    population: u64,
    eligible_frac: f64,
    sample_rate: f64,
    cohort: u64,
    rate_lambda: f64,
    trials: u64,
    seed: u64,
    mean: *mut f64,
    std_error: *mut f64,
) -> PflStatus {
    guard(|| {
        let mean = out_ref(mean, "mean")?;
        let std_error = out_ref(std_error, "std_error")?;
        let (m, s) = latency_monte_carlo(
            &PopulationConfig {
                population,
                eligible_frac,
                sample_rate,
                cohort,
                rate_lambda,
            },
            trials as usize,
            seed,
        )?;
        *mean = m;
        *std_error = s;
        Ok(())
    })
}

/// Smallest noise multiplier meeting `(epsilon, delta)` after `rounds`
/// rounds at sampling rate `q`, using the default order grid.
///
/// # Safety
/// `sigma` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn pfl_calibrate_sigma(
    q: f64,
    rounds: u64,
    epsilon: f64,
    delta: f64,
    tol: f64,
    sigma: *mut f64,
) -> PflStatus {
    guard(|| {
        let sigma = out_ref(sigma, "sigma")?;
        *sigma = calibrate_sigma(q, rounds, epsilon, delta, tol, &default_orders())?;
        Ok(())
    })
}

/// ε after `rounds` rounds of the subsampled Gaussian mechanism.
///
/// # Safety
/// `epsilon` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn pfl_epsilon(q: f64, sigma: f64, rounds: u64, delta: f64, epsilon: *mut f64) -> PflStatus {
    guard(|| {
        let epsilon = out_ref(epsilon, "epsilon")?;
        *epsilon = epsilon_for(q, sigma, rounds, delta, &default_orders())?;
        Ok(())
    })
}

/// Relative importance weight from target and source log-likelihoods.
///
/// # Safety
/// `weight` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn pfl_relative_weight(
    log_p_target: f64,
    log_p_source: f64,
    alpha: f64,
    weight: *mut f64,
) -> PflStatus {
    guard(|| {
        let weight = out_ref(weight, "weight")?;
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(invalid(format!("alpha {alpha} not in (0, 1]")));
        }
        if log_p_target.is_nan() || log_p_source.is_nan() {
            return Err(invalid("log-likelihoods must not be NaN"));
        }
        *weight = relative_weight(log_p_target, log_p_source, alpha);
        Ok(())
    })
}

/// Freshly initialized model.
///
/// # Safety
/// `out` must be null or writable; on success it receives a handle that
/// must be released with `pfl_model_free`.
#[no_mangle]
pub unsafe extern "C" fn pfl_model_new(
    vocab_size: u32,
    embed_dim: u32,
    hidden_dim: u32,
    seq_len: u32,
    seed: u64,
    out: *mut *mut PflModel,
) -> PflStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let config = ModelConfig {
            vocab_size: vocab_size as usize,
            embed_dim: embed_dim as usize,
            hidden_dim: hidden_dim as usize,
            seq_len: seq_len as usize,
        };
        let params = init_params(config, Seed(seed))?;
        *out = Box::into_raw(Box::new(PflModel { params }));
        Ok(())
    })
}

/// Loads a checkpoint file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` as for `pfl_model_new`.
#[no_mangle]
pub unsafe extern "C" fn pfl_model_load(path: *const c_char, out: *mut *mut PflModel) -> PflStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let params = load_checkpoint(&path_arg(path)?)?;
        *out = Box::into_raw(Box::new(PflModel { params }));
        Ok(())
    })
}

/// Writes a checkpoint file.
///
/// # Safety
/// `model` must be a live handle; `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn pfl_model_save(model: *const PflModel, path: *const c_char) -> PflStatus {
    guard(|| {
        let model = model.as_ref().ok_or_else(|| null("model"))?;
        save_checkpoint(&path_arg(path)?, &model.params)?;
        Ok(())
    })
}

/// Number of parameters.
///
/// # Safety
/// `model` must be a live handle; `out` null or writable.
#[no_mangle]
pub unsafe extern "C" fn pfl_model_num_params(model: *const PflModel, out: *mut usize) -> PflStatus {
    guard(|| {
        let model = model.as_ref().ok_or_else(|| null("model"))?;
        *out_ref(out, "out")? = model.params.len();
        Ok(())
    })
}

unsafe fn sequences<'a>(model: &PflModel, tokens: *const u32, n_sequences: usize) -> Result<Vec<&'a [u32]>, Failure> {
    if tokens.is_null() {
        return Err(null("tokens"));
    }
    let len = model.params.config.seq_len;
    let flat = std::slice::from_raw_parts(tokens, n_sequences * len);
    Ok(flat.chunks_exact(len).collect())
}

/// Perplexity over `n_sequences` sequences stored row-major in `tokens`
/// (`n_sequences × seq_len` ids).
///
/// # Safety
/// `model` must be a live handle, `tokens` must hold
/// `n_sequences × seq_len` ids, and `out` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn pfl_model_perplexity(
    model: *const PflModel,
    tokens: *const u32,
    n_sequences: usize,
    out: *mut f64,
) -> PflStatus {
    guard(|| {
        let model = model.as_ref().ok_or_else(|| null("model"))?;
        let out = out_ref(out, "out")?;
        let seqs = sequences(model, tokens, n_sequences)?;
        *out = langmodel::perplexity(&model.params, &seqs)?;
        Ok(())
    })
}

/// Weighted mean next-token loss in nats; `weights` has one entry per sequence.
///
/// # Safety
/// As `pfl_model_perplexity`, and `weights` must hold `n_sequences` values.
#[no_mangle]
pub unsafe extern "C" fn pfl_model_loss(
    model: *const PflModel,
    tokens: *const u32,
    n_sequences: usize,
    weights: *const f64,
    out: *mut f64,
) -> PflStatus {
    guard(|| {
        let model = model.as_ref().ok_or_else(|| null("model"))?;
        let out = out_ref(out, "out")?;
        if weights.is_null() {
            return Err(null("weights"));
        }
        let seqs = sequences(model, tokens, n_sequences)?;
        let w = std::slice::from_raw_parts(weights, n_sequences);
        *out = langmodel::forward_nll(&model.params, &seqs, w)?;
        Ok(())
    })
}

/// Releases a model handle. Null is ignored.
///
/// # Safety
/// `model` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pfl_model_free(model: *mut PflModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}
