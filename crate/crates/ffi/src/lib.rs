//! C ABI for the betaqual engine.
//!
//! Datasets and chains cross the boundary as opaque handles that the caller
//! releases with the matching `_free` function. Every fallible call returns a
//! [`BqStatus`]; on failure the message is available from
//! [`bq_last_error_message`] on the same thread until the next failing call.
//! Panics are caught and reported as [`BqStatus::Panic`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use betaqual::diagnostics::{dic_or_nearest, tail_area_pi0, PlugIn};
use betaqual::io::{load_survey_csv, BoundaryPolicy, RunConfig, ScaleMapping};
use betaqual::model::{moments_to_shape, shape_to_moments, BetaShape, Dataset};
use betaqual::report::cmd_fit;
use betaqual::sampler::{run_chain, Chain, ModelKind, SamplerConfig};
use betaqual::Error;

/// Result code of every fallible call. Zero is success.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BqStatus {
    Ok = 0,
    InvalidInput = 1,
    SupportViolation = 2,
    Boundary = 3,
    Initialization = 4,
    Parse = 5,
    Schema = 6,
    EmptyDataset = 7,
    InfeasibleTruth = 8,
    UndefinedAtMean = 9,
    Io = 10,
    NullPointer = 11,
    InvalidUtf8 = 12,
    BufferTooSmall = 13,
    Panic = 14,
}

/// Which rows a chain is fitted to.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BqModel {
    Joint = 0,
    Period1 = 1,
    Period2 = 2,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BqSamplerConfig {
    pub iterations: u64,
    pub burnin: u64,
    pub thin: u64,
    pub seed: u64,
    pub target_acceptance: f64,
    pub target_acceptance_weights: f64,
    pub adapt_during_burnin: bool,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct BqDic {
    pub dbar: f64,
    pub d_at_mean: f64,
    pub p_d: f64,
    pub dic: f64,
    /// True when the deviance was evaluated at the nearest stored draw
    /// because the posterior mean left the support.
    pub nearest_draw: bool,
}

/// Opaque survey dataset.
pub struct BqDataset(Dataset);

/// Opaque chain of posterior draws.
pub struct BqChain(Chain);

enum Failure {
    Core(Error),
    Null(&'static str),
    Utf8(&'static str),
    Buffer { needed: usize, given: usize },
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

impl Failure {
    fn status(&self) -> BqStatus {
        match self {
            Failure::Core(e) => match e {
                Error::InvalidInput(_) => BqStatus::InvalidInput,
                Error::SupportViolation(_) => BqStatus::SupportViolation,
                Error::Boundary(_) => BqStatus::Boundary,
                Error::Initialization(_) => BqStatus::Initialization,
                Error::Parse { .. } => BqStatus::Parse,
                Error::Schema(_) => BqStatus::Schema,
                Error::EmptyDataset(_) => BqStatus::EmptyDataset,
                Error::InfeasibleTruth(_) => BqStatus::InfeasibleTruth,
                Error::UndefinedAtMean(_) => BqStatus::UndefinedAtMean,
                Error::Io { .. } => BqStatus::Io,
            },
            Failure::Null(_) => BqStatus::NullPointer,
            Failure::Utf8(_) => BqStatus::InvalidUtf8,
            Failure::Buffer { .. } => BqStatus::BufferTooSmall,
        }
    }

    fn message(&self) -> String {
        match self {
            Failure::Core(e) => e.to_string(),
            Failure::Null(arg) => format!("null pointer passed as {arg}"),
            Failure::Utf8(arg) => format!("{arg} is not valid UTF-8"),
            Failure::Buffer { needed, given } => {
                format!("buffer holds {given} values, {needed} needed")
            }
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> BqStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => BqStatus::Ok,
        Ok(Err(failure)) => {
            set_last_error(failure.message());
            failure.status()
        }
        Err(payload) => {
            let text = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".to_string());
            set_last_error(format!("panic: {text}"));
            BqStatus::Panic
        }
    }
}

unsafe fn out_ref<'a, T>(p: *mut T, name: &'static str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or(Failure::Null(name))
}

unsafe fn in_ref<'a, T>(p: *const T, name: &'static str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or(Failure::Null(name))
}

unsafe fn in_slice<'a, T>(p: *const T, len: usize, name: &'static str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Failure::Null(name));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn in_str<'a>(p: *const c_char, name: &'static str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure::Null(name));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Failure::Utf8(name))
}

unsafe fn opt_str<'a>(p: *const c_char, name: &'static str) -> Result<Option<&'a str>, Failure> {
    if p.is_null() {
        Ok(None)
    } else {
        in_str(p, name).map(Some)
    }
}

fn copy_out(values: &[f64], out: *mut f64, len: usize) -> Result<(), Failure> {
    if len < values.len() {
        return Err(Failure::Buffer {
            needed: values.len(),
            given: len,
        });
    }
    if values.is_empty() {
        return Ok(());
    }
    if out.is_null() {
        return Err(Failure::Null("out"));
    }
    // SAFETY: the caller provides `len >= values.len()` writable values.
    unsafe { ptr::copy_nonoverlapping(values.as_ptr(), out, values.len()) };
    Ok(())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn bq_version() -> *const c_char {
    static VERSION: &CStr = match CStr::from_bytes_with_nul(
        concat!(env!("CARGO_PKG_VERSION"), "\0").as_bytes(),
    ) {
        Ok(v) => v,
        Err(_) => c"unknown",
    };
    VERSION.as_ptr()
}

/// Message of the last failure on this thread, or NULL if none occurred.
/// The pointer stays valid until the next failing call on this thread.
#[no_mangle]
pub extern "C" fn bq_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| {
        slot.borrow()
            .as_ref()
            .map_or(ptr::null(), |c| c.as_ptr())
    })
}

/// Converts a beta mean and variance to shape parameters.
///
/// # Safety
/// `a` and `b` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn bq_moments_to_shape(mu: f64, sigma2: f64, a: *mut f64, b: *mut f64) -> BqStatus {
    guard(|| {
        let (a, b) = (out_ref(a, "a")?, out_ref(b, "b")?);
        let shape = moments_to_shape(mu, sigma2)?;
        *a = shape.a;
        *b = shape.b;
        Ok(())
    })
}

/// Converts beta shape parameters to the mean and variance.
///
/// # Safety
/// `mu` and `sigma2` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn bq_shape_to_moments(a: f64, b: f64, mu: *mut f64, sigma2: *mut f64) -> BqStatus {
    guard(|| {
        let (mu, sigma2) = (out_ref(mu, "mu")?, out_ref(sigma2, "sigma2")?);
        let (m, s) = shape_to_moments(BetaShape::new(a, b)?)?;
        *mu = m;
        *sigma2 = s;
        Ok(())
    })
}

/// Builds a dataset from a row-major `n x k` attribute matrix, `n` responses
/// and `n` period labels.
///
/// # Safety
/// `x` must hold `n * k` values, `y` and `period` `n` values each, and `out`
/// must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn bq_dataset_new(
    k: usize,
    n: usize,
    x: *const f64,
    y: *const f64,
    period: *const u8,
    out: *mut *mut BqDataset,
) -> BqStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = ptr::null_mut();
        let cells = n
            .checked_mul(k)
            .ok_or_else(|| Failure::Core(Error::InvalidInput("n * k overflows".into())))?;
        let x = in_slice(x, cells, "x")?.to_vec();
        let y = in_slice(y, n, "y")?.to_vec();
        let period = in_slice(period, n, "period")?.to_vec();
        let data = Dataset::from_flat(k, x, y, period)?;
        *out = Box::into_raw(Box::new(BqDataset(data)));
        Ok(())
    })
}

/// Reads a survey CSV. `scale_mapping` (`endpoint` or `midpoint`) and
/// `boundary_policy` (`drop` or `clamp(eps)`) may be NULL for the defaults.
///
/// # Safety
/// String arguments must be NUL-terminated or NULL where allowed; `out` must
/// be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn bq_dataset_load_csv(
    path: *const c_char,
    scale_mapping: *const c_char,
    boundary_policy: *const c_char,
    out: *mut *mut BqDataset,
) -> BqStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = ptr::null_mut();
        let path = in_str(path, "path")?;
        let mapping = match opt_str(scale_mapping, "scale_mapping")? {
            Some(s) => s.parse::<ScaleMapping>()?,
            None => ScaleMapping::default(),
        };
        let policy = match opt_str(boundary_policy, "boundary_policy")? {
            Some(s) => s.parse::<BoundaryPolicy>()?,
            None => BoundaryPolicy::default(),
        };
        let (data, _) = load_survey_csv(Path::new(path), mapping, policy)?;
        *out = Box::into_raw(Box::new(BqDataset(data)));
        Ok(())
    })
}

/// Number of rows, or 0 for NULL.
///
/// # Safety
/// `data` must be NULL or a live dataset handle.
#[no_mangle]
pub unsafe extern "C" fn bq_dataset_n(data: *const BqDataset) -> usize {
    data.as_ref().map_or(0, |d| d.0.n())
}

/// Number of attributes, or 0 for NULL.
///
/// # Safety
/// `data` must be NULL or a live dataset handle.
#[no_mangle]
pub unsafe extern "C" fn bq_dataset_k(data: *const BqDataset) -> usize {
    data.as_ref().map_or(0, |d| d.0.k())
}

/// Releases a dataset. NULL is ignored.
///
/// # Safety
/// `data` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn bq_dataset_free(data: *mut BqDataset) {
    if !data.is_null() {
        drop(Box::from_raw(data));
    }
}

#[no_mangle]
pub extern "C" fn bq_sampler_config_default() -> BqSamplerConfig {
    let d = SamplerConfig::default();
    BqSamplerConfig {
        iterations: d.iterations as u64,
        burnin: d.burnin as u64,
        thin: d.thin as u64,
        seed: d.seed,
        target_acceptance: d.target_acceptance,
        target_acceptance_weights: d.target_acceptance_weights,
        adapt_during_burnin: d.adapt_during_burnin,
    }
}

fn to_usize(v: u64, name: &str) -> Result<usize, Failure> {
    usize::try_from(v).map_err(|_| Failure::Core(Error::InvalidInput(format!("{name} {v} is too large"))))
}

impl BqSamplerConfig {
    fn to_core(self) -> Result<SamplerConfig, Failure> {
        Ok(SamplerConfig {
            iterations: to_usize(self.iterations, "iterations")?,
            burnin: to_usize(self.burnin, "burnin")?,
            thin: to_usize(self.thin, "thin")?,
            seed: self.seed,
            target_acceptance: self.target_acceptance,
            target_acceptance_weights: self.target_acceptance_weights,
            adapt_during_burnin: self.adapt_during_burnin,
            ..SamplerConfig::default()
        })
    }
}

impl BqModel {
    fn to_core(self) -> ModelKind {
        match self {
            BqModel::Joint => ModelKind::Joint,
            BqModel::Period1 => ModelKind::Separated(1),
            BqModel::Period2 => ModelKind::Separated(2),
        }
    }
}

/// Runs one chain. A NULL `config` uses the defaults.
///
/// # Safety
/// `data` must be a live dataset handle, `config` NULL or valid, `out` valid
/// for writes.
#[no_mangle]
pub unsafe extern "C" fn bq_chain_run(
    data: *const BqDataset,
    model: BqModel,
    config: *const BqSamplerConfig,
    out: *mut *mut BqChain,
) -> BqStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = ptr::null_mut();
        let data = in_ref(data, "data")?;
        let config = match config.as_ref() {
            Some(c) => c.to_core()?,
            None => SamplerConfig::default(),
        };
        let chain = run_chain(&data.0, model.to_core(), &config)?;
        *out = Box::into_raw(Box::new(BqChain(chain)));
        Ok(())
    })
}

/// Number of stored draws, or 0 for NULL.
///
/// # Safety
/// `chain` must be NULL or a live chain handle.
#[no_mangle]
pub unsafe extern "C" fn bq_chain_len(chain: *const BqChain) -> usize {
    chain.as_ref().map_or(0, |c| c.0.len())
}

/// Number of weights `k + 1`, or 0 for NULL.
///
/// # Safety
/// `chain` must be NULL or a live chain handle.
#[no_mangle]
pub unsafe extern "C" fn bq_chain_weight_count(chain: *const BqChain) -> usize {
    chain.as_ref().map_or(0, |c| c.0.weight_count())
}

/// Copies the draws of weight `index` (0-based, the last is the latent
/// weight) into `out`, which must hold at least `bq_chain_len` values.
///
/// # Safety
/// `chain` must be a live chain handle and `out` valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn bq_chain_weight_trace(
    chain: *const BqChain,
    index: usize,
    out: *mut f64,
    len: usize,
) -> BqStatus {
    guard(|| {
        let chain = &in_ref(chain, "chain")?.0;
        if index >= chain.weight_count() {
            return Err(Failure::Core(Error::InvalidInput(format!(
                "weight index {index} out of range for {} weights",
                chain.weight_count()
            ))));
        }
        copy_out(&chain.weight_trace(index), out, len)
    })
}

/// Copies the variance draws into `out`.
///
/// # Safety
/// `chain` must be a live chain handle and `out` valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn bq_chain_sigma2_trace(chain: *const BqChain, out: *mut f64, len: usize) -> BqStatus {
    guard(|| copy_out(&in_ref(chain, "chain")?.0.sigma2_trace(), out, len))
}

/// DIC of a chain on the dataset it was fitted from.
///
/// # Safety
/// `chain` and `data` must be live handles and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn bq_chain_dic(chain: *const BqChain, data: *const BqDataset, out: *mut BqDic) -> BqStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let chain = &in_ref(chain, "chain")?.0;
        let d = dic_or_nearest(chain, &in_ref(data, "data")?.0)?;
        *out = BqDic {
            dbar: d.dbar,
            d_at_mean: d.d_at_mean,
            p_d: d.p_d,
            dic: d.dic,
            nearest_draw: d.plug_in.iter().any(|p| *p != PlugIn::PosteriorMean),
        };
        Ok(())
    })
}

/// Releases a chain. NULL is ignored.
///
/// # Safety
/// `chain` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn bq_chain_free(chain: *mut BqChain) {
    if !chain.is_null() {
        drop(Box::from_raw(chain));
    }
}

/// Tail area of a difference distribution beyond zero.
///
/// # Safety
/// `draws` must hold `n` values and `out` be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn bq_tail_area_pi0(draws: *const f64, n: usize, out: *mut f64) -> BqStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = tail_area_pi0(in_slice(draws, n, "draws")?)?;
        Ok(())
    })
}

/// Runs a full fit from a configuration file of `key = value` lines and
/// writes the result files to its `output_dir`.
///
/// # Safety
/// `config_path` must be a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn bq_fit_config_file(config_path: *const c_char) -> BqStatus {
    guard(|| {
        let config = RunConfig::from_file(Path::new(in_str(config_path, "config_path")?))?;
        cmd_fit(&config)?;
        Ok(())
    })
}
