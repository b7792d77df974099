//! C ABI for spectralflow.
//!
//! Every fallible function returns an [`SfStatus`]. On failure a message is
//! kept per thread and can be read with [`sf_last_error_message`]. Objects are
//! handed out as opaque pointers and must be released with the matching
//! `*_free` function; passing null to a `*_free` function is a no-op.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use num_complex::Complex64;
use spectralflow::ensembles::IndexTerm;
use spectralflow::fractional_noise::{generate_fbm, GaussianPathBatch, HurstParameter, TimeGrid};
use spectralflow::harness::{cmd_simulate, RunConfig};
use spectralflow::laws::{AutoValues, LawId, SpectralLaw};
use spectralflow::matrix::{FrameMatrix, SymMatrix};
use spectralflow::spectra::{
    eigenvalues_frame, ks_distance, wasserstein1, EigenOptions, SpectrumFrame,
};
use spectralflow::stieltjes::{
    dependent_fixed_point, gmp_closed, gsc_closed, DependentKernel, FixedPointConfig,
    SignConvention,
};
use spectralflow::SpectralError;

/// Status codes returned by every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SfStatus {
    Ok = 0,
    InvalidArgument = 1,
    ConfigError = 2,
    NumericalError = 3,
    NullPointer = 4,
    Io = 5,
    Panic = 6,
}

/// Sign convention of the dependent-ensemble fixed point.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SfConvention {
    SelfconsistentMinus = 0,
    PaperPlus = 1,
}

/// A batch of fBm paths sampled on a uniform grid.
pub struct SfPaths(GaussianPathBatch);

/// Sorted eigenvalues of one matrix.
pub struct SfSpectrum(SpectrumFrame);

/// Covariance kernel of a locally dependent ensemble.
pub struct SfKernel(DependentKernel);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure(SfStatus, String);

impl From<SpectralError> for Failure {
    fn from(e: SpectralError) -> Self {
        let status = match e {
            SpectralError::Config(_) => SfStatus::ConfigError,
            SpectralError::Io(_) => SfStatus::Io,
            SpectralError::Domain(_) | SpectralError::Shape(_) => SfStatus::InvalidArgument,
            SpectralError::EmbeddingFailure { .. }
            | SpectralError::IntegrationFailure { .. }
            | SpectralError::NoConvergence { .. } => SfStatus::NumericalError,
        };
        Failure(status, e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(SfStatus::NullPointer, format!("`{what}` is null"))
}

fn invalid(msg: impl Into<String>) -> Failure {
    Failure(SfStatus::InvalidArgument, msg.into())
}

fn call(f: impl FnOnce() -> Result<(), Failure>) -> SfStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SfStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            SfStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| invalid(format!("`{what}` is not UTF-8")))
}

unsafe fn ref_arg<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn out_arg<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn copy_out(src: &[f64], buf: *mut f64, len: usize) -> Result<(), Failure> {
    if buf.is_null() {
        return Err(null("buf"));
    }
    if len < src.len() {
        return Err(invalid(format!("buffer holds {len} values, need {}", src.len())));
    }
    ptr::copy_nonoverlapping(src.as_ptr(), buf, src.len());
    Ok(())
}

/// Message of the last failed call on this thread, or null. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn sf_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn sf_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Sample `count` fBm paths on `steps` uniform steps of `[0, t_end]`.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one pointer.
#[no_mangle]
pub unsafe extern "C" fn sf_fbm_generate(
    hurst: f64,
    t_end: f64,
    steps: usize,
    count: usize,
    seed: u64,
    out: *mut *mut SfPaths,
) -> SfStatus {
    call(|| {
        let out = out_arg(out, "out")?;
        let grid = TimeGrid::new(t_end, steps)?;
        let h = HurstParameter::new(hurst)?;
        let batch = generate_fbm(grid, h, count, seed)?;
        *out = Box::into_raw(Box::new(SfPaths(batch)));
        Ok(())
    })
}

/// Number of paths; 0 for null.
///
/// # Safety
/// `paths` must be null or a live handle from [`sf_fbm_generate`].
#[no_mangle]
pub unsafe extern "C" fn sf_paths_count(paths: *const SfPaths) -> usize {
    paths.as_ref().map_or(0, |p| p.0.count())
}

/// Values per path (`steps + 1`); 0 for null.
///
/// # Safety
/// `paths` must be null or a live handle from [`sf_fbm_generate`].
#[no_mangle]
pub unsafe extern "C" fn sf_paths_width(paths: *const SfPaths) -> usize {
    paths.as_ref().map_or(0, |p| p.0.width())
}

/// Copy all values, path-major, into `buf` of capacity `len`.
///
/// # Safety
/// `paths` must be a live handle and `buf` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn sf_paths_copy(paths: *const SfPaths, buf: *mut f64, len: usize) -> SfStatus {
    call(|| copy_out(ref_arg(paths, "paths")?.0.values(), buf, len))
}

/// # Safety
/// `paths` must be null or a handle not freed before.
#[no_mangle]
pub unsafe extern "C" fn sf_paths_free(paths: *mut SfPaths) {
    if !paths.is_null() {
        drop(Box::from_raw(paths));
    }
}

/// Eigenvalues of a real symmetric `n × n` matrix given row-major.
///
/// # Safety
/// `data` must point to `n * n` readable doubles and `out` to storage for one pointer.
#[no_mangle]
pub unsafe extern "C" fn sf_eigenvalues_sym(
    data: *const f64,
    n: usize,
    out: *mut *mut SfSpectrum,
) -> SfStatus {
    call(|| {
        let out = out_arg(out, "out")?;
        if data.is_null() {
            return Err(null("data"));
        }
        let len = n.checked_mul(n).ok_or_else(|| invalid("matrix too large"))?;
        let values = std::slice::from_raw_parts(data, len).to_vec();
        let m = SymMatrix::from_row_major(n, values, 1e-12)?;
        let ev = eigenvalues_frame(&FrameMatrix::Real(m), EigenOptions::default())?;
        *out = Box::into_raw(Box::new(SfSpectrum(SpectrumFrame::new(0.0, ev)?)));
        Ok(())
    })
}

/// Wrap already computed values (any order) as a spectrum.
///
/// # Safety
/// `values` must point to `len` readable doubles and `out` to storage for one pointer.
#[no_mangle]
pub unsafe extern "C" fn sf_spectrum_from_values(
    values: *const f64,
    len: usize,
    out: *mut *mut SfSpectrum,
) -> SfStatus {
    call(|| {
        let out = out_arg(out, "out")?;
        if values.is_null() {
            return Err(null("values"));
        }
        let v = std::slice::from_raw_parts(values, len).to_vec();
        *out = Box::into_raw(Box::new(SfSpectrum(SpectrumFrame::new(0.0, v)?)));
        Ok(())
    })
}

/// Number of eigenvalues; 0 for null.
///
/// # Safety
/// `s` must be null or a live spectrum handle.
#[no_mangle]
pub unsafe extern "C" fn sf_spectrum_len(s: *const SfSpectrum) -> usize {
    s.as_ref().map_or(0, |s| s.0.len())
}

/// Copy the ascending eigenvalues into `buf` of capacity `len`.
///
/// # Safety
/// `s` must be a live handle and `buf` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn sf_spectrum_copy(s: *const SfSpectrum, buf: *mut f64, len: usize) -> SfStatus {
    call(|| copy_out(ref_arg(s, "spectrum")?.0.eigenvalues(), buf, len))
}

/// # Safety
/// `s` must be null or a handle not freed before.
#[no_mangle]
pub unsafe extern "C" fn sf_spectrum_free(s: *mut SfSpectrum) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

fn literal_law(id: &str) -> Result<SpectralLaw, Failure> {
    let id: LawId = id.parse()?;
    Ok(id.resolve(AutoValues::default())?)
}

/// Kolmogorov–Smirnov distance to a law given by a literal id
/// (`sc:<d>` or `mp:<c>:<sigma>`).
///
/// # Safety
/// `s` must be a live handle, `law_id` a NUL-terminated string, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sf_ks_distance(
    s: *const SfSpectrum,
    law_id: *const c_char,
    out: *mut f64,
) -> SfStatus {
    call(|| {
        let s = ref_arg(s, "spectrum")?;
        let law = literal_law(str_arg(law_id, "law_id")?)?;
        *out_arg(out, "out")? = ks_distance(&s.0, &law);
        Ok(())
    })
}

/// Wasserstein-1 distance to a law given by a literal id.
///
/// # Safety
/// As [`sf_ks_distance`].
#[no_mangle]
pub unsafe extern "C" fn sf_wasserstein1(
    s: *const SfSpectrum,
    law_id: *const c_char,
    out: *mut f64,
) -> SfStatus {
    call(|| {
        let s = ref_arg(s, "spectrum")?;
        let law = literal_law(str_arg(law_id, "law_id")?)?;
        *out_arg(out, "out")? = wasserstein1(&s.0, &law);
        Ok(())
    })
}

/// Semicircle Stieltjes transform `G(z) = ∫ μ(dx)/(z − x)` of scale `d`.
///
/// # Safety
/// `out_re` and `out_im` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sf_gsc(re: f64, im: f64, d: f64, out_re: *mut f64, out_im: *mut f64) -> SfStatus {
    call(|| {
        if !(d > 0.0 && d.is_finite()) {
            return Err(invalid(format!("scale must be positive, got {d}")));
        }
        let g = gsc_closed(Complex64::new(re, im), d);
        *out_arg(out_re, "out_re")? = g.re;
        *out_arg(out_im, "out_im")? = g.im;
        Ok(())
    })
}

/// Marchenko–Pastur Stieltjes transform.
///
/// # Safety
/// `out_re` and `out_im` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sf_gmp(
    re: f64,
    im: f64,
    c: f64,
    sigma: f64,
    out_re: *mut f64,
    out_im: *mut f64,
) -> SfStatus {
    call(|| {
        if !(c > 0.0 && sigma > 0.0 && c.is_finite() && sigma.is_finite()) {
            return Err(invalid("c and sigma must be positive"));
        }
        let g = gmp_closed(Complex64::new(re, im), c, sigma);
        *out_arg(out_re, "out_re")? = g.re;
        *out_arg(out_im, "out_im")? = g.im;
        Ok(())
    })
}

/// Kernel of the index set `{(offsets[2i], offsets[2i+1]) : weights[i]}` at
/// entry spread `d`.
///
/// # Safety
/// `offsets` must point to `2 * len` and `weights` to `len` readable values.
#[no_mangle]
pub unsafe extern "C" fn sf_kernel_new(
    offsets: *const i64,
    weights: *const f64,
    len: usize,
    d: f64,
    out: *mut *mut SfKernel,
) -> SfStatus {
    call(|| {
        let out = out_arg(out, "out")?;
        if offsets.is_null() || weights.is_null() {
            return Err(null("offsets/weights"));
        }
        let off = std::slice::from_raw_parts(offsets, 2 * len);
        let w = std::slice::from_raw_parts(weights, len);
        let terms: Vec<IndexTerm> = (0..len)
            .map(|i| IndexTerm {
                offset: (off[2 * i], off[2 * i + 1]),
                weight: w[i],
            })
            .collect();
        *out = Box::into_raw(Box::new(SfKernel(DependentKernel::new(&terms, d)?)));
        Ok(())
    })
}

/// Largest difference between the raw covariance table and its transpose.
///
/// # Safety
/// `k` must be null or a live kernel handle.
#[no_mangle]
pub unsafe extern "C" fn sf_kernel_asymmetry(k: *const SfKernel) -> f64 {
    k.as_ref().map_or(f64::NAN, |k| k.0.asymmetry)
}

/// # Safety
/// `k` must be null or a handle not freed before.
#[no_mangle]
pub unsafe extern "C" fn sf_kernel_free(k: *mut SfKernel) {
    if !k.is_null() {
        drop(Box::from_raw(k));
    }
}

/// Solve the self-consistent equation at `z` with default iteration
/// settings. Writes `S(z)` (so that `G = −S`) and the iteration count.
///
/// # Safety
/// `k` must be a live handle; the output pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn sf_dependent_fixed_point(
    k: *const SfKernel,
    re: f64,
    im: f64,
    convention: SfConvention,
    s_re: *mut f64,
    s_im: *mut f64,
    iterations: *mut usize,
) -> SfStatus {
    call(|| {
        let k = ref_arg(k, "kernel")?;
        let cfg = FixedPointConfig {
            sign_convention: match convention {
                SfConvention::SelfconsistentMinus => SignConvention::SelfconsistentMinus,
                SfConvention::PaperPlus => SignConvention::PaperPlus,
            },
            ..FixedPointConfig::default()
        };
        let r = dependent_fixed_point(&k.0, Complex64::new(re, im), &cfg)?;
        *out_arg(s_re, "s_re")? = r.s.re;
        *out_arg(s_im, "s_im")? = r.s.im;
        *out_arg(iterations, "iterations")? = r.iterations;
        Ok(())
    })
}

/// Run `simulate` for a JSON configuration, writing into `out_dir`.
/// `workers = 0` uses every core.
///
/// # Safety
/// `config_json` and `out_dir` must be NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn sf_simulate(
    config_json: *const c_char,
    out_dir: *const c_char,
    workers: usize,
) -> SfStatus {
    call(|| {
        let config = RunConfig::from_json(str_arg(config_json, "config_json")?)?;
        let dir = Path::new(str_arg(out_dir, "out_dir")?);
        let mut builder = rayon::ThreadPoolBuilder::new();
        if workers > 0 {
            builder = builder.num_threads(workers);
        }
        let pool = builder
            .build()
            .map_err(|e| Failure(SfStatus::ConfigError, e.to_string()))?;
        pool.install(|| cmd_simulate(&config, dir))?;
        Ok(())
    })
}
