//! C ABI over `dirquant`.
//!
//! Objects are opaque heap handles released with their `*_free` function.
//! Every fallible call returns a [`DqStatus`]; on failure the message is
//! available from [`dq_last_error`] on the same thread.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use dirquant::gof::{test_null, NullModel};
use dirquant::manova::{pvmf_test, PooledFit, PooledSample, ScoreKind};
use dirquant::models::Family;
use dirquant::rng::stream;
use dirquant::transport::{fit, EmpiricalTransport};
use dirquant::{Error, GridShape, UnitVector};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DqStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    NotUnit = 4,
    Factorization = 5,
    SizeMismatch = 6,
    DegenerateConcentration = 7,
    Parse = 8,
    Numerical = 9,
    Io = 10,
    BufferTooSmall = 11,
    Panic = 12,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DqScore {
    Uniform = 0,
    VmfLocation = 1,
    VmfConcentration = 2,
    VmfLocationConcentration = 3,
    Pvmf = 4,
}

/// A set of unit vectors of common dimension.
pub struct DqSample {
    points: Vec<UnitVector>,
}

/// A fitted empirical transport.
pub struct DqTransport {
    inner: EmpiricalTransport,
}

/// Outcome of a test.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct DqTestResult {
    pub statistic: f64,
    pub critical_value: f64,
    pub p_value: f64,
    pub df: usize,
    pub reject: bool,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> DqStatus {
    match e {
        Error::DimensionMismatch { .. } => DqStatus::DimensionMismatch,
        Error::NotUnit { .. } => DqStatus::NotUnit,
        Error::InvalidArgument(_) => DqStatus::InvalidArgument,
        Error::Factorization { .. } => DqStatus::Factorization,
        Error::SizeMismatch(_) => DqStatus::SizeMismatch,
        Error::DegenerateConcentration(_) => DqStatus::DegenerateConcentration,
        Error::Parse(_) => DqStatus::Parse,
        Error::Numerical(_) => DqStatus::Numerical,
        Error::Io(_) => DqStatus::Io,
    }
}

struct Fail(DqStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> DqStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => DqStatus::Ok,
        Ok(Err(Fail(s, msg))) => {
            set_error(msg);
            s
        }
        Err(_) => {
            set_error("internal panic".into());
            DqStatus::Panic
        }
    }
}

fn null(what: &str) -> Fail {
    Fail(DqStatus::NullPointer, format!("{what} is null"))
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn write_out<T>(out: *mut T, value: T, what: &str) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

unsafe fn fill<T: Copy>(buf: *mut T, len: usize, values: &[T]) -> Result<(), Fail> {
    if len < values.len() {
        return Err(Fail(DqStatus::BufferTooSmall, format!("buffer holds {len}, need {}", values.len())));
    }
    if values.is_empty() {
        return Ok(());
    }
    if buf.is_null() {
        return Err(null("buffer"));
    }
    ptr::copy_nonoverlapping(values.as_ptr(), buf, values.len());
    Ok(())
}

fn shape_or_auto(n_r: usize, n_s: usize, n_0: usize, n: usize, d: usize) -> Result<GridShape, Fail> {
    let shape = if n_r == 0 && n_s == 0 { GridShape::auto(n, d)? } else { GridShape::new(n_r, n_s, n_0)? };
    shape.check_size(n)?;
    Ok(shape)
}

fn boxed<T>(value: T) -> *mut T {
    Box::into_raw(Box::new(value))
}

/// Message of the last failed call on this thread, or NULL. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn dq_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Builds a sample from `n` row-major points of dimension `d`.
///
/// # Safety
/// `coords` must point to `n * d` doubles and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dq_sample_new(coords: *const f64, n: usize, d: usize, out: *mut *mut DqSample) -> DqStatus {
    guard(|| {
        if n == 0 || d < 2 {
            return Err(Fail(DqStatus::InvalidArgument, format!("need n >= 1 and d >= 2, got n={n}, d={d}")));
        }
        let c = slice(coords, n * d, "coords")?;
        let points = c
            .chunks_exact(d)
            .enumerate()
            .map(|(i, row)| UnitVector::new(row.to_vec()).map_err(|e| Fail(status_of(&e), format!("point {i}: {e}"))))
            .collect::<Result<Vec<_>, Fail>>()?;
        write_out(out, boxed(DqSample { points }), "out")
    })
}

/// Draws `n` uniform points on `S^(d-1)`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dq_sample_uniform(n: usize, d: usize, seed: u64, out: *mut *mut DqSample) -> DqStatus {
    guard(|| {
        let points = Family::Uniform { d }.sample(n, &mut stream(seed, "sample", 0))?;
        write_out(out, boxed(DqSample { points }), "out")
    })
}

/// Draws `n` von Mises–Fisher points with location `theta[0..d]`.
///
/// # Safety
/// `theta` must point to `d` doubles and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dq_sample_vmf(
    n: usize,
    theta: *const f64,
    d: usize,
    kappa: f64,
    seed: u64,
    out: *mut *mut DqSample,
) -> DqStatus {
    guard(|| {
        let theta = UnitVector::new(slice(theta, d, "theta")?.to_vec())?;
        let points = Family::vmf(theta, kappa)?.sample(n, &mut stream(seed, "sample", 0))?;
        write_out(out, boxed(DqSample { points }), "out")
    })
}

/// # Safety
/// `s` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn dq_sample_len(s: *const DqSample) -> usize {
    s.as_ref().map_or(0, |s| s.points.len())
}

/// # Safety
/// `s` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn dq_sample_dim(s: *const DqSample) -> usize {
    s.as_ref().and_then(|s| s.points.first()).map_or(0, UnitVector::dim)
}

/// Copies the points row-major into `buf` (capacity `len` doubles).
///
/// # Safety
/// `s` must be a live handle; `buf` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn dq_sample_coords(s: *const DqSample, buf: *mut f64, len: usize) -> DqStatus {
    guard(|| {
        let s = deref(s, "sample")?;
        let flat: Vec<f64> = s.points.iter().flat_map(|p| p.as_slice().iter().copied()).collect();
        fill(buf, len, &flat)
    })
}

/// # Safety
/// `s` must come from a `dq_sample_*` constructor and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn dq_sample_free(s: *mut DqSample) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// Fits the empirical transport to an `(n_r, n_s, n_0)` grid; pass
/// `n_r = n_s = 0` for the default factorization.
///
/// # Safety
/// `s` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn dq_transport_fit(
    s: *const DqSample,
    n_r: usize,
    n_s: usize,
    n_0: usize,
    seed: u64,
    out: *mut *mut DqTransport,
) -> DqStatus {
    guard(|| {
        let s = deref(s, "sample")?;
        let d = s.points.first().map_or(0, UnitVector::dim);
        let shape = shape_or_auto(n_r, n_s, n_0, s.points.len(), d)?;
        let inner = fit(&s.points, shape, seed)?;
        write_out(out, boxed(DqTransport { inner }), "out")
    })
}

/// # Safety
/// `t` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn dq_transport_total_cost(t: *const DqTransport, out: *mut f64) -> DqStatus {
    guard(|| write_out(out, deref(t, "transport")?.inner.total_cost(), "out"))
}

/// Ranks of the observations in input order.
///
/// # Safety
/// `t` must be a live handle; `buf` must hold `len` entries.
#[no_mangle]
pub unsafe extern "C" fn dq_transport_ranks(t: *const DqTransport, buf: *mut usize, len: usize) -> DqStatus {
    guard(|| fill(buf, len, &deref(t, "transport")?.inner.ranks()))
}

/// Signs, row-major `n x d`; zero rows for pole copies.
///
/// # Safety
/// `t` must be a live handle; `buf` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn dq_transport_signs(t: *const DqTransport, buf: *mut f64, len: usize) -> DqStatus {
    guard(|| fill(buf, len, &deref(t, "transport")?.inner.signs().concat()))
}

/// Grid images `F(Z_i)`, row-major `n x d`.
///
/// # Safety
/// `t` must be a live handle; `buf` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn dq_transport_images(t: *const DqTransport, buf: *mut f64, len: usize) -> DqStatus {
    guard(|| {
        let t = deref(t, "transport")?;
        let flat: Vec<f64> = t.inner.images().iter().flat_map(|p| p.as_slice().to_vec()).collect();
        fill(buf, len, &flat)
    })
}

/// # Safety
/// `t` must be a live handle; `buf` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn dq_transport_pole(t: *const DqTransport, buf: *mut f64, len: usize) -> DqStatus {
    guard(|| fill(buf, len, deref(t, "transport")?.inner.pole().as_slice()))
}

/// # Safety
/// `t` must come from `dq_transport_fit` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn dq_transport_free(t: *mut DqTransport) {
    if !t.is_null() {
        drop(Box::from_raw(t));
    }
}

/// Cramér–von Mises test of uniformity with Monte Carlo calibration.
///
/// # Safety
/// `s` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn dq_test_uniformity(
    s: *const DqSample,
    n_r: usize,
    n_s: usize,
    n_0: usize,
    alpha: f64,
    n_mc: usize,
    seed: u64,
    out: *mut DqTestResult,
) -> DqStatus {
    guard(|| {
        let s = deref(s, "sample")?;
        let d = s.points.first().map_or(0, UnitVector::dim);
        let shape = shape_or_auto(n_r, n_s, n_0, s.points.len(), d)?;
        let r = test_null(&s.points, &NullModel::Uniform { d }, shape, alpha, n_mc, seed)?;
        let res = DqTestResult {
            statistic: r.statistic,
            critical_value: r.critical_value,
            p_value: r.p_value,
            df: 0,
            reject: r.reject,
        };
        write_out(out, res, "out")
    })
}

/// Rank-score MANOVA (or pvMF) over `m` groups; `score` is a [`DqScore`] value.
///
/// # Safety
/// `groups` must point to `m` live sample handles and `out` be writable.
#[no_mangle]
pub unsafe extern "C" fn dq_manova(
    groups: *const *const DqSample,
    m: usize,
    score: u32,
    n_r: usize,
    n_s: usize,
    n_0: usize,
    alpha: f64,
    seed: u64,
    out: *mut DqTestResult,
) -> DqStatus {
    guard(|| {
        let handles = slice(groups, m, "groups")?;
        let data =
            handles.iter().map(|&g| deref(g, "group").map(|g| g.points.clone())).collect::<Result<Vec<_>, Fail>>()?;
        let pooled = PooledSample::new(data)?;
        let kind = match score {
            0 => Some(ScoreKind::Uniform),
            1 => Some(ScoreKind::VmfLocation),
            2 => Some(ScoreKind::VmfConcentration),
            3 => Some(ScoreKind::VmfLocationConcentration),
            4 => None,
            _ => return Err(Fail(DqStatus::InvalidArgument, format!("unknown score {score}"))),
        };
        let report = match kind {
            None => pvmf_test(&pooled, alpha)?,
            Some(kind) => {
                let shape = shape_or_auto(n_r, n_s, n_0, pooled.len(), pooled.dim())?;
                PooledFit::new(&pooled, shape, seed)?.test(kind, alpha)?
            }
        };
        let res = DqTestResult {
            statistic: report.q,
            critical_value: report.critical_value,
            p_value: report.p_value,
            df: report.df,
            reject: report.reject,
        };
        write_out(out, res, "out")
    })
}
