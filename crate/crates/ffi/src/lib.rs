//! C interface to the `plmc` sampler and bound calculators.
//!
//! Objects are opaque handles created by `plmc_*_new`-style constructors and
//! released with the matching `*_free`. Every call returns a [`PlmcStatus`];
//! the message of the most recent failure on the calling thread is available
//! from [`plmc_last_error`]. Matrices are dense and row-major.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use nalgebra::{DMatrix, DVector};
use plmc::precond::build_ar1;
use plmc::sampler::{run_chain_on_stream, ChainConfig, Trajectory};
use plmc::targets::{GaussianCosine, GaussianTarget, LogisticPath, MixtureGaussian, TargetSpec};
use plmc::theory::{self, KappaConvention, ProblemConstants};
use plmc::{Error, FixedPreconditioner, Preconditioner};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlmcStatus {
    Ok = 0,
    InvalidInput = 1,
    Domain = 2,
    Divergence = 3,
    Infeasible = 4,
    Instability = 5,
    Parse = 6,
    Io = 7,
    Convergence = 8,
    NullPointer = 9,
    Panic = 10,
}

impl From<&Error> for PlmcStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::Input(_) => PlmcStatus::InvalidInput,
            Error::Domain(_) => PlmcStatus::Domain,
            Error::Divergence { .. } | Error::ReplicateDivergence { .. } => PlmcStatus::Divergence,
            Error::Infeasible(_) => PlmcStatus::Infeasible,
            Error::Instability { .. } => PlmcStatus::Instability,
            Error::Parse { .. } => PlmcStatus::Parse,
            Error::Io(_) => PlmcStatus::Io,
            Error::Convergence { .. } => PlmcStatus::Convergence,
        }
    }
}

/// Target potential `g` with its convexity constants and minimizer.
pub struct PlmcTarget {
    inner: TargetSpec,
}

pub struct PlmcPreconditioner {
    inner: Preconditioner,
}

pub struct PlmcTrajectory {
    inner: Trajectory,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct PlmcChainConfig {
    pub gamma: f64,
    pub iterations: usize,
    pub seed: u64,
    /// Noise stream; replicate `r` of a batch uses stream `r`.
    pub stream: u64,
    pub record_every: usize,
    pub burn_in: usize,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct PlmcSamplingPlan {
    pub horizon: f64,
    pub c_const: f64,
    pub c_star: f64,
    pub gamma_max: f64,
    pub iterations: u64,
    pub kappa: f64,
    pub kappa_star: f64,
    pub degenerate: bool,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

enum Failure {
    Null(&'static str),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

type FfiResult<T = ()> = Result<T, Failure>;

fn guard(f: impl FnOnce() -> FfiResult) -> PlmcStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => PlmcStatus::Ok,
        Ok(Err(Failure::Null(what))) => {
            set_last_error(format!("null pointer: {what}"));
            PlmcStatus::NullPointer
        }
        Ok(Err(Failure::Lib(e))) => {
            set_last_error(e.to_string());
            PlmcStatus::from(&e)
        }
        Err(_) => {
            set_last_error("internal panic".to_string());
            PlmcStatus::Panic
        }
    }
}

unsafe fn slice<'a>(ptr: *const f64, len: usize, what: &'static str) -> FfiResult<&'a [f64]> {
    if len == 0 {
        return Ok(&[]);
    }
    if ptr.is_null() {
        return Err(Failure::Null(what));
    }
    Ok(std::slice::from_raw_parts(ptr, len))
}

unsafe fn slice_mut<'a>(ptr: *mut f64, len: usize, what: &'static str) -> FfiResult<&'a mut [f64]> {
    if len == 0 {
        return Ok(&mut []);
    }
    if ptr.is_null() {
        return Err(Failure::Null(what));
    }
    Ok(std::slice::from_raw_parts_mut(ptr, len))
}

unsafe fn handle<'a, T>(ptr: *const T, what: &'static str) -> FfiResult<&'a T> {
    ptr.as_ref().ok_or(Failure::Null(what))
}

unsafe fn write_out<T>(out: *mut T, value: T, what: &'static str) -> FfiResult {
    if out.is_null() {
        return Err(Failure::Null(what));
    }
    out.write(value);
    Ok(())
}

unsafe fn square(ptr: *const f64, dim: usize, what: &'static str) -> FfiResult<DMatrix<f64>> {
    let data = slice(ptr, dim * dim, what)?;
    Ok(DMatrix::from_row_slice(dim, dim, data))
}

unsafe fn point(ptr: *const f64, dim: usize, expected: usize) -> FfiResult<DVector<f64>> {
    if dim != expected {
        return Err(Error::Input(format!("point has length {dim}, expected {expected}")).into());
    }
    Ok(DVector::from_column_slice(slice(ptr, dim, "point")?))
}

/// Message of the last failed call on this thread, or NULL. Valid until the next failing call.
#[no_mangle]
pub extern "C" fn plmc_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

fn boxed_target(spec: TargetSpec) -> *mut PlmcTarget {
    Box::into_raw(Box::new(PlmcTarget { inner: spec }))
}

/// # Safety
/// `a` must point to `dim` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn plmc_target_mixture(
    a: *const f64,
    dim: usize,
    out: *mut *mut PlmcTarget,
) -> PlmcStatus {
    guard(|| {
        let a = DVector::from_column_slice(slice(a, dim, "a")?);
        let t = TargetSpec::new(MixtureGaussian::new(a)?)?;
        write_out(out, boxed_target(t), "out")
    })
}

/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn plmc_target_gcos(
    lambda1: f64,
    dim: usize,
    out: *mut *mut PlmcTarget,
) -> PlmcStatus {
    guard(|| {
        let t = TargetSpec::new(GaussianCosine::new(lambda1, dim)?)?;
        write_out(out, boxed_target(t), "out")
    })
}

/// Gaussian target `g(x) = ½ xᵀ A x` with precision `A` (row-major `dim × dim`).
///
/// # Safety
/// `precision` must point to `dim * dim` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn plmc_target_gaussian(
    precision: *const f64,
    dim: usize,
    out: *mut *mut PlmcTarget,
) -> PlmcStatus {
    guard(|| {
        let a = square(precision, dim, "precision")?;
        let t = TargetSpec::new(GaussianTarget::new(a)?)?;
        write_out(out, boxed_target(t), "out")
    })
}

/// Logistic path target read from an edge-list file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn plmc_target_logistic_load(
    path: *const c_char,
    out: *mut *mut PlmcTarget,
) -> PlmcStatus {
    guard(|| {
        if path.is_null() {
            return Err(Failure::Null("path"));
        }
        let path = CStr::from_ptr(path)
            .to_str()
            .map_err(|_| Error::Input("path is not valid UTF-8".into()))?;
        let t = TargetSpec::new(LogisticPath::load(path)?)?;
        write_out(out, boxed_target(t), "out")
    })
}

/// # Safety
/// `target` must come from a `plmc_target_*` constructor or be NULL.
#[no_mangle]
pub unsafe extern "C" fn plmc_target_free(target: *mut PlmcTarget) {
    if !target.is_null() {
        drop(Box::from_raw(target));
    }
}

/// # Safety
/// `target` must be a live handle or NULL (returns 0).
#[no_mangle]
pub unsafe extern "C" fn plmc_target_dim(target: *const PlmcTarget) -> usize {
    target.as_ref().map_or(0, |t| t.inner.dim())
}

/// Strong convexity `m`, gradient Lipschitz constant `M` and the minimizer (`dim` doubles).
///
/// # Safety
/// Output pointers must be writable; `x_star` must hold `dim` doubles.
#[no_mangle]
pub unsafe extern "C" fn plmc_target_constants(
    target: *const PlmcTarget,
    m: *mut f64,
    big_m: *mut f64,
    x_star: *mut f64,
    dim: usize,
) -> PlmcStatus {
    guard(|| {
        let t = &handle(target, "target")?.inner;
        if dim != t.dim() {
            return Err(
                Error::Input(format!("buffer has length {dim}, expected {}", t.dim())).into(),
            );
        }
        slice_mut(x_star, dim, "x_star")?.copy_from_slice(t.x_star().as_slice());
        write_out(m, t.m(), "m")?;
        write_out(big_m, t.big_m(), "big_m")
    })
}

/// # Safety
/// `x` must hold `dim` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn plmc_target_potential(
    target: *const PlmcTarget,
    x: *const f64,
    dim: usize,
    out: *mut f64,
) -> PlmcStatus {
    guard(|| {
        let t = &handle(target, "target")?.inner;
        let x = point(x, dim, t.dim())?;
        write_out(out, t.eval_potential(&x)?, "out")
    })
}

/// # Safety
/// `x` and `grad` must each hold `dim` doubles.
#[no_mangle]
pub unsafe extern "C" fn plmc_target_gradient(
    target: *const PlmcTarget,
    x: *const f64,
    dim: usize,
    grad: *mut f64,
) -> PlmcStatus {
    guard(|| {
        let t = &handle(target, "target")?.inner;
        let x = point(x, dim, t.dim())?;
        let g = t.eval_gradient(&x)?;
        slice_mut(grad, dim, "grad")?.copy_from_slice(g.as_slice());
        Ok(())
    })
}

fn boxed_precond(p: Preconditioner) -> *mut PlmcPreconditioner {
    Box::into_raw(Box::new(PlmcPreconditioner { inner: p }))
}

/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn plmc_precond_identity(
    dim: usize,
    out: *mut *mut PlmcPreconditioner,
) -> PlmcStatus {
    guard(|| {
        write_out(
            out,
            boxed_precond(FixedPreconditioner::identity(dim)?.into()),
            "out",
        )
    })
}

/// AR(1) correlation matrix `H_ij = rho^|i-j|`, `|rho| < 1`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn plmc_precond_ar1(
    rho: f64,
    dim: usize,
    out: *mut *mut PlmcPreconditioner,
) -> PlmcStatus {
    guard(|| write_out(out, boxed_precond(build_ar1(rho, dim)?.into()), "out"))
}

/// # Safety
/// `h` must point to `dim * dim` doubles (row-major); `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn plmc_precond_dense(
    h: *const f64,
    dim: usize,
    out: *mut *mut PlmcPreconditioner,
) -> PlmcStatus {
    guard(|| {
        let h = square(h, dim, "h")?;
        write_out(
            out,
            boxed_precond(FixedPreconditioner::new(h)?.into()),
            "out",
        )
    })
}

/// # Safety
/// `precond` must come from a `plmc_precond_*` constructor or be NULL.
#[no_mangle]
pub unsafe extern "C" fn plmc_precond_free(precond: *mut PlmcPreconditioner) {
    if !precond.is_null() {
        drop(Box::from_raw(precond));
    }
}

/// Extreme eigenvalues `m_H`, `M_H`.
///
/// # Safety
/// Output pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn plmc_precond_bounds(
    precond: *const PlmcPreconditioner,
    min: *mut f64,
    max: *mut f64,
) -> PlmcStatus {
    guard(|| {
        let b = handle(precond, "precond")?.inner.bounds();
        write_out(min, b.min, "min")?;
        write_out(max, b.max, "max")
    })
}

/// Runs one chain from `x0`.
///
/// # Safety
/// Handles must be live; `config` must be readable; `x0` must hold `dim` doubles.
#[no_mangle]
pub unsafe extern "C" fn plmc_run_chain(
    target: *const PlmcTarget,
    precond: *const PlmcPreconditioner,
    config: *const PlmcChainConfig,
    x0: *const f64,
    dim: usize,
    out: *mut *mut PlmcTrajectory,
) -> PlmcStatus {
    guard(|| {
        let t = &handle(target, "target")?.inner;
        let p = &handle(precond, "precond")?.inner;
        let c = *handle(config, "config")?;
        let x0 = point(x0, dim, t.dim())?;
        let cfg = ChainConfig::new(c.gamma, c.iterations, x0, c.seed)
            .with_burn_in(c.burn_in)
            .with_record_every(c.record_every);
        let traj = run_chain_on_stream(t, p, &cfg, c.stream)?;
        write_out(
            out,
            Box::into_raw(Box::new(PlmcTrajectory { inner: traj })),
            "out",
        )
    })
}

/// # Safety
/// `traj` must be a live handle or NULL (returns 0).
#[no_mangle]
pub unsafe extern "C" fn plmc_trajectory_rows(traj: *const PlmcTrajectory) -> usize {
    traj.as_ref().map_or(0, |t| t.inner.len())
}

/// # Safety
/// `traj` must be a live handle or NULL (returns 0).
#[no_mangle]
pub unsafe extern "C" fn plmc_trajectory_dim(traj: *const PlmcTrajectory) -> usize {
    traj.as_ref().map_or(0, |t| t.inner.dim())
}

/// Copies the recorded states row-major into `out` (`rows * dim` doubles).
///
/// # Safety
/// `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn plmc_trajectory_copy_states(
    traj: *const PlmcTrajectory,
    out: *mut f64,
    len: usize,
) -> PlmcStatus {
    guard(|| {
        let t = &handle(traj, "traj")?.inner;
        let (rows, dim) = (t.len(), t.dim());
        if len != rows * dim {
            return Err(
                Error::Input(format!("buffer has length {len}, expected {}", rows * dim)).into(),
            );
        }
        let dst = slice_mut(out, len, "out")?;
        for i in 0..rows {
            for j in 0..dim {
                dst[i * dim + j] = t.states[(i, j)];
            }
        }
        Ok(())
    })
}

/// # Safety
/// `traj` must come from [`plmc_run_chain`] or be NULL.
#[no_mangle]
pub unsafe extern "C" fn plmc_trajectory_free(traj: *mut PlmcTrajectory) {
    if !traj.is_null() {
        drop(Box::from_raw(traj));
    }
}

unsafe fn constants<'a>(
    target: *const PlmcTarget,
    precond: *const PlmcPreconditioner,
    convention: KappaConvention,
) -> FfiResult<(&'a TargetSpec, &'a Preconditioner, ProblemConstants)> {
    let t = &handle(target, "target")?.inner;
    let p = &handle(precond, "precond")?.inner;
    let pc = ProblemConstants::from_parts(t, p, convention)?;
    Ok((t, p, pc))
}

/// Open interval of step sizes with drift factor below one.
///
/// # Safety
/// Handles must be live; output pointers writable.
#[no_mangle]
pub unsafe extern "C" fn plmc_gamma_interval(
    target: *const PlmcTarget,
    precond: *const PlmcPreconditioner,
    lo: *mut f64,
    hi: *mut f64,
) -> PlmcStatus {
    guard(|| {
        let (_, _, pc) = constants(target, precond, KappaConvention::default())?;
        let (a, b) = theory::gamma_interval(&pc)?;
        write_out(lo, a, "lo")?;
        write_out(hi, b, "hi")
    })
}

/// Rate bound at `(r, d)` given drift and minorization constants.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn plmc_rho_bound(
    lambda_tilde: f64,
    b_tilde: f64,
    eta: f64,
    r: f64,
    d: f64,
    out: *mut f64,
) -> PlmcStatus {
    guard(|| {
        write_out(
            out,
            theory::rho_bound(lambda_tilde, b_tilde, eta, r, d)?,
            "out",
        )
    })
}

/// W2 sampling plan with `κ = m m_H`. A non-positive `alpha_exp` selects `κ/4`.
///
/// # Safety
/// Handles must be live; `x0` must hold `dim` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn plmc_plan_sampling(
    target: *const PlmcTarget,
    precond: *const PlmcPreconditioner,
    x0: *const f64,
    dim: usize,
    epsilon: f64,
    alpha_exp: f64,
    out: *mut PlmcSamplingPlan,
) -> PlmcStatus {
    guard(|| {
        let (t, p, pc) = constants(target, precond, KappaConvention::Appendix)?;
        let fixed = p
            .as_fixed()
            .ok_or_else(|| Error::Input("plan requires a constant preconditioner".into()))?;
        let x0 = point(x0, dim, t.dim())?;
        let alpha = if alpha_exp > 0.0 {
            alpha_exp
        } else {
            pc.kappa / 4.0
        };
        let plan = theory::plan_sampling(&pc, t, fixed, &x0, epsilon, alpha)?;
        write_out(
            out,
            PlmcSamplingPlan {
                horizon: plan.horizon,
                c_const: plan.c_const,
                c_star: plan.c_star,
                gamma_max: plan.gamma_max,
                iterations: plan.iterations,
                kappa: plan.kappa,
                kappa_star: plan.kappa_star,
                degenerate: plan.is_degenerate(),
            },
            "out",
        )
    })
}
