//! Explicit constants for geometric ergodicity in total variation and for
//! the Wasserstein sampling plan of the constant-preconditioner chain.
//!
//! The drift factor used throughout is
//!
//! ```text
//! λ̃ = (1 + β)(1 - 2γ m m_H + γ² M_H² M²)
//! ```
//!
//! which makes `λ̃ < 1` equivalent to `γ` lying in [`gamma_interval`].

use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::precond::{uniform_in_ball, FixedPreconditioner, Preconditioner};
use crate::targets::TargetSpec;

/// Which definition of the contraction rate `κ` to use.
///
/// `Appendix` (`κ = m m_H`) is the smaller value and yields the longer, safer horizon.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum KappaConvention {
    /// `κ = 2 m m_H`
    Text,
    /// `κ = m m_H`
    #[default]
    Appendix,
}

impl KappaConvention {
    pub fn kappa(self, m: f64, m_h: f64) -> f64 {
        match self {
            KappaConvention::Text => 2.0 * m * m_h,
            KappaConvention::Appendix => m * m_h,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            KappaConvention::Text => "text",
            KappaConvention::Appendix => "appendix",
        }
    }
}

impl fmt::Display for KappaConvention {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for KappaConvention {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "text" => Ok(KappaConvention::Text),
            "appendix" => Ok(KappaConvention::Appendix),
            other => Err(Error::input(format!(
                "unknown kappa convention `{other}` (text|appendix)"
            ))),
        }
    }
}

/// Target and preconditioner constants entering every bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProblemConstants {
    pub m: f64,
    pub big_m: f64,
    pub m_h: f64,
    pub big_m_h: f64,
    pub beta: f64,
    pub dim: usize,
    pub kappa: f64,
    pub kappa_star: f64,
    pub convention: KappaConvention,
}

impl ProblemConstants {
    pub fn new(
        m: f64,
        big_m: f64,
        m_h: f64,
        big_m_h: f64,
        beta: f64,
        dim: usize,
        convention: KappaConvention,
    ) -> Result<Self> {
        if !(m > 0.0 && big_m >= m && big_m.is_finite()) {
            return Err(Error::domain(format!(
                "need 0 < m <= M, got m = {m}, M = {big_m}"
            )));
        }
        if !(m_h > 0.0 && big_m_h >= m_h && big_m_h.is_finite()) {
            return Err(Error::domain(format!(
                "need 0 < m_H <= M_H, got m_H = {m_h}, M_H = {big_m_h}"
            )));
        }
        if !(beta >= 0.0 && beta.is_finite()) {
            return Err(Error::domain(format!(
                "beta must be finite and >= 0, got {beta}"
            )));
        }
        if dim == 0 {
            return Err(Error::input("dimension must be >= 1"));
        }
        let pc = Self {
            m,
            big_m,
            m_h,
            big_m_h,
            beta,
            dim,
            kappa: convention.kappa(m, m_h),
            kappa_star: m_h / big_m_h,
            convention,
        };
        if pc.beta_ratio() >= 1.0 {
            let r = pc.contraction_ratio_sq();
            return Err(Error::Infeasible(format!(
                "beta = {beta} violates beta < r/(1-r) with r = (m_H m / (M_H M))^2 = {r}"
            )));
        }
        Ok(pc)
    }

    pub fn from_parts(
        target: &TargetSpec,
        precond: &Preconditioner,
        convention: KappaConvention,
    ) -> Result<Self> {
        if target.dim() != precond.dim() {
            return Err(Error::input(format!(
                "target dimension {} does not match preconditioner dimension {}",
                target.dim(),
                precond.dim()
            )));
        }
        let b = precond.bounds();
        Self::new(
            target.m(),
            target.big_m(),
            b.min,
            b.max,
            precond.beta(),
            target.dim(),
            convention,
        )
    }

    /// `(m_H m / (M_H M))²`
    fn contraction_ratio_sq(&self) -> f64 {
        let r = self.m_h * self.m / (self.big_m_h * self.big_m);
        r * r
    }

    /// `M_H² M² β / (m_H² m² (1 + β))`; the interval exists iff this is below 1.
    fn beta_ratio(&self) -> f64 {
        self.beta / (self.contraction_ratio_sq() * (1.0 + self.beta))
    }

    /// Centre `m m_H / (M_H² M²)` of the admissible step-size interval.
    fn interval_centre(&self) -> f64 {
        self.m * self.m_h / (self.big_m_h * self.big_m_h * self.big_m * self.big_m)
    }
}

/// Open interval of step sizes with drift factor below one.
///
/// For `β = 0` this is `(0, 2 m m_H / (M_H² M²))`.
pub fn gamma_interval(pc: &ProblemConstants) -> Result<(f64, f64)> {
    let c = pc.interval_centre();
    if pc.beta == 0.0 {
        return Ok((0.0, 2.0 * c));
    }
    let q = pc.beta_ratio();
    if q >= 1.0 {
        return Err(Error::Infeasible(format!(
            "no admissible step size: 1 - M_H²M²β/(m_H²m²(1+β)) = {} <= 0 (beta condition violated)",
            1.0 - q
        )));
    }
    let s = (1.0 - q).sqrt();
    // c(1 - s) written without cancellation
    Ok((c * q / (1.0 + s), c * (1.0 + s)))
}

/// `λ̃(γ)` without any admissibility check.
pub fn drift_factor(pc: &ProblemConstants, gamma: f64) -> f64 {
    let a = pc.m * pc.m_h;
    let b = pc.big_m_h * pc.big_m;
    (1.0 + pc.beta) * (1.0 - 2.0 * gamma * a + gamma * gamma * b * b)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriftConstants {
    pub lambda_tilde: f64,
    pub b: f64,
    /// `b + 1 - λ̃`, the offset for `Ṽ = V + 1`.
    pub b_tilde: f64,
}

pub fn drift_constants(pc: &ProblemConstants, gamma: f64) -> Result<DriftConstants> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::input(format!(
            "step size must be positive, got {gamma}"
        )));
    }
    let lambda_tilde = drift_factor(pc, gamma);
    if lambda_tilde >= 1.0 {
        return Err(Error::Infeasible(format!(
            "gamma = {gamma} gives drift factor {lambda_tilde} >= 1 (outside the admissible interval)"
        )));
    }
    let b = 2.0 * (1.0 + pc.beta) * pc.dim as f64 * gamma;
    Ok(DriftConstants {
        lambda_tilde,
        b,
        b_tilde: b + 1.0 - lambda_tilde,
    })
}

/// The small set `C = {Ṽ <= 2b̃/(α - λ̃)}` and its enclosing ball around `x*`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmallSet {
    pub drift: DriftConstants,
    pub alpha: f64,
    /// `2b̃/(α - λ̃)`
    pub level: f64,
    /// `sqrt(M_H (level - 1))`
    pub radius: f64,
}

impl SmallSet {
    pub fn new(pc: &ProblemConstants, drift: DriftConstants, alpha: f64) -> Result<Self> {
        if !(alpha > drift.lambda_tilde && alpha < 1.0) {
            return Err(Error::domain(format!(
                "alpha = {alpha} must lie in (lambda_tilde, 1) = ({}, 1)",
                drift.lambda_tilde
            )));
        }
        let level = 2.0 * drift.b_tilde / (alpha - drift.lambda_tilde);
        if level < 1.0 {
            return Err(Error::domain(format!("small-set level {level} < 1")));
        }
        Ok(Self {
            drift,
            alpha,
            level,
            radius: (pc.big_m_h * (level - 1.0)).sqrt(),
        })
    }

    /// `α = (1 + λ̃)/2`.
    pub fn default_alpha(drift: &DriftConstants) -> f64 {
        0.5 * (1.0 + drift.lambda_tilde)
    }
}

/// Volume `π^{p/2} R^p / Γ(p/2 + 1)` of a Euclidean ball.
pub fn ball_volume(dim: usize, radius: f64) -> f64 {
    if radius <= 0.0 {
        return 0.0;
    }
    let p = dim as f64;
    (0.5 * p * std::f64::consts::PI.ln() + p * radius.ln() - ln_gamma(0.5 * p + 1.0)).exp()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MuLebEstimate {
    pub value: f64,
    pub std_error: f64,
    pub accepted: usize,
    pub samples: usize,
    pub ball_volume: f64,
    /// Set when the enclosing ball has zero radius.
    pub degenerate: bool,
}

impl MuLebEstimate {
    pub fn acceptance(&self) -> f64 {
        if self.samples == 0 {
            0.0
        } else {
            self.accepted as f64 / self.samples as f64
        }
    }
}

pub const MIN_MU_LEB_SAMPLES: usize = 1000;

/// Rejection estimate of the Lebesgue measure of the small set: uniform
/// draws from the enclosing ball, accepted when `Ṽ(x) <= level`.
pub fn estimate_mu_leb(
    set: &SmallSet,
    target: &TargetSpec,
    precond: &Preconditioner,
    n_samples: usize,
    seed: u64,
) -> Result<MuLebEstimate> {
    if n_samples < MIN_MU_LEB_SAMPLES {
        return Err(Error::input(format!(
            "need at least {MIN_MU_LEB_SAMPLES} samples, got {n_samples}"
        )));
    }
    let p = target.dim();
    if !(set.radius > 0.0) {
        return Ok(MuLebEstimate {
            value: 0.0,
            std_error: 0.0,
            accepted: 0,
            samples: n_samples,
            ball_volume: 0.0,
            degenerate: true,
        });
    }
    let x_star = target.x_star();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut accepted = 0;
    for _ in 0..n_samples {
        let x = uniform_in_ball(&mut rng, x_star, set.radius);
        if precond.weighted_sq_dist(&x, x_star)? + 1.0 <= set.level {
            accepted += 1;
        }
    }
    let vol = ball_volume(p, set.radius);
    let frac = accepted as f64 / n_samples as f64;
    Ok(MuLebEstimate {
        value: frac * vol,
        std_error: vol * (frac * (1.0 - frac) / n_samples as f64).sqrt(),
        accepted,
        samples: n_samples,
        ball_volume: vol,
        degenerate: false,
    })
}

/// Natural log of the explicit minorization constant `η`.
pub fn ln_eta_lower_bound(
    pc: &ProblemConstants,
    set: &SmallSet,
    mu_leb: f64,
    x_star_norm: f64,
) -> Result<f64> {
    if !(mu_leb >= 0.0 && mu_leb.is_finite()) {
        return Err(Error::domain(format!(
            "Lebesgue measure must be finite and >= 0, got {mu_leb}"
        )));
    }
    if !(x_star_norm >= 0.0) {
        return Err(Error::domain("|x*| must be >= 0"));
    }
    let p = pc.dim as f64;
    let spread = set.level - 1.0;
    let curvature = pc.big_m_h / pc.m_h
        + pc.big_m * pc.big_m_h
        + 0.5 * pc.big_m_h * pc.big_m_h * pc.big_m * pc.big_m;
    Ok(mu_leb.ln()
        - 0.5 * p * (2.0 * std::f64::consts::PI * pc.big_m_h).ln()
        - spread * curvature
        - x_star_norm * x_star_norm / pc.m_h
        - pc.big_m * x_star_norm * (pc.big_m_h * spread).sqrt())
}

pub fn eta_lower_bound(
    pc: &ProblemConstants,
    set: &SmallSet,
    mu_leb: f64,
    x_star_norm: f64,
) -> Result<f64> {
    Ok(ln_eta_lower_bound(pc, set, mu_leb, x_star_norm)?.exp())
}

/// The two branches of the rate bound, `((1-η)^r, A^{1-r} B^r)`.
pub fn rho_branches(
    lambda_tilde: f64,
    b_tilde: f64,
    eta: f64,
    r: f64,
    d: f64,
) -> Result<(f64, f64)> {
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::domain(format!("eta must lie in [0, 1], got {eta}")));
    }
    if !(r > 0.0 && r < 1.0) {
        return Err(Error::domain(format!("r must lie in (0, 1), got {r}")));
    }
    if !(d > 0.0 && d.is_finite()) {
        return Err(Error::domain(format!("d must be positive, got {d}")));
    }
    let first = (r * (-eta).ln_1p()).exp();
    let a = (1.0 + 2.0 * b_tilde + lambda_tilde + lambda_tilde * d) / (1.0 + d);
    let b = 1.0 + 2.0 * b_tilde + 2.0 * lambda_tilde * d;
    Ok((first, a.powf(1.0 - r) * b.powf(r)))
}

/// `max{(1-η)^r, ((1+2b̃+λ̃+λ̃d)/(1+d))^{1-r} (1+2b̃+2λ̃d)^r}`.
pub fn rho_bound(lambda_tilde: f64, b_tilde: f64, eta: f64, r: f64, d: f64) -> Result<f64> {
    let (a, b) = rho_branches(lambda_tilde, b_tilde, eta, r, d)?;
    Ok(a.max(b))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RhoPoint {
    pub r: f64,
    pub d: f64,
    pub rho: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RhoGrid {
    pub points: Vec<RhoPoint>,
    pub best: RhoPoint,
}

/// `n` evenly spaced values `i/(n+1)`; `n = 19` gives `0.05, 0.10, ..., 0.95`.
pub fn default_r_grid(n: usize) -> Vec<f64> {
    (1..=n).map(|i| i as f64 / (n + 1) as f64).collect()
}

/// `n` log-spaced values from `1e-2` to `1e4`.
pub fn default_d_grid(n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![1.0],
        _ => (0..n)
            .map(|i| 10f64.powf(-2.0 + 6.0 * i as f64 / (n - 1) as f64))
            .collect(),
    }
}

pub const DEFAULT_R_POINTS: usize = 19;
pub const DEFAULT_D_POINTS: usize = 25;

/// Minimizes the rate bound over the grid; ties keep the lexicographically smallest `(r, d)`.
pub fn rho_grid_search(
    lambda_tilde: f64,
    b_tilde: f64,
    eta: f64,
    r_grid: &[f64],
    d_grid: &[f64],
) -> Result<RhoGrid> {
    if r_grid.is_empty() || d_grid.is_empty() {
        return Err(Error::input("rate grid must be non-empty"));
    }
    let mut rs = r_grid.to_vec();
    let mut ds = d_grid.to_vec();
    rs.sort_by(f64::total_cmp);
    ds.sort_by(f64::total_cmp);
    let mut points = Vec::with_capacity(rs.len() * ds.len());
    for &r in &rs {
        for &d in &ds {
            points.push(RhoPoint {
                r,
                d,
                rho: rho_bound(lambda_tilde, b_tilde, eta, r, d)?,
            });
        }
    }
    let best = points
        .iter()
        .copied()
        .reduce(|best, p| if p.rho < best.rho { p } else { best })
        .expect("grid is non-empty");
    Ok(RhoGrid { points, best })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TvBound {
    /// `M(x) = 2 + b̃/(1-λ̃) + Ṽ(x)`
    pub m_x: f64,
    /// `M(x) ρ^k`
    pub raw: f64,
    /// `min(1, raw)`
    pub clipped: f64,
}

/// Options for [`ErgodicityReport::compute`].
#[derive(Debug, Clone, PartialEq)]
pub struct BoundsOptions {
    /// Defaults to `(1 + λ̃)/2`.
    pub alpha: Option<f64>,
    pub r_grid: Vec<f64>,
    pub d_grid: Vec<f64>,
    pub mc_samples: usize,
    pub seed: u64,
}

impl Default for BoundsOptions {
    fn default() -> Self {
        Self {
            alpha: None,
            r_grid: default_r_grid(DEFAULT_R_POINTS),
            d_grid: default_d_grid(DEFAULT_D_POINTS),
            mc_samples: 100_000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErgodicityReport {
    pub gamma: f64,
    pub interval: (f64, f64),
    pub set: SmallSet,
    pub mu_leb: MuLebEstimate,
    pub eta: f64,
    pub ln_eta: f64,
    pub grid: RhoGrid,
}

impl ErgodicityReport {
    pub fn compute(
        pc: &ProblemConstants,
        target: &TargetSpec,
        precond: &Preconditioner,
        gamma: f64,
        opts: &BoundsOptions,
    ) -> Result<Self> {
        let interval = gamma_interval(pc)?;
        let drift = drift_constants(pc, gamma)?;
        let alpha = opts
            .alpha
            .unwrap_or_else(|| SmallSet::default_alpha(&drift));
        let set = SmallSet::new(pc, drift, alpha)?;
        let mu_leb = estimate_mu_leb(&set, target, precond, opts.mc_samples, opts.seed)?;
        let ln_eta = ln_eta_lower_bound(pc, &set, mu_leb.value, target.x_star().norm())?;
        let eta = ln_eta.exp();
        let grid = rho_grid_search(
            drift.lambda_tilde,
            drift.b_tilde,
            eta,
            &opts.r_grid,
            &opts.d_grid,
        )?;
        Ok(Self {
            gamma,
            interval,
            set,
            mu_leb,
            eta,
            ln_eta,
            grid,
        })
    }

    pub fn lambda_tilde(&self) -> f64 {
        self.set.drift.lambda_tilde
    }

    pub fn b_tilde(&self) -> f64 {
        self.set.drift.b_tilde
    }

    pub fn rho(&self) -> f64 {
        self.grid.best.rho
    }

    pub fn tv_bound(
        &self,
        x: &DVector<f64>,
        k: u64,
        target: &TargetSpec,
        precond: &Preconditioner,
    ) -> Result<TvBound> {
        tv_bound(
            self.lambda_tilde(),
            self.b_tilde(),
            self.rho(),
            x,
            k,
            target,
            precond,
        )
    }
}

/// `M(x) ρ^k` with `Ṽ(x) = (x - x*)ᵀ H⁻¹(x) (x - x*) + 1`.
pub fn tv_bound(
    lambda_tilde: f64,
    b_tilde: f64,
    rho: f64,
    x: &DVector<f64>,
    k: u64,
    target: &TargetSpec,
    precond: &Preconditioner,
) -> Result<TvBound> {
    if x.len() != target.dim() {
        return Err(Error::input("point dimension does not match the target"));
    }
    let v_tilde = precond.weighted_sq_dist(x, target.x_star())? + 1.0;
    let m_x = 2.0 + b_tilde / (1.0 - lambda_tilde) + v_tilde;
    let raw = m_x * rho.powf(k as f64);
    Ok(TvBound {
        m_x,
        raw,
        clipped: raw.min(1.0),
    })
}

/// Horizon, constants and step size guaranteeing `W₂(law(x_K), π) <= ε`.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplingPlan {
    pub epsilon: f64,
    pub kappa: f64,
    pub kappa_star: f64,
    pub convention: KappaConvention,
    pub alpha_exp: f64,
    /// Time horizon `T`; non-positive for a degenerate plan.
    pub horizon: f64,
    pub c_star: f64,
    pub c_const: f64,
    pub gamma_max: f64,
    /// Step size used for `iterations`; `gamma_max` unless overridden.
    pub gamma: f64,
    pub iterations: u64,
    pub x0: DVector<f64>,
    pub note: Option<String>,
}

impl SamplingPlan {
    pub fn is_degenerate(&self) -> bool {
        self.horizon <= 0.0
    }

    /// Re-plans the iteration count for a smaller step size.
    pub fn with_gamma(mut self, gamma: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma <= self.gamma_max) {
            return Err(Error::domain(format!(
                "step size {gamma} must lie in (0, gamma_max = {}]",
                self.gamma_max
            )));
        }
        self.gamma = gamma;
        self.iterations = iterations_for(self.horizon, gamma);
        Ok(self)
    }
}

fn iterations_for(horizon: f64, gamma: f64) -> u64 {
    if horizon <= 0.0 {
        0
    } else {
        (horizon / gamma).ceil() as u64
    }
}

/// `sqrt(1 + u) - 1` without cancellation.
fn sqrt1pm1(u: f64) -> f64 {
    u / ((1.0 + u).sqrt() + 1.0)
}

pub fn plan_sampling(
    pc: &ProblemConstants,
    target: &TargetSpec,
    precond: &FixedPreconditioner,
    x0: &DVector<f64>,
    epsilon: f64,
    alpha_exp: f64,
) -> Result<SamplingPlan> {
    if pc.beta != 0.0 {
        return Err(Error::input(
            "the sampling plan requires a constant preconditioner (beta = 0)",
        ));
    }
    if x0.len() != target.dim() || precond.dim() != target.dim() {
        return Err(Error::input(
            "start point, target and preconditioner dimensions must agree",
        ));
    }
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::input(format!(
            "epsilon must be positive, got {epsilon}"
        )));
    }
    if !(alpha_exp > 0.0 && alpha_exp < 0.5 * pc.kappa) {
        return Err(Error::domain(format!(
            "alpha_exp = {alpha_exp} must lie in (0, kappa/2) = (0, {})",
            0.5 * pc.kappa
        )));
    }
    let moment_gap = 2.0 * pc.m - 4.0 * alpha_exp / pc.m_h;
    if moment_gap <= 0.0 {
        return Err(Error::domain(format!(
            "exponential-moment condition fails: 2m - 4 alpha/m_H = {moment_gap} <= 0"
        )));
    }

    let p = pc.dim as f64;
    let x_star = target.x_star();
    let dist = (x0 - x_star).norm();
    let log_arg =
        (2.0 / epsilon) * (dist / pc.kappa_star.sqrt() + (p / pc.m).sqrt() / pc.kappa_star);
    let horizon = log_arg.ln() / pc.kappa;
    let t = horizon.max(0.0);

    let gap = target.eval_potential(x0)? - target.eval_potential(x_star)?;
    let c_star = pc.big_m_h / 6.0 * gap + 5.0 / 12.0 * pc.big_m_h * pc.big_m_h * pc.big_m * p * t;

    let ln_el0 = alpha_exp * x0.dot(&(precond.inverse() * x0));
    let grad0 = target.eval_gradient(&DVector::zeros(pc.dim))?;
    let drift_term = alpha_exp * grad0.norm_squared() * t / moment_gap;
    let ln_sum = ln_el0 + (drift_term * (-ln_el0).exp()).ln_1p();
    let c_const = pc.big_m_h / alpha_exp * (1.5 + 2.0 * alpha_exp * t * p + ln_sum);

    let gamma_w2 = if c_star > 0.0 {
        sqrt1pm1(2f64.powf(1.5) * epsilon / c_const).powi(4) / (32.0 * c_star)
    } else {
        f64::INFINITY
    };
    let gamma_cap = pc.kappa_star / (pc.big_m * pc.big_m_h);
    let gamma_max = gamma_w2.min(gamma_cap);

    let note = (horizon <= 0.0).then(|| {
        "start is already within epsilon of the target by the continuous-time bound; no iterations needed"
            .to_string()
    });
    Ok(SamplingPlan {
        epsilon,
        kappa: pc.kappa,
        kappa_star: pc.kappa_star,
        convention: pc.convention,
        alpha_exp,
        horizon,
        c_star,
        c_const,
        gamma_max,
        gamma: gamma_max,
        iterations: iterations_for(horizon, gamma_max),
        x0: x0.clone(),
        note,
    })
}
