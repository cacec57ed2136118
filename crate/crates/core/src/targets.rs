//! Strongly convex potentials `g` with Lipschitz gradient, sampled as `π ∝ exp(-g)`.
//!
//! Every target reports its strong-convexity constant `m` and gradient
//! Lipschitz constant `M`; [`TargetSpec`] bundles a potential with those
//! constants and its minimizer.

use std::fmt;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg;

/// Gradient-norm tolerance used when a target's minimizer is located numerically.
pub const DEFAULT_MINIMIZER_TOL: f64 = 1e-10;
const MAX_DESCENT_ITERS: usize = 200_000;

pub trait Potential: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;

    /// `g(x)`; `x` has length [`Potential::dim`].
    fn value(&self, x: &DVector<f64>) -> f64;

    /// Writes `∇g(x)` into `out`.
    fn gradient_into(&self, x: &DVector<f64>, out: &mut DVector<f64>);

    /// `(m, M)` with `m I <= ∇²g <= M I`.
    fn convexity(&self) -> (f64, f64);

    /// Exact minimizer when it is known in closed form.
    fn known_minimizer(&self) -> Option<DVector<f64>> {
        None
    }

    /// Short identifier, e.g. `mixture:a=0.5,0`.
    fn id(&self) -> String;

    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.dim());
        self.gradient_into(x, &mut out);
        out
    }
}

/// `log(1 + e^u)` without overflow.
pub fn softplus(u: f64) -> f64 {
    if u > 0.0 {
        u + (-u).exp().ln_1p()
    } else {
        u.exp().ln_1p()
    }
}

/// `e^u / (1 + e^u)` without overflow.
pub fn sigmoid(u: f64) -> f64 {
    if u >= 0.0 {
        1.0 / (1.0 + (-u).exp())
    } else {
        let e = u.exp();
        e / (1.0 + e)
    }
}

fn format_vec(v: &DVector<f64>) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

/// Symmetric two-component Gaussian mixture `½N(a, I) + ½N(-a, I)` with `|a| < 1`.
#[derive(Debug, Clone)]
pub struct MixtureGaussian {
    a: DVector<f64>,
}

impl MixtureGaussian {
    pub fn new(a: DVector<f64>) -> Result<Self> {
        if a.is_empty() {
            return Err(Error::input("mixture offset `a` must be non-empty"));
        }
        if a.iter().any(|v| !v.is_finite()) {
            return Err(Error::input("mixture offset `a` must be finite"));
        }
        let norm = a.norm();
        if norm >= 1.0 {
            return Err(Error::domain(format!(
                "mixture target needs |a| < 1 for strong convexity, got |a| = {norm}"
            )));
        }
        Ok(Self { a })
    }

    pub fn offset(&self) -> &DVector<f64> {
        &self.a
    }

    /// `I - 4aaᵀ e^{2xᵀa} (1 + e^{2xᵀa})^{-2}`.
    pub fn hessian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let s = sigmoid(2.0 * x.dot(&self.a));
        let p = self.a.len();
        DMatrix::identity(p, p) - (&self.a * self.a.transpose()) * (4.0 * s * (1.0 - s))
    }
}

impl Potential for MixtureGaussian {
    fn dim(&self) -> usize {
        self.a.len()
    }

    fn value(&self, x: &DVector<f64>) -> f64 {
        0.5 * (x - &self.a).norm_squared() - softplus(-2.0 * x.dot(&self.a))
    }

    fn gradient_into(&self, x: &DVector<f64>, out: &mut DVector<f64>) {
        // (1 + e^{2xᵀa})^{-1} = sigmoid(-2xᵀa)
        let w = 2.0 * sigmoid(-2.0 * x.dot(&self.a)) - 1.0;
        out.copy_from(x);
        out.axpy(w, &self.a, 1.0);
    }

    fn convexity(&self) -> (f64, f64) {
        (1.0 - self.a.norm_squared(), 1.0)
    }

    fn known_minimizer(&self) -> Option<DVector<f64>> {
        Some(DVector::zeros(self.a.len()))
    }

    fn id(&self) -> String {
        format!("mixture:a={}", format_vec(&self.a))
    }
}

/// `g(x) = |x|²/2 - λ₁ cos|x|` with `0 < λ₁ < 1`, so `∇g(x) = (1 + λ₁ sin|x|/|x|) x`.
#[derive(Debug, Clone)]
pub struct GaussianCosine {
    lambda1: f64,
    dim: usize,
}

/// Below this radius `sin r / r` is replaced by its limit 1.
const SINC_CUTOFF: f64 = 1e-12;

fn sinc(r: f64) -> f64 {
    if r < SINC_CUTOFF {
        1.0
    } else if r < 1e-4 {
        1.0 - r * r / 6.0
    } else {
        r.sin() / r
    }
}

impl GaussianCosine {
    pub fn new(lambda1: f64, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::input("gaussian-cosine target needs dim >= 1"));
        }
        if !(lambda1 > 0.0 && lambda1 < 1.0) {
            return Err(Error::domain(format!(
                "gaussian-cosine target needs 0 < lambda1 < 1, got {lambda1}"
            )));
        }
        Ok(Self { lambda1, dim })
    }

    pub fn lambda1(&self) -> f64 {
        self.lambda1
    }

    pub fn hessian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let r = x.norm();
        let p = self.dim;
        let tangential = 1.0 + self.lambda1 * sinc(r);
        let mut h = DMatrix::identity(p, p) * tangential;
        if r >= 1e-4 {
            // radial eigenvalue is 1 + λ₁ cos r
            let coef = self.lambda1 * (r.cos() * r - r.sin()) / r.powi(3);
            h += (x * x.transpose()) * coef;
        } else {
            // (r cos r - sin r)/r³ -> -1/3 near the origin
            h -= (x * x.transpose()) * (self.lambda1 / 3.0);
        }
        h
    }
}

impl Potential for GaussianCosine {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, x: &DVector<f64>) -> f64 {
        let r2 = x.norm_squared();
        0.5 * r2 - self.lambda1 * r2.sqrt().cos()
    }

    fn gradient_into(&self, x: &DVector<f64>, out: &mut DVector<f64>) {
        let scale = 1.0 + self.lambda1 * sinc(x.norm());
        out.copy_from(x);
        out.scale_mut(scale);
    }

    fn convexity(&self) -> (f64, f64) {
        (1.0 - self.lambda1, 1.0 + self.lambda1)
    }

    fn known_minimizer(&self) -> Option<DVector<f64>> {
        Some(DVector::zeros(self.dim))
    }

    fn id(&self) -> String {
        format!("gcos:lambda1={},dim={}", self.lambda1, self.dim)
    }
}

/// Bayesian logistic model over path indicators:
/// `y_t | θ ~ Ber(1 / (1 + exp(x_tᵀθ - M_cut)))`, prior `θ_e ~ N(0, σ²)`.
///
/// The potential is the negative log posterior with the normalizing constant set to 0.
#[derive(Debug, Clone)]
pub struct LogisticPath {
    /// `|E| x n`, column `t` is the path indicator `x_t`.
    design: DMatrix<f64>,
    response: Vec<f64>,
    cutoff: f64,
    sigma2: f64,
    lipschitz: f64,
}

impl LogisticPath {
    pub fn new(
        design: DMatrix<f64>,
        response: Vec<bool>,
        cutoff: f64,
        sigma2: f64,
    ) -> Result<Self> {
        if design.nrows() == 0 {
            return Err(Error::input("logistic target needs at least one edge"));
        }
        if design.ncols() != response.len() {
            return Err(Error::input(format!(
                "design has {} observations but response has {}",
                design.ncols(),
                response.len()
            )));
        }
        if !(sigma2 > 0.0 && sigma2.is_finite()) {
            return Err(Error::domain(format!(
                "prior variance must be positive, got {sigma2}"
            )));
        }
        if !cutoff.is_finite() {
            return Err(Error::input("cutoff must be finite"));
        }
        if design.iter().any(|v| !v.is_finite()) {
            return Err(Error::input("design matrix must be finite"));
        }
        let gram_max = if design.ncols() == 0 {
            0.0
        } else {
            let gram = &design * design.transpose();
            let (values, _) = linalg::sym_eigen(&gram, "X Xᵀ")?;
            values[values.len() - 1].max(0.0)
        };
        Ok(Self {
            lipschitz: 1.0 / sigma2 + 0.25 * gram_max,
            response: response
                .into_iter()
                .map(|y| if y { 1.0 } else { 0.0 })
                .collect(),
            design,
            cutoff,
            sigma2,
        })
    }

    /// Parses the edge-list format:
    ///
    /// ```text
    /// edges=4 cutoff=1.5 sigma2=1
    /// 0,2,3;1
    /// 1,3;0
    /// ```
    ///
    /// Edge indices are zero-based. Blank lines and `#` comments are skipped.
    pub fn parse_edge_list(text: &str, source: &Path) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));

        let (hline, header) = lines
            .next()
            .ok_or_else(|| Error::parse(source, 1, "missing header line"))?;
        let (mut edges, mut cutoff, mut sigma2) = (None, None, None);
        for field in header.split_whitespace() {
            let (key, value) = field.split_once('=').ok_or_else(|| {
                Error::parse(source, hline, format!("expected key=value, got `{field}`"))
            })?;
            let bad = |_| Error::parse(source, hline, format!("bad value for `{key}`: `{value}`"));
            match key {
                "edges" => edges = Some(value.parse::<usize>().map_err(|e| bad(e.to_string()))?),
                "cutoff" => cutoff = Some(value.parse::<f64>().map_err(|e| bad(e.to_string()))?),
                "sigma2" => sigma2 = Some(value.parse::<f64>().map_err(|e| bad(e.to_string()))?),
                other => {
                    return Err(Error::parse(
                        source,
                        hline,
                        format!("unknown header key `{other}`"),
                    ));
                }
            }
        }
        let missing = |k: &str| Error::parse(source, hline, format!("header is missing `{k}`"));
        let edges = edges.ok_or_else(|| missing("edges"))?;
        let cutoff = cutoff.ok_or_else(|| missing("cutoff"))?;
        let sigma2 = sigma2.ok_or_else(|| missing("sigma2"))?;
        if edges == 0 {
            return Err(Error::parse(source, hline, "edges must be >= 1"));
        }

        let mut columns: Vec<Vec<usize>> = Vec::new();
        let mut response = Vec::new();
        for (lineno, line) in lines {
            let (path, y) = line
                .split_once(';')
                .ok_or_else(|| Error::parse(source, lineno, "expected `<edges>;<y>`"))?;
            let y = match y.trim() {
                "0" => false,
                "1" => true,
                other => {
                    return Err(Error::parse(
                        source,
                        lineno,
                        format!("response must be 0 or 1, got `{other}`"),
                    ))
                }
            };
            let mut col = Vec::new();
            for tok in path.split(',').map(str::trim).filter(|t| !t.is_empty()) {
                let e: usize = tok
                    .parse()
                    .map_err(|_| Error::parse(source, lineno, format!("bad edge index `{tok}`")))?;
                if e >= edges {
                    return Err(Error::parse(
                        source,
                        lineno,
                        format!("edge {e} out of range 0..{edges}"),
                    ));
                }
                if col.contains(&e) {
                    return Err(Error::parse(
                        source,
                        lineno,
                        format!("edge {e} repeated in path"),
                    ));
                }
                col.push(e);
            }
            columns.push(col);
            response.push(y);
        }

        let mut design = DMatrix::zeros(edges, columns.len());
        for (t, col) in columns.iter().enumerate() {
            for &e in col {
                design[(e, t)] = 1.0;
            }
        }
        Self::new(design, response, cutoff, sigma2)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)?;
        Self::parse_edge_list(&text, path)
    }

    /// Serializes back to the edge-list format.
    pub fn to_edge_list(&self) -> String {
        let mut out = format!(
            "edges={} cutoff={} sigma2={}\n",
            self.design.nrows(),
            self.cutoff,
            self.sigma2
        );
        for (t, y) in self.response.iter().enumerate() {
            let edges: Vec<String> = (0..self.design.nrows())
                .filter(|&e| self.design[(e, t)] != 0.0)
                .map(|e| e.to_string())
                .collect();
            out.push_str(&format!("{};{}\n", edges.join(","), *y as u8));
        }
        out
    }

    pub fn design(&self) -> &DMatrix<f64> {
        &self.design
    }

    pub fn observations(&self) -> usize {
        self.design.ncols()
    }

    pub fn cutoff(&self) -> f64 {
        self.cutoff
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    fn logits(&self, theta: &DVector<f64>) -> DVector<f64> {
        let mut u = self.design.tr_mul(theta);
        u.add_scalar_mut(-self.cutoff);
        u
    }
}

impl Potential for LogisticPath {
    fn dim(&self) -> usize {
        self.design.nrows()
    }

    fn value(&self, theta: &DVector<f64>) -> f64 {
        let u = self.logits(theta);
        let lik: f64 = u
            .iter()
            .zip(&self.response)
            .map(|(&u, &y)| softplus(u) - (1.0 - y) * u)
            .sum();
        lik + theta.norm_squared() / (2.0 * self.sigma2)
    }

    fn gradient_into(&self, theta: &DVector<f64>, out: &mut DVector<f64>) {
        let mut w = self.logits(theta);
        for (w, &y) in w.iter_mut().zip(&self.response) {
            *w = sigmoid(*w) - (1.0 - y);
        }
        out.gemv(1.0, &self.design, &w, 0.0);
        out.axpy(1.0 / self.sigma2, theta, 1.0);
    }

    fn convexity(&self) -> (f64, f64) {
        (1.0 / self.sigma2, self.lipschitz)
    }

    fn known_minimizer(&self) -> Option<DVector<f64>> {
        (self.observations() == 0).then(|| DVector::zeros(self.dim()))
    }

    fn id(&self) -> String {
        format!(
            "logistic:edges={},n={},cutoff={},sigma2={}",
            self.dim(),
            self.observations(),
            self.cutoff,
            self.sigma2
        )
    }
}

/// `g(x) = ½ xᵀ A x` for SPD precision `A`; `π = N(0, A⁻¹)`.
#[derive(Debug, Clone)]
pub struct GaussianTarget {
    precision: DMatrix<f64>,
    m: f64,
    big_m: f64,
}

impl GaussianTarget {
    pub fn new(precision: DMatrix<f64>) -> Result<Self> {
        let (values, _) = linalg::spd_eigen(&precision, "precision matrix")?;
        Ok(Self {
            precision: linalg::symmetrized(&precision, "precision matrix")?,
            m: values[0],
            big_m: values[values.len() - 1],
        })
    }

    pub fn standard(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::input("gaussian target needs dim >= 1"));
        }
        Self::new(DMatrix::identity(dim, dim))
    }

    pub fn precision(&self) -> &DMatrix<f64> {
        &self.precision
    }
}

impl Potential for GaussianTarget {
    fn dim(&self) -> usize {
        self.precision.nrows()
    }

    fn value(&self, x: &DVector<f64>) -> f64 {
        0.5 * x.dot(&(&self.precision * x))
    }

    fn gradient_into(&self, x: &DVector<f64>, out: &mut DVector<f64>) {
        out.gemv(1.0, &self.precision, x, 0.0);
    }

    fn convexity(&self) -> (f64, f64) {
        (self.m, self.big_m)
    }

    fn known_minimizer(&self) -> Option<DVector<f64>> {
        Some(DVector::zeros(self.dim()))
    }

    fn id(&self) -> String {
        let p = self.dim();
        if self.precision == DMatrix::identity(p, p) {
            format!("gaussian:dim={p}")
        } else {
            format!("gaussian:dim={p},precision=custom")
        }
    }
}

/// Gradient descent with step `1/M` from `start` until `|∇g| <= tol`.
pub fn minimize(potential: &dyn Potential, start: DVector<f64>, tol: f64) -> Result<DVector<f64>> {
    if !(tol > 0.0) {
        return Err(Error::input(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    if start.len() != potential.dim() {
        return Err(dimension_mismatch(potential.dim(), start.len()));
    }
    let (_, big_m) = potential.convexity();
    let step = 1.0 / big_m;
    let mut x = start;
    let mut grad = DVector::zeros(x.len());
    for _ in 0..MAX_DESCENT_ITERS {
        potential.gradient_into(&x, &mut grad);
        if grad.norm() <= tol {
            return Ok(x);
        }
        x.axpy(-step, &grad, 1.0);
    }
    potential.gradient_into(&x, &mut grad);
    Err(Error::Convergence {
        iterations: MAX_DESCENT_ITERS,
        grad_norm: grad.norm(),
    })
}

fn dimension_mismatch(expected: usize, got: usize) -> Error {
    Error::input(format!(
        "dimension mismatch: expected {expected}, got {got}"
    ))
}

/// A potential together with its convexity constants and minimizer.
#[derive(Clone)]
pub struct TargetSpec {
    potential: Arc<dyn Potential>,
    m: f64,
    big_m: f64,
    x_star: DVector<f64>,
}

impl fmt::Debug for TargetSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TargetSpec")
            .field("id", &self.potential.id())
            .field("m", &self.m)
            .field("M", &self.big_m)
            .field("x_star", &self.x_star.as_slice())
            .finish()
    }
}

impl TargetSpec {
    pub fn new(potential: impl Potential + 'static) -> Result<Self> {
        Self::from_arc(Arc::new(potential))
    }

    pub fn from_arc(potential: Arc<dyn Potential>) -> Result<Self> {
        let (m, big_m) = potential.convexity();
        if !(m > 0.0 && m.is_finite()) {
            return Err(Error::domain(format!(
                "strong convexity constant must be positive, got {m}"
            )));
        }
        if !(big_m >= m && big_m.is_finite()) {
            return Err(Error::domain(format!(
                "need m <= M, got m = {m}, M = {big_m}"
            )));
        }
        let x_star = match potential.known_minimizer() {
            Some(x) => x,
            None => minimize(
                potential.as_ref(),
                DVector::zeros(potential.dim()),
                DEFAULT_MINIMIZER_TOL,
            )?,
        };
        Ok(Self {
            potential,
            m,
            big_m,
            x_star,
        })
    }

    pub fn dim(&self) -> usize {
        self.potential.dim()
    }

    /// Strong-convexity constant `m`.
    pub fn m(&self) -> f64 {
        self.m
    }

    /// Gradient Lipschitz constant `M`.
    pub fn big_m(&self) -> f64 {
        self.big_m
    }

    pub fn x_star(&self) -> &DVector<f64> {
        &self.x_star
    }

    pub fn potential(&self) -> &dyn Potential {
        self.potential.as_ref()
    }

    pub fn id(&self) -> String {
        self.potential.id()
    }

    fn check_dim(&self, x: &DVector<f64>) -> Result<()> {
        if x.len() != self.dim() {
            return Err(dimension_mismatch(self.dim(), x.len()));
        }
        Ok(())
    }

    pub fn eval_potential(&self, x: &DVector<f64>) -> Result<f64> {
        self.check_dim(x)?;
        Ok(self.potential.value(x))
    }

    pub fn eval_gradient(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_dim(x)?;
        Ok(self.potential.gradient(x))
    }

    /// Gradient descent from the origin; see [`minimize`].
    pub fn find_minimizer(&self, tol: f64) -> Result<DVector<f64>> {
        minimize(self.potential.as_ref(), DVector::zeros(self.dim()), tol)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(xs)
    }

    #[test]
    fn mixture_value_at_origin() {
        let t = TargetSpec::new(MixtureGaussian::new(v(&[0.5, 0.0])).unwrap()).unwrap();
        let g0 = t.eval_potential(&v(&[0.0, 0.0])).unwrap();
        assert_abs_diff_eq!(g0, 0.125 - 2f64.ln(), epsilon = 1e-15);
        assert_abs_diff_eq!(g0, -0.5681471805599453, epsilon = 1e-15);
    }

    #[test]
    fn mixture_gradient_vanishes_at_origin() {
        let mix = MixtureGaussian::new(v(&[0.3, -0.4, 0.2])).unwrap();
        let g = mix.gradient(&v(&[0.0, 0.0, 0.0]));
        assert!(g.norm() < 1e-16);
    }

    #[test]
    fn mixture_rejects_large_offset() {
        assert!(matches!(
            MixtureGaussian::new(v(&[0.8, 0.6])),
            Err(Error::Domain(_))
        ));
        assert!(MixtureGaussian::new(v(&[])).is_err());
    }

    #[test]
    fn mixture_is_stable_far_out() {
        let mix = MixtureGaussian::new(v(&[0.9])).unwrap();
        for x in [-1e3, 1e3] {
            let x = v(&[x]);
            assert!(mix.value(&x).is_finite());
            assert!(mix.gradient(&x).iter().all(|g| g.is_finite()));
        }
    }

    #[test]
    fn gcos_values() {
        let t = TargetSpec::new(GaussianCosine::new(0.5, 3).unwrap()).unwrap();
        assert_eq!(t.eval_potential(&v(&[0.0, 0.0, 0.0])).unwrap(), -0.5);
        let pi = std::f64::consts::PI;
        let x = v(&[pi, 0.0, 0.0]);
        assert_abs_diff_eq!(
            t.eval_potential(&x).unwrap(),
            5.434802200544679,
            epsilon = 1e-12
        );
        let y = v(&[0.0, pi / 2f64.sqrt(), pi / 2f64.sqrt()]);
        assert_abs_diff_eq!(
            t.eval_potential(&y).unwrap(),
            5.434802200544679,
            epsilon = 1e-12
        );
    }

    #[test]
    fn gcos_gradient_is_continuous_at_origin() {
        let gc = GaussianCosine::new(0.5, 2).unwrap();
        assert_eq!(gc.gradient(&v(&[0.0, 0.0])), v(&[0.0, 0.0]));
        let tiny = gc.gradient(&v(&[1e-13, -1e-13]));
        assert!(tiny.norm() < 3e-13);
        let small = gc.gradient(&v(&[1e-6, 0.0]));
        assert_abs_diff_eq!(small[0], 1.5e-6, epsilon = 1e-15);
    }

    #[test]
    fn gcos_rejects_bad_lambda() {
        assert!(GaussianCosine::new(0.0, 2).is_err());
        assert!(GaussianCosine::new(1.0, 2).is_err());
        assert!(GaussianCosine::new(0.5, 0).is_err());
    }

    #[test]
    fn dimension_mismatch_is_input_error() {
        let t = TargetSpec::new(GaussianCosine::new(0.5, 2).unwrap()).unwrap();
        assert!(matches!(t.eval_potential(&v(&[1.0])), Err(Error::Input(_))));
        assert!(matches!(
            t.eval_gradient(&v(&[1.0, 2.0, 3.0])),
            Err(Error::Input(_))
        ));
    }

    #[test]
    fn minimizers_of_symmetric_targets() {
        let t = TargetSpec::new(MixtureGaussian::new(v(&[0.5, 0.0])).unwrap()).unwrap();
        assert!(t.find_minimizer(1e-10).unwrap().norm() < 1e-10);
        let t = TargetSpec::new(GaussianCosine::new(0.7, 4).unwrap()).unwrap();
        assert!(t.find_minimizer(1e-10).unwrap().norm() < 1e-10);
    }

    #[test]
    fn logistic_without_observations_is_gaussian_prior() {
        let lp = LogisticPath::new(DMatrix::zeros(3, 0), vec![], 1.0, 1.0).unwrap();
        assert_eq!(lp.convexity(), (1.0, 1.0));
        let t = TargetSpec::new(lp).unwrap();
        assert_eq!(t.x_star(), &v(&[0.0, 0.0, 0.0]));
        assert_eq!(t.find_minimizer(1e-12).unwrap(), v(&[0.0, 0.0, 0.0]));
    }

    #[test]
    fn logistic_minimizer_found_numerically() {
        let text = "edges=3 cutoff=0.5 sigma2=2\n0,1;1\n1,2;0\n0;1\n2;0\n0,1,2;0\n";
        let lp = LogisticPath::parse_edge_list(text, Path::new("inline")).unwrap();
        let t = TargetSpec::new(lp).unwrap();
        let g = t.eval_gradient(t.x_star()).unwrap();
        assert!(g.norm() <= DEFAULT_MINIMIZER_TOL);
        assert_abs_diff_eq!(t.m(), 0.5);
    }

    #[test]
    fn logistic_lipschitz_uses_gram_spectrum() {
        // X Xᵀ for two identical one-edge paths is [[2]], so M = 1/σ² + 2/4.
        let lp = LogisticPath::new(
            DMatrix::from_element(1, 2, 1.0),
            vec![true, false],
            0.0,
            1.0,
        )
        .unwrap();
        assert_abs_diff_eq!(lp.convexity().1, 1.5, epsilon = 1e-12);
    }

    #[test]
    fn edge_list_round_trip() {
        let text = "edges=4 cutoff=1.5 sigma2=0.5\n0,2,3;1\n;0\n1;1\n";
        let lp = LogisticPath::parse_edge_list(text, Path::new("inline")).unwrap();
        assert_eq!(lp.observations(), 3);
        assert_eq!(lp.design()[(2, 0)], 1.0);
        assert_eq!(lp.design().column(1).sum(), 0.0);
        assert_eq!(lp.to_edge_list(), text);
    }

    #[test]
    fn edge_list_errors_carry_line_numbers() {
        let cases = [
            ("cutoff=1 sigma2=1\n", 1),
            ("edges=2 cutoff=1 sigma2=1\n0,1;2\n", 2),
            ("edges=2 cutoff=1 sigma2=1\n0;1\n5;0\n", 3),
            ("edges=2 cutoff=1 sigma2=1\n\n0,0;1\n", 3),
            ("edges=2 cutoff=1 sigma2=1\n0 1\n", 2),
        ];
        for (text, line) in cases {
            match LogisticPath::parse_edge_list(text, Path::new("f")) {
                Err(Error::Parse { line: l, .. }) => assert_eq!(l, line, "{text:?}"),
                other => panic!("expected parse error for {text:?}, got {other:?}"),
            }
        }
    }

    #[test]
    fn softplus_and_sigmoid_extremes() {
        assert_eq!(softplus(800.0), 800.0);
        assert_eq!(softplus(-800.0), 0.0);
        assert_abs_diff_eq!(softplus(0.0), 2f64.ln());
        assert_eq!(sigmoid(-800.0), 0.0);
        assert_eq!(sigmoid(800.0), 1.0);
        assert_abs_diff_eq!(sigmoid(0.0), 0.5);
    }

    #[test]
    fn gaussian_target_constants() {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 8.0]);
        let t = TargetSpec::new(GaussianTarget::new(a).unwrap()).unwrap();
        assert_abs_diff_eq!(t.m(), 2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(t.big_m(), 8.0, epsilon = 1e-14);
        assert_abs_diff_eq!(
            t.eval_potential(&v(&[1.0, 1.0])).unwrap(),
            5.0,
            epsilon = 1e-14
        );
    }
}
