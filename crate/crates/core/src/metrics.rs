//! Distances between samples and Gaussians, plus exact laws of the chain on
//! Gaussian targets.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{check_square, spd_eigen, spectral_map};
use crate::precond::sqrt_spd;

fn sorted(values: &[f64]) -> Result<Vec<f64>> {
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::input("sample contains non-finite values"));
    }
    let mut out = values.to_vec();
    out.sort_by(f64::total_cmp);
    Ok(out)
}

/// Exact W2 between two empirical measures on the line.
///
/// Inputs need not be sorted. Unequal sizes are handled by integrating the
/// squared quantile difference over the merged breakpoints `i/n ∪ j/m`.
pub fn w2_empirical_1d(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::input("W2 needs non-empty samples"));
    }
    let a = sorted(a)?;
    let b = sorted(b)?;
    let (n, m) = (a.len(), b.len());
    if n == m {
        let ss: f64 = a.iter().zip(&b).map(|(x, y)| (x - y) * (x - y)).sum();
        return Ok((ss / n as f64).sqrt());
    }
    // walk the quantile functions in integer units of 1/(n m)
    let (mut i, mut j) = (0, 0);
    let (mut a_end, mut b_end) = (m, n);
    let mut pos = 0;
    let mut acc = 0.0;
    while i < n && j < m {
        let next = a_end.min(b_end);
        let diff = a[i] - b[j];
        acc += (next - pos) as f64 * diff * diff;
        pos = next;
        if a_end == next {
            i += 1;
            a_end += m;
        }
        if b_end == next {
            j += 1;
            b_end += n;
        }
    }
    Ok((acc / (n * m) as f64).sqrt())
}

/// `√(|m1 - m2|² + tr(S1 + S2 - 2 (S2^{1/2} S1 S2^{1/2})^{1/2}))`.
pub fn w2_gaussian(
    m1: &DVector<f64>,
    s1: &DMatrix<f64>,
    m2: &DVector<f64>,
    s2: &DMatrix<f64>,
) -> Result<f64> {
    let p = m1.len();
    if m2.len() != p || s1.nrows() != p || s2.nrows() != p {
        return Err(Error::input("Gaussian dimensions do not agree"));
    }
    spd_eigen(s1, "first covariance")?;
    let root2 = sqrt_spd(s2)?;
    let cross = sqrt_spd(&(&root2 * s1 * &root2))?;
    let bures = (s1.trace() + s2.trace() - 2.0 * cross.trace()).max(0.0);
    Ok(((m1 - m2).norm_squared() + bures).sqrt())
}

/// Whitened spectrum of `H^{1/2} A H^{1/2}` and the matrix `H^{1/2}`.
struct LinearChain {
    root: DMatrix<f64>,
    root_inv: DMatrix<f64>,
    values: DVector<f64>,
    vectors: DMatrix<f64>,
}

impl LinearChain {
    fn new(a: &DMatrix<f64>, h: &DMatrix<f64>) -> Result<Self> {
        check_square(a, "precision matrix")?;
        if h.nrows() != a.nrows() || h.ncols() != a.ncols() {
            return Err(Error::input(
                "precision and preconditioner dimensions do not agree",
            ));
        }
        spd_eigen(a, "precision matrix")?;
        let (hv, hq) = spd_eigen(h, "preconditioner")?;
        let root = spectral_map(&hv, &hq, f64::sqrt);
        let root_inv = spectral_map(&hv, &hq, |l| l.sqrt().recip());
        let (values, vectors) = spd_eigen(&(&root * a * &root), "whitened precision")?;
        Ok(Self {
            root,
            root_inv,
            values,
            vectors,
        })
    }

    fn spectral_radius(&self, gamma: f64) -> f64 {
        self.values
            .iter()
            .fold(0.0_f64, |acc, &l| acc.max((1.0 - gamma * l).abs()))
    }
}

/// Largest `|1 - γλ|` over the eigenvalues of `HA`.
pub fn iteration_spectral_radius(a: &DMatrix<f64>, h: &DMatrix<f64>, gamma: f64) -> Result<f64> {
    Ok(LinearChain::new(a, h)?.spectral_radius(gamma))
}

pub const LYAPUNOV_TOL: f64 = 1e-12;
const LYAPUNOV_MAX_DOUBLINGS: usize = 64;

/// Stationary covariance of `x ↦ (I - γHA)x + √(2γ) H^{1/2} ξ`, the solution
/// of `Σ = BΣBᵀ + 2γH`.
///
/// Iterates `Σ ← Σ + B_t Σ B_tᵀ`, `B_{t+1} = B_t²`, so step `t` holds the
/// first `2^t` terms of the series.
pub fn stationary_covariance_oracle(
    a: &DMatrix<f64>,
    h: &DMatrix<f64>,
    gamma: f64,
) -> Result<DMatrix<f64>> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::input(format!(
            "step size must be positive, got {gamma}"
        )));
    }
    let chain = LinearChain::new(a, h)?;
    let radius = chain.spectral_radius(gamma);
    if radius >= 1.0 {
        return Err(Error::Instability {
            spectral_radius: radius,
        });
    }
    let p = a.nrows();
    let mut power = DMatrix::identity(p, p) - gamma * h * a;
    let mut sigma = 2.0 * gamma * h;
    for _ in 0..LYAPUNOV_MAX_DOUBLINGS {
        let increment = &power * &sigma * power.transpose();
        sigma += &increment;
        if increment.norm() <= LYAPUNOV_TOL * sigma.norm().max(1.0) {
            break;
        }
        power = &power * &power;
    }
    Ok((&sigma + sigma.transpose()) * 0.5)
}

/// `‖Σ - BΣBᵀ - 2γH‖_F`.
pub fn lyapunov_residual(
    sigma: &DMatrix<f64>,
    a: &DMatrix<f64>,
    h: &DMatrix<f64>,
    gamma: f64,
) -> f64 {
    let p = a.nrows();
    let b = DMatrix::identity(p, p) - gamma * h * a;
    (sigma - &b * sigma * b.transpose() - 2.0 * gamma * h).norm()
}

/// Exact mean and covariance of `x_k` for the chain on `g(x) = ½xᵀAx` started at `x0`.
pub fn gaussian_chain_law(
    a: &DMatrix<f64>,
    h: &DMatrix<f64>,
    gamma: f64,
    x0: &DVector<f64>,
    k: u64,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::input(format!(
            "step size must be positive, got {gamma}"
        )));
    }
    if x0.len() != a.nrows() {
        return Err(Error::input(
            "start point dimension does not match the precision matrix",
        ));
    }
    let chain = LinearChain::new(a, h)?;
    let kf = k as f64;
    let n = chain.values.len();
    let mut mean_scale = DVector::zeros(n);
    let mut cov_scale = DVector::zeros(n);
    for (i, &lam) in chain.values.iter().enumerate() {
        let step = gamma * lam;
        let d = 1.0 - step;
        // |d|^k without pow on values near one
        let log_abs = if step < 1.0 {
            (-step).ln_1p()
        } else {
            d.abs().ln()
        };
        let abs_pow = (kf * log_abs).exp();
        mean_scale[i] = if d < 0.0 && k % 2 == 1 {
            -abs_pow
        } else {
            abs_pow
        };
        let one_minus_d2 = step * (2.0 - step);
        cov_scale[i] = if one_minus_d2 == 0.0 {
            2.0 * gamma * kf
        } else {
            let d2k = (2.0 * kf * log_abs).exp();
            2.0 * gamma * (1.0 - d2k) / one_minus_d2
        };
    }
    let q = &chain.vectors;
    let mean = &chain.root
        * q
        * DVector::from_iterator(
            n,
            (q.transpose() * &chain.root_inv * x0)
                .iter()
                .zip(mean_scale.iter())
                .map(|(c, s)| c * s),
        );
    let mut scaled = q.clone();
    for (j, s) in cov_scale.iter().enumerate() {
        scaled.column_mut(j).scale_mut(*s);
    }
    let inner = scaled * q.transpose();
    let cov = &chain.root * inner * &chain.root;
    Ok((mean, (&cov + cov.transpose()) * 0.5))
}

/// Bin counts over `[lo, hi]`; the right edge falls in the last bin.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    pub counts: Vec<usize>,
}

impl Histogram {
    pub fn new(values: &[f64], bins: usize, range: (f64, f64)) -> Result<Self> {
        let (lo, hi) = range;
        if bins < 2 {
            return Err(Error::input(format!("need at least 2 bins, got {bins}")));
        }
        if !(lo.is_finite() && hi.is_finite() && hi > lo) {
            return Err(Error::input(format!(
                "invalid histogram range [{lo}, {hi}]"
            )));
        }
        let width = (hi - lo) / bins as f64;
        let mut counts = vec![0; bins];
        for &v in values {
            if !(v >= lo && v <= hi) {
                return Err(Error::input(format!(
                    "value {v} outside histogram range [{lo}, {hi}]"
                )));
            }
            let idx = (((v - lo) / width) as usize).min(bins - 1);
            counts[idx] += 1;
        }
        Ok(Self { lo, hi, counts })
    }

    pub fn bins(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    pub fn edges(&self) -> Vec<f64> {
        let w = (self.hi - self.lo) / self.bins() as f64;
        (0..=self.bins()).map(|i| self.lo + w * i as f64).collect()
    }

    pub fn to_csv(&self) -> String {
        let edges = self.edges();
        let mut out = String::from("bin,lo,hi,count\n");
        for (i, c) in self.counts.iter().enumerate() {
            out.push_str(&format!("{i},{:e},{:e},{c}\n", edges[i], edges[i + 1]));
        }
        out
    }
}

/// Smallest interval containing every value of both samples, widened when degenerate.
pub fn common_range(a: &[f64], b: &[f64]) -> Result<(f64, f64)> {
    let all = a.iter().chain(b);
    let (lo, hi) = all.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
        (lo.min(v), hi.max(v))
    });
    if !(lo.is_finite() && hi.is_finite()) {
        return Err(Error::input("samples must be non-empty and finite"));
    }
    if hi > lo {
        Ok((lo, hi))
    } else {
        Ok((lo - 0.5, hi + 0.5))
    }
}

/// `½ Σ |p̂_i - q̂_i|` over shared bins.
pub fn tv_histogram(a: &[f64], b: &[f64], bins: usize, range: Option<(f64, f64)>) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::input("TV needs non-empty samples"));
    }
    let range = match range {
        Some(r) => r,
        None => common_range(a, b)?,
    };
    let ha = Histogram::new(a, bins, range)?;
    let hb = Histogram::new(b, bins, range)?;
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let tv = 0.5
        * ha.counts
            .iter()
            .zip(&hb.counts)
            .map(|(&x, &y)| (x as f64 / na - y as f64 / nb).abs())
            .sum::<f64>();
    Ok(tv.min(1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;
    use rand_distr::StandardNormal;

    fn normals(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.sample(StandardNormal)).collect()
    }

    fn m1(v: f64) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, v)
    }

    #[test]
    fn w2_empirical_examples() {
        assert_eq!(
            w2_empirical_1d(&[1.0, 2.0, 3.0], &[3.0, 1.0, 2.0]).unwrap(),
            0.0
        );
        assert_eq!(w2_empirical_1d(&[0.0], &[3.0]).unwrap(), 3.0);
        assert_eq!(w2_empirical_1d(&[0.0, 1.0], &[1.0, 2.0]).unwrap(), 1.0);
        assert!(w2_empirical_1d(&[], &[1.0]).is_err());
    }

    #[test]
    fn w2_empirical_unequal_sizes() {
        // {0, 1} against {0, 0, 3}: quantile pieces of width 1/3, 1/6, 1/6, 1/3
        let w = w2_empirical_1d(&[0.0, 1.0], &[0.0, 0.0, 3.0]).unwrap();
        let expect = (1.0f64 / 6.0 + 4.0 / 3.0).sqrt();
        assert_abs_diff_eq!(w, expect, epsilon = 1e-15);
        // duplicating every atom leaves the measure unchanged
        let a = [0.3, -1.0, 2.0];
        let b = [1.0, 0.0, 0.5, 4.0];
        let a2: Vec<f64> = a.iter().chain(&a).copied().collect();
        assert_abs_diff_eq!(
            w2_empirical_1d(&a, &b).unwrap(),
            w2_empirical_1d(&a2, &b).unwrap(),
            epsilon = 1e-14
        );
    }

    #[test]
    fn w2_gaussian_examples() {
        let z = DVector::zeros(1);
        assert_eq!(w2_gaussian(&z, &m1(1.0), &z, &m1(1.0)).unwrap(), 0.0);
        assert_abs_diff_eq!(
            w2_gaussian(&z, &m1(1.0), &DVector::from_element(1, 3.0), &m1(1.0)).unwrap(),
            3.0,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            w2_gaussian(&z, &m1(1.0), &z, &m1(4.0)).unwrap(),
            1.0,
            epsilon = 1e-14
        );
        assert!(matches!(
            w2_gaussian(&z, &m1(-1.0), &z, &m1(1.0)),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn scalar_lyapunov() {
        for gamma in [0.01, 0.3, 1.0, 1.9] {
            let s = stationary_covariance_oracle(&m1(1.0), &m1(1.0), gamma).unwrap();
            assert_abs_diff_eq!(s[(0, 0)], 1.0 / (1.0 - gamma / 2.0), epsilon = 1e-12);
        }
        assert!(matches!(
            stationary_covariance_oracle(&m1(1.0), &m1(1.0), 2.0),
            Err(Error::Instability { .. })
        ));
    }

    #[test]
    fn lyapunov_residual_random_5x5() {
        let mut rng = ChaCha20Rng::seed_from_u64(9);
        let mut spd = || {
            let g = DMatrix::from_fn(5, 5, |_, _| rng.sample::<f64, _>(StandardNormal));
            &g * g.transpose() / 5.0 + DMatrix::identity(5, 5) * 0.5
        };
        let a = spd();
        let h = spd();
        let radius_unit = iteration_spectral_radius(&a, &h, 1.0).unwrap();
        let lam_max = radius_unit + 1.0;
        let gamma = 1.0 / lam_max;
        let s = stationary_covariance_oracle(&a, &h, gamma).unwrap();
        assert!(lyapunov_residual(&s, &a, &h, gamma) <= 1e-10);
        assert!(spd_eigen(&s, "sigma").is_ok());
    }

    #[test]
    fn chain_law_scalar_and_limit() {
        let (mean, cov) =
            gaussian_chain_law(&m1(1.0), &m1(1.0), 0.5, &DVector::from_element(1, 2.0), 3).unwrap();
        assert_abs_diff_eq!(mean[0], 0.25, epsilon = 1e-15);
        // 2γ (1 + d² + d⁴) with d = 0.5
        assert_abs_diff_eq!(cov[(0, 0)], 1.0 * (1.0 + 0.25 + 0.0625), epsilon = 1e-14);
        let (_, cov) =
            gaussian_chain_law(&m1(1.0), &m1(1.0), 0.5, &DVector::zeros(1), 10_000).unwrap();
        assert_abs_diff_eq!(cov[(0, 0)], 1.0 / 0.75, epsilon = 1e-14);
    }

    #[test]
    fn chain_law_matches_recursion() {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let h = DMatrix::from_row_slice(2, 2, &[1.0, 0.3, 0.3, 0.8]);
        let gamma = 0.2;
        let x0 = DVector::from_column_slice(&[1.0, -2.0]);
        let b: DMatrix<f64> = DMatrix::identity(2, 2) - &h * &a * gamma;
        let mut mean = x0.clone();
        let mut cov = DMatrix::zeros(2, 2);
        for k in 1..=25u64 {
            mean = &b * mean;
            cov = &b * cov * b.transpose() + 2.0 * gamma * &h;
            let (m, c) = gaussian_chain_law(&a, &h, gamma, &x0, k).unwrap();
            assert!((m - &mean).norm() < 1e-12);
            assert!((c - &cov).norm() < 1e-12);
        }
    }

    #[test]
    fn histogram_tv_examples() {
        let xs = normals(1000, 1);
        assert_eq!(tv_histogram(&xs, &xs, 20, None).unwrap(), 0.0);
        assert_eq!(
            tv_histogram(&[0.0, 0.1], &[5.0, 6.0], 10, None).unwrap(),
            1.0
        );
        let a = normals(100_000, 2);
        let b = normals(100_000, 3);
        assert!(tv_histogram(&a, &b, 50, None).unwrap() <= 0.05);
        assert!(tv_histogram(&a, &b, 1, None).is_err());
        assert!(tv_histogram(&[], &b, 10, None).is_err());
        assert!(tv_histogram(&a, &b, 10, Some((-1.0, 1.0))).is_err());
    }

    #[test]
    fn histogram_edges() {
        let h = Histogram::new(&[0.0, 0.5, 1.0, 0.99], 2, (0.0, 1.0)).unwrap();
        assert_eq!(h.counts, vec![1, 3]);
        assert_eq!(h.edges(), vec![0.0, 0.5, 1.0]);
    }
}
