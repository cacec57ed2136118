//! Central-limit inference from chain output: spatial averages, batch-means
//! asymptotic variance, projection confidence intervals and a normality check.

use nalgebra::DVector;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::sampler::Trajectory;

pub const DEFAULT_BATCHES: usize = 30;
pub const UNIT_TOL: f64 = 1e-10;
pub const MIN_NORMALITY_INPUTS: usize = 100;

/// `(1/k) Σ f(x_i)` over the recorded rows.
pub fn spatial_average(traj: &Trajectory, f: impl Fn(&DVector<f64>) -> f64) -> Result<f64> {
    if traj.is_empty() {
        return Err(Error::input("trajectory is empty"));
    }
    Ok(traj.rows().map(|x| f(&x)).sum::<f64>() / traj.len() as f64)
}

pub fn mean(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::input("no values"));
    }
    Ok(values.iter().sum::<f64>() / values.len() as f64)
}

/// Unbiased sample variance.
fn sample_variance(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mu = values.iter().sum::<f64>() / n;
    values.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / (n - 1.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchMeans {
    pub batch_size: usize,
    pub means: Vec<f64>,
    /// Trailing values not used.
    pub dropped: usize,
    /// `batch_size · var(means)`
    pub sigma2: f64,
}

impl BatchMeans {
    pub fn sigma(&self) -> f64 {
        self.sigma2.sqrt()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("batch,mean\n");
        for (i, m) in self.means.iter().enumerate() {
            out.push_str(&format!("{i},{m:e}\n"));
        }
        out
    }
}

/// Non-overlapping batch means over a scalar series.
pub fn batch_means(values: &[f64], n_batches: usize) -> Result<BatchMeans> {
    if n_batches < 2 {
        return Err(Error::input(format!(
            "need at least 2 batches, got {n_batches}"
        )));
    }
    if values.len() < 2 * n_batches {
        return Err(Error::input(format!(
            "series of length {} is too short for {n_batches} batches (need {})",
            values.len(),
            2 * n_batches
        )));
    }
    let batch_size = values.len() / n_batches;
    let means: Vec<f64> = values
        .chunks_exact(batch_size)
        .take(n_batches)
        .map(|c| c.iter().sum::<f64>() / batch_size as f64)
        .collect();
    let sigma2 = batch_size as f64 * sample_variance(&means);
    Ok(BatchMeans {
        batch_size,
        dropped: values.len() - batch_size * n_batches,
        means,
        sigma2,
    })
}

/// Batch-means estimate of `σ(f, π_γ)`.
pub fn batch_means_sigma(
    traj: &Trajectory,
    f: impl Fn(&DVector<f64>) -> f64,
    n_batches: usize,
) -> Result<f64> {
    let values: Vec<f64> = traj.rows().map(|x| f(&x)).collect();
    Ok(batch_means(&values, n_batches)?.sigma())
}

/// `M_H^{-1/2} ⟨u, x - x*⟩`.
#[derive(Debug, Clone)]
pub struct Projection {
    u: DVector<f64>,
    x_star: DVector<f64>,
    scale: f64,
}

impl Projection {
    pub fn new(u: DVector<f64>, x_star: DVector<f64>, big_m_h: f64) -> Result<Self> {
        if u.len() != x_star.len() {
            return Err(Error::input(format!(
                "direction has length {} but x* has length {}",
                u.len(),
                x_star.len()
            )));
        }
        let norm = u.norm();
        if (norm - 1.0).abs() > UNIT_TOL {
            return Err(Error::input(format!(
                "direction u must be a unit vector, |u| = {norm}"
            )));
        }
        if !(big_m_h > 0.0 && big_m_h.is_finite()) {
            return Err(Error::domain(format!(
                "M_H must be positive, got {big_m_h}"
            )));
        }
        Ok(Self {
            u,
            x_star,
            scale: big_m_h.sqrt().recip(),
        })
    }

    pub fn eval(&self, x: &DVector<f64>) -> f64 {
        self.scale * self.u.dot(&(x - &self.x_star))
    }

    pub fn direction(&self) -> &DVector<f64> {
        &self.u
    }

    pub fn values(&self, traj: &Trajectory) -> Result<Vec<f64>> {
        if traj.dim() != self.u.len() {
            return Err(Error::input(format!(
                "trajectory dimension {} does not match direction length {}",
                traj.dim(),
                self.u.len()
            )));
        }
        Ok(traj.rows().map(|x| self.eval(&x)).collect())
    }
}

/// Confidence interval for `∫ M_H^{-1/2}⟨u, v - x*⟩ dπ_γ(v)`, the mean of the
/// projection under the chain's own stationary law.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionCi {
    pub u: DVector<f64>,
    pub point_estimate: f64,
    pub sigma_hat: f64,
    pub level: f64,
    pub z: f64,
    pub interval: (f64, f64),
    pub k: usize,
    pub batches: BatchMeans,
    /// `σ̂ = 0`: the interval collapses to a point.
    pub degenerate: bool,
}

impl ProjectionCi {
    pub fn half_width(&self) -> f64 {
        self.z * self.sigma_hat / (self.k as f64).sqrt()
    }

    pub fn covers(&self, value: f64) -> bool {
        self.interval.0 <= value && value <= self.interval.1
    }

    /// `√k · estimate / σ̂`, the studentized statistic for a zero-mean projection.
    pub fn studentized(&self, center: f64) -> f64 {
        (self.k as f64).sqrt() * (self.point_estimate - center) / self.sigma_hat
    }
}

/// Two-sided standard normal quantile `z_{(1+level)/2}`.
pub fn normal_quantile(level: f64) -> Result<f64> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::input(format!(
            "level must lie in (0, 1), got {level}"
        )));
    }
    Ok(Normal::standard().inverse_cdf(0.5 * (1.0 + level)))
}

pub fn projection_ci_from_values(
    u: DVector<f64>,
    values: &[f64],
    level: f64,
    n_batches: usize,
) -> Result<ProjectionCi> {
    let z = normal_quantile(level)?;
    let batches = batch_means(values, n_batches)?;
    let point = mean(values)?;
    let sigma_hat = batches.sigma();
    let k = values.len();
    let half = z * sigma_hat / (k as f64).sqrt();
    Ok(ProjectionCi {
        u,
        point_estimate: point,
        sigma_hat,
        level,
        z,
        interval: (point - half, point + half),
        k,
        degenerate: sigma_hat == 0.0,
        batches,
    })
}

pub fn projection_ci(
    traj: &Trajectory,
    u: &DVector<f64>,
    x_star: &DVector<f64>,
    big_m_h: f64,
    level: f64,
    n_batches: usize,
) -> Result<ProjectionCi> {
    let proj = Projection::new(u.clone(), x_star.clone(), big_m_h)?;
    let values = proj.values(traj)?;
    projection_ci_from_values(u.clone(), &values, level, n_batches)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalityCheck {
    pub ks_statistic: f64,
    pub critical: f64,
    pub n: usize,
    pub pass: bool,
}

/// One-sample Kolmogorov–Smirnov statistic of standardized values against `N(0, 1)`.
pub fn normality_diagnostic(values: &[f64]) -> Result<NormalityCheck> {
    let n = values.len();
    if n < MIN_NORMALITY_INPUTS {
        return Err(Error::input(format!(
            "normality check needs at least {MIN_NORMALITY_INPUTS} values, got {n}"
        )));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::input(
            "normality check input contains non-finite values",
        ));
    }
    let mu = mean(values)?;
    let sd = sample_variance(values).sqrt();
    if !(sd > 0.0) {
        return Err(Error::input("normality check input has zero spread"));
    }
    let mut z: Vec<f64> = values.iter().map(|v| (v - mu) / sd).collect();
    z.sort_by(f64::total_cmp);
    let normal = Normal::standard();
    let nf = n as f64;
    let ks = z.iter().enumerate().fold(0.0_f64, |acc, (i, &v)| {
        let cdf = normal.cdf(v);
        acc.max(cdf - i as f64 / nf).max((i + 1) as f64 / nf - cdf)
    });
    let critical = 1.36 / nf.sqrt();
    Ok(NormalityCheck {
        ks_statistic: ks,
        critical,
        n,
        pass: ks < critical,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;
    use rand_distr::StandardNormal;

    fn traj(rows: &[&[f64]]) -> Trajectory {
        let p = rows[0].len();
        let m =
            DMatrix::from_row_iterator(rows.len(), p, rows.iter().flat_map(|r| r.iter().copied()));
        Trajectory::from_states(m, (1..=rows.len()).collect()).unwrap()
    }

    fn normals(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.sample(StandardNormal)).collect()
    }

    #[test]
    fn spatial_average_examples() {
        let t = traj(&[&[1.0, 5.0], &[3.0, -2.0]]);
        assert_eq!(spatial_average(&t, |_| 4.5).unwrap(), 4.5);
        assert_eq!(spatial_average(&t, |x| x[0]).unwrap(), 2.0);
    }

    #[test]
    fn batch_means_iid_normal() {
        let xs = normals(100_000, 1);
        let b = batch_means(&xs, 30).unwrap();
        assert_eq!(b.batch_size, 3333);
        assert_eq!(b.dropped, 10);
        assert!((b.sigma() - 1.0).abs() < 0.15, "{}", b.sigma());
        // 30 batches leave roughly 13% relative noise in one estimate; the average is sharp
        let avg = (10..50)
            .map(|s| batch_means(&normals(20_000, s), 30).unwrap().sigma2)
            .sum::<f64>()
            / 40.0;
        assert!((avg - 1.0).abs() < 0.06, "{avg}");
    }

    #[test]
    fn batch_means_ar1() {
        let phi = 0.5;
        let noise = normals(200_000, 11);
        let mut x = 0.0;
        let xs: Vec<f64> = noise
            .iter()
            .map(|e| {
                x = phi * x + e;
                x
            })
            .collect();
        let s2 = batch_means(&xs, 30).unwrap().sigma2;
        assert!((s2 - 4.0).abs() < 0.8, "{s2}");
    }

    #[test]
    fn batch_means_constant_and_errors() {
        let row: &[f64] = &[2.0];
        let t = traj(&[row; 10]);
        assert_eq!(batch_means_sigma(&t, |x| x[0], 5).unwrap(), 0.0);
        assert!(batch_means(&[1.0; 10], 1).is_err());
        assert!(batch_means(&[1.0; 9], 5).is_err());
    }

    #[test]
    fn quantile_and_interval() {
        assert_abs_diff_eq!(
            normal_quantile(0.95).unwrap(),
            1.959963984540054,
            epsilon = 1e-9
        );
        assert!(normal_quantile(1.0).is_err());
        let xs = normals(3000, 5);
        let u = DVector::from_element(1, 1.0);
        let ci = projection_ci_from_values(u, &xs, 0.95, 30).unwrap();
        let (lo, hi) = ci.interval;
        assert!(lo <= ci.point_estimate && ci.point_estimate <= hi);
        assert_abs_diff_eq!(hi - lo, 2.0 * ci.half_width(), epsilon = 1e-15);
    }

    #[test]
    fn projection_requires_unit_direction() {
        let t = traj(&[&[1.0, 0.0], &[0.0, 1.0], &[1.0, 1.0], &[0.0, 0.0]]);
        let x_star = DVector::zeros(2);
        let u = DVector::from_column_slice(&[1.0, 1.0]);
        assert!(matches!(
            projection_ci(&t, &u, &x_star, 1.0, 0.95, 2),
            Err(Error::Input(_))
        ));
    }

    #[test]
    fn projection_scales_by_m_h() {
        let proj = Projection::new(
            DVector::from_column_slice(&[0.6, 0.8]),
            DVector::from_column_slice(&[1.0, 0.0]),
            4.0,
        )
        .unwrap();
        assert_abs_diff_eq!(
            proj.eval(&DVector::from_column_slice(&[2.0, 1.0])),
            0.7,
            epsilon = 1e-15
        );
    }

    #[test]
    fn degenerate_interval() {
        let u = DVector::from_element(1, 1.0);
        let ci = projection_ci_from_values(u, &[3.0; 100], 0.9, 10).unwrap();
        assert!(ci.degenerate);
        assert_eq!(ci.interval, (3.0, 3.0));
    }

    #[test]
    fn ks_normal_passes_uniform_fails() {
        let check = normality_diagnostic(&normals(10_000, 21)).unwrap();
        assert!(check.pass, "{check:?}");
        assert_abs_diff_eq!(check.critical, 0.0136, epsilon = 1e-12);

        let mut rng = ChaCha20Rng::seed_from_u64(21);
        let unif: Vec<f64> = (0..10_000).map(|_| rng.random::<f64>()).collect();
        let check = normality_diagnostic(&unif).unwrap();
        assert!(!check.pass);
        assert!(
            (check.ks_statistic - 0.06).abs() < 0.01,
            "{}",
            check.ks_statistic
        );
    }

    #[test]
    fn ks_input_errors() {
        assert!(normality_diagnostic(&[0.0; 99]).is_err());
        assert!(normality_diagnostic(&[1.0; 200]).is_err());
    }
}
