//! Preconditioners `H` with `m_H I <= H(x) <= M_H I`.
//!
//! A [`FixedPreconditioner`] caches `H^{1/2}` and `H^{-1}` once; a
//! [`SpatialPreconditioner`] evaluates `x -> H(x)` on demand and carries a
//! declared `β` bounding `M_H ||H⁻¹(x) - H⁻¹(y)||₂`.

use std::fmt;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralBounds {
    /// Smallest eigenvalue `m_H`.
    pub min: f64,
    /// Largest eigenvalue `M_H`.
    pub max: f64,
    /// `κ* = m_H / M_H`.
    pub kappa_star: f64,
}

/// Extreme eigenvalues of an SPD matrix and their ratio.
pub fn spectral_bounds(a: &DMatrix<f64>) -> Result<SpectralBounds> {
    let (values, _) = linalg::spd_eigen(a, "matrix")?;
    let min = values[0];
    let max = values[values.len() - 1];
    Ok(SpectralBounds {
        min,
        max,
        kappa_star: if min == max { 1.0 } else { min / max },
    })
}

/// The SPD square root `Q Λ^{1/2} Qᵀ` of a symmetric positive definite matrix.
pub fn sqrt_spd(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (values, vectors) = linalg::spd_eigen(a, "matrix")?;
    Ok(linalg::spectral_map(&values, &vectors, f64::sqrt))
}

/// Constant SPD preconditioner.
#[derive(Debug, Clone)]
pub struct FixedPreconditioner {
    h: DMatrix<f64>,
    h_sqrt: DMatrix<f64>,
    h_inv: DMatrix<f64>,
    bounds: SpectralBounds,
    id: String,
}

impl FixedPreconditioner {
    pub fn new(h: DMatrix<f64>) -> Result<Self> {
        Self::with_id(h, "dense".to_string())
    }

    fn with_id(h: DMatrix<f64>, id: String) -> Result<Self> {
        let (values, vectors) = linalg::spd_eigen(&h, "preconditioner")?;
        let min = values[0];
        let max = values[values.len() - 1];
        Ok(Self {
            h: linalg::symmetrized(&h, "preconditioner")?,
            h_sqrt: linalg::spectral_map(&values, &vectors, f64::sqrt),
            h_inv: linalg::spectral_map(&values, &vectors, f64::recip),
            bounds: SpectralBounds {
                min,
                max,
                kappa_star: if min == max { 1.0 } else { min / max },
            },
            id,
        })
    }

    pub fn identity(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::input("preconditioner dimension must be >= 1"));
        }
        Self::with_id(DMatrix::identity(dim, dim), "identity".to_string())
    }

    /// Reads the matrix file format: first line `p`, then `p` whitespace-separated rows.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let h = read_matrix(path)?;
        Self::with_id(h, format!("file:{}", path.display()))
    }

    pub fn dim(&self) -> usize {
        self.h.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.h
    }

    pub fn sqrt(&self) -> &DMatrix<f64> {
        &self.h_sqrt
    }

    pub fn inverse(&self) -> &DMatrix<f64> {
        &self.h_inv
    }

    pub fn bounds(&self) -> SpectralBounds {
        self.bounds
    }

    pub fn id(&self) -> &str {
        &self.id
    }
}

/// Parses a dense square matrix: first line `p`, then `p` rows of `p` numbers.
pub fn parse_matrix(text: &str, source: &Path) -> Result<DMatrix<f64>> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let (hline, header) = lines
        .next()
        .ok_or_else(|| Error::parse(source, 1, "missing dimension line"))?;
    let p: usize = header
        .parse()
        .map_err(|_| Error::parse(source, hline, format!("expected dimension, got `{header}`")))?;
    if p == 0 {
        return Err(Error::parse(source, hline, "dimension must be >= 1"));
    }
    let mut entries = Vec::with_capacity(p * p);
    let mut rows = 0;
    for (lineno, line) in lines {
        if rows == p {
            return Err(Error::parse(source, lineno, format!("more than {p} rows")));
        }
        let row: Vec<f64> = line
            .split_whitespace()
            .map(|t| t.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::parse(source, lineno, e.to_string()))?;
        if row.len() != p {
            return Err(Error::parse(
                source,
                lineno,
                format!("expected {p} entries, got {}", row.len()),
            ));
        }
        entries.extend(row);
        rows += 1;
    }
    if rows != p {
        return Err(Error::parse(
            source,
            hline,
            format!("expected {p} rows, got {rows}"),
        ));
    }
    Ok(DMatrix::from_row_slice(p, p, &entries))
}

pub fn read_matrix(path: &Path) -> Result<DMatrix<f64>> {
    parse_matrix(&fs::read_to_string(path)?, path)
}

pub fn format_matrix(a: &DMatrix<f64>) -> String {
    let mut out = format!("{}\n", a.nrows());
    for row in a.row_iter() {
        let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        out.push_str(&cells.join(" "));
        out.push('\n');
    }
    out
}

/// The AR(1) correlation matrix `(ρ^{|i-j|})`.
#[derive(Debug, Clone)]
pub struct Ar1Preconditioner {
    rho: f64,
    fixed: FixedPreconditioner,
}

pub fn ar1_matrix(rho: f64, p: usize) -> DMatrix<f64> {
    DMatrix::from_fn(p, p, |i, j| rho.powi(i.abs_diff(j) as i32))
}

pub fn build_ar1(rho: f64, p: usize) -> Result<Ar1Preconditioner> {
    if !(rho.abs() < 1.0) {
        return Err(Error::domain(format!(
            "AR(1) preconditioner needs |rho| < 1, got {rho}"
        )));
    }
    if p == 0 {
        return Err(Error::input("AR(1) preconditioner needs p >= 1"));
    }
    let fixed = FixedPreconditioner::with_id(ar1_matrix(rho, p), format!("ar1:{rho}"))?;
    Ok(Ar1Preconditioner { rho, fixed })
}

impl Ar1Preconditioner {
    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn fixed(&self) -> &FixedPreconditioner {
        &self.fixed
    }

    pub fn into_fixed(self) -> FixedPreconditioner {
        self.fixed
    }
}

pub type MatrixMap = dyn Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync;

/// Spatially varying preconditioner `x -> H(x)` with declared bounds.
///
/// The bounds are trusted: `β` is a property of the whole map and cannot be
/// certified from samples. [`estimate_beta`] gives a sampled lower estimate.
#[derive(Clone)]
pub struct SpatialPreconditioner {
    map: Arc<MatrixMap>,
    dim: usize,
    bounds: SpectralBounds,
    beta: f64,
    id: String,
}

impl fmt::Debug for SpatialPreconditioner {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SpatialPreconditioner")
            .field("id", &self.id)
            .field("dim", &self.dim)
            .field("bounds", &self.bounds)
            .field("beta", &self.beta)
            .finish()
    }
}

impl SpatialPreconditioner {
    pub fn new(
        dim: usize,
        min: f64,
        max: f64,
        beta: f64,
        id: impl Into<String>,
        map: impl Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync + 'static,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::input("preconditioner dimension must be >= 1"));
        }
        if !(min > 0.0 && max >= min && max.is_finite()) {
            return Err(Error::domain(format!(
                "need 0 < m_H <= M_H, got m_H = {min}, M_H = {max}"
            )));
        }
        if !(beta >= 0.0 && beta.is_finite()) {
            return Err(Error::domain(format!(
                "beta must be finite and >= 0, got {beta}"
            )));
        }
        Ok(Self {
            map: Arc::new(map),
            dim,
            bounds: SpectralBounds {
                min,
                max,
                kappa_star: min / max,
            },
            beta,
            id: id.into(),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn at(&self, x: &DVector<f64>) -> DMatrix<f64> {
        (self.map)(x)
    }

    pub fn bounds(&self) -> SpectralBounds {
        self.bounds
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn id(&self) -> &str {
        &self.id
    }
}

#[derive(Debug, Clone)]
pub enum Preconditioner {
    Fixed(FixedPreconditioner),
    Spatial(SpatialPreconditioner),
}

impl From<FixedPreconditioner> for Preconditioner {
    fn from(p: FixedPreconditioner) -> Self {
        Preconditioner::Fixed(p)
    }
}

impl From<Ar1Preconditioner> for Preconditioner {
    fn from(p: Ar1Preconditioner) -> Self {
        Preconditioner::Fixed(p.fixed)
    }
}

impl From<SpatialPreconditioner> for Preconditioner {
    fn from(p: SpatialPreconditioner) -> Self {
        Preconditioner::Spatial(p)
    }
}

impl Preconditioner {
    pub fn dim(&self) -> usize {
        match self {
            Preconditioner::Fixed(f) => f.dim(),
            Preconditioner::Spatial(s) => s.dim(),
        }
    }

    pub fn bounds(&self) -> SpectralBounds {
        match self {
            Preconditioner::Fixed(f) => f.bounds(),
            Preconditioner::Spatial(s) => s.bounds(),
        }
    }

    /// Zero for a constant map.
    pub fn beta(&self) -> f64 {
        match self {
            Preconditioner::Fixed(_) => 0.0,
            Preconditioner::Spatial(s) => s.beta(),
        }
    }

    pub fn id(&self) -> &str {
        match self {
            Preconditioner::Fixed(f) => f.id(),
            Preconditioner::Spatial(s) => s.id(),
        }
    }

    pub fn as_fixed(&self) -> Option<&FixedPreconditioner> {
        match self {
            Preconditioner::Fixed(f) => Some(f),
            Preconditioner::Spatial(_) => None,
        }
    }

    pub fn matrix_at(&self, x: &DVector<f64>) -> DMatrix<f64> {
        match self {
            Preconditioner::Fixed(f) => f.matrix().clone(),
            Preconditioner::Spatial(s) => s.at(x),
        }
    }

    pub fn inverse_at(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        match self {
            Preconditioner::Fixed(f) => Ok(f.inverse().clone()),
            Preconditioner::Spatial(s) => {
                let (values, vectors) = linalg::spd_eigen(&s.at(x), "H(x)")?;
                Ok(linalg::spectral_map(&values, &vectors, f64::recip))
            }
        }
    }

    /// `(x - x*)ᵀ H⁻¹(x) (x - x*)`.
    pub fn weighted_sq_dist(&self, x: &DVector<f64>, x_star: &DVector<f64>) -> Result<f64> {
        let d = x - x_star;
        Ok(d.dot(&(self.inverse_at(x)? * &d)))
    }
}

/// Uniform draw from the ball of radius `radius` centred at `center`.
pub(crate) fn uniform_in_ball<R: Rng>(
    rng: &mut R,
    center: &DVector<f64>,
    radius: f64,
) -> DVector<f64> {
    let p = center.len();
    let dir = DVector::from_fn(p, |_, _| rng.sample::<f64, _>(StandardNormal));
    let norm = dir.norm();
    let u: f64 = rng.random();
    let r = radius * u.powf(1.0 / p as f64);
    if norm == 0.0 {
        return center.clone();
    }
    center + dir * (r / norm)
}

/// Sampled lower estimate of `sup M_H ||H⁻¹(x) - H⁻¹(y)||₂` over pairs in the
/// ball of radius `radius` around the origin. Diagnostic only.
pub fn estimate_beta(
    pre: &SpatialPreconditioner,
    n_pairs: usize,
    radius: f64,
    seed: u64,
) -> Result<f64> {
    if n_pairs == 0 {
        return Err(Error::input("n_pairs must be >= 1"));
    }
    if !(radius >= 0.0 && radius.is_finite()) {
        return Err(Error::input(format!(
            "radius must be finite and >= 0, got {radius}"
        )));
    }
    let wrapped = Preconditioner::Spatial(pre.clone());
    let origin = DVector::zeros(pre.dim());
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut best = 0.0_f64;
    for _ in 0..n_pairs {
        let x = uniform_in_ball(&mut rng, &origin, radius);
        let y = uniform_in_ball(&mut rng, &origin, radius);
        let diff = wrapped.inverse_at(&x)? - wrapped.inverse_at(&y)?;
        best = best.max(pre.bounds().max * linalg::sym_spectral_norm(&diff));
    }
    Ok(best)
}
