//! The preconditioned Langevin recursion
//!
//! ```text
//! x_{k+1} = x_k - γ H(x_k) ∇g(x_k) + sqrt(2γ) H(x_k)^{1/2} ξ_{k+1}
//! ```
//!
//! Noise comes from a ChaCha20 stream keyed by `(seed, stream)`, so a chain is
//! a pure function of its configuration and replicate `r` always consumes
//! stream `r` no matter how replicates are scheduled.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg;
use crate::precond::Preconditioner;
use crate::targets::TargetSpec;
use crate::theory::{self, KappaConvention, ProblemConstants};

/// Coordinates beyond this magnitude count as divergence.
pub const DIVERGENCE_LIMIT: f64 = 1e12;

#[derive(Debug, Clone, PartialEq)]
pub struct ChainConfig {
    pub gamma: f64,
    /// Iteration budget `K`.
    pub iterations: usize,
    pub x0: DVector<f64>,
    pub seed: u64,
    pub record_every: usize,
    pub burn_in: usize,
    pub track_gradient_norm: bool,
}

impl ChainConfig {
    pub fn new(gamma: f64, iterations: usize, x0: DVector<f64>, seed: u64) -> Self {
        Self {
            gamma,
            iterations,
            x0,
            seed,
            record_every: 1,
            burn_in: 0,
            track_gradient_norm: false,
        }
    }

    pub fn with_burn_in(mut self, burn_in: usize) -> Self {
        self.burn_in = burn_in;
        self
    }

    pub fn with_record_every(mut self, record_every: usize) -> Self {
        self.record_every = record_every;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::input(format!(
                "step size must be positive, got {}",
                self.gamma
            )));
        }
        if self.iterations == 0 {
            return Err(Error::input("iteration budget must be >= 1"));
        }
        if self.record_every == 0 {
            return Err(Error::input("record_every must be >= 1"));
        }
        if self.burn_in >= self.iterations {
            return Err(Error::input(format!(
                "burn_in ({}) must be smaller than the iteration budget ({})",
                self.burn_in, self.iterations
            )));
        }
        if self.x0.iter().any(|v| !v.is_finite()) {
            return Err(Error::input("start point must be finite"));
        }
        Ok(())
    }

    /// `floor((K - burn_in) / record_every)`.
    pub fn recorded_rows(&self) -> usize {
        (self.iterations - self.burn_in) / self.record_every
    }
}

/// Seeded standard-Gaussian vector source.
#[derive(Debug, Clone)]
pub struct NoiseStream {
    rng: ChaCha20Rng,
}

impl NoiseStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { rng }
    }

    pub fn fill(&mut self, out: &mut DVector<f64>) {
        for v in out.iter_mut() {
            *v = self.rng.sample(StandardNormal);
        }
    }

    pub fn next_vector(&mut self, dim: usize) -> DVector<f64> {
        let mut v = DVector::zeros(dim);
        self.fill(&mut v);
        v
    }

    pub fn rng(&mut self) -> &mut ChaCha20Rng {
        &mut self.rng
    }
}

/// Where a trajectory came from.
#[derive(Debug, Clone, PartialEq)]
pub struct Provenance {
    pub config: ChainConfig,
    pub stream: u64,
    pub target_id: String,
    pub precond_id: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// Recorded iterates, one row per record.
    pub states: DMatrix<f64>,
    /// Iteration index `k` of each recorded row (`x_k`, `k >= 1`).
    pub steps: Vec<usize>,
    pub terminal: DVector<f64>,
    pub grad_norms: Option<Vec<f64>>,
    pub provenance: Option<Provenance>,
    pub warnings: Vec<String>,
}

struct Workspace {
    grad: DVector<f64>,
    drift: DVector<f64>,
    noise: DVector<f64>,
    diffusion: DVector<f64>,
}

impl Workspace {
    fn new(p: usize) -> Self {
        Self {
            grad: DVector::zeros(p),
            drift: DVector::zeros(p),
            noise: DVector::zeros(p),
            diffusion: DVector::zeros(p),
        }
    }
}

fn check_dims(target: &TargetSpec, precond: &Preconditioner, x: &DVector<f64>) -> Result<()> {
    let p = target.dim();
    if precond.dim() != p {
        return Err(Error::input(format!(
            "preconditioner dimension {} does not match target dimension {p}",
            precond.dim()
        )));
    }
    if x.len() != p {
        return Err(Error::input(format!(
            "start point has dimension {}, target has {p}",
            x.len()
        )));
    }
    Ok(())
}

/// One update in place; `ws.noise` must already hold `ξ`. Returns `false` on divergence.
fn advance(
    x: &mut DVector<f64>,
    target: &TargetSpec,
    precond: &Preconditioner,
    gamma: f64,
    ws: &mut Workspace,
) -> Result<bool> {
    target.potential().gradient_into(x, &mut ws.grad);
    let scale = (2.0 * gamma).sqrt();
    match precond {
        Preconditioner::Fixed(f) => {
            ws.drift.gemv(1.0, f.matrix(), &ws.grad, 0.0);
            ws.diffusion.gemv(1.0, f.sqrt(), &ws.noise, 0.0);
        }
        Preconditioner::Spatial(s) => {
            let h = s.at(x);
            let (values, vectors) = linalg::spd_eigen(&h, "H(x)")?;
            let h_sqrt = linalg::spectral_map(&values, &vectors, f64::sqrt);
            ws.drift.gemv(1.0, &h, &ws.grad, 0.0);
            ws.diffusion.gemv(1.0, &h_sqrt, &ws.noise, 0.0);
        }
    }
    x.axpy(-gamma, &ws.drift, 1.0);
    x.axpy(scale, &ws.diffusion, 1.0);
    Ok(x.iter()
        .all(|v| v.is_finite() && v.abs() <= DIVERGENCE_LIMIT))
}

/// A single update with caller-supplied noise `ξ ~ N(0, I)`.
///
/// Divergence is reported as step 1.
pub fn step(
    x: &DVector<f64>,
    target: &TargetSpec,
    precond: &Preconditioner,
    gamma: f64,
    noise: &DVector<f64>,
) -> Result<DVector<f64>> {
    check_dims(target, precond, x)?;
    if noise.len() != x.len() {
        return Err(Error::input("noise dimension does not match the state"));
    }
    let mut ws = Workspace::new(x.len());
    ws.noise.copy_from(noise);
    let mut next = x.clone();
    if advance(&mut next, target, precond, gamma, &mut ws)? {
        Ok(next)
    } else {
        Err(Error::Divergence { step: 1 })
    }
}

/// Returns a warning when `γ` lies outside the interval guaranteeing geometric ergodicity.
pub fn step_size_warning(
    target: &TargetSpec,
    precond: &Preconditioner,
    gamma: f64,
) -> Option<String> {
    let pc = match ProblemConstants::from_parts(target, precond, KappaConvention::default()) {
        Ok(pc) => pc,
        Err(e) => return Some(format!("ergodicity bounds unavailable: {e}")),
    };
    match theory::gamma_interval(&pc) {
        Ok((lo, hi)) if gamma > lo && gamma < hi => None,
        Ok((lo, hi)) => Some(format!(
            "gamma = {gamma} lies outside the admissible interval ({lo}, {hi}); geometric ergodicity is not guaranteed"
        )),
        Err(e) => Some(format!("ergodicity bounds unavailable: {e}")),
    }
}

/// Runs one chain on noise stream 0.
pub fn run_chain(
    target: &TargetSpec,
    precond: &Preconditioner,
    config: &ChainConfig,
) -> Result<Trajectory> {
    run_chain_on_stream(target, precond, config, 0)
}

pub fn run_chain_on_stream(
    target: &TargetSpec,
    precond: &Preconditioner,
    config: &ChainConfig,
    stream: u64,
) -> Result<Trajectory> {
    config.validate()?;
    check_dims(target, precond, &config.x0)?;
    let p = target.dim();
    let rows = config.recorded_rows();
    let mut states = DMatrix::zeros(rows, p);
    let mut steps = Vec::with_capacity(rows);
    let mut grad_norms = config.track_gradient_norm.then(|| Vec::with_capacity(rows));

    let mut noise = NoiseStream::new(config.seed, stream);
    let mut ws = Workspace::new(p);
    let mut x = config.x0.clone();
    for k in 1..=config.iterations {
        noise.fill(&mut ws.noise);
        if !advance(&mut x, target, precond, config.gamma, &mut ws)? {
            return Err(Error::Divergence { step: k });
        }
        if k > config.burn_in && (k - config.burn_in).is_multiple_of(config.record_every) {
            let row = steps.len();
            states.row_mut(row).copy_from(&x.transpose());
            steps.push(k);
            if let Some(norms) = grad_norms.as_mut() {
                target.potential().gradient_into(&x, &mut ws.grad);
                norms.push(ws.grad.norm());
            }
        }
    }
    debug_assert_eq!(steps.len(), rows);

    Ok(Trajectory {
        states,
        steps,
        terminal: x,
        grad_norms,
        provenance: Some(Provenance {
            config: config.clone(),
            stream,
            target_id: target.id(),
            precond_id: precond.id().to_string(),
        }),
        warnings: step_size_warning(target, precond, config.gamma)
            .into_iter()
            .collect(),
    })
}

/// Independent replicates; replicate `r` uses noise stream `r`.
pub fn run_replicates(
    target: &TargetSpec,
    precond: &Preconditioner,
    config: &ChainConfig,
    n_rep: usize,
) -> Result<Vec<Trajectory>> {
    if n_rep == 0 {
        return Err(Error::input("need at least one replicate"));
    }
    config.validate()?;
    check_dims(target, precond, &config.x0)?;
    let results: Vec<Result<Trajectory>> = (0..n_rep)
        .into_par_iter()
        .map(|r| run_chain_on_stream(target, precond, config, r as u64))
        .collect();

    let mut out = Vec::with_capacity(n_rep);
    let mut failures = Vec::new();
    for (r, res) in results.into_iter().enumerate() {
        match res {
            Ok(t) => out.push(t),
            Err(Error::Divergence { step }) => failures.push((r, step)),
            Err(e) => return Err(e),
        }
    }
    if failures.is_empty() {
        Ok(out)
    } else {
        Err(Error::ReplicateDivergence { failures })
    }
}

impl Trajectory {
    /// Wraps externally produced draws (e.g. read back from CSV).
    pub fn from_states(states: DMatrix<f64>, steps: Vec<usize>) -> Result<Self> {
        if states.nrows() != steps.len() {
            return Err(Error::input("one step index per recorded row is required"));
        }
        if states.iter().any(|v| !v.is_finite()) {
            return Err(Error::input("trajectory entries must be finite"));
        }
        let terminal = if states.nrows() == 0 {
            DVector::zeros(states.ncols())
        } else {
            states.row(states.nrows() - 1).transpose()
        };
        Ok(Self {
            states,
            steps,
            terminal,
            grad_norms: None,
            provenance: None,
            warnings: Vec::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.states.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.states.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.states.ncols()
    }

    pub fn row(&self, i: usize) -> DVector<f64> {
        self.states.row(i).transpose()
    }

    pub fn rows(&self) -> impl Iterator<Item = DVector<f64>> + '_ {
        self.states.row_iter().map(|r| r.transpose())
    }

    /// All recorded values of coordinate `j` (zero-based).
    pub fn coordinate(&self, j: usize) -> Vec<f64> {
        self.states.column(j).iter().copied().collect()
    }

    /// CSV with header `step,x1,...,xp`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("step");
        for j in 1..=self.dim() {
            let _ = write!(out, ",x{j}");
        }
        out.push('\n');
        for (i, step) in self.steps.iter().enumerate() {
            let _ = write!(out, "{step}");
            for v in self.states.row(i).iter() {
                let _ = write!(out, ",{v}");
            }
            out.push('\n');
        }
        out
    }

    pub fn parse_csv(text: &str, source: &Path) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines
            .next()
            .ok_or_else(|| Error::parse(source, 1, "empty trajectory file"))?;
        let cols: Vec<&str> = header.trim().split(',').collect();
        if cols.first() != Some(&"step") {
            return Err(Error::parse(source, 1, "header must start with `step`"));
        }
        let p = cols.len() - 1;
        for (j, c) in cols[1..].iter().enumerate() {
            if *c != format!("x{}", j + 1) {
                return Err(Error::parse(source, 1, format!("unexpected column `{c}`")));
            }
        }
        let mut steps = Vec::new();
        let mut values = Vec::new();
        for (i, line) in lines {
            let lineno = i + 1;
            let mut fields = line.trim().split(',');
            let step = fields
                .next()
                .and_then(|s| s.parse::<usize>().ok())
                .ok_or_else(|| Error::parse(source, lineno, "bad step index"))?;
            let row: Vec<f64> = fields
                .map(|f| f.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::parse(source, lineno, e.to_string()))?;
            if row.len() != p {
                return Err(Error::parse(
                    source,
                    lineno,
                    format!("expected {p} values, got {}", row.len()),
                ));
            }
            steps.push(step);
            values.extend(row);
        }
        let states = DMatrix::from_row_slice(steps.len(), p, &values);
        Self::from_states(states, steps)
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_csv())?;
        Ok(())
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::parse_csv(&fs::read_to_string(path)?, path)
    }

    /// Sidecar entries: gamma, K, seed, target, precond and the remaining run settings.
    pub fn meta_entries(&self) -> Vec<(String, String)> {
        let Some(prov) = &self.provenance else {
            return Vec::new();
        };
        let c = &prov.config;
        let x0: Vec<String> = c.x0.iter().map(|v| v.to_string()).collect();
        vec![
            ("gamma".into(), c.gamma.to_string()),
            ("K".into(), c.iterations.to_string()),
            ("seed".into(), c.seed.to_string()),
            ("target".into(), prov.target_id.clone()),
            ("precond".into(), prov.precond_id.clone()),
            ("stream".into(), prov.stream.to_string()),
            ("x0".into(), x0.join(",")),
            ("burn_in".into(), c.burn_in.to_string()),
            ("record_every".into(), c.record_every.to_string()),
        ]
    }
}

/// Path of the `.meta` sidecar belonging to a trajectory CSV.
pub fn meta_path(csv: &Path) -> std::path::PathBuf {
    csv.with_extension("meta")
}

pub fn format_meta(entries: &[(String, String)]) -> String {
    entries.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
}

pub fn parse_meta(text: &str, source: &Path) -> Result<Vec<(String, String)>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
        .map(|(i, l)| {
            l.split_once('=')
                .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
                .ok_or_else(|| Error::parse(source, i + 1, "expected key=value"))
        })
        .collect()
}
