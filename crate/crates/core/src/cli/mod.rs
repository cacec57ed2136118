//! Command-line front end: `sample`, `plan`, `bounds`, `infer` and `metrics`.
//!
//! Every subcommand is a pure function of its flags. Exit codes: 0 ok,
//! 2 usage or input, 3 divergence, 4 theory infeasibility.

mod svg;

pub use svg::render_histogram;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DVector;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::inference::{normality_diagnostic, projection_ci, ProjectionCi};
use crate::metrics::{common_range, tv_histogram, w2_empirical_1d, Histogram};
use crate::precond::{build_ar1, FixedPreconditioner, Preconditioner};
use crate::sampler::{
    format_meta, meta_path, parse_meta, run_chain_on_stream, ChainConfig, Trajectory,
};
use crate::targets::{GaussianCosine, GaussianTarget, LogisticPath, MixtureGaussian, TargetSpec};
use crate::theory::{
    default_d_grid, default_r_grid, gamma_interval, plan_sampling, BoundsOptions, ErgodicityReport,
    KappaConvention, ProblemConstants,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DIVERGENCE: i32 = 3;
pub const EXIT_INFEASIBLE: i32 = 4;

#[derive(Parser, Debug)]
#[command(
    name = "plmc",
    version,
    about = "Preconditioned Langevin Monte Carlo sampler, bounds and diagnostics"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Run chains and write one trajectory CSV plus `.meta` sidecar per replicate
    #[command(args_override_self = true)]
    Sample(SampleArgs),
    /// Horizon, step size and iteration count for a W2 accuracy target
    #[command(args_override_self = true)]
    Plan(PlanArgs),
    /// Drift, small-set, minorization and rate constants with the TV bound
    #[command(args_override_self = true)]
    Bounds(BoundsArgs),
    /// Projection confidence intervals and normality check from trajectories
    #[command(args_override_self = true)]
    Infer(InferArgs),
    /// Per-coordinate W2 and histogram TV between two sample sets
    #[command(args_override_self = true)]
    Metrics(MetricsArgs),
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum TargetKind {
    Mixture,
    Gcos,
    Logistic,
    Gaussian,
}

impl TargetKind {
    fn as_str(self) -> &'static str {
        match self {
            TargetKind::Mixture => "mixture",
            TargetKind::Gcos => "gcos",
            TargetKind::Logistic => "logistic",
            TargetKind::Gaussian => "gaussian",
        }
    }
}

#[derive(Args, Debug, Clone)]
pub struct TargetArgs {
    #[arg(long, value_enum)]
    pub target: TargetKind,
    /// Mixture offset, comma-separated, |a| < 1
    #[arg(long, allow_hyphen_values = true)]
    pub a: Option<String>,
    /// Cosine weight in [0, 1)
    #[arg(long)]
    pub lambda1: Option<f64>,
    #[arg(long)]
    pub dim: Option<usize>,
    /// Edge-list file for the logistic target
    #[arg(long)]
    pub edges_file: Option<PathBuf>,
    /// Precision matrix file for the Gaussian target (identity when absent)
    #[arg(long)]
    pub precision_file: Option<PathBuf>,
    /// identity | ar1:<rho> | file:<path>
    #[arg(long, default_value = "identity")]
    pub precond: String,
}

impl TargetArgs {
    pub fn build(&self) -> Result<(TargetSpec, Preconditioner)> {
        let target = self.build_target()?;
        let precond = parse_precond(&self.precond, target.dim())?;
        if precond.dim() != target.dim() {
            return Err(Error::input(format!(
                "preconditioner dimension {} does not match target dimension {}",
                precond.dim(),
                target.dim()
            )));
        }
        Ok((target, precond))
    }

    fn build_target(&self) -> Result<TargetSpec> {
        match self.target {
            TargetKind::Mixture => {
                let a = self
                    .a
                    .as_deref()
                    .ok_or_else(|| Error::input("--target mixture needs --a"))?;
                TargetSpec::new(MixtureGaussian::new(parse_vector(a, "--a")?)?)
            }
            TargetKind::Gcos => {
                let lambda1 = self
                    .lambda1
                    .ok_or_else(|| Error::input("--target gcos needs --lambda1"))?;
                let dim = self
                    .dim
                    .ok_or_else(|| Error::input("--target gcos needs --dim"))?;
                TargetSpec::new(GaussianCosine::new(lambda1, dim)?)
            }
            TargetKind::Logistic => {
                let path = self
                    .edges_file
                    .as_ref()
                    .ok_or_else(|| Error::input("--target logistic needs --edges-file"))?;
                TargetSpec::new(LogisticPath::load(existing(path)?)?)
            }
            TargetKind::Gaussian => match (&self.precision_file, self.dim) {
                (Some(path), _) => {
                    let a = crate::precond::read_matrix(existing(path)?)?;
                    TargetSpec::new(GaussianTarget::new(a)?)
                }
                (None, Some(dim)) => TargetSpec::new(GaussianTarget::standard(dim)?),
                (None, None) => Err(Error::input(
                    "--target gaussian needs --dim or --precision-file",
                )),
            },
        }
    }

    fn flags(&self) -> Vec<(String, String)> {
        let mut out = vec![("target".to_string(), self.target.as_str().to_string())];
        let mut push = |k: &str, v: Option<String>| {
            if let Some(v) = v {
                out.push((k.to_string(), v));
            }
        };
        push("a", self.a.clone());
        push("lambda1", self.lambda1.map(|v| v.to_string()));
        push("dim", self.dim.map(|v| v.to_string()));
        push(
            "edges-file",
            self.edges_file.as_ref().map(|p| p.display().to_string()),
        );
        push(
            "precision-file",
            self.precision_file
                .as_ref()
                .map(|p| p.display().to_string()),
        );
        push("precond", Some(self.precond.clone()));
        out
    }
}

#[derive(Args, Debug, Clone)]
pub struct SampleArgs {
    #[command(flatten)]
    pub target: TargetArgs,
    #[arg(long)]
    pub gamma: f64,
    #[arg(long, default_value_t = 10_000)]
    pub iters: usize,
    #[arg(long, default_value_t = 1)]
    pub replicates: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "out")]
    pub out_dir: PathBuf,
    /// Start point, comma-separated (zeros when absent)
    #[arg(long, allow_hyphen_values = true)]
    pub x0: Option<String>,
    #[arg(long, default_value_t = 0)]
    pub burn_in: usize,
    #[arg(long, default_value_t = 1)]
    pub record_every: usize,
}

#[derive(Args, Debug, Clone)]
pub struct PlanArgs {
    #[command(flatten)]
    pub target: TargetArgs,
    #[arg(long)]
    pub epsilon: f64,
    #[arg(long, allow_hyphen_values = true)]
    pub x0: Option<String>,
    /// Exponential-moment parameter (kappa/4 when absent)
    #[arg(long)]
    pub alpha_exp: Option<f64>,
    /// appendix (kappa = m m_H) | text (kappa = 2 m m_H)
    #[arg(long, default_value = "appendix")]
    pub kappa_convention: String,
}

#[derive(Args, Debug, Clone)]
pub struct BoundsArgs {
    #[command(flatten)]
    pub target: TargetArgs,
    #[arg(long)]
    pub gamma: f64,
    /// Small-set parameter in (lambda_tilde, 1); (1 + lambda_tilde)/2 when absent
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long, default_value_t = crate::theory::DEFAULT_R_POINTS)]
    pub grid_r: usize,
    #[arg(long, default_value_t = crate::theory::DEFAULT_D_POINTS)]
    pub grid_d: usize,
    #[arg(long, default_value_t = 100_000)]
    pub mc_samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, allow_hyphen_values = true)]
    pub x0: Option<String>,
    #[arg(long, default_value_t = 100)]
    pub k_max: u64,
    /// CSV of min(1, M(x0) rho^k) for k = 0..=k-max
    #[arg(long)]
    pub tv_csv: Option<PathBuf>,
    /// CSV of the full (r, d, rho) grid
    #[arg(long)]
    pub grid_csv: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct InferArgs {
    #[arg(long, num_args = 1..)]
    pub traj: Vec<PathBuf>,
    /// Directory whose `*.csv` files are all used
    #[arg(long)]
    pub traj_dir: Option<PathBuf>,
    /// Unit direction, comma-separated (e1 when absent)
    #[arg(long, allow_hyphen_values = true)]
    pub u: Option<String>,
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,
    #[arg(long, default_value_t = crate::inference::DEFAULT_BATCHES)]
    pub n_batches: usize,
    /// Projection value the coverage count is checked against
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub center: f64,
    #[arg(long, allow_hyphen_values = true)]
    pub x_star: Option<String>,
    #[arg(long)]
    pub m_h: Option<f64>,
    #[arg(long)]
    pub batch_csv: Option<PathBuf>,
    #[arg(long)]
    pub ci_csv: Option<PathBuf>,
    /// bins=B
    #[arg(long)]
    pub histogram: Option<String>,
    #[arg(long)]
    pub svg: bool,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Args, Debug, Clone)]
pub struct MetricsArgs {
    /// Trajectory CSV, or a directory of them (final states are compared)
    pub left: PathBuf,
    pub right: PathBuf,
    #[arg(long, default_value_t = 50)]
    pub bins: usize,
    /// bins=B
    #[arg(long)]
    pub histogram: Option<String>,
    #[arg(long)]
    pub svg: bool,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

/// Maps a library error onto the process exit code.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Input(_) | Error::Domain(_) | Error::Parse { .. } | Error::Io(_) => EXIT_USAGE,
        Error::Divergence { .. } | Error::ReplicateDivergence { .. } => EXIT_DIVERGENCE,
        Error::Infeasible(_) | Error::Instability { .. } => EXIT_INFEASIBLE,
        Error::Convergence { .. } => EXIT_FAILURE,
    }
}

/// Parses and runs one invocation; `args[0]` is the program name.
pub fn run<I, S>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<String>,
{
    let args: Vec<String> = args.into_iter().map(Into::into).collect();
    let args = match expand_config(args) {
        Ok(a) => a,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return exit_code(&e);
        }
    };
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                let _ = write!(err, "{text}");
                EXIT_USAGE
            } else {
                let _ = write!(out, "{text}");
                EXIT_OK
            };
        }
    };
    match execute(&cli.command, out, err) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

pub fn execute(command: &Command, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    match command {
        Command::Sample(a) => cmd_sample(a, out, err),
        Command::Plan(a) => cmd_plan(a, out),
        Command::Bounds(a) => cmd_bounds(a, out),
        Command::Infer(a) => cmd_infer(a, out),
        Command::Metrics(a) => cmd_metrics(a, out),
    }
}

/// Replaces `--config <file>` with the file's `key=value` lines as flags,
/// placed before the command-line flags so those take precedence.
pub fn expand_config(args: Vec<String>) -> Result<Vec<String>> {
    let mut rest = Vec::with_capacity(args.len());
    let mut config = None;
    let mut iter = args.into_iter();
    while let Some(a) = iter.next() {
        if a == "--config" {
            config = Some(
                iter.next()
                    .ok_or_else(|| Error::input("--config needs a file"))?,
            );
        } else if let Some(path) = a.strip_prefix("--config=") {
            config = Some(path.to_string());
        } else {
            rest.push(a);
        }
    }
    let Some(path) = config else {
        return Ok(rest);
    };
    let path = PathBuf::from(path);
    let entries = parse_meta(&fs::read_to_string(existing(&path)?)?, &path)?;
    let mut flags = Vec::new();
    for (k, v) in entries {
        match v.as_str() {
            "false" => {}
            "true" | "" => flags.push(format!("--{k}")),
            _ => {
                flags.push(format!("--{k}"));
                flags.push(v);
            }
        }
    }
    let at = rest.len().min(2);
    rest.splice(at..at, flags);
    Ok(rest)
}

/// Rebuilds the `sample` invocation recorded in a sidecar.
pub fn flags_from_meta(entries: &[(String, String)]) -> Vec<String> {
    let mut args = vec!["sample".to_string()];
    for (k, v) in entries {
        if let Some(flag) = k.strip_prefix("flag.") {
            args.push(format!("--{flag}"));
            args.push(v.clone());
        }
    }
    args
}

fn existing(path: &Path) -> Result<&Path> {
    if path.exists() {
        Ok(path)
    } else {
        Err(Error::input(format!("no such file: {}", path.display())))
    }
}

pub fn parse_vector(text: &str, what: &str) -> Result<DVector<f64>> {
    let values: std::result::Result<Vec<f64>, _> =
        text.split(',').map(|s| s.trim().parse::<f64>()).collect();
    match values {
        Ok(v) if !v.is_empty() => Ok(DVector::from_vec(v)),
        _ => Err(Error::input(format!(
            "{what}: expected comma-separated numbers, got `{text}`"
        ))),
    }
}

pub fn parse_precond(spec: &str, dim: usize) -> Result<Preconditioner> {
    if spec == "identity" {
        return Ok(FixedPreconditioner::identity(dim)?.into());
    }
    if let Some(rho) = spec.strip_prefix("ar1:") {
        let rho: f64 = rho
            .parse()
            .map_err(|_| Error::input(format!("bad AR(1) parameter in `{spec}`")))?;
        return Ok(build_ar1(rho, dim)?.into());
    }
    if let Some(path) = spec.strip_prefix("file:") {
        return Ok(FixedPreconditioner::load(existing(Path::new(path))?)?.into());
    }
    Err(Error::input(format!(
        "unknown preconditioner `{spec}` (identity | ar1:<rho> | file:<path>)"
    )))
}

fn parse_bins(spec: &str) -> Result<usize> {
    spec.strip_prefix("bins=")
        .and_then(|b| b.parse::<usize>().ok())
        .filter(|&b| b >= 2)
        .ok_or_else(|| {
            Error::input(format!(
                "--histogram expects bins=B with B >= 2, got `{spec}`"
            ))
        })
}

fn start_point(x0: &Option<String>, dim: usize) -> Result<DVector<f64>> {
    match x0 {
        None => Ok(DVector::zeros(dim)),
        Some(s) => {
            let v = parse_vector(s, "--x0")?;
            if v.len() != dim {
                return Err(Error::input(format!(
                    "--x0 has {} entries, target dimension is {dim}",
                    v.len()
                )));
            }
            Ok(v)
        }
    }
}

fn join(v: &DVector<f64>) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

/// Theory-stage domain violations are infeasibility from the caller's side.
fn as_infeasible(e: Error) -> Error {
    match e {
        Error::Domain(m) => Error::Infeasible(m),
        other => other,
    }
}

pub fn trajectory_file_name(replicate: usize) -> String {
    format!("traj_r{replicate:04}.csv")
}

fn cmd_sample(args: &SampleArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    let (target, precond) = args.target.build()?;
    let x0 = start_point(&args.x0, target.dim())?;
    let config = ChainConfig::new(args.gamma, args.iters, x0, args.seed)
        .with_burn_in(args.burn_in)
        .with_record_every(args.record_every);
    config.validate()?;
    if args.replicates == 0 {
        return Err(Error::input("--replicates must be >= 1"));
    }
    if let Some(w) = crate::sampler::step_size_warning(&target, &precond, args.gamma) {
        writeln!(err, "warning: {w}")?;
    }
    fs::create_dir_all(&args.out_dir)?;

    let mut extra: Vec<(String, String)> = args
        .target
        .flags()
        .into_iter()
        .map(|(k, v)| (format!("flag.{k}"), v))
        .collect();
    for (k, v) in [
        ("gamma", args.gamma.to_string()),
        ("iters", args.iters.to_string()),
        ("replicates", args.replicates.to_string()),
        ("seed", args.seed.to_string()),
        ("out-dir", args.out_dir.display().to_string()),
        ("x0", join(&config.x0)),
        ("burn-in", args.burn_in.to_string()),
        ("record-every", args.record_every.to_string()),
    ] {
        extra.push((format!("flag.{k}"), v));
    }
    extra.push(("x_star".into(), join(target.x_star())));
    extra.push(("M_H".into(), precond.bounds().max.to_string()));

    let results: Vec<Result<()>> = (0..args.replicates)
        .into_par_iter()
        .map(|r| {
            let traj = run_chain_on_stream(&target, &precond, &config, r as u64)?;
            let csv = args.out_dir.join(trajectory_file_name(r));
            traj.write_csv(&csv)?;
            let mut meta = traj.meta_entries();
            meta.extend(extra.iter().cloned());
            fs::write(meta_path(&csv), format_meta(&meta))?;
            Ok(())
        })
        .collect();
    let mut failures = Vec::new();
    for (r, res) in results.into_iter().enumerate() {
        match res {
            Ok(()) => {}
            Err(Error::Divergence { step }) => failures.push((r, step)),
            Err(e) => return Err(e),
        }
    }
    if !failures.is_empty() {
        return Err(if args.replicates == 1 {
            Error::Divergence {
                step: failures[0].1,
            }
        } else {
            Error::ReplicateDivergence { failures }
        });
    }
    writeln!(out, "replicates={}", args.replicates)?;
    writeln!(out, "rows={}", config.recorded_rows())?;
    writeln!(out, "target={}", target.id())?;
    writeln!(out, "precond={}", precond.id())?;
    writeln!(out, "out_dir={}", args.out_dir.display())?;
    Ok(())
}

fn cmd_plan(args: &PlanArgs, out: &mut dyn Write) -> Result<()> {
    let (target, precond) = args.target.build()?;
    let fixed = precond
        .as_fixed()
        .ok_or_else(|| Error::input("plan requires a constant preconditioner"))?;
    let convention: KappaConvention = args.kappa_convention.parse()?;
    let pc = ProblemConstants::from_parts(&target, &precond, convention)?;
    let x0 = start_point(&args.x0, target.dim())?;
    let alpha = args.alpha_exp.unwrap_or(pc.kappa / 4.0);
    let plan =
        plan_sampling(&pc, &target, fixed, &x0, args.epsilon, alpha).map_err(as_infeasible)?;
    writeln!(out, "T={}", plan.horizon)?;
    writeln!(out, "C={}", plan.c_const)?;
    writeln!(out, "C_star={}", plan.c_star)?;
    writeln!(out, "gamma_max={}", plan.gamma_max)?;
    writeln!(out, "K={}", plan.iterations)?;
    writeln!(out, "kappa={}", plan.kappa)?;
    writeln!(out, "kappa_star={}", plan.kappa_star)?;
    writeln!(out, "kappa_convention={}", plan.convention)?;
    writeln!(out, "alpha_exp={}", plan.alpha_exp)?;
    if let Some(note) = &plan.note {
        writeln!(out, "note={note}")?;
    }
    Ok(())
}

fn cmd_bounds(args: &BoundsArgs, out: &mut dyn Write) -> Result<()> {
    let (target, precond) = args.target.build()?;
    let pc = ProblemConstants::from_parts(&target, &precond, KappaConvention::default())?;
    let x0 = start_point(&args.x0, target.dim())?;
    let opts = BoundsOptions {
        alpha: args.alpha,
        r_grid: default_r_grid(args.grid_r),
        d_grid: default_d_grid(args.grid_d),
        mc_samples: args.mc_samples,
        seed: args.seed,
    };
    let (lo, hi) = gamma_interval(&pc).map_err(as_infeasible)?;
    let report = ErgodicityReport::compute(&pc, &target, &precond, args.gamma, &opts)
        .map_err(as_infeasible)?;
    let at_x0 = report.tv_bound(&x0, 0, &target, &precond)?;
    let best = report.grid.best;

    writeln!(out, "gamma={}", args.gamma)?;
    writeln!(out, "gamma_interval_lo={lo}")?;
    writeln!(out, "gamma_interval_hi={hi}")?;
    writeln!(out, "beta={}", pc.beta)?;
    writeln!(out, "lambda_tilde={}", report.lambda_tilde())?;
    writeln!(out, "b={}", report.set.drift.b)?;
    writeln!(out, "b_tilde={}", report.b_tilde())?;
    writeln!(out, "alpha={}", report.set.alpha)?;
    writeln!(out, "level={}", report.set.level)?;
    writeln!(out, "radius={}", report.set.radius)?;
    writeln!(out, "mu_leb={}", report.mu_leb.value)?;
    writeln!(out, "mu_leb_se={}", report.mu_leb.std_error)?;
    writeln!(out, "mu_leb_acceptance={}", report.mu_leb.acceptance())?;
    writeln!(out, "eta={}", report.eta)?;
    writeln!(out, "ln_eta={}", report.ln_eta)?;
    writeln!(out, "r={}", best.r)?;
    writeln!(out, "d={}", best.d)?;
    writeln!(out, "rho={}", best.rho)?;
    writeln!(out, "M_x0={}", at_x0.m_x)?;
    if best.rho >= 1.0 {
        writeln!(
            out,
            "note=rate bound is not below 1; the TV bound is vacuous at this gamma"
        )?;
    }

    if let Some(path) = &args.tv_csv {
        let mut csv = String::from("k,bound,raw\n");
        for k in 0..=args.k_max {
            let b = report.tv_bound(&x0, k, &target, &precond)?;
            csv.push_str(&format!("{k},{},{}\n", b.clipped, b.raw));
        }
        fs::write(path, csv)?;
    }
    if let Some(path) = &args.grid_csv {
        let mut csv = String::from("r,d,rho\n");
        for p in &report.grid.points {
            csv.push_str(&format!("{},{},{}\n", p.r, p.d, p.rho));
        }
        fs::write(path, csv)?;
    }
    Ok(())
}

fn list_csv(dir: &Path) -> Result<Vec<PathBuf>> {
    if !dir.is_dir() {
        return Err(Error::input(format!(
            "no such directory: {}",
            dir.display()
        )));
    }
    let mut files: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(Error::input(format!(
            "no trajectory CSVs in {}",
            dir.display()
        )));
    }
    Ok(files)
}

fn read_meta_value(csv: &Path, key: &str) -> Result<Option<String>> {
    let path = meta_path(csv);
    if !path.exists() {
        return Ok(None);
    }
    let entries = parse_meta(&fs::read_to_string(&path)?, &path)?;
    Ok(entries.into_iter().find(|(k, _)| k == key).map(|(_, v)| v))
}

fn cmd_infer(args: &InferArgs, out: &mut dyn Write) -> Result<()> {
    let mut files = args.traj.clone();
    if let Some(dir) = &args.traj_dir {
        files.extend(list_csv(dir)?);
    }
    if files.is_empty() {
        return Err(Error::input("pass --traj <files> or --traj-dir <dir>"));
    }
    for f in &files {
        existing(f)?;
    }
    let first = &files[0];
    let x_star = match (&args.x_star, read_meta_value(first, "x_star")?) {
        (Some(s), _) => parse_vector(s, "--x-star")?,
        (None, Some(s)) => parse_vector(&s, "x_star in sidecar")?,
        (None, None) => {
            return Err(Error::input(
                "x* unknown: pass --x-star or keep the .meta sidecar",
            ))
        }
    };
    let m_h = match (args.m_h, read_meta_value(first, "M_H")?) {
        (Some(v), _) => v,
        (None, Some(s)) => s
            .parse()
            .map_err(|_| Error::input(format!("bad M_H in sidecar: `{s}`")))?,
        (None, None) => {
            return Err(Error::input(
                "M_H unknown: pass --m-h or keep the .meta sidecar",
            ))
        }
    };
    let dim = x_star.len();
    let u = match &args.u {
        Some(s) => parse_vector(s, "--u")?,
        None => {
            let mut e1 = DVector::zeros(dim);
            e1[0] = 1.0;
            e1
        }
    };
    let bins = args.histogram.as_deref().map(parse_bins).transpose()?;

    let loaded: Vec<Result<(Trajectory, ProjectionCi)>> = files
        .par_iter()
        .map(|f| {
            let traj = Trajectory::read_csv(f)?;
            let ci = projection_ci(&traj, &u, &x_star, m_h, args.level, args.n_batches)?;
            Ok((traj, ci))
        })
        .collect();
    let mut cis = Vec::with_capacity(files.len());
    let mut coord_avgs: Vec<Vec<f64>> = vec![Vec::new(); dim];
    let mut single_states = None;
    for res in loaded {
        let (traj, ci) = res?;
        if traj.dim() != dim {
            return Err(Error::input("trajectories have inconsistent dimensions"));
        }
        for (j, avgs) in coord_avgs.iter_mut().enumerate() {
            avgs.push(traj.coordinate(j).iter().sum::<f64>() / traj.len() as f64);
        }
        if files.len() == 1 {
            single_states = Some(traj);
        }
        cis.push(ci);
    }

    writeln!(out, "files={}", files.len())?;
    writeln!(out, "u={}", join(&u))?;
    writeln!(out, "level={}", args.level)?;
    writeln!(out, "n_batches={}", args.n_batches)?;
    if let [ci] = cis.as_slice() {
        writeln!(out, "k={}", ci.k)?;
        writeln!(out, "z={}", ci.z)?;
        writeln!(out, "point_estimate={}", ci.point_estimate)?;
        writeln!(out, "sigma_hat={}", ci.sigma_hat)?;
        writeln!(out, "lo={}", ci.interval.0)?;
        writeln!(out, "hi={}", ci.interval.1)?;
        writeln!(out, "degenerate={}", ci.degenerate)?;
    } else {
        let n = cis.len() as f64;
        let covered = cis.iter().filter(|c| c.covers(args.center)).count();
        writeln!(
            out,
            "mean_point_estimate={}",
            cis.iter().map(|c| c.point_estimate).sum::<f64>() / n
        )?;
        writeln!(
            out,
            "mean_sigma_hat={}",
            cis.iter().map(|c| c.sigma_hat).sum::<f64>() / n
        )?;
        writeln!(out, "center={}", args.center)?;
        writeln!(out, "coverage={}", covered as f64 / n)?;
        writeln!(
            out,
            "degenerate={}",
            cis.iter().filter(|c| c.degenerate).count()
        )?;
        if cis.len() >= crate::inference::MIN_NORMALITY_INPUTS {
            let z: Vec<f64> = cis.iter().map(|c| c.studentized(args.center)).collect();
            match normality_diagnostic(&z) {
                Ok(check) => {
                    writeln!(out, "ks_statistic={}", check.ks_statistic)?;
                    writeln!(out, "ks_critical={}", check.critical)?;
                    writeln!(
                        out,
                        "normality={}",
                        if check.pass { "pass" } else { "fail" }
                    )?;
                }
                Err(e) => writeln!(out, "normality=unavailable ({e})")?,
            }
        }
    }
    writeln!(
        out,
        "estimand=mean of M_H^(-1/2)<u, x - x*> under the chain's stationary law pi_gamma, not the mode x*"
    )?;

    if let Some(path) = &args.batch_csv {
        let mut csv = String::from("replicate,batch,mean\n");
        for (r, ci) in cis.iter().enumerate() {
            for (b, m) in ci.batches.means.iter().enumerate() {
                csv.push_str(&format!("{r},{b},{m}\n"));
            }
        }
        fs::write(path, csv)?;
    }
    if let Some(path) = &args.ci_csv {
        let mut csv = String::from("file,point,sigma_hat,lo,hi\n");
        for (f, ci) in files.iter().zip(&cis) {
            csv.push_str(&format!(
                "{},{},{},{},{}\n",
                f.display(),
                ci.point_estimate,
                ci.sigma_hat,
                ci.interval.0,
                ci.interval.1
            ));
        }
        fs::write(path, csv)?;
    }
    if let Some(bins) = bins {
        fs::create_dir_all(&args.out_dir)?;
        for (j, avgs) in coord_avgs.iter().enumerate().take(dim) {
            let (values, label) = match &single_states {
                Some(t) => (t.coordinate(j), format!("x{} states", j + 1)),
                None => (avgs.clone(), format!("x{} replicate averages", j + 1)),
            };
            let hist = Histogram::new(&values, bins, common_range(&values, &values)?)?;
            fs::write(
                args.out_dir.join(format!("hist_x{}.csv", j + 1)),
                hist.to_csv(),
            )?;
            if args.svg {
                fs::write(
                    args.out_dir.join(format!("hist_x{}.svg", j + 1)),
                    render_histogram(&hist, &label),
                )?;
            }
        }
    }
    Ok(())
}

/// Per-coordinate samples: every row of a CSV, or the final state of each CSV in a directory.
fn load_samples(path: &Path) -> Result<Vec<Vec<f64>>> {
    if path.is_dir() {
        let mut cols: Vec<Vec<f64>> = Vec::new();
        for f in list_csv(path)? {
            let t = Trajectory::read_csv(&f)?;
            if t.is_empty() {
                return Err(Error::input(format!("{} has no rows", f.display())));
            }
            if cols.is_empty() {
                cols = vec![Vec::new(); t.dim()];
            }
            if t.dim() != cols.len() {
                return Err(Error::input("trajectories have inconsistent dimensions"));
            }
            for (j, c) in cols.iter_mut().enumerate() {
                c.push(t.terminal[j]);
            }
        }
        Ok(cols)
    } else {
        let t = Trajectory::read_csv(existing(path)?)?;
        Ok((0..t.dim()).map(|j| t.coordinate(j)).collect())
    }
}

fn cmd_metrics(args: &MetricsArgs, out: &mut dyn Write) -> Result<()> {
    let left = load_samples(&args.left)?;
    let right = load_samples(&args.right)?;
    if left.len() != right.len() {
        return Err(Error::input(format!(
            "dimension mismatch: {} vs {} coordinates",
            left.len(),
            right.len()
        )));
    }
    let hist_bins = args.histogram.as_deref().map(parse_bins).transpose()?;
    writeln!(out, "coord,w2,tv")?;
    for (j, (a, b)) in left.iter().zip(&right).enumerate() {
        let w2 = w2_empirical_1d(a, b)?;
        let tv = tv_histogram(a, b, args.bins, None)?;
        writeln!(out, "{},{w2},{tv}", j + 1)?;
        if let Some(bins) = hist_bins {
            fs::create_dir_all(&args.out_dir)?;
            let range = common_range(a, b)?;
            let ha = Histogram::new(a, bins, range)?;
            let hb = Histogram::new(b, bins, range)?;
            let edges = ha.edges();
            let mut csv = String::from("bin,lo,hi,left,right\n");
            for i in 0..bins {
                csv.push_str(&format!(
                    "{i},{},{},{},{}\n",
                    edges[i],
                    edges[i + 1],
                    ha.counts[i],
                    hb.counts[i]
                ));
            }
            fs::write(args.out_dir.join(format!("hist_x{}.csv", j + 1)), csv)?;
            if args.svg {
                for (side, h) in [("left", &ha), ("right", &hb)] {
                    let name = format!("hist_x{}_{side}.svg", j + 1);
                    fs::write(
                        args.out_dir.join(name),
                        render_histogram(h, &format!("x{} {side}", j + 1)),
                    )?;
                }
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_capture(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = run(
            std::iter::once("plmc").chain(args.iter().copied()),
            &mut out,
            &mut err,
        );
        (
            code,
            String::from_utf8(out).unwrap(),
            String::from_utf8(err).unwrap(),
        )
    }

    #[test]
    fn plan_identity_horizon() {
        let (code, out, _) = run_capture(&[
            "plan",
            "--target",
            "mixture",
            "--a",
            "0",
            "--epsilon",
            "0.1",
            "--alpha-exp",
            "0.25",
        ]);
        assert_eq!(code, 0);
        let t: f64 = out
            .lines()
            .find_map(|l| l.strip_prefix("T="))
            .unwrap()
            .parse()
            .unwrap();
        assert!((t - 20f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn missing_gamma_is_usage_error() {
        let (code, _, err) = run_capture(&["sample", "--target", "mixture", "--a", "0.5,0"]);
        assert_eq!(code, EXIT_USAGE);
        assert!(err.contains("--gamma"));
    }

    #[test]
    fn config_expansion_order() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("run.cfg");
        fs::write(&cfg, "target=mixture\na=0.5,0\nepsilon=0.5\n# comment\n").unwrap();
        let args = expand_config(vec![
            "plmc".into(),
            "plan".into(),
            "--epsilon".into(),
            "0.1".into(),
            "--config".into(),
            cfg.display().to_string(),
        ])
        .unwrap();
        assert_eq!(
            args[..8],
            [
                "plmc",
                "plan",
                "--target",
                "mixture",
                "--a",
                "0.5,0",
                "--epsilon",
                "0.5"
            ]
        );
        assert_eq!(args[8..], ["--epsilon", "0.1"]);
        let cli = Cli::try_parse_from(&args).unwrap();
        match cli.command {
            Command::Plan(p) => assert_eq!(p.epsilon, 0.1),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn precond_specs() {
        assert_eq!(parse_precond("identity", 3).unwrap().id(), "identity");
        assert_eq!(parse_precond("ar1:0.5", 2).unwrap().bounds().max, 1.5);
        assert!(parse_precond("ar1:x", 2).is_err());
        assert!(parse_precond("file:/nonexistent/h.txt", 2).is_err());
        assert!(parse_precond("diag", 2).is_err());
    }

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Error::Divergence { step: 3 }), EXIT_DIVERGENCE);
        assert_eq!(exit_code(&Error::Infeasible("x".into())), EXIT_INFEASIBLE);
        assert_eq!(exit_code(&Error::input("x")), EXIT_USAGE);
    }
}
