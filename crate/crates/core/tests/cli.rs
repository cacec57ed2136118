use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use plmc::cli::flags_from_meta;
use plmc::sampler::parse_meta;

fn plmc(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_plmc"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn value<'a>(text: &'a str, key: &str) -> &'a str {
    text.lines()
        .find_map(|l| l.strip_prefix(key).and_then(|rest| rest.strip_prefix('=')))
        .unwrap_or_else(|| panic!("no `{key}` in:\n{text}"))
}

fn num(text: &str, key: &str) -> f64 {
    value(text, key).parse().unwrap()
}

const SAMPLE: &[&str] = &[
    "sample",
    "--target",
    "mixture",
    "--a",
    "0.5,0",
    "--precond",
    "ar1:0.5",
    "--gamma",
    "0.1",
    "--iters",
    "2000",
    "--replicates",
    "4",
    "--seed",
    "5",
    "--out-dir",
    "runs",
];

#[test]
fn sample_writes_trajectories_and_sidecars() {
    let dir = tempfile::tempdir().unwrap();
    let out = plmc(dir.path(), SAMPLE);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert_eq!(value(&text, "replicates"), "4");
    assert_eq!(value(&text, "rows"), "2000");
    for r in 0..4 {
        assert!(dir.path().join(format!("runs/traj_r{r:04}.csv")).is_file());
        assert!(dir.path().join(format!("runs/traj_r{r:04}.meta")).is_file());
    }
    let a = fs::read(dir.path().join("runs/traj_r0000.csv")).unwrap();
    let b = fs::read(dir.path().join("runs/traj_r0001.csv")).unwrap();
    assert_ne!(a, b, "replicates use distinct streams");
}

#[test]
fn sidecar_flags_reproduce_the_trajectory() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(plmc(dir.path(), SAMPLE).status.code(), Some(0));
    let meta_path = dir.path().join("runs/traj_r0002.meta");
    let meta = parse_meta(&fs::read_to_string(&meta_path).unwrap(), &meta_path).unwrap();
    let mut args = flags_from_meta(&meta);
    args.extend(["--out-dir".to_string(), "again".to_string()]);
    let args: Vec<&str> = args.iter().map(String::as_str).collect();
    assert_eq!(plmc(dir.path(), &args).status.code(), Some(0));
    for r in 0..4 {
        let name = format!("traj_r{r:04}.csv");
        assert_eq!(
            fs::read(dir.path().join("runs").join(&name)).unwrap(),
            fs::read(dir.path().join("again").join(&name)).unwrap()
        );
    }
}

#[test]
fn config_file_supplies_flags_and_command_line_overrides() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("run.conf"),
        "# sampler settings\ntarget=gcos\nlambda1=0.5\ndim=3\ngamma=0.2\niters=400\nout-dir=from_config\n",
    )
    .unwrap();
    let out = plmc(
        dir.path(),
        &["sample", "--config", "run.conf", "--iters", "50"],
    );
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = stdout(&out);
    assert_eq!(value(&text, "rows"), "50");
    let meta = fs::read_to_string(dir.path().join("from_config/traj_r0000.meta")).unwrap();
    assert_eq!(value(&meta, "gamma"), "0.2");
    assert_eq!(value(&meta, "K"), "50");
}

#[test]
fn divergence_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let out = plmc(
        dir.path(),
        &[
            "sample",
            "--target",
            "gcos",
            "--lambda1",
            "0.5",
            "--dim",
            "2",
            "--gamma",
            "50",
            "--iters",
            "100",
            "--x0",
            "1,1",
        ],
    );
    assert_eq!(out.status.code(), Some(3));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("diverged"), "{err}");
    assert!(err.contains("outside the admissible interval"), "{err}");
}

#[test]
fn infeasible_theory_exits_with_four() {
    let dir = tempfile::tempdir().unwrap();
    let bounds = plmc(
        dir.path(),
        &[
            "bounds", "--target", "gaussian", "--dim", "2", "--gamma", "2.5",
        ],
    );
    assert_eq!(bounds.status.code(), Some(4));
    let plan = plmc(
        dir.path(),
        &[
            "plan",
            "--target",
            "gaussian",
            "--dim",
            "1",
            "--epsilon",
            "0.1",
            "--x0",
            "1",
            "--alpha-exp",
            "5",
        ],
    );
    assert_eq!(plan.status.code(), Some(4));
}

#[test]
fn usage_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(plmc(dir.path(), &["bogus"]).status.code(), Some(2));
    assert_eq!(
        plmc(
            dir.path(),
            &["sample", "--target", "mixture", "--a", "0.5,0"]
        )
        .status
        .code(),
        Some(2)
    );
    assert_eq!(
        plmc(dir.path(), &["infer", "--traj", "missing.csv"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        plmc(
            dir.path(),
            &["sample", "--target", "mixture", "--a", "1.5,0", "--gamma", "0.1"]
        )
        .status
        .code(),
        Some(2)
    );

    assert_eq!(plmc(dir.path(), SAMPLE).status.code(), Some(0));
    let out = plmc(
        dir.path(),
        &["infer", "--traj", "runs/traj_r0000.csv", "--u", "1,1"],
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unit vector"));
}

#[test]
fn plan_reports_horizon_and_degenerate_note() {
    let dir = tempfile::tempdir().unwrap();
    let out = plmc(
        dir.path(),
        &[
            "plan",
            "--target",
            "gaussian",
            "--dim",
            "2",
            "--epsilon",
            "0.2",
            "--x0",
            "1,1",
        ],
    );
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    let (horizon, gamma_max, k) = (num(&text, "T"), num(&text, "gamma_max"), num(&text, "K"));
    assert!(horizon > 0.0 && gamma_max > 0.0);
    assert_eq!(k, (horizon / gamma_max).ceil());
    assert_eq!(value(&text, "kappa_convention"), "appendix");

    let text_conv = stdout(&plmc(
        dir.path(),
        &[
            "plan",
            "--target",
            "gaussian",
            "--dim",
            "2",
            "--epsilon",
            "0.2",
            "--x0",
            "1,1",
            "--kappa-convention",
            "text",
            "--alpha-exp",
            "0.25",
        ],
    ));
    assert_eq!(num(&text_conv, "kappa"), 2.0 * num(&text, "kappa"));
    assert!(num(&text_conv, "T") < horizon);
    // κ/4 under the text convention sits on the exponential-moment boundary
    let boundary = plmc(
        dir.path(),
        &[
            "plan",
            "--target",
            "gaussian",
            "--dim",
            "2",
            "--epsilon",
            "0.2",
            "--x0",
            "1,1",
            "--kappa-convention",
            "text",
        ],
    );
    assert_eq!(boundary.status.code(), Some(4));

    let degenerate = stdout(&plmc(
        dir.path(),
        &[
            "plan",
            "--target",
            "gaussian",
            "--dim",
            "1",
            "--epsilon",
            "100",
            "--x0",
            "0",
        ],
    ));
    assert_eq!(value(&degenerate, "K"), "0");
    assert!(value(&degenerate, "note").contains("no iterations"));
}

#[test]
fn bounds_report_exact_ball_for_scalar_preconditioner() {
    let dir = tempfile::tempdir().unwrap();
    let out = plmc(
        dir.path(),
        &[
            "bounds",
            "--target",
            "gaussian",
            "--dim",
            "1",
            "--gamma",
            "0.5",
            "--tv-csv",
            "tv.csv",
            "--grid-csv",
            "grid.csv",
            "--k-max",
            "20",
        ],
    );
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert_eq!(num(&text, "gamma_interval_lo"), 0.0);
    assert_eq!(num(&text, "gamma_interval_hi"), 2.0);
    assert_eq!(num(&text, "lambda_tilde"), 0.25);
    assert_eq!(num(&text, "mu_leb_acceptance"), 1.0);
    assert_eq!(num(&text, "mu_leb_se"), 0.0);
    assert!((num(&text, "mu_leb") - 2.0 * num(&text, "radius")).abs() <= 1e-12);
    assert!((num(&text, "eta").ln() - num(&text, "ln_eta")).abs() <= 1e-12);
    let tv = fs::read_to_string(dir.path().join("tv.csv")).unwrap();
    assert_eq!(tv.lines().next(), Some("k,bound,raw"));
    assert_eq!(tv.lines().count(), 22);
    assert!(
        fs::read_to_string(dir.path().join("grid.csv"))
            .unwrap()
            .lines()
            .count()
            > 1
    );
}

#[test]
fn infer_over_replicates_writes_histograms() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(plmc(dir.path(), SAMPLE).status.code(), Some(0));
    let out = plmc(
        dir.path(),
        &[
            "infer",
            "--traj-dir",
            "runs",
            "--histogram",
            "bins=12",
            "--svg",
            "--out-dir",
            "inf",
            "--ci-csv",
            "ci.csv",
            "--batch-csv",
            "b.csv",
        ],
    );
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = stdout(&out);
    let coverage = num(&text, "coverage");
    assert!((0.0..=1.0).contains(&coverage));
    assert!(value(&text, "estimand").contains("pi_gamma"));
    assert_eq!(
        fs::read_to_string(dir.path().join("ci.csv"))
            .unwrap()
            .lines()
            .count(),
        5
    );
    assert_eq!(
        fs::read_to_string(dir.path().join("b.csv"))
            .unwrap()
            .lines()
            .count(),
        1 + 4 * 30
    );
    for j in 1..=2 {
        assert!(dir.path().join(format!("inf/hist_x{j}.csv")).is_file());
        let svg = fs::read_to_string(dir.path().join(format!("inf/hist_x{j}.svg"))).unwrap();
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
    }
}

#[test]
fn metrics_compare_trajectories() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(plmc(dir.path(), SAMPLE).status.code(), Some(0));
    let same = stdout(&plmc(
        dir.path(),
        &["metrics", "runs/traj_r0000.csv", "runs/traj_r0000.csv"],
    ));
    let mut lines = same.lines();
    assert_eq!(lines.next(), Some("coord,w2,tv"));
    for line in lines {
        let fields: Vec<&str> = line.split(',').collect();
        assert_eq!(fields[1].parse::<f64>().unwrap(), 0.0);
        assert_eq!(fields[2].parse::<f64>().unwrap(), 0.0);
    }
    let out = plmc(
        dir.path(),
        &[
            "metrics",
            "runs/traj_r0000.csv",
            "runs/traj_r0001.csv",
            "--histogram",
            "bins=10",
            "--svg",
            "--out-dir",
            "m",
        ],
    );
    assert_eq!(out.status.code(), Some(0));
    let hist = fs::read_to_string(dir.path().join("m/hist_x1.csv")).unwrap();
    assert_eq!(hist.lines().next(), Some("bin,lo,hi,left,right"));
    assert_eq!(hist.lines().count(), 11);
    assert!(dir.path().join("m/hist_x2_left.svg").is_file());
    assert!(dir.path().join("m/hist_x2_right.svg").is_file());
}
