//! `kvbeam` command-line driver.
//!
//! Every subcommand writes its artifacts into `--out` together with a
//! `manifest.json` listing each artifact with its SHA-256 hash. Artifact
//! bodies are deterministic; the wall time lives only in the manifest.
//!
//! Exit codes: 0 success, 1 configuration error, 2 numerical failure.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::Context;
use clap::{Parser, Subcommand};
use kvbeam::fem::{assemble, build_mesh, write_triplets, AssembledSystem};
use kvbeam::ineq::{
    check_hardy, check_interpolation, concentration_ratios, hardy_constant, FamilyKind, HardyCase, HardyConstant,
    TestFunctionFamily,
};
use kvbeam::model::{validate_config, BeamConfig};
use kvbeam::ratecalc::{
    breakpoint_values, default_alpha_grid, emit_figure1, optimize_gamma, write_figure1_csv, BREAKPOINTS, DEFAULT_ETA,
    DEFAULT_RESOLUTION,
};
use kvbeam::resolvent::{default_window, fit_gamma, log_grid, sweep, write_sweep_csv, DEFAULT_MAX_ITER, DEFAULT_POINTS, DEFAULT_SEED, DEFAULT_TOL};
use kvbeam::timestep::{default_initial_data, fit_decay, simulate, DEFAULT_WINDOW};
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

#[derive(Parser, Debug)]
#[command(name = "kvbeam", version, about = "Beam with localized Kelvin-Voigt damping: experiments and artifacts")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Configuration file with `key = value` lines.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory (created if missing).
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// Override a configuration key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,

    /// Worker threads for parallel sweeps.
    #[arg(long, global = true)]
    jobs: Option<usize>,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// Time-integrate the beam and record energy and dissipation.
    Simulate,
    /// Sweep the resolvent norm along the imaginary axis and fit its growth.
    Resolvent,
    /// Solve the decay-rate program on an alpha grid.
    Rates,
    /// Hardy and interpolation inequality checks.
    Ineq,
    /// Decay-exponent curve tau(alpha).
    Figure1,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Self::Simulate => "simulate",
            Self::Resolvent => "resolvent",
            Self::Rates => "rates",
            Self::Ineq => "ineq",
            Self::Figure1 => "figure1",
        }
    }
}

/// Failure classes mapped to exit codes.
#[derive(Debug)]
enum Failure {
    Config(String),
    Numerical(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Self::Config(_) => 1,
            Self::Numerical(_) => 2,
        }
    }
}

impl From<kvbeam::Error> for Failure {
    fn from(e: kvbeam::Error) -> Self {
        use kvbeam::Error as E;
        match e {
            E::Config(_) | E::InvalidParameter(_) | E::AlphaDomain(_) | E::Io(_) => Self::Config(e.to_string()),
            other => Self::Numerical(other.to_string()),
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Self::Config(format!("{e:#}"))
    }
}

struct Artifact {
    name: String,
    body: Vec<u8>,
}

#[derive(Serialize)]
struct ManifestEntry {
    path: String,
    sha256: String,
    bytes: usize,
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn csv_artifact(name: &str, write: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> Artifact {
    let mut body = Vec::new();
    write(&mut body).expect("writing to memory cannot fail");
    Artifact { name: name.into(), body }
}

fn json_artifact(name: &str, value: &Value) -> Artifact {
    let mut body = serde_json::to_vec_pretty(value).expect("json serialisation");
    body.push(b'\n');
    Artifact { name: name.into(), body }
}

fn load_config(cli: &Cli) -> Result<(BeamConfig<f64>, String), Failure> {
    let text = match &cli.config {
        Some(path) => fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?,
        None => String::new(),
    };
    let mut cfg = BeamConfig::<f64>::parse(&text)?;
    for item in &cli.set {
        let (key, value) = item
            .split_once('=')
            .ok_or_else(|| Failure::Config(format!("--set expects KEY=VALUE, got `{item}`")))?;
        cfg.set(key.trim(), value)?;
    }
    let violations = validate_config(&cfg);
    if !violations.is_empty() {
        let lines: Vec<String> = violations.iter().map(ToString::to_string).collect();
        return Err(Failure::Config(lines.join("; ")));
    }
    Ok((cfg.clone(), cfg.to_text()))
}

fn build_system(cfg: &BeamConfig<f64>) -> Result<AssembledSystem<f64>, Failure> {
    let mesh = build_mesh(cfg.n_elements, cfg.grading)?;
    Ok(assemble(&mesh, &cfg.profile, cfg.quad_tol)?)
}

fn run_simulate(cfg: &BeamConfig<f64>) -> Result<(Vec<Artifact>, Value), Failure> {
    let sys = build_system(cfg)?;
    let (u0, v0) = default_initial_data(&sys);
    let (traj, _) = simulate(&sys, &u0, &v0, cfg.time_horizon, cfg.dt)?;
    let e0 = traj.energies[0];
    let drift = traj.energies.iter().map(|e| (e - e0).abs()).fold(0.0, f64::max) / e0;
    let fit = match fit_decay(&traj, DEFAULT_WINDOW) {
        Ok(f) => json!({
            "exponent": f.exponent,
            "prefactor": f.prefactor,
            "window": [f.window.0, f.window.1],
            "rms_residual": f.residual,
            "samples": f.samples,
        }),
        Err(e) => json!({ "error": e.to_string() }),
    };
    let summary = json!({
        "steps": traj.len() - 1,
        "initial_energy": e0,
        "final_energy": traj.energies.last(),
        "max_relative_energy_drift": drift,
        "first_energy_increase": traj.first_increase(1e-12),
        "accumulated_dissipation_residual": traj.dissipation_residuals().iter().sum::<f64>(),
        "decay_fit": fit,
        "decay_fit_window_fractions": [DEFAULT_WINDOW.0, DEFAULT_WINDOW.1],
    });
    let artifacts = vec![
        csv_artifact("trajectory.csv", |w| traj.write_csv(w)),
        csv_artifact("mass.txt", |w| write_triplets(&sys.mass, w)),
        csv_artifact("stiffness.txt", |w| write_triplets(&sys.stiffness, w)),
        csv_artifact("damping.txt", |w| write_triplets(&sys.damping, w)),
        json_artifact("simulate.json", &summary),
    ];
    Ok((artifacts, json!({})))
}

fn run_resolvent(cfg: &BeamConfig<f64>) -> Result<(Vec<Artifact>, Value), Failure> {
    let sys = build_system(cfg)?;
    let (lo, hi) = default_window(cfg.n_elements);
    let grid = log_grid(lo, hi, DEFAULT_POINTS);
    let results = sweep(&sys, &grid, DEFAULT_TOL, DEFAULT_MAX_ITER)?;
    let samples: Vec<_> = results.iter().filter_map(|r| r.as_ref().ok().copied()).collect();
    let failures: Vec<Value> = grid
        .iter()
        .zip(&results)
        .filter_map(|(l, r)| r.as_ref().err().map(|e| json!({ "lambda": l, "error": e.to_string() })))
        .collect();
    let fit = fit_gamma(&samples)?;
    let summary = json!({
        "gamma_num": fit.gamma_num,
        "lambda_window": [fit.lambda_window.0, fit.lambda_window.1],
        "rms_residual": fit.residual,
        "fitted_samples": fit.samples,
        "grid": { "lo": lo, "hi": hi, "points": DEFAULT_POINTS },
        "tolerance": DEFAULT_TOL,
        "max_iterations": DEFAULT_MAX_ITER,
        "failed_samples": failures,
    });
    let artifacts = vec![
        csv_artifact("resolvent_sweep.csv", |w| write_sweep_csv(&grid, &results, w)),
        json_artifact("resolvent.json", &summary),
    ];
    Ok((artifacts, json!({ "power_iteration": DEFAULT_SEED })))
}

fn figure1_artifacts() -> Result<Vec<Artifact>, Failure> {
    let rows = emit_figure1(&default_alpha_grid())?;
    let meta: Vec<Value> = breakpoint_values()
        .iter()
        .map(|b| json!({ "alpha": b.alpha, "left": b.left, "right": b.right }))
        .collect();
    Ok(vec![
        csv_artifact("figure1.csv", |w| write_figure1_csv(&rows, w)),
        json_artifact("figure1_meta.json", &json!({ "breakpoints": BREAKPOINTS, "one_sided": meta, "convention": "left branch at breakpoints" })),
    ])
}

fn run_rates() -> Result<(Vec<Artifact>, Value), Failure> {
    let mut artifacts = figure1_artifacts()?;
    let grid = default_alpha_grid();
    let mut per_alpha = Vec::with_capacity(grid.len());
    for &a in &grid {
        let r = optimize_gamma(a, DEFAULT_RESOLUTION)?;
        per_alpha.push(json!({
            "alpha": a,
            "gamma_star": r.gamma_star,
            "delta_star": r.delta_star,
            "branch": r.branch.label(),
            "active": r.active_constraints.iter().map(|c| c.label()).collect::<Vec<_>>(),
            "eta_sensitivity": r.eta_sensitivity,
        }));
    }
    artifacts.push(json_artifact(
        "rates.json",
        &json!({ "eta": DEFAULT_ETA, "resolution": DEFAULT_RESOLUTION, "rates": per_alpha }),
    ));
    Ok((artifacts, json!({})))
}

const HARDY_CASES: [(f64, f64); 4] = [(0.0, 0.0), (1.0, 0.0), (2.0, 0.0), (2.5, 0.5)];
const HARDY_SEED: u64 = 1000;
const HARDY_COUNT: usize = 200;
const INTERP_SEED: u64 = 2024;
const INTERP_COUNT: usize = 100;

fn run_ineq() -> Result<(Vec<Artifact>, Value), Failure> {
    let kinds = [FamilyKind::Polynomial, FamilyKind::Spline, FamilyKind::RandomFourier];
    let mut cases = Vec::new();
    for (alpha, beta) in HARDY_CASES {
        for (i, kind) in kinds.into_iter().enumerate() {
            let rep = check_hardy(&TestFunctionFamily::new(kind, HARDY_COUNT, HARDY_SEED + i as u64), alpha, beta)?;
            cases.push(json!({
                "alpha": alpha,
                "beta": beta,
                "family": kind.label(),
                "K": rep.k,
                "2K": rep.two_k(),
                "max_ratio": rep.max_ratio,
                "arg_max": rep.arg_max,
                "within_bracket": rep.within_bracket(),
                "seed": rep.seed,
                "samples": rep.samples,
                "skipped": rep.skipped,
            }));
        }
    }
    let condition = match hardy_constant(&HardyCase::new(3.0, 0.0))? {
        HardyConstant::Infinite { condition } => condition,
        HardyConstant::Finite { .. } => "none",
    };
    let conc: Vec<Value> = concentration_ratios(3.0, 0.0, 1.0, &[1e-2, 1e-3, 1e-4, 1e-5])
        .into_iter()
        .map(|(e, r)| json!({ "eps": e, "ratio": r }))
        .collect();
    let fam = TestFunctionFamily::new(FamilyKind::Spline, INTERP_COUNT, INTERP_SEED);
    let unit = check_interpolation(&fam, 0.0, 1.0)?;
    let wide = check_interpolation(&fam, 0.0, 10.0)?;
    let report = json!({
        "hardy": cases,
        "divergent_case": { "alpha": 3.0, "beta": 0.0, "failing_condition": condition, "concentrating_family": conc },
        "interpolation": {
            "seed": INTERP_SEED,
            "samples": INTERP_COUNT,
            "empirical_K_unit": unit.empirical_k,
            "empirical_K_dilated": wide.empirical_k,
            "dilation_deviation": unit.dilation_deviation.max(wide.dilation_deviation),
        },
    });
    Ok((vec![json_artifact("ineq.json", &report)], json!({ "hardy": HARDY_SEED, "interpolation": INTERP_SEED })))
}

fn write_artifacts(out: &Path, artifacts: &[Artifact]) -> anyhow::Result<Vec<ManifestEntry>> {
    fs::create_dir_all(out).with_context(|| format!("creating output directory {}", out.display()))?;
    artifacts
        .iter()
        .map(|a| {
            let path = out.join(&a.name);
            fs::write(&path, &a.body).with_context(|| format!("writing {}", path.display()))?;
            Ok(ManifestEntry { path: a.name.clone(), sha256: hex(&Sha256::digest(&a.body)), bytes: a.body.len() })
        })
        .collect()
}

fn run(cli: &Cli) -> Result<(), Failure> {
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(Failure::Config("--jobs must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| Failure::Config(format!("thread pool: {e}")))?;
    }
    let start = Instant::now();
    let (cfg, cfg_text) = load_config(cli)?;
    let (artifacts, seeds) = match cli.command {
        Command::Simulate => run_simulate(&cfg)?,
        Command::Resolvent => run_resolvent(&cfg)?,
        Command::Rates => run_rates()?,
        Command::Ineq => run_ineq()?,
        Command::Figure1 => (figure1_artifacts()?, json!({})),
    };
    let entries = write_artifacts(&cli.out, &artifacts)?;
    let manifest = json!({
        "command": cli.command.name(),
        "version": env!("CARGO_PKG_VERSION"),
        "config_file": cli.config.as_ref().map(|p| p.display().to_string()),
        "overrides": cli.set,
        "effective_config": cfg_text,
        "seeds": seeds,
        "jobs": cli.jobs,
        "wall_time_seconds": start.elapsed().as_secs_f64(),
        "artifacts": entries,
    });
    let path = cli.out.join("manifest.json");
    fs::write(&path, serde_json::to_vec_pretty(&manifest).expect("json serialisation"))
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::Config(m) => eprintln!("kvbeam {}: configuration error: {m}", cli.command.name()),
                Failure::Numerical(m) => eprintln!("kvbeam {}: numerical failure: {m}", cli.command.name()),
            }
            ExitCode::from(f.code())
        }
    }
}
