//! Acceptance criteria. Each criterion prints one `PASS`/`FAIL` line; the
//! process exits non-zero if any criterion fails.

use std::time::{Duration, Instant};

use kvbeam::fem::{assemble, build_mesh, grading_for_ratio, AssembledSystem};
use kvbeam::ineq::{
    check_hardy, check_interpolation, concentration_ratios, hardy_constant, interpolation_ratio, FamilyKind, HardyCase,
    HardyConstant, TestFunction, TestFunctionFamily,
};
use kvbeam::model::DampingProfile;
use kvbeam::ratecalc::{breakpoint_values, emit_figure1, gamma_closed, optimize_gamma, tau_closed, ConstraintId};
use kvbeam::resolvent::{fit_gamma, log_grid, sweep, ResolventSample};
use kvbeam::timestep::{default_initial_data, fit_decay, simulate, DEFAULT_WINDOW};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn system(n: usize, grading: f64, alpha: f64, kappa: f64) -> AssembledSystem<f64> {
    let mesh = build_mesh(n, grading).expect("mesh");
    let profile = DampingProfile::pure_power(alpha, kappa).expect("profile");
    assemble(&mesh, &profile, 1e-10).expect("assembly")
}

/// Largest-to-smallest element ratio used for graded meshes.
const GRADED_RATIO: f64 = 100.0;

fn graded(n: usize) -> f64 {
    grading_for_ratio(n, GRADED_RATIO)
}

fn closed_form_table() -> Outcome {
    let grid: Vec<f64> = (1..=50).map(|k| 0.1 * k as f64 - 0.05).collect();
    let identity = grid.iter().map(|&a| (gamma_closed(a).unwrap() * tau_closed(a).unwrap() - 2.0).abs()).fold(0.0, f64::max);
    let jumps = breakpoint_values().iter().map(|b| (b.left - b.right).abs()).fold(0.0, f64::max);
    let peak: f64 = tau_closed(5.0 / 3.0).unwrap();
    let sup = grid.iter().map(|&a| tau_closed(a).unwrap()).fold(0.0, f64::max);
    let pass = identity <= 1e-12 && jumps <= 1e-12 && (peak - 2.5).abs() <= 1e-12 && sup <= peak;
    outcome(pass, format!("max|γτ-2|={identity:.1e}, max one-sided jump={jumps:.1e}, τ(5/3)={peak}, grid max={sup:.6}"))
}

fn optimizer_cases() -> Outcome {
    use ConstraintId::*;
    let alphas = [0.5, 1.0, 1.5, 5.0 / 3.0 - 0.01, 5.0 / 3.0 + 0.01, 2.0, 2.5, 3.0 - 0.01, 3.5, 4.0, 4.5];
    let mut worst: f64 = 0.0;
    let mut bad_sets = Vec::new();
    for &a in &alphas {
        let r = optimize_gamma(a, 1e-6).unwrap();
        worst = worst.max((r.gamma_star - gamma_closed(a).unwrap()).abs());
        let expected: &[ConstraintId] = if a < 5.0 / 3.0 {
            &[ThreeMinusAlpha, BetaPrimeMinusOne]
        } else if a < 3.0 {
            &[BetaPrimeMinusOne, AlphaPlusThree]
        } else {
            &[DeltaRegime, AlphaPlusThree]
        };
        if !expected.iter().all(|c| r.active_constraints.contains(c)) {
            bad_sets.push(format!("α={a:.3}: {:?}", r.active_constraints));
        }
    }
    outcome(worst <= 5e-3 && bad_sets.is_empty(), format!("max|γ*-γ_closed|={worst:.2e}, active-set mismatches={bad_sets:?}"))
}

fn energy_law() -> Outcome {
    let free = system(64, 1.0, 1.0, 0.0);
    let (u0, v0) = default_initial_data(&free);
    let (traj, _) = simulate(&free, &u0, &v0, 10.0, 1e-3).unwrap();
    let e0 = traj.energies[0];
    let drift = traj.energies.iter().map(|e| (e - e0).abs() / e0).fold(0.0, f64::max);
    let steps = traj.len() - 1;

    let damped = system(64, 1.0, 1.0, 1.0);
    let (u0, v0) = default_initial_data(&damped);
    let mut totals = Vec::new();
    let mut strictly_decreasing = true;
    for dt in [1e-2, 5e-3, 2.5e-3] {
        let (traj, _) = simulate(&damped, &u0, &v0, 1.0, dt).unwrap();
        strictly_decreasing &= traj.energies.windows(2).all(|w| w[1] < w[0]);
        totals.push(traj.dissipation_residuals().iter().sum::<f64>());
    }
    let ratios: Vec<f64> = totals.windows(2).map(|w| w[0] / w[1]).collect();
    let pass = steps == 10_000 && drift <= 1e-10 && strictly_decreasing && ratios.iter().all(|r| (r - 4.0).abs() <= 0.6);
    outcome(pass, format!("κ=0 drift={drift:.2e} over {steps} steps; κ=1 strictly decreasing={strictly_decreasing}, residual ratios={ratios:.3?}"))
}

fn strong_stability() -> Outcome {
    let sys = system(256, graded(256), 1.0, 1.0);
    let (u0, v0) = default_initial_data(&sys);
    let (traj, _) = simulate(&sys, &u0, &v0, 200.0, 1e-2).unwrap();
    let ratio = traj.energies.last().unwrap() / traj.energies[0];
    let monotone = traj.first_increase(1e-12).is_none();
    match fit_decay(&traj, DEFAULT_WINDOW) {
        Ok(fit) => outcome(
            ratio < 1e-2 && fit.exponent > 0.0 && monotone,
            format!(
                "E(T)/E(0)={ratio:.2e}, r={:.3} over t∈[{:.1},{:.1}] ({} samples), monotone={monotone}",
                fit.exponent, fit.window.0, fit.window.1, fit.samples
            ),
        ),
        Err(e) => outcome(false, format!("E(T)/E(0)={ratio:.2e}, decay fit failed: {e}")),
    }
}

fn gamma_on(n: usize, grid: &[f64]) -> (Result<kvbeam::resolvent::GammaFit<f64>, kvbeam::Error>, Vec<ResolventSample<f64>>) {
    let sys = system(n, graded(n), 1.0, 1.0);
    let samples: Vec<ResolventSample<f64>> = sweep(&sys, grid, 1e-6, 5000).unwrap().into_iter().filter_map(Result::ok).collect();
    (fit_gamma(&samples), samples)
}

fn resolvent_growth() -> Outcome {
    let grid = log_grid(1e2, 10f64.powf(3.5), 25);
    let target = gamma_closed(1.0).unwrap();
    let (fine, samples) = gamma_on(512, &grid);
    let (coarse, _) = gamma_on(256, &grid);
    match (fine, coarse) {
        (Ok(f), Ok(c)) => {
            let consistent = (f.gamma_num - c.gamma_num).abs() <= 0.2;
            let pass = (f.gamma_num - target).abs() <= 0.35 && f.residual <= 0.2 && consistent;
            let conv = samples.iter().filter(|s| s.converged).count();
            outcome(
                pass,
                format!(
                    "γ_num(512)={:.3} (target {target}±0.35), rms={:.3}, γ_num(256)={:.3}, converged {conv}/{}",
                    f.gamma_num,
                    f.residual,
                    c.gamma_num,
                    grid.len()
                ),
            )
        }
        (f, c) => outcome(false, format!("fit failed: N=512 {:?}, N=256 {:?}", f.err(), c.err())),
    }
}

fn hardy_suite() -> Outcome {
    let mut lines = Vec::new();
    let mut pass = true;
    for (a, b) in [(0.0, 0.0), (1.0, 0.0), (2.0, 0.0), (2.5, 0.5)] {
        for (i, kind) in [FamilyKind::Polynomial, FamilyKind::Spline, FamilyKind::RandomFourier].into_iter().enumerate() {
            let rep = check_hardy(&TestFunctionFamily::new(kind, 200, 1000 + i as u64), a, b).unwrap();
            pass &= rep.within_bracket();
            if !rep.within_bracket() || kind == FamilyKind::Spline {
                lines.push(format!("({a},{b}) {}: max={:.4} 2K={:.4}", kind.label(), rep.max_ratio, rep.two_k()));
            }
        }
    }
    let divergent = matches!(hardy_constant(&HardyCase::new(3.0, 0.0)).unwrap(), HardyConstant::Infinite { .. });
    let conc = concentration_ratios(3.0, 0.0, 1.0, &[1e-3, 1e-4, 1e-5]);
    let peak = conc.iter().map(|c| c.1).fold(0.0, f64::max);
    pass &= divergent && peak > 1e3;
    lines.push(format!("(3,0): K infinite={divergent}, concentrating max ratio={peak:.3e}"));
    outcome(pass, lines.join("; "))
}

fn interpolation_suite() -> Outcome {
    let fam = TestFunctionFamily::new(FamilyKind::Spline, 100, 2024);
    let unit = check_interpolation(&fam, 0.0, 1.0);
    let wide = check_interpolation(&fam, 0.0, 10.0);
    let linear = interpolation_ratio(&TestFunction::Polynomial { coeffs: vec![0.0, 1.0], root_at_one: false }, 0.0, 1.0).unwrap();
    match (unit, wide) {
        (Ok(u), Ok(w)) => {
            let dev = u.ratios.iter().zip(&w.ratios).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            let k = u.empirical_k.max(linear);
            let pass = dev <= 1e-9 && k >= 3.0 && k.is_finite();
            outcome(pass, format!("max set deviation={dev:.1e}, empirical K={k:.4} (f(x)=x gives {linear:.12})"))
        }
        (u, w) => outcome(false, format!("interpolation check failed: {:?} {:?}", u.err(), w.err())),
    }
}

fn figure1() -> Outcome {
    let grid: Vec<f64> = (0..100).map(|k| 0.025 + 4.95 * k as f64 / 99.0).collect();
    let rows = emit_figure1(&grid).unwrap();
    let up = rows.windows(2).filter(|w| w[1].0 <= 5.0 / 3.0).all(|w| w[1].1 > w[0].1);
    let down = rows.windows(2).filter(|w| w[0].0 >= 5.0 / 3.0).all(|w| w[1].1 < w[0].1);
    let imax = rows.iter().enumerate().fold(0, |b, (i, r)| if r.1 > rows[b].1 { i } else { b });
    // The grid peak must be one of the two grid points that bracket 5/3.
    let split = rows.iter().position(|r| r.0 > 5.0 / 3.0).unwrap();
    let around = imax + 1 == split || imax == split;
    let at3 = breakpoint_values()[1];
    let continuous = (at3.left - at3.right).abs() <= 1e-12;
    outcome(
        up && down && around && continuous && rows.len() == 100,
        format!("increasing={up}, decreasing={down}, peak at α={:.4} next to 5/3, jump at 3={:.1e}", rows[imax].0, (at3.left - at3.right).abs()),
    )
}

type Criterion = (&'static str, fn() -> Outcome, Duration);

fn main() {
    let criteria: [Criterion; 8] = [
        ("closed-form rate table", closed_form_table, Duration::from_secs(1)),
        ("optimizer vs case analysis", optimizer_cases, Duration::from_secs(10)),
        ("energy law", energy_law, Duration::from_secs(30)),
        ("strong stability proxy", strong_stability, Duration::from_secs(120)),
        ("resolvent growth probe", resolvent_growth, Duration::from_secs(300)),
        ("hardy suite", hardy_suite, Duration::from_secs(60)),
        ("interpolation suite", interpolation_suite, Duration::from_secs(30)),
        ("figure-1 reproduction", figure1, Duration::from_secs(1)),
    ];
    let mut failed = 0;
    for (i, (name, run, budget)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let out = run();
        let took = start.elapsed();
        let in_time = took <= *budget;
        let pass = out.pass && in_time;
        if !pass {
            failed += 1;
        }
        println!(
            "criterion {} [{name}]: {} ({:.2}s / {}s budget) {}",
            i + 1,
            if pass { "PASS" } else { "FAIL" },
            took.as_secs_f64(),
            budget.as_secs(),
            out.detail
        );
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
