//! Implicit-midpoint integration of `M ü + D u̇ + K u = 0` written as the
//! first-order system `U̇ = A_h U`, `A_h (u, v) = (v, -M⁻¹(Ku + Dv))`.
//!
//! The midpoint rule reproduces the discrete energy law exactly:
//! `E_{n+1} - E_n = -dt · v̄ᵀ D v̄` with `v̄ = (v_n + v_{n+1}) / 2`, so for
//! `D = 0` every step is a `G`-isometry.

use std::io::Write;

use nalgebra::DVector;

use crate::banded::{BandLu, BandMatrix};
use crate::error::{Error, Result};
use crate::fem::{AssembledSystem, StateVector};
use crate::scalar::Real;
use crate::stats::linear_fit;

/// Energies below this fraction of `E(0)` are dropped from decay fits.
pub const ENERGY_FLOOR: f64 = 1e-12;
/// Minimum number of samples a decay fit needs inside its window.
pub const MIN_FIT_SAMPLES: usize = 16;
/// Default fit window as fractions of the final time.
pub const DEFAULT_WINDOW: (f64, f64) = (0.1, 1.0);

/// Factorised midpoint stepper for a fixed `dt`.
pub struct Midpoint<'a, T: Real> {
    sys: &'a AssembledSystem<T>,
    dt: T,
    lu: BandLu<T>,
    /// `M - dt²/4 K - dt/2 D`
    explicit: BandMatrix<T>,
}

impl<'a, T: Real> Midpoint<'a, T> {
    pub fn new(sys: &'a AssembledSystem<T>, dt: T) -> Result<Self> {
        if !(dt.finite() && dt > T::zero()) {
            return Err(Error::InvalidParameter("dt must be positive".into()));
        }
        let q = dt * dt * T::lit(0.25);
        let hd = dt * T::lit(0.5);
        let implicit = sys.mass.axpy(q, &sys.stiffness).axpy(hd, &sys.damping);
        let explicit = sys.mass.axpy(-q, &sys.stiffness).axpy(-hd, &sys.damping);
        // M + dt²/4 K + dt/2 D is SPD for dt > 0
        let lu = implicit.lu()?;
        Ok(Self { sys, dt, lu, explicit })
    }

    pub fn dt(&self) -> T {
        self.dt
    }

    pub fn step(&self, s: &StateVector<T>) -> StateVector<T> {
        let dt = self.dt;
        let mut rhs = self.explicit.mul_vec(&s.v);
        rhs -= self.sys.stiffness.mul_vec(&s.u) * dt;
        let v_new = self.lu.solve(&rhs);
        let u_new = &s.u + (&s.v + &v_new) * (dt * T::lit(0.5));
        StateVector { u: u_new, v: v_new }
    }
}

/// One midpoint step of size `dt`.
pub fn step<T: Real>(sys: &AssembledSystem<T>, s: &StateVector<T>, dt: T) -> Result<StateVector<T>> {
    if s.u.len() != sys.n_dofs() || s.v.len() != sys.n_dofs() {
        return Err(Error::DimensionMismatch { expected: sys.n_dofs(), got: s.u.len().min(s.v.len()) });
    }
    Ok(Midpoint::new(sys, dt)?.step(s))
}

/// Sampled energy history.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<T> {
    pub times: Vec<T>,
    pub energies: Vec<T>,
    /// `vᵀDv` at each sample.
    pub dissipation: Vec<T>,
}

impl<T: Real> Trajectory<T> {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// First index `i` with `E(t_{i+1}) > E(t_i) (1 + slack)`, if any.
    pub fn first_increase(&self, slack: T) -> Option<usize> {
        self.energies.windows(2).position(|w| w[1] > w[0] * (T::one() + slack))
    }

    /// Per-step residuals `|E_{i+1} - E_i + dt (d_i + d_{i+1}) / 2|` of the
    /// energy law against trapezoidal integration of the sampled dissipation.
    /// Each is `O(dt³)`, their sum `O(dt²)`.
    pub fn dissipation_residuals(&self) -> Vec<T> {
        (0..self.len().saturating_sub(1))
            .map(|i| {
                let dt = self.times[i + 1] - self.times[i];
                let trap = (self.dissipation[i] + self.dissipation[i + 1]) * dt * T::lit(0.5);
                (self.energies[i + 1] - self.energies[i] + trap).abs()
            })
            .collect()
    }

    /// CSV with header `t,energy,dissipation`, shortest round-trip formatting.
    pub fn write_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "t,energy,dissipation")?;
        for i in 0..self.len() {
            writeln!(
                w,
                "{},{},{}",
                self.times[i].to_f64_lossy(),
                self.energies[i].to_f64_lossy(),
                self.dissipation[i].to_f64_lossy()
            )?;
        }
        Ok(())
    }
}

/// Coefficients of `u0 = (1 - x²)²`, `v0 = 0`.
pub fn default_initial_data<T: Real>(sys: &AssembledSystem<T>) -> (DVector<T>, DVector<T>) {
    let u0 = sys.interpolate(|x| {
        let w = T::one() - x * x;
        (w * w, -T::lit(4.0) * x * w)
    });
    (u0, DVector::zeros(sys.n_dofs()))
}

/// Number of steps to reach `horizon`: `⌈horizon / dt⌉`.
pub fn step_count<T: Real>(horizon: T, dt: T) -> usize {
    let r = (horizon / dt).to_f64_lossy();
    let n = r.round();
    if (r - n).abs() <= 1e-9 * r.max(1.0) {
        n as usize
    } else {
        r.ceil() as usize
    }
}

/// Integrates from `(u0, v0)` to `horizon`, returning the energy history and the final state.
pub fn simulate<T: Real>(
    sys: &AssembledSystem<T>,
    u0: &DVector<T>,
    v0: &DVector<T>,
    horizon: T,
    dt: T,
) -> Result<(Trajectory<T>, StateVector<T>)> {
    if !(horizon > dt) {
        return Err(Error::InvalidParameter("time horizon must exceed dt".into()));
    }
    let n = sys.n_dofs();
    if u0.len() != n || v0.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: if u0.len() != n { u0.len() } else { v0.len() } });
    }
    let stepper = Midpoint::new(sys, dt)?;
    let steps = step_count(horizon, dt);
    let mut traj = Trajectory {
        times: Vec::with_capacity(steps + 1),
        energies: Vec::with_capacity(steps + 1),
        dissipation: Vec::with_capacity(steps + 1),
    };
    let mut s = StateVector::new(u0.clone(), v0.clone())?;
    if !s.is_finite() {
        return Err(Error::Blowup { step: 0 });
    }
    let mut record = |i: usize, s: &StateVector<T>| -> Result<()> {
        traj.times.push(dt * T::from_usize(i).unwrap());
        traj.energies.push(sys.energy(s)?);
        traj.dissipation.push(sys.dissipation_rate(s)?);
        Ok(())
    };
    record(0, &s)?;
    for i in 1..=steps {
        s = stepper.step(&s);
        if !s.is_finite() {
            return Err(Error::Blowup { step: i });
        }
        record(i, &s)?;
    }
    Ok((traj, s))
}

/// Power-law fit `E(t) ≈ C (1 + t)^{-r}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayFit<T> {
    pub exponent: T,
    pub prefactor: T,
    pub window: (T, T),
    /// RMS residual of the log-log regression.
    pub residual: T,
    pub samples: usize,
}

/// Least-squares slope of `ln E` against `ln(1 + t)` over the window given as
/// fractions of the final time; samples below `ENERGY_FLOOR · E(0)` are skipped.
pub fn fit_decay<T: Real>(traj: &Trajectory<T>, window: (T, T)) -> Result<DecayFit<T>> {
    let (f0, f1) = window;
    if !(f0 >= T::zero() && f1 <= T::one() && f0 < f1) {
        return Err(Error::DegenerateFit(format!(
            "window fractions ({}, {}) must satisfy 0 <= start < end <= 1",
            f0.to_f64_lossy(),
            f1.to_f64_lossy()
        )));
    }
    let Some(&t_end) = traj.times.last() else {
        return Err(Error::DegenerateFit("empty trajectory".into()));
    };
    let e0 = traj.energies[0];
    if !(e0 > T::zero()) {
        return Err(Error::EnergyUnderflow("initial energy is zero".into()));
    }
    let (lo, hi) = (f0 * t_end, f1 * t_end);
    let floor = e0 * T::lit(ENERGY_FLOOR);
    let mut in_window = 0;
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for (&t, &e) in traj.times.iter().zip(&traj.energies) {
        if t < lo || t > hi {
            continue;
        }
        in_window += 1;
        if e >= floor && e > T::zero() {
            xs.push((T::one() + t).ln());
            ys.push(e.ln());
        }
    }
    if in_window < MIN_FIT_SAMPLES {
        return Err(Error::DegenerateFit(format!("{in_window} samples in window, need {MIN_FIT_SAMPLES}")));
    }
    if xs.len() < MIN_FIT_SAMPLES {
        return Err(Error::EnergyUnderflow(format!(
            "only {} of {in_window} window samples above {ENERGY_FLOOR:e}·E(0)",
            xs.len()
        )));
    }
    let fit = linear_fit(&xs, &ys)?;
    let fitted_lo = (xs[0].exp() - T::one(), xs[xs.len() - 1].exp() - T::one());
    Ok(DecayFit {
        exponent: T::zero() - fit.slope,
        prefactor: fit.intercept.exp(),
        window: fitted_lo,
        residual: fit.rms,
        samples: xs.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::{assemble, build_mesh};
    use crate::model::DampingProfile;
    use rand::{Rng, SeedableRng};

    fn sys(n: usize, alpha: f64, kappa: f64) -> AssembledSystem<f64> {
        let mesh = build_mesh(n, 1.0).unwrap();
        assemble(&mesh, &DampingProfile::pure_power(alpha, kappa).unwrap(), 1e-10).unwrap()
    }

    fn smooth_state(s: &AssembledSystem<f64>) -> StateVector<f64> {
        let u = s.interpolate(|x| {
            let w = 1.0 - x * x;
            (w * w * (1.0 + 0.5 * x), -4.0 * x * w * (1.0 + 0.5 * x) + 0.5 * w * w)
        });
        let v = s.interpolate(|x| {
            let w = 1.0 - x * x;
            (w * w * (2.0 * x).sin(), -4.0 * x * w * (2.0 * x).sin() + 2.0 * w * w * (2.0 * x).cos())
        });
        StateVector::new(u, v).unwrap()
    }

    #[test]
    fn zero_state_stays_zero() {
        let s = sys(16, 1.0, 1.0);
        let z = StateVector::zeros(s.n_dofs());
        assert_eq!(step(&s, &z, 0.01).unwrap(), z);
    }

    #[test]
    fn undamped_step_is_isometry() {
        let s = sys(32, 1.0, 0.0);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let n = s.n_dofs();
        let st = StateVector::new(
            DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0)),
            DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0)),
        )
        .unwrap();
        let e0 = s.energy(&st).unwrap();
        let e1 = s.energy(&step(&s, &st, 0.05).unwrap()).unwrap();
        assert!((e1 - e0).abs() <= 1e-12 * e0);
    }

    #[test]
    fn midpoint_energy_law_is_exact() {
        let s = sys(32, 1.0, 1.0);
        let st = smooth_state(&s);
        let stepper = Midpoint::new(&s, 0.02).unwrap();
        let next = stepper.step(&st);
        let vbar = (&st.v + &next.v) * 0.5;
        let lost = 0.02 * s.damping.form(&vbar, &vbar);
        let de = s.energy(&next).unwrap() - s.energy(&st).unwrap();
        assert!((de + lost).abs() <= 1e-12 * s.energy(&st).unwrap());
    }

    #[test]
    fn accumulated_residual_is_second_order() {
        let s = sys(32, 1.0, 1.0);
        let (u0, v0) = default_initial_data(&s);
        let totals: Vec<f64> = [1e-2, 5e-3, 2.5e-3]
            .iter()
            .map(|&dt| {
                let (traj, _) = simulate(&s, &u0, &v0, 0.5, dt).unwrap();
                traj.dissipation_residuals().iter().sum()
            })
            .collect();
        for w in totals.windows(2) {
            let ratio = w[0] / w[1];
            assert!((ratio - 4.0).abs() < 0.6, "ratio {ratio}: {totals:?}");
        }
    }

    #[test]
    fn simulate_conserves_without_damping() {
        let s = sys(32, 1.0, 0.0);
        let (u0, v0) = default_initial_data(&s);
        let (traj, _) = simulate(&s, &u0, &v0, 1.0, 0.01).unwrap();
        assert_eq!(traj.len(), 101);
        let e0 = traj.energies[0];
        for e in &traj.energies {
            assert!((e - e0).abs() <= 1e-10 * e0);
        }
    }

    #[test]
    fn simulate_dissipates_with_damping() {
        let s = sys(32, 1.0, 1.0);
        let (u0, v0) = default_initial_data(&s);
        let (traj, fin) = simulate(&s, &u0, &v0, 2.0, 0.01).unwrap();
        assert!(traj.energies.last().unwrap() < &traj.energies[0]);
        assert!(traj.first_increase(1e-10).is_none());
        assert_eq!(s.energy(&fin).unwrap(), *traj.energies.last().unwrap());
    }

    #[test]
    fn simulate_rejects_bad_inputs() {
        let s = sys(8, 1.0, 1.0);
        let (u0, v0) = default_initial_data(&s);
        assert!(simulate(&s, &u0, &v0, 0.01, 0.01).is_err());
        let short = DVector::zeros(3);
        assert!(simulate(&s, &short, &v0, 1.0, 0.1).is_err());
        let mut bad = u0.clone();
        bad[0] = f64::NAN;
        assert!(matches!(simulate(&s, &bad, &v0, 1.0, 0.1), Err(Error::Blowup { step: 0 })));
    }

    #[test]
    fn eigenmode_oscillates_with_its_period() {
        let s = sys(32, 1.0, 0.0);
        let (vals, vecs) = s.generalized_eigen().unwrap();
        let mu = vals[0];
        let u0 = vecs.column(0).into_owned();
        let v0 = DVector::zeros(s.n_dofs());
        let period = 2.0 * std::f64::consts::PI / mu.sqrt();
        let dt = period / 400.0;
        let stepper = Midpoint::new(&s, dt).unwrap();
        let mut st = StateVector::new(u0, v0).unwrap();
        // potential part ½uᵀKu returns to its maximum after one period and
        // passes through zero at quarter periods
        let pot = |st: &StateVector<f64>| 0.5 * s.stiffness.form(&st.u, &st.u);
        let e0 = s.energy(&st).unwrap();
        let mut pots = vec![pot(&st)];
        for _ in 0..400 {
            st = stepper.step(&st);
            pots.push(pot(&st));
        }
        assert!((pots[100] / e0) < 1e-3, "{}", pots[100] / e0);
        assert!((pots[200] / e0 - 1.0).abs() < 1e-3);
        assert!((pots[300] / e0) < 1e-3);
        assert!((pots[400] / e0 - 1.0).abs() < 1e-3);
    }

    fn synthetic(f: impl Fn(f64) -> f64) -> Trajectory<f64> {
        let times: Vec<f64> = (0..=1000).map(|i| i as f64 * 0.1).collect();
        let energies = times.iter().map(|&t| f(t)).collect();
        Trajectory { dissipation: vec![0.0; times.len()], times, energies }
    }

    #[test]
    fn fit_exact_power_law() {
        let traj = synthetic(|t| (1.0 + t).powi(-2));
        let fit = fit_decay(&traj, (0.01, 1.0)).unwrap();
        assert!((fit.exponent - 2.0).abs() < 1e-6);
        assert!((fit.prefactor - 1.0).abs() < 1e-6);
        assert!(fit.residual < 1e-9);
        assert!(fit.window.0 >= 1.0 - 1e-12 && fit.window.1 <= 100.0 + 1e-9);
    }

    #[test]
    fn fit_constant_is_zero() {
        let fit = fit_decay(&synthetic(|_| 3.0), DEFAULT_WINDOW).unwrap();
        assert!(fit.exponent.abs() < 1e-12);
    }

    #[test]
    fn fit_errors() {
        let traj = synthetic(|t| (1.0 + t).powi(-2));
        assert!(matches!(fit_decay(&traj, (0.5, 0.5)), Err(Error::DegenerateFit(_))));
        assert!(matches!(fit_decay(&traj, (0.0, 1e-3)), Err(Error::DegenerateFit(_))));
        let fast = synthetic(|t| (-3.0 * t).exp());
        assert!(matches!(fit_decay(&fast, DEFAULT_WINDOW), Err(Error::EnergyUnderflow(_))));
    }

    #[test]
    fn csv_layout() {
        let traj = synthetic(|t| 1.0 / (1.0 + t));
        let mut buf = Vec::new();
        traj.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("t,energy,dissipation"));
        assert_eq!(lines.next(), Some("0,1,0"));
        assert_eq!(text.lines().count(), traj.len() + 1);
        let last: Vec<f64> = text.lines().last().unwrap().split(',').map(|v| v.parse().unwrap()).collect();
        assert_eq!(last[1], traj.energies[1000]);
    }

    #[test]
    fn step_count_rounds_sensibly() {
        assert_eq!(step_count(1.0, 0.1), 10);
        assert_eq!(step_count(1.05, 0.1), 11);
        assert_eq!(step_count(200.0, 0.01), 20000);
    }
}
