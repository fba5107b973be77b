//! Damping coefficient, problem configuration and parameter checks.

use std::fmt;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Shape of the damping on `(0, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub enum ProfileForm<T> {
    /// `a(x) = kappa * x^alpha`.
    PurePower,
    /// Piecewise-linear interpolation of `(x, a(x))` samples covering `[0, 1]`,
    /// with `a(0) = 0`, nondecreasing and nonnegative.
    UserTable(Vec<(T, T)>),
}

/// Damping coefficient `b`: zero on `[-1, 0]`, `a(x)` on `(0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DampingProfile<T> {
    pub alpha: T,
    pub kappa: T,
    pub form: ProfileForm<T>,
}

impl<T: Real> DampingProfile<T> {
    pub fn pure_power(alpha: T, kappa: T) -> Result<Self> {
        let p = Self { alpha, kappa, form: ProfileForm::PurePower };
        p.check()?;
        Ok(p)
    }

    /// Tabulated profile; `alpha` and `kappa` record the limit of `a(x)/x^alpha`
    /// at `0+` that the table is meant to realise.
    pub fn user_table(alpha: T, kappa: T, samples: Vec<(T, T)>) -> Result<Self> {
        let p = Self { alpha, kappa, form: ProfileForm::UserTable(samples) };
        p.check()?;
        Ok(p)
    }

    fn check(&self) -> Result<()> {
        match self.violations().into_iter().next() {
            None => Ok(()),
            Some(v) => Err(Error::InvalidParameter(v.to_string())),
        }
    }

    pub fn violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if !(self.alpha.finite() && self.alpha > T::zero() && self.alpha < T::lit(5.0)) {
            out.push(Violation::new("alpha", "alpha must lie in open interval (0,5)"));
        }
        if !(self.kappa.finite() && self.kappa >= T::zero()) {
            out.push(Violation::new("kappa", "kappa must be finite and >= 0"));
        }
        if let ProfileForm::UserTable(samples) = &self.form {
            if samples.len() < 2 {
                out.push(Violation::new("table", "user table needs at least two samples"));
            } else {
                let (x0, a0) = samples[0];
                let (xn, _) = samples[samples.len() - 1];
                if x0 != T::zero() || a0 != T::zero() {
                    out.push(Violation::new("table", "user table must start at (0, 0)"));
                }
                if xn != T::one() {
                    out.push(Violation::new("table", "user table must end at x = 1"));
                }
                for w in samples.windows(2) {
                    if !(w[1].0 > w[0].0) {
                        out.push(Violation::new("table", "table abscissae must be strictly increasing"));
                        break;
                    }
                    if w[1].1 < w[0].1 || w[0].1 < T::zero() || !w[1].1.finite() {
                        out.push(Violation::new("table", "table values must be finite, nonnegative and nondecreasing"));
                        break;
                    }
                }
            }
        }
        out
    }

    /// `b(x)` for `x` in `[-1, 1]`.
    pub fn eval(&self, x: T) -> Result<T> {
        if !x.finite() {
            return Err(Error::NonFinite("damping abscissa"));
        }
        if x < -T::one() || x > T::one() {
            return Err(Error::InvalidParameter(format!("x = {} outside [-1, 1]", x.to_f64_lossy())));
        }
        Ok(self.eval_unchecked(x))
    }

    /// `b(x)` without range checks; used inside quadrature loops.
    #[inline]
    pub fn eval_unchecked(&self, x: T) -> T {
        if x <= T::zero() {
            return T::zero();
        }
        match &self.form {
            ProfileForm::PurePower => self.kappa * x.powf(self.alpha),
            ProfileForm::UserTable(samples) => interpolate(samples, x),
        }
    }

    /// True when the profile is identically zero.
    pub fn is_zero(&self) -> bool {
        match &self.form {
            ProfileForm::PurePower => self.kappa == T::zero(),
            ProfileForm::UserTable(s) => s.iter().all(|&(_, a)| a == T::zero()),
        }
    }
}

fn interpolate<T: Real>(samples: &[(T, T)], x: T) -> T {
    let i = samples.partition_point(|&(xs, _)| xs <= x);
    if i == 0 {
        return samples[0].1;
    }
    if i >= samples.len() {
        return samples[samples.len() - 1].1;
    }
    let (x0, a0) = samples[i - 1];
    let (x1, a1) = samples[i];
    a0 + (a1 - a0) * (x - x0) / (x1 - x0)
}

/// A single failed check.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub key: &'static str,
    pub message: String,
}

impl Violation {
    fn new(key: &'static str, message: impl Into<String>) -> Self {
        Self { key, message: message.into() }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.key, self.message)
    }
}

/// Discretisation and run parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamConfig<T> {
    pub profile: DampingProfile<T>,
    pub n_elements: usize,
    /// Geometric ratio between consecutive element lengths on `(0, 1)`, growing away from 0.
    pub grading: T,
    pub quad_tol: T,
    pub time_horizon: T,
    pub dt: T,
}

impl<T: Real> Default for BeamConfig<T> {
    fn default() -> Self {
        Self {
            profile: DampingProfile { alpha: T::one(), kappa: T::one(), form: ProfileForm::PurePower },
            n_elements: 64,
            grading: T::one(),
            quad_tol: T::lit(1e-8),
            time_horizon: T::lit(10.0),
            dt: T::lit(1e-2),
        }
    }
}

/// Checks every configuration invariant; an empty list means valid.
pub fn validate_config<T: Real>(cfg: &BeamConfig<T>) -> Vec<Violation> {
    let mut out = cfg.profile.violations();
    if cfg.n_elements < 4 {
        out.push(Violation::new("n_elements", "n_elements must be at least 4"));
    } else if !cfg.n_elements.is_multiple_of(2) {
        out.push(Violation::new("n_elements", "n_elements must be even (equal split of (-1,0) and (0,1))"));
    }
    if !(cfg.grading.finite() && cfg.grading >= T::one()) {
        out.push(Violation::new("grading", "grading must be >= 1"));
    }
    if !(cfg.quad_tol.finite() && cfg.quad_tol > T::zero() && cfg.quad_tol <= T::lit(1e-6)) {
        out.push(Violation::new("quad_tol", "quad_tol must lie in (0, 1e-6]"));
    }
    if !(cfg.time_horizon.finite() && cfg.time_horizon > T::zero()) {
        out.push(Violation::new("time_horizon", "time_horizon must be > 0"));
    }
    if !(cfg.dt.finite() && cfg.dt > T::zero()) {
        out.push(Violation::new("dt", "dt must be > 0"));
    } else if !(cfg.dt < cfg.time_horizon) {
        out.push(Violation::new("dt", "dt must be smaller than time_horizon"));
    }
    out
}

pub const CONFIG_KEYS: [&str; 7] = ["alpha", "kappa", "n_elements", "grading", "quad_tol", "time_horizon", "dt"];

impl<T: Real> BeamConfig<T> {
    /// Sets one key from its textual value. Unknown keys are errors.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        let real = || -> Result<T> {
            let v: f64 = value
                .parse()
                .map_err(|_| Error::Config(format!("key `{key}`: cannot parse `{value}` as a number")))?;
            Ok(T::lit(v))
        };
        match key {
            "alpha" => self.profile.alpha = real()?,
            "kappa" => self.profile.kappa = real()?,
            "n_elements" => {
                self.n_elements = value
                    .parse()
                    .map_err(|_| Error::Config(format!("key `n_elements`: cannot parse `{value}` as an integer")))?
            }
            "grading" => self.grading = real()?,
            "quad_tol" => self.quad_tol = real()?,
            "time_horizon" => self.time_horizon = real()?,
            "dt" => self.dt = real()?,
            other => return Err(Error::Config(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    /// Parses flat `key = value` text; `#` starts a comment. Missing keys keep defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .or_else(|| line.split_once(':'))
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", lineno + 1)))?;
            cfg.set(key.trim(), value)?;
        }
        Ok(cfg)
    }

    /// Renders the configuration in the format accepted by [`BeamConfig::parse`].
    pub fn to_text(&self) -> String {
        format!(
            "alpha = {}\nkappa = {}\nn_elements = {}\ngrading = {}\nquad_tol = {:e}\ntime_horizon = {}\ndt = {}\n",
            self.profile.alpha.to_f64_lossy(),
            self.profile.kappa.to_f64_lossy(),
            self.n_elements,
            self.grading.to_f64_lossy(),
            self.quad_tol.to_f64_lossy(),
            self.time_horizon.to_f64_lossy(),
            self.dt.to_f64_lossy(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn profile(alpha: f64, kappa: f64) -> DampingProfile<f64> {
        DampingProfile::pure_power(alpha, kappa).unwrap()
    }

    #[test]
    fn eval_examples() {
        assert_eq!(profile(1.0, 1.0).eval(-0.5).unwrap(), 0.0);
        assert_eq!(profile(1.0, 1.0).eval(0.0).unwrap(), 0.0);
        assert!((profile(2.0, 3.0).eval(0.5).unwrap() - 0.75).abs() < 1e-15);
    }

    #[test]
    fn eval_rejects_non_finite_and_out_of_range() {
        let p = profile(1.0, 1.0);
        assert!(matches!(p.eval(f64::NAN), Err(Error::NonFinite(_))));
        assert!(p.eval(f64::INFINITY).is_err());
        assert!(p.eval(1.5).is_err());
    }

    #[test]
    fn limit_ratio_tends_to_kappa() {
        for &(alpha, kappa) in &[(0.3, 2.0), (1.0, 1.0), (4.5, 0.7)] {
            let p = profile(alpha, kappa);
            for j in 1..40 {
                let x = 2f64.powi(-j);
                let r = p.eval(x).unwrap() / x.powf(alpha);
                assert!((r - kappa).abs() <= 1e-6 * kappa);
            }
        }
    }

    #[test]
    fn table_profile_interpolates() {
        let p = DampingProfile::user_table(1.0f64, 1.0, vec![(0.0, 0.0), (0.5, 0.25), (1.0, 1.0)]).unwrap();
        assert!((p.eval(0.25).unwrap() - 0.125).abs() < 1e-15);
        assert!((p.eval(0.75).unwrap() - 0.625).abs() < 1e-15);
        assert_eq!(p.eval(-0.3).unwrap(), 0.0);
        assert!(DampingProfile::user_table(1.0, 1.0, vec![(0.0, 0.1), (1.0, 1.0)]).is_err());
        assert!(DampingProfile::user_table(1.0f64, 1.0, vec![(0.0, 0.0), (0.5, 0.5), (1.0, 0.2)]).is_err());
    }

    #[test]
    fn validate_examples() {
        let mut cfg = BeamConfig::<f64>::default();
        cfg.profile.alpha = 5.0;
        let v = validate_config(&cfg);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].message, "alpha must lie in open interval (0,5)");

        let mut cfg = BeamConfig::<f64>::default();
        cfg.profile.alpha = 0.5;
        cfg.profile.kappa = 0.0;
        cfg.n_elements = 64;
        assert!(validate_config(&cfg).is_empty());

        let cfg = BeamConfig::<f64> { dt: 2.0, time_horizon: 1.0, ..Default::default() };
        let v = validate_config(&cfg);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].key, "dt");

        let cfg = BeamConfig::<f64> { n_elements: 2, quad_tol: 1e-3, ..Default::default() };
        assert_eq!(validate_config(&cfg).len(), 2);
    }

    #[test]
    fn parse_and_unknown_keys() {
        let cfg = BeamConfig::<f64>::parse("# demo\nalpha = 2.5\nkappa=0\nn_elements = 32 # trailing\n").unwrap();
        assert_eq!(cfg.profile.alpha, 2.5);
        assert_eq!(cfg.profile.kappa, 0.0);
        assert_eq!(cfg.n_elements, 32);
        let err = BeamConfig::<f64>::parse("alpha = 1\nbogus = 3\n").unwrap_err();
        assert!(err.to_string().contains("bogus"));
        assert!(BeamConfig::<f64>::parse("alpha 1").is_err());
        let back = BeamConfig::<f64>::parse(&cfg.to_text()).unwrap();
        assert_eq!(back, cfg);
    }

    proptest::proptest! {
        #[test]
        fn monotone_on_unit_interval(alpha in 0.01f64..4.99, kappa in 0.0f64..10.0, a in 0.0f64..1.0, b in 0.0f64..1.0) {
            let p = profile(alpha, kappa);
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            proptest::prop_assert!(p.eval(lo).unwrap() <= p.eval(hi).unwrap());
            proptest::prop_assert!(p.eval(-lo).unwrap() == 0.0);
        }
    }
}
