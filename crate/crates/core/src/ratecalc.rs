//! Decay-rate program for the localized damping exponent `α`.
//!
//! Closed form: `τ(α)` is the polynomial energy-decay exponent and
//! `γ(α) = 2/τ(α)` the resolvent growth exponent. Numerically, `γ` is the
//! infimum of a max of nine affine functions of `δ` under a two-piece
//! admissible `δ` set, with exponents `β, β′, β₀` pinned at their extremal
//! admissible values.

use std::fmt;
use std::io::Write;

use crate::error::{Error, Result};
use crate::scalar::Field;

/// Margin for strict inequalities.
pub const STRICT_MARGIN: f64 = 1e-12;
/// Stand-in for an open lower bound `β > -1`.
pub const DEFAULT_ETA: f64 = 1e-6;
pub const DEFAULT_RESOLUTION: f64 = 1e-6;
/// Interior breakpoints of `τ`.
pub const BREAKPOINTS: [f64; 2] = [5.0 / 3.0, 3.0];

fn check_alpha<F: Field>(alpha: &F) -> Result<()> {
    if *alpha > F::int(0) && *alpha < F::int(5) {
        Ok(())
    } else {
        Err(Error::AlphaDomain(format!("{alpha:?}")))
    }
}

/// Energy-decay exponent: `(5-α)/(3-α)` on `(0,5/3]`, `(5+α)/(1+α)` on
/// `(5/3,3]`, `4/(α-1)` on `(3,5)`.
pub fn tau_closed<F: Field>(alpha: F) -> Result<F> {
    check_alpha(&alpha)?;
    let a = alpha;
    Ok(if a <= F::ratio(5, 3) {
        (F::int(5) - a.clone()) / (F::int(3) - a)
    } else if a <= F::int(3) {
        (F::int(5) + a.clone()) / (F::int(1) + a)
    } else {
        F::int(4) / (a - F::int(1))
    })
}

/// Resolvent growth exponent, `2/τ(α)` written per branch.
pub fn gamma_closed<F: Field>(alpha: F) -> Result<F> {
    check_alpha(&alpha)?;
    let a = alpha;
    Ok(if a <= F::ratio(5, 3) {
        F::int(2) * (F::int(3) - a.clone()) / (F::int(5) - a)
    } else if a <= F::int(3) {
        F::int(2) * (F::int(1) + a.clone()) / (F::int(5) + a)
    } else {
        (a - F::int(1)) / F::int(2)
    })
}

/// Constraint and admissibility identifiers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ConstraintId {
    /// `γ ≥ (1+β′)δ`
    OnePlusBetaPrime,
    /// `γ ≥ (1+β₀)δ`
    OnePlusBeta0,
    /// `γ ≥ (α+1)δ - 2`
    AlphaPlusOne,
    /// `γ ≥ (1-α)δ`
    OneMinusAlpha,
    /// `γ ≥ (β′-1)δ + 2`
    BetaPrimeMinusOne,
    /// `γ ≥ (α+3)δ - 2`
    AlphaPlusThree,
    /// `γ ≥ (3-α)δ`
    ThreeMinusAlpha,
    /// `γ ≥ αδ - 2`
    AlphaDelta,
    /// `γ ≥ (β-1)δ + 2`
    BetaMinusOne,
    /// `δ` in neither admissible regime, or at a regime boundary when reported as active.
    DeltaRegime,
    Beta0Admissible,
    BetaPrimeAdmissible,
    BetaAdmissible,
}

impl ConstraintId {
    pub const LINES: [ConstraintId; 9] = [
        Self::OnePlusBetaPrime,
        Self::OnePlusBeta0,
        Self::AlphaPlusOne,
        Self::OneMinusAlpha,
        Self::BetaPrimeMinusOne,
        Self::AlphaPlusThree,
        Self::ThreeMinusAlpha,
        Self::AlphaDelta,
        Self::BetaMinusOne,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Self::OnePlusBetaPrime => "gamma>=(1+beta')*delta",
            Self::OnePlusBeta0 => "gamma>=(1+beta0)*delta",
            Self::AlphaPlusOne => "gamma>=(alpha+1)*delta-2",
            Self::OneMinusAlpha => "gamma>=(1-alpha)*delta",
            Self::BetaPrimeMinusOne => "gamma>=(beta'-1)*delta+2",
            Self::AlphaPlusThree => "gamma>=(alpha+3)*delta-2",
            Self::ThreeMinusAlpha => "gamma>=(3-alpha)*delta",
            Self::AlphaDelta => "gamma>=alpha*delta-2",
            Self::BetaMinusOne => "gamma>=(beta-1)*delta+2",
            Self::DeltaRegime => "delta-regime",
            Self::Beta0Admissible => "beta0-admissible",
            Self::BetaPrimeAdmissible => "beta'-admissible",
            Self::BetaAdmissible => "beta-admissible",
        }
    }

    /// `(slope, intercept)` of the lower bound on `γ` as a function of `δ`.
    fn line(self, alpha: f64, p: &Exponents) -> Option<(f64, f64)> {
        Some(match self {
            Self::OnePlusBetaPrime => (1.0 + p.beta_prime, 0.0),
            Self::OnePlusBeta0 => (1.0 + p.beta0, 0.0),
            Self::AlphaPlusOne => (alpha + 1.0, -2.0),
            Self::OneMinusAlpha => (1.0 - alpha, 0.0),
            Self::BetaPrimeMinusOne => (p.beta_prime - 1.0, 2.0),
            Self::AlphaPlusThree => (alpha + 3.0, -2.0),
            Self::ThreeMinusAlpha => (3.0 - alpha, 0.0),
            Self::AlphaDelta => (alpha, -2.0),
            Self::BetaMinusOne => (p.beta - 1.0, 2.0),
            _ => return None,
        })
    }
}

impl fmt::Display for ConstraintId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Exponents {
    beta: f64,
    beta_prime: f64,
    beta0: f64,
}

/// A candidate point of the program.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatePoint {
    pub gamma: f64,
    pub delta: f64,
    pub beta: f64,
    pub beta_prime: f64,
    pub beta0: f64,
}

impl RatePoint {
    /// Point with `β′ = β`.
    pub fn new(gamma: f64, delta: f64, beta: f64, beta0: f64) -> Self {
        Self { gamma, delta, beta, beta_prime: beta, beta0 }
    }

    fn exponents(&self) -> Exponents {
        Exponents { beta: self.beta, beta_prime: self.beta_prime, beta0: self.beta0 }
    }
}

/// The program for one value of `α`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateProgram {
    alpha: f64,
}

/// Closed `δ` interval with flags for which ends are open in the original program.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeltaInterval {
    pub lo: f64,
    pub hi: f64,
    pub lo_open: bool,
    pub hi_open: bool,
}

impl RateProgram {
    pub fn new(alpha: f64) -> Result<Self> {
        check_alpha(&alpha)?;
        Ok(Self { alpha })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// `(α/(α+2) < δ < 1/α and α < 2)` or `(δ > 1/2 and δ ≥ 1/α)`.
    pub fn in_regime(&self, delta: f64) -> bool {
        let a = self.alpha;
        let first = a < 2.0 && delta > a / (a + 2.0) + STRICT_MARGIN && delta < 1.0 / a - STRICT_MARGIN;
        let second = delta > 0.5 + STRICT_MARGIN && delta >= 1.0 / a;
        first || second
    }

    /// Admissible `δ` pieces. The unbounded piece is truncated at `lo + span`.
    pub fn delta_intervals(&self, span: f64) -> Vec<DeltaInterval> {
        let a = self.alpha;
        let mut out = Vec::new();
        if a < 2.0 {
            out.push(DeltaInterval { lo: a / (a + 2.0), hi: 1.0 / a, lo_open: true, hi_open: true });
        }
        let lo = (1.0 / a).max(0.5);
        out.push(DeltaInterval { lo, hi: lo + span, lo_open: 1.0 / a <= 0.5, hi_open: false });
        out
    }

    pub fn beta0_admissible(&self, beta0: f64) -> bool {
        let a = self.alpha;
        if a < 1.0 {
            beta0 > -1.0 + STRICT_MARGIN
        } else if a == 1.0 {
            beta0 == 0.0
        } else {
            beta0 >= a - 2.0
        }
    }

    /// Admissible when an intermediate exponent `β″` exists; reduces to
    /// `β′ > -1` for `α ≤ 3` and `β′ ≥ α-4` otherwise.
    pub fn beta_prime_admissible(&self, beta_prime: f64) -> bool {
        if self.alpha <= 3.0 {
            beta_prime > -1.0 + STRICT_MARGIN
        } else {
            beta_prime >= self.alpha - 4.0
        }
    }

    /// Same chain as `β′` plus `-1 < β < 1`.
    pub fn beta_admissible(&self, beta: f64) -> bool {
        self.beta_prime_admissible(beta) && beta < 1.0 - STRICT_MARGIN
    }

    /// Extremal admissible exponents with `η` standing in for `-1⁺`.
    fn pinned(&self, eta: f64) -> Exponents {
        let a = self.alpha;
        let beta0 = if a < 1.0 {
            -1.0 + eta
        } else if a == 1.0 {
            0.0
        } else {
            a - 2.0
        };
        let beta = if a <= 3.0 { -1.0 + eta } else { a - 4.0 };
        Exponents { beta, beta_prime: beta, beta0 }
    }

    /// Every constraint, regime and admissibility rule that `point` violates.
    pub fn feasible(&self, point: &RatePoint) -> Feasibility {
        let mut violations = Vec::new();
        if !self.in_regime(point.delta) {
            violations.push(ConstraintId::DeltaRegime);
        }
        if !self.beta0_admissible(point.beta0) {
            violations.push(ConstraintId::Beta0Admissible);
        }
        if !self.beta_prime_admissible(point.beta_prime) {
            violations.push(ConstraintId::BetaPrimeAdmissible);
        }
        if !self.beta_admissible(point.beta) {
            violations.push(ConstraintId::BetaAdmissible);
        }
        let ex = point.exponents();
        for c in ConstraintId::LINES {
            let (s, b) = c.line(self.alpha, &ex).expect("line constraint");
            if point.gamma < s * point.delta + b {
                violations.push(c);
            }
        }
        Feasibility { feasible: violations.is_empty(), violations }
    }

    fn envelope(&self, ex: &Exponents, delta: f64) -> f64 {
        ConstraintId::LINES
            .iter()
            .map(|c| {
                let (s, b) = c.line(self.alpha, ex).unwrap();
                s * delta + b
            })
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Outcome of a feasibility check.
#[derive(Debug, Clone, PartialEq)]
pub struct Feasibility {
    pub feasible: bool,
    pub violations: Vec<ConstraintId>,
}

/// Case of the analysis an `α` belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    /// `0 < α ≤ 1`
    Case1,
    /// `1 < α < 5/3`
    Case2a,
    /// `5/3 ≤ α < 2`
    Case2b,
    /// `2 ≤ α ≤ 3`
    Case3,
    /// `3 < α < 5`
    Case4,
}

impl Branch {
    pub fn of(alpha: f64) -> Self {
        if alpha <= 1.0 {
            Self::Case1
        } else if alpha < 5.0 / 3.0 {
            Self::Case2a
        } else if alpha < 2.0 {
            Self::Case2b
        } else if alpha <= 3.0 {
            Self::Case3
        } else {
            Self::Case4
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Self::Case1 => "case1",
            Self::Case2a => "case2a",
            Self::Case2b => "case2b",
            Self::Case3 => "case3",
            Self::Case4 => "case4",
        }
    }
}

/// Optimum of the program.
#[derive(Debug, Clone, PartialEq)]
pub struct RateResult {
    pub alpha: f64,
    /// Infimum of `γ`; not attained when an active bound is strict.
    pub gamma_star: f64,
    pub delta_star: f64,
    pub active_constraints: Vec<ConstraintId>,
    pub branch: Branch,
    /// `|γ*(η) - γ*(η/10)|`.
    pub eta_sensitivity: f64,
}

struct Candidate {
    gamma: f64,
    delta: f64,
    interval: DeltaInterval,
}

fn golden_section(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, width: f64) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > width {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    if fc <= fd {
        c
    } else {
        d
    }
}

fn optimize_with(prog: &RateProgram, ex: &Exponents, resolution: f64) -> Candidate {
    let lines: Vec<(f64, f64)> = ConstraintId::LINES.iter().map(|c| c.line(prog.alpha, ex).unwrap()).collect();
    let env = |d: f64| prog.envelope(ex, d);
    let mut best: Option<Candidate> = None;
    for iv in prog.delta_intervals(10.0) {
        let mut delta = golden_section(env, iv.lo, iv.hi, resolution);
        // Snap to the exact kink or endpoint near the bracketed minimum.
        let mut snaps = vec![iv.lo, iv.hi];
        for (i, &(s1, b1)) in lines.iter().enumerate() {
            for &(s2, b2) in &lines[i + 1..] {
                if (s1 - s2).abs() > 1e-14 {
                    snaps.push((b2 - b1) / (s1 - s2));
                }
            }
        }
        for s in snaps {
            if s >= iv.lo && s <= iv.hi && (s - delta).abs() <= 4.0 * resolution && env(s) <= env(delta) {
                delta = s;
            }
        }
        let gamma = env(delta);
        if best.as_ref().is_none_or(|b| gamma < b.gamma) {
            best = Some(Candidate { gamma, delta, interval: iv });
        }
    }
    best.expect("admissible delta set is non-empty for alpha in (0,5)")
}

/// Minimise `γ` over the admissible set with pinned exponents.
pub fn optimize_gamma(alpha: f64, resolution: f64) -> Result<RateResult> {
    optimize_gamma_eta(alpha, resolution, DEFAULT_ETA)
}

pub fn optimize_gamma_eta(alpha: f64, resolution: f64, eta: f64) -> Result<RateResult> {
    let prog = RateProgram::new(alpha)?;
    if !(resolution > 0.0 && resolution <= 1e-3) {
        return Err(Error::InvalidParameter("resolution must lie in (0, 1e-3]".into()));
    }
    if !(eta > 0.0 && eta < 1e-2) {
        return Err(Error::InvalidParameter("eta must lie in (0, 1e-2)".into()));
    }
    let ex = prog.pinned(eta);
    let best = optimize_with(&prog, &ex, resolution);
    let refined = optimize_with(&prog, &prog.pinned(eta / 10.0), resolution);
    assert!(best.gamma.is_finite() && best.gamma > 0.0, "empty feasible region at alpha = {alpha}");

    let tol = 1e-9 + 1e-6 * best.gamma.abs();
    let mut active: Vec<ConstraintId> = ConstraintId::LINES
        .into_iter()
        .filter(|c| {
            let (s, b) = c.line(alpha, &ex).unwrap();
            (s * best.delta + b - best.gamma).abs() <= tol
        })
        .collect();
    let iv = best.interval;
    if (iv.lo_open && (best.delta - iv.lo).abs() <= resolution) || (iv.hi_open && (best.delta - iv.hi).abs() <= resolution) {
        active.push(ConstraintId::DeltaRegime);
    }
    Ok(RateResult {
        alpha,
        gamma_star: best.gamma,
        delta_star: best.delta,
        active_constraints: active,
        branch: Branch::of(alpha),
        eta_sensitivity: (best.gamma - refined.gamma).abs(),
    })
}

/// `(α, τ(α))` rows of the decay-rate curve.
pub fn emit_figure1(alpha_grid: &[f64]) -> Result<Vec<(f64, f64)>> {
    alpha_grid.iter().map(|&a| Ok((a, tau_closed(a)?))).collect()
}

/// `α = k/60`, `k = 1..299`; contains both breakpoints exactly.
pub fn default_alpha_grid() -> Vec<f64> {
    (1..300).map(|k| k as f64 / 60.0).collect()
}

/// One-sided values of `τ` at a breakpoint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BreakpointValues {
    pub alpha: f64,
    pub left: f64,
    pub right: f64,
}

/// Both branch formulas evaluated at each breakpoint.
pub fn breakpoint_values() -> [BreakpointValues; 2] {
    let a = BREAKPOINTS[0];
    let b = BREAKPOINTS[1];
    [
        BreakpointValues { alpha: a, left: (5.0 - a) / (3.0 - a), right: (5.0 + a) / (1.0 + a) },
        BreakpointValues { alpha: b, left: (5.0 + b) / (1.0 + b), right: 4.0 / (b - 1.0) },
    ]
}

/// CSV with header `alpha,tau`.
pub fn write_figure1_csv(rows: &[(f64, f64)], mut w: impl Write) -> std::io::Result<()> {
    writeln!(w, "alpha,tau")?;
    for (a, t) in rows {
        writeln!(w, "{a},{t}")?;
    }
    Ok(())
}
