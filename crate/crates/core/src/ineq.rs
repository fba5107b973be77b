//! Numerical checks of the weighted Hardy inequality
//!
//! ```text
//! ∫₀¹ x^β |y|² ≤ C ∫₀¹ x^α |y'|²,   y(1) = 0,
//! ```
//!
//! against the two-weight supremum constant `K`, and of the size-aware
//! interpolation inequality for `‖f'‖` on an interval `(c, d)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::quadrature::{adaptive, graded_left, GaussLegendre};

/// Absolute quadrature tolerance for the Hardy integrals.
pub const HARDY_QUAD_TOL: f64 = 1e-10;
/// Samples whose denominator falls below this are skipped.
pub const DENOMINATOR_FLOOR: f64 = 1e-14;
/// Slack added to the `2K` bracket.
pub const BRACKET_SLACK: f64 = 1e-9;
/// Allowed deviation between ratios on `(c, d)` and on `(0, 1)`.
pub const DILATION_TOL: f64 = 1e-9;

/// Power weights `x^β` (left) and `x^α` (right) on `(0, L)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HardyCase {
    pub alpha: f64,
    pub beta: f64,
    pub length: f64,
}

impl HardyCase {
    pub fn new(alpha: f64, beta: f64) -> Self {
        Self { alpha, beta, length: 1.0 }
    }

    /// `(∫₀ˢ t^β dt)(∫ₛᴸ t^{-α} dt)`.
    pub fn product(&self, s: f64) -> f64 {
        let (a, b, l) = (self.alpha, self.beta, self.length);
        let left = s.powf(b + 1.0) / (b + 1.0);
        let right = if a == 1.0 {
            (l / s).ln()
        } else {
            (l.powf(1.0 - a) - s.powf(1.0 - a)) / (1.0 - a)
        };
        left * right
    }

    /// The condition that makes `K` infinite, if any.
    pub fn divergence(&self) -> Option<&'static str> {
        if !(self.beta > -1.0) {
            Some("beta > -1")
        } else if self.alpha > 1.0 && self.beta < self.alpha - 2.0 {
            Some("beta >= alpha - 2")
        } else {
            None
        }
    }
}

/// Supremum constant of the two-weight Hardy inequality.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HardyConstant {
    /// `argmax = 0` means the supremum is the limit `s → 0⁺`.
    Finite { k: f64, argmax: f64 },
    Infinite { condition: &'static str },
}

impl HardyConstant {
    pub fn value(&self) -> f64 {
        match self {
            Self::Finite { k, .. } => *k,
            Self::Infinite { .. } => f64::INFINITY,
        }
    }
}

/// `K = sup_{0<s<L} (∫₀ˢ t^β)(∫ₛᴸ t^{-α})` to relative accuracy `1e-8`.
pub fn hardy_constant(case: &HardyCase) -> Result<HardyConstant> {
    if !(case.alpha >= 0.0 && case.length > 0.0 && case.alpha.is_finite() && case.beta.is_finite()) {
        return Err(Error::InvalidParameter(format!("hardy case {case:?}")));
    }
    if let Some(condition) = case.divergence() {
        return Ok(HardyConstant::Infinite { condition });
    }
    let l = case.length;
    // Scan in log s, then refine by golden section in log s.
    let n = 4000;
    let t_min = -36.0_f64;
    let at = |t: f64| case.product(l * t.exp());
    let ts: Vec<f64> = (0..=n).map(|i| t_min * (1.0 - i as f64 / n as f64)).collect();
    let (ibest, _) = ts
        .iter()
        .enumerate()
        .map(|(i, &t)| (i, at(t)))
        .fold((0, f64::NEG_INFINITY), |b, c| if c.1 > b.1 { c } else { b });
    let lo = ts[ibest.saturating_sub(1)];
    let hi = ts[(ibest + 1).min(n)];
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    while b - a > 1e-10 {
        if at(c) >= at(d) {
            b = d;
            d = c;
            c = b - r * (b - a);
        } else {
            a = c;
            c = d;
            d = a + r * (b - a);
        }
    }
    let t_star = 0.5 * (a + b);
    let mut k = at(t_star).max(at(ts[ibest]));
    let mut argmax = l * t_star.exp();
    // On the critical line β = α - 2 the product tends to 1/((β+1)(α-1)) as s → 0.
    if case.alpha > 1.0 && case.beta == case.alpha - 2.0 {
        let limit = 1.0 / ((case.beta + 1.0) * (case.alpha - 1.0));
        if limit >= k {
            k = limit;
            argmax = 0.0;
        }
    }
    Ok(HardyConstant::Finite { k, argmax })
}

/// Test function on `(0, 1)` with value, first and second derivative.
#[derive(Debug, Clone, PartialEq)]
pub enum TestFunction {
    /// `p(x) = Σ c_k x^k`, multiplied by `(1 - x)` when `root_at_one`.
    Polynomial { coeffs: Vec<f64>, root_at_one: bool },
    /// C¹ cubic Hermite spline on uniform knots `0, 1/m, …, 1`.
    Spline { values: Vec<f64>, slopes: Vec<f64> },
    /// `Σ a_k sin(kπ(1-x)/2) + Σ b_k (1 - cos(kπ(1-x)))`.
    Fourier { sin: Vec<f64>, cos: Vec<f64> },
    /// `(x + ε)^{-p} - (1 + ε)^{-p}`, concentrating at 0 as `ε → 0`.
    Concentrated { eps: f64, power: f64 },
}

impl TestFunction {
    pub fn eval(&self, x: f64) -> (f64, f64, f64) {
        match self {
            Self::Polynomial { coeffs, root_at_one } => {
                let (mut p, mut dp, mut ddp) = (0.0, 0.0, 0.0);
                for &c in coeffs.iter().rev() {
                    ddp = ddp * x + 2.0 * dp;
                    dp = dp * x + p;
                    p = p * x + c;
                }
                if *root_at_one {
                    let w = 1.0 - x;
                    (w * p, w * dp - p, w * ddp - 2.0 * dp)
                } else {
                    (p, dp, ddp)
                }
            }
            Self::Spline { values, slopes } => {
                let m = values.len() - 1;
                let h = 1.0 / m as f64;
                let t = x * m as f64;
                let e = (t.floor().max(0.0) as usize).min(m - 1);
                let xi = t - e as f64;
                let (y0, y1, s0, s1) = (values[e], values[e + 1], slopes[e], slopes[e + 1]);
                let (x2, x3) = (xi * xi, xi * xi * xi);
                let y = y0 * (1.0 - 3.0 * x2 + 2.0 * x3) + s0 * h * (xi - 2.0 * x2 + x3) + y1 * (3.0 * x2 - 2.0 * x3) + s1 * h * (x3 - x2);
                let dy = (y0 * (-6.0 * xi + 6.0 * x2) + s0 * h * (1.0 - 4.0 * xi + 3.0 * x2) + y1 * (6.0 * xi - 6.0 * x2) + s1 * h * (3.0 * x2 - 2.0 * xi)) / h;
                let ddy = (y0 * (-6.0 + 12.0 * xi) + s0 * h * (-4.0 + 6.0 * xi) + y1 * (6.0 - 12.0 * xi) + s1 * h * (6.0 * xi - 2.0)) / (h * h);
                (y, dy, ddy)
            }
            Self::Fourier { sin, cos } => {
                let pi = std::f64::consts::PI;
                let (mut y, mut dy, mut ddy) = (0.0, 0.0, 0.0);
                for (k, &a) in sin.iter().enumerate() {
                    let w = (k + 1) as f64 * pi / 2.0;
                    let arg = w * (1.0 - x);
                    y += a * arg.sin();
                    dy -= a * w * arg.cos();
                    ddy -= a * w * w * arg.sin();
                }
                for (k, &b) in cos.iter().enumerate() {
                    let w = (k + 1) as f64 * pi;
                    let arg = w * (1.0 - x);
                    y += b * (1.0 - arg.cos());
                    dy -= b * w * arg.sin();
                    ddy += b * w * w * arg.cos();
                }
                (y, dy, ddy)
            }
            Self::Concentrated { eps, power } => {
                let z = x + eps;
                let y = z.powf(-power) - (1.0 + eps).powf(-power);
                (y, -power * z.powf(-power - 1.0), power * (power + 1.0) * z.powf(-power - 2.0))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FamilyKind {
    Polynomial,
    Spline,
    RandomFourier,
}

impl FamilyKind {
    pub fn label(self) -> &'static str {
        match self {
            Self::Polynomial => "polynomial",
            Self::Spline => "spline",
            Self::RandomFourier => "random_fourier",
        }
    }
}

/// Seeded random family; every member vanishes at `x = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestFunctionFamily {
    pub kind: FamilyKind,
    pub count: usize,
    pub seed: u64,
}

impl TestFunctionFamily {
    pub fn new(kind: FamilyKind, count: usize, seed: u64) -> Self {
        Self { kind, count, seed }
    }

    pub fn generate(&self) -> Vec<TestFunction> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        (0..self.count)
            .map(|_| match self.kind {
                FamilyKind::Polynomial => {
                    let deg = rng.gen_range(0..=5);
                    TestFunction::Polynomial { coeffs: (0..=deg).map(|_| rng.gen_range(-1.0..1.0)).collect(), root_at_one: true }
                }
                FamilyKind::Spline => {
                    let m = rng.gen_range(2..=8);
                    let mut values: Vec<f64> = (0..=m).map(|_| rng.gen_range(-1.0..1.0)).collect();
                    values[m] = 0.0;
                    let slopes = (0..=m).map(|_| rng.gen_range(-3.0..3.0)).collect();
                    TestFunction::Spline { values, slopes }
                }
                FamilyKind::RandomFourier => {
                    let modes = rng.gen_range(1..=6);
                    let sin = (0..modes).map(|k| rng.gen_range(-1.0..1.0) / (k + 1) as f64).collect();
                    let cos = (0..modes).map(|k| rng.gen_range(-1.0..1.0) / ((k + 1) * (k + 1)) as f64).collect();
                    TestFunction::Fourier { sin, cos }
                }
            })
            .collect()
    }
}

/// Numerator and denominator of the Hardy ratio.
pub fn hardy_integrals(f: &TestFunction, alpha: f64, beta: f64) -> (f64, f64) {
    let rule = GaussLegendre::new(16);
    let num = graded_left(&rule, 0.0, 1.0, HARDY_QUAD_TOL, |x| {
        let y = f.eval(x).0;
        x.powf(beta) * y * y
    });
    let den = graded_left(&rule, 0.0, 1.0, HARDY_QUAD_TOL, |x| {
        let dy = f.eval(x).1;
        x.powf(alpha) * dy * dy
    });
    (num.value, den.value)
}

/// `∫₀¹ x^β y² / ∫₀¹ x^α y'²`, or `None` when the denominator is negligible.
pub fn hardy_ratio(f: &TestFunction, alpha: f64, beta: f64) -> Option<f64> {
    let (num, den) = hardy_integrals(f, alpha, beta);
    (den >= DENOMINATOR_FLOOR).then(|| num / den)
}

#[derive(Debug, Clone, PartialEq)]
pub struct HardyReport {
    pub alpha: f64,
    pub beta: f64,
    pub k: f64,
    pub max_ratio: f64,
    /// Index of the maximising sample in the generated family.
    pub arg_max: Option<usize>,
    pub samples: usize,
    pub skipped: usize,
    pub seed: u64,
    pub kind: FamilyKind,
}

impl HardyReport {
    pub fn two_k(&self) -> f64 {
        2.0 * self.k
    }

    /// `max_ratio ≤ 2K + 1e-9`.
    pub fn within_bracket(&self) -> bool {
        self.max_ratio <= self.two_k() + BRACKET_SLACK
    }
}

/// Largest Hardy ratio over a family. The bracket is reported, not enforced.
pub fn check_hardy(family: &TestFunctionFamily, alpha: f64, beta: f64) -> Result<HardyReport> {
    let k = match hardy_constant(&HardyCase::new(alpha, beta))? {
        HardyConstant::Finite { k, .. } => k,
        HardyConstant::Infinite { condition } => {
            return Err(Error::InvalidParameter(format!("inadmissible weights alpha={alpha}, beta={beta}: {condition} fails")))
        }
    };
    let ratios: Vec<Option<f64>> = family.generate().par_iter().map(|f| hardy_ratio(f, alpha, beta)).collect();
    let mut best = (f64::NEG_INFINITY, None);
    for (i, r) in ratios.iter().enumerate() {
        if let Some(r) = *r {
            if r > best.0 {
                best = (r, Some(i));
            }
        }
    }
    let skipped = ratios.iter().filter(|r| r.is_none()).count();
    Ok(HardyReport {
        alpha,
        beta,
        k,
        max_ratio: if best.1.is_some() { best.0 } else { 0.0 },
        arg_max: best.1,
        samples: ratios.len(),
        skipped,
        seed: family.seed,
        kind: family.kind,
    })
}

/// Hardy ratios of `(x+ε)^{-p} - (1+ε)^{-p}` for each `ε`.
pub fn concentration_ratios(alpha: f64, beta: f64, power: f64, eps: &[f64]) -> Vec<(f64, f64)> {
    eps.iter()
        .map(|&e| {
            let f = TestFunction::Concentrated { eps: e, power };
            (e, hardy_ratio(&f, alpha, beta).unwrap_or(0.0))
        })
        .collect()
}

/// `‖f'‖² / ((d-c)²‖f''‖² + (d-c)^{-2}‖f‖²)` for `f(x) = g((x-c)/(d-c))`.
pub fn interpolation_ratio(g: &TestFunction, c: f64, d: f64) -> Result<f64> {
    if !(c < d) || !c.is_finite() || !d.is_finite() {
        return Err(Error::InvalidParameter(format!("degenerate interval ({c}, {d})")));
    }
    let w = d - c;
    let rule = GaussLegendre::new(16);
    let eval = |x: f64| {
        let (y, dy, ddy) = g.eval(((x - c) / w).clamp(0.0, 1.0));
        (y, dy / w, ddy / (w * w))
    };
    let integrate = |which: usize| {
        let pick = |x: f64| {
            let v = eval(x);
            let z = [v.0, v.1, v.2][which];
            z * z
        };
        let rough = rule.integrate(c, d, pick).abs();
        adaptive(&rule, c, d, 1e-14 * rough.max(1e-300), 40, pick).value
    };
    let (f0, f1, f2) = (integrate(0), integrate(1), integrate(2));
    let den = w * w * f2 + f0 / (w * w);
    if !(den > 0.0) {
        return Ok(0.0);
    }
    Ok(f1 / den)
}

#[derive(Debug, Clone, PartialEq)]
pub struct InterpolationReport {
    pub c: f64,
    pub d: f64,
    pub empirical_k: f64,
    pub arg_max: Option<usize>,
    /// Ratios on `(c, d)`, in family order.
    pub ratios: Vec<f64>,
    /// Largest `|ratio on (c,d) - ratio on (0,1)|`.
    pub dilation_deviation: f64,
    pub seed: u64,
}

/// Empirical interpolation constant; fails if dilation invariance is broken.
pub fn check_interpolation(family: &TestFunctionFamily, c: f64, d: f64) -> Result<InterpolationReport> {
    let members = family.generate();
    let pairs: Vec<Result<(f64, f64)>> = members
        .par_iter()
        .map(|g| Ok((interpolation_ratio(g, c, d)?, interpolation_ratio(g, 0.0, 1.0)?)))
        .collect();
    let pairs: Vec<(f64, f64)> = pairs.into_iter().collect::<Result<_>>()?;
    let mut empirical_k = 0.0;
    let mut arg_max = None;
    let mut dev: f64 = 0.0;
    for (i, &(r, r01)) in pairs.iter().enumerate() {
        if !r.is_finite() {
            return Err(Error::NonFinite("interpolation ratio"));
        }
        dev = dev.max((r - r01).abs());
        if r > empirical_k {
            empirical_k = r;
            arg_max = Some(i);
        }
    }
    if dev > DILATION_TOL {
        return Err(Error::InvalidParameter(format!("dilation invariance violated by {dev:e}")));
    }
    Ok(InterpolationReport {
        c,
        d,
        empirical_k,
        arg_max,
        ratios: pairs.iter().map(|p| p.0).collect(),
        dilation_deviation: dev,
        seed: family.seed,
    })
}
