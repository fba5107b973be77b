//! Gauss-Legendre rules and adaptive integration for integrands with
//! power-type endpoint behaviour such as `x^a` with `a > -1`.

use crate::scalar::Real;

/// Gauss-Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    /// Nodes by Newton iteration on `P_n`, starting from the Chebyshev guess.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1);
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..n.div_ceil(2) {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 1.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            dp = if d != 0.0 { d } else { dp };
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        Self { nodes, weights }
    }

    /// Applies the rule on `[a, b]`, accumulating a vector-valued integrand.
    pub fn integrate_into<T: Real>(&self, a: T, b: T, out: &mut [T], f: &mut impl FnMut(T, &mut [T])) {
        let half = (b - a) * T::lit(0.5);
        let mid = (a + b) * T::lit(0.5);
        let mut buf = vec![T::zero(); out.len()];
        for (&x, &w) in self.nodes.iter().zip(&self.weights) {
            buf.iter_mut().for_each(|v| *v = T::zero());
            f(mid + half * T::lit(x), &mut buf);
            let w = half * T::lit(w);
            for (o, v) in out.iter_mut().zip(&buf) {
                *o += w * *v;
            }
        }
    }

    pub fn integrate<T: Real>(&self, a: T, b: T, mut f: impl FnMut(T) -> T) -> T {
        let mut out = [T::zero()];
        self.integrate_into(a, b, &mut out, &mut |x, o: &mut [T]| o[0] = f(x));
        out[0]
    }
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Outcome of an adaptive integration.
#[derive(Debug, Clone, Copy)]
pub struct Quad<T> {
    pub value: T,
    pub error: T,
    pub converged: bool,
}

/// Adaptive bisection with a fixed Gauss base rule.
///
/// An interval is accepted when the one-panel and two-panel estimates agree
/// to within its share `tol * len / total_len` of the absolute tolerance.
pub fn adaptive<T: Real>(rule: &GaussLegendre, a: T, b: T, tol: T, max_depth: usize, mut f: impl FnMut(T) -> T) -> Quad<T> {
    let total = b - a;
    if total == T::zero() {
        return Quad { value: T::zero(), error: T::zero(), converged: true };
    }
    let mut stack = vec![(a, b, rule.integrate(a, b, &mut f), 0usize)];
    let mut value = T::zero();
    let mut error = T::zero();
    let mut converged = true;
    let half = T::lit(0.5);
    while let Some((lo, hi, whole, depth)) = stack.pop() {
        let mid = (lo + hi) * half;
        let left = rule.integrate(lo, mid, &mut f);
        let right = rule.integrate(mid, hi, &mut f);
        let err = (left + right - whole).abs();
        let share = tol * ((hi - lo) / total).abs();
        let floor = roundoff_floor(left.abs() + right.abs());
        if err <= share || err <= floor || depth >= max_depth {
            if err > share && err > floor {
                converged = false;
            }
            value += left + right;
            error += err;
        } else {
            stack.push((lo, mid, left, depth + 1));
            stack.push((mid, hi, right, depth + 1));
        }
    }
    Quad { value, error, converged }
}

/// Panel differences below this are indistinguishable from rounding.
fn roundoff_floor<T: Real>(magnitude: T) -> T {
    T::lit(64.0) * T::eps() * magnitude
}

/// Vector-valued variant of [`adaptive`]; the error test uses the largest
/// component difference. Returns the integral and whether every panel met
/// its tolerance.
pub fn adaptive_vec<T: Real>(
    rule: &GaussLegendre,
    a: T,
    b: T,
    tol: T,
    max_depth: usize,
    dim: usize,
    f: &mut impl FnMut(T, &mut [T]),
) -> (Vec<T>, bool) {
    let total = b - a;
    let panel = |lo: T, hi: T, f: &mut dyn FnMut(T, &mut [T])| {
        let mut out = vec![T::zero(); dim];
        rule.integrate_into(lo, hi, &mut out, &mut |x, o: &mut [T]| f(x, o));
        out
    };
    let mut value = vec![T::zero(); dim];
    let mut converged = true;
    let mut stack = vec![(a, b, panel(a, b, f), 0usize)];
    while let Some((lo, hi, whole, depth)) = stack.pop() {
        let mid = (lo + hi) * T::lit(0.5);
        let left = panel(lo, mid, f);
        let right = panel(mid, hi, f);
        let err = whole
            .iter()
            .zip(left.iter().zip(&right))
            .map(|(&w, (&l, &r))| (l + r - w).abs())
            .fold(T::zero(), |m, e| if e > m { e } else { m });
        let scale = left.iter().zip(&right).map(|(&l, &r)| l.abs() + r.abs()).fold(T::zero(), |m, e| if e > m { e } else { m });
        let share = tol * ((hi - lo) / total).abs();
        let floor = roundoff_floor(scale);
        if err <= share || err <= floor || depth >= max_depth {
            converged &= err <= share || err <= floor;
            for (v, (&l, &r)) in value.iter_mut().zip(left.iter().zip(&right)) {
                *v += l + r;
            }
        } else {
            stack.push((lo, mid, left, depth + 1));
            stack.push((mid, hi, right, depth + 1));
        }
    }
    (value, converged)
}

/// Integrates over `[a, b]` after splitting dyadically towards `a`, where the
/// integrand may be singular (integrably) or have unbounded derivatives.
///
/// Pieces `[a + h/2^{k+1}, a + h/2^k]` are integrated adaptively; the innermost
/// piece is dropped once its one-panel estimate and the change in the
/// running total both fall below `tol / 4`.
pub fn graded_left<T: Real>(rule: &GaussLegendre, a: T, b: T, tol: T, mut f: impl FnMut(T) -> T) -> Quad<T> {
    let h = b - a;
    let quarter = tol * T::lit(0.25);
    let mut value = T::zero();
    let mut error = T::zero();
    let mut converged = true;
    let mut hi = h;
    for _ in 0..1000 {
        let lo = hi * T::lit(0.5);
        let piece = adaptive(rule, a + lo, a + hi, quarter, 60, &mut f);
        value += piece.value;
        error += piece.error;
        converged &= piece.converged;
        let rest = rule.integrate(a, a + lo, &mut f);
        if rest.abs() <= quarter && piece.value.abs() <= quarter {
            return Quad { value: value + rest, error: error + rest.abs(), converged };
        }
        if lo == T::zero() {
            break;
        }
        hi = lo;
    }
    Quad { value, error, converged: false }
}
