//! Frequency-domain probe: `‖(iλ - A_h)⁻¹‖` in the energy norm.
//!
//! Solves are reduced to the displacement block. For `(iλ - A_h) U = F`,
//! `F = (f, g)`:
//!
//! ```text
//! (K - λ²M + iλD) u = M g + (iλM + D) f,    v = iλu - f.
//! ```
//!
//! The `G`-adjoint of `A_h` with `G = diag(K, M)` is
//! `A_h* (u, v) = (-v, M⁻¹(Ku - Dv))`, which gives the adjoint solve
//!
//! ```text
//! (K - λ²M - iλD) w = (D - iλM) f - M g,    z = f + iλw.
//! ```

use std::io::Write;

use nalgebra::{Complex, DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::banded::{BandLu, BandMatrix};
use crate::error::{Error, Result};
use crate::fem::{AssembledSystem, StateVector};
use crate::scalar::Real;
use crate::stats::linear_fit;

pub type ComplexState<T> = StateVector<Complex<T>>;

/// Seed of the deterministic power-iteration start vector.
pub const DEFAULT_SEED: u64 = 0x5eed_bea4;
pub const DEFAULT_TOL: f64 = 1e-6;
pub const DEFAULT_MAX_ITER: usize = 5000;
pub const DEFAULT_POINTS: usize = 25;
/// Minimum number of converged samples for a growth fit.
pub const MIN_GAMMA_SAMPLES: usize = 6;

fn lift<T: Real>(m: &BandMatrix<T>) -> BandMatrix<Complex<T>> {
    m.map(|v| Complex::new(v, T::zero()))
}

/// Factorised resolvent at one frequency.
pub struct Resolvent<'a, T: Real> {
    sys: &'a AssembledSystem<T>,
    lambda: T,
    mass: BandMatrix<Complex<T>>,
    damping: BandMatrix<Complex<T>>,
    forward: BandLu<Complex<T>>,
    adjoint: BandLu<Complex<T>>,
}

impl<'a, T: Real> Resolvent<'a, T> {
    pub fn new(sys: &'a AssembledSystem<T>, lambda: T) -> Result<Self> {
        if !lambda.finite() {
            return Err(Error::NonFinite("lambda"));
        }
        let mass = lift(&sys.mass);
        let damping = lift(&sys.damping);
        let base = lift(&sys.stiffness).axpy(Complex::new(-lambda * lambda, T::zero()), &mass);
        let il = Complex::new(T::zero(), lambda);
        let breakdown = |_| Error::SolverBreakdown { lambda: lambda.to_f64_lossy() };
        let forward = base.axpy(il, &damping).lu().map_err(breakdown)?;
        let adjoint = base.axpy(-il, &damping).lu().map_err(breakdown)?;
        Ok(Self { sys, lambda, mass, damping, forward, adjoint })
    }

    pub fn lambda(&self) -> T {
        self.lambda
    }

    fn check(&self, f: &ComplexState<T>) -> Result<()> {
        let n = self.sys.n_dofs();
        if f.u.len() != n || f.v.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: f.u.len().min(f.v.len()) });
        }
        if !f.is_finite() {
            return Err(Error::NonFinite("resolvent right-hand side"));
        }
        Ok(())
    }

    /// `U = (iλ - A_h)⁻¹ F`.
    pub fn apply(&self, f: &ComplexState<T>) -> Result<ComplexState<T>> {
        self.check(f)?;
        let il = Complex::new(T::zero(), self.lambda);
        let rhs = self.mass.mul_vec(&f.v) + self.mass.mul_vec(&f.u) * il + self.damping.mul_vec(&f.u);
        let u = self.forward.solve(&rhs);
        let v = &u * il - &f.u;
        Ok(StateVector { u, v })
    }

    /// `G`-adjoint `((iλ - A_h)⁻¹)* F`.
    pub fn apply_adjoint(&self, f: &ComplexState<T>) -> Result<ComplexState<T>> {
        self.check(f)?;
        let il = Complex::new(T::zero(), self.lambda);
        let rhs = self.damping.mul_vec(&f.u) - self.mass.mul_vec(&f.u) * il - self.mass.mul_vec(&f.v);
        let u = self.adjoint.solve(&rhs);
        let v = &f.u + &u * il;
        Ok(StateVector { u, v })
    }
}

/// `(iλ - A_h)⁻¹ F`.
pub fn resolvent_apply<T: Real>(sys: &AssembledSystem<T>, lambda: T, f: &ComplexState<T>) -> Result<ComplexState<T>> {
    Resolvent::new(sys, lambda)?.apply(f)
}

/// Forward operator `(iλ - A_h) U = (iλu - v, iλv + M⁻¹(Ku + Dv))`.
pub fn shifted_generator_apply<T: Real>(sys: &AssembledSystem<T>, lambda: T, x: &ComplexState<T>) -> Result<ComplexState<T>> {
    let il = Complex::new(T::zero(), lambda);
    let mass = lift(&sys.mass);
    let force = lift(&sys.stiffness).mul_vec(&x.u) + lift(&sys.damping).mul_vec(&x.v);
    let accel = mass.lu()?.solve(&force);
    Ok(StateVector { u: &x.u * il - &x.v, v: &x.v * il + accel })
}

/// Energy inner product `⟨x, y⟩_G = xᴴKy + xᴴMy` (conjugate-linear in `x`).
pub fn g_inner<T: Real>(sys: &AssembledSystem<T>, x: &ComplexState<T>, y: &ComplexState<T>) -> Complex<T> {
    lift(&sys.stiffness).form(&x.u, &y.u) + lift(&sys.mass).form(&x.v, &y.v)
}

pub fn g_norm<T: Real>(sys: &AssembledSystem<T>, x: &ComplexState<T>) -> T {
    let ip = g_inner(sys, x, x).re;
    if ip > T::zero() {
        ip.sqrt()
    } else {
        T::zero()
    }
}

/// Deterministic complex start vector.
pub fn start_vector<T: Real>(n: usize, seed: u64) -> ComplexState<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = || Complex::new(T::lit(rng.gen_range(-1.0..1.0)), T::lit(rng.gen_range(-1.0..1.0)));
    let u = DVector::from_fn(n, |_, _| draw());
    let v = DVector::from_fn(n, |_, _| draw());
    StateVector { u, v }
}

/// One point of a resolvent sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResolventSample<T> {
    pub lambda: T,
    /// Largest `G`-singular value of the resolvent.
    pub norm: T,
    pub iterations: usize,
    pub converged: bool,
    /// Relative eigen-residual `‖R*R x - σ² x‖_G / σ²` at termination.
    pub residual: T,
}

/// Power iteration on `R*R` in the `G` inner product.
pub fn resolvent_norm<T: Real>(sys: &AssembledSystem<T>, lambda: T, tol: T, max_iter: usize) -> Result<ResolventSample<T>> {
    resolvent_norm_seeded(sys, lambda, tol, max_iter, DEFAULT_SEED)
}

pub fn resolvent_norm_seeded<T: Real>(
    sys: &AssembledSystem<T>,
    lambda: T,
    tol: T,
    max_iter: usize,
    seed: u64,
) -> Result<ResolventSample<T>> {
    if !(tol > T::zero() && tol <= T::lit(1e-4)) {
        return Err(Error::InvalidParameter("tol must lie in (0, 1e-4]".into()));
    }
    let r = Resolvent::new(sys, lambda)?;
    let mut x = start_vector::<T>(sys.n_dofs(), seed);
    let nx = g_norm(sys, &x);
    x = x.scale(Complex::new(T::one() / nx, T::zero()));
    let mut sigma2 = T::zero();
    let mut residual = T::max_value().unwrap();
    for it in 1..=max_iter.max(1) {
        let y = r.apply(&x)?;
        sigma2 = g_inner(sys, &y, &y).re;
        let z = r.apply_adjoint(&y)?;
        if !(sigma2 > T::zero()) || !sigma2.finite() || !z.is_finite() {
            return Err(Error::SolverBreakdown { lambda: lambda.to_f64_lossy() });
        }
        let diff = z.axpy(Complex::new(-sigma2, T::zero()), &x);
        residual = g_norm(sys, &diff) / sigma2;
        let nz = g_norm(sys, &z);
        x = z.scale(Complex::new(T::one() / nz, T::zero()));
        if residual <= tol {
            return Ok(ResolventSample { lambda, norm: sigma2.sqrt(), iterations: it, converged: true, residual });
        }
    }
    Ok(ResolventSample { lambda, norm: sigma2.sqrt(), iterations: max_iter, converged: false, residual })
}

/// Independent samples along an ascending grid; failures stay in place.
pub fn sweep<T: Real>(
    sys: &AssembledSystem<T>,
    grid: &[T],
    tol: T,
    max_iter: usize,
) -> Result<Vec<Result<ResolventSample<T>>>> {
    if grid.len() < 8 {
        return Err(Error::InvalidParameter(format!("sweep grid has {} points, need at least 8", grid.len())));
    }
    if grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::InvalidParameter("sweep grid must be strictly ascending".into()));
    }
    Ok(grid.par_iter().map(|&l| resolvent_norm(sys, l, tol, max_iter)).collect())
}

/// `n` log-spaced points from `lo` to `hi` inclusive.
pub fn log_grid<T: Real>(lo: T, hi: T, n: usize) -> Vec<T> {
    let (a, b) = (lo.ln(), hi.ln());
    let d = T::from_usize(n.max(2) - 1).unwrap();
    (0..n).map(|i| (a + (b - a) * T::from_usize(i).unwrap() / d).exp()).collect()
}

/// `[10², 10^3.5]`, with the upper end capped at `(N/10)²` so that the
/// sampled frequencies stay resolved by the mesh.
pub fn default_window(n_elements: usize) -> (f64, f64) {
    let cap = (n_elements as f64 / 10.0).powi(2);
    (1e2, 10f64.powf(3.5).min(cap).max(1e2 * 1.5))
}

/// Growth exponent of `‖R(iλ)‖ ~ λ^γ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaFit<T> {
    pub gamma_num: T,
    pub lambda_window: (T, T),
    /// RMS residual of the `ln ‖R‖` vs `ln λ` regression.
    pub residual: T,
    pub samples: usize,
}

/// Least-squares slope of `ln ‖R‖` against `ln λ` over converged samples.
pub fn fit_gamma<T: Real>(samples: &[ResolventSample<T>]) -> Result<GammaFit<T>> {
    let used: Vec<_> = samples.iter().filter(|s| s.converged && s.lambda > T::zero() && s.norm > T::zero()).collect();
    if used.len() < MIN_GAMMA_SAMPLES {
        return Err(Error::DegenerateFit(format!(
            "{} converged samples, need {MIN_GAMMA_SAMPLES}",
            used.len()
        )));
    }
    let xs: Vec<T> = used.iter().map(|s| s.lambda.ln()).collect();
    let ys: Vec<T> = used.iter().map(|s| s.norm.ln()).collect();
    let fit = linear_fit(&xs, &ys)?;
    let lo = used.iter().map(|s| s.lambda).fold(T::max_value().unwrap(), |a, b| if b < a { b } else { a });
    let hi = used.iter().map(|s| s.lambda).fold(T::zero(), |a, b| if b > a { b } else { a });
    Ok(GammaFit { gamma_num: fit.slope, lambda_window: (lo, hi), residual: fit.rms, samples: used.len() })
}

/// Dense cross-check: builds `R` column by column and takes the spectral norm
/// of `Lᵀ R L⁻ᵀ` where `G = L Lᵀ`. Cubic cost; small meshes only.
pub fn dense_resolvent_norm<T: Real>(sys: &AssembledSystem<T>, lambda: T) -> Result<T> {
    let n = sys.n_dofs();
    let r = Resolvent::new(sys, lambda)?;
    let mut dense = DMatrix::<Complex<T>>::zeros(2 * n, 2 * n);
    for j in 0..2 * n {
        let mut f = StateVector::<Complex<T>>::zeros(n);
        if j < n {
            f.u[j] = Complex::new(T::one(), T::zero());
        } else {
            f.v[j - n] = Complex::new(T::one(), T::zero());
        }
        let x = r.apply(&f)?;
        for i in 0..n {
            dense[(i, j)] = x.u[i];
            dense[(n + i, j)] = x.v[i];
        }
    }
    let g = sys.gram().to_dense();
    let l = g.cholesky().ok_or(Error::Singular { pivot: 0 })?.l();
    let lt = l.transpose();
    let lt_inv = lt.clone().try_inverse().ok_or(Error::Singular { pivot: 0 })?;
    let b = lt.map(|v| Complex::new(v, T::zero())) * dense * lt_inv.map(|v| Complex::new(v, T::zero()));
    let sv = b.singular_values();
    Ok(sv.iter().fold(T::zero(), |m, &s| if s > m { s } else { m }))
}

/// CSV with header `lambda,norm,iterations,converged`; failed samples are written with `nan`.
pub fn write_sweep_csv<T: Real>(grid: &[T], results: &[Result<ResolventSample<T>>], mut w: impl Write) -> std::io::Result<()> {
    writeln!(w, "lambda,norm,iterations,converged")?;
    for (&l, r) in grid.iter().zip(results) {
        match r {
            Ok(s) => writeln!(w, "{},{},{},{}", s.lambda.to_f64_lossy(), s.norm.to_f64_lossy(), s.iterations, s.converged)?,
            Err(_) => writeln!(w, "{},nan,0,false", l.to_f64_lossy())?,
        }
    }
    Ok(())
}
