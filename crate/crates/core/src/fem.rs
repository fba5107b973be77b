//! H²-conforming discretisation of the clamped beam on `(-1, 1)`.
//!
//! Two-node Hermite cubic elements carry `(u, u')` at every node. The mesh
//! always has a node at `x = 0`, so the undamped and damped halves share the
//! interface degrees of freedom and continuity of `u`, `u'` across the
//! interface holds by construction. Clamped DOFs at `x = ±1` are eliminated.

use std::io::Write;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;

use crate::banded::BandMatrix;
use crate::error::{Error, Result};
use crate::model::DampingProfile;
use crate::quadrature::{adaptive_vec, GaussLegendre};
use crate::scalar::Real;

/// Half-bandwidth of every assembled operator.
pub const BANDWIDTH: usize = 3;

const GAUSS_POINTS: usize = 16;

/// Nodes of the graded mesh on `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh<T> {
    nodes: Vec<T>,
    interface: usize,
    grading: T,
}

/// Uniform mesh on `(-1, 0)`; on `(0, 1)` element lengths grow by the factor
/// `grading` away from `x = 0`.
pub fn build_mesh<T: Real>(n_elements: usize, grading: T) -> Result<Mesh<T>> {
    if n_elements < 4 {
        return Err(Error::InvalidParameter(format!("n_elements = {n_elements}, need at least 4")));
    }
    if !n_elements.is_multiple_of(2) {
        return Err(Error::InvalidParameter(format!("n_elements = {n_elements} must be even")));
    }
    if !(grading.finite() && grading >= T::one()) {
        return Err(Error::InvalidParameter("grading must be >= 1".into()));
    }
    let half = n_elements / 2;
    let hf = T::from_usize(half).unwrap();
    let mut nodes = Vec::with_capacity(n_elements + 1);
    for i in 0..half {
        nodes.push(-T::one() + T::from_usize(i).unwrap() / hf);
    }
    nodes.push(T::zero());
    let mut lengths: Vec<T> = (0..half).map(|k| grading.powi(k as i32)).collect();
    let total = lengths.iter().fold(T::zero(), |a, &b| a + b);
    lengths.iter_mut().for_each(|h| *h /= total);
    let mut x = T::zero();
    for h in &lengths[..half - 1] {
        x += *h;
        nodes.push(x);
    }
    nodes.push(T::one());
    Ok(Mesh { nodes, interface: half, grading })
}

/// Grading factor for which the largest-to-smallest element ratio on `(0, 1)` equals `ratio`.
pub fn grading_for_ratio(n_elements: usize, ratio: f64) -> f64 {
    let half = (n_elements / 2).max(2);
    ratio.powf(1.0 / (half - 1) as f64)
}

impl<T: Real> Mesh<T> {
    pub fn nodes(&self) -> &[T] {
        &self.nodes
    }

    pub fn n_elements(&self) -> usize {
        self.nodes.len() - 1
    }

    /// Index of the node at `x = 0`.
    pub fn interface_node(&self) -> usize {
        self.interface
    }

    pub fn grading(&self) -> T {
        self.grading
    }

    /// `(left, length)` of element `e`.
    pub fn element(&self, e: usize) -> (T, T) {
        (self.nodes[e], self.nodes[e + 1] - self.nodes[e])
    }

    pub fn element_lengths(&self) -> Vec<T> {
        self.nodes.windows(2).map(|w| w[1] - w[0]).collect()
    }

    pub fn smallest_element(&self) -> T {
        self.element_lengths().into_iter().fold(T::max_value().unwrap(), |a, b| if b < a { b } else { a })
    }

    /// Element containing `x` (right-closed except for the first element).
    pub fn locate(&self, x: T) -> usize {
        let i = self.nodes.partition_point(|&n| n < x);
        i.saturating_sub(1).min(self.n_elements() - 1)
    }
}

/// Hermite cubic shape functions on an element of length `h`, local `xi` in `[0, 1]`.
#[inline]
pub fn shape<T: Real>(xi: T, h: T) -> [T; 4] {
    let (two, three) = (T::lit(2.0), T::lit(3.0));
    let xi2 = xi * xi;
    let xi3 = xi2 * xi;
    [
        T::one() - three * xi2 + two * xi3,
        h * (xi - two * xi2 + xi3),
        three * xi2 - two * xi3,
        h * (xi3 - xi2),
    ]
}

/// First derivatives in `x`.
#[inline]
pub fn shape_d1<T: Real>(xi: T, h: T) -> [T; 4] {
    let six = T::lit(6.0);
    let three = T::lit(3.0);
    let four = T::lit(4.0);
    let two = T::lit(2.0);
    [
        (six * xi * xi - six * xi) / h,
        T::one() - four * xi + three * xi * xi,
        (six * xi - six * xi * xi) / h,
        three * xi * xi - two * xi,
    ]
}

/// Second derivatives in `x`.
#[inline]
pub fn shape_d2<T: Real>(xi: T, h: T) -> [T; 4] {
    let r = reference_d2(xi);
    [r[0] / (h * h), r[1] / h, r[2] / (h * h), r[3] / h]
}

#[inline]
fn reference_d2<T: Real>(xi: T) -> [T; 4] {
    let six = T::lit(6.0);
    let twelve = T::lit(12.0);
    [twelve * xi - six, six * xi - T::lit(4.0), six - twelve * xi, six * xi - T::lit(2.0)]
}

/// Exact element mass matrix `∫ N_i N_j`.
pub fn element_mass<T: Real>(h: T) -> [[T; 4]; 4] {
    let c = h / T::lit(420.0);
    let l = |v: f64| T::lit(v);
    let h2 = h * h;
    [
        [l(156.0) * c, l(22.0) * h * c, l(54.0) * c, l(-13.0) * h * c],
        [l(22.0) * h * c, l(4.0) * h2 * c, l(13.0) * h * c, l(-3.0) * h2 * c],
        [l(54.0) * c, l(13.0) * h * c, l(156.0) * c, l(-22.0) * h * c],
        [l(-13.0) * h * c, l(-3.0) * h2 * c, l(-22.0) * h * c, l(4.0) * h2 * c],
    ]
}

/// Exact element stiffness matrix `∫ N_i'' N_j''`.
pub fn element_stiffness<T: Real>(h: T) -> [[T; 4]; 4] {
    let c = T::one() / (h * h * h);
    let l = |v: f64| T::lit(v);
    let h2 = h * h;
    [
        [l(12.0) * c, l(6.0) * h * c, l(-12.0) * c, l(6.0) * h * c],
        [l(6.0) * h * c, l(4.0) * h2 * c, l(-6.0) * h * c, l(2.0) * h2 * c],
        [l(-12.0) * c, l(-6.0) * h * c, l(12.0) * c, l(-6.0) * h * c],
        [l(6.0) * h * c, l(2.0) * h2 * c, l(-6.0) * h * c, l(4.0) * h2 * c],
    ]
}

/// Element damping matrix `∫ b N_i'' N_j''` on `[left, left + h]`.
///
/// `quad_tol` bounds the error of the integrals on the reference element
/// `[0, 1]`. The element whose left end is `x = 0` is bisected towards 0 until
/// two successive estimates agree to `quad_tol`; other elements use adaptive
/// bisection with the same Gauss rule.
pub fn element_damping<T: Real>(
    profile: &DampingProfile<T>,
    left: T,
    h: T,
    quad_tol: T,
    element: usize,
) -> Result<[[T; 4]; 4]> {
    let mut out = [[T::zero(); 4]; 4];
    if left + h <= T::zero() || profile.is_zero() {
        return Ok(out);
    }
    let rule = GaussLegendre::new(GAUSS_POINTS);
    let mut integrand = |xi: T, o: &mut [T]| {
        let b = profile.eval_unchecked(left + h * xi);
        let r = reference_d2(xi);
        let mut k = 0;
        for i in 0..4 {
            for j in i..4 {
                o[k] = b * r[i] * r[j];
                k += 1;
            }
        }
    };
    let fail = || Error::Quadrature { element, alpha: profile.alpha.to_f64_lossy() };
    let reference = if left <= T::zero() {
        graded_towards_zero(&rule, quad_tol, &mut integrand).ok_or_else(fail)?
    } else {
        let (v, ok) = adaptive_vec(&rule, T::zero(), T::one(), quad_tol, 40, 10, &mut integrand);
        if !ok {
            return Err(fail());
        }
        v
    };
    let scale = [T::one() / (h * h), T::one() / h, T::one() / (h * h), T::one() / h];
    let mut k = 0;
    for i in 0..4 {
        for j in i..4 {
            let v = reference[k] * h * scale[i] * scale[j];
            out[i][j] = v;
            out[j][i] = v;
            k += 1;
        }
    }
    Ok(out)
}

/// `∑_{j<k} G[2^{-j-1}, 2^{-j}] + G[0, 2^{-k}]` over `k` until successive values agree.
fn graded_towards_zero<T: Real>(
    rule: &GaussLegendre,
    tol: T,
    f: &mut impl FnMut(T, &mut [T]),
) -> Option<Vec<T>> {
    const DIM: usize = 10;
    let panel = |lo: T, hi: T, f: &mut dyn FnMut(T, &mut [T])| {
        let mut out = vec![T::zero(); DIM];
        rule.integrate_into(lo, hi, &mut out, &mut |x, o: &mut [T]| f(x, o));
        out
    };
    let half = T::lit(0.5);
    let mut settled = [T::zero(); DIM];
    let mut previous = panel(T::zero(), T::one(), f);
    let mut hi = T::one();
    for _ in 0..200 {
        let lo = hi * half;
        let outer = panel(lo, hi, f);
        let inner = panel(T::zero(), lo, f);
        settled.iter_mut().zip(&outer).for_each(|(s, o)| *s += *o);
        let current: Vec<T> = settled.iter().zip(&inner).map(|(&s, &i)| s + i).collect();
        let diff = current
            .iter()
            .zip(&previous)
            .map(|(&c, &p)| (c - p).abs())
            .fold(T::zero(), |m, d| if d > m { d } else { m });
        if diff <= tol {
            return Some(current);
        }
        previous = current;
        hi = lo;
    }
    None
}

/// Bookkeeping between global `(u, u')` node DOFs and the free DOFs left after
/// clamping both ends.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DofMap {
    pub n_nodes: usize,
}

impl DofMap {
    pub fn n_free(&self) -> usize {
        2 * self.n_nodes - 4
    }

    /// Free index of global DOF `g`, or `None` for a clamped DOF.
    pub fn free(&self, g: usize) -> Option<usize> {
        (g >= 2 && g < 2 * self.n_nodes - 2).then(|| g - 2)
    }

    /// Free indices of the four element DOFs.
    pub fn element_dofs(&self, e: usize) -> [Option<usize>; 4] {
        [self.free(2 * e), self.free(2 * e + 1), self.free(2 * e + 2), self.free(2 * e + 3)]
    }

    /// Free `(value, slope)` DOFs of node `i`.
    pub fn node_dofs(&self, i: usize) -> (Option<usize>, Option<usize>) {
        (self.free(2 * i), self.free(2 * i + 1))
    }
}

/// Mass, stiffness and damping operators for one mesh and profile.
#[derive(Debug, Clone)]
pub struct AssembledSystem<T: Real> {
    pub mesh: Mesh<T>,
    pub profile: DampingProfile<T>,
    pub mass: BandMatrix<T>,
    pub stiffness: BandMatrix<T>,
    pub damping: BandMatrix<T>,
    pub dof_map: DofMap,
}

/// Assembles `M`, `K`, `D` with clamped DOFs eliminated.
pub fn assemble<T: Real>(mesh: &Mesh<T>, profile: &DampingProfile<T>, quad_tol: T) -> Result<AssembledSystem<T>> {
    if !(quad_tol.finite() && quad_tol > T::zero()) {
        return Err(Error::InvalidParameter("quad_tol must be positive".into()));
    }
    let dof_map = DofMap { n_nodes: mesh.nodes.len() };
    let n = dof_map.n_free();
    let locals: Vec<_> = (0..mesh.n_elements())
        .into_par_iter()
        .map(|e| {
            let (left, h) = mesh.element(e);
            let d = element_damping(profile, left, h, quad_tol, e)?;
            Ok((element_mass(h), element_stiffness(h), d))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut mass = BandMatrix::zeros(n, BANDWIDTH, BANDWIDTH);
    let mut stiffness = BandMatrix::zeros(n, BANDWIDTH, BANDWIDTH);
    let mut damping = BandMatrix::zeros(n, BANDWIDTH, BANDWIDTH);
    for (e, (me, ke, de)) in locals.iter().enumerate() {
        let dofs = dof_map.element_dofs(e);
        for (a, ga) in dofs.iter().enumerate() {
            let Some(i) = *ga else { continue };
            for (b, gb) in dofs.iter().enumerate() {
                let Some(j) = *gb else { continue };
                mass.add(i, j, me[a][b]);
                stiffness.add(i, j, ke[a][b]);
                if de[a][b] != T::zero() {
                    damping.add(i, j, de[a][b]);
                }
            }
        }
    }
    Ok(AssembledSystem { mesh: mesh.clone(), profile: profile.clone(), mass, stiffness, damping, dof_map })
}

/// Paired displacement/velocity coefficients over the free DOFs.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector<N: nalgebra::Scalar> {
    pub u: DVector<N>,
    pub v: DVector<N>,
}

impl<N: nalgebra::ComplexField + Copy> StateVector<N> {
    pub fn new(u: DVector<N>, v: DVector<N>) -> Result<Self> {
        if u.len() != v.len() {
            return Err(Error::DimensionMismatch { expected: u.len(), got: v.len() });
        }
        Ok(Self { u, v })
    }

    pub fn zeros(n: usize) -> Self {
        Self { u: DVector::zeros(n), v: DVector::zeros(n) }
    }

    pub fn dim(&self) -> usize {
        self.u.len()
    }

    pub fn scale(&self, c: N) -> Self {
        Self { u: &self.u * c, v: &self.v * c }
    }

    pub fn axpy(&self, c: N, other: &Self) -> Self {
        Self { u: &self.u + &other.u * c, v: &self.v + &other.v * c }
    }

    pub fn is_finite(&self) -> bool {
        self.u.iter().chain(self.v.iter()).all(|x| x.is_finite())
    }
}

impl<T: Real> AssembledSystem<T> {
    pub fn n_dofs(&self) -> usize {
        self.dof_map.n_free()
    }

    fn check_dim(&self, s: &StateVector<T>) -> Result<()> {
        let n = self.n_dofs();
        for len in [s.u.len(), s.v.len()] {
            if len != n {
                return Err(Error::DimensionMismatch { expected: n, got: len });
            }
        }
        Ok(())
    }

    /// `½ (uᵀKu + vᵀMv)`.
    pub fn energy(&self, s: &StateVector<T>) -> Result<T> {
        self.check_dim(s)?;
        Ok(T::lit(0.5) * (self.stiffness.form(&s.u, &s.u) + self.mass.form(&s.v, &s.v)))
    }

    /// `vᵀDv`, the discrete `∫ b |v''|²`.
    pub fn dissipation_rate(&self, s: &StateVector<T>) -> Result<T> {
        self.check_dim(s)?;
        Ok(self.damping.form(&s.v, &s.v))
    }

    /// Energy Gram matrix `diag(K, M)` acting on `(u, v)` stacked.
    pub fn gram(&self) -> BandMatrix<T> {
        let n = self.n_dofs();
        let mut g = BandMatrix::zeros(2 * n, BANDWIDTH, BANDWIDTH);
        for (i, j, v) in self.stiffness.entries() {
            g.set(i, j, v);
        }
        for (i, j, v) in self.mass.entries() {
            g.set(n + i, n + j, v);
        }
        g
    }

    /// Hermite interpolant of `f` (given with its derivative) on the free DOFs.
    pub fn interpolate(&self, f: impl Fn(T) -> (T, T)) -> DVector<T> {
        let mut c = DVector::zeros(self.n_dofs());
        for (i, &x) in self.mesh.nodes.iter().enumerate() {
            let (val, slope) = f(x);
            let (a, b) = self.dof_map.node_dofs(i);
            if let Some(a) = a {
                c[a] = val;
            }
            if let Some(b) = b {
                c[b] = slope;
            }
        }
        c
    }

    /// Element-local `(u, u', u(right), u'(right))` coefficients; clamped DOFs are zero.
    pub fn local_coeffs(&self, c: &DVector<T>, e: usize) -> [T; 4] {
        self.dof_map.element_dofs(e).map(|d| d.map_or(T::zero(), |i| c[i]))
    }

    /// Value, first and second derivative of the discrete field at `x`.
    pub fn eval_field(&self, c: &DVector<T>, x: T) -> (T, T, T) {
        let e = self.mesh.locate(x);
        let (left, h) = self.mesh.element(e);
        let xi = (x - left) / h;
        let lc = self.local_coeffs(c, e);
        let dot = |n: [T; 4]| n.iter().zip(&lc).fold(T::zero(), |a, (&p, &q)| a + p * q);
        (dot(shape(xi, h)), dot(shape_d1(xi, h)), dot(shape_d2(xi, h)))
    }

    /// Generalised eigenpairs of `K x = μ M x`, ascending, `M`-orthonormal vectors.
    pub fn generalized_eigen(&self) -> Result<(DVector<T>, DMatrix<T>)> {
        let m = self.mass.to_dense();
        let chol = m.cholesky().ok_or(Error::Singular { pivot: 0 })?;
        let l = chol.l();
        let k = self.stiffness.to_dense();
        let y = l.solve_lower_triangular(&k).ok_or(Error::Singular { pivot: 0 })?;
        let c = l.solve_lower_triangular(&y.transpose()).ok_or(Error::Singular { pivot: 0 })?;
        let c = (&c + c.transpose()) * T::lit(0.5);
        let eig = SymmetricEigen::new(c);
        let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).unwrap());
        let values = DVector::from_iterator(order.len(), order.iter().map(|&i| eig.eigenvalues[i]));
        let mut vecs = DMatrix::zeros(order.len(), order.len());
        let lt = l.transpose();
        for (col, &i) in order.iter().enumerate() {
            let x = lt.solve_upper_triangular(&eig.eigenvectors.column(i).into_owned()).ok_or(Error::Singular { pivot: 0 })?;
            vecs.set_column(col, &x);
        }
        Ok((values, vecs))
    }
}

/// Writes `m` as coordinate triplets: header `rows cols nnz`, then one
/// `row col value` line per stored nonzero, 1-based indices.
pub fn write_triplets<T: Real>(m: &BandMatrix<T>, mut w: impl Write) -> std::io::Result<()> {
    let entries: Vec<_> = m.entries().filter(|&(_, _, v)| v != T::zero()).collect();
    writeln!(w, "{} {} {}", m.dim(), m.dim(), entries.len())?;
    for (i, j, v) in entries {
        writeln!(w, "{} {} {:.17e}", i + 1, j + 1, v.to_f64_lossy())?;
    }
    Ok(())
}
