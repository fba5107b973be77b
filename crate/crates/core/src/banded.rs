//! Band matrices and a partially pivoted band LU factorization.
//!
//! Hermite cubic beam elements couple at most four consecutive degrees of
//! freedom, so every assembled operator has half-bandwidth three and all
//! solves in the crate are O(n).

use nalgebra::{ComplexField, DMatrix, DVector};
use num_traits::Zero;

use crate::error::{Error, Result};

/// Square matrix with `kl` sub- and `ku` super-diagonals, row-major band storage.
#[derive(Debug, Clone, PartialEq)]
pub struct BandMatrix<N> {
    n: usize,
    kl: usize,
    ku: usize,
    data: Vec<N>,
}

impl<N: ComplexField + Copy> BandMatrix<N> {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        Self { n, kl, ku, data: vec![N::zero(); n * (kl + ku + 1)] }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bandwidths(&self) -> (usize, usize) {
        (self.kl, self.ku)
    }

    #[inline]
    fn in_band(&self, i: usize, j: usize) -> bool {
        j + self.kl >= i && j <= i + self.ku
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        i * (self.kl + self.ku + 1) + (j + self.kl - i)
    }

    pub fn get(&self, i: usize, j: usize) -> N {
        if i < self.n && j < self.n && self.in_band(i, j) {
            self.data[self.idx(i, j)]
        } else {
            N::zero()
        }
    }

    /// Adds `value` at `(i, j)`. Panics outside the band.
    pub fn add(&mut self, i: usize, j: usize, value: N) {
        assert!(i < self.n && j < self.n && self.in_band(i, j), "({i},{j}) outside band");
        let k = self.idx(i, j);
        self.data[k] += value;
    }

    pub fn set(&mut self, i: usize, j: usize, value: N) {
        assert!(i < self.n && j < self.n && self.in_band(i, j), "({i},{j}) outside band");
        let k = self.idx(i, j);
        self.data[k] = value;
    }

    /// Iterator over stored `(row, col, value)` triplets, row-major.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, N)> + '_ {
        (0..self.n).flat_map(move |i| {
            let lo = i.saturating_sub(self.kl);
            let hi = (i + self.ku).min(self.n - 1);
            (lo..=hi).map(move |j| (i, j, self.data[self.idx(i, j)]))
        })
    }

    pub fn mul_vec(&self, x: &DVector<N>) -> DVector<N> {
        assert_eq!(x.len(), self.n);
        DVector::from_fn(self.n, |i, _| {
            let lo = i.saturating_sub(self.kl);
            let hi = (i + self.ku).min(self.n - 1);
            (lo..=hi).fold(N::zero(), |acc, j| acc + self.data[self.idx(i, j)] * x[j])
        })
    }

    /// `xᴴ A y`.
    pub fn form(&self, x: &DVector<N>, y: &DVector<N>) -> N {
        x.dotc(&self.mul_vec(y))
    }

    pub fn to_dense(&self) -> DMatrix<N> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for (i, j, v) in self.entries() {
            m[(i, j)] = v;
        }
        m
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.n, self.ku, self.kl);
        for (i, j, v) in self.entries() {
            t.set(j, i, v);
        }
        t
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> N::RealField {
        self.data
            .iter()
            .map(|v| v.abs())
            .fold(N::RealField::zero(), |a, b| if b > a { b } else { a })
    }

    /// Elementwise `self + factor * other` with matching shape.
    pub fn axpy(&self, factor: N, other: &Self) -> Self {
        assert_eq!((self.n, self.kl, self.ku), (other.n, other.kl, other.ku));
        let data = self.data.iter().zip(&other.data).map(|(&a, &b)| a + factor * b).collect();
        Self { n: self.n, kl: self.kl, ku: self.ku, data }
    }

    pub fn scale(&self, factor: N) -> Self {
        Self { n: self.n, kl: self.kl, ku: self.ku, data: self.data.iter().map(|&a| a * factor).collect() }
    }

    /// Lifts the entries through `f` (e.g. real to complex).
    pub fn map<M: ComplexField + Copy>(&self, f: impl Fn(N) -> M) -> BandMatrix<M> {
        BandMatrix { n: self.n, kl: self.kl, ku: self.ku, data: self.data.iter().map(|&a| f(a)).collect() }
    }

    pub fn lu(&self) -> Result<BandLu<N>> {
        BandLu::factor(self)
    }
}

/// LU factors with row interchanges, LAPACK `gbtrf` layout.
#[derive(Debug, Clone)]
pub struct BandLu<N> {
    n: usize,
    kl: usize,
    ku: usize,
    // row i holds columns i-kl ..= i+kl+ku
    data: Vec<N>,
    piv: Vec<usize>,
}

impl<N: ComplexField + Copy> BandLu<N> {
    #[inline]
    fn width(&self) -> usize {
        2 * self.kl + self.ku + 1
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        i * self.width() + (j + self.kl - i)
    }

    pub fn factor(a: &BandMatrix<N>) -> Result<Self> {
        let (n, kl, ku) = (a.n, a.kl, a.ku);
        let mut lu = Self { n, kl, ku, data: vec![N::zero(); n * (2 * kl + ku + 1)], piv: vec![0; n] };
        for (i, j, v) in a.entries() {
            let k = lu.idx(i, j);
            lu.data[k] = v;
        }
        for k in 0..n {
            let last_row = (k + kl).min(n - 1);
            let last_col = (k + kl + ku).min(n - 1);
            let mut p = k;
            let mut best = lu.data[lu.idx(k, k)].abs();
            for i in k + 1..=last_row {
                let m = lu.data[lu.idx(i, k)].abs();
                if m > best {
                    best = m;
                    p = i;
                }
            }
            if best == N::RealField::zero() || !best.is_finite() {
                return Err(Error::Singular { pivot: k });
            }
            lu.piv[k] = p;
            if p != k {
                for j in k..=last_col {
                    let (a_idx, b_idx) = (lu.idx(k, j), lu.idx(p, j));
                    lu.data.swap(a_idx, b_idx);
                }
            }
            let pivot = lu.data[lu.idx(k, k)];
            for i in k + 1..=last_row {
                let ik = lu.idx(i, k);
                let l = lu.data[ik] / pivot;
                lu.data[ik] = l;
                if l == N::zero() {
                    continue;
                }
                for j in k + 1..=last_col {
                    let (ij, kj) = (lu.idx(i, j), lu.idx(k, j));
                    let ukj = lu.data[kj];
                    lu.data[ij] -= l * ukj;
                }
            }
        }
        Ok(lu)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve(&self, b: &DVector<N>) -> DVector<N> {
        let mut x = b.clone();
        self.solve_in_place(&mut x);
        x
    }

    pub fn solve_in_place(&self, x: &mut DVector<N>) {
        assert_eq!(x.len(), self.n);
        let n = self.n;
        for k in 0..n {
            let p = self.piv[k];
            if p != k {
                x.swap_rows(k, p);
            }
            let xk = x[k];
            for i in k + 1..=(k + self.kl).min(n - 1) {
                x[i] -= self.data[self.idx(i, k)] * xk;
            }
        }
        for k in (0..n).rev() {
            let mut s = x[k];
            for j in k + 1..=(k + self.kl + self.ku).min(n - 1) {
                s -= self.data[self.idx(k, j)] * x[j];
            }
            x[k] = s / self.data[self.idx(k, k)];
        }
    }
}
