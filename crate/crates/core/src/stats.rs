use crate::error::{Error, Result};
use crate::scalar::Real;

/// Ordinary least-squares line `y ≈ slope * x + intercept`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit<T> {
    pub slope: T,
    pub intercept: T,
    /// Root-mean-square of the residuals.
    pub rms: T,
}

pub fn linear_fit<T: Real>(xs: &[T], ys: &[T]) -> Result<LinearFit<T>> {
    if xs.len() != ys.len() {
        return Err(Error::DimensionMismatch { expected: xs.len(), got: ys.len() });
    }
    if xs.len() < 2 {
        return Err(Error::DegenerateFit(format!("{} points", xs.len())));
    }
    let n = T::from_usize(xs.len()).unwrap();
    let mx = xs.iter().fold(T::zero(), |a, &b| a + b) / n;
    let my = ys.iter().fold(T::zero(), |a, &b| a + b) / n;
    let (mut sxx, mut sxy) = (T::zero(), T::zero());
    for (&x, &y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    if sxx == T::zero() {
        return Err(Error::DegenerateFit("all abscissae coincide".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss = xs.iter().zip(ys).fold(T::zero(), |a, (&x, &y)| {
        let r = y - (slope * x + intercept);
        a + r * r
    });
    Ok(LinearFit { slope, intercept, rms: (ss / n).sqrt() })
}
