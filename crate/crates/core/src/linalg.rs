//! Tridiagonal matrices and the Thomas algorithm.

use crate::error::{Error, Result};

/// A square tridiagonal matrix stored by diagonals.
///
/// `lower[i]` multiplies `x[i-1]` in row `i` and `upper[i]` multiplies `x[i+1]`;
/// `lower[0]` and `upper[n-1]` are ignored and kept at zero.
#[derive(Debug, Clone, PartialEq)]
pub struct Tridiag {
    pub lower: Vec<f64>,
    pub diag: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Tridiag {
    pub fn zeros(n: usize) -> Self {
        Self {
            lower: vec![0.0; n],
            diag: vec![0.0; n],
            upper: vec![0.0; n],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            lower: vec![0.0; n],
            diag: vec![1.0; n],
            upper: vec![0.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let n = self.len();
        debug_assert_eq!(x.len(), n);
        (0..n)
            .map(|i| {
                let mut v = self.diag[i] * x[i];
                if i > 0 {
                    v += self.lower[i] * x[i - 1];
                }
                if i + 1 < n {
                    v += self.upper[i] * x[i + 1];
                }
                v
            })
            .collect()
    }

    pub fn transpose(&self) -> Tridiag {
        let n = self.len();
        let mut t = Tridiag::zeros(n);
        t.diag.clone_from(&self.diag);
        for i in 1..n {
            // entry (i, i-1) of the transpose is entry (i-1, i) of self
            t.lower[i] = self.upper[i - 1];
            t.upper[i - 1] = self.lower[i];
        }
        t
    }

    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        tridiag_solve(&self.lower, &self.diag, &self.upper, rhs)
    }
}

/// Solves a tridiagonal system with the Thomas algorithm (no pivoting).
///
/// A pivot that vanishes relative to the magnitude of its row is reported as
/// [`Error::SingularSystem`]; `dt` is left as NaN for the caller to fill in.
pub fn tridiag_solve(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
    let n = diag.len();
    for len in [lower.len(), upper.len(), rhs.len()] {
        if len != n {
            return Err(Error::ShapeMismatch { expected: n, got: len });
        }
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    for i in 0..n {
        let (l, prev_c, prev_d) = if i == 0 { (0.0, 0.0, 0.0) } else { (lower[i], c[i - 1], d[i - 1]) };
        let pivot = diag[i] - l * prev_c;
        let scale = diag[i].abs() + l.abs() + if i + 1 < n { upper[i].abs() } else { 0.0 };
        if !pivot.is_finite() || pivot.abs() <= 1e-14 * scale || pivot == 0.0 {
            return Err(Error::SingularSystem {
                dt: f64::NAN,
                min_pivot: pivot,
                row: i,
            });
        }
        c[i] = if i + 1 < n { upper[i] / pivot } else { 0.0 };
        d[i] = (rhs[i] - l * prev_d) / pivot;
    }
    let mut x = d;
    for i in (0..n - 1).rev() {
        x[i] -= c[i] * x[i + 1];
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("tridiagonal solve"));
    }
    Ok(x)
}
