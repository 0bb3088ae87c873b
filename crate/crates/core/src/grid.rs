//! Uniform grid on (0,1), finite-difference operators and discrete norms.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Tridiag;

/// Uniform mesh of `n` interior nodes `x_i = i h`, `i = 1..=n`, with `h = 1/(n+1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub n: usize,
    pub h: f64,
    pub d: usize,
}

impl Grid {
    pub fn new(n: usize, d: usize) -> Result<Self> {
        if d != 1 {
            return Err(Error::UnsupportedDimension(d));
        }
        if n < 2 {
            return Err(Error::TooFewNodes(n));
        }
        Ok(Self {
            n,
            h: 1.0 / (n as f64 + 1.0),
            d,
        })
    }

    /// Coordinate of node `i`, where `0` and `n+1` are the boundary nodes.
    pub fn x(&self, i: usize) -> f64 {
        i as f64 * self.h
    }

    /// Interior node coordinates.
    pub fn nodes(&self) -> Vec<f64> {
        (1..=self.n).map(|i| self.x(i)).collect()
    }

    pub fn sample(&self, f: impl Fn(f64) -> f64) -> Field {
        Field((1..=self.n).map(|i| f(self.x(i))).collect())
    }

    /// Samples at all `n+2` nodes, boundary included.
    pub fn sample_closed(&self, f: impl Fn(f64) -> f64) -> Vec<f64> {
        (0..=self.n + 1).map(|i| f(self.x(i))).collect()
    }

    pub fn zeros(&self) -> Field {
        Field(vec![0.0; self.n])
    }

    pub fn constant(&self, c: f64) -> Field {
        Field(vec![c; self.n])
    }

    pub(crate) fn check(&self, f: &[f64]) -> Result<()> {
        if f.len() != self.n {
            return Err(Error::ShapeMismatch {
                expected: self.n,
                got: f.len(),
            });
        }
        Ok(())
    }

    pub(crate) fn check_closed(&self, a: &[f64]) -> Result<()> {
        if a.len() != self.n + 2 {
            return Err(Error::ShapeMismatch {
                expected: self.n + 2,
                got: a.len(),
            });
        }
        Ok(())
    }
}

pub fn make_grid(n_interior: usize, d: usize) -> Result<Grid> {
    Grid::new(n_interior, d)
}

/// Nodal values on the interior nodes of a [`Grid`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Field(pub Vec<f64>);

impl Field {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn min(&self) -> f64 {
        self.0.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field(self.0.iter().map(|&v| f(v)).collect())
    }

    pub fn zip_map(&self, other: &Field, f: impl Fn(f64, f64) -> f64) -> Field {
        debug_assert_eq!(self.len(), other.len());
        Field(self.0.iter().zip(&other.0).map(|(&a, &b)| f(a, b)).collect())
    }

    pub fn add(&self, other: &Field) -> Field {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Field) -> Field {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn mul(&self, other: &Field) -> Field {
        self.zip_map(other, |a, b| a * b)
    }

    pub fn scale(&self, s: f64) -> Field {
        self.map(|v| s * v)
    }

    /// `self += s * x`
    pub fn axpy(&mut self, s: f64, x: &Field) {
        for (a, b) in self.0.iter_mut().zip(&x.0) {
            *a += s * b;
        }
    }

    /// Euclidean dot product of the raw nodal values (no quadrature weight).
    pub fn dot(&self, other: &Field) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }
}

/// Spaces whose dual norm is computed by [`dual_norm_w`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WKind {
    H10,
    H2Cap,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormKind {
    L2,
    Lp(f64),
    H10,
    H2Cap,
    WDual(WKind),
}

impl From<WKind> for NormKind {
    fn from(w: WKind) -> Self {
        match w {
            WKind::H10 => NormKind::H10,
            WKind::H2Cap => NormKind::H2Cap,
        }
    }
}

fn ensure_finite(f: Field, what: &'static str) -> Result<Field> {
    if f.is_finite() {
        Ok(f)
    } else {
        Err(Error::NonFinite(what))
    }
}

/// Discrete Laplacian `Δf` with Dirichlet values `boundary` at the ghost nodes.
pub fn laplacian_apply(g: &Grid, f: &Field, boundary: (f64, f64)) -> Result<Field> {
    g.check(&f.0)?;
    if !boundary.0.is_finite() || !boundary.1.is_finite() {
        return Err(Error::InvalidArgument("boundary values must be finite".into()));
    }
    let n = g.n;
    let ih2 = 1.0 / (g.h * g.h);
    let v = &f.0;
    let out = (0..n)
        .map(|i| {
            let left = if i == 0 { boundary.0 } else { v[i - 1] };
            let right = if i + 1 == n { boundary.1 } else { v[i + 1] };
            ((right - v[i]) - (v[i] - left)) * ih2
        })
        .collect();
    ensure_finite(Field(out), "laplacian")
}

/// Half-node averages `a_{j+1/2} = (a_j + a_{j+1})/2`, `j = 0..=n`, of closed nodal values.
pub fn half_node_means(a: &[f64]) -> Vec<f64> {
    a.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
}

/// Flux-form `∇·(a∇f)` with homogeneous Dirichlet data on `f`.
///
/// `a` holds nodal values at all `n+2` nodes including the boundary.
pub fn divergence_a_grad(g: &Grid, a: &[f64], f: &Field) -> Result<Field> {
    g.check_closed(a)?;
    g.check(&f.0)?;
    let min = a.iter().copied().fold(f64::INFINITY, f64::min);
    if !(min > 0.0) {
        return Err(Error::NonPositiveCoefficient { min });
    }
    let e = half_node_means(a);
    let n = g.n;
    let ih2 = 1.0 / (g.h * g.h);
    let v = &f.0;
    let out = (0..n)
        .map(|i| {
            let left = if i == 0 { 0.0 } else { v[i - 1] };
            let right = if i + 1 == n { 0.0 } else { v[i + 1] };
            (e[i + 1] * (right - v[i]) - e[i] * (v[i] - left)) * ih2
        })
        .collect();
    ensure_finite(Field(out), "divergence")
}

/// Matrix of the zero-boundary Laplacian.
pub fn laplacian_matrix(g: &Grid) -> Tridiag {
    let ih2 = 1.0 / (g.h * g.h);
    let mut t = Tridiag::zeros(g.n);
    for i in 0..g.n {
        t.diag[i] = -2.0 * ih2;
        if i > 0 {
            t.lower[i] = ih2;
        }
        if i + 1 < g.n {
            t.upper[i] = ih2;
        }
    }
    t
}

/// Matrix of `f ↦ ∇·(a∇f)` for closed nodal `a`; no positivity check.
pub fn divergence_matrix(g: &Grid, a: &[f64]) -> Tridiag {
    let e = half_node_means(a);
    let ih2 = 1.0 / (g.h * g.h);
    let mut t = Tridiag::zeros(g.n);
    for i in 0..g.n {
        t.diag[i] = -(e[i] + e[i + 1]) * ih2;
        if i > 0 {
            t.lower[i] = e[i] * ih2;
        }
        if i + 1 < g.n {
            t.upper[i] = e[i + 1] * ih2;
        }
    }
    t
}

/// Forward differences `(f_{j+1} - f_j)/h`, `j = 0..=n`, with zero boundary values.
pub fn forward_diff(g: &Grid, f: &[f64]) -> Vec<f64> {
    let n = g.n;
    (0..=n)
        .map(|j| {
            let left = if j == 0 { 0.0 } else { f[j - 1] };
            let right = if j == n { 0.0 } else { f[j] };
            (right - left) / g.h
        })
        .collect()
}

/// Centered differences `(f_{i+1} - f_{i-1})/(2h)` with Dirichlet values `boundary`.
pub fn centered_diff(g: &Grid, f: &[f64], boundary: (f64, f64)) -> Vec<f64> {
    let n = g.n;
    (0..n)
        .map(|i| {
            let left = if i == 0 { boundary.0 } else { f[i - 1] };
            let right = if i + 1 == n { boundary.1 } else { f[i + 1] };
            (right - left) / (2.0 * g.h)
        })
        .collect()
}

/// Gram matrix action `K f` of an inner product, so `⟨f1, f2⟩ = f1ᵀ K f2`.
pub fn gram_apply(g: &Grid, f: &Field, kind: NormKind) -> Result<Field> {
    g.check(&f.0)?;
    match kind {
        NormKind::L2 => Ok(f.scale(g.h)),
        NormKind::H10 => Ok(laplacian_apply(g, f, (0.0, 0.0))?.scale(-g.h)),
        NormKind::H2Cap => {
            let lf = laplacian_apply(g, f, (0.0, 0.0))?;
            Ok(laplacian_apply(g, &lf, (0.0, 0.0))?.scale(g.h))
        }
        other => Err(Error::InvalidArgument(format!("{other:?} is not an inner product"))),
    }
}

pub fn inner_product(g: &Grid, f1: &Field, f2: &Field, kind: NormKind) -> Result<f64> {
    g.check(&f1.0)?;
    g.check(&f2.0)?;
    match kind {
        NormKind::L2 => Ok(g.h * f1.dot(f2)),
        NormKind::H10 => {
            let d1 = forward_diff(g, &f1.0);
            let d2 = forward_diff(g, &f2.0);
            Ok(g.h * d1.iter().zip(&d2).map(|(a, b)| a * b).sum::<f64>())
        }
        NormKind::H2Cap => {
            let l1 = laplacian_apply(g, f1, (0.0, 0.0))?;
            let l2 = laplacian_apply(g, f2, (0.0, 0.0))?;
            Ok(g.h * l1.dot(&l2))
        }
        other => Err(Error::InvalidArgument(format!("{other:?} is not an inner product"))),
    }
}

pub fn lp_norm(g: &Grid, f: &Field, p: f64) -> Result<f64> {
    g.check(&f.0)?;
    if p.is_nan() || p < 1.0 {
        return Err(Error::InvalidArgument(format!("Lp exponent must be >= 1, got {p}")));
    }
    if p.is_infinite() {
        return Ok(f.max_abs());
    }
    if p == 2.0 {
        return Ok((g.h * f.dot(f)).sqrt());
    }
    let s: f64 = f.0.iter().map(|v| v.abs().powf(p)).sum();
    Ok((g.h * s).powf(1.0 / p))
}

/// Riesz representative `r = K⁻¹ M f` of the functional `w ↦ ⟨f, w⟩_{L²}` in `W`.
pub fn riesz_representative(g: &Grid, f: &Field, w_kind: WKind) -> Result<Field> {
    g.check(&f.0)?;
    let l = laplacian_matrix(g);
    // K = h(-L) for H1_0 and K = h L² for H2cap, with M = h I.
    let r = match w_kind {
        WKind::H10 => l.solve(&f.0)?.into_iter().map(|v| -v).collect(),
        WKind::H2Cap => {
            let y = l.solve(&f.0)?;
            l.solve(&y)?
        }
    };
    Ok(Field(r))
}

/// Inner product of `W*` induced by the Riesz map: `h² aᵀ K⁻¹ b`.
pub fn dual_inner_w(g: &Grid, a: &Field, b: &Field, w_kind: WKind) -> Result<f64> {
    g.check(&a.0)?;
    let rb = riesz_representative(g, b, w_kind)?;
    Ok(g.h * a.dot(&rb))
}

pub fn dual_norm_w(g: &Grid, f: &Field, w_kind: NormKind) -> Result<f64> {
    let kind = match w_kind {
        NormKind::H10 | NormKind::WDual(WKind::H10) => WKind::H10,
        NormKind::H2Cap | NormKind::WDual(WKind::H2Cap) => WKind::H2Cap,
        other => return Err(Error::InvalidArgument(format!("{other:?} is not a W space"))),
    };
    g.check(&f.0)?;
    let l = laplacian_matrix(g);
    let y = l.solve(&f.0)?;
    let sq = match kind {
        // h fᵀ(-L)⁻¹ f
        WKind::H10 => -g.h * f.dot(&Field(y)),
        // h ‖L⁻¹ f‖², L symmetric
        WKind::H2Cap => g.h * y.iter().map(|v| v * v).sum::<f64>(),
    };
    Ok(sq.max(0.0).sqrt())
}

/// Norm of `f` in any supported [`NormKind`].
pub fn norm(g: &Grid, f: &Field, kind: NormKind) -> Result<f64> {
    match kind {
        NormKind::L2 => lp_norm(g, f, 2.0),
        NormKind::Lp(p) => lp_norm(g, f, p),
        NormKind::H10 | NormKind::H2Cap => Ok(inner_product(g, f, f, kind)?.max(0.0).sqrt()),
        NormKind::WDual(w) => dual_norm_w(g, f, NormKind::WDual(w)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn max_err(a: &Field, b: &Field) -> f64 {
        a.sub(b).max_abs()
    }

    #[test]
    fn grid_construction() {
        let g = make_grid(3, 1).unwrap();
        assert_eq!(g.h, 0.25);
        assert_eq!(make_grid(127, 1).unwrap().h, 1.0 / 128.0);
        assert!(matches!(make_grid(1, 1), Err(Error::TooFewNodes(1))));
        assert!(matches!(make_grid(10, 2), Err(Error::UnsupportedDimension(2))));
        let g = make_grid(99, 1).unwrap();
        assert!((g.h * (g.n as f64 + 1.0) - 1.0).abs() <= f64::EPSILON);
    }

    #[test]
    fn laplacian_trivial_cases() {
        let g = make_grid(10, 1).unwrap();
        assert_eq!(laplacian_apply(&g, &g.zeros(), (0.0, 0.0)).unwrap(), g.zeros());
        let ones = laplacian_apply(&g, &g.constant(1.0), (1.0, 1.0)).unwrap();
        assert!(ones.max_abs() == 0.0);
        assert!(laplacian_apply(&g, &Field(vec![0.0; 3]), (0.0, 0.0)).is_err());
    }

    #[test]
    fn laplacian_is_second_order() {
        let errs: Vec<f64> = [31, 63, 127]
            .iter()
            .map(|&n| {
                let g = make_grid(n, 1).unwrap();
                let f = g.sample(|x| (PI * x).sin());
                let exact = g.sample(|x| -PI * PI * (PI * x).sin());
                max_err(&laplacian_apply(&g, &f, (0.0, 0.0)).unwrap(), &exact)
            })
            .collect();
        for w in errs.windows(2) {
            let order = (w[0] / w[1]).log2();
            assert!((order - 2.0).abs() < 0.1, "order {order}");
        }
    }

    #[test]
    fn divergence_with_unit_coefficient_is_laplacian() {
        let g = make_grid(17, 1).unwrap();
        let f = g.sample(|x| (3.0 * x).exp() * (7.0 * x).cos());
        let a = vec![1.0; g.n + 2];
        let d = divergence_a_grad(&g, &a, &f).unwrap();
        let l = laplacian_apply(&g, &f, (0.0, 0.0)).unwrap();
        assert_eq!(d.0.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), l.0.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
    }

    #[test]
    fn divergence_is_second_order() {
        let errs: Vec<f64> = [31, 63, 127]
            .iter()
            .map(|&n| {
                let g = make_grid(n, 1).unwrap();
                let a = g.sample_closed(|x| 1.0 + x);
                let f = g.sample(|x| (PI * x).sin());
                // ∂x((1+x) π cos πx) = π cos πx − (1+x) π² sin πx
                let exact = g.sample(|x| PI * (PI * x).cos() - (1.0 + x) * PI * PI * (PI * x).sin());
                max_err(&divergence_a_grad(&g, &a, &f).unwrap(), &exact)
            })
            .collect();
        for w in errs.windows(2) {
            let order = (w[0] / w[1]).log2();
            assert!((order - 2.0).abs() < 0.15, "order {order}");
        }
    }

    #[test]
    fn divergence_rejects_nonpositive() {
        let g = make_grid(5, 1).unwrap();
        let mut a = vec![1.0; 7];
        a[3] = 0.0;
        assert!(matches!(divergence_a_grad(&g, &a, &g.zeros()), Err(Error::NonPositiveCoefficient { .. })));
        assert_eq!(divergence_a_grad(&g, &[2.0; 7], &g.zeros()).unwrap(), g.zeros());
    }

    #[test]
    fn matrices_match_apply() {
        let g = make_grid(12, 1).unwrap();
        let f = g.sample(|x| x * (1.0 - x) * (5.0 * x).sin());
        let a = g.sample_closed(|x| 2.0 + x * x);
        let lm = Field(laplacian_matrix(&g).matvec(&f.0));
        assert!(max_err(&lm, &laplacian_apply(&g, &f, (0.0, 0.0)).unwrap()) < 1e-10);
        let dm = Field(divergence_matrix(&g, &a).matvec(&f.0));
        assert!(max_err(&dm, &divergence_a_grad(&g, &a, &f).unwrap()) < 1e-10);
    }

    #[test]
    fn l2_of_sine_tends_to_half() {
        let g = make_grid(255, 1).unwrap();
        let f = g.sample(|x| (PI * x).sin());
        let ip = inner_product(&g, &f, &f, NormKind::L2).unwrap();
        assert!((ip - 0.5).abs() < 1e-10);
        assert!(inner_product(&g, &f, &f, NormKind::Lp(3.0)).is_err());
    }

    #[test]
    fn gram_matches_inner_product() {
        let g = make_grid(9, 1).unwrap();
        let f1 = g.sample(|x| (2.0 * x).sin() + x);
        let f2 = g.sample(|x| (x - 0.3).powi(2));
        for kind in [NormKind::L2, NormKind::H10, NormKind::H2Cap] {
            let a = inner_product(&g, &f1, &f2, kind).unwrap();
            let b = f1.dot(&gram_apply(&g, &f2, kind).unwrap());
            assert!((a - b).abs() <= 1e-10 * a.abs().max(1.0), "{kind:?}: {a} vs {b}");
        }
    }

    #[test]
    fn lp_norm_cases() {
        let g = make_grid(9, 1).unwrap();
        assert_eq!(lp_norm(&g, &g.zeros(), 3.0).unwrap(), 0.0);
        let one = lp_norm(&g, &g.constant(1.0), 4.0).unwrap();
        assert!((one - (0.9f64).powf(0.25)).abs() < 1e-14);
        let mut spike = g.zeros();
        spike.0[4] = -5.0;
        assert_eq!(lp_norm(&g, &spike, f64::INFINITY).unwrap(), 5.0);
        assert!(lp_norm(&g, &spike, 0.5).is_err());
    }

    #[test]
    fn dual_norm_of_gram_image() {
        let g = make_grid(20, 1).unwrap();
        let w = g.sample(|x| x * (1.0 - x) * (1.0 + 3.0 * x));
        for (wk, nk) in [(WKind::H10, NormKind::H10), (WKind::H2Cap, NormKind::H2Cap)] {
            // f = M⁻¹ K w is represented by w itself
            let f = gram_apply(&g, &w, nk).unwrap().scale(1.0 / g.h);
            let dual = dual_norm_w(&g, &f, NormKind::WDual(wk)).unwrap();
            let direct = norm(&g, &w, nk).unwrap();
            assert!((dual - direct).abs() <= 1e-9 * direct, "{wk:?}: {dual} vs {direct}");
            let r = riesz_representative(&g, &f, wk).unwrap();
            assert!(max_err(&r, &w) <= 1e-9 * w.max_abs());
        }
        assert_eq!(dual_norm_w(&g, &g.zeros(), NormKind::H10).unwrap(), 0.0);
        assert!(dual_norm_w(&g, &g.zeros(), NormKind::L2).is_err());
    }
}
