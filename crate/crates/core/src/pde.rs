//! Backward-Euler time stepping and Newton solves for one-dimensional parabolic problems.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{divergence_matrix, half_node_means, laplacian_matrix, lp_norm, Field, Grid};
pub use crate::linalg::{tridiag_solve, Tridiag};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeAxis {
    pub t_final: f64,
    pub n_steps: usize,
    pub dt: f64,
}

impl TimeAxis {
    pub fn new(t_final: f64, n_steps: usize) -> Result<Self> {
        if n_steps == 0 {
            return Err(Error::InvalidArgument("n_steps must be at least 1".into()));
        }
        if !(t_final > 0.0) || !t_final.is_finite() {
            return Err(Error::InvalidArgument(format!("final time must be positive, got {t_final}")));
        }
        Ok(Self {
            t_final,
            n_steps,
            dt: t_final / n_steps as f64,
        })
    }

    pub fn t(&self, k: usize) -> f64 {
        if k == self.n_steps {
            self.t_final
        } else {
            k as f64 * self.dt
        }
    }
}

/// States at `t_0, ..., t_N`; `frames[0]` is the initial state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub axis: TimeAxis,
    pub frames: Vec<Field>,
}

impl Trajectory {
    pub fn zeros(g: &Grid, axis: TimeAxis) -> Self {
        Self {
            axis,
            frames: vec![g.zeros(); axis.n_steps + 1],
        }
    }

    pub fn constant_in_time(axis: TimeAxis, f: Field) -> Self {
        Self {
            axis,
            frames: vec![f; axis.n_steps + 1],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.frames.iter().all(Field::is_finite)
    }

    pub fn max_abs(&self) -> f64 {
        self.frames.iter().fold(0.0, |m, f| m.max(f.max_abs()))
    }

    pub fn zip_map(&self, other: &Trajectory, f: impl Fn(&Field, &Field) -> Field) -> Trajectory {
        Trajectory {
            axis: self.axis,
            frames: self.frames.iter().zip(&other.frames).map(|(a, b)| f(a, b)).collect(),
        }
    }

    pub fn sub(&self, other: &Trajectory) -> Trajectory {
        self.zip_map(other, Field::sub)
    }

    pub fn add(&self, other: &Trajectory) -> Trajectory {
        self.zip_map(other, Field::add)
    }

    pub fn scale(&self, s: f64) -> Trajectory {
        Trajectory {
            axis: self.axis,
            frames: self.frames.iter().map(|f| f.scale(s)).collect(),
        }
    }

    pub fn axpy(&mut self, s: f64, x: &Trajectory) {
        for (a, b) in self.frames.iter_mut().zip(&x.frames) {
            a.axpy(s, b);
        }
    }

    pub(crate) fn check(&self, g: &Grid, axis: &TimeAxis) -> Result<()> {
        if self.frames.len() != axis.n_steps + 1 || self.axis.n_steps != axis.n_steps {
            return Err(Error::ShapeMismatch {
                expected: axis.n_steps + 1,
                got: self.frames.len(),
            });
        }
        if (self.axis.t_final - axis.t_final).abs() > 1e-14 * axis.t_final {
            return Err(Error::InvalidArgument("trajectory time axis differs".into()));
        }
        self.frames.iter().try_for_each(|f| g.check(&f.0))
    }
}

/// Second-order term of a step operator.
#[derive(Debug, Clone, PartialEq)]
pub enum DiffusionTerm {
    /// Zero-boundary Laplacian.
    Unit,
    /// Flux form with closed nodal coefficient (`n+2` values).
    Variable(Vec<f64>),
    /// No spatial coupling.
    Off,
}

/// Frozen coefficients of `u̇ - D u + b ∂u + r u = rhs` for one step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepCoefficients {
    pub diffusion: DiffusionTerm,
    pub reaction: Option<Field>,
    pub drift: Option<Field>,
    pub rhs: Option<Field>,
    /// Dirichlet values of the unknown at `x = 0` and `x = 1`.
    pub boundary: (f64, f64),
}

impl Default for StepCoefficients {
    fn default() -> Self {
        Self {
            diffusion: DiffusionTerm::Unit,
            reaction: None,
            drift: None,
            rhs: None,
            boundary: (0.0, 0.0),
        }
    }
}

impl StepCoefficients {
    pub fn heat() -> Self {
        Self::default()
    }

    fn validate(&self, g: &Grid) -> Result<()> {
        if let DiffusionTerm::Variable(a) = &self.diffusion {
            g.check_closed(a)?;
            let min = a.iter().copied().fold(f64::INFINITY, f64::min);
            if !(min > 0.0) {
                return Err(Error::NonPositiveCoefficient { min });
            }
        }
        for f in [&self.reaction, &self.drift, &self.rhs].into_iter().flatten() {
            g.check(&f.0)?;
            if !f.is_finite() {
                return Err(Error::NonFinite("step coefficients"));
            }
        }
        if !self.boundary.0.is_finite() || !self.boundary.1.is_finite() {
            return Err(Error::NonFinite("boundary values"));
        }
        Ok(())
    }

    /// Spatial operator `-D + b ∂ + r` (without the `I/dt` part).
    pub fn spatial_matrix(&self, g: &Grid) -> Tridiag {
        let n = g.n;
        let mut m = match &self.diffusion {
            DiffusionTerm::Unit => laplacian_matrix(g),
            DiffusionTerm::Variable(a) => divergence_matrix(g, a),
            DiffusionTerm::Off => Tridiag::zeros(n),
        };
        for i in 0..n {
            m.lower[i] = -m.lower[i];
            m.diag[i] = -m.diag[i];
            m.upper[i] = -m.upper[i];
        }
        if let Some(b) = &self.drift {
            let s = 1.0 / (2.0 * g.h);
            for i in 0..n {
                if i > 0 {
                    m.lower[i] -= b.0[i] * s;
                }
                if i + 1 < n {
                    m.upper[i] += b.0[i] * s;
                }
            }
        }
        if let Some(r) = &self.reaction {
            for i in 0..n {
                m.diag[i] += r.0[i];
            }
        }
        m
    }

    /// Step matrix `I/dt - D + b ∂ + r`.
    pub fn step_matrix(&self, g: &Grid, dt: f64) -> Tridiag {
        let mut m = self.spatial_matrix(g);
        for d in &mut m.diag {
            *d += 1.0 / dt;
        }
        m
    }

    /// Contribution of the Dirichlet values moved to the right-hand side.
    fn boundary_rhs(&self, g: &Grid) -> (f64, f64) {
        let (bl, br) = self.boundary;
        if bl == 0.0 && br == 0.0 {
            return (0.0, 0.0);
        }
        let n = g.n;
        let ih2 = 1.0 / (g.h * g.h);
        let (el, er) = match &self.diffusion {
            DiffusionTerm::Unit => (1.0, 1.0),
            DiffusionTerm::Variable(a) => {
                let e = half_node_means(a);
                (e[0], e[n])
            }
            DiffusionTerm::Off => (0.0, 0.0),
        };
        let (dl, dr) = match &self.drift {
            Some(b) => (b.0[0], b.0[n - 1]),
            None => (0.0, 0.0),
        };
        let s = 1.0 / (2.0 * g.h);
        (el * ih2 * bl + dl * s * bl, er * ih2 * br - dr * s * br)
    }
}

fn with_dt(err: Error, dt: f64) -> Error {
    match err {
        Error::SingularSystem { min_pivot, row, .. } => Error::SingularSystem { dt, min_pivot, row },
        e => e,
    }
}

/// One backward-Euler step: solves `(I/dt - D + b ∂ + r) u = u_prev/dt + rhs`.
pub fn implicit_euler_step(g: &Grid, dt: f64, co: &StepCoefficients, u_prev: &Field) -> Result<Field> {
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
    }
    g.check(&u_prev.0)?;
    co.validate(g)?;
    let m = co.step_matrix(g, dt);
    let mut rhs = u_prev.scale(1.0 / dt);
    if let Some(f) = &co.rhs {
        rhs.axpy(1.0, f);
    }
    let (bl, br) = co.boundary_rhs(g);
    rhs.0[0] += bl;
    rhs.0[g.n - 1] += br;
    m.solve(&rhs.0).map(Field).map_err(|e| with_dt(e, dt))
}

/// Marches backward Euler; `coeffs[k-1]` are the coefficients at `t_k`.
pub fn solve_linear_parabolic(g: &Grid, ta: &TimeAxis, coeffs: &[StepCoefficients], u0: &Field) -> Result<Trajectory> {
    if coeffs.len() != ta.n_steps {
        return Err(Error::ShapeMismatch {
            expected: ta.n_steps,
            got: coeffs.len(),
        });
    }
    solve_linear_parabolic_with(g, ta, u0, |k| Ok(coeffs[k - 1].clone()))
}

/// As [`solve_linear_parabolic`], with coefficients produced on demand for `k = 1..=N`.
pub fn solve_linear_parabolic_with(
    g: &Grid,
    ta: &TimeAxis,
    u0: &Field,
    mut coeffs: impl FnMut(usize) -> Result<StepCoefficients>,
) -> Result<Trajectory> {
    g.check(&u0.0)?;
    let mut frames = Vec::with_capacity(ta.n_steps + 1);
    frames.push(u0.clone());
    for k in 1..=ta.n_steps {
        let co = coeffs(k).map_err(|e| e.at_step(k))?;
        let next = implicit_euler_step(g, ta.dt, &co, &frames[k - 1]).map_err(|e| e.at_step(k))?;
        frames.push(next);
    }
    Ok(Trajectory { axis: *ta, frames })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NewtonSettings {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for NewtonSettings {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 25,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonReport {
    /// Iterations needed to reach the tolerance.
    pub iterations: usize,
    pub residual: f64,
}

/// Newton solve of `(u - u_prev)/dt - f(u) = 0`.
///
/// `f` evaluates the spatial right-hand side and `f_jac` its Jacobian. Once the
/// L² residual is below `tol` one more Newton update is attempted and kept if it
/// reduces the residual, so the returned state resolves the discrete equation
/// well below `tol` whenever convergence is quadratic.
pub fn newton_parabolic_step(
    g: &Grid,
    dt: f64,
    f: impl Fn(&Field) -> Result<Field>,
    f_jac: impl Fn(&Field) -> Result<Tridiag>,
    u_prev: &Field,
    u_guess: &Field,
    tol: f64,
    max_iter: usize,
) -> Result<(Field, NewtonReport)> {
    if !(dt > 0.0) || !(tol > 0.0) {
        return Err(Error::InvalidArgument("dt and tol must be positive".into()));
    }
    g.check(&u_prev.0)?;
    g.check(&u_guess.0)?;
    let residual = |u: &Field| -> Result<Field> {
        let fu = f(u)?;
        Ok(u.sub(u_prev).scale(1.0 / dt).sub(&fu))
    };
    let newton_update = |u: &Field, r: &Field| -> Result<Field> {
        let mut j = f_jac(u)?;
        for i in 0..g.n {
            j.lower[i] = -j.lower[i];
            j.diag[i] = 1.0 / dt - j.diag[i];
            j.upper[i] = -j.upper[i];
        }
        let du = j.solve(&r.0).map_err(|e| with_dt(e, dt))?;
        Ok(u.sub(&Field(du)))
    };
    let mut u = u_guess.clone();
    let mut r = residual(&u)?;
    let mut rn = lp_norm(g, &r, 2.0)?;
    let mut it = 0;
    while !(rn <= tol) {
        if it >= max_iter || !rn.is_finite() {
            return Err(Error::NewtonDivergence {
                iterations: it,
                residual: rn,
            });
        }
        u = newton_update(&u, &r)?;
        r = residual(&u)?;
        rn = lp_norm(g, &r, 2.0)?;
        it += 1;
    }
    if rn > 0.0 {
        if let Ok(polished) = newton_update(&u, &r) {
            if let Ok(rp) = residual(&polished) {
                let rpn = lp_norm(g, &rp, 2.0)?;
                if rpn <= rn {
                    u = polished;
                    rn = rpn;
                }
            }
        }
    }
    if !u.is_finite() {
        return Err(Error::NonFinite("Newton iterate"));
    }
    Ok((u, NewtonReport { iterations: it, residual: rn }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;
    use std::f64::consts::PI;

    #[test]
    fn zero_data_stays_zero() {
        let g = make_grid(8, 1).unwrap();
        let u = implicit_euler_step(&g, 0.1, &StepCoefficients::heat(), &g.zeros()).unwrap();
        assert_eq!(u, g.zeros());
        let ta = TimeAxis::new(1.0, 5).unwrap();
        let traj = solve_linear_parabolic(&g, &ta, &vec![StepCoefficients::heat(); 5], &g.zeros()).unwrap();
        assert_eq!(traj, Trajectory::zeros(&g, ta));
    }

    #[test]
    fn pure_decay() {
        let g = make_grid(6, 1).unwrap();
        let co = StepCoefficients {
            diffusion: DiffusionTerm::Off,
            reaction: Some(g.constant(1.0)),
            ..Default::default()
        };
        let prev = g.sample(|x| 1.0 + x);
        let dt = 0.3;
        let u = implicit_euler_step(&g, dt, &co, &prev).unwrap();
        let expected = prev.scale(1.0 / (1.0 + dt));
        assert!(u.sub(&expected).max_abs() < 1e-15);
    }

    #[test]
    fn heat_single_step() {
        let g = make_grid(200, 1).unwrap();
        let dt = 1e-4;
        let u0 = g.sample(|x| (PI * x).sin());
        let u = implicit_euler_step(&g, dt, &StepCoefficients::heat(), &u0).unwrap();
        let exact = u0.scale((-PI * PI * dt).exp());
        let err = u.sub(&exact).max_abs();
        assert!(err < 2.0 * dt * dt * PI.powi(4) + 5.0 * g.h * g.h * dt, "err = {err}");
    }

    #[test]
    fn singular_reports_dt() {
        let g = make_grid(4, 1).unwrap();
        let dt = 0.5;
        let co = StepCoefficients {
            diffusion: DiffusionTerm::Off,
            reaction: Some(g.constant(-2.0)),
            ..Default::default()
        };
        let err = implicit_euler_step(&g, dt, &co, &g.constant(1.0)).unwrap_err();
        match err {
            Error::SingularSystem { dt: d, .. } => assert_eq!(d, dt),
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn step_error_carries_index() {
        let g = make_grid(4, 1).unwrap();
        let ta = TimeAxis::new(1.0, 4).unwrap();
        let err = solve_linear_parabolic_with(&g, &ta, &g.zeros(), |k| {
            Ok(StepCoefficients {
                diffusion: DiffusionTerm::Off,
                reaction: Some(g.constant(if k == 3 { -4.0 } else { 0.0 })),
                ..Default::default()
            })
        })
        .unwrap_err();
        assert!(matches!(err, Error::StepFailed { step: 3, .. }), "{err:?}");
    }

    #[test]
    fn inhomogeneous_boundary_constant_is_steady() {
        let g = make_grid(10, 1).unwrap();
        let co = StepCoefficients {
            boundary: (1.0, 1.0),
            drift: Some(g.sample(|x| x - 0.5)),
            ..Default::default()
        };
        let u = implicit_euler_step(&g, 0.01, &co, &g.constant(1.0)).unwrap();
        assert!(u.sub(&g.constant(1.0)).max_abs() < 1e-12);
    }

    #[test]
    fn stationary_forcing_gives_constant_trajectory() {
        let g = make_grid(40, 1).unwrap();
        let c = g.sample(|x| 1.0 + x);
        let u0 = g.sample(|x| (PI * x).sin());
        let lap = crate::grid::laplacian_apply(&g, &u0, (0.0, 0.0)).unwrap();
        let phi = lap.scale(-1.0).add(&c.mul(&u0));
        let ta = TimeAxis::new(1.0, 10).unwrap();
        let co = StepCoefficients {
            reaction: Some(c),
            rhs: Some(phi),
            ..Default::default()
        };
        let traj = solve_linear_parabolic(&g, &ta, &vec![co; 10], &u0).unwrap();
        for f in &traj.frames {
            assert!(f.sub(&u0).max_abs() < 1e-10);
        }
    }

    #[test]
    fn newton_on_linear_problem_matches_direct_step() {
        let g = make_grid(30, 1).unwrap();
        let dt = 0.05;
        let c = g.sample(|x| 2.0 + x.sin());
        let phi = g.sample(|x| x * x);
        let prev = g.sample(|x| (PI * x).sin());
        let co = StepCoefficients {
            reaction: Some(c.clone()),
            rhs: Some(phi.clone()),
            ..Default::default()
        };
        let direct = implicit_euler_step(&g, dt, &co, &prev).unwrap();
        let lap = laplacian_matrix(&g);
        let f = |u: &Field| Ok(Field(lap.matvec(&u.0)).sub(&c.mul(u)).add(&phi));
        let jac = |_: &Field| {
            let mut j = lap.clone();
            for i in 0..g.n {
                j.diag[i] -= c.0[i];
            }
            Ok(j)
        };
        let (u, rep) = newton_parabolic_step(&g, dt, f, jac, &prev, &prev, 1e-10, 25).unwrap();
        assert_eq!(rep.iterations, 1);
        assert!(u.sub(&direct).max_abs() <= 1e-12);
    }

    #[test]
    fn newton_cubic_zero_fixed_point() {
        let g = make_grid(10, 1).unwrap();
        let lap = laplacian_matrix(&g);
        let f = |u: &Field| Ok(Field(lap.matvec(&u.0)).sub(&u.map(|v| v * v * v)));
        let jac = |u: &Field| {
            let mut j = lap.clone();
            for i in 0..g.n {
                j.diag[i] -= 3.0 * u.0[i] * u.0[i];
            }
            Ok(j)
        };
        let (u, _) = newton_parabolic_step(&g, 0.1, f, jac, &g.zeros(), &g.zeros(), 1e-10, 25).unwrap();
        assert_eq!(u, g.zeros());
    }

    #[test]
    fn newton_failure_reports_residual() {
        let g = make_grid(5, 1).unwrap();
        let f = |u: &Field| Ok(u.map(|v| v.exp() * 50.0));
        let jac = |u: &Field| {
            let mut j = Tridiag::zeros(5);
            j.diag = u.0.iter().map(|v| v.exp() * 50.0).collect();
            Ok(j)
        };
        let err = newton_parabolic_step(&g, 1.0, f, jac, &g.constant(1.0), &g.constant(1.0), 1e-10, 3).unwrap_err();
        assert!(matches!(err, Error::NewtonDivergence { .. }), "{err:?}");
    }
}
