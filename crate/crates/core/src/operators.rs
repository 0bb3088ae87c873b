//! Reduced operator `F = C∘S` and the all-at-once operator `F(θ, u)`, with
//! their derivatives, adjoints and the norms of the data spaces.
//!
//! Time integrals use the right-endpoint rule matching backward Euler: a
//! time-indexed quantity defined on `t_1..t_N` is weighted by `dt`, and the
//! initial frame of an observation carries no weight. States in `𝒰` are paired
//! over all frames `t_0..t_N`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{lp_norm, riesz_representative, Field, Grid, WKind};
use crate::models::{forward_solve, Linearization, ProblemSpec};
use crate::pde::{TimeAxis, Trajectory};

/// Data `y` in `𝒴 = L²(0,T; L^q)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub data: Trajectory,
    pub q: f64,
}

impl Observation {
    pub fn new(data: Trajectory) -> Self {
        Self { data, q: 2.0 }
    }

    pub fn with_q(data: Trajectory, q: f64) -> Self {
        Self { data, q }
    }
}

/// `sqrt(Σ_{k≥1} dt ‖y_k‖_q²)`.
pub fn obs_norm(g: &Grid, y: &Observation) -> Result<f64> {
    traj_norm_q(g, &y.data, y.q)
}

pub fn traj_norm_q(g: &Grid, y: &Trajectory, q: f64) -> Result<f64> {
    let dt = y.axis.dt;
    let mut s = 0.0;
    for f in &y.frames[1..] {
        let v = lp_norm(g, f, q)?;
        s += dt * v * v;
    }
    Ok(s.sqrt())
}

/// `𝒴` inner product for `q = 2`: `Σ_{k≥1} dt h Σ_i a_k b_k`.
pub fn y_inner(g: &Grid, a: &Trajectory, b: &Trajectory) -> f64 {
    let dt = a.axis.dt;
    a.frames[1..]
        .iter()
        .zip(&b.frames[1..])
        .map(|(x, y)| dt * g.h * x.dot(y))
        .sum()
}

/// `𝒰` inner product over all frames: `Σ_{k≥0} dt h Σ_i a_k b_k`.
pub fn u_inner(g: &Grid, a: &Trajectory, b: &Trajectory) -> f64 {
    let dt = a.axis.dt;
    a.frames.iter().zip(&b.frames).map(|(x, y)| dt * g.h * x.dot(y)).sum()
}

/// `sqrt(Σ_k dt ‖r_k‖²_{W*})` over the given frames `r_1..r_N`.
pub fn wstar_time_norm(g: &Grid, dt: f64, r: &[Field], w_kind: WKind) -> Result<f64> {
    Ok(wstar_time_inner(g, dt, r, r, w_kind)?.max(0.0).sqrt())
}

pub fn wstar_time_inner(g: &Grid, dt: f64, a: &[Field], b: &[Field], w_kind: WKind) -> Result<f64> {
    let mut s = 0.0;
    for (x, y) in a.iter().zip(b) {
        let ry = riesz_representative(g, y, w_kind)?;
        s += dt * g.h * x.dot(&ry);
    }
    Ok(s)
}

/// `F(θ) = S(θ)` observed through the identity.
pub fn apply_f(spec: &ProblemSpec, theta: &Field, g: &Grid, ta: &TimeAxis) -> Result<Observation> {
    Ok(Observation::new(forward_solve(spec, theta, g, ta)?))
}

pub fn apply_fprime(spec: &ProblemSpec, theta: &Field, h: &Field, g: &Grid, ta: &TimeAxis) -> Result<Observation> {
    Ok(Observation::new(Linearization::at(spec, theta, g, ta)?.apply(h)?))
}

pub fn apply_fprime_adjoint(spec: &ProblemSpec, theta: &Field, w: &Observation, g: &Grid, ta: &TimeAxis) -> Result<Field> {
    Linearization::at(spec, theta, g, ta)?.adjoint(&w.data)
}

/// Reduced operator bound to a problem and discretization.
#[derive(Debug, Clone)]
pub struct ReducedOperator {
    pub spec: ProblemSpec,
    pub grid: Grid,
    pub axis: TimeAxis,
}

impl ReducedOperator {
    pub fn new(spec: ProblemSpec, grid: Grid, axis: TimeAxis) -> Result<Self> {
        spec.validate(&grid, &axis)?;
        Ok(Self { spec, grid, axis })
    }

    pub fn apply(&self, theta: &Field) -> Result<Trajectory> {
        forward_solve(&self.spec, theta, &self.grid, &self.axis)
    }

    pub fn linearize(&self, theta: &Field) -> Result<Linearization> {
        Linearization::at(&self.spec, theta, &self.grid, &self.axis)
    }

    pub fn y_norm(&self, y: &Trajectory) -> f64 {
        y_inner(&self.grid, y, y).max(0.0).sqrt()
    }

    pub fn x_norm(&self, theta: &Field) -> f64 {
        (self.grid.h * theta.dot(theta)).sqrt()
    }
}

/// Components of the all-at-once residual.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AaoResidual {
    /// `u̇ - f(θ, u)` at `t_1..t_N`.
    pub model_part: Vec<Field>,
    /// `u(0) - u₀`.
    pub init_part: Field,
    /// `C(u) - y`.
    pub obs_part: Trajectory,
}

impl AaoResidual {
    pub fn model_norm(&self, g: &Grid, w_kind: WKind) -> Result<f64> {
        wstar_time_norm(g, self.obs_part.axis.dt, &self.model_part, w_kind)
    }

    pub fn init_norm(&self, g: &Grid) -> f64 {
        (g.h * self.init_part.dot(&self.init_part)).sqrt()
    }

    pub fn obs_norm(&self, g: &Grid) -> f64 {
        y_inner(g, &self.obs_part, &self.obs_part).max(0.0).sqrt()
    }

    /// Root-sum-of-squares norm in `𝒲* × H × 𝒴`.
    pub fn norm(&self, g: &Grid, w_kind: WKind) -> Result<f64> {
        let m = self.model_norm(g, w_kind)?;
        let i = self.init_norm(g);
        let o = self.obs_norm(g);
        Ok((m * m + i * i + o * o).sqrt())
    }

    pub fn inner(&self, other: &AaoResidual, g: &Grid, w_kind: WKind) -> Result<f64> {
        let m = wstar_time_inner(g, self.obs_part.axis.dt, &self.model_part, &other.model_part, w_kind)?;
        Ok(m + g.h * self.init_part.dot(&other.init_part) + y_inner(g, &self.obs_part, &other.obs_part))
    }

    pub fn sub(&self, other: &AaoResidual) -> AaoResidual {
        AaoResidual {
            model_part: self.model_part.iter().zip(&other.model_part).map(|(a, b)| a.sub(b)).collect(),
            init_part: self.init_part.sub(&other.init_part),
            obs_part: self.obs_part.sub(&other.obs_part),
        }
    }
}

fn check_axes(g: &Grid, u: &Trajectory, ta: &TimeAxis) -> Result<()> {
    u.check(g, ta)
}

/// Backward difference `(u_k - u_{k-1})/dt` for `k = 1..N`.
pub fn backward_difference(u: &Trajectory) -> Vec<Field> {
    let dt = u.axis.dt;
    u.frames.windows(2).map(|w| w[1].sub(&w[0]).scale(1.0 / dt)).collect()
}

/// `(u̇ - f(θ, u), u(0) - u₀, u - y)`.
pub fn aao_apply(spec: &ProblemSpec, theta: &Field, u: &Trajectory, y: &Observation, g: &Grid) -> Result<AaoResidual> {
    let ta = u.axis;
    check_axes(g, u, &ta)?;
    check_axes(g, &y.data, &ta)?;
    g.check(&theta.0)?;
    let udot = backward_difference(u);
    let model_part = udot
        .iter()
        .enumerate()
        .map(|(i, d)| Ok(d.sub(&spec.f_eval(g, theta, &u.frames[i + 1], i + 1)?)))
        .collect::<Result<Vec<_>>>()?;
    Ok(AaoResidual {
        model_part,
        init_part: u.frames[0].sub(&spec.u0),
        obs_part: u.sub(&y.data),
    })
}

/// Tangent `(dů - f_θ dθ - f_u du, du(0), du)` at `(θ, u)`.
pub fn aao_linearized_apply(
    spec: &ProblemSpec,
    theta: &Field,
    u: &Trajectory,
    dtheta: &Field,
    du: &Trajectory,
    g: &Grid,
) -> Result<AaoResidual> {
    let ta = u.axis;
    check_axes(g, u, &ta)?;
    check_axes(g, du, &ta)?;
    g.check(&dtheta.0)?;
    let dudot = backward_difference(du);
    let model_part = (1..=ta.n_steps)
        .map(|k| {
            let ju = Field(spec.f_u(g, theta, &u.frames[k]).matvec(&du.frames[k].0));
            let jt = spec.f_theta(g, &u.frames[k], dtheta);
            dudot[k - 1].sub(&ju).sub(&jt)
        })
        .collect();
    Ok(AaoResidual {
        model_part,
        init_part: du.frames[0].clone(),
        obs_part: du.clone(),
    })
}

/// Adjoint of [`aao_linearized_apply`] for the product inner products
/// (`L²` on parameters, `𝒰` on states, `𝒲* × H × 𝒴` on residuals).
pub fn aao_adjoint(
    spec: &ProblemSpec,
    theta: &Field,
    u: &Trajectory,
    res: &AaoResidual,
    g: &Grid,
) -> Result<(Field, Trajectory)> {
    let ta = u.axis;
    check_axes(g, u, &ta)?;
    check_axes(g, &res.obs_part, &ta)?;
    if res.model_part.len() != ta.n_steps {
        return Err(Error::ShapeMismatch {
            expected: ta.n_steps,
            got: res.model_part.len(),
        });
    }
    let n_steps = ta.n_steps;
    let dt = ta.dt;
    let w_kind = spec.kind.w_kind();
    // ρ_k = h² K⁻¹ r_k turns the W* pairing into a Euclidean one
    let rho = res
        .model_part
        .iter()
        .map(|r| Ok(riesz_representative(g, r, w_kind)?.scale(g.h)))
        .collect::<Result<Vec<_>>>()?;
    let mut g_theta = g.zeros();
    let mut frames = Vec::with_capacity(n_steps + 1);
    for j in 0..=n_steps {
        let mut c = g.zeros();
        if j >= 1 {
            let rj = &rho[j - 1];
            c.axpy(1.0, rj);
            let jt = spec.f_u(g, theta, &u.frames[j]).transpose();
            c.axpy(-dt, &Field(jt.matvec(&rj.0)));
            c.axpy(dt * g.h, &res.obs_part.frames[j]);
            g_theta.axpy(-dt / g.h, &spec.f_theta_transpose(g, &u.frames[j], rj));
        } else {
            c.axpy(g.h, &res.init_part);
        }
        if j < n_steps {
            c.axpy(-1.0, &rho[j]);
        }
        frames.push(c.scale(1.0 / (dt * g.h)));
    }
    Ok((g_theta, Trajectory { axis: ta, frames }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;
    use crate::models::ModelKind;

    #[test]
    fn constant_in_time_norm() {
        let g = make_grid(15, 1).unwrap();
        let ta = TimeAxis::new(2.0, 7).unwrap();
        let f = g.sample(|x| 1.0 + x * x);
        let y = Observation::new(Trajectory::constant_in_time(ta, f.clone()));
        let expected = 2f64.sqrt() * lp_norm(&g, &f, 2.0).unwrap();
        assert!((obs_norm(&g, &y).unwrap() - expected).abs() < 1e-13);
        let w = wstar_time_norm(&g, ta.dt, &y.data.frames[1..], WKind::H10).unwrap();
        let wexp = 2f64.sqrt() * crate::grid::dual_norm_w(&g, &f, crate::grid::NormKind::H10).unwrap();
        assert!((w - wexp).abs() < 1e-12 * wexp);
    }

    #[test]
    fn q2_norm_matches_inner_product() {
        let g = make_grid(11, 1).unwrap();
        let ta = TimeAxis::new(1.0, 4).unwrap();
        let y = Trajectory {
            axis: ta,
            frames: (0..5).map(|k| g.sample(|x| (k as f64 + x).sin())).collect(),
        };
        let a = traj_norm_q(&g, &y, 2.0).unwrap();
        let b = y_inner(&g, &y, &y).sqrt();
        assert!((a - b).abs() <= 1e-13 * b);
        assert_eq!(traj_norm_q(&g, &Trajectory::zeros(&g, ta), 3.0).unwrap(), 0.0);
    }

    #[test]
    fn aao_residual_of_exact_state() {
        let g = make_grid(12, 1).unwrap();
        let ta = TimeAxis::new(0.5, 6).unwrap();
        let spec = ProblemSpec::new(ModelKind::Potential, g.sample(|x| x * (1.0 - x)));
        let theta = g.constant(1.5);
        let u = forward_solve(&spec, &theta, &g, &ta).unwrap();
        let res = aao_apply(&spec, &theta, &u, &Observation::new(u.clone()), &g).unwrap();
        assert!(res.norm(&g, WKind::H2Cap).unwrap() < 1e-9);
    }
}
