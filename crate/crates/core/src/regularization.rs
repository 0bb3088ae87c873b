//! Landweber iteration (reduced and all-at-once) with the discrepancy principle.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Field, Grid};
use crate::models::{forward_solve, Linearization, ProblemSpec};
use crate::operators::{aao_adjoint, aao_apply, aao_linearized_apply, traj_norm_q, u_inner, AaoResidual, Observation};
use crate::pde::{TimeAxis, Trajectory};
use crate::random::{rng, smooth_field, smooth_trajectory, white_noise_trajectory};
use crate::tcc::fprime_norm_power;

/// Floor used by the discrepancy test when `delta = 0`.
pub const EXACT_DATA_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LandweberConfig {
    /// Step size; `None` selects `0.9 / Ĉ_F²` from a power iteration at the initial guess.
    pub mu: Option<f64>,
    pub tau: f64,
    pub max_iter: usize,
    pub delta: f64,
    pub seed: u64,
    pub power_iterations: usize,
    /// Stop when the residual exceeds this multiple of the initial residual.
    pub divergence_factor: f64,
    /// Record wall-clock time per iteration (makes logs non-reproducible).
    pub record_timing: bool,
    /// Optional absolute residual at which to stop, for runs on exact data.
    pub residual_target: Option<f64>,
}

impl Default for LandweberConfig {
    fn default() -> Self {
        Self {
            mu: None,
            tau: 1.5,
            max_iter: 1000,
            delta: 0.0,
            seed: 0,
            power_iterations: 20,
            divergence_factor: 10.0,
            record_timing: false,
            residual_target: None,
        }
    }
}

impl LandweberConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 1.0) {
            return Err(Error::InvalidArgument(format!("tau must exceed 1, got {}", self.tau)));
        }
        if let Some(mu) = self.mu {
            if !(mu > 0.0) || !mu.is_finite() {
                return Err(Error::InvalidArgument(format!("mu must be positive, got {mu}")));
            }
        }
        if !(self.delta >= 0.0) || !self.delta.is_finite() {
            return Err(Error::InvalidArgument(format!("delta must be nonnegative, got {}", self.delta)));
        }
        if !(self.divergence_factor > 1.0) {
            return Err(Error::InvalidArgument("divergence_factor must exceed 1".into()));
        }
        if let Some(t) = self.residual_target {
            if !(t > 0.0) {
                return Err(Error::InvalidArgument(format!("residual_target must be positive, got {t}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Discrepancy,
    TargetReached,
    MaxIter,
    Divergence,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub k: usize,
    pub residual: f64,
    pub error: Option<f64>,
    pub time_ms: Option<f64>,
    /// Norm of the model component of the all-at-once residual.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_residual: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationLog {
    pub records: Vec<IterationRecord>,
    pub stop_reason: StopReason,
    pub mu: f64,
    /// Operator-norm estimate behind an automatic step size.
    pub operator_norm: Option<f64>,
}

impl IterationLog {
    pub fn final_residual(&self) -> f64 {
        self.records.last().map_or(f64::NAN, |r| r.residual)
    }

    pub fn stop_index(&self) -> usize {
        self.records.last().map_or(0, |r| r.k)
    }
}

pub fn discrepancy_stop(residual: f64, tau: f64, delta: f64) -> bool {
    if delta == 0.0 {
        residual <= EXACT_DATA_FLOOR
    } else {
        residual <= tau * delta
    }
}

/// Adds seeded Gaussian noise on frames `1..N`, scaled to `𝒴`-norm exactly `delta`.
pub fn add_noise(g: &Grid, y: &Observation, delta: f64, seed: u64) -> Result<Observation> {
    if !(delta >= 0.0) || !delta.is_finite() {
        return Err(Error::InvalidArgument(format!("delta must be nonnegative, got {delta}")));
    }
    if delta == 0.0 {
        return Ok(y.clone());
    }
    let noise = white_noise_trajectory(g, &y.data.axis, &mut rng(seed));
    let nn = traj_norm_q(g, &noise, y.q)?;
    let mut data = y.data.clone();
    data.axpy(delta / nn, &noise);
    Ok(Observation { data, q: y.q })
}

fn x_norm(g: &Grid, f: &Field) -> f64 {
    (g.h * f.dot(f)).sqrt()
}

fn elapsed_ms(start: &Instant, on: bool) -> Option<f64> {
    on.then(|| start.elapsed().as_secs_f64() * 1e3)
}

/// `θ_{k+1} = P(θ_k - μ F'(θ_k)*(F(θ_k) - y^δ))` with `P` the projection onto the domain.
pub fn landweber_reduced(
    spec: &ProblemSpec,
    g: &Grid,
    ta: &TimeAxis,
    y_delta: &Observation,
    cfg: &LandweberConfig,
    theta0: &Field,
    theta_true: Option<&Field>,
) -> Result<(Field, IterationLog)> {
    cfg.validate()?;
    spec.check_admissible(g, theta0)?;
    y_delta.data.check(g, ta)?;
    let start = Instant::now();
    let mut theta = theta0.clone();
    let mut lin = Linearization::at(spec, &theta, g, ta)?;
    let (mu, operator_norm) = match cfg.mu {
        Some(mu) => (mu, None),
        None => {
            let c = fprime_norm_power(&lin, cfg.power_iterations, cfg.seed)?;
            if !(c > 0.0) {
                return Err(Error::InvalidArgument("derivative vanishes at the initial guess".into()));
            }
            (0.9 / (c * c), Some(c))
        }
    };
    let mut records = Vec::new();
    let mut initial = None;
    let mut k = 0;
    let stop_reason = loop {
        let r = lin.base.sub(&y_delta.data);
        let residual = traj_norm_q(g, &r, y_delta.q)?;
        let res0 = *initial.get_or_insert(residual);
        records.push(IterationRecord {
            k,
            residual,
            error: theta_true.map(|t| x_norm(g, &theta.sub(t))),
            time_ms: elapsed_ms(&start, cfg.record_timing),
            model_residual: None,
        });
        if discrepancy_stop(residual, cfg.tau, cfg.delta) {
            break StopReason::Discrepancy;
        }
        if cfg.residual_target.is_some_and(|t| residual <= t) {
            break StopReason::TargetReached;
        }
        if !(residual <= cfg.divergence_factor * res0) {
            break StopReason::Divergence;
        }
        if k >= cfg.max_iter {
            break StopReason::MaxIter;
        }
        let grad = lin.adjoint(&r)?;
        let mut next = theta.clone();
        next.axpy(-mu, &grad);
        theta = spec.project(&next);
        lin = Linearization::at(spec, &theta, g, ta)?;
        k += 1;
    };
    Ok((
        theta,
        IterationLog {
            records,
            stop_reason,
            mu,
            operator_norm,
        },
    ))
}

/// Power-iteration estimate of the norm of the all-at-once derivative at `(θ, u)`.
pub fn aao_operator_norm(spec: &ProblemSpec, g: &Grid, theta: &Field, u: &Trajectory, iterations: usize, seed: u64) -> Result<f64> {
    let ta = u.axis;
    let w_kind = spec.kind.w_kind();
    let mut r = rng(seed);
    let mut x_theta = smooth_field(g, &mut r);
    let mut x_u = smooth_trajectory(g, &ta, &mut r);
    let mut best: f64 = 0.0;
    for _ in 0..iterations.max(1) {
        let n = (g.h * x_theta.dot(&x_theta) + u_inner(g, &x_u, &x_u)).sqrt();
        if !(n > 0.0) {
            break;
        }
        x_theta = x_theta.scale(1.0 / n);
        x_u = x_u.scale(1.0 / n);
        let t = aao_linearized_apply(spec, theta, u, &x_theta, &x_u, g)?;
        best = best.max(t.norm(g, w_kind)?);
        let (a, b) = aao_adjoint(spec, theta, u, &t, g)?;
        x_theta = a;
        x_u = b;
    }
    Ok(best)
}

/// Joint iteration on `(θ, u)` for `F(θ, u) = (0, 0, y^δ)`.
pub fn landweber_aao(
    spec: &ProblemSpec,
    g: &Grid,
    ta: &TimeAxis,
    y_delta: &Observation,
    cfg: &LandweberConfig,
    theta0: &Field,
    u_init: Option<&Trajectory>,
    theta_true: Option<&Field>,
) -> Result<((Field, Trajectory), IterationLog)> {
    cfg.validate()?;
    spec.check_admissible(g, theta0)?;
    y_delta.data.check(g, ta)?;
    let start = Instant::now();
    let w_kind = spec.kind.w_kind();
    let mut theta = theta0.clone();
    let mut u = match u_init {
        Some(u) => {
            u.check(g, ta)?;
            u.clone()
        }
        None => forward_solve(spec, theta0, g, ta)?,
    };
    let (mu, operator_norm) = match cfg.mu {
        Some(mu) => (mu, None),
        None => {
            let c = aao_operator_norm(spec, g, &theta, &u, cfg.power_iterations, cfg.seed)?;
            (0.9 / (c * c), Some(c))
        }
    };
    let mut records = Vec::new();
    let mut initial = None;
    let mut k = 0;
    let stop_reason = loop {
        let res: AaoResidual = aao_apply(spec, &theta, &u, y_delta, g)?;
        let residual = res.norm(g, w_kind)?;
        let res0 = *initial.get_or_insert(residual);
        records.push(IterationRecord {
            k,
            residual,
            error: theta_true.map(|t| x_norm(g, &theta.sub(t))),
            time_ms: elapsed_ms(&start, cfg.record_timing),
            model_residual: Some(res.model_norm(g, w_kind)?),
        });
        if discrepancy_stop(residual, cfg.tau, cfg.delta) {
            break StopReason::Discrepancy;
        }
        if cfg.residual_target.is_some_and(|t| residual <= t) {
            break StopReason::TargetReached;
        }
        if !(residual <= cfg.divergence_factor * res0) {
            break StopReason::Divergence;
        }
        if k >= cfg.max_iter {
            break StopReason::MaxIter;
        }
        let (g_theta, g_u) = aao_adjoint(spec, &theta, &u, &res, g)?;
        let mut next = theta.clone();
        next.axpy(-mu, &g_theta);
        theta = spec.project(&next);
        u.axpy(-mu, &g_u);
        k += 1;
    };
    Ok((
        (theta, u),
        IterationLog {
            records,
            stop_reason,
            mu,
            operator_norm,
        },
    ))
}
