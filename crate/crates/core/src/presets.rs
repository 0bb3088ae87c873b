//! Default problem instances shared by the test battery and the command line.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::grid::{make_grid, Field, Grid};
use crate::models::{ModelKind, ProblemSpec, Source};
use crate::pde::TimeAxis;

pub const DEFAULT_N: usize = 63;
pub const DEFAULT_T: f64 = 0.1;
pub const DEFAULT_STEPS: usize = 20;

/// A model with its discretization, a ground-truth parameter and a ball centre.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub spec: ProblemSpec,
    pub grid: Grid,
    pub axis: TimeAxis,
    pub theta_true: Field,
    pub theta0: Field,
}

/// Default instance of `kind` on `n` interior nodes and `steps` time steps.
/// The ball centre `θ⁰` is the constant midpoint of the range of `θ†`.
///
/// * Potential: `u₀ = sin πx`, `φ = 1`, `θ† = 1 + ½ sin 2πx`.
/// * Diffusion: `u₀ = sin πx`, `φ = 1`, `a† = 1 + 2x(1-x)`.
/// * Quadratic gradient: `u₀ = 0.01 sin πx`, `θ† = 0.1 sin πx`. Small data
///   keep the state near zero, where the transformed problem is well within
///   its positivity regime.
/// * Cubic (`Φ = u³`): `u₀ = sin πx`, `θ† = sin 2πx`.
pub fn instance(kind: ModelKind, n: usize, steps: usize, t_final: f64) -> Result<Instance> {
    let grid = make_grid(n, 1)?;
    let axis = TimeAxis::new(t_final, steps)?;
    let sin1 = |amp: f64| grid.sample(move |x| amp * (PI * x).sin());
    let (spec, theta_true) = match kind {
        ModelKind::Potential => (
            ProblemSpec::new(kind, sin1(1.0)).with_source(Source::Stationary(grid.constant(1.0))),
            grid.sample(|x| 1.0 + 0.5 * (2.0 * PI * x).sin()),
        ),
        ModelKind::Diffusion => (
            ProblemSpec::new(kind, sin1(1.0)).with_source(Source::Stationary(grid.constant(1.0))),
            grid.sample(|x| 1.0 + 2.0 * x * (1.0 - x)),
        ),
        ModelKind::QuadraticGradientSource => (ProblemSpec::new(kind, sin1(0.01)), sin1(0.1)),
        ModelKind::CubicSource => (ProblemSpec::new(kind, sin1(1.0)), grid.sample(|x| (2.0 * PI * x).sin())),
    };
    let theta0 = range_midpoint(&grid, &theta_true);
    spec.validate(&grid, &axis)?;
    Ok(Instance {
        spec,
        grid,
        axis,
        theta_true,
        theta0,
    })
}

/// Constant field at the midpoint of the range of `theta`.
pub fn range_midpoint(g: &Grid, theta: &Field) -> Field {
    let hi = theta.0.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    g.constant(0.5 * (theta.min() + hi))
}

pub fn default_instance(kind: ModelKind) -> Instance {
    instance(kind, DEFAULT_N, DEFAULT_STEPS, DEFAULT_T).expect("default discretization is valid")
}

/// Potential instance with a strong signal (`T = 1`, data scaled by 10), so
/// that absolute noise levels down to `1e-2` stay below the initial residual.
pub fn noise_sweep_instance() -> Instance {
    let mut inst = instance(ModelKind::Potential, DEFAULT_N, DEFAULT_STEPS, 1.0).expect("valid discretization");
    let g = inst.grid;
    inst.spec.u0 = g.sample(|x| 10.0 * (PI * x).sin());
    inst.spec.phi = Source::Stationary(g.constant(10.0));
    inst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::forward_solve;

    #[test]
    fn defaults_solve() {
        for kind in ModelKind::ALL {
            let inst = default_instance(kind);
            let u = forward_solve(&inst.spec, &inst.theta_true, &inst.grid, &inst.axis).unwrap();
            assert!(u.is_finite());
            inst.spec.check_admissible(&inst.grid, &inst.theta0).unwrap();
        }
    }
}
