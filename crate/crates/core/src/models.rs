//! The four identification problems: forward map, linearization and discrete adjoint.
//!
//! Every model is written as `u̇ = f(θ, u)` with homogeneous Dirichlet data and
//! discretized by backward Euler, so step `k` reads `(u_k - u_{k-1})/dt = f(θ, u_k, t_k)`.
//! The linearization is the exact derivative of this discrete map and the
//! adjoint is its exact transpose.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{centered_diff, divergence_matrix, forward_diff, laplacian_matrix, lp_norm, Field, Grid, WKind};
use crate::linalg::Tridiag;
use crate::pde::{
    implicit_euler_step, newton_parabolic_step, solve_linear_parabolic_with, DiffusionTerm, NewtonSettings,
    StepCoefficients, TimeAxis, Trajectory,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    /// `u̇ - Δu + θu = φ`
    Potential,
    /// `u̇ - ∇·(θ∇u) = φ`
    Diffusion,
    /// `u̇ - Δu - |∇u|² = θ`
    QuadraticGradientSource,
    /// `u̇ - Δu + Φ(u) = φ - θ`
    CubicSource,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [
        ModelKind::Potential,
        ModelKind::Diffusion,
        ModelKind::QuadraticGradientSource,
        ModelKind::CubicSource,
    ];

    /// Space `W` whose dual measures the model residual.
    pub fn w_kind(self) -> WKind {
        match self {
            ModelKind::CubicSource => WKind::H10,
            _ => WKind::H2Cap,
        }
    }

    pub fn is_linear_in_state(self) -> bool {
        matches!(self, ModelKind::Potential | ModelKind::Diffusion)
    }

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Potential => "potential",
            ModelKind::Diffusion => "diffusion",
            ModelKind::QuadraticGradientSource => "quadratic_gradient_source",
            ModelKind::CubicSource => "cubic_source",
        }
    }
}

/// `Φ(u) = αu³ + βu² + γ₀u`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CubicPreset {
    pub alpha: f64,
    pub beta: f64,
    pub gamma0: f64,
}

impl Default for CubicPreset {
    fn default() -> Self {
        Self::cube()
    }
}

impl CubicPreset {
    /// `Φ(u) = u³`
    pub fn cube() -> Self {
        Self {
            alpha: 1.0,
            beta: 0.0,
            gamma0: 0.0,
        }
    }

    /// `Φ(u) = u(1 - u²)`
    pub fn ginzburg_landau() -> Self {
        Self {
            alpha: -1.0,
            beta: 0.0,
            gamma0: 1.0,
        }
    }

    /// `Φ(u) = u²(1 - u)`
    pub fn zeldovich() -> Self {
        Self {
            alpha: -1.0,
            beta: 1.0,
            gamma0: 0.0,
        }
    }

    /// `Φ(u) = u(1 - u)(u - a)`
    pub fn bistable(a: f64) -> Self {
        Self {
            alpha: -1.0,
            beta: 1.0 + a,
            gamma0: -a,
        }
    }

    pub fn by_name(name: &str) -> Option<Self> {
        match name {
            "cube" => Some(Self::cube()),
            "ginzburg_landau" => Some(Self::ginzburg_landau()),
            "zeldovich" => Some(Self::zeldovich()),
            "bistable" => Some(Self::bistable(0.25)),
            _ => None,
        }
    }

    pub fn phi(&self, u: f64) -> f64 {
        ((self.alpha * u + self.beta) * u + self.gamma0) * u
    }

    pub fn dphi(&self, u: f64) -> f64 {
        (3.0 * self.alpha * u + 2.0 * self.beta) * u + self.gamma0
    }
}

/// Known source term `φ`, sampled at the implicit time levels `t_1..t_N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Zero,
    Stationary(Field),
    Frames(Vec<Field>),
}

impl Source {
    pub fn from_fn(g: &Grid, ta: &TimeAxis, f: impl Fn(f64, f64) -> f64) -> Source {
        Source::Frames((1..=ta.n_steps).map(|k| g.sample(|x| f(ta.t(k), x))).collect())
    }

    /// Source at step `k >= 1`.
    pub fn at(&self, k: usize) -> Option<&Field> {
        match self {
            Source::Zero => None,
            Source::Stationary(f) => Some(f),
            Source::Frames(fs) => fs.get(k - 1),
        }
    }

    fn check(&self, g: &Grid, ta: &TimeAxis) -> Result<()> {
        match self {
            Source::Zero => Ok(()),
            Source::Stationary(f) => g.check(&f.0),
            Source::Frames(fs) => {
                if fs.len() != ta.n_steps {
                    return Err(Error::ShapeMismatch {
                        expected: ta.n_steps,
                        got: fs.len(),
                    });
                }
                fs.iter().try_for_each(|f| g.check(&f.0))
            }
        }
    }
}

/// Norm in which a parameter is measured; iterations always use discrete L².
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamSpace {
    L2,
    W1p(f64),
}

impl ParamSpace {
    /// `L²` norm, or `(‖f‖_p^p + ‖f'‖_p^p)^{1/p}` with interior forward differences.
    pub fn norm(&self, g: &Grid, f: &Field) -> Result<f64> {
        match *self {
            ParamSpace::L2 => lp_norm(g, f, 2.0),
            ParamSpace::W1p(p) => {
                if p.is_nan() || p < 1.0 {
                    return Err(Error::InvalidArgument(format!("W1p exponent must be >= 1, got {p}")));
                }
                let df = Field(f.0.windows(2).map(|w| (w[1] - w[0]) / g.h).collect());
                if p.is_infinite() {
                    return Ok(f.max_abs().max(df.max_abs()));
                }
                let a: f64 = f.0.iter().map(|v| v.abs().powf(p)).sum();
                let b: f64 = df.0.iter().map(|v| v.abs().powf(p)).sum();
                Ok((g.h * (a + b)).powf(1.0 / p))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub kind: ModelKind,
    pub u0: Field,
    pub phi: Source,
    pub cubic: CubicPreset,
    pub a_lower: f64,
    pub newton: NewtonSettings,
    pub positivity_floor: f64,
}

impl ProblemSpec {
    pub fn new(kind: ModelKind, u0: Field) -> Self {
        Self {
            kind,
            u0,
            phi: Source::Zero,
            cubic: CubicPreset::cube(),
            a_lower: 0.1,
            newton: NewtonSettings::default(),
            positivity_floor: 1e-8,
        }
    }

    pub fn with_source(mut self, phi: Source) -> Self {
        self.phi = phi;
        self
    }

    pub fn validate(&self, g: &Grid, ta: &TimeAxis) -> Result<()> {
        g.check(&self.u0.0)?;
        self.phi.check(g, ta)?;
        if self.kind == ModelKind::Diffusion && !(self.a_lower > 0.0) {
            return Err(Error::InvalidArgument(format!("a_lower must be positive, got {}", self.a_lower)));
        }
        Ok(())
    }

    /// Rejects parameters outside the model's domain.
    pub fn check_admissible(&self, g: &Grid, theta: &Field) -> Result<()> {
        g.check(&theta.0)?;
        if !theta.is_finite() {
            return Err(Error::NonFinite("parameter"));
        }
        if self.kind == ModelKind::Diffusion {
            let min = theta.min();
            if min < self.a_lower {
                return Err(Error::DomainViolation {
                    min,
                    lower: self.a_lower,
                });
            }
        }
        Ok(())
    }

    /// Maps a parameter into the admissible set (identity except for Diffusion).
    pub fn project(&self, theta: &Field) -> Field {
        match self.kind {
            ModelKind::Diffusion => theta.map(|v| v.max(self.a_lower)),
            _ => theta.clone(),
        }
    }

    /// Right-hand side `f(θ, u, t_k)` of `u̇ = f`.
    pub fn f_eval(&self, g: &Grid, theta: &Field, u: &Field, k: usize) -> Result<Field> {
        let lap = laplacian_matrix(g);
        let phi = self.phi.at(k);
        let mut out = match self.kind {
            ModelKind::Potential => Field(lap.matvec(&u.0)).sub(&theta.mul(u)),
            ModelKind::Diffusion => Field(divergence_matrix(g, &closed_extension(theta)).matvec(&u.0)),
            ModelKind::QuadraticGradientSource => {
                let grad = centered_diff(g, &u.0, (0.0, 0.0));
                Field(lap.matvec(&u.0)).add(&Field(grad.iter().map(|v| v * v).collect())).add(theta)
            }
            ModelKind::CubicSource => Field(lap.matvec(&u.0)).sub(&u.map(|v| self.cubic.phi(v))).sub(theta),
        };
        if self.kind != ModelKind::QuadraticGradientSource {
            if let Some(p) = phi {
                out.axpy(1.0, p);
            }
        }
        Ok(out)
    }

    /// Jacobian `∂f/∂u` at `(θ, u)`.
    pub fn f_u(&self, g: &Grid, theta: &Field, u: &Field) -> Tridiag {
        let mut m = match self.kind {
            ModelKind::Diffusion => divergence_matrix(g, &closed_extension(theta)),
            _ => laplacian_matrix(g),
        };
        match self.kind {
            ModelKind::Potential => {
                for i in 0..g.n {
                    m.diag[i] -= theta.0[i];
                }
            }
            ModelKind::Diffusion => {}
            ModelKind::QuadraticGradientSource => {
                let grad = centered_diff(g, &u.0, (0.0, 0.0));
                let s = 1.0 / g.h;
                for (i, gi) in grad.iter().enumerate() {
                    // d/du of (D_c u)_i² is 2 (D_c u)_i D_c
                    if i > 0 {
                        m.lower[i] -= gi * s;
                    }
                    if i + 1 < g.n {
                        m.upper[i] += gi * s;
                    }
                }
            }
            ModelKind::CubicSource => {
                for i in 0..g.n {
                    m.diag[i] -= self.cubic.dphi(u.0[i]);
                }
            }
        }
        m
    }

    /// Directional derivative `(∂f/∂θ) h` at state `u`.
    pub fn f_theta(&self, g: &Grid, u: &Field, h: &Field) -> Field {
        match self.kind {
            ModelKind::Potential => h.mul(u).scale(-1.0),
            ModelKind::Diffusion => Field(divergence_matrix(g, &closed_extension(h)).matvec(&u.0)),
            ModelKind::QuadraticGradientSource => h.clone(),
            ModelKind::CubicSource => h.scale(-1.0),
        }
    }

    /// Transpose `(∂f/∂θ)ᵀ p` at state `u`, with respect to the Euclidean pairing.
    pub fn f_theta_transpose(&self, g: &Grid, u: &Field, p: &Field) -> Field {
        match self.kind {
            ModelKind::Potential => p.mul(u).scale(-1.0),
            ModelKind::Diffusion => {
                let du = forward_diff(g, &u.0);
                let dp = forward_diff(g, &p.0);
                let prod: Vec<f64> = du.iter().zip(&dp).map(|(a, b)| -a * b).collect();
                closed_extension_transpose(&prod)
            }
            ModelKind::QuadraticGradientSource => p.clone(),
            ModelKind::CubicSource => p.scale(-1.0),
        }
    }
}

/// Extends interior values to the boundary nodes by constant copy (`n+2` values).
pub fn closed_extension(theta: &Field) -> Vec<f64> {
    let n = theta.len();
    let mut out = Vec::with_capacity(n + 2);
    out.push(theta.0[0]);
    out.extend_from_slice(&theta.0);
    out.push(theta.0[n - 1]);
    out
}

/// Transpose of `θ ↦ half_node_means(closed_extension(θ))`, mapping `n+1` edge values to `n` nodes.
pub fn closed_extension_transpose(edges: &[f64]) -> Field {
    let n = edges.len() - 1;
    let mut out: Vec<f64> = (0..n).map(|i| 0.5 * (edges[i] + edges[i + 1])).collect();
    out[0] += 0.5 * edges[0];
    out[n - 1] += 0.5 * edges[n];
    Field(out)
}

/// Forward map `θ ↦ u = S(θ)`.
pub fn forward_solve(spec: &ProblemSpec, theta: &Field, g: &Grid, ta: &TimeAxis) -> Result<Trajectory> {
    spec.validate(g, ta)?;
    spec.check_admissible(g, theta)?;
    match spec.kind {
        ModelKind::Potential | ModelKind::Diffusion => solve_linear_parabolic_with(g, ta, &spec.u0, |k| {
            let (diffusion, reaction) = match spec.kind {
                ModelKind::Potential => (DiffusionTerm::Unit, Some(theta.clone())),
                _ => (DiffusionTerm::Variable(closed_extension(theta)), None),
            };
            Ok(StepCoefficients {
                diffusion,
                reaction,
                drift: None,
                rhs: spec.phi.at(k).cloned(),
                boundary: (0.0, 0.0),
            })
        }),
        ModelKind::QuadraticGradientSource | ModelKind::CubicSource => {
            let mut frames = Vec::with_capacity(ta.n_steps + 1);
            frames.push(spec.u0.clone());
            for k in 1..=ta.n_steps {
                let prev = &frames[k - 1];
                let (u, _) = newton_parabolic_step(
                    g,
                    ta.dt,
                    |u| spec.f_eval(g, theta, u, k),
                    |u| Ok(spec.f_u(g, theta, u)),
                    prev,
                    prev,
                    spec.newton.tol,
                    spec.newton.max_iter,
                )
                .map_err(|e| e.at_step(k))?;
                frames.push(u);
            }
            Ok(Trajectory { axis: *ta, frames })
        }
    }
}

/// Solves the quadratic-gradient model through `U = e^u`, which satisfies
/// `U̇ - ΔU - θU = 0`, `U = 1` on the boundary, `U(0) = e^{u₀}`.
pub fn forward_solve_exp_transform(spec: &ProblemSpec, theta: &Field, g: &Grid, ta: &TimeAxis) -> Result<Trajectory> {
    if spec.kind != ModelKind::QuadraticGradientSource {
        return Err(Error::InvalidArgument("exp transform applies to the quadratic gradient model only".into()));
    }
    spec.validate(g, ta)?;
    spec.check_admissible(g, theta)?;
    let big_u0 = spec.u0.map(f64::exp);
    let co = StepCoefficients {
        diffusion: DiffusionTerm::Unit,
        reaction: Some(theta.scale(-1.0)),
        drift: None,
        rhs: None,
        boundary: (1.0, 1.0),
    };
    let mut frames = Vec::with_capacity(ta.n_steps + 1);
    frames.push(spec.u0.clone());
    let mut big_u = big_u0;
    for k in 1..=ta.n_steps {
        big_u = implicit_euler_step(g, ta.dt, &co, &big_u).map_err(|e| e.at_step(k))?;
        let min_value = big_u.min();
        if !(min_value > spec.positivity_floor) {
            return Err(Error::PositivityLost { frame: k, min_value });
        }
        frames.push(big_u.map(f64::ln));
    }
    Ok(Trajectory { axis: *ta, frames })
}

/// Derivative of the discrete forward map at `(θ, u = S(θ))`, with cached step matrices.
#[derive(Debug, Clone)]
pub struct Linearization {
    pub spec: ProblemSpec,
    pub grid: Grid,
    pub theta: Field,
    pub base: Trajectory,
    /// `A_k = I/dt - ∂f/∂u(θ, u_k)` for `k = 1..N` (index `k-1`).
    steps: Vec<Tridiag>,
    steps_t: Vec<Tridiag>,
}

impl Linearization {
    pub fn new(spec: &ProblemSpec, theta: &Field, base: Trajectory, g: &Grid) -> Result<Self> {
        let ta = base.axis;
        spec.validate(g, &ta)?;
        base.check(g, &ta)?;
        g.check(&theta.0)?;
        let steps: Vec<Tridiag> = (1..=ta.n_steps)
            .map(|k| {
                let mut m = spec.f_u(g, theta, &base.frames[k]);
                for i in 0..g.n {
                    m.lower[i] = -m.lower[i];
                    m.diag[i] = 1.0 / ta.dt - m.diag[i];
                    m.upper[i] = -m.upper[i];
                }
                m
            })
            .collect();
        let steps_t = steps.iter().map(Tridiag::transpose).collect();
        Ok(Self {
            spec: spec.clone(),
            grid: *g,
            theta: theta.clone(),
            base,
            steps,
            steps_t,
        })
    }

    /// Forward solve at `θ` followed by [`Linearization::new`].
    pub fn at(spec: &ProblemSpec, theta: &Field, g: &Grid, ta: &TimeAxis) -> Result<Self> {
        let base = forward_solve(spec, theta, g, ta)?;
        Self::new(spec, theta, base, g)
    }

    pub fn axis(&self) -> TimeAxis {
        self.base.axis
    }

    /// Solves `A_k z_k = z_{k-1}/dt + r_k`, `z_0 = 0`, for sources `r_1..r_N`.
    pub fn solve_with_sources(&self, sources: &[Field]) -> Result<Trajectory> {
        let ta = self.axis();
        if sources.len() != ta.n_steps {
            return Err(Error::ShapeMismatch {
                expected: ta.n_steps,
                got: sources.len(),
            });
        }
        let mut frames = Vec::with_capacity(ta.n_steps + 1);
        frames.push(self.grid.zeros());
        for k in 1..=ta.n_steps {
            let mut rhs = frames[k - 1].scale(1.0 / ta.dt);
            rhs.axpy(1.0, &sources[k - 1]);
            let z = self.steps[k - 1].solve(&rhs.0).map_err(|e| e.at_step(k))?;
            frames.push(Field(z));
        }
        Ok(Trajectory { axis: ta, frames })
    }

    /// `z = S'(θ) h`.
    pub fn apply(&self, h: &Field) -> Result<Trajectory> {
        self.grid.check(&h.0)?;
        let sources: Vec<Field> = (1..=self.axis().n_steps)
            .map(|k| self.spec.f_theta(&self.grid, &self.base.frames[k], h))
            .collect();
        self.solve_with_sources(&sources)
    }

    /// Backward adjoint march `A_kᵀ p_k = w_k + p_{k+1}/dt`, `p_{N+1} = 0`.
    ///
    /// Returns `p_1..p_N` (index `k-1`); `w.frames[0]` is ignored.
    pub fn adjoint_states(&self, w: &Trajectory) -> Result<Vec<Field>> {
        let ta = self.axis();
        w.check(&self.grid, &ta)?;
        self.adjoint_states_from(&w.frames[1..])
    }

    /// As [`Linearization::adjoint_states`] with loads `w_1..w_N` given directly.
    pub fn adjoint_states_from(&self, loads: &[Field]) -> Result<Vec<Field>> {
        let ta = self.axis();
        let n_steps = ta.n_steps;
        if loads.len() != n_steps {
            return Err(Error::ShapeMismatch {
                expected: n_steps,
                got: loads.len(),
            });
        }
        let mut p = vec![self.grid.zeros(); n_steps];
        let mut next = self.grid.zeros();
        for k in (1..=n_steps).rev() {
            let mut rhs = loads[k - 1].clone();
            rhs.axpy(1.0 / ta.dt, &next);
            let pk = Field(self.steps_t[k - 1].solve(&rhs.0).map_err(|e| e.at_step(k))?);
            next = pk.clone();
            p[k - 1] = pk;
        }
        Ok(p)
    }

    /// `S'(θ)* w` with `𝒴` pairing `Σ_{k≥1} dt h Σ_i` and `X = L²`.
    pub fn adjoint(&self, w: &Trajectory) -> Result<Field> {
        let p = self.adjoint_states(w)?;
        Ok(self.assemble_gradient(&p))
    }

    /// `dt Σ_k (∂f/∂θ)ᵀ p_k`.
    pub fn assemble_gradient(&self, p: &[Field]) -> Field {
        let ta = self.axis();
        let mut g = self.grid.zeros();
        for (k, pk) in p.iter().enumerate() {
            let contrib = self.spec.f_theta_transpose(&self.grid, &self.base.frames[k + 1], pk);
            g.axpy(ta.dt, &contrib);
        }
        g
    }
}

pub fn linearized_solve(
    spec: &ProblemSpec,
    theta: &Field,
    u_base: &Trajectory,
    h: &Field,
    g: &Grid,
    ta: &TimeAxis,
) -> Result<Trajectory> {
    u_base.check(g, ta)?;
    Linearization::new(spec, theta, u_base.clone(), g)?.apply(h)
}

pub fn adjoint_solve(
    spec: &ProblemSpec,
    theta: &Field,
    u_base: &Trajectory,
    w: &Trajectory,
    g: &Grid,
    ta: &TimeAxis,
) -> Result<Field> {
    u_base.check(g, ta)?;
    Linearization::new(spec, theta, u_base.clone(), g)?.adjoint(w)
}
