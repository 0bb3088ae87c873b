//! Empirical tangential cone constants and derivative checks.
//!
//! Reported constants are observed maxima over a finite sample and therefore
//! lower bounds for the true supremum over the ball.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{gram_apply, Field, Grid, NormKind, WKind};
use crate::models::{forward_solve, Linearization, ModelKind, ParamSpace, ProblemSpec};
use crate::operators::{traj_norm_q, wstar_time_inner, wstar_time_norm, y_inner};
use crate::pde::{TimeAxis, Trajectory};
use crate::random::{rng, smooth_field, smooth_trajectory};

pub const MAX_SAMPLE_ATTEMPTS: usize = 100;

/// Draws `θ⁰ + ρ s g/‖g‖` with `g` a smooth random field and `s ~ U(0,1]`.
///
/// With `lower` set, samples are clipped from below and redrawn if clipping
/// leaves the ball.
pub fn sample_ball(
    g: &Grid,
    theta0: &Field,
    rho: f64,
    seed: u64,
    space: ParamSpace,
    lower: Option<f64>,
) -> Result<Field> {
    if !(rho > 0.0) || !rho.is_finite() {
        return Err(Error::InvalidArgument(format!("rho must be positive, got {rho}")));
    }
    g.check(&theta0.0)?;
    let mut r = rng(seed);
    for _ in 0..MAX_SAMPLE_ATTEMPTS {
        let dir = smooth_field(g, &mut r);
        let s = 1.0 - r.random::<f64>();
        let dn = space.norm(g, &dir)?;
        if !(dn > 0.0) {
            continue;
        }
        let mut step = dir.scale(rho * s / dn);
        let sn = space.norm(g, &step)?;
        if sn > rho {
            step = step.scale(rho / sn * (1.0 - 4.0 * f64::EPSILON));
        }
        let mut theta = theta0.add(&step);
        if let Some(lo) = lower {
            theta = theta.map(|v| v.max(lo));
            if space.norm(g, &theta.sub(theta0))? > rho {
                continue;
            }
        }
        return Ok(theta);
    }
    Err(Error::SamplingExhausted(MAX_SAMPLE_ATTEMPTS))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleConfig {
    pub theta0: Field,
    pub rho: f64,
    pub n_pairs: usize,
    pub seed: u64,
    pub y_norm_q: f64,
    /// Absolute floor; `None` means `1e-12 ‖F(θ⁰)‖_𝒴`.
    pub denominator_floor: Option<f64>,
    pub space: ParamSpace,
}

impl SampleConfig {
    pub fn new(theta0: Field, rho: f64, n_pairs: usize, seed: u64) -> Self {
        Self {
            theta0,
            rho,
            n_pairs,
            seed,
            y_norm_q: 2.0,
            denominator_floor: None,
            space: ParamSpace::L2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rho > 0.0) {
            return Err(Error::InvalidArgument(format!("rho must be positive, got {}", self.rho)));
        }
        if self.n_pairs == 0 {
            return Err(Error::InvalidArgument("n_pairs must be at least 1".into()));
        }
        if self.y_norm_q.is_nan() || self.y_norm_q < 1.0 {
            return Err(Error::InvalidArgument(format!("y_norm_q must be >= 1, got {}", self.y_norm_q)));
        }
        if let Some(f) = self.denominator_floor {
            if !(f > 0.0) {
                return Err(Error::InvalidArgument(format!("denominator_floor must be positive, got {f}")));
            }
        }
        Ok(())
    }

    /// Seeds of the two parameters of pair `i`.
    pub fn pair_seeds(&self, i: usize) -> (u64, u64) {
        let off = 2 * i as u64;
        (self.seed.wrapping_add(off), self.seed.wrapping_add(off + 1))
    }

    pub fn sample_pair(&self, g: &Grid, spec: &ProblemSpec, i: usize) -> Result<(Field, Field)> {
        let lower = (spec.kind == ModelKind::Diffusion).then_some(spec.a_lower);
        let (s1, s2) = self.pair_seeds(i);
        Ok((
            sample_ball(g, &self.theta0, self.rho, s1, self.space, lower)?,
            sample_ball(g, &self.theta0, self.rho, s2, self.space, lower)?,
        ))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairStatus {
    Retained,
    Degenerate,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairRecord {
    pub pair_index: usize,
    pub seed_offset: u64,
    pub numerator: f64,
    pub denominator: f64,
    pub ratio: Option<f64>,
    pub status: PairStatus,
    /// Generalized denominator (all-at-once estimates only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub denominator_gen: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Quantiles {
    pub q50: f64,
    pub q90: f64,
    pub q99: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub model: ModelKind,
    pub n_interior: usize,
    pub h: f64,
    pub t_final: f64,
    pub n_steps: usize,
    pub dt: f64,
    pub seed: u64,
    pub rho: f64,
    pub n_pairs: usize,
    pub y_norm_q: f64,
    pub x_space: ParamSpace,
    pub numerator_norm: String,
    pub denominator_floor: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioSummary {
    /// Retained ratios, sorted ascending.
    pub ratios: Vec<f64>,
    pub max_ratio: Option<f64>,
    pub quantiles: Option<Quantiles>,
}

impl RatioSummary {
    pub fn from_ratios(mut ratios: Vec<f64>) -> Self {
        ratios.sort_by(f64::total_cmp);
        let max_ratio = ratios.last().copied();
        let quantiles = (!ratios.is_empty()).then(|| Quantiles {
            q50: quantile(&ratios, 0.5),
            q90: quantile(&ratios, 0.9),
            q99: quantile(&ratios, 0.99),
        });
        Self {
            ratios,
            max_ratio,
            quantiles,
        }
    }
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TccReport {
    pub label: String,
    pub summary: RatioSummary,
    /// Ratios against the generalized all-at-once denominator.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generalized: Option<RatioSummary>,
    pub attempted: usize,
    pub retained: usize,
    pub skipped: usize,
    pub failed: usize,
    pub pairs: Vec<PairRecord>,
    pub provenance: Provenance,
}

impl TccReport {
    pub fn max_ratio(&self) -> Option<f64> {
        self.summary.max_ratio
    }
}

struct PairOutcome {
    numerator: f64,
    denominator: f64,
    denominator_gen: Option<f64>,
}

fn default_floor(spec: &ProblemSpec, g: &Grid, ta: &TimeAxis, cfg: &SampleConfig) -> Result<f64> {
    match cfg.denominator_floor {
        Some(f) => Ok(f),
        None => {
            let u0 = forward_solve(spec, &cfg.theta0, g, ta)?;
            let n = traj_norm_q(g, &u0, cfg.y_norm_q)?;
            Ok(if n > 0.0 { 1e-12 * n } else { 1e-300 })
        }
    }
}

fn run_pairs(
    label: &str,
    spec: &ProblemSpec,
    g: &Grid,
    ta: &TimeAxis,
    cfg: &SampleConfig,
    numerator_norm: String,
    sample: impl Fn(usize) -> Result<(Field, Field)> + Sync,
    eval: impl Fn(&Field, &Field) -> Result<PairOutcome> + Sync,
) -> Result<TccReport> {
    cfg.validate()?;
    spec.validate(g, ta)?;
    let floor = default_floor(spec, g, ta, cfg)?;
    let pairs: Vec<PairRecord> = (0..cfg.n_pairs)
        .into_par_iter()
        .map(|i| {
            let seed_offset = 2 * i as u64;
            let outcome = sample(i).and_then(|(a, b)| eval(&a, &b));
            match outcome {
                Ok(o) if o.denominator >= floor && o.numerator.is_finite() && o.denominator.is_finite() => PairRecord {
                    pair_index: i,
                    seed_offset,
                    numerator: o.numerator,
                    denominator: o.denominator,
                    ratio: Some(o.numerator / o.denominator),
                    status: PairStatus::Retained,
                    denominator_gen: o.denominator_gen,
                    error: None,
                },
                Ok(o) if o.numerator.is_finite() && o.denominator.is_finite() => PairRecord {
                    pair_index: i,
                    seed_offset,
                    numerator: o.numerator,
                    denominator: o.denominator,
                    ratio: None,
                    status: PairStatus::Degenerate,
                    denominator_gen: o.denominator_gen,
                    error: None,
                },
                Ok(_) => PairRecord {
                    pair_index: i,
                    seed_offset,
                    numerator: f64::NAN,
                    denominator: f64::NAN,
                    ratio: None,
                    status: PairStatus::Failed,
                    denominator_gen: None,
                    error: Some("non-finite norms".into()),
                },
                Err(e) => PairRecord {
                    pair_index: i,
                    seed_offset,
                    numerator: f64::NAN,
                    denominator: f64::NAN,
                    ratio: None,
                    status: PairStatus::Failed,
                    denominator_gen: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();
    let retained: Vec<&PairRecord> = pairs.iter().filter(|p| p.status == PairStatus::Retained).collect();
    let summary = RatioSummary::from_ratios(retained.iter().filter_map(|p| p.ratio).collect());
    let generalized = retained
        .iter()
        .map(|p| p.denominator_gen.map(|d| if d >= floor { Some(p.numerator / d) } else { None }))
        .collect::<Option<Vec<_>>>()
        .map(|v| RatioSummary::from_ratios(v.into_iter().flatten().collect()));
    let count = |s: PairStatus| pairs.iter().filter(|p| p.status == s).count();
    Ok(TccReport {
        label: label.to_string(),
        summary,
        generalized,
        attempted: cfg.n_pairs,
        retained: count(PairStatus::Retained),
        skipped: count(PairStatus::Degenerate),
        failed: count(PairStatus::Failed),
        provenance: Provenance {
            model: spec.kind,
            n_interior: g.n,
            h: g.h,
            t_final: ta.t_final,
            n_steps: ta.n_steps,
            dt: ta.dt,
            seed: cfg.seed,
            rho: cfg.rho,
            n_pairs: cfg.n_pairs,
            y_norm_q: cfg.y_norm_q,
            x_space: cfg.space,
            numerator_norm,
            denominator_floor: floor,
        },
        pairs,
    })
}

/// Numerator and denominator of the reduced cone condition for one pair.
pub fn reduced_pair(spec: &ProblemSpec, g: &Grid, ta: &TimeAxis, theta: &Field, theta_t: &Field, q: f64) -> Result<(f64, f64)> {
    let lin = Linearization::at(spec, theta, g, ta)?;
    let ut = forward_solve(spec, theta_t, g, ta)?;
    let v = lin.base.sub(&ut);
    let z = lin.apply(&theta.sub(theta_t))?;
    Ok((traj_norm_q(g, &v.sub(&z), q)?, traj_norm_q(g, &v, q)?))
}

pub fn tcc_estimate_reduced(spec: &ProblemSpec, g: &Grid, ta: &TimeAxis, cfg: &SampleConfig) -> Result<TccReport> {
    reduced_report(spec, g, ta, cfg, |i| cfg.sample_pair(g, spec, i))
}

/// Reduced estimate on caller-supplied pairs; `cfg.n_pairs` is taken from `pairs`.
pub fn tcc_reduced_on_pairs(spec: &ProblemSpec, g: &Grid, ta: &TimeAxis, cfg: &SampleConfig, pairs: &[(Field, Field)]) -> Result<TccReport> {
    let cfg = SampleConfig {
        n_pairs: pairs.len(),
        ..cfg.clone()
    };
    reduced_report(spec, g, ta, &cfg, |i| Ok(pairs[i].clone()))
}

fn reduced_report(
    spec: &ProblemSpec,
    g: &Grid,
    ta: &TimeAxis,
    cfg: &SampleConfig,
    sample: impl Fn(usize) -> Result<(Field, Field)> + Sync,
) -> Result<TccReport> {
    let q = cfg.y_norm_q;
    run_pairs("reduced", spec, g, ta, cfg, format!("L2(0,T;L^{q})"), sample, |a, b| {
        let (numerator, denominator) = reduced_pair(spec, g, ta, a, b, q)?;
        Ok(PairOutcome {
            numerator,
            denominator,
            denominator_gen: None,
        })
    })
}

/// `r_k = f(θ,u_k) - f(θ̃,ũ_k) - f_θ(θ,u_k)(θ-θ̃) - f_u(θ,u_k)(u_k-ũ_k)` for `k = 1..N`.
pub fn aao_remainder(
    spec: &ProblemSpec,
    g: &Grid,
    theta: &Field,
    u: &Trajectory,
    theta_t: &Field,
    ut: &Trajectory,
) -> Result<Vec<Field>> {
    let dtheta = theta.sub(theta_t);
    (1..=u.axis.n_steps)
        .map(|k| {
            let du = u.frames[k].sub(&ut.frames[k]);
            let f = spec.f_eval(g, theta, &u.frames[k], k)?;
            let ft = spec.f_eval(g, theta_t, &ut.frames[k], k)?;
            let ju = Field(spec.f_u(g, theta, &u.frames[k]).matvec(&du.0));
            Ok(f.sub(&ft).sub(&spec.f_theta(g, &u.frames[k], &dtheta)).sub(&ju))
        })
        .collect()
}

/// Closed form of [`aao_remainder`] for the bilinear models.
pub fn bilinear_remainder(spec: &ProblemSpec, g: &Grid, theta: &Field, u: &Trajectory, theta_t: &Field, ut: &Trajectory) -> Result<Vec<Field>> {
    let dtheta = theta.sub(theta_t);
    (1..=u.axis.n_steps)
        .map(|k| {
            let du = u.frames[k].sub(&ut.frames[k]);
            match spec.kind {
                // -(θ-θ̃)u + θ̃ũ + θ u - θ(u-ũ) reduces to (θ-θ̃)(u-ũ)
                ModelKind::Potential => Ok(dtheta.mul(&du)),
                ModelKind::Diffusion => Ok(spec.f_theta(g, &du, &dtheta).scale(-1.0)),
                _ => Err(Error::InvalidArgument(format!("{} is not bilinear", spec.kind.name()))),
            }
        })
        .collect()
}

pub fn tcc_estimate_aao(spec: &ProblemSpec, g: &Grid, ta: &TimeAxis, cfg: &SampleConfig) -> Result<TccReport> {
    aao_report(spec, g, ta, cfg, |i| cfg.sample_pair(g, spec, i))
}

pub fn tcc_aao_on_pairs(spec: &ProblemSpec, g: &Grid, ta: &TimeAxis, cfg: &SampleConfig, pairs: &[(Field, Field)]) -> Result<TccReport> {
    let cfg = SampleConfig {
        n_pairs: pairs.len(),
        ..cfg.clone()
    };
    aao_report(spec, g, ta, &cfg, |i| Ok(pairs[i].clone()))
}

fn aao_report(
    spec: &ProblemSpec,
    g: &Grid,
    ta: &TimeAxis,
    cfg: &SampleConfig,
    sample: impl Fn(usize) -> Result<(Field, Field)> + Sync,
) -> Result<TccReport> {
    let q = cfg.y_norm_q;
    let w_kind = spec.kind.w_kind();
    run_pairs("aao", spec, g, ta, cfg, format!("L2(0,T;{w_kind:?}*)"), sample, |a, b| {
        let u = forward_solve(spec, a, g, ta)?;
        let ut = forward_solve(spec, b, g, ta)?;
        let r = aao_remainder(spec, g, a, &u, b, &ut)?;
        let numerator = wstar_time_norm(g, ta.dt, &r, w_kind)?;
        let v = u.sub(&ut);
        let denominator = traj_norm_q(g, &v, q)?;
        let df: Vec<Field> = (1..=ta.n_steps)
            .map(|k| Ok(spec.f_eval(g, a, &u.frames[k], k)?.sub(&spec.f_eval(g, b, &ut.frames[k], k)?)))
            .collect::<Result<_>>()?;
        let fw = wstar_time_norm(g, ta.dt, &df, w_kind)?;
        let d0 = v.frames[0].dot(&v.frames[0]) * g.h;
        Ok(PairOutcome {
            numerator,
            denominator,
            denominator_gen: Some((fw * fw + d0 + denominator * denominator).sqrt()),
        })
    })
}

/// Largest singular value of `r ↦ z`, `A_k z_k = z_{k-1}/dt + r_k`, from
/// `L²(0,T;W*)` to `𝒴 = L²(0,T;L²)`, by power iteration on `T*T`.
pub fn linearized_stability_constant(lin: &Linearization, w_kind: WKind, iterations: usize, seed: u64) -> Result<f64> {
    let g = lin.grid;
    let ta = lin.axis();
    let mut r = rng(seed);
    let mut x: Vec<Field> = (0..ta.n_steps).map(|_| smooth_field(&g, &mut r)).collect();
    let gram_kind: NormKind = w_kind.into();
    let mut best: f64 = 0.0;
    for _ in 0..iterations.max(1) {
        let xn = wstar_time_norm(&g, ta.dt, &x, w_kind)?;
        if !(xn > 0.0) {
            break;
        }
        let x_unit: Vec<Field> = x.iter().map(|f| f.scale(1.0 / xn)).collect();
        let z = lin.solve_with_sources(&x_unit)?;
        let zn = y_inner(&g, &z, &z).max(0.0).sqrt();
        best = best.max(zn);
        // (T*w)_k = K p_k / h with p the adjoint states for loads w_k = z_k
        let p = lin.adjoint_states(&z)?;
        x = p
            .iter()
            .map(|pk| Ok(gram_apply(&g, pk, gram_kind)?.scale(1.0 / g.h)))
            .collect::<Result<_>>()?;
    }
    Ok(best)
}

/// `Ĉ_lin` as the maximum of [`linearized_stability_constant`] over the first parameter of each pair.
pub fn stability_constant_over_pairs(spec: &ProblemSpec, g: &Grid, ta: &TimeAxis, cfg: &SampleConfig, iterations: usize) -> Result<f64> {
    let w_kind = spec.kind.w_kind();
    let vals = (0..cfg.n_pairs)
        .into_par_iter()
        .map(|i| {
            let (theta, _) = cfg.sample_pair(g, spec, i)?;
            let lin = Linearization::at(spec, &theta, g, ta)?;
            linearized_stability_constant(&lin, w_kind, iterations, cfg.seed.wrapping_add(i as u64))
        })
        .collect::<Vec<Result<f64>>>();
    Ok(vals.into_iter().filter_map(|v| v.ok()).fold(0.0, f64::max))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdjointTrial {
    pub lhs: f64,
    pub rhs: f64,
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdjointTestReport {
    pub max_gap: f64,
    pub trials: Vec<AdjointTrial>,
}

/// Relative gap `|a - b| / (‖F'h‖‖w‖ + ‖h‖‖F'*w‖)`, zero when both scales vanish.
pub fn relative_gap(a: f64, b: f64, scale: f64) -> f64 {
    if scale == 0.0 {
        (a - b).abs()
    } else {
        (a - b).abs() / scale
    }
}

/// Randomized check of `⟨F'(θ)h, w⟩_𝒴 = ⟨h, F'(θ)*w⟩_X`.
pub fn adjoint_test(spec: &ProblemSpec, g: &Grid, ta: &TimeAxis, theta: &Field, n_trials: usize, seed: u64) -> Result<AdjointTestReport> {
    let lin = Linearization::at(spec, theta, g, ta)?;
    let mut r = rng(seed);
    let mut trials = Vec::with_capacity(n_trials);
    for _ in 0..n_trials {
        let h = smooth_field(g, &mut r);
        let w = smooth_trajectory(g, ta, &mut r);
        trials.push(adjoint_trial(&lin, &h, &w)?);
    }
    let max_gap = trials.iter().fold(0.0f64, |m, t| m.max(t.gap));
    Ok(AdjointTestReport { max_gap, trials })
}

pub fn adjoint_trial(lin: &Linearization, h: &Field, w: &Trajectory) -> Result<AdjointTrial> {
    let g = &lin.grid;
    let z = lin.apply(h)?;
    let adj = lin.adjoint(w)?;
    let lhs = y_inner(g, &z, w);
    let rhs = g.h * h.dot(&adj);
    let yn = |t: &Trajectory| y_inner(g, t, t).max(0.0).sqrt();
    let xn = |f: &Field| (g.h * f.dot(f)).sqrt();
    let scale = yn(&z) * yn(w) + xn(h) * xn(&adj);
    Ok(AdjointTrial {
        lhs,
        rhs,
        gap: relative_gap(lhs, rhs, scale),
    })
}

/// Product-space adjoint check of the all-at-once linearization at `(θ, u)`.
pub fn aao_adjoint_test(spec: &ProblemSpec, g: &Grid, theta: &Field, u: &Trajectory, n_trials: usize, seed: u64) -> Result<f64> {
    use crate::operators::{aao_adjoint, aao_linearized_apply, u_inner, AaoResidual};
    let ta = u.axis;
    let w_kind = spec.kind.w_kind();
    let mut r = rng(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..n_trials {
        let dtheta = smooth_field(g, &mut r);
        let du = smooth_trajectory(g, &ta, &mut r);
        let res = AaoResidual {
            model_part: smooth_trajectory(g, &ta, &mut r).frames[1..].to_vec(),
            init_part: smooth_field(g, &mut r),
            obs_part: smooth_trajectory(g, &ta, &mut r),
        };
        let t = aao_linearized_apply(spec, theta, u, &dtheta, &du, g)?;
        let (at, au) = aao_adjoint(spec, theta, u, &res, g)?;
        let lhs = t.inner(&res, g, w_kind)?;
        let rhs = g.h * dtheta.dot(&at) + u_inner(g, &du, &au);
        let tn = t.norm(g, w_kind)?;
        let rn = res.norm(g, w_kind)?;
        let xn = (g.h * dtheta.dot(&dtheta) + u_inner(g, &du, &du)).sqrt();
        let an = (g.h * at.dot(&at) + u_inner(g, &au, &au)).sqrt();
        worst = worst.max(relative_gap(lhs, rhs, tn * rn + xn * an));
    }
    Ok(worst)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaylorRow {
    pub t: f64,
    pub remainder: f64,
    /// `log(R_{i-1}/R_i)/log(t_{i-1}/t_i)`; absent on the first row.
    pub order: Option<f64>,
}

/// Remainders `‖F(θ+th) - F(θ) - tF'(θ)h‖_𝒴` and observed orders.
pub fn taylor_test(spec: &ProblemSpec, g: &Grid, ta: &TimeAxis, theta: &Field, h: &Field, t_list: &[f64]) -> Result<Vec<TaylorRow>> {
    if t_list.len() < 3 {
        return Err(Error::InvalidArgument("taylor test needs at least 3 step sizes".into()));
    }
    if t_list.windows(2).any(|w| !(w[1] < w[0])) || t_list.iter().any(|t| !(*t > 0.0)) {
        return Err(Error::InvalidArgument("step sizes must be positive and decreasing".into()));
    }
    let lin = Linearization::at(spec, theta, g, ta)?;
    let z = lin.apply(h)?;
    let mut rows: Vec<TaylorRow> = Vec::with_capacity(t_list.len());
    for &t in t_list {
        let mut th = theta.clone();
        th.axpy(t, h);
        let ut = forward_solve(spec, &th, g, ta)?;
        let mut rem = ut.sub(&lin.base);
        rem.axpy(-t, &z);
        let remainder = y_inner(g, &rem, &rem).max(0.0).sqrt();
        let order = rows.last().and_then(|prev| {
            (prev.remainder > 0.0 && remainder > 0.0).then(|| (prev.remainder / remainder).ln() / (prev.t / t).ln())
        });
        rows.push(TaylorRow { t, remainder, order });
    }
    Ok(rows)
}

/// Maximum of `‖F'(θ)h‖_𝒴` over `n_probe` random unit-`L²` directions.
pub fn fprime_norm_probe(lin: &Linearization, n_probe: usize, seed: u64) -> Result<f64> {
    let g = lin.grid;
    let mut r = rng(seed);
    let mut best: f64 = 0.0;
    for _ in 0..n_probe {
        let h = smooth_field(&g, &mut r);
        let hn = (g.h * h.dot(&h)).sqrt();
        let z = lin.apply(&h.scale(1.0 / hn))?;
        best = best.max(y_inner(&g, &z, &z).sqrt());
    }
    Ok(best)
}

/// Power-iteration estimate of `‖F'(θ)‖_{L²→𝒴}`.
pub fn fprime_norm_power(lin: &Linearization, iterations: usize, seed: u64) -> Result<f64> {
    let g = lin.grid;
    let mut x = smooth_field(&g, &mut rng(seed));
    let mut best: f64 = 0.0;
    for _ in 0..iterations.max(1) {
        let xn = (g.h * x.dot(&x)).sqrt();
        if !(xn > 0.0) {
            break;
        }
        x = x.scale(1.0 / xn);
        let z = lin.apply(&x)?;
        best = best.max(y_inner(&g, &z, &z).sqrt());
        x = lin.adjoint(&z)?;
    }
    Ok(best)
}

/// Largest radius in `rhos` for which every forward solve of the sampled pairs succeeds.
pub fn largest_solvable_rho(spec: &ProblemSpec, g: &Grid, ta: &TimeAxis, cfg: &SampleConfig, rhos: &[f64]) -> Option<f64> {
    let mut ok: Vec<f64> = rhos
        .iter()
        .copied()
        .filter(|&rho| {
            let c = SampleConfig { rho, ..cfg.clone() };
            (0..c.n_pairs).into_par_iter().all(|i| {
                c.sample_pair(g, spec, i)
                    .and_then(|(a, b)| {
                        forward_solve(spec, &a, g, ta)?;
                        forward_solve(spec, &b, g, ta)
                    })
                    .is_ok()
            })
        })
        .collect();
    ok.sort_by(f64::total_cmp);
    ok.last().copied()
}

/// `‖r‖_{L²(0,T;W*)}` and `‖z‖_𝒴` with `z` the auxiliary solve driven by `r`.
pub fn auxiliary_solve_norms(lin: &Linearization, r: &[Field], w_kind: WKind) -> Result<(f64, f64)> {
    let g = lin.grid;
    let z = lin.solve_with_sources(r)?;
    let rn = wstar_time_inner(&g, lin.axis().dt, r, r, w_kind)?.max(0.0).sqrt();
    Ok((rn, y_inner(&g, &z, &z).max(0.0).sqrt()))
}
