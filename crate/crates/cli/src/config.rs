//! Experiment configuration (TOML).

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::PathBuf;

use parcone::grid::{Field, Grid};
use parcone::models::{CubicPreset, ModelKind, Source};
use parcone::presets::{instance, range_midpoint, Instance, DEFAULT_N, DEFAULT_STEPS, DEFAULT_T};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Run directory; relative paths resolve against the output root.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub problem: Option<ProblemConfig>,
    pub task: Task,
}

/// Grid field given as a constant, explicit interior values, or
/// `offset + amplitude·sin(mode·πx)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FieldSpec {
    Constant(f64),
    Values(Vec<f64>),
    Sine {
        #[serde(default)]
        offset: f64,
        amplitude: f64,
        #[serde(default = "one")]
        mode: u32,
    },
}

fn one() -> u32 {
    1
}

impl FieldSpec {
    pub fn sample(&self, g: &Grid, what: &str) -> Result<Field, CliError> {
        match self {
            FieldSpec::Constant(c) => Ok(g.constant(*c)),
            FieldSpec::Values(v) => {
                if v.len() != g.n {
                    return Err(CliError::Validation(format!("{what}: expected {} values, got {}", g.n, v.len())));
                }
                if v.iter().any(|x| !x.is_finite()) {
                    return Err(CliError::Validation(format!("{what}: values must be finite")));
                }
                Ok(Field(v.clone()))
            }
            FieldSpec::Sine { offset, amplitude, mode } => {
                let k = *mode as f64;
                Ok(g.sample(|x| offset + amplitude * (k * PI * x).sin()))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub kind: ModelKind,
    #[serde(default = "default_n")]
    pub n_interior: usize,
    #[serde(default = "default_t")]
    pub t_final: f64,
    #[serde(default = "default_steps")]
    pub n_steps: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u0: Option<FieldSpec>,
    /// Stationary source `φ`; ignored by the quadratic gradient model.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<FieldSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta_true: Option<FieldSpec>,
    /// Ball centre and initial guess; defaults to the midpoint of the range of `theta_true`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta0: Option<FieldSpec>,
    /// One of `cube`, `ginzburg_landau`, `zeldovich`, `bistable`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cubic: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a_lower: Option<f64>,
}

fn default_n() -> usize {
    DEFAULT_N
}

fn default_t() -> f64 {
    DEFAULT_T
}

fn default_steps() -> usize {
    DEFAULT_STEPS
}

impl ProblemConfig {
    pub fn new(kind: ModelKind) -> Self {
        ProblemConfig {
            kind,
            n_interior: DEFAULT_N,
            t_final: DEFAULT_T,
            n_steps: DEFAULT_STEPS,
            u0: None,
            source: None,
            theta_true: None,
            theta0: None,
            cubic: None,
            a_lower: None,
        }
    }

    /// Starts from the default instance of the model and applies the overrides.
    pub fn build(&self) -> Result<Instance, CliError> {
        let mut inst = instance(self.kind, self.n_interior, self.n_steps, self.t_final)?;
        let g = inst.grid;
        if let Some(u0) = &self.u0 {
            inst.spec.u0 = u0.sample(&g, "u0")?;
        }
        if let Some(phi) = &self.source {
            inst.spec.phi = Source::Stationary(phi.sample(&g, "source")?);
        }
        if let Some(name) = &self.cubic {
            inst.spec.cubic =
                CubicPreset::by_name(name).ok_or_else(|| CliError::Validation(format!("unknown cubic preset {name:?}")))?;
        }
        if let Some(a) = self.a_lower {
            if !(a > 0.0) {
                return Err(CliError::Validation(format!("a_lower must be positive, got {a}")));
            }
            inst.spec.a_lower = a;
        }
        if let Some(t) = &self.theta_true {
            inst.theta_true = t.sample(&g, "theta_true")?;
            inst.theta0 = range_midpoint(&g, &inst.theta_true);
        }
        if let Some(t) = &self.theta0 {
            inst.theta0 = t.sample(&g, "theta0")?;
        }
        inst.spec.validate(&g, &inst.axis)?;
        inst.spec.check_admissible(&g, &inst.theta_true)?;
        inst.spec.check_admissible(&g, &inst.theta0)?;
        Ok(inst)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    #[default]
    Reduced,
    Aao,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TccParams {
    pub rho: f64,
    #[serde(default = "default_pairs")]
    pub n_pairs: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "two")]
    pub y_norm_q: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub denominator_floor: Option<f64>,
}

fn default_pairs() -> usize {
    200
}

fn two() -> f64 {
    2.0
}

/// Scalar entry of an index query, kept as written.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Scalar {
    Int(i64),
    Float(f64),
    Text(String),
}

impl std::fmt::Display for Scalar {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Scalar::Int(i) => write!(f, "{i}"),
            Scalar::Float(x) => write!(f, "{x}"),
            Scalar::Text(s) => f.write_str(s),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Task {
    Solve {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        theta: Option<FieldSpec>,
        /// Solve the quadratic gradient model through `U = e^u`.
        #[serde(default)]
        exp_transform: bool,
    },
    Invert {
        #[serde(default)]
        method: Method,
        #[serde(default)]
        delta: f64,
        #[serde(default)]
        noise_seed: u64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        mu: Option<f64>,
        #[serde(default = "default_tau")]
        tau: f64,
        #[serde(default = "default_max_iter")]
        max_iter: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        residual_target: Option<f64>,
        #[serde(default)]
        seed: u64,
    },
    Tcc(TccParams),
    AaoTcc(TccParams),
    AdjointTest {
        #[serde(default = "default_trials")]
        n_trials: usize,
        #[serde(default)]
        seed: u64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        theta: Option<FieldSpec>,
    },
    TaylorTest {
        #[serde(default = "default_t_list")]
        t_list: Vec<f64>,
        #[serde(default)]
        seed: u64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        theta: Option<FieldSpec>,
    },
    /// Index query given as `problem = "cprob"`, `d = 3`, `p = 2`, ...
    CheckEmbedding {
        #[serde(flatten)]
        query: BTreeMap<String, Scalar>,
    },
    CorollaryRange {
        problem: String,
        d: i64,
        p: Scalar,
    },
}

fn default_tau() -> f64 {
    1.5
}

fn default_max_iter() -> usize {
    1000
}

fn default_trials() -> usize {
    32
}

fn default_t_list() -> Vec<f64> {
    vec![1e-1, 1e-2, 1e-3, 1e-4]
}

impl Task {
    pub fn name(&self) -> &'static str {
        match self {
            Task::Solve { .. } => "solve",
            Task::Invert { .. } => "invert",
            Task::Tcc(_) => "tcc",
            Task::AaoTcc(_) => "aao-tcc",
            Task::AdjointTest { .. } => "adjoint-test",
            Task::TaylorTest { .. } => "taylor-test",
            Task::CheckEmbedding { .. } => "check-embedding",
            Task::CorollaryRange { .. } => "corollary-range",
        }
    }

    pub fn needs_problem(&self) -> bool {
        !matches!(self, Task::CheckEmbedding { .. } | Task::CorollaryRange { .. })
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Validation(format!("config: {e}")))
    }

    pub fn to_toml(&self) -> Result<String, CliError> {
        toml::to_string(self).map_err(|e| CliError::Validation(format!("config serialization: {e}")))
    }
}
