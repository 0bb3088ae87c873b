//! Validation and execution of configured tasks.

use std::env;
use std::fs;
use std::path::{Path, PathBuf};

use chrono::{SecondsFormat, Utc};
use parcone::embedding::{check, corollary_q_range, IndexQuery, Problem, XRat};
use parcone::grid::Field;
use parcone::models::{forward_solve, forward_solve_exp_transform};
use parcone::operators::{apply_f, Observation};
use parcone::presets::Instance;
use parcone::random::{rng, smooth_field};
use parcone::regularization::{add_noise, landweber_aao, landweber_reduced, IterationLog, LandweberConfig};
use parcone::tcc::{adjoint_test, taylor_test, tcc_estimate_aao, tcc_estimate_reduced, SampleConfig};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{ExperimentConfig, FieldSpec, Method, Scalar, TccParams, Task};
use crate::error::CliError;
use crate::report::*;

/// Environment variable naming the root of generated run directories.
pub const OUT_ENV: &str = "PARCONE_OUT";
pub const DEFAULT_OUT_ROOT: &str = "parcone-runs";

/// A config that passed every check that does not require solving.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub config: ExperimentConfig,
    pub instance: Option<Instance>,
    pub out_dir: PathBuf,
    pub input_hash: String,
    query: Option<IndexQuery>,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub out_dir: PathBuf,
    pub record: RunRecord,
    /// Short machine-readable result, also printed by the command line.
    pub summary: Value,
}

pub fn input_hash(cfg: &ExperimentConfig) -> Result<String, CliError> {
    Ok(sha256_hex(cfg.to_toml()?.as_bytes()))
}

fn out_root() -> PathBuf {
    env::var_os(OUT_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_ROOT))
}

/// `--out`, else `output_dir` (relative to the output root), else
/// `<root>/<task>-<first 12 hex digits of the input hash>`.
pub fn resolve_out_dir(cfg: &ExperimentConfig, hash: &str, out: Option<&Path>) -> PathBuf {
    if let Some(o) = out {
        return o.to_path_buf();
    }
    match &cfg.output_dir {
        Some(d) if d.is_absolute() => d.clone(),
        Some(d) => out_root().join(d),
        None => out_root().join(format!("{}-{}", cfg.task.name(), &hash[..12])),
    }
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Validation(msg.into())
}

fn query_from_map(map: &std::collections::BTreeMap<String, Scalar>) -> Result<IndexQuery, CliError> {
    Ok(IndexQuery::from_pairs(map.iter().map(|(k, v)| (k.clone(), v.to_string())))?)
}

fn sample_config(inst: &Instance, p: &TccParams) -> SampleConfig {
    let mut s = SampleConfig::new(inst.theta0.clone(), p.rho, p.n_pairs, p.seed);
    s.y_norm_q = p.y_norm_q;
    s.denominator_floor = p.denominator_floor;
    s
}

fn landweber_config(task: &Task) -> Option<LandweberConfig> {
    match task {
        Task::Invert {
            delta,
            noise_seed: _,
            mu,
            tau,
            max_iter,
            residual_target,
            seed,
            method: _,
        } => Some(LandweberConfig {
            mu: *mu,
            tau: *tau,
            max_iter: *max_iter,
            delta: *delta,
            seed: *seed,
            residual_target: *residual_target,
            ..LandweberConfig::default()
        }),
        _ => None,
    }
}

fn theta_or(inst: &Instance, spec: &Option<FieldSpec>, fallback: &Field, what: &str) -> Result<Field, CliError> {
    match spec {
        Some(s) => {
            let t = s.sample(&inst.grid, what)?;
            inst.spec.check_admissible(&inst.grid, &t)?;
            Ok(t)
        }
        None => Ok(fallback.clone()),
    }
}

/// Checks the config and creates the run directory. Nothing is solved here.
pub fn prepare(config: ExperimentConfig, out: Option<&Path>) -> Result<Prepared, CliError> {
    let instance = match (&config.problem, config.task.needs_problem()) {
        (Some(p), true) => Some(p.build()?),
        (None, true) => return Err(invalid(format!("task {} needs a [problem] table", config.task.name()))),
        (_, false) => None,
    };
    let mut query = None;
    match &config.task {
        Task::Solve { theta, exp_transform } => {
            let inst = instance.as_ref().expect("checked above");
            theta_or(inst, theta, &inst.theta_true, "theta")?;
            if *exp_transform && inst.spec.kind != parcone::models::ModelKind::QuadraticGradientSource {
                return Err(invalid("exp_transform applies to the quadratic gradient model only"));
            }
        }
        Task::Invert { .. } => landweber_config(&config.task).expect("invert task").validate()?,
        Task::Tcc(p) | Task::AaoTcc(p) => sample_config(instance.as_ref().expect("checked above"), p).validate()?,
        Task::AdjointTest { n_trials, theta, .. } => {
            if *n_trials == 0 {
                return Err(invalid("n_trials must be at least 1"));
            }
            let inst = instance.as_ref().expect("checked above");
            theta_or(inst, theta, &inst.theta0, "theta")?;
        }
        Task::TaylorTest { t_list, theta, .. } => {
            if t_list.len() < 3 {
                return Err(invalid("t_list needs at least 3 entries"));
            }
            if t_list.windows(2).any(|w| !(w[1] < w[0])) || t_list.iter().any(|t| !(*t > 0.0)) {
                return Err(invalid("t_list must be positive and strictly decreasing"));
            }
            let inst = instance.as_ref().expect("checked above");
            theta_or(inst, theta, &inst.theta0, "theta")?;
        }
        Task::CheckEmbedding { query: q } => query = Some(query_from_map(q)?),
        Task::CorollaryRange { problem, d, p } => {
            problem.parse::<Problem>()?;
            p.to_string().parse::<XRat>()?;
            if !(1..=4).contains(d) {
                return Err(invalid(format!("d must be one of 1, 2, 3, 4, got {d}")));
            }
        }
    }
    let input_hash = input_hash(&config)?;
    let out_dir = resolve_out_dir(&config, &input_hash, out);
    fs::create_dir_all(&out_dir).map_err(|e| invalid(format!("cannot create output directory {}: {e}", out_dir.display())))?;
    let probe = out_dir.join(".parcone-write-test");
    fs::write(&probe, b"")
        .and_then(|_| fs::remove_file(&probe))
        .map_err(|e| invalid(format!("output directory {} is not writable: {e}", out_dir.display())))?;
    Ok(Prepared {
        config,
        instance,
        out_dir,
        input_hash,
        query,
    })
}

struct Produced {
    artifacts: Vec<Artifact>,
    summary: Value,
}

fn field_rows(inst: &Instance, f: &Field) -> Vec<FieldRow> {
    inst.grid.nodes().into_iter().zip(&f.0).map(|(x, &value)| FieldRow { x, value }).collect()
}

fn iteration_plot(log: &IterationLog) -> Vec<PlotRow> {
    let mut rows: Vec<PlotRow> = log
        .records
        .iter()
        .map(|r| PlotRow {
            series: "residual".into(),
            x: r.k as f64,
            y: r.residual,
        })
        .collect();
    rows.extend(log.records.iter().filter_map(|r| {
        r.error.map(|e| PlotRow {
            series: "error".into(),
            x: r.k as f64,
            y: e,
        })
    }));
    rows
}

fn summary_of<T: Serialize>(v: &T) -> Result<Value, CliError> {
    Ok(serde_json::to_value(v)?)
}

fn execute(p: &Prepared) -> Result<Produced, CliError> {
    let task = &p.config.task;
    if let Some(q) = &p.query {
        let verdict = check(q)?;
        let summary = summary_of(&verdict)?;
        return Ok(Produced {
            artifacts: vec![Artifact::json("verdict.json", &verdict)?],
            summary,
        });
    }
    if let Task::CorollaryRange { problem, d, p: pv } = task {
        let prob: Problem = problem.parse()?;
        let range = corollary_q_range(prob, *d as i128, pv.to_string().parse()?)?;
        let out = json!({ "problem": problem, "d": d, "p": pv.to_string(), "range": range });
        return Ok(Produced {
            artifacts: vec![Artifact::json("range.json", &out)?],
            summary: out,
        });
    }
    let inst = p.instance.as_ref().expect("prepared task has an instance");
    let (spec, g, ta) = (&inst.spec, &inst.grid, &inst.axis);
    match task {
        Task::Solve { theta, exp_transform } => {
            let th = theta_or(inst, theta, &inst.theta_true, "theta")?;
            let u = if *exp_transform {
                forward_solve_exp_transform(spec, &th, g, ta)?
            } else {
                forward_solve(spec, &th, g, ta)?
            };
            let xs = g.nodes();
            let rows: Vec<TrajectoryRow> = u
                .frames
                .iter()
                .enumerate()
                .flat_map(|(k, f)| {
                    let t = ta.t(k);
                    xs.iter().zip(&f.0).map(move |(&x, &v)| TrajectoryRow { step: k, t, x, u: v })
                })
                .collect();
            let summary = json!({
                "model": spec.kind.name(),
                "n_interior": g.n,
                "n_steps": ta.n_steps,
                "max_abs": u.max_abs(),
                "final_max_abs": u.frames.last().map(|f| f.max_abs()),
            });
            Ok(Produced {
                artifacts: vec![
                    Artifact::csv("trajectory.csv", &TRAJECTORY_HEADER, &rows)?,
                    Artifact::json("summary.json", &summary)?,
                ],
                summary,
            })
        }
        Task::Invert { method, noise_seed, .. } => {
            let cfg = landweber_config(task).expect("invert task");
            let y = apply_f(spec, &inst.theta_true, g, ta)?;
            let y_delta: Observation = add_noise(g, &y, cfg.delta, *noise_seed)?;
            let (theta, log) = match method {
                Method::Reduced => landweber_reduced(spec, g, ta, &y_delta, &cfg, &inst.theta0, Some(&inst.theta_true))?,
                Method::Aao => {
                    let ((theta, _u), log) = landweber_aao(spec, g, ta, &y_delta, &cfg, &inst.theta0, None, Some(&inst.theta_true))?;
                    (theta, log)
                }
            };
            let last = log.records.last();
            let summary = json!({
                "method": method,
                "stop_reason": log.stop_reason,
                "stop_index": log.stop_index(),
                "final_residual": log.final_residual(),
                "final_error": last.and_then(|r| r.error),
                "delta": cfg.delta,
                "tau": cfg.tau,
                "mu": log.mu,
                "operator_norm": log.operator_norm,
            });
            Ok(Produced {
                artifacts: vec![
                    Artifact::csv("iterations.csv", &ITERATION_HEADER, &iteration_rows(&log))?,
                    Artifact::csv("theta.csv", &FIELD_HEADER, &field_rows(inst, &theta))?,
                    Artifact::csv("plot.csv", &PLOT_HEADER, &iteration_plot(&log))?,
                    Artifact::json("summary.json", &summary)?,
                ],
                summary,
            })
        }
        Task::Tcc(params) | Task::AaoTcc(params) => {
            let cfg = sample_config(inst, params);
            let report = match task {
                Task::Tcc(_) => tcc_estimate_reduced(spec, g, ta, &cfg)?,
                _ => tcc_estimate_aao(spec, g, ta, &cfg)?,
            };
            let rows: Vec<PairRow> = report.pairs.iter().map(PairRow::from).collect();
            let n = report.summary.ratios.len();
            let plot: Vec<PlotRow> = report
                .summary
                .ratios
                .iter()
                .enumerate()
                .map(|(i, &r)| PlotRow {
                    series: "ratio_cdf".into(),
                    x: r,
                    y: (i + 1) as f64 / n as f64,
                })
                .collect();
            let summary = json!({
                "label": report.label,
                "max_ratio": report.max_ratio(),
                "quantiles": report.summary.quantiles,
                "attempted": report.attempted,
                "retained": report.retained,
                "skipped": report.skipped,
                "failed": report.failed,
            });
            Ok(Produced {
                artifacts: vec![
                    Artifact::csv("pairs.csv", &PAIR_HEADER, &rows)?,
                    Artifact::csv("plot.csv", &PLOT_HEADER, &plot)?,
                    Artifact::json("report.json", &report)?,
                ],
                summary,
            })
        }
        Task::AdjointTest { n_trials, seed, theta } => {
            let th = theta_or(inst, theta, &inst.theta0, "theta")?;
            let rep = adjoint_test(spec, g, ta, &th, *n_trials, *seed)?;
            let rows: Vec<AdjointRow> = rep
                .trials
                .iter()
                .enumerate()
                .map(|(trial, t)| AdjointRow {
                    trial,
                    lhs: t.lhs,
                    rhs: t.rhs,
                    gap: t.gap,
                })
                .collect();
            let summary = json!({ "n_trials": n_trials, "max_gap": rep.max_gap });
            Ok(Produced {
                artifacts: vec![
                    Artifact::csv("trials.csv", &ADJOINT_HEADER, &rows)?,
                    Artifact::json("summary.json", &summary)?,
                ],
                summary,
            })
        }
        Task::TaylorTest { t_list, seed, theta } => {
            let th = theta_or(inst, theta, &inst.theta0, "theta")?;
            let dir = smooth_field(g, &mut rng(*seed));
            let n = (g.h * dir.dot(&dir)).sqrt();
            let h = dir.scale(1.0 / n);
            let rows = taylor_test(spec, g, ta, &th, &h, t_list)?;
            let csv_rows: Vec<TaylorCsvRow> = rows.iter().map(TaylorCsvRow::from).collect();
            let orders: Vec<f64> = rows.iter().filter_map(|r| r.order).collect();
            let summary = json!({
                "orders": orders,
                "min_order": orders.iter().cloned().fold(f64::INFINITY, f64::min),
            });
            Ok(Produced {
                artifacts: vec![
                    Artifact::csv("taylor.csv", &TAYLOR_HEADER, &csv_rows)?,
                    Artifact::json("summary.json", &summary)?,
                ],
                summary,
            })
        }
        Task::CheckEmbedding { .. } | Task::CorollaryRange { .. } => unreachable!("handled above"),
    }
}

/// Validates, solves and writes the run directory.
pub fn run(config: ExperimentConfig, out: Option<&Path>) -> Result<RunOutcome, CliError> {
    let started_at = now();
    let prepared = prepare(config, out)?;
    let produced = execute(&prepared)?;
    let mut artifacts = vec![Artifact {
        name: CONFIG_FILE.into(),
        bytes: prepared.config.to_toml()?.into_bytes(),
    }];
    artifacts.extend(produced.artifacts);
    let mut record = RunRecord {
        tool_version: env!("CARGO_PKG_VERSION").into(),
        task: prepared.config.task.name().into(),
        config: Some(prepared.config.clone()),
        input_hash: prepared.input_hash.clone(),
        started_at,
        finished_at: String::new(),
        outputs: Vec::new(),
    };
    record.finished_at = now();
    emit_report(&prepared.out_dir, &mut record, &artifacts)?;
    Ok(RunOutcome {
        out_dir: prepared.out_dir,
        record,
        summary: produced.summary,
    })
}

pub fn now() -> String {
    Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true)
}

/// Reads a TOML config file; unreadable or malformed files are validation errors.
pub fn load_config(path: &Path) -> Result<ExperimentConfig, CliError> {
    let text = fs::read_to_string(path).map_err(|e| invalid(format!("cannot read {}: {e}", path.display())))?;
    ExperimentConfig::from_toml(&text)
}
