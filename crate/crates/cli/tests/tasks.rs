use std::path::Path;

use parcone::models::ModelKind;
use parcone_cli::config::{ExperimentConfig, FieldSpec, Method, ProblemConfig, Scalar, TccParams, Task};
use parcone_cli::error::CliError;
use parcone_cli::report::{read_csv, Artifact, IterationRow, PairRow, TaylorCsvRow, PAIR_HEADER};
use parcone_cli::tasks::{prepare, run};

fn cfg(kind: ModelKind, task: Task) -> ExperimentConfig {
    ExperimentConfig {
        output_dir: None,
        problem: Some(ProblemConfig::new(kind)),
        task,
    }
}

fn run_in(c: ExperimentConfig, dir: &Path) -> parcone_cli::tasks::RunOutcome {
    run(c, Some(dir)).unwrap_or_else(|e| panic!("{e}"))
}

#[test]
fn empty_pair_list_gives_header_only_csv() {
    let a = Artifact::csv::<PairRow>("pairs.csv", &PAIR_HEADER, &[]).unwrap();
    assert_eq!(String::from_utf8(a.bytes.clone()).unwrap(), "pair_index,seed_offset,numerator,denominator,ratio,skipped_flag\n");
    assert!(read_csv::<PairRow>(&a.bytes).unwrap().is_empty());
}

#[test]
fn pair_csv_round_trips() {
    let rows = vec![
        PairRow {
            pair_index: 0,
            seed_offset: 0,
            numerator: 1.25e-7,
            denominator: 3.5e-4,
            ratio: Some(1.25e-7 / 3.5e-4),
            skipped_flag: false,
        },
        PairRow {
            pair_index: 1,
            seed_offset: 2,
            numerator: 0.0,
            denominator: 0.0,
            ratio: None,
            skipped_flag: true,
        },
    ];
    let a = Artifact::csv("pairs.csv", &PAIR_HEADER, &rows).unwrap();
    assert_eq!(read_csv::<PairRow>(&a.bytes).unwrap(), rows);
}

#[test]
fn config_toml_round_trips() {
    let mut problem = ProblemConfig::new(ModelKind::CubicSource);
    problem.u0 = Some(FieldSpec::Sine {
        offset: 0.0,
        amplitude: 2.0,
        mode: 1,
    });
    problem.theta_true = Some(FieldSpec::Constant(0.5));
    problem.cubic = Some("ginzburg_landau".into());
    let tasks = vec![
        Task::Invert {
            method: Method::Aao,
            delta: 1e-3,
            noise_seed: 3,
            mu: None,
            tau: 1.5,
            max_iter: 10,
            residual_target: Some(1e-6),
            seed: 1,
        },
        Task::AaoTcc(TccParams {
            rho: 0.25,
            n_pairs: 5,
            seed: 9,
            y_norm_q: 2.0,
            denominator_floor: Some(1e-14),
        }),
        Task::CheckEmbedding {
            query: [
                ("problem".to_string(), Scalar::Text("nonlinear_a".into())),
                ("case".to_string(), Scalar::Text("b".into())),
                ("d".to_string(), Scalar::Int(2)),
                ("p".to_string(), Scalar::Float(2.5)),
            ]
            .into_iter()
            .collect(),
        },
        Task::CorollaryRange {
            problem: "aprob".into(),
            d: 3,
            p: Scalar::Text("inf".into()),
        },
    ];
    for task in tasks {
        let c = ExperimentConfig {
            output_dir: Some("x/y".into()),
            problem: Some(problem.clone()),
            task,
        };
        let text = c.to_toml().unwrap();
        assert_eq!(ExperimentConfig::from_toml(&text).unwrap(), c, "{text}");
    }
}

#[test]
fn wrong_field_length_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let mut c = cfg(ModelKind::Potential, Task::Solve { theta: None, exp_transform: false });
    c.problem.as_mut().unwrap().theta_true = Some(FieldSpec::Values(vec![1.0; 5]));
    assert!(matches!(prepare(c, Some(tmp.path())), Err(CliError::Validation(_))));
}

#[test]
fn diffusion_coefficient_below_floor_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let mut c = cfg(ModelKind::Diffusion, Task::Solve { theta: None, exp_transform: false });
    c.problem.as_mut().unwrap().theta_true = Some(FieldSpec::Constant(-1.0));
    let e = prepare(c, Some(tmp.path())).unwrap_err();
    assert_eq!(e.exit_code(), 2);
}

#[test]
fn exp_transform_outside_quadratic_gradient_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let c = cfg(ModelKind::Potential, Task::Solve { theta: None, exp_transform: true });
    assert!(matches!(prepare(c, Some(tmp.path())), Err(CliError::Validation(_))));
}

#[test]
fn solve_writes_every_frame() {
    let tmp = tempfile::tempdir().unwrap();
    let c = cfg(ModelKind::QuadraticGradientSource, Task::Solve { theta: None, exp_transform: true });
    let o = run_in(c, tmp.path());
    let text = std::fs::read_to_string(o.out_dir.join("trajectory.csv")).unwrap();
    assert_eq!(text.lines().count(), 1 + 21 * 63);
}

#[test]
fn exact_inversion_reaches_target() {
    let tmp = tempfile::tempdir().unwrap();
    let c = cfg(
        ModelKind::Potential,
        Task::Invert {
            method: Method::Reduced,
            delta: 0.0,
            noise_seed: 0,
            mu: None,
            tau: 1.5,
            max_iter: 20000,
            residual_target: Some(1e-5),
            seed: 0,
        },
    );
    let o = run_in(c, tmp.path());
    assert_eq!(o.summary["stop_reason"], "target_reached");
    let rows: Vec<IterationRow> = read_csv(&std::fs::read(o.out_dir.join("iterations.csv")).unwrap()).unwrap();
    assert!(rows.windows(2).all(|w| w[1].residual <= w[0].residual));
    assert!(rows.iter().all(|r| r.time_ms.is_none()));
}

#[test]
fn adjoint_and_taylor_tasks() {
    let tmp = tempfile::tempdir().unwrap();
    let a = run_in(
        cfg(ModelKind::CubicSource, Task::AdjointTest { n_trials: 4, seed: 1, theta: None }),
        &tmp.path().join("adj"),
    );
    assert!(a.summary["max_gap"].as_f64().unwrap() <= 1e-10);
    let t = run_in(
        cfg(
            ModelKind::Diffusion,
            Task::TaylorTest {
                t_list: vec![1e-1, 1e-2, 1e-3],
                seed: 2,
                theta: None,
            },
        ),
        &tmp.path().join("tay"),
    );
    let rows: Vec<TaylorCsvRow> = read_csv(&std::fs::read(t.out_dir.join("taylor.csv")).unwrap()).unwrap();
    assert_eq!(rows.len(), 3);
    assert!(rows[0].order.is_none());
    let bad = cfg(
        ModelKind::Diffusion,
        Task::TaylorTest {
            t_list: vec![1e-2, 1e-1, 1e-3],
            seed: 2,
            theta: None,
        },
    );
    assert!(matches!(prepare(bad, Some(tmp.path())), Err(CliError::Validation(_))));
}

#[test]
fn corollary_range_contains_two_in_low_dimension() {
    let tmp = tempfile::tempdir().unwrap();
    let c = ExperimentConfig {
        output_dir: None,
        problem: None,
        task: Task::CorollaryRange {
            problem: "cprob".into(),
            d: 3,
            p: Scalar::Int(2),
        },
    };
    let o = run_in(c, tmp.path());
    assert!(!o.summary["range"].is_null());
    assert!(o.out_dir.join("range.json").exists());
}

#[test]
fn shipped_configs_run() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    let tmp = tempfile::tempdir().unwrap();
    let mut n = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let c = parcone_cli::tasks::load_config(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        let name = path.file_stem().unwrap().to_owned();
        run(c, Some(&tmp.path().join(name))).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        n += 1;
    }
    assert!(n >= 8);
}
