use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use parcone_cli::report::RunRecord;
use serde_json::Value;

fn parcone(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_parcone"))
        .args(args)
        .current_dir(cwd)
        .env_remove("PARCONE_OUT")
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p.to_string_lossy().into_owned()
}

fn record(dir: &Path) -> RunRecord {
    serde_json::from_slice(&fs::read(dir.join("run.json")).unwrap()).unwrap()
}

const EMBEDDING: &str = r#"
[task]
kind = "check-embedding"
problem = "cprob"
d = 3
p = 2
q = 2
s = 0
t = 2
m = 2
n = 2
"#;

const TCC: &str = r#"
[problem]
kind = "potential"

[task]
kind = "tcc"
rho = 0.5
n_pairs = 40
seed = 7
"#;

#[test]
fn embedding_config_is_admissible() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "e.toml", EMBEDDING);
    let out = tmp.path().join("run");
    let o = parcone(&["run", &cfg, "--out", out.to_str().unwrap()], tmp.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v: Value = serde_json::from_slice(&fs::read(out.join("verdict.json")).unwrap()).unwrap();
    assert_eq!(v["admissible"], Value::Bool(true));
    assert_eq!(v["problem"].as_str().map(|s| s.is_empty()), Some(false));
}

#[test]
fn too_few_nodes_is_a_validation_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "bad.toml",
        "[problem]\nkind = \"potential\"\nn_interior = 1\n\n[task]\nkind = \"solve\"\n",
    );
    let out = tmp.path().join("run");
    let o = parcone(&["run", &cfg, "--out", out.to_str().unwrap()], tmp.path());
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("grid"), "{err}");
    assert!(!out.exists(), "nothing is written for an invalid config");
}

#[test]
fn unknown_field_and_bad_query_exit_two() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "u.toml", "[task]\nkind = \"solve\"\nbogus = 1\n");
    assert_eq!(parcone(&["run", &cfg], tmp.path()).status.code(), Some(2));
    let o = parcone(&["check-embedding", "problem=cprob", "d=3", "p=2", "q=2", "s=0"], tmp.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("missing key"));
    let o = parcone(&["check-embedding", "problem=cprob", "d=3", "p=2", "q=2", "s=0", "t=2"], tmp.path());
    assert_eq!(o.status.code(), Some(0));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["admissible"], Value::Bool(true));
}

#[test]
fn unwritable_output_dir_is_rejected_before_solving() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "t.toml", TCC);
    let blocker = write(tmp.path(), "file", "");
    let out = format!("{blocker}/run");
    let o = parcone(&["run", &cfg, "--out", &out], tmp.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("output directory"));
}

#[test]
fn tcc_writes_pairs_and_report_deterministically() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "t.toml", TCC);
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    for d in [&a, &b] {
        let o = parcone(&["run", &cfg, "--out", d.to_str().unwrap()], tmp.path());
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let rows: Vec<parcone_cli::report::PairRow> = parcone_cli::report::read_csv(&fs::read(a.join("pairs.csv")).unwrap()).unwrap();
    assert_eq!(rows.len(), 40);
    let report: Value = serde_json::from_slice(&fs::read(a.join("report.json")).unwrap()).unwrap();
    let max = report["summary"]["max_ratio"].as_f64().unwrap();
    let row_max = rows.iter().filter_map(|r| r.ratio).fold(0.0, f64::max);
    assert_eq!(max, row_max);

    let (ra, rb) = (record(&a), record(&b));
    assert_eq!(ra.input_hash, rb.input_hash);
    assert_eq!(ra.outputs, rb.outputs);
    for e in &ra.outputs {
        let bytes = fs::read(a.join(&e.file)).unwrap();
        assert_eq!(parcone_cli::report::sha256_hex(&bytes), e.sha256);
        assert_eq!(bytes.len(), e.bytes);
    }
}

#[test]
fn default_run_directory_uses_env_root_and_hash() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "e.toml", EMBEDDING);
    let root = tmp.path().join("runs");
    let o = Command::new(env!("CARGO_BIN_EXE_parcone"))
        .args(["run", &cfg])
        .env("PARCONE_OUT", &root)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    let dirs: Vec<_> = fs::read_dir(&root).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    assert_eq!(dirs.len(), 1);
    let rec = record(&root.join(&dirs[0]));
    assert_eq!(dirs[0], format!("check-embedding-{}", &rec.input_hash[..12]));
}
