use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use parcone::embedding::{check, IndexQuery};
use parcone::suite;
use parcone_cli::error::{CliError, EXIT_CRITERIA_FAILED, EXIT_OK};
use parcone_cli::report::{emit_report, sha256_hex, Artifact, RunRecord};
use parcone_cli::tasks::{self, load_config};
use serde_json::json;

#[derive(Parser)]
#[command(name = "parcone", version, about = "Tangential cone experiments for parabolic parameter identification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the task described by a TOML config.
    Run {
        config: PathBuf,
        /// Run directory, overriding the config and PARCONE_OUT.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the acceptance battery and print one line per criterion.
    PaperSuite {
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check an index query given as key=value pairs, e.g. `problem=cprob d=3 p=2 q=2 s=0 t=2`.
    CheckEmbedding {
        #[arg(required = true)]
        pairs: Vec<String>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    };
    ExitCode::from(code as u8)
}

fn dispatch(cmd: Command) -> Result<i32, CliError> {
    match cmd {
        Command::Run { config, out } => {
            let cfg = load_config(&config)?;
            let outcome = tasks::run(cfg, out.as_deref())?;
            println!("{}", serde_json::to_string_pretty(&outcome.summary)?);
            eprintln!("wrote {}", outcome.out_dir.display());
            Ok(EXIT_OK)
        }
        Command::PaperSuite { out } => paper_suite(out),
        Command::CheckEmbedding { pairs } => {
            let q = IndexQuery::parse(&pairs.join(" "))?;
            let verdict = check(&q)?;
            println!("{}", serde_json::to_string_pretty(&verdict)?);
            Ok(EXIT_OK)
        }
    }
}

fn paper_suite(out: Option<PathBuf>) -> Result<i32, CliError> {
    let started_at = tasks::now();
    if let Some(dir) = &out {
        std::fs::create_dir_all(dir)
            .map_err(|e| CliError::Validation(format!("cannot create output directory {}: {e}", dir.display())))?;
    }
    let results = suite::run_all();
    for r in &results {
        println!("{}", r.line());
    }
    println!();
    println!("{:>3}  {:<40} {:>6} {:>8}", "id", "criterion", "result", "seconds");
    for r in &results {
        println!(
            "{:>3}  {:<40} {:>6} {:>8.1}",
            r.id,
            r.name,
            if r.passed { "pass" } else { "FAIL" },
            r.seconds
        );
    }
    let passed = results.iter().filter(|r| r.passed).count();
    println!("{passed} of {} criteria passed", results.len());
    if let Some(dir) = out {
        let body = json!({
            "passed": passed,
            "total": results.len(),
            "criteria": results,
        });
        let artifacts = [Artifact::json("suite.json", &body)?];
        let mut record = RunRecord {
            tool_version: env!("CARGO_PKG_VERSION").into(),
            task: "paper-suite".into(),
            config: None,
            input_hash: sha256_hex(format!("paper-suite seed={}", suite::SUITE_SEED).as_bytes()),
            started_at,
            finished_at: tasks::now(),
            outputs: Vec::new(),
        };
        emit_report(&dir, &mut record, &artifacts)?;
    }
    Ok(if passed == results.len() { EXIT_OK } else { EXIT_CRITERIA_FAILED })
}
