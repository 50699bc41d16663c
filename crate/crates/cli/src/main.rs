use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::Parser;
use serde::Serialize;

use dpcluster_cli::auditor::run_audit;
use dpcluster_cli::config::{Cli, Command};
use dpcluster_cli::generate::{generate, GeneratorSpec};
use dpcluster_cli::ingest::{export_csv, validate_file};
use dpcluster_cli::report::{run_experiment, to_json};
use dpcluster_cli::{HarnessError, Result};

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let body = serde_json::json!({
                "error": { "kind": err.kind(), "message": err.to_string() }
            });
            eprintln!("{}", serde_json::to_string_pretty(&body).unwrap());
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Cluster(mut cfg) => {
            // one fully logged run; batches belong to `bench`
            cfg.trials = 1;
            let out = cfg.out.clone();
            emit(&run_experiment(&cfg)?, &out)
        }
        Command::Bench(cfg) => {
            let out = cfg.out.clone();
            emit(&run_experiment(&cfg)?, &out)
        }
        Command::Audit(args) => {
            let out = args.config.out.clone();
            emit(&run_audit(&args)?, &out)
        }
        Command::Generate(args) => {
            let spec = GeneratorSpec::parse(&args.spec)?;
            let inst = generate(&spec, args.seed, 1, 1.0)?;
            export_csv(&inst, &args.out)
        }
        Command::Validate(args) => {
            let summary = validate_file(&args.input, args.format)?;
            emit(&summary, &None)
        }
    }
}

fn emit<T: Serialize>(value: &T, out: &Option<PathBuf>) -> Result<()> {
    let json = to_json(value)?;
    match out {
        Some(path) => write_file(path, &json),
        None => {
            print!("{json}");
            Ok(())
        }
    }
}

fn write_file(path: &Path, content: &str) -> Result<()> {
    fs::write(path, content)
        .map_err(|e| HarnessError::Io { path: path.display().to_string(), source: e })
}
