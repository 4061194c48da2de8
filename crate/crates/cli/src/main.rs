use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use log::error;
use nlpme_cli::output::{provenance_line, sha256_hex, FailureRecord};
use nlpme_cli::{execute, parse_config_str, CliError, Context};

/// Solve nonlocal porous-medium type equations and run verification studies.
#[derive(Debug, Parser)]
#[command(name = "nlpme", version)]
struct Args {
    /// TOML run description.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (NLPME_OUT takes precedence).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed for randomized studies.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Override every solver tolerance.
    #[arg(long)]
    tol: Option<f64>,
}

const DEFAULT_SEED: u64 = 1;

fn fail(dir: &std::path::Path, record: FailureRecord, code: u8) -> ExitCode {
    eprintln!("{}", record.message.trim_end());
    if let Err(e) = record.write(dir) {
        eprintln!("could not write failure record: {e}");
    }
    ExitCode::from(code)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args = Args::parse();
    let env_out = std::env::var_os("NLPME_OUT")
        .filter(|v| !v.is_empty())
        .map(PathBuf::from);
    let early_out = env_out
        .clone()
        .or_else(|| args.out.clone())
        .unwrap_or_else(|| PathBuf::from("out"));

    let record = |kind: &str, message: String, hash: Option<String>| FailureRecord {
        command: String::new(),
        kind: kind.into(),
        message,
        step: None,
        failed_checks: Vec::new(),
        config_sha256: hash,
    };

    if let Some(n) = args.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            return fail(&early_out, record("config", format!("--threads: {e}"), None), 2);
        }
    }
    let bytes = match std::fs::read(&args.config) {
        Ok(b) => b,
        Err(e) => {
            return fail(
                &early_out,
                record("config", format!("{}: {e}", args.config.display()), None),
                2,
            )
        }
    };
    let hash = sha256_hex(&bytes);
    let text = String::from_utf8_lossy(&bytes);
    let mut cfg = match parse_config_str(&text) {
        Ok(c) => c,
        Err(e) => return fail(&early_out, record("config", e.to_string(), Some(hash)), 2),
    };
    if let Some(tol) = args.tol {
        if !(tol > 0.0 && tol.is_finite()) {
            return fail(
                &early_out,
                record("config", format!("--tol must be positive, got {tol}"), Some(hash)),
                2,
            );
        }
        cfg.set_tolerance(tol);
    }
    let out = env_out
        .or(args.out)
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    let seed = args.seed.or(cfg.seed).unwrap_or(DEFAULT_SEED);
    let command = cfg.command.name().to_string();
    let ctx = Context {
        provenance: provenance_line(&command, &hash, seed),
        out: out.clone(),
        seed,
    };

    let failure = |kind: &str, message: String, step: Option<usize>, failed: Vec<String>| FailureRecord {
        command: command.clone(),
        kind: kind.into(),
        message,
        step,
        failed_checks: failed,
        config_sha256: Some(hash.clone()),
    };
    match execute(&cfg, &ctx) {
        Ok(outcome) if outcome.failed.is_empty() => {
            let _ = std::fs::remove_file(out.join("failure.json"));
            for f in &outcome.files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Ok(outcome) => {
            for f in &outcome.files {
                println!("{}", f.display());
            }
            let msg = format!("{command}: checks failed: {}", outcome.failed.join(", "));
            fail(&out, failure("checks", msg, None, outcome.failed), 1)
        }
        Err(CliError::Run { step, error: e }) => {
            error!("run failed at step {step}");
            fail(
                &out,
                failure(
                    "run",
                    format!("run aborted at step {step}: {e}"),
                    Some(step),
                    Vec::new(),
                ),
                1,
            )
        }
        Err(e) => fail(&out, failure("error", e.to_string(), None, Vec::new()), 1),
    }
}
