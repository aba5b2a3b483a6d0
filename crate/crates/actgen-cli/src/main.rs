use std::path::{Path, PathBuf};
use std::process::ExitCode;

use actgen_cli::{config, runner, verify};

const USAGE: &str = "usage:
  actgen run <config> [--jobs N] [--out DIR] [--seed-offset K]
  actgen verify [--seed S]

Runs (method x seed) campaign cells from a config file, writing one metrics
CSV per cell plus summary.csv, or executes the built-in property-check
suite. The ACTGEN_OUT_DIR environment variable sets the default output
directory.";

fn fail_usage(message: &str) -> ExitCode {
    eprintln!("error: {message}");
    eprintln!("{USAGE}");
    ExitCode::from(1)
}

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    match args.first().map(String::as_str) {
        Some("run") => cmd_run(&args[1..]),
        Some("verify") => cmd_verify(&args[1..]),
        Some("--help") | Some("-h") | Some("help") => {
            println!("{USAGE}");
            ExitCode::SUCCESS
        }
        Some(other) => fail_usage(&format!("unknown command {other:?}")),
        None => fail_usage("missing command"),
    }
}

fn cmd_run(args: &[String]) -> ExitCode {
    let mut config_path: Option<PathBuf> = None;
    let mut jobs = 1usize;
    let mut out_override: Option<PathBuf> = None;
    let mut seed_offset = 0u64;
    let mut it = args.iter();
    while let Some(arg) = it.next() {
        match arg.as_str() {
            "--jobs" => match it.next().and_then(|v| v.parse().ok()) {
                Some(n) if n >= 1 => jobs = n,
                _ => return fail_usage("--jobs needs a positive integer"),
            },
            "--out" => match it.next() {
                Some(v) => out_override = Some(PathBuf::from(v)),
                None => return fail_usage("--out needs a directory"),
            },
            "--seed-offset" => match it.next().and_then(|v| v.parse().ok()) {
                Some(k) => seed_offset = k,
                None => return fail_usage("--seed-offset needs an integer"),
            },
            other if config_path.is_none() && !other.starts_with('-') => {
                config_path = Some(PathBuf::from(other));
            }
            other => return fail_usage(&format!("unexpected argument {other:?}")),
        }
    }
    let Some(config_path) = config_path else {
        return fail_usage("missing config file");
    };
    let mut cfg = match config::parse_config(Path::new(&config_path)) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {}: {e}", config_path.display());
            return ExitCode::from(1);
        }
    };
    if let Some(dir) = out_override {
        cfg.out_dir = dir;
    }
    if seed_offset != 0 {
        for s in cfg.seeds.iter_mut() {
            *s = s.wrapping_add(seed_offset);
        }
    }
    match runner::run(&cfg, jobs) {
        Ok(outcome) => {
            println!(
                "{} cell(s) ok, {} failed; results in {}",
                outcome.cells_ok,
                outcome.cells_failed,
                outcome.out_dir.display()
            );
            ExitCode::from(outcome.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn cmd_verify(args: &[String]) -> ExitCode {
    let mut seed = 0u64;
    let mut it = args.iter();
    while let Some(arg) = it.next() {
        match arg.as_str() {
            "--seed" => match it.next().and_then(|v| v.parse().ok()) {
                Some(s) => seed = s,
                None => return fail_usage("--seed needs an integer"),
            },
            other => return fail_usage(&format!("unexpected argument {other:?}")),
        }
    }
    match verify::run_suite(seed) {
        Ok(outcome) => {
            verify::print_reports(&outcome);
            if outcome.all_passed() {
                println!("all checks passed");
                ExitCode::SUCCESS
            } else {
                ExitCode::from(2)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
