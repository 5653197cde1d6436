use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use interchain_core::batch::run_seeds;
use interchain_core::runner::{execute_file, replay_diff, LogDiff, EXIT_INVALID, EXIT_OK, EXIT_VIOLATION};
use interchain_core::scenario::{LoadError, ScenarioConfig};

#[derive(Parser)]
#[command(name = "interchain", version, about = "Seeded simulator for gateway-linked blockchain systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write run.log, report and resolver.dump.
    Run {
        scenario: PathBuf,
        /// Overrides the seed in the scenario file.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Parse and validate a scenario, listing every error.
    Validate { scenario: PathBuf },
    /// Compare two event logs; exits 0 iff they are byte-identical.
    Diff { a: PathBuf, b: PathBuf },
    /// Run one scenario under many seeds and summarize the audits.
    Sweep {
        scenario: PathBuf,
        #[arg(long, default_value_t = 0)]
        from: u64,
        #[arg(long, default_value_t = 100)]
        count: u64,
    },
}

fn code(c: i32) -> ExitCode {
    ExitCode::from(c as u8)
}

fn load_or_report(path: &Path) -> Result<ScenarioConfig, ExitCode> {
    ScenarioConfig::load(path).map_err(|e| {
        match &e {
            LoadError::Invalid(errs) => {
                for err in errs {
                    eprintln!("{}: {err}", path.display());
                }
            }
            other => eprintln!("{}: {other}", path.display()),
        }
        code(if matches!(e, LoadError::Io(_)) { EXIT_VIOLATION } else { EXIT_INVALID })
    })
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Run { scenario, seed, out } => match execute_file(&scenario, seed, &out) {
            Ok(x) => {
                for a in x.report.audits.iter().filter(|a| !a.passed()) {
                    eprintln!("audit {} failed: {} violation(s)", a.name, a.violation_count);
                    for v in &a.violations {
                        eprintln!("  {v}");
                    }
                }
                for e in &x.report.errors {
                    eprintln!("error: {e}");
                }
                println!(
                    "{} seed={} final_tick={} records={} {}",
                    x.report.scenario,
                    x.report.seed,
                    x.report.final_tick,
                    x.report.log_records,
                    if x.exit_code == EXIT_OK { "PASS" } else { "FAIL" }
                );
                code(x.exit_code)
            }
            Err(e) => {
                eprintln!("{}: {e}", scenario.display());
                code(e.exit_code())
            }
        },
        Command::Validate { scenario } => match load_or_report(&scenario) {
            Ok(cfg) => {
                println!("{}: ok ({} chains, horizon {})", cfg.name, cfg.chains.len(), cfg.horizon);
                code(EXIT_OK)
            }
            Err(c) => c,
        },
        Command::Diff { a, b } => {
            let read = |p: &PathBuf| fs::read_to_string(p).map_err(|e| eprintln!("{}: {e}", p.display()));
            let (Ok(la), Ok(lb)) = (read(&a), read(&b)) else { return code(EXIT_INVALID) };
            match replay_diff(&la, &lb) {
                LogDiff::Identical => code(EXIT_OK),
                LogDiff::Divergent { line, a, b } => {
                    println!("line {line}:\n< {a}\n> {b}");
                    code(EXIT_VIOLATION)
                }
                LogDiff::MissingTail { line } => {
                    println!("logs agree up to line {}; one ends there", line - 1);
                    code(EXIT_VIOLATION)
                }
            }
        }
        Command::Sweep { scenario, from, count } => {
            let cfg = match load_or_report(&scenario) {
                Ok(c) => c,
                Err(c) => return c,
            };
            let seeds: Vec<u64> = (from..from + count).collect();
            match run_seeds(|_| cfg.clone(), &seeds) {
                Ok(rs) => {
                    let failed: Vec<_> = rs.iter().filter(|r| !r.passed).collect();
                    for r in &failed {
                        println!("seed {} failed: {}", r.seed, r.failed_audits.join(","));
                    }
                    println!("{}/{} seeds passed", rs.len() - failed.len(), rs.len());
                    code(if failed.is_empty() { EXIT_OK } else { EXIT_VIOLATION })
                }
                Err(e) => {
                    eprintln!("{e}");
                    code(EXIT_INVALID)
                }
            }
        }
    }
}
