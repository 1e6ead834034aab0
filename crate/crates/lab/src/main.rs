use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use clap::{Parser, Subcommand};
use rayon::prelude::*;

use pelab::{load_scenario, run_scenario, validate_scenario, LabError, Outcome, RunOptions, BUILTIN};

/// Exit codes: 0 all checks passed, 1 a check failed, 2 bad config or
/// usage, 3 the time budget cut a run short (no failures among what ran).
#[derive(Parser)]
#[command(name = "pelab", version, about = "Run entropy experiment scenarios")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run scenarios (paths or `builtin:<name>`); each writes to <out-dir>/<name>/.
    Run {
        #[arg(required = true)]
        configs: Vec<String>,
        /// Overrides the scenario root seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "pelab-out")]
        out_dir: PathBuf,
        /// Skip remaining experiments once this much time has passed.
        #[arg(long)]
        budget_seconds: Option<f64>,
    },
    /// List the built-in scenarios.
    ListScenarios,
    /// Check a scenario file without running it.
    Validate { config: String },
}

fn fail(e: &LabError) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(2)
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::ListScenarios => {
            for (name, text) in BUILTIN {
                let about = pelab::Scenario::from_toml(text)
                    .ok()
                    .and_then(|s| s.description)
                    .unwrap_or_default();
                println!("builtin:{name:<18} {about}");
            }
            ExitCode::SUCCESS
        }
        Command::Validate { config } => match load_scenario(&config).and_then(|s| validate_scenario(&s)) {
            Ok(()) => {
                println!("{config}: ok");
                ExitCode::SUCCESS
            }
            Err(e) => fail(&e),
        },
        Command::Run {
            configs,
            seed,
            out_dir,
            budget_seconds,
        } => {
            if budget_seconds.is_some_and(|b| !(b >= 0.0 && b.is_finite())) {
                eprintln!("error: --budget-seconds must be a nonnegative number");
                return ExitCode::from(2);
            }
            let mut scenarios = Vec::new();
            for c in &configs {
                match load_scenario(c).and_then(|s| validate_scenario(&s).map(|_| s)) {
                    Ok(s) => scenarios.push(s),
                    Err(e) => return fail(&e),
                }
            }
            let opts = RunOptions {
                seed,
                budget: budget_seconds.map(Duration::from_secs_f64),
            };
            let mut results: Vec<(String, Result<Outcome, LabError>)> = scenarios
                .par_iter()
                .map(|s| (s.name.clone(), run_scenario(s, &opts)))
                .collect();
            results.sort_by(|a, b| a.0.cmp(&b.0));
            let (mut failed, mut incomplete) = (false, false);
            for (name, r) in results {
                let out = match r.and_then(|o| o.write(&out_dir.join(&name)).map(|_| o)) {
                    Ok(o) => o,
                    Err(e) => return fail(&e),
                };
                let rep = &out.report;
                for e in &rep.experiments {
                    for c in &e.checks {
                        println!(
                            "{name} #{} {}: {} {}",
                            e.index,
                            e.kind,
                            if c.pass { "PASS" } else { "FAIL" },
                            c.name
                        );
                    }
                    if let Some(err) = &e.error {
                        println!("{name} #{} {}: FAIL {err}", e.index, e.kind);
                    }
                }
                let status = match (rep.passed, rep.complete) {
                    (false, _) => "FAILED",
                    (true, false) => "INCOMPLETE",
                    (true, true) => "passed",
                };
                println!("{name}: {status} -> {}", out_dir.join(&name).display());
                failed |= !rep.passed;
                incomplete |= !rep.complete;
            }
            if failed {
                ExitCode::from(1)
            } else if incomplete {
                ExitCode::from(3)
            } else {
                ExitCode::SUCCESS
            }
        }
    }
}
