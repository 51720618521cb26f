//! `regtv` command-line front end.
//!
//! JSON goes to stdout, diagnostics to stderr. Exit status: 0 on success or a
//! passing verdict, 1 on a failing verdict, 2 on usage or input errors.

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::error::Error;
use crate::montecarlo::{ensemble_path, run_experiment, ExperimentName, ExperimentSpec};
use crate::oracle::{dp_optimal, exhaustive_optimal, EXHAUSTIVE_MAX_INTERIOR};
use crate::path::{PhiResult, SampledPath};
use crate::stoppart::{phi_fast, scan_stops};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// Agreement required between the two solvers.
const SOLVER_TOL: f64 = 1e-9;

#[derive(Debug, Parser)]
#[command(
    name = "regtv",
    version,
    about = "Regularized total variation of sampled signals"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Solver {
    Fast,
    Dp,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Compute the regularized total variation of a CSV signal.
    #[command(allow_negative_numbers = true)]
    Phi {
        #[arg(long, value_parser = positive)]
        lambda: f64,
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = Solver::Fast)]
        solver: Solver,
        /// Write the stopping-time trace as JSON.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Exact dynamic-programming solver, optionally cross-checked.
    #[command(allow_negative_numbers = true)]
    Oracle {
        #[arg(long, value_parser = positive)]
        lambda: f64,
        #[arg(long)]
        input: PathBuf,
        /// Compare against the linear-time solver (and brute force on small inputs).
        #[arg(long)]
        check: bool,
    },
    /// Write seeded Brownian paths as CSV files.
    Simulate {
        /// Steps per path over the whole horizon.
        #[arg(long)]
        steps: usize,
        #[arg(long, value_parser = positive)]
        horizon: f64,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        paths: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a named Monte Carlo experiment and print its report.
    #[command(allow_negative_numbers = true)]
    Experiment {
        #[arg(long, value_parser = experiment_name)]
        name: ExperimentName,
        #[arg(long, value_parser = positive)]
        lambda: f64,
        #[arg(long)]
        paths: usize,
        /// Grid steps per unit time.
        #[arg(long)]
        steps: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long, value_parser = positive)]
        mu: Option<f64>,
        #[arg(long = "L")]
        l: Option<u64>,
        #[arg(long, value_parser = positive)]
        horizon: Option<f64>,
        /// Worker threads; changes wall time only.
        #[arg(long)]
        workers: Option<usize>,
    },
}

fn positive(s: &str) -> Result<f64, String> {
    let x: f64 = s.parse().map_err(|_| format!("`{s}` is not a number"))?;
    if x.is_finite() && x > 0.0 {
        Ok(x)
    } else {
        Err(format!("must be positive, got {s}"))
    }
}

fn experiment_name(s: &str) -> Result<ExperimentName, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

enum Failure {
    Usage(String),
    Verdict,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

fn load(input: &Path) -> Result<SampledPath, Failure> {
    let file =
        File::open(input).map_err(|e| Failure::Usage(format!("{}: {e}", input.display())))?;
    SampledPath::read_csv(BufReader::new(file))
        .map_err(|e| Failure::Usage(format!("{}: {e}", input.display())))
}

fn result_json(r: &PhiResult) -> serde_json::Value {
    json!({
        "value": r.value,
        "k": r.k(),
        "partition": r.partition.interior(),
    })
}

fn emit(out: &mut dyn Write, value: &impl serde::Serialize) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Failure::Usage(e.to_string()))?;
    writeln!(out, "{text}").map_err(|e| Failure::Usage(e.to_string()))
}

fn execute(cli: Cli, out: &mut dyn Write) -> Result<(), Failure> {
    match cli.command {
        Command::Phi {
            lambda,
            input,
            solver,
            trace,
        } => {
            let path = load(&input)?;
            let result = match solver {
                Solver::Fast => phi_fast(&path, lambda)?,
                Solver::Dp => dp_optimal(&path, lambda)?,
            };
            if let Some(trace_path) = trace {
                let trace = scan_stops(&path, lambda)?;
                let text = serde_json::to_string_pretty(&trace.to_json())
                    .map_err(|e| Failure::Usage(e.to_string()))?;
                fs::write(&trace_path, text + "\n")
                    .map_err(|e| Failure::Usage(format!("{}: {e}", trace_path.display())))?;
            }
            emit(out, &result_json(&result))
        }
        Command::Oracle {
            lambda,
            input,
            check,
        } => {
            let path = load(&input)?;
            let dp = dp_optimal(&path, lambda)?;
            let mut report = result_json(&dp);
            let mut agree = true;
            if check {
                let fast = phi_fast(&path, lambda)?;
                agree &= (fast.value - dp.value).abs() <= SOLVER_TOL;
                let mut cross = json!({ "fast_value": fast.value });
                if path.len() - 2 <= EXHAUSTIVE_MAX_INTERIOR {
                    let ex = exhaustive_optimal(&path, lambda)?;
                    agree &= (ex.value - dp.value).abs() <= SOLVER_TOL;
                    cross["exhaustive_value"] = json!(ex.value);
                }
                cross["agree"] = json!(agree);
                report["cross_check"] = cross;
            }
            emit(out, &report)?;
            if agree {
                Ok(())
            } else {
                Err(Failure::Verdict)
            }
        }
        Command::Simulate {
            steps,
            horizon,
            seed,
            paths,
            out: dir,
        } => {
            if steps == 0 || paths == 0 {
                return Err(Failure::Usage(
                    "--steps and --paths must be positive".into(),
                ));
            }
            fs::create_dir_all(&dir)
                .map_err(|e| Failure::Usage(format!("{}: {e}", dir.display())))?;
            let mut files = Vec::with_capacity(paths);
            for i in 0..paths {
                let path = ensemble_path(steps, horizon, seed, i as u64)?;
                let name = dir.join(format!("path_{i:05}.csv"));
                let file = File::create(&name)
                    .map_err(|e| Failure::Usage(format!("{}: {e}", name.display())))?;
                path.write_csv(BufWriter::new(file))?;
                files.push(name.display().to_string());
            }
            emit(
                out,
                &json!({ "paths": paths, "steps": steps, "horizon": horizon, "seed": seed, "files": files }),
            )
        }
        Command::Experiment {
            name,
            lambda,
            paths,
            steps,
            seed,
            mu,
            l,
            horizon,
            workers,
        } => {
            let spec = ExperimentSpec {
                name,
                lambda,
                paths,
                steps,
                seed,
                mu,
                l,
                horizon,
                workers,
            };
            let report = run_experiment(&spec)?;
            emit(out, &report)?;
            if report.verdict.passed() {
                Ok(())
            } else {
                Err(Failure::Verdict)
            }
        }
    }
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            if e.use_stderr() {
                let _ = write!(err, "{e}");
            } else {
                let _ = write!(out, "{e}");
            }
            return code;
        }
    };
    match execute(cli, out) {
        Ok(()) => EXIT_OK,
        Err(Failure::Verdict) => EXIT_FAIL,
        Err(Failure::Usage(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            EXIT_USAGE
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_str(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = run(args.iter().copied(), &mut out, &mut err);
        (
            code,
            String::from_utf8(out).unwrap(),
            String::from_utf8(err).unwrap(),
        )
    }

    #[test]
    fn negative_lambda_is_a_usage_error() {
        let (code, _, err) = run_str(&["regtv", "phi", "--lambda", "-1", "--input", "x.csv"]);
        assert_eq!(code, EXIT_USAGE);
        assert!(err.contains("must be positive"), "{err}");
    }

    #[test]
    fn missing_input_is_a_usage_error() {
        let (code, _, err) = run_str(&[
            "regtv",
            "phi",
            "--lambda",
            "1",
            "--input",
            "/nonexistent.csv",
        ]);
        assert_eq!(code, EXIT_USAGE);
        assert!(err.starts_with("error:"));
    }

    #[test]
    fn unknown_experiment() {
        let (code, _, _) = run_str(&[
            "regtv",
            "experiment",
            "--name",
            "nope",
            "--lambda",
            "1",
            "--paths",
            "2",
            "--steps",
            "400",
            "--seed",
            "1",
        ]);
        assert_eq!(code, EXIT_USAGE);
    }
}
