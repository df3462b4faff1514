//! Experiment driver: config files, subcommands and exit codes.
//!
//! Exit codes: 0 on success, 2 for configuration errors, 3 when
//! `--require-feasible` is set and some trial ends infeasible, 1 otherwise.

pub mod commands;
pub mod config;
pub mod experiment;
pub mod gradcheck;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::error::{Error, Result};
use crate::optimizer::Method;

use commands::RunContext;
use config::{load_config, RunConfig};
use experiment::SweepParam;
use gradcheck::GradCheckSpec;

#[derive(Debug, Parser)]
#[command(name = "sgalm", version, about = "Near-field ISAC beamforming on the sphere")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Scenario/solver config file (`key = value` lines).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Overrides `rng_seed` from the config.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Overrides the config's method: sgd, sd or cg.
    #[arg(long)]
    pub method: Option<Method>,
    #[arg(long, default_value_t = 1)]
    pub trials: usize,
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve one scenario (or several seeds of it).
    Solve {
        #[command(flatten)]
        common: Common,
        /// Exit with code 3 if any trial is infeasible.
        #[arg(long)]
        require_feasible: bool,
        /// Write the per-iteration trace.
        #[arg(long)]
        trace: bool,
        /// Write the channel vectors.
        #[arg(long)]
        dump_channels: bool,
    },
    /// Solve, then write the gain over the angle grid.
    Beampattern {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0.5)]
        angle_step: f64,
        /// Range of the probe channels, meters.
        #[arg(long, default_value_t = 20.0)]
        probe_range: f64,
    },
    /// Mean sum rate over a list of values of one parameter.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// num_antennas, omega_dbm or method.
        #[arg(long)]
        param: SweepParam,
        /// Comma separated values.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        values: Vec<String>,
    },
    /// Solve once and write the full trace.
    Convergence {
        #[command(flatten)]
        common: Common,
    },
    /// Compare the analytic gradient with finite differences.
    Gradcheck {
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long, default_value_t = 17)]
        antennas: usize,
        #[arg(long, default_value_t = 2)]
        users: usize,
        #[arg(long, default_value_t = 2)]
        targets: usize,
        #[arg(long, default_value_t = 20)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Scale one gradient term by this factor, to see the check fail.
        #[arg(long)]
        corrupt: Option<f64>,
        /// Use normalized FP weights.
        #[arg(long)]
        normalized: bool,
    },
}

/// What a command reports back to `main`.
#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    Done(String),
    Infeasible(String),
    CheckFailed(String),
}

impl Outcome {
    pub fn exit_code(&self) -> u8 {
        match self {
            Outcome::Done(_) => 0,
            Outcome::Infeasible(_) => 3,
            Outcome::CheckFailed(_) => 1,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            Outcome::Done(m) | Outcome::Infeasible(m) | Outcome::CheckFailed(m) => m,
        }
    }
}

pub fn error_exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) => 2,
        _ => 1,
    }
}

fn resolve(common: &Common) -> Result<(RunConfig, u64)> {
    let path = common
        .config
        .as_ref()
        .ok_or_else(|| Error::Config("--config is required for this command".into()))?;
    let mut run = load_config(path)?;
    if let Some(m) = common.method {
        run.solver.method = m;
    }
    let seed = common.seed.unwrap_or(run.scenario.rng_seed);
    run.scenario.rng_seed = seed;
    run.solver.rng_seed = seed;
    Ok((run, seed))
}

fn context<'a>(name: &'a str, common: &'a Common, seed: u64) -> RunContext<'a> {
    RunContext {
        command: name,
        out: &common.out,
        seed,
        trials: common.trials,
        workers: common.workers,
    }
}

pub fn run(cli: &Cli) -> Result<Outcome> {
    match &cli.command {
        Command::Solve {
            common,
            require_feasible,
            trace,
            dump_channels,
        } => {
            let (run, seed) = resolve(common)?;
            let out = commands::cmd_solve(&run, &context("solve", common, seed), *trace, *dump_channels)?;
            let s = &out.summary;
            let msg = match &s.aggregate {
                Some(a) => format!(
                    "{} trials: mean sum rate {:.4} bit/s/Hz, feasible {:.1}%",
                    a.trials,
                    a.mean_sum_rate,
                    100.0 * a.feasibility_rate
                ),
                None => format!(
                    "sum rate {:.4} bit/s/Hz, feasible {}, max violation {:.3e}",
                    s.sum_rate, s.feasible, s.max_violation
                ),
            };
            if *require_feasible && !out.all_feasible {
                Ok(Outcome::Infeasible(msg))
            } else {
                Ok(Outcome::Done(msg))
            }
        }
        Command::Beampattern {
            common,
            angle_step,
            probe_range,
        } => {
            let (run, seed) = resolve(common)?;
            let rows = commands::cmd_beampattern(&run, &context("beampattern", common, seed), *angle_step, *probe_range)?;
            Ok(Outcome::Done(format!("{} angles written", rows.len())))
        }
        Command::Sweep { common, param, values } => {
            let (run, seed) = resolve(common)?;
            let rows = commands::cmd_sweep(&run, &context("sweep", common, seed), *param, values)?;
            let lines: Vec<String> = rows
                .iter()
                .map(|r| format!("{} = {}: {:.4} ± {:.4}", param, r.sweep_value, r.mean_sum_rate, r.std_sum_rate))
                .collect();
            Ok(Outcome::Done(lines.join("\n")))
        }
        Command::Convergence { common } => {
            let (run, seed) = resolve(common)?;
            let s = commands::cmd_convergence(&run, &context("convergence", common, seed))?;
            Ok(Outcome::Done(format!(
                "{} iterations, final gradient norm {:.3e}",
                s.iterations, s.final_grad_norm
            )))
        }
        Command::Gradcheck {
            out,
            antennas,
            users,
            targets,
            trials,
            seed,
            corrupt,
            normalized,
        } => {
            let spec = GradCheckSpec {
                num_antennas: *antennas,
                num_users: *users,
                num_targets: *targets,
                trials: *trials,
                seed: *seed,
                normalize_fp: *normalized,
                corrupt: *corrupt,
            };
            let ctx = RunContext {
                command: "gradcheck",
                out,
                seed: *seed,
                trials: *trials,
                workers: 1,
            };
            let report = commands::cmd_gradcheck(&spec, &ctx)?;
            let msg = format!(
                "max relative error {:.3e} over {} states (tolerance {:.0e})",
                report.max_rel_err,
                report.trials,
                gradcheck::GRADCHECK_TOLERANCE
            );
            Ok(if report.pass {
                Outcome::Done(msg)
            } else {
                Outcome::CheckFailed(msg)
            })
        }
    }
}

/// Parses `args`, runs, prints and maps to an exit code.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(&cli) {
        Ok(outcome) => {
            match &outcome {
                Outcome::Done(m) => println!("{m}"),
                other => eprintln!("{}", other.message()),
            }
            ExitCode::from(outcome.exit_code())
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(error_exit_code(&e))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_sweep_values() {
        let cli = Cli::try_parse_from([
            "sgalm", "sweep", "--config", "a.cfg", "--param", "num_antennas", "--values", "33,65", "--trials", "4",
        ])
        .unwrap();
        match cli.command {
            Command::Sweep { common, param, values } => {
                assert_eq!(param, SweepParam::Antennas);
                assert_eq!(values, vec!["33", "65"]);
                assert_eq!(common.trials, 4);
            }
            _ => panic!("wrong subcommand"),
        }
    }

    #[test]
    fn negative_sweep_values_parse() {
        let cli = Cli::try_parse_from(["sgalm", "sweep", "--param", "omega_dbm", "--values", "-40,-35", "--trials", "2"]).unwrap();
        match cli.command {
            Command::Sweep { common, values, .. } => {
                assert_eq!(values, vec!["-40", "-35"]);
                assert_eq!(common.trials, 2);
            }
            _ => panic!("wrong subcommand"),
        }
    }

    #[test]
    fn missing_config_is_a_config_error() {
        let cli = Cli::try_parse_from(["sgalm", "solve"]).unwrap();
        let err = run(&cli).unwrap_err();
        assert_eq!(error_exit_code(&err), 2);
    }

    #[test]
    fn method_flag_parses() {
        let cli = Cli::try_parse_from(["sgalm", "convergence", "--method", "cg"]).unwrap();
        match cli.command {
            Command::Convergence { common } => assert_eq!(common.method, Some(Method::ConjugateGradient)),
            _ => panic!("wrong subcommand"),
        }
    }
}
