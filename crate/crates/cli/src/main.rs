//! `fixwing`: run the optimizer on a scenario, sweep a parameter, or
//! redraw the charts of earlier runs.

mod csv;
mod error;
mod plot;
mod run;
mod svg;
mod sweep;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use error::CliError;
use run::{parse_override, ConfigSource};
use sweep::{parse_baseline, parse_scheme, SweepParam, SweepSpec};

#[derive(Parser)]
#[command(
    name = "fixwing",
    version,
    about = "Max-min throughput optimizer for a fixed-wing UAV serving mobile group users"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ScenarioArgs {
    /// key = value scenario file; defaults apply when omitted
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one key, e.g. --set T=60 (repeatable)
    #[arg(long = "set", value_name = "KEY=VALUE", value_parser = parse_override)]
    overrides: Vec<(String, String)>,
    /// Random seed for the user tracks and random schemes
    #[arg(long)]
    seed: Option<u64>,
}

impl ScenarioArgs {
    fn source(&self) -> ConfigSource {
        ConfigSource {
            path: self.config.clone(),
            overrides: self.overrides.clone(),
            seed: self.seed,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Optimise one scenario and write results and charts
    Run {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// I, II or III
        #[arg(long, default_value = "I")]
        scheme: String,
        /// optimized, circular600 or straight
        #[arg(long, default_value = "optimized")]
        baseline: String,
    },
    /// Run a parameter over several values and aggregate the throughput
    Sweep {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long, default_value = "sweep")]
        out: PathBuf,
        #[arg(long, value_enum)]
        param: SweepParam,
        /// Comma-separated values
        #[arg(long, value_delimiter = ',', num_args = 0..)]
        values: Vec<String>,
        /// Runs per value, seeded seed, seed + 1, ...
        #[arg(long, default_value_t = 1)]
        reps: usize,
        /// Points run at the same time
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Regenerate every chart under a results directory from its CSV files
    Plot { dir: PathBuf },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(command: Command) -> Result<(), CliError> {
    match command {
        Command::Run {
            scenario,
            out,
            scheme,
            baseline,
        } => {
            let r = run::cmd_run(
                &scenario.source(),
                &out,
                parse_scheme(&scheme)?,
                parse_baseline(&baseline)?,
            )?;
            println!(
                "{}: eta {:.6e} bit/s at {:.3} m/s after {} iterations{}, written to {}",
                r.label,
                r.eta_final,
                r.v_final,
                r.iterations,
                if r.converged { "" } else { " (not converged)" },
                out.display()
            );
        }
        Command::Sweep {
            scenario,
            out,
            param,
            values,
            reps,
            jobs,
        } => {
            let values: Vec<String> = values
                .into_iter()
                .map(|v| v.trim().to_string())
                .filter(|v| !v.is_empty())
                .collect();
            let spec = SweepSpec {
                parameter: param,
                values,
                repetitions: reps,
            };
            let rows = sweep::cmd_sweep(&scenario.source(), &spec, &out, jobs)?;
            for row in rows {
                match row.mean() {
                    Some(m) => println!(
                        "{}={}: mean eta {m:.6e} bit/s over {} runs",
                        param.name(),
                        row.value,
                        row.etas.len()
                    ),
                    None => println!("{}={}: every run failed", param.name(), row.value),
                }
            }
        }
        Command::Plot { dir } => {
            for path in plot::regenerate(&dir)? {
                println!("{}", path.display());
            }
        }
    }
    Ok(())
}
