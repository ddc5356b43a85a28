use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use hiddenqutrit::cli::{
    config, paper_figures, prepare, simulate_scenario, sweep_csv, sweep_delay, Scenario,
    ScenarioName, ScenarioParams,
};
use hiddenqutrit::io::{
    read_matrix, read_records, to_json_bytes, write_atomic, MatrixFile, ResultFile,
};
use hiddenqutrit::measurement::{simulate_counts, table1_settings};
use hiddenqutrit::metrics::MetricsReport;
use hiddenqutrit::tomography::{reconstruct, Method};
use hiddenqutrit::Result;

#[derive(Parser)]
#[command(
    name = "hiddenqutrit",
    version,
    about = "Two-photon polarization tomography with hidden distinguishability"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct ScenarioArgs {
    /// hv_overlapped, hv_delayed, hv_partial, noon_indistinguishable,
    /// noon_distinguishable, noon_naive_comparison or noon_dephased
    #[arg(long)]
    scenario: Option<String>,
    /// Delay between the H and V photons (defaults depend on the scenario)
    #[arg(long)]
    delay: Option<f64>,
    #[arg(long, default_value_t = config::COHERENCE_TIME)]
    coherence_time: f64,
    /// Collective phase spread for noon_dephased, radians
    #[arg(long, default_value_t = config::DEPHASING_STDEV)]
    dephasing_stdev: f64,
    /// Crystal axis angle for noon_dephased, degrees
    #[arg(long, default_value_t = config::ROTATION_ANGLE_DEG)]
    rotation_angle: f64,
    /// Mean pairs per setting
    #[arg(long, default_value_t = config::FLUX)]
    flux: f64,
    #[arg(long, env = config::SEED_ENV, default_value_t = config::SEED)]
    seed: u64,
}

impl ScenarioArgs {
    fn params(&self) -> ScenarioParams {
        ScenarioParams {
            delay: self.delay,
            coherence_time: self.coherence_time,
            dephasing_stdev: self.dephasing_stdev,
            rotation_angle: self.rotation_angle,
            flux: self.flux,
            seed: self.seed,
        }
    }

    fn scenario(&self) -> Result<Option<Scenario>> {
        self.scenario
            .as_deref()
            .map(|s| Ok(Scenario::new(s.parse::<ScenarioName>()?, self.params())))
            .transpose()
    }
}

#[derive(Subcommand)]
enum Command {
    /// Write the ground-truth visible density matrix of a scenario
    Prepare {
        #[command(flatten)]
        args: ScenarioArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Simulate coincidence counts for the ten tomography settings
    Simulate {
        #[command(flatten)]
        args: ScenarioArgs,
        /// Density-matrix JSON to simulate instead of a scenario
        #[arg(long, conflicts_with = "scenario")]
        input: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Reconstruct a density matrix from a counts file
    Reconstruct {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value = "mle")]
        method: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fidelity to NOON, concurrence, purity and populations of a matrix file
    Metrics {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Tabulate ψ± populations of the H/V pair against delay
    SweepDelay {
        #[arg(long, default_value_t = 0.0)]
        from: f64,
        #[arg(long, default_value_t = 5.0 * config::COHERENCE_TIME)]
        to: f64,
        #[arg(long, default_value_t = 50)]
        steps: usize,
        #[arg(long, default_value_t = config::COHERENCE_TIME)]
        coherence_time: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run every scenario end to end and write fig2a … fig2g data
    PaperFigures {
        #[arg(long, default_value_t = config::COHERENCE_TIME)]
        coherence_time: f64,
        #[arg(long, default_value_t = config::FLUX)]
        flux: f64,
        #[arg(long, env = config::SEED_ENV, default_value_t = config::SEED)]
        seed: u64,
        #[arg(long, default_value = "figures")]
        out: PathBuf,
    },
}

fn emit(out: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match out {
        Some(path) => write_atomic(path, bytes),
        None => Ok(std::io::stdout().write_all(bytes)?),
    }
}

fn missing_scenario() -> hiddenqutrit::Error {
    hiddenqutrit::Error::InvalidParameter {
        name: "scenario",
        reason: "pass --scenario or --input".into(),
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Prepare { args, out } => {
            let scenario = args.scenario()?.ok_or_else(missing_scenario)?;
            let rho = prepare(&scenario)?;
            emit(
                out.as_deref(),
                &to_json_bytes(&MatrixFile::from_state(&rho))?,
            )
        }
        Command::Simulate { args, input, out } => {
            let records = match (input, args.scenario()?) {
                (Some(path), _) => {
                    let rho = read_matrix(&path)?;
                    simulate_counts(&rho, &table1_settings(), args.flux, args.seed)?
                }
                (None, Some(scenario)) => simulate_scenario(&scenario)?,
                (None, None) => return Err(missing_scenario()),
            };
            emit(out.as_deref(), &to_json_bytes(&records)?)
        }
        Command::Reconstruct { input, method, out } => {
            let method: Method = method.parse()?;
            let records = read_records(&input)?;
            let result = reconstruct(&records, method)?;
            emit(out.as_deref(), &to_json_bytes(&ResultFile::from(&result))?)
        }
        Command::Metrics { input, out } => {
            let rho = read_matrix(&input)?;
            emit(out.as_deref(), &to_json_bytes(&MetricsReport::of(&rho))?)
        }
        Command::SweepDelay {
            from,
            to,
            steps,
            coherence_time,
            out,
        } => {
            let rows = sweep_delay(from, to, steps, coherence_time)?;
            emit(out.as_deref(), sweep_csv(&rows).as_bytes())
        }
        Command::PaperFigures {
            coherence_time,
            flux,
            seed,
            out,
        } => {
            let params = ScenarioParams {
                coherence_time,
                flux,
                seed,
                ..ScenarioParams::default()
            };
            let figures = paper_figures(&out, params)?;
            for fig in &figures {
                let m = &fig.report.estimate_metrics;
                eprintln!(
                    "{} {:<24} p_psi+ {:.3} p_psi- {:.3} F_noon {:.3} C {:.3}",
                    fig.name.figure(),
                    fig.name.as_str(),
                    m.populations.p_psi_plus,
                    m.populations.p_psi_minus,
                    m.fidelity_noon,
                    m.concurrence
                );
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
