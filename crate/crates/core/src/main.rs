use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::info;

use qflsim::bench::{self, parse_config, ExperimentConfig};
use qflsim::encoding::EncodingKind;
use qflsim::Error;

#[derive(Parser)]
#[command(
    name = "qflsim",
    version,
    about = "Quantum federated learning simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one federated experiment and write `<output_dir>/metrics.csv`.
    Run { config: PathBuf },
    /// Sweep device and qubit counts; record measured and modeled round delay.
    Poc1 {
        config: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "2,4,8")]
        devices: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_value = "2,4,6")]
        qubits: Vec<usize>,
        /// Repeats per sweep point; the summary reports the median.
        #[arg(long, default_value_t = 3)]
        repeats: usize,
        /// Run sweep points concurrently.
        #[arg(long)]
        parallel: bool,
    },
    /// Sweep layer counts and encodings on a label-skewed partition.
    Poc2 {
        config: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "2,8")]
        layers: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_value = "vanilla,mean,half")]
        encodings: Vec<EncodingKind>,
        #[arg(long)]
        parallel: bool,
    },
    /// Render SVG charts for every metrics file under a directory.
    Plot { dir: PathBuf },
}

fn load_config(path: &PathBuf) -> Result<ExperimentConfig, Error> {
    let bytes = std::fs::read(path).map_err(|e| Error::Config {
        field: "<file>".into(),
        message: format!("cannot read {}: {e}", path.display()),
    })?;
    parse_config(&bytes)
}

fn run(cli: Cli) -> Result<(), Error> {
    let data_root = bench::data_root();
    match cli.command {
        Command::Run { config } => {
            let config = load_config(&config)?;
            let (records, path) = bench::run_single(&config, &data_root)?;
            if let Some(last) = records.last() {
                info!(
                    "final round {}: train acc {:.3}, test acc {:.3}",
                    last.round, last.mean_train_accuracy, last.test_accuracy
                );
            }
            println!("{}", path.display());
        }
        Command::Poc1 {
            config,
            devices,
            qubits,
            repeats,
            parallel,
        } => {
            let config = load_config(&config)?;
            let report =
                bench::run_poc1(&config, &devices, &qubits, repeats, parallel, &data_root)?;
            for path in report.write(&config.output_dir)? {
                println!("{}", path.display());
            }
        }
        Command::Poc2 {
            config,
            layers,
            encodings,
            parallel,
        } => {
            let config = load_config(&config)?;
            let report = bench::run_poc2(&config, &layers, &encodings, parallel, &data_root)?;
            for path in report.write(&config.output_dir)? {
                println!("{}", path.display());
            }
        }
        Command::Plot { dir } => {
            for path in bench::emit_plots(&dir)? {
                println!("{}", path.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
