//! `rfdiag`: simulate, build datasets, train, evaluate, sweep and diagnose.
//!
//! Exit status: 0 success (and no trip for `diagnose`), 1 internal error,
//! 2 usage error, 3 config error, 4 data error, 10 protection tripped.

mod data;
mod diagnose;
mod manifest;
mod model;

use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rectifier_fault::diagnosis::Confirmation;
use rectifier_fault::features::{FeatureSetKind, NormalizationMode};

pub const EXIT_INTERNAL: u8 = 1;
pub const EXIT_CONFIG: u8 = 3;
pub const EXIT_DATA: u8 = 4;
pub const EXIT_TRIP: u8 = 10;

#[derive(Parser, Debug)]
#[command(name = "rfdiag", version, about = "Open-circuit fault diagnosis for three-phase four-wire PWM rectifiers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate one scenario, or a batch of planned scenarios.
    Simulate(data::SimulateArgs),
    /// Turn traces into train/test feature CSVs split by scenario.
    GenDataset(data::GenDatasetArgs),
    /// Train a random forest on a feature CSV.
    Train(model::TrainArgs),
    /// Score models on test sets: per-class accuracy and confusion matrix.
    Eval(model::EvalArgs),
    /// Run the windowed online diagnosis on a trace or a live simulation.
    Diagnose(diagnose::DiagnoseArgs),
    /// Accuracy against tree count for each feature set over several seeds.
    Sweep(model::SweepArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FeatureArg {
    Original,
    Additive,
    Multiplicative,
}

impl From<FeatureArg> for FeatureSetKind {
    fn from(f: FeatureArg) -> Self {
        match f {
            FeatureArg::Original => FeatureSetKind::Original,
            FeatureArg::Additive => FeatureSetKind::Additive,
            FeatureArg::Multiplicative => FeatureSetKind::Multiplicative,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum NormalizationArg {
    Joint,
    PerPhase,
}

impl From<NormalizationArg> for NormalizationMode {
    fn from(n: NormalizationArg) -> Self {
        match n {
            NormalizationArg::Joint => NormalizationMode::Joint,
            NormalizationArg::PerPhase => NormalizationMode::PerPhase,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ConfirmationArg {
    Immediate,
    WhenLate,
    NextWindow,
}

impl ConfirmationArg {
    pub fn policy(self, window_len: usize) -> Confirmation {
        match self {
            ConfirmationArg::Immediate => Confirmation::Immediate,
            ConfirmationArg::WhenLate => Confirmation::WhenLate { min_start: window_len / 10 },
            ConfirmationArg::NextWindow => Confirmation::NextWindow,
        }
    }
}

/// Forest hyper-parameters shared by `train` and `sweep`.
#[derive(Args, Debug, Clone)]
pub struct ForestArgs {
    /// Minimum rows per leaf.
    #[arg(long, default_value_t = 1)]
    pub leaf: usize,
    /// Features tried per split (default: ceil(sqrt(K))).
    #[arg(long)]
    pub mtry: Option<usize>,
    #[arg(long)]
    pub max_depth: Option<usize>,
}

/// Maps an error chain to an exit status.
fn exit_code(err: &anyhow::Error) -> u8 {
    use rectifier_fault::Error;
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<Error>() {
            return match e {
                Error::Config { .. } | Error::InvalidParams(_) => EXIT_CONFIG,
                _ => EXIT_DATA,
            };
        }
        if cause.is::<std::io::Error>() || cause.is::<serde_json::Error>() {
            return EXIT_DATA;
        }
        if cause.is::<data::DataError>() {
            return EXIT_DATA;
        }
    }
    EXIT_INTERNAL
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(a) => data::simulate(a).map(|_| false),
        Command::GenDataset(a) => data::gen_dataset(a).map(|_| false),
        Command::Train(a) => model::train(a).map(|_| false),
        Command::Eval(a) => model::eval(a).map(|_| false),
        Command::Diagnose(a) => diagnose::diagnose(a),
        Command::Sweep(a) => model::sweep(a).map(|_| false),
    };
    match result {
        Ok(false) => ExitCode::SUCCESS,
        Ok(true) => ExitCode::from(EXIT_TRIP),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
