use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod cmd_data;
mod cmd_qnn;
mod cmd_sec;
mod cmd_sim;
mod config;
mod output;

/// Noisy quantum circuit simulation, QNN defect classification and
/// hardware-security experiments.
#[derive(Parser)]
#[command(name = "qmlsec", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Image datasets.
    #[command(subcommand)]
    Dataset(DatasetCmd),
    /// Convolutional autoencoder.
    #[command(subcommand)]
    Cae(CaeCmd),
    /// Quantum neural network classifier.
    #[command(subcommand)]
    Qnn(QnnCmd),
    /// Circuit simulation.
    #[command(subcommand)]
    Sim(SimCmd),
    /// Security primitives.
    #[command(subcommand)]
    Sec(SecCmd),
    /// Full image → latent → QNN experiment with a results table.
    Pipeline(cmd_qnn::PipelineArgs),
}

#[derive(Args, Clone)]
pub struct Out {
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Overwrite existing artifacts.
    #[arg(long)]
    pub force: bool,
}

#[derive(Args, Clone)]
pub struct OptOut {
    /// Output directory; results are only printed when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Overwrite existing artifacts.
    #[arg(long)]
    pub force: bool,
}

#[derive(Subcommand)]
enum DatasetCmd {
    /// Generate synthetic defect patches as PGM files plus a manifest.
    Gen(cmd_data::GenArgs),
    /// Load a class-per-directory PGM tree and rewrite it at 32×32.
    Ingest(cmd_data::IngestArgs),
    /// Stratified train/test split of a manifest.
    Split(cmd_data::SplitArgs),
}

#[derive(Subcommand)]
enum CaeCmd {
    /// Train an autoencoder on the images of a manifest.
    Train(cmd_data::CaeTrainArgs),
    /// Encode the images of a manifest into latent features.
    Encode(cmd_data::CaeEncodeArgs),
}

#[derive(Subcommand)]
enum QnnCmd {
    /// Train a classifier on a feature CSV.
    Train(cmd_qnn::TrainArgs),
    /// Accuracy and confusion matrix of a saved model.
    Eval(cmd_qnn::EvalArgs),
    /// Compare parameter-shift and finite-difference gradients.
    Gradcheck(cmd_qnn::GradcheckArgs),
}

#[derive(Subcommand)]
enum SimCmd {
    /// Simulate a circuit: exact probabilities, sampled or noisy counts.
    Run(cmd_sim::RunArgs),
    /// Total variation distance between two circuits' output distributions.
    Tvd(cmd_sim::TvdArgs),
}

#[derive(Subcommand)]
enum SecCmd {
    /// Extract a QuPUF signature from a device.
    Puf(cmd_sec::PufArgs),
    /// Split a circuit into fragment files.
    Split(cmd_sec::SplitArgs),
    /// Reassemble fragment files into a circuit.
    Recombine(cmd_sec::RecombineArgs),
    /// Insert ranked dummy gates and emit the key.
    Obfuscate(cmd_sec::ObfuscateArgs),
    /// Remove keyed dummy gates.
    Restore(cmd_sec::RestoreArgs),
    /// Place programs on a device with buffer qubits between them.
    Allocate(cmd_sec::AllocateArgs),
    /// Victim reliability under crosstalk fault injection.
    Inject(cmd_sec::InjectArgs),
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Dataset(c) => match c {
            DatasetCmd::Gen(a) => cmd_data::gen(a),
            DatasetCmd::Ingest(a) => cmd_data::ingest(a),
            DatasetCmd::Split(a) => cmd_data::split(a),
        },
        Command::Cae(c) => match c {
            CaeCmd::Train(a) => cmd_data::cae_train(a),
            CaeCmd::Encode(a) => cmd_data::cae_encode(a),
        },
        Command::Qnn(c) => match c {
            QnnCmd::Train(a) => cmd_qnn::train(a),
            QnnCmd::Eval(a) => cmd_qnn::eval(a),
            QnnCmd::Gradcheck(a) => cmd_qnn::gradcheck(a),
        },
        Command::Sim(c) => match c {
            SimCmd::Run(a) => cmd_sim::run(a),
            SimCmd::Tvd(a) => cmd_sim::tvd(a),
        },
        Command::Sec(c) => match c {
            SecCmd::Puf(a) => cmd_sec::puf(a),
            SecCmd::Split(a) => cmd_sec::split(a),
            SecCmd::Recombine(a) => cmd_sec::recombine(a),
            SecCmd::Obfuscate(a) => cmd_sec::obfuscate(a),
            SecCmd::Restore(a) => cmd_sec::restore(a),
            SecCmd::Allocate(a) => cmd_sec::allocate(a),
            SecCmd::Inject(a) => cmd_sec::inject(a),
        },
        Command::Pipeline(a) => cmd_qnn::pipeline(a),
    }
}

fn main() -> ExitCode {
    // Usage errors exit with 2 from inside clap.
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = format!("{e:#}").replace('\n', " ");
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
