use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Neural-network quantum state tomography with restricted Boltzmann machines.
#[derive(Debug, Parser)]
#[command(name = "nqst", version)]
pub struct Cli {
    /// Worker threads for sampling. Results do not depend on this value.
    #[arg(long, global = true, default_value_t = 1)]
    pub threads: usize,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate measurement datasets from exactly known states.
    #[command(subcommand)]
    GenData(GenData),
    /// Train a model on measurement data.
    Train(Train),
    /// Draw configurations from a trained model.
    Sample(Sample),
    /// Estimate an observable from model samples.
    Observe(Observe),
    /// Compare a trained model against a known wavefunction.
    Evaluate(Evaluate),
}

#[derive(Debug, Subcommand)]
pub enum GenData {
    /// Ground state of the open transverse-field Ising chain, measured in the
    /// reference basis.
    Tfim(GenTfim),
    /// Random complex state measured in a list of product bases.
    Qubits(GenQubits),
}

#[derive(Debug, Args)]
pub struct GenTfim {
    #[arg(long, default_value_t = 10)]
    pub n: usize,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub j: f64,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub h: f64,
    #[arg(long, default_value_t = 100_000)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory; defaults to $NQST_OUT_DIR.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GenQubits {
    #[arg(long, default_value_t = 2)]
    pub n: usize,
    /// One basis per line, e.g. `X Z`. Optional for two qubits, where the
    /// bases `Z Z`, `X Z`, `Z X`, `Y Z`, `Z Y` are used.
    #[arg(long)]
    pub bases_file: Option<PathBuf>,
    #[arg(long, default_value_t = 10_000)]
    pub samples_per_basis: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelKind {
    Positive,
    Complex,
}

#[derive(Debug, Args)]
pub struct Train {
    #[arg(value_enum)]
    pub kind: ModelKind,
    /// Samples file.
    #[arg(long)]
    pub data: PathBuf,
    /// Per-sample measurement bases (complex models).
    #[arg(long)]
    pub bases: Option<PathBuf>,
    /// Distinct bases used for the multi-basis KL metric (complex models).
    #[arg(long)]
    pub bases_list: Option<PathBuf>,
    /// Known wavefunction; enables fidelity and KL logging.
    #[arg(long)]
    pub psi: Option<PathBuf>,
    /// Hidden units; 10 for positive models, the qubit count for complex ones.
    #[arg(long)]
    pub hidden: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub pos_batch: Option<usize>,
    #[arg(long)]
    pub neg_batch: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 10)]
    pub log_every: usize,
    /// Print the metrics at every logged epoch.
    #[arg(long)]
    pub verbose: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct Sample {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, default_value_t = 1000)]
    pub num: usize,
    #[arg(long, default_value_t = 10)]
    pub k: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output samples file; defaults to $NQST_OUT_DIR/samples.txt.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ObservableKind {
    Sigmaz,
    AbsSigmaz,
    Sigmax,
    Energy,
    Renyi,
}

impl ObservableKind {
    pub fn name(self) -> &'static str {
        match self {
            ObservableKind::Sigmaz => "sigmaz",
            ObservableKind::AbsSigmaz => "abs-sigmaz",
            ObservableKind::Sigmax => "sigmax",
            ObservableKind::Energy => "energy",
            ObservableKind::Renyi => "renyi",
        }
    }
}

#[derive(Debug, Args)]
pub struct Observe {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, value_enum)]
    pub obs: ObservableKind,
    /// Comma-separated site indices of region A (renyi).
    #[arg(long)]
    pub region: Option<String>,
    #[arg(long, default_value_t = 1000)]
    pub num: usize,
    #[arg(long, default_value_t = 10)]
    pub k: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Ising coupling (energy).
    #[arg(long, allow_negative_numbers = true)]
    pub j: Option<f64>,
    /// Transverse field (energy).
    #[arg(long, allow_negative_numbers = true)]
    pub h: Option<f64>,
    /// Also write the estimate to this JSON file.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct Evaluate {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub psi: PathBuf,
    /// Bases for the multi-basis KL divergence.
    #[arg(long)]
    pub bases_list: Option<PathBuf>,
    /// Also write the metrics to this JSON file.
    #[arg(long)]
    pub out: Option<PathBuf>,
}
