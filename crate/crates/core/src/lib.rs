//! Neural-network quantum state tomography with restricted Boltzmann machines.
//!
//! A wavefunction over `N` qubits is represented by one RBM (real, positive
//! amplitudes) or by a pair of RBMs (amplitude and phase). Models are trained
//! from projective measurement samples and evaluated against known target
//! states, exact enumeration, or Monte Carlo estimators.
//!
//! Configurations use the canonical order throughout: site 0 is the most
//! significant bit of the configuration index.

pub mod error;
pub mod gates;
pub mod io;
pub mod metrics;
pub mod observables;
pub mod oracle;
pub mod rbm;
pub mod rng;
pub mod spin;
pub mod state;
pub mod training;

pub use num_complex::Complex64;

pub use error::{Error, Result};
pub use gates::{default_gate_registry, BasisAssignment, GateRegistry, RotationPlan, UnitaryGate};
pub use io::Checkpoint;
pub use metrics::{fidelity, kl_divergence, kl_multibasis, TargetState};
pub use observables::{ObservableEstimate, Region, RenyiEstimate};
pub use oracle::TfimSpec;
pub use rbm::RbmParameters;
pub use spin::{HilbertSpace, SampleBatch, SpinConfiguration};
pub use state::{ComplexWavefunction, PositiveWavefunction, Wavefunction};
pub use training::{
    Callback, FitSummary, GradientSet, MetricEvaluator, MetricHistory, TrainingConfig,
    TrainingDataset,
};
