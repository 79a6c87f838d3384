//! Single-qubit data re-uploading classifiers under simulated NISQ noise,
//! a black-box genetic adversarial attack, and robustness certificates.

pub mod attack;
pub mod classifier;
pub mod cqc;
pub mod dra;
pub mod error;
pub mod evolve;
pub mod features;
pub mod harness;
pub mod mnist;
pub mod qsim;
pub mod robustness;
pub mod seed;
pub mod train;

pub use attack::{AdversarialResult, AttackConfig, TargetMode};
pub use classifier::{evaluate, Classifier, Evaluation, PcaDraClassifier, Shots};
pub use cqc::{CqcLayerSpec, CqcModel, Head, PreparedInput};
pub use dra::{Ansatz, DraModel};
pub use error::{Error, Result};
pub use evolve::{GaConfig, Individual, InitKind};
pub use features::{PcaKind, PcaModel};
pub use mnist::{ImageTensor, LabeledDataset};
pub use qsim::{Axis, ChannelKind, NoiseChannel, NoiseModel, QubitState};
pub use robustness::PredictionRecord;
