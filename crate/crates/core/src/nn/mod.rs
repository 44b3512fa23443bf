//! A small fully-connected regressor with interchangeable rotation heads.

pub mod adam;
pub mod experiment;
pub mod head;
pub mod interpret;
pub mod loss;
pub mod net;
pub mod ood;

pub use adam::{AdamConfig, AdamState};
pub use experiment::{
    evaluate, run_trial, summarize, train_experiment, CurveRow, ErrorSummary, ExperimentResult, HeadSelection, InputEncoding, LrSpec,
    Split, TrainConfig, TrainedModel, TrialOutcome,
};
pub use head::{head_backward, head_forward, raw_dispersion_trace, HeadOutput, RepresentationHead, Upstream};
pub use interpret::{head_norm_metric, last_layer_decompose, LastLayerDecomposition};
pub use loss::{loss_eval, LossKind, RotationTarget};
pub use net::{Activation, Dense, DenseNet};
pub use ood::{corrupt, dt_evaluate, Corruption, DtReport, DtSample, DtSettings};
