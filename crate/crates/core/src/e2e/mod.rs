//! The measured-data optimization loop: transmit through a black-box
//! channel, fit a conditional GAN to the measurements, update the
//! transceiver through the frozen generator, repeat.
//!
//! `measure`, `update` and `experiment` only ever see the channel through
//! [`Channel::transmit`](crate::channel::Channel::transmit).

mod config;
mod experiment;
mod measure;
mod pretrain;
mod update;

pub use config::{ExperimentConfig, PretrainConfig};
pub use experiment::{BaselineResult, Experiment, ExperimentOutcome, ExperimentState, PRETRAIN_STREAM};
pub use measure::{conditioning_dataset, evaluate, held_out_pairs, transmit_and_measure, Evaluation, Measurement};
pub use pretrain::{pretrain_transceiver, pretraining_model, smooth_model_ser, PretrainReport, PRETRAIN_SER_LIMIT};
pub use update::{
    context_windows, receiver_only_update, transceiver_update_through_generator, Transceiver, UpdateSettings,
};

use crate::channel::ImddOracle;
use crate::error::Result;

/// Runs the whole experiment against the simulated IM/DD link of `config`.
pub fn run_experiment(
    config: &ExperimentConfig,
    on_state: impl FnMut(&ExperimentState) -> Result<()>,
) -> Result<ExperimentOutcome> {
    let oracle = ImddOracle::new(config.channel.clone())?;
    Experiment::new(config.clone(), &oracle)?.run(on_state)
}

/// Source files of the loop and the GAN that must stay black-box with
/// respect to the channel, for auditing.
pub const BLACK_BOX_SOURCES: [(&str, &str); 7] = [
    ("e2e/measure.rs", include_str!("measure.rs")),
    ("e2e/update.rs", include_str!("update.rs")),
    ("e2e/experiment.rs", include_str!("experiment.rs")),
    ("gan/mod.rs", include_str!("../gan/mod.rs")),
    ("gan/dataset.rs", include_str!("../gan/dataset.rs")),
    ("gan/train.rs", include_str!("../gan/train.rs")),
    ("gan/validate.rs", include_str!("../gan/validate.rs")),
];
