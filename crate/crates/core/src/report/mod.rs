//! Configuration files, checkpoints, metrics streams and figures.

mod checkpoint;
mod config;
mod metrics;
mod pca;
mod plot;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, Tensor, FORMAT_VERSION, MAGIC};
pub use config::{config_schema, parse_config, parse_config_str};
pub use metrics::{read_metrics, write_metrics, MetricsLine, MetricsWriter, METRICS_CSV, METRICS_JSONL};
pub use pca::pca_project;
pub use plot::{
    ber_curve_svg, confusion_svg, constellation_svg, render_figures, render_report, BER_SVG, CONFUSION_FINAL_SVG,
    CONFUSION_K0_SVG, CONSTELLATION_SVG, DISPLAY_THRESHOLD,
};

use ndarray::Array2;

use crate::e2e::Transceiver;
use crate::error::{CheckpointError, Result};
use crate::gan::{ConditioningDataset, GanPair};
use crate::nn::DenseNet;
use crate::transceiver::tx_encode_blocks;

pub const TRANSMITTER: &str = "transmitter";
pub const RECEIVER: &str = "receiver";
pub const GAN: &str = "gan";

/// Transmitter, receiver and (when present) GAN of one iteration.
pub fn model_checkpoint(transceiver: &Transceiver, gan: Option<&GanPair>) -> Checkpoint {
    let mut c = Checkpoint::new();
    c.insert_net(TRANSMITTER, &transceiver.transmitter);
    c.insert_net(RECEIVER, &transceiver.receiver);
    if let Some(pair) = gan {
        c.insert_gan(GAN, pair);
    }
    c
}

/// The transceiver stored by [`model_checkpoint`], with fresh optimizer state.
pub fn transceiver_from_checkpoint(c: &Checkpoint) -> std::result::Result<Transceiver, CheckpointError> {
    Transceiver::new(c.net(TRANSMITTER)?, c.net(RECEIVER)?).map_err(|e| CheckpointError::Malformed(e.to_string()))
}

/// Transmit waveforms of messages 1..=S, projected to the plane.
pub fn constellation(transmitter: &DenseNet) -> Result<Array2<f64>> {
    let order = transmitter.input_width();
    let messages: Vec<usize> = (1..=order).collect();
    pca_project(tx_encode_blocks(transmitter, &messages)?.view())
}

pub const DATASET_WINDOWS: &str = "dataset.windows";
pub const DATASET_TARGETS: &str = "dataset.targets";
pub const DATASET_MEMORY: &str = "dataset.memory";

/// GAN training rows (windows and targets) at 32-bit precision.
pub fn dataset_checkpoint(dataset: &ConditioningDataset) -> Checkpoint {
    let mut c = Checkpoint::new();
    let (w, t) = (dataset.windows(), dataset.targets());
    c.insert(Tensor::from_f64(DATASET_WINDOWS, vec![w.nrows(), w.ncols()], w.iter().copied()).expect("window dims"));
    c.insert(Tensor::from_f64(DATASET_TARGETS, vec![t.nrows(), t.ncols()], t.iter().copied()).expect("target dims"));
    c.insert(Tensor::new(DATASET_MEMORY, vec![1], vec![dataset.memory() as f32]).expect("scalar"));
    c
}

pub fn dataset_from_checkpoint(c: &Checkpoint) -> std::result::Result<ConditioningDataset, CheckpointError> {
    let matrix = |name: &str| -> std::result::Result<Array2<f64>, CheckpointError> {
        let t = c
            .get(name)
            .ok_or_else(|| CheckpointError::MissingTensor(name.to_string()))?;
        if t.dims.len() != 2 {
            return Err(CheckpointError::Malformed(format!(
                "`{name}` has rank {}",
                t.dims.len()
            )));
        }
        Array2::from_shape_vec((t.dims[0], t.dims[1]), t.data.iter().map(|&v| f64::from(v)).collect())
            .map_err(|e| CheckpointError::Malformed(e.to_string()))
    };
    let memory = c
        .get(DATASET_MEMORY)
        .and_then(|t| t.data.first())
        .ok_or_else(|| CheckpointError::MissingTensor(DATASET_MEMORY.to_string()))?;
    ConditioningDataset::from_parts(*memory as usize, matrix(DATASET_WINDOWS)?, matrix(DATASET_TARGETS)?)
        .map_err(|e| CheckpointError::Malformed(e.to_string()))
}
