use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::channel::SmoothImdd;
use crate::e2e::{ExperimentConfig, Transceiver};
use crate::error::{Error, Result};
use crate::nn::{softmax_cross_entropy, AdamState, Rng};
use crate::transceiver::{argmax, message_one_hot, MessageSequence};

/// SER above which pretraining is reported as failed.
pub const PRETRAIN_SER_LIMIT: f64 = 0.2;
const EVAL_BATCHES: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PretrainReport {
    pub losses: Vec<f64>,
    /// SER of the trained pair on the smooth model.
    pub ser: f64,
}

/// The smooth link model the transceiver is initialized on.
pub fn pretraining_model(config: &ExperimentConfig) -> Result<SmoothImdd> {
    SmoothImdd::new(
        &config.channel,
        config.channel.fiber_length * config.pretrain.fiber_length_scale,
        config.pretrain.noise_sigma,
    )
}

/// Symbol error rate of a pair on the smooth model over fresh random batches.
pub fn smooth_model_ser(
    transceiver: &Transceiver,
    model: &SmoothImdd,
    batch: usize,
    batches: usize,
    rng: &mut Rng,
) -> Result<f64> {
    let order = transceiver.order();
    let n = transceiver.samples_per_symbol();
    let mut errors = 0usize;
    for _ in 0..batches {
        let seq = MessageSequence::random(batch, order, rng)?;
        let x = transceiver
            .transmitter
            .predict_batch(message_one_hot(seq.messages(), order)?.view())?;
        let (y, _) = model.forward(x.as_slice().expect("standard layout"), rng)?;
        let y = Array2::from_shape_vec((batch, n), y).map_err(|e| Error::Shape(e.to_string()))?;
        let p = transceiver.receiver.predict_batch(y.view())?;
        errors += p
            .rows()
            .into_iter()
            .zip(seq.messages())
            .filter(|(row, &s)| argmax(row.as_slice().expect("standard layout")) + 1 != s)
            .count();
    }
    Ok(errors as f64 / (batch * batches) as f64)
}

/// Trains a fresh transmitter/receiver pair end to end through the smooth
/// model. The returned pair carries fresh optimizer state.
pub fn pretrain_transceiver(config: &ExperimentConfig, rng: &mut Rng) -> Result<(Transceiver, PretrainReport)> {
    let model = pretraining_model(config)?;
    let (tx, rx) = config.transceiver.new_pair(rng)?;
    let mut pair = Transceiver::new(tx, rx)?;
    let order = pair.order();
    let n = pair.samples_per_symbol();
    let batch = config.pretrain.symbols_per_batch;
    let lr = config.pretrain.learning_rate;
    let mut tx_state = AdamState::for_net(&pair.transmitter);
    let mut rx_state = AdamState::for_net(&pair.receiver);
    let mut losses = Vec::with_capacity(config.pretrain.steps);

    for step in 0..config.pretrain.steps {
        let seq = MessageSequence::random(batch, order, rng)?;
        let labels = message_one_hot(seq.messages(), order)?;
        let tx_cache = pair.transmitter.forward_batch(labels.view())?;
        let stream = tx_cache.output().to_owned();
        let (y, tape) = model.forward(stream.as_slice().expect("standard layout"), rng)?;
        let y = Array2::from_shape_vec((batch, n), y).map_err(|e| Error::Shape(e.to_string()))?;
        let rx_cache = pair.receiver.forward_batch(y.view())?;
        let (loss, grad) = softmax_cross_entropy(labels.view(), rx_cache.output())?;
        if !loss.is_finite() {
            return Err(Error::Numeric {
                step,
                what: format!("pretraining loss is {loss}"),
            });
        }
        let (rx_grads, grad_y) = pair.receiver.backward_batch_pre_activation(&rx_cache, grad.view())?;
        let grad_x = model.backward(&tape, grad_y.as_slice().expect("standard layout"))?;
        let grad_x = Array2::from_shape_vec((batch, n), grad_x).map_err(|e| Error::Shape(e.to_string()))?;
        let (tx_grads, _) = pair.transmitter.backward_batch(&tx_cache, grad_x.view())?;
        pair.transmitter.apply_adam(&mut tx_state, &tx_grads, lr)?;
        pair.receiver.apply_adam(&mut rx_state, &rx_grads, lr)?;
        losses.push(loss);
    }

    let ser = smooth_model_ser(&pair, &model, batch, EVAL_BATCHES, rng)?;
    if ser >= PRETRAIN_SER_LIMIT {
        let last = losses.last().copied().unwrap_or(f64::NAN);
        return Err(Error::Training(format!(
            "pretraining reached SER {ser:.3} (limit {PRETRAIN_SER_LIMIT}) after {} steps; final loss {last:.4}",
            config.pretrain.steps
        )));
    }
    Ok((pair, PretrainReport { losses, ser }))
}
