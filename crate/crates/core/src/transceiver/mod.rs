//! Autoencoder endpoints and link metrics.
//!
//! Messages are 1-based (`1..=S`) at every public boundary; network rows and
//! bit labels are 0-based internally.

mod mapping;
mod metrics;

pub use mapping::{mapping_cost, optimize_bit_mapping, BitMapping};
pub use metrics::{
    ber_from_q2, compute_ber, confusion_matrix, q2_from_ber, ConfusionMatrix, ErrorCounts, MetricsRecord,
};

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{one_hot, Activation, DenseNet, LayerSpec, Rng};

/// Shapes of the transmitter and receiver networks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransceiverConfig {
    /// Number of messages S (a power of two).
    pub order: usize,
    pub samples_per_symbol: usize,
    pub hidden_width: usize,
}

impl Default for TransceiverConfig {
    fn default() -> Self {
        Self {
            order: 8,
            samples_per_symbol: 6,
            hidden_width: 96,
        }
    }
}

impl TransceiverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.order < 2 || !self.order.is_power_of_two() {
            return Err(Error::config(format!(
                "message order {} must be a power of two >= 2",
                self.order
            )));
        }
        if self.samples_per_symbol == 0 || self.hidden_width == 0 {
            return Err(Error::config("samples_per_symbol and hidden_width must be positive"));
        }
        Ok(())
    }

    pub fn bits_per_message(&self) -> usize {
        self.order.trailing_zeros() as usize
    }

    /// one-hot(S) -> ReLU -> ReLU -> BoundedUnit(n)
    pub fn transmitter_specs(&self) -> Vec<LayerSpec> {
        LayerSpec::chain(
            self.order,
            &[
                (self.hidden_width, Activation::Relu),
                (self.hidden_width, Activation::Relu),
                (self.samples_per_symbol, Activation::BoundedUnit),
            ],
        )
    }

    /// n -> ReLU -> ReLU -> Softmax(S)
    pub fn receiver_specs(&self) -> Vec<LayerSpec> {
        LayerSpec::chain(
            self.samples_per_symbol,
            &[
                (self.hidden_width, Activation::Relu),
                (self.hidden_width, Activation::Relu),
                (self.order, Activation::Softmax),
            ],
        )
    }

    pub fn new_pair(&self, rng: &mut Rng) -> Result<(DenseNet, DenseNet)> {
        self.validate()?;
        Ok((
            DenseNet::new(&self.transmitter_specs(), rng)?,
            DenseNet::new(&self.receiver_specs(), rng)?,
        ))
    }
}

/// A sequence of messages drawn from `1..=order`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MessageSequence {
    messages: Vec<usize>,
    order: usize,
}

impl MessageSequence {
    pub fn new(messages: Vec<usize>, order: usize) -> Result<Self> {
        if order < 2 || !order.is_power_of_two() {
            return Err(Error::config(format!(
                "message order {order} must be a power of two >= 2"
            )));
        }
        if let Some(&value) = messages.iter().find(|&&m| m == 0 || m > order) {
            return Err(Error::Message { value, order });
        }
        Ok(Self { messages, order })
    }

    /// `len` i.i.d. uniform messages.
    pub fn random(len: usize, order: usize, rng: &mut Rng) -> Result<Self> {
        Self::new((0..len).map(|_| rng.below(order) + 1).collect(), order)
    }

    pub fn messages(&self) -> &[usize] {
        &self.messages
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn len(&self) -> usize {
        self.messages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.messages.is_empty()
    }
}

fn check_messages(messages: &[usize], order: usize) -> Result<()> {
    match messages.iter().find(|&&m| m == 0 || m > order) {
        Some(&value) => Err(Error::Message { value, order }),
        None => Ok(()),
    }
}

/// One-hot rows for 1-based messages.
pub fn message_one_hot(messages: &[usize], order: usize) -> Result<Array2<f64>> {
    check_messages(messages, order)?;
    Ok(one_hot(messages.iter().map(|m| m - 1), order))
}

/// Maps messages to blocks, one row of `n` samples per message.
pub fn tx_encode_blocks(net: &DenseNet, messages: &[usize]) -> Result<Array2<f64>> {
    let order = net.input_width();
    net.predict_batch(message_one_hot(messages, order)?.view())
}

/// Concatenated sample stream for `messages`, order preserved.
pub fn tx_encode(net: &DenseNet, messages: &[usize]) -> Result<Vec<f64>> {
    Ok(tx_encode_blocks(net, messages)?.into_iter().collect())
}

/// Posterior over the S messages for one received block.
pub fn rx_decode(net: &DenseNet, block: &[f64]) -> Result<Vec<f64>> {
    if block.len() != net.input_width() {
        return Err(Error::Shape(format!(
            "received block has {} samples, receiver expects {}",
            block.len(),
            net.input_width()
        )));
    }
    net.predict(block)
}

/// Index of the largest entry; the lowest index wins ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Hard decisions (1-based) for a batch of received blocks.
pub fn rx_decide(net: &DenseNet, blocks: ArrayView2<'_, f64>) -> Result<Vec<usize>> {
    let posteriors = net.predict_batch(blocks)?;
    Ok(posteriors
        .rows()
        .into_iter()
        .map(|row| argmax(row.as_slice().expect("standard layout")) + 1)
        .collect())
}

/// Reshapes a sample stream into one row per symbol.
pub fn stream_to_blocks(stream: &[f64], samples_per_symbol: usize) -> Result<Array2<f64>> {
    if samples_per_symbol == 0 || stream.len() % samples_per_symbol != 0 {
        return Err(Error::Shape(format!(
            "stream length {} is not a multiple of {samples_per_symbol}",
            stream.len()
        )));
    }
    Array2::from_shape_vec((stream.len() / samples_per_symbol, samples_per_symbol), stream.to_vec())
        .map_err(|e| Error::Shape(e.to_string()))
}
