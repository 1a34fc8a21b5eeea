use ndarray::{s, Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gan::{draw_noise, generator_input};
use crate::nn::{one_hot, softmax_cross_entropy, AdamState, DenseNet, Rng};
use crate::transceiver::message_one_hot;

/// Transmitter and receiver with their optimizer state.
#[derive(Debug, Clone, PartialEq)]
pub struct Transceiver {
    pub transmitter: DenseNet,
    pub receiver: DenseNet,
    pub tx_adam: AdamState,
    pub rx_adam: AdamState,
}

impl Transceiver {
    /// Wraps a pair with fresh optimizer state.
    pub fn new(transmitter: DenseNet, receiver: DenseNet) -> Result<Self> {
        if receiver.input_width() != transmitter.output_width() || transmitter.input_width() != receiver.output_width()
        {
            return Err(Error::Shape(format!(
                "transmitter {}->{} and receiver {}->{} do not form an autoencoder",
                transmitter.input_width(),
                transmitter.output_width(),
                receiver.input_width(),
                receiver.output_width()
            )));
        }
        Ok(Self {
            tx_adam: AdamState::for_net(&transmitter),
            rx_adam: AdamState::for_net(&receiver),
            transmitter,
            receiver,
        })
    }

    pub fn order(&self) -> usize {
        self.transmitter.input_width()
    }

    pub fn samples_per_symbol(&self) -> usize {
        self.transmitter.output_width()
    }

    /// Drops the optimizer moments, keeping the networks.
    pub fn with_fresh_optimizers(&self) -> Self {
        Self {
            transmitter: self.transmitter.clone(),
            receiver: self.receiver.clone(),
            tx_adam: AdamState::for_net(&self.transmitter),
            rx_adam: AdamState::for_net(&self.receiver),
        }
    }
}

/// Message windows `(s_{i-h}, ..., s_{i+h})` for the first `q` positions of
/// a sequence, skipping positions without full neighbour context.
pub fn context_windows(messages: &[usize], q: usize, memory: usize) -> Result<Vec<Vec<usize>>> {
    if memory == 0 || memory % 2 == 0 {
        return Err(Error::config(format!("memory {memory} must be odd")));
    }
    let half = (memory - 1) / 2;
    let last = q.min(messages.len().saturating_sub(half));
    let windows: Vec<Vec<usize>> = (half..last).map(|c| messages[c - half..=c + half].to_vec()).collect();
    if windows.is_empty() {
        return Err(Error::Usage(format!(
            "no transceiver rows with full context among the first {q} of {} messages",
            messages.len()
        )));
    }
    Ok(windows)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UpdateSettings {
    pub inner_steps: usize,
    pub learning_rate: f64,
    /// Off leaves the transmitter and its optimizer untouched.
    pub update_transmitter: bool,
}

fn numeric(step: usize, what: String) -> Error {
    Error::Numeric { step, what }
}

/// Updates transmitter and receiver through the frozen generator standing in
/// for the channel. `windows` hold message windows of the generator's memory;
/// the loss targets their centre messages. Returns the loss of every step.
pub fn transceiver_update_through_generator(
    transceiver: &mut Transceiver,
    generator: Option<&DenseNet>,
    windows: &[Vec<usize>],
    settings: &UpdateSettings,
    rng: &mut Rng,
) -> Result<Vec<f64>> {
    let generator = generator.ok_or_else(|| Error::Usage("transceiver update needs a trained generator".into()))?;
    let order = transceiver.order();
    let n = transceiver.samples_per_symbol();
    let memory = windows.first().map(Vec::len).unwrap_or(0);
    if windows.is_empty() || memory % 2 == 0 || windows.iter().any(|w| w.len() != memory) {
        return Err(Error::Usage(
            "transceiver windows must be non-empty and of one odd length".into(),
        ));
    }
    let width = memory * n;
    if generator.input_width() != 2 * width || generator.output_width() != n {
        return Err(Error::Shape(format!(
            "generator {}->{} does not fit windows of {memory} blocks of {n}",
            generator.input_width(),
            generator.output_width()
        )));
    }
    let rows = windows.len();
    let flat: Vec<usize> = windows.iter().flatten().copied().collect();
    let inputs = message_one_hot(&flat, order)?;
    let labels = one_hot(windows.iter().map(|w| w[memory / 2] - 1), order);
    let noise = draw_noise(rows, width, rng);

    let mut losses = Vec::with_capacity(settings.inner_steps);
    for step in 0..settings.inner_steps {
        let tx_cache = transceiver.transmitter.forward_batch(inputs.view())?;
        let blocks = tx_cache.output().to_owned();
        let packed = blocks
            .into_shape_with_order((rows, width))
            .map_err(|e| Error::Shape(e.to_string()))?;
        let g_cache = generator.forward_batch(generator_input(noise.view(), packed.view())?.view())?;
        let rx_cache = transceiver.receiver.forward_batch(g_cache.output())?;
        let (loss, grad) = softmax_cross_entropy(labels.view(), rx_cache.output())?;
        if !loss.is_finite() {
            return Err(numeric(step, format!("transceiver loss is {loss}")));
        }
        let (rx_grads, fake_grad) = transceiver
            .receiver
            .backward_batch_pre_activation(&rx_cache, grad.view())?;
        if settings.update_transmitter {
            let input_grad = generator.input_gradient_batch(&g_cache, fake_grad.view())?;
            let window_grad = input_grad
                .slice(s![.., width..])
                .to_owned()
                .into_shape_with_order((rows * memory, n))
                .map_err(|e| Error::Shape(e.to_string()))?;
            let (tx_grads, _) = transceiver.transmitter.backward_batch(&tx_cache, window_grad.view())?;
            transceiver
                .transmitter
                .apply_adam(&mut transceiver.tx_adam, &tx_grads, settings.learning_rate)?;
        }
        transceiver
            .receiver
            .apply_adam(&mut transceiver.rx_adam, &rx_grads, settings.learning_rate)?;
        losses.push(loss);
    }
    Ok(losses)
}

/// Fine-tunes the receiver alone on measured `(message, received block)` pairs.
pub fn receiver_only_update(
    receiver: &mut DenseNet,
    state: &mut AdamState,
    messages: &[usize],
    received: ArrayView2<'_, f64>,
    steps: usize,
    learning_rate: f64,
) -> Result<Vec<f64>> {
    if messages.is_empty() || messages.len() != received.nrows() {
        return Err(Error::Shape(format!(
            "{} messages against {} received blocks",
            messages.len(),
            received.nrows()
        )));
    }
    let labels: Array2<f64> = message_one_hot(messages, receiver.output_width())?;
    let mut losses = Vec::with_capacity(steps);
    for step in 0..steps {
        let cache = receiver.forward_batch(received)?;
        let (loss, grad) = softmax_cross_entropy(labels.view(), cache.output())?;
        if !loss.is_finite() {
            return Err(numeric(step, format!("receiver loss is {loss}")));
        }
        let (grads, _) = receiver.backward_batch_pre_activation(&cache, grad.view())?;
        receiver.apply_adam(state, &grads, learning_rate)?;
        losses.push(loss);
    }
    Ok(losses)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn context_windows_skip_boundaries() {
        let msgs = [1, 2, 3, 4, 5, 6];
        let w = context_windows(&msgs, 4, 3).unwrap();
        assert_eq!(w, vec![vec![1, 2, 3], vec![2, 3, 4], vec![3, 4, 5]]);
        let all = context_windows(&msgs, 6, 3).unwrap();
        assert_eq!(all.len(), 4);
        assert!(context_windows(&msgs, 1, 3).is_err());
    }
}
