use serde::{Deserialize, Serialize};

use crate::channel::ChannelConfig;
use crate::error::{Error, Result};
use crate::gan::GanConfig;
use crate::transceiver::TransceiverConfig;

/// Offline initialization on the smooth differentiable link model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PretrainConfig {
    pub steps: usize,
    /// Symbols per training sequence (one sequence per Adam step).
    pub symbols_per_batch: usize,
    pub learning_rate: f64,
    /// Fibre length assumed by the model, as a fraction of the real one.
    pub fiber_length_scale: f64,
    /// Receiver noise assumed by the model.
    pub noise_sigma: f64,
}

impl Default for PretrainConfig {
    fn default() -> Self {
        Self {
            steps: 3000,
            symbols_per_batch: 256,
            learning_rate: 1e-3,
            fiber_length_scale: 0.9,
            noise_sigma: 0.03,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// Outer optimization iterations K.
    pub iterations: usize,
    /// Sequences N per transmission.
    pub sequences: usize,
    /// Messages w per sequence.
    pub messages_per_sequence: usize,
    /// Transceiver rows q per iteration (capped at 10% of N w).
    pub q: usize,
    pub inner_transceiver_steps: usize,
    pub transceiver_lr: f64,
    /// Adam steps of the receiver-only baseline; `None` matches the total
    /// number of transceiver updates, K times the inner steps.
    pub baseline_rx_steps: Option<usize>,
    pub seed: u64,
    pub transceiver: TransceiverConfig,
    pub channel: ChannelConfig,
    pub gan: GanConfig,
    pub pretrain: PretrainConfig,
}

impl Default for ExperimentConfig {
    /// Desk-scale run: finishes in minutes on one core.
    fn default() -> Self {
        Self {
            iterations: 10,
            sequences: 20,
            messages_per_sequence: 2000,
            q: 1000,
            inner_transceiver_steps: 1,
            transceiver_lr: 1e-3,
            baseline_rx_steps: None,
            seed: 7,
            transceiver: TransceiverConfig::default(),
            channel: ChannelConfig::default(),
            gan: GanConfig {
                total_steps: 2000,
                batch_size: 256,
                warm_start: true,
                ..GanConfig::default()
            },
            pretrain: PretrainConfig::default(),
        }
    }
}

impl ExperimentConfig {
    /// The configuration of the hardware run (500 sequences of 80 000 messages).
    pub fn hardware_scale() -> Self {
        Self {
            sequences: 500,
            messages_per_sequence: 80_000,
            gan: GanConfig::default(),
            ..Self::default()
        }
    }

    /// Sets the experiment seed and derives the channel noise seed from it.
    pub fn reseed(&mut self, seed: u64) {
        self.seed = seed;
        self.channel.seed = seed.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(0x1dd);
    }

    pub fn total_symbols(&self) -> usize {
        self.sequences * self.messages_per_sequence
    }

    /// q after the 10% cap.
    pub fn effective_q(&self) -> usize {
        self.q
            .min(self.total_symbols() / 10)
            .min(self.messages_per_sequence.saturating_sub(4))
    }

    pub fn baseline_steps(&self) -> usize {
        self.baseline_rx_steps
            .unwrap_or(self.iterations * self.inner_transceiver_steps)
    }

    pub fn validate(&self) -> Result<()> {
        self.channel.validate()?;
        self.gan.validate()?;
        self.transceiver.validate()?;
        let n = self.channel.samples_per_symbol;
        if self.transceiver.samples_per_symbol != n || self.gan.samples_per_symbol != n {
            return Err(Error::config(format!(
                "samples per symbol disagree: channel {n}, transceiver {}, gan {}",
                self.transceiver.samples_per_symbol, self.gan.samples_per_symbol
            )));
        }
        if self.iterations == 0 || self.sequences == 0 {
            return Err(Error::config("iterations and sequences must be at least 1"));
        }
        if self.total_symbols() <= self.q.min(self.total_symbols() / 10) + 4 {
            return Err(Error::config("too few symbols per transmission for q"));
        }
        let half = (self.gan.memory - 1) / 2;
        if self.messages_per_sequence < 2 * half + 3 {
            return Err(Error::config("messages_per_sequence too short for the gan memory"));
        }
        if self.effective_q() < 2 * half + 1 {
            return Err(Error::config(
                "q leaves no transceiver rows with full neighbour context",
            ));
        }
        if !(self.transceiver_lr > 0.0) || self.inner_transceiver_steps == 0 {
            return Err(Error::config("transceiver updates need lr > 0 and at least one step"));
        }
        let p = &self.pretrain;
        if p.symbols_per_batch < 4
            || !(p.learning_rate > 0.0)
            || !(p.fiber_length_scale >= 0.0)
            || !(p.noise_sigma >= 0.0)
        {
            return Err(Error::config("invalid pretraining settings"));
        }
        Ok(())
    }
}
