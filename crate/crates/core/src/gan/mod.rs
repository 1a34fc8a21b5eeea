//! Conditional GAN channel model.
//!
//! The generator maps `(z, window)` to a received block, where `window` holds
//! the `m` transmitted blocks around the symbol and `z ~ U(0,1)^(m n)`. The
//! discriminator scores `(block, window)` as real or fake with a 2-way
//! softmax; real is labelled `(0, 1)`, fake `(1, 0)`.

mod dataset;
mod train;
mod validate;

pub use dataset::{build_conditioning_dataset, ConditioningDataset, TransceiverRow};
pub use train::{gan_train_step, train_gan, GanTrainer, StepLosses};
pub use validate::{
    energy_distance, validate_generator, ChannelSource, ConditionalSource, FidelityReport, GeneratorSource,
};

use ndarray::{concatenate, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{cross_entropy_rows, Activation, DenseNet, LayerSpec, Rng};

pub const LABEL_REAL: [f64; 2] = [0.0, 1.0];
pub const LABEL_FAKE: [f64; 2] = [1.0, 0.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GanConfig {
    /// Symbol memory m (odd).
    pub memory: usize,
    pub samples_per_symbol: usize,
    pub batch_size: usize,
    pub total_steps: usize,
    pub d_updates_per_step: usize,
    pub d_learning_rate: f64,
    pub g_lr_start: f64,
    pub g_lr_end: f64,
    pub g_lr_interval: usize,
    pub warm_start: bool,
    /// First-moment decay of both GAN optimizers.
    pub adam_beta1: f64,
}

impl Default for GanConfig {
    fn default() -> Self {
        Self {
            memory: 3,
            samples_per_symbol: 6,
            batch_size: 1000,
            total_steps: 10_000,
            d_updates_per_step: 4,
            d_learning_rate: 1e-3,
            g_lr_start: 5e-4,
            g_lr_end: 1e-5,
            g_lr_interval: 200,
            warm_start: false,
            adam_beta1: 0.5,
        }
    }
}

impl GanConfig {
    pub fn validate(&self) -> Result<()> {
        if self.memory == 0 || self.memory % 2 == 0 {
            return Err(Error::config(format!("gan memory must be odd, got {}", self.memory)));
        }
        if self.samples_per_symbol == 0 || self.batch_size == 0 || self.total_steps == 0 {
            return Err(Error::config(
                "samples_per_symbol, batch_size and total_steps must be positive",
            ));
        }
        if self.g_lr_interval == 0 {
            return Err(Error::config("g_lr_interval must be positive"));
        }
        if !(0.0..1.0).contains(&self.adam_beta1) {
            return Err(Error::config(format!(
                "adam_beta1 must lie in [0, 1), got {}",
                self.adam_beta1
            )));
        }
        if !(self.d_learning_rate > 0.0) {
            return Err(Error::config("d_learning_rate must be positive"));
        }
        if !(self.g_lr_end > 0.0 && self.g_lr_start >= self.g_lr_end) {
            return Err(Error::config(format!(
                "need g_lr_start >= g_lr_end > 0, got {} and {}",
                self.g_lr_start, self.g_lr_end
            )));
        }
        Ok(())
    }

    pub fn schedule_intervals(&self) -> usize {
        self.total_steps.div_ceil(self.g_lr_interval)
    }
}

/// Generator learning rate: piecewise-constant geometric decay from
/// `g_lr_start` to `g_lr_end` over `total_steps / g_lr_interval` intervals.
pub fn g_lr_schedule(step: usize, config: &GanConfig) -> f64 {
    let intervals = config.schedule_intervals();
    let k = (step / config.g_lr_interval).min(intervals.saturating_sub(1));
    if intervals <= 1 || k == 0 {
        return config.g_lr_start;
    }
    if k == intervals - 1 {
        return config.g_lr_end;
    }
    let ratio = config.g_lr_end / config.g_lr_start;
    config.g_lr_start * ratio.powf(k as f64 / (intervals - 1) as f64)
}

/// Hidden widths of the generator, as multiples of n, followed by a linear n output.
pub const GENERATOR_WIDTHS: [usize; 5] = [30, 20, 13, 8, 5];
/// Hidden widths of the discriminator, as multiples of n, followed by a 2-way softmax.
pub const DISCRIMINATOR_WIDTHS: [usize; 3] = [16, 10, 6];

pub fn generator_specs(memory: usize, n: usize) -> Vec<LayerSpec> {
    let mut layers: Vec<(usize, Activation)> = GENERATOR_WIDTHS.iter().map(|&w| (w * n, Activation::Relu)).collect();
    layers.push((n, Activation::Linear));
    LayerSpec::chain(2 * memory * n, &layers)
}

pub fn discriminator_specs(memory: usize, n: usize) -> Vec<LayerSpec> {
    let mut layers: Vec<(usize, Activation)> = DISCRIMINATOR_WIDTHS
        .iter()
        .map(|&w| (w * n, Activation::Relu))
        .collect();
    layers.push((2, Activation::Softmax));
    LayerSpec::chain((memory + 1) * n, &layers)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GanPair {
    pub generator: DenseNet,
    pub discriminator: DenseNet,
    memory: usize,
    samples_per_symbol: usize,
}

/// Losses of one batch together with the discriminator outputs they came from.
#[derive(Debug, Clone)]
pub struct BatchLosses {
    pub discriminator: f64,
    pub generator: f64,
    pub p_real: Array2<f64>,
    pub p_fake: Array2<f64>,
}

impl GanPair {
    pub fn new(memory: usize, samples_per_symbol: usize, rng: &mut Rng) -> Result<Self> {
        if memory == 0 || memory % 2 == 0 || samples_per_symbol == 0 {
            return Err(Error::config(format!(
                "invalid gan shape: memory {memory}, n {samples_per_symbol}"
            )));
        }
        Ok(Self {
            generator: DenseNet::new(&generator_specs(memory, samples_per_symbol), rng)?,
            discriminator: DenseNet::new(&discriminator_specs(memory, samples_per_symbol), rng)?,
            memory,
            samples_per_symbol,
        })
    }

    pub fn from_nets(generator: DenseNet, discriminator: DenseNet, memory: usize) -> Result<Self> {
        let n = generator.output_width();
        if generator.input_width() != 2 * memory * n
            || discriminator.input_width() != (memory + 1) * n
            || discriminator.output_width() != 2
        {
            return Err(Error::Shape("networks do not form a conditional GAN".into()));
        }
        Ok(Self {
            generator,
            discriminator,
            memory,
            samples_per_symbol: n,
        })
    }

    pub fn memory(&self) -> usize {
        self.memory
    }

    pub fn samples_per_symbol(&self) -> usize {
        self.samples_per_symbol
    }

    pub fn window_width(&self) -> usize {
        self.memory * self.samples_per_symbol
    }

    /// Mean discriminator and generator losses of one batch for fixed noise `z`.
    pub fn batch_losses(
        &self,
        windows: ArrayView2<'_, f64>,
        targets: ArrayView2<'_, f64>,
        noise: ArrayView2<'_, f64>,
    ) -> Result<BatchLosses> {
        let fake = self.generator.predict_batch(generator_input(noise, windows)?.view())?;
        let p_real = self
            .discriminator
            .predict_batch(discriminator_input(targets, windows)?.view())?;
        let p_fake = self
            .discriminator
            .predict_batch(discriminator_input(fake.view(), windows)?.view())?;
        Ok(BatchLosses {
            discriminator: discriminator_loss(p_real.view(), p_fake.view())?,
            generator: generator_loss(p_fake.view())?,
            p_real,
            p_fake,
        })
    }
}

/// `[z | window]` rows.
pub fn generator_input(noise: ArrayView2<'_, f64>, windows: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    concat_rows(noise, windows)
}

/// `[block | window]` rows.
pub fn discriminator_input(blocks: ArrayView2<'_, f64>, windows: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    concat_rows(blocks, windows)
}

fn concat_rows(a: ArrayView2<'_, f64>, b: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    if a.nrows() != b.nrows() {
        return Err(Error::Shape(format!("{} rows vs {} rows", a.nrows(), b.nrows())));
    }
    Ok(concatenate![Axis(1), a, b])
}

/// `rows x width` i.i.d. U(0, 1) samples.
pub fn draw_noise(rows: usize, width: usize, rng: &mut Rng) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, width), || rng.uniform())
}

fn labels(rows: usize, label: [f64; 2]) -> Array2<f64> {
    Array2::from_shape_fn((rows, 2), |(_, j)| label[j])
}

/// `(1/B) sum [l(l_r, p_r) + l(l_f, p_f)]`
pub fn discriminator_loss(p_real: ArrayView2<'_, f64>, p_fake: ArrayView2<'_, f64>) -> Result<f64> {
    let rows = p_real.nrows();
    if rows == 0 || p_fake.nrows() != rows {
        return Err(Error::Usage(format!(
            "discriminator loss needs equal nonempty batches, got {} and {}",
            rows,
            p_fake.nrows()
        )));
    }
    let real = cross_entropy_rows(labels(rows, LABEL_REAL).view(), p_real)?.sum();
    let fake = cross_entropy_rows(labels(rows, LABEL_FAKE).view(), p_fake)?.sum();
    Ok((real + fake) / rows as f64)
}

/// `(1/B) sum l(l_r, p_f)`
pub fn generator_loss(p_fake: ArrayView2<'_, f64>) -> Result<f64> {
    let rows = p_fake.nrows();
    if rows == 0 {
        return Err(Error::Usage("generator loss needs a nonempty batch".into()));
    }
    Ok(cross_entropy_rows(labels(rows, LABEL_REAL).view(), p_fake)?.sum() / rows as f64)
}
