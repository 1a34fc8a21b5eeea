use ndarray::{concatenate, s, Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gan::{
    discriminator_input, draw_noise, g_lr_schedule, generator_input, ConditioningDataset, GanConfig, GanPair,
    LABEL_FAKE, LABEL_REAL,
};
use crate::nn::{softmax_cross_entropy, AdamState, Rng, DEFAULT_BETA2, DEFAULT_EPSILON};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepLosses {
    pub step: usize,
    /// Discriminator loss of the last discriminator update in the step.
    pub discriminator: f64,
    pub generator: f64,
}

/// A GAN pair with the Adam state of both networks.
#[derive(Debug, Clone)]
pub struct GanTrainer {
    pub pair: GanPair,
    pub d_state: AdamState,
    pub g_state: AdamState,
    pub config: GanConfig,
}

impl GanTrainer {
    pub fn new(pair: GanPair, config: GanConfig) -> Result<Self> {
        config.validate()?;
        if pair.memory() != config.memory || pair.samples_per_symbol() != config.samples_per_symbol {
            return Err(Error::Shape("gan pair does not match the configuration".into()));
        }
        let adam = |net: &crate::nn::DenseNet| {
            AdamState::with_hyperparameters(net.parameter_count(), config.adam_beta1, DEFAULT_BETA2, DEFAULT_EPSILON)
        };
        Ok(Self {
            d_state: adam(&pair.discriminator),
            g_state: adam(&pair.generator),
            pair,
            config,
        })
    }

    fn sample_batch(&self, dataset: &ConditioningDataset, rng: &mut Rng) -> (Array2<f64>, Array2<f64>) {
        let rows: Vec<usize> = (0..self.config.batch_size).map(|_| rng.below(dataset.len())).collect();
        dataset.gather(&rows)
    }

    /// One discriminator step on a fresh batch; the generator is untouched.
    pub fn discriminator_update(&mut self, dataset: &ConditioningDataset, step: usize, rng: &mut Rng) -> Result<f64> {
        let (windows, targets) = self.sample_batch(dataset, rng);
        let batch = windows.nrows();
        let noise = draw_noise(batch, self.pair.window_width(), rng);
        let fake = self
            .pair
            .generator
            .predict_batch(generator_input(noise.view(), windows.view())?.view())?;

        let real_in = discriminator_input(targets.view(), windows.view())?;
        let fake_in = discriminator_input(fake.view(), windows.view())?;
        let input = concatenate![Axis(0), real_in, fake_in];
        let labels = Array2::from_shape_fn(
            (2 * batch, 2),
            |(r, j)| {
                if r < batch {
                    LABEL_REAL[j]
                } else {
                    LABEL_FAKE[j]
                }
            },
        );

        let d = &self.pair.discriminator;
        let cache = d.forward_batch(input.view())?;
        // mean over 2B rows; the loss is a sum of two B-averages.
        let (mean, mut grad) = softmax_cross_entropy(labels.view(), cache.output())?;
        let loss = 2.0 * mean;
        check_finite(loss, step, "discriminator loss")?;
        grad *= 2.0;
        let (grads, _) = d.backward_batch_pre_activation(&cache, grad.view())?;
        self.pair
            .discriminator
            .apply_adam(&mut self.d_state, &grads, self.config.d_learning_rate)
            .map_err(|e| restep(e, step))?;
        Ok(loss)
    }

    /// One generator step against the frozen discriminator.
    pub fn generator_update(&mut self, dataset: &ConditioningDataset, step: usize, rng: &mut Rng) -> Result<f64> {
        let (windows, _) = self.sample_batch(dataset, rng);
        let batch = windows.nrows();
        let n = self.pair.samples_per_symbol();
        let noise = draw_noise(batch, self.pair.window_width(), rng);

        let g = &self.pair.generator;
        let d = &self.pair.discriminator;
        let g_cache = g.forward_batch(generator_input(noise.view(), windows.view())?.view())?;
        let d_cache = d.forward_batch(discriminator_input(g_cache.output(), windows.view())?.view())?;
        let labels = Array2::from_shape_fn((batch, 2), |(_, j)| LABEL_REAL[j]);
        let (loss, grad) = softmax_cross_entropy(labels.view(), d_cache.output())?;
        check_finite(loss, step, "generator loss")?;

        let d_input_grad = d.input_gradient_batch_pre_activation(&d_cache, grad.view())?;
        let fake_grad = d_input_grad.slice(s![.., ..n]);
        let (grads, _) = g.backward_batch(&g_cache, fake_grad)?;
        let lr = g_lr_schedule(step, &self.config);
        self.pair
            .generator
            .apply_adam(&mut self.g_state, &grads, lr)
            .map_err(|e| restep(e, step))?;
        Ok(loss)
    }
}

fn check_finite(loss: f64, step: usize, what: &str) -> Result<()> {
    if loss.is_finite() {
        Ok(())
    } else {
        Err(Error::Numeric {
            step,
            what: format!("{what} is {loss}"),
        })
    }
}

fn restep(err: Error, step: usize) -> Error {
    match err {
        Error::Numeric { what, .. } => Error::Numeric { step, what },
        other => other,
    }
}

/// `d_updates_per_step` discriminator updates on fresh batches, then one
/// generator update against the frozen discriminator.
pub fn gan_train_step(
    trainer: &mut GanTrainer,
    dataset: &ConditioningDataset,
    step: usize,
    rng: &mut Rng,
) -> Result<StepLosses> {
    if dataset.is_empty() {
        return Err(Error::Usage("empty conditioning dataset".into()));
    }
    if dataset.memory() != trainer.pair.memory() || dataset.samples_per_symbol() != trainer.pair.samples_per_symbol() {
        return Err(Error::Shape("dataset windows do not match the gan".into()));
    }
    let mut d_loss = f64::NAN;
    for _ in 0..trainer.config.d_updates_per_step {
        d_loss = trainer.discriminator_update(dataset, step, rng)?;
    }
    let g_loss = trainer.generator_update(dataset, step, rng)?;
    Ok(StepLosses {
        step,
        discriminator: d_loss,
        generator: g_loss,
    })
}

/// Runs `total_steps` training steps, from `initial` when warm starting.
pub fn train_gan(
    dataset: &ConditioningDataset,
    config: &GanConfig,
    rng: &mut Rng,
    initial: Option<GanPair>,
) -> Result<(GanPair, Vec<StepLosses>)> {
    config.validate()?;
    if dataset.len() < config.batch_size {
        return Err(Error::Usage(format!(
            "dataset has {} rows, fewer than the batch size {}",
            dataset.len(),
            config.batch_size
        )));
    }
    let pair = match initial {
        Some(pair) if config.warm_start => pair,
        _ => GanPair::new(config.memory, config.samples_per_symbol, rng)?,
    };
    let mut trainer = GanTrainer::new(pair, config.clone())?;
    let mut history = Vec::with_capacity(config.total_steps);
    for step in 0..config.total_steps {
        history.push(gan_train_step(&mut trainer, dataset, step, rng)?);
    }
    Ok((trainer.pair, history))
}
