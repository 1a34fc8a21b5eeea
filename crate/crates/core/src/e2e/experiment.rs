use serde::{Deserialize, Serialize};

use crate::channel::Channel;
use crate::e2e::measure::{
    conditioning_dataset, evaluate, held_out_pairs, transmit_and_measure, Evaluation, Measurement,
};
use crate::e2e::pretrain::pretrain_transceiver;
use crate::e2e::update::{
    context_windows, receiver_only_update, transceiver_update_through_generator, Transceiver, UpdateSettings,
};
use crate::e2e::ExperimentConfig;
use crate::error::{Error, Result};
use crate::gan::{train_gan, GanPair};
use crate::nn::Rng;
use crate::transceiver::{q2_from_ber, BitMapping, ConfusionMatrix, MetricsRecord};

pub const PRETRAIN_STREAM: u64 = 1;
const MEASURE_STREAM: u64 = 100;
const GAN_STREAM: u64 = 10_000;
const UPDATE_STREAM: u64 = 20_000;

/// Everything the outer loop carries from one iteration to the next.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentState {
    pub transceiver: Transceiver,
    pub gan: Option<GanPair>,
    /// One record per completed iteration, starting with k = 0.
    pub history: Vec<MetricsRecord>,
    /// The latest transmission, made with the current transceiver.
    pub measurement: Measurement,
    pub confusion_initial: ConfusionMatrix,
    pub confusion_latest: ConfusionMatrix,
    pub mapping: BitMapping,
}

impl ExperimentState {
    pub fn completed_iterations(&self) -> usize {
        self.history.len().saturating_sub(1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineResult {
    pub steps: usize,
    pub record: MetricsRecord,
    pub losses: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutcome {
    pub state: ExperimentState,
    /// The k = 0 pair, before any measured-data update.
    pub initial: Transceiver,
    pub baseline: BaselineResult,
    /// Final Q² of the surrogate loop minus that of the receiver-only baseline.
    pub q2_delta_db: Option<f64>,
}

/// The outer optimization loop around a black-box channel.
pub struct Experiment<'a> {
    config: ExperimentConfig,
    oracle: &'a dyn Channel,
}

impl<'a> Experiment<'a> {
    pub fn new(config: ExperimentConfig, oracle: &'a dyn Channel) -> Result<Self> {
        config.validate()?;
        if oracle.samples_per_symbol() != config.transceiver.samples_per_symbol {
            return Err(Error::config(format!(
                "channel carries {} samples per symbol, transceiver {}",
                oracle.samples_per_symbol(),
                config.transceiver.samples_per_symbol
            )));
        }
        Ok(Self { config, oracle })
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.config
    }

    fn measure(&self, transceiver: &Transceiver, round: usize) -> Result<Measurement> {
        let mut rng = Rng::derive(self.config.seed, MEASURE_STREAM + round as u64);
        let sequences = self.config.sequences;
        transmit_and_measure(
            &transceiver.transmitter,
            self.oracle,
            sequences,
            self.config.messages_per_sequence,
            &mut rng,
            (round * sequences) as u64,
        )
        .map_err(|e| e.in_stage("transmit"))
    }

    /// Pretrains a pair offline, then transmits and evaluates it (k = 0).
    pub fn initialize(&self) -> Result<ExperimentState> {
        let mut rng = Rng::derive(self.config.seed, PRETRAIN_STREAM);
        let (transceiver, _) = pretrain_transceiver(&self.config, &mut rng).map_err(|e| e.in_stage("pretrain"))?;
        self.initialize_from(transceiver)
    }

    /// k = 0 transmission and evaluation of a given pair.
    pub fn initialize_from(&self, transceiver: Transceiver) -> Result<ExperimentState> {
        let (measurement, eval) = self.evaluate_round(&transceiver, 0)?;
        Ok(ExperimentState {
            transceiver,
            gan: None,
            history: vec![eval.record],
            measurement,
            confusion_initial: eval.confusion.clone(),
            confusion_latest: eval.confusion,
            mapping: eval.mapping,
        })
    }

    /// Trains the GAN on the latest measurement, updates the pair through the
    /// generator, then transmits and evaluates again. A failure leaves `state`
    /// untouched.
    pub fn run_iteration(&self, state: &mut ExperimentState, k: usize) -> Result<MetricsRecord> {
        if k != state.history.len() {
            return Err(Error::Usage(format!(
                "iteration {k} requested after {} records",
                state.history.len()
            )));
        }
        let cfg = &self.config;
        let q = cfg.effective_q();
        let mut next = state.clone();

        let dataset = conditioning_dataset(&state.measurement, cfg.gan.memory, q).map_err(|e| e.in_stage("dataset"))?;
        let mut gan_rng = Rng::derive(cfg.seed, GAN_STREAM + k as u64);
        let (pair, losses) =
            train_gan(&dataset, &cfg.gan, &mut gan_rng, next.gan.take()).map_err(|e| e.in_stage("gan"))?;

        let windows = context_windows(state.measurement.sequences[0].messages(), q, cfg.gan.memory)
            .map_err(|e| e.in_stage("update"))?;
        let settings = UpdateSettings {
            inner_steps: cfg.inner_transceiver_steps,
            learning_rate: cfg.transceiver_lr,
            update_transmitter: true,
        };
        let mut update_rng = Rng::derive(cfg.seed, UPDATE_STREAM + k as u64);
        transceiver_update_through_generator(
            &mut next.transceiver,
            Some(&pair.generator),
            &windows,
            &settings,
            &mut update_rng,
        )
        .map_err(|e| e.in_stage("update"))?;

        let (measurement, eval) = self.evaluate_round(&next.transceiver, k)?;
        next.measurement = measurement;
        let mut record = eval.record;
        if let Some(last) = losses.last() {
            record.gan_generator_loss = Some(last.generator);
            record.gan_discriminator_loss = Some(last.discriminator);
        }
        next.gan = Some(pair);
        next.confusion_latest = eval.confusion;
        next.mapping = eval.mapping;
        next.history.push(record.clone());
        *state = next;
        Ok(record)
    }

    /// Receiver-only fine-tuning from the k = 0 pair on the k = 0 held-out
    /// pairs, evaluated on the same messages and channel streams as the final
    /// iteration.
    pub fn receiver_only_baseline(
        &self,
        initial: &Transceiver,
        initial_measurement: &Measurement,
    ) -> Result<BaselineResult> {
        let cfg = &self.config;
        let steps = cfg.baseline_steps();
        let mut pair = initial.with_fresh_optimizers();
        let (messages, received) =
            held_out_pairs(initial_measurement, cfg.effective_q()).map_err(|e| e.in_stage("baseline"))?;
        let losses = receiver_only_update(
            &mut pair.receiver,
            &mut pair.rx_adam,
            &messages,
            received,
            steps,
            cfg.transceiver_lr,
        )
        .map_err(|e| e.in_stage("baseline"))?;
        let (_, eval) = self.evaluate_round(&pair, cfg.iterations)?;
        Ok(BaselineResult {
            steps,
            record: eval.record,
            losses,
        })
    }

    /// Transmits round `round` with `transceiver` and evaluates it.
    pub fn evaluate_round(&self, transceiver: &Transceiver, round: usize) -> Result<(Measurement, Evaluation)> {
        let measurement = self.measure(transceiver, round)?;
        let eval = evaluate(&transceiver.receiver, &measurement, round).map_err(|e| e.in_stage("evaluate"))?;
        Ok((measurement, eval))
    }

    /// Full run: initialization, receiver-only baseline and K iterations.
    /// `on_state` sees the state after k = 0 and after every iteration; the
    /// newest record is the last entry of its history.
    pub fn run(&self, mut on_state: impl FnMut(&ExperimentState) -> Result<()>) -> Result<ExperimentOutcome> {
        let mut state = self.initialize()?;
        self.run_from(&mut state, &mut on_state)
    }

    pub fn run_from(
        &self,
        state: &mut ExperimentState,
        on_state: &mut dyn FnMut(&ExperimentState) -> Result<()>,
    ) -> Result<ExperimentOutcome> {
        if state.history.len() != 1 {
            return Err(Error::Usage("a run starts from a freshly initialized state".into()));
        }
        let initial = state.transceiver.with_fresh_optimizers();
        on_state(state)?;
        let baseline = self.receiver_only_baseline(&initial, &state.measurement)?;
        for k in 1..=self.config.iterations {
            self.run_iteration(state, k)?;
            on_state(state)?;
        }
        let last = state.history.last().expect("k = 0 record");
        let q2_delta_db = match (q2_from_ber(last.ber), q2_from_ber(baseline.record.ber)) {
            (Ok(a), Ok(b)) => Some(a - b),
            _ => None,
        };
        Ok(ExperimentOutcome {
            state: state.clone(),
            initial,
            baseline,
            q2_delta_db,
        })
    }
}
