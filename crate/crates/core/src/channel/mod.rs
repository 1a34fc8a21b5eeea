//! Software stand-in for the optical test-bed.
//!
//! The measured-data loop only ever sees [`Channel`]: a forward map from a
//! transmitted sample stream to a received one. Stage internals stay in
//! [`stages`]; [`SmoothImdd`] is a separate differentiable approximation
//! used for offline pretraining.

mod model;
pub mod stages;

pub use model::{SmoothImdd, SmoothTape};

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::Rng;

/// Physical constants of the simulated IM/DD link.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelConfig {
    pub samples_per_symbol: usize,
    /// DAC/ADC sample rate in samples per second.
    pub dac_rate: f64,
    /// One-sided brick-wall bandwidth in Hz.
    pub lpf_bandwidth: f64,
    /// Fibre length in metres.
    pub fiber_length: f64,
    /// Dispersion parameter D in s/m^2 (17 ps/(nm km) = 17e-6 s/m^2).
    pub dispersion: f64,
    pub wavelength: f64,
    pub dac_bits: u32,
    pub adc_bits: u32,
    /// Drive scaling inside the modulator sine; 1 maps u in [0, 1] to a full swing.
    pub modulator_vpi_normalization: f64,
    /// Receiver noise standard deviation, in units of detected intensity.
    pub receiver_noise_sigma: f64,
    pub seed: u64,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        Self {
            samples_per_symbol: 6,
            dac_rate: 84e9,
            lpf_bandwidth: 32e9,
            fiber_length: 20e3,
            dispersion: 17e-6,
            wavelength: 1550e-9,
            dac_bits: 8,
            adc_bits: 8,
            modulator_vpi_normalization: 1.0,
            receiver_noise_sigma: DEFAULT_NOISE_SIGMA,
            seed: 0x1dd,
        }
    }
}

/// Receiver noise giving a k = 0 bit error rate of a few percent with the
/// default pretraining.
pub const DEFAULT_NOISE_SIGMA: f64 = 0.03;

impl ChannelConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::config(m));
        if self.samples_per_symbol == 0 {
            return fail("samples_per_symbol must be at least 1".into());
        }
        for (name, v) in [
            ("dac_rate", self.dac_rate),
            ("lpf_bandwidth", self.lpf_bandwidth),
            ("wavelength", self.wavelength),
            ("modulator_vpi_normalization", self.modulator_vpi_normalization),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return fail(format!("{name} must be positive, got {v}"));
            }
        }
        if !(self.fiber_length >= 0.0 && self.fiber_length.is_finite()) {
            return fail(format!("fiber_length must be nonnegative, got {}", self.fiber_length));
        }
        if !self.dispersion.is_finite() {
            return fail("dispersion must be finite".into());
        }
        if !(self.receiver_noise_sigma >= 0.0 && self.receiver_noise_sigma.is_finite()) {
            return fail(format!(
                "receiver_noise_sigma must be nonnegative, got {}",
                self.receiver_noise_sigma
            ));
        }
        if self.lpf_bandwidth >= self.dac_rate / 2.0 {
            return fail(format!(
                "lpf_bandwidth {:e} Hz must be below the Nyquist frequency {:e} Hz",
                self.lpf_bandwidth,
                self.dac_rate / 2.0
            ));
        }
        for (name, bits) in [("dac_bits", self.dac_bits), ("adc_bits", self.adc_bits)] {
            if !(1..=16).contains(&bits) {
                return fail(format!("{name} must be within 1..=16, got {bits}"));
            }
        }
        Ok(())
    }

    pub fn beta2(&self) -> f64 {
        stages::beta2_from_dispersion(self.dispersion, self.wavelength)
    }
}

/// Black-box link: forward evaluation only.
pub trait Channel: Send + Sync {
    fn samples_per_symbol(&self) -> usize;

    /// Sends one sequence. `stream_index` selects the noise realization, so
    /// repeated calls with the same index return identical output.
    fn transmit(&self, tx: &[f64], stream_index: u64) -> Result<Vec<f64>>;
}

fn check_stream(tx: &[f64], n: usize) -> Result<()> {
    if tx.is_empty() {
        return Err(Error::Usage("empty transmit stream".into()));
    }
    if tx.len() % n != 0 {
        return Err(Error::Usage(format!(
            "stream length {} is not a multiple of {n} samples per symbol",
            tx.len()
        )));
    }
    Ok(())
}

/// The full IM/DD chain:
/// LPF, DAC, MZM, dispersive fibre, PIN/TIA, ADC, scaling and offset correction.
#[derive(Debug, Clone)]
pub struct ImddOracle {
    config: ChannelConfig,
}

impl ImddOracle {
    pub fn new(config: ChannelConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self { config })
    }
}

impl Channel for ImddOracle {
    fn samples_per_symbol(&self) -> usize {
        self.config.samples_per_symbol
    }

    fn transmit(&self, tx: &[f64], stream_index: u64) -> Result<Vec<f64>> {
        let c = &self.config;
        check_stream(tx, c.samples_per_symbol)?;
        let mut rng = Rng::derive(c.seed, stream_index);

        let drive: Vec<f64> = tx.iter().map(|x| x.clamp(0.0, 1.0)).collect();
        let filtered = stages::lpf(&drive, c.lpf_bandwidth, c.dac_rate)?;
        let analog = stages::quantize(&filtered, c.dac_bits, (0.0, 1.0))?;
        let field: Vec<Complex64> = stages::mzm_modulate_scaled(&analog, c.modulator_vpi_normalization)
            .into_iter()
            .map(|e| Complex64::new(e, 0.0))
            .collect();
        let field = stages::fiber_dispersion(&field, c.beta2(), c.fiber_length, c.dac_rate);
        let mut detected = stages::square_law(&field, c.receiver_noise_sigma, &mut rng);
        let level = stages::mean(&detected);
        stages::ac_couple(&mut detected);

        let sd = stages::std_dev(&detected);
        if stages::is_degenerate(sd, level) {
            // Nothing to scale; offset correction only.
            return Ok(detected);
        }
        let mut rx = stages::quantize(&detected, c.adc_bits, (-4.0 * sd, 4.0 * sd))?;
        stages::normalize(&mut rx);
        Ok(rx)
    }
}

/// Memoryless additive white Gaussian noise, used to validate the GAN.
#[derive(Debug, Clone)]
pub struct AwgnOracle {
    samples_per_symbol: usize,
    sigma: f64,
    seed: u64,
}

impl AwgnOracle {
    pub fn new(samples_per_symbol: usize, sigma: f64, seed: u64) -> Result<Self> {
        if samples_per_symbol == 0 || !(sigma >= 0.0) {
            return Err(Error::config("AWGN channel needs n >= 1 and sigma >= 0"));
        }
        Ok(Self {
            samples_per_symbol,
            sigma,
            seed,
        })
    }
}

impl Channel for AwgnOracle {
    fn samples_per_symbol(&self) -> usize {
        self.samples_per_symbol
    }

    fn transmit(&self, tx: &[f64], stream_index: u64) -> Result<Vec<f64>> {
        check_stream(tx, self.samples_per_symbol)?;
        let mut rng = Rng::derive(self.seed, stream_index);
        Ok(stages::awgn_forward(tx, self.sigma, &mut rng))
    }
}
