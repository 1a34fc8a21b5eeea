use std::f64::consts::FRAC_PI_2;

use rustfft::num_complex::Complex64;

use crate::channel::stages::{self, apply_response, dispersion_response};
use crate::channel::ChannelConfig;
use crate::error::{Error, Result};
use crate::nn::Rng;

/// Differentiable IM/DD approximation for offline transceiver training.
///
/// Same stage order as the oracle but with no converters, no saturation and
/// fixed Gaussian noise, so a vector-Jacobian product exists everywhere.
#[derive(Debug, Clone)]
pub struct SmoothImdd {
    samples_per_symbol: usize,
    sample_rate: f64,
    lpf_bandwidth: f64,
    beta2: f64,
    fiber_length: f64,
    drive_gain: f64,
    noise_sigma: f64,
}

/// Intermediate values of one [`SmoothImdd::forward`] call.
#[derive(Debug, Clone)]
pub struct SmoothTape {
    filtered: Vec<f64>,
    field: Vec<Complex64>,
    output: Vec<f64>,
    scale: f64,
}

impl SmoothImdd {
    pub fn new(config: &ChannelConfig, fiber_length: f64, noise_sigma: f64) -> Result<Self> {
        config.validate()?;
        if !(fiber_length >= 0.0) || !(noise_sigma >= 0.0) {
            return Err(Error::config("smooth model needs nonnegative length and noise"));
        }
        Ok(Self {
            samples_per_symbol: config.samples_per_symbol,
            sample_rate: config.dac_rate,
            lpf_bandwidth: config.lpf_bandwidth,
            beta2: config.beta2(),
            fiber_length,
            drive_gain: FRAC_PI_2 * config.modulator_vpi_normalization,
            noise_sigma,
        })
    }

    pub fn samples_per_symbol(&self) -> usize {
        self.samples_per_symbol
    }

    pub fn forward(&self, tx: &[f64], rng: &mut Rng) -> Result<(Vec<f64>, SmoothTape)> {
        if tx.is_empty() || tx.len() % self.samples_per_symbol != 0 {
            return Err(Error::Usage(format!(
                "stream length {} is not a positive multiple of {}",
                tx.len(),
                self.samples_per_symbol
            )));
        }
        let filtered = stages::lpf(tx, self.lpf_bandwidth, self.sample_rate)?;
        let mut field: Vec<Complex64> = filtered
            .iter()
            .map(|&v| Complex64::new((self.drive_gain * v).sin(), 0.0))
            .collect();
        if self.fiber_length > 0.0 {
            apply_response(
                &mut field,
                self.sample_rate,
                dispersion_response(self.beta2, self.fiber_length),
            );
        }
        let mut output = stages::square_law(&field, self.noise_sigma, rng);
        let scale = stages::normalize(&mut output);
        Ok((
            output.clone(),
            SmoothTape {
                filtered,
                field,
                output,
                scale,
            },
        ))
    }

    /// Pulls a gradient on the received stream back to the transmitted stream.
    pub fn backward(&self, tape: &SmoothTape, grad_rx: &[f64]) -> Result<Vec<f64>> {
        let len = tape.output.len();
        if grad_rx.len() != len {
            return Err(Error::Shape(format!(
                "gradient has {} entries, stream {len}",
                grad_rx.len()
            )));
        }
        let inv_len = 1.0 / len as f64;
        // y = c / s with c = I - mean(I) and s = rms(c).
        let gy_dot_y = grad_rx.iter().zip(&tape.output).map(|(g, y)| g * y).sum::<f64>() * inv_len;
        let mut g_c: Vec<f64> = grad_rx
            .iter()
            .zip(&tape.output)
            .map(|(g, y)| (g - y * gy_dot_y) / tape.scale)
            .collect();
        let mean_gc = stages::mean(&g_c);
        g_c.iter_mut().for_each(|g| *g -= mean_gc);

        // |E|^2 -> field, then the adjoint of the all-pass fibre.
        let mut g_field: Vec<Complex64> = g_c.iter().zip(&tape.field).map(|(&g, e)| 2.0 * g * e).collect();
        if self.fiber_length > 0.0 {
            let forward = dispersion_response(self.beta2, self.fiber_length);
            apply_response(&mut g_field, self.sample_rate, |f| forward(f).conj());
        }
        let g_drive: Vec<f64> = g_field
            .iter()
            .zip(&tape.filtered)
            .map(|(g, &v)| g.re * self.drive_gain * (self.drive_gain * v).cos())
            .collect();
        // The brick-wall filter is a real symmetric circulant, hence self-adjoint.
        stages::lpf(&g_drive, self.lpf_bandwidth, self.sample_rate)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vjp_matches_finite_differences() {
        let config = ChannelConfig::default();
        let model = SmoothImdd::new(&config, config.fiber_length, 0.0).unwrap();
        let mut rng = Rng::new(11);
        let tx: Vec<f64> = (0..48).map(|_| rng.uniform()).collect();
        let weights: Vec<f64> = (0..48).map(|_| rng.normal()).collect();
        let loss = |x: &[f64]| -> f64 {
            let (y, _) = model.forward(x, &mut Rng::new(0)).unwrap();
            y.iter().zip(&weights).map(|(a, b)| a * b).sum()
        };
        let (_, tape) = model.forward(&tx, &mut Rng::new(0)).unwrap();
        let grad = model.backward(&tape, &weights).unwrap();
        let h = 1e-6;
        for i in 0..tx.len() {
            let mut plus = tx.clone();
            plus[i] += h;
            let mut minus = tx.clone();
            minus[i] -= h;
            let fd = (loss(&plus) - loss(&minus)) / (2.0 * h);
            assert!(
                (fd - grad[i]).abs() <= 1e-6 * (1.0 + fd.abs()),
                "coordinate {i}: fd {fd} vs vjp {}",
                grad[i]
            );
        }
    }
}
