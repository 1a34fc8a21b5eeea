//! Individual link stages. Sample streams are plain slices; spectral stages
//! use circular (FFT) convolution over the whole stream.

use std::f64::consts::{FRAC_PI_2, PI};

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::nn::Rng;

/// Signed frequency (Hz) of FFT bin `k` for a length-`len` transform.
pub fn bin_frequency(k: usize, len: usize, sample_rate: f64) -> f64 {
    let k = if k <= len / 2 { k as f64 } else { k as f64 - len as f64 };
    k * sample_rate / len as f64
}

/// Applies a frequency response `h(f)` to a complex stream via FFT.
pub(crate) fn apply_response(signal: &mut [Complex64], sample_rate: f64, response: impl Fn(f64) -> Complex64) {
    let len = signal.len();
    if len == 0 {
        return;
    }
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(len).process(signal);
    for (k, s) in signal.iter_mut().enumerate() {
        *s *= response(bin_frequency(k, len, sample_rate));
    }
    planner.plan_fft_inverse(len).process(signal);
    let scale = 1.0 / len as f64;
    signal.iter_mut().for_each(|s| *s *= scale);
}

fn check_bandwidth(bandwidth: f64, sample_rate: f64) -> Result<()> {
    if !(bandwidth > 0.0) || !(sample_rate > 0.0) {
        return Err(Error::config("bandwidth and sample rate must be positive"));
    }
    if bandwidth >= sample_rate / 2.0 {
        return Err(Error::config(format!(
            "filter bandwidth {bandwidth:e} Hz is not below the Nyquist frequency {:e} Hz",
            sample_rate / 2.0
        )));
    }
    Ok(())
}

/// Brick-wall low-pass filter: zeroes every bin with |f| > bandwidth.
pub fn lpf(stream: &[f64], bandwidth: f64, sample_rate: f64) -> Result<Vec<f64>> {
    check_bandwidth(bandwidth, sample_rate)?;
    if stream.is_empty() {
        return Err(Error::Usage("cannot filter an empty stream".into()));
    }
    let mut buf: Vec<Complex64> = stream.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    apply_response(&mut buf, sample_rate, |f| {
        if f.abs() > bandwidth {
            Complex64::new(0.0, 0.0)
        } else {
            Complex64::new(1.0, 0.0)
        }
    });
    Ok(buf.into_iter().map(|c| c.re).collect())
}

/// Uniform mid-rise quantizer with `2^bits` levels over `[low, high]`;
/// inputs outside the range saturate to the outermost level.
pub fn quantize(stream: &[f64], bits: u32, range: (f64, f64)) -> Result<Vec<f64>> {
    if !(1..=16).contains(&bits) {
        return Err(Error::config(format!(
            "quantizer resolution {bits} outside 1..=16 bits"
        )));
    }
    let (low, high) = range;
    if !(high > low) || !low.is_finite() || !high.is_finite() {
        return Err(Error::config(format!("empty quantizer range [{low}, {high}]")));
    }
    let levels = 1u32 << bits;
    let step = (high - low) / levels as f64;
    let top = (levels - 1) as f64;
    Ok(stream
        .iter()
        .map(|&x| {
            let index = ((x - low) / step).floor().clamp(0.0, top);
            low + (index + 0.5) * step
        })
        .collect())
}

/// Mach-Zehnder field response for a normalized drive in [0, 1]:
/// `E = sin(pi/2 * u)`, so u = 0.5 sits at quadrature (half intensity).
pub fn mzm_modulate(drive: &[f64]) -> Vec<f64> {
    mzm_modulate_scaled(drive, 1.0)
}

pub(crate) fn mzm_modulate_scaled(drive: &[f64], vpi_normalization: f64) -> Vec<f64> {
    drive
        .iter()
        .map(|&u| (FRAC_PI_2 * vpi_normalization * u.clamp(0.0, 1.0)).sin())
        .collect()
}

/// Group-velocity dispersion `beta2` (s^2/m) from the dispersion parameter
/// `d` (s/m^2) at `wavelength` (m).
pub fn beta2_from_dispersion(d: f64, wavelength: f64) -> f64 {
    const C: f64 = 299_792_458.0;
    -d * wavelength * wavelength / (2.0 * PI * C)
}

/// Lossless linear fibre: all-pass `H(w) = exp(j * beta2 / 2 * w^2 * length)`.
pub fn fiber_dispersion(field: &[Complex64], beta2: f64, length: f64, sample_rate: f64) -> Vec<Complex64> {
    let mut out = field.to_vec();
    if field.len() < 2 || length == 0.0 {
        return out;
    }
    apply_response(&mut out, sample_rate, dispersion_response(beta2, length));
    out
}

pub(crate) fn dispersion_response(beta2: f64, length: f64) -> impl Fn(f64) -> Complex64 {
    move |f| {
        let w = 2.0 * PI * f;
        Complex64::from_polar(1.0, 0.5 * beta2 * w * w * length)
    }
}

/// Square-law detection plus additive Gaussian receiver noise, before AC coupling.
pub fn square_law(field: &[Complex64], noise_sigma: f64, rng: &mut Rng) -> Vec<f64> {
    field
        .iter()
        .map(|e| {
            let noise = if noise_sigma > 0.0 {
                noise_sigma * rng.normal()
            } else {
                0.0
            };
            e.norm_sqr() + noise
        })
        .collect()
}

/// Removes the stream mean.
pub fn ac_couple(stream: &mut [f64]) {
    let mean = mean(stream);
    stream.iter_mut().for_each(|x| *x -= mean);
}

/// Photodiode with transimpedance amplifier: `|E|^2 + noise`, AC coupled.
pub fn photodetect(field: &[Complex64], noise_sigma: f64, rng: &mut Rng) -> Vec<f64> {
    let mut out = square_law(field, noise_sigma, rng);
    ac_couple(&mut out);
    out
}

/// `y = x + N(0, sigma^2)` i.i.d.
pub fn awgn_forward(stream: &[f64], sigma: f64, rng: &mut Rng) -> Vec<f64> {
    if sigma == 0.0 {
        return stream.to_vec();
    }
    stream.iter().map(|&x| x + sigma * rng.normal()).collect()
}

pub(crate) fn mean(stream: &[f64]) -> f64 {
    if stream.is_empty() {
        0.0
    } else {
        stream.iter().sum::<f64>() / stream.len() as f64
    }
}

/// Population standard deviation.
pub(crate) fn std_dev(stream: &[f64]) -> f64 {
    let m = mean(stream);
    (stream.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / stream.len().max(1) as f64).sqrt()
}

/// True when a spread `sd` is rounding noise relative to the signal `level`.
pub(crate) fn is_degenerate(sd: f64, level: f64) -> bool {
    !(sd > 1e-12 * level.abs().max(f64::MIN_POSITIVE)) || !sd.is_finite()
}

/// Scaling and offset correction to zero mean and unit variance. Constant
/// streams only get the offset removed. Returns the scale that was applied.
pub fn normalize(stream: &mut [f64]) -> f64 {
    let level = stream.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    ac_couple(stream);
    let sd = std_dev(stream);
    if !is_degenerate(sd, level) {
        stream.iter_mut().for_each(|x| *x /= sd);
        sd
    } else {
        1.0
    }
}
