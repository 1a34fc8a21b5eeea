use ndarray::{Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::channel::Channel;
use crate::error::{Error, Result};
use crate::gan::{draw_noise, generator_input};
use crate::nn::{DenseNet, Rng};

/// Anything that can draw received blocks conditioned on a transmitted window.
pub trait ConditionalSource {
    fn draw(&self, window: &[f64], count: usize, rng: &mut Rng) -> Result<Array2<f64>>;
}

/// Draws from a trained generator with fresh noise per sample.
pub struct GeneratorSource<'a> {
    generator: &'a DenseNet,
}

impl<'a> GeneratorSource<'a> {
    pub fn new(generator: &'a DenseNet) -> Self {
        Self { generator }
    }
}

impl ConditionalSource for GeneratorSource<'_> {
    fn draw(&self, window: &[f64], count: usize, rng: &mut Rng) -> Result<Array2<f64>> {
        if 2 * window.len() != self.generator.input_width() {
            return Err(Error::Shape(format!(
                "window of {} samples does not fit a generator with {} inputs",
                window.len(),
                self.generator.input_width()
            )));
        }
        let windows = ArrayView2::from_shape((1, window.len()), window)
            .map_err(|e| Error::Shape(e.to_string()))?
            .broadcast((count, window.len()))
            .expect("row broadcast")
            .to_owned();
        let noise = draw_noise(count, window.len(), rng);
        self.generator
            .predict_batch(generator_input(noise.view(), windows.view())?.view())
    }
}

/// Draws from a black-box channel: the window is embedded in a fixed
/// transmitted background and the centre block is read out per transmission.
pub struct ChannelSource<'a> {
    channel: &'a dyn Channel,
    background: Vec<f64>,
    centre: usize,
}

impl<'a> ChannelSource<'a> {
    /// `background` is a transmitted stream (whole symbols) long enough to
    /// hold the window; its middle symbol becomes the window centre.
    pub fn new(channel: &'a dyn Channel, background: Vec<f64>) -> Result<Self> {
        let n = channel.samples_per_symbol();
        if background.is_empty() || background.len() % n != 0 {
            return Err(Error::Shape("background must be whole symbols".into()));
        }
        let centre = background.len() / n / 2;
        Ok(Self {
            channel,
            background,
            centre,
        })
    }
}

impl ConditionalSource for ChannelSource<'_> {
    fn draw(&self, window: &[f64], count: usize, rng: &mut Rng) -> Result<Array2<f64>> {
        let n = self.channel.samples_per_symbol();
        if window.len() % n != 0 || window.len() / n % 2 == 0 {
            return Err(Error::Shape("window must span an odd number of symbols".into()));
        }
        let half = window.len() / n / 2;
        let symbols = self.background.len() / n;
        if self.centre < half || self.centre + half >= symbols {
            return Err(Error::Shape("background too short for the window".into()));
        }
        let mut stream = self.background.clone();
        let start = (self.centre - half) * n;
        stream[start..start + window.len()].copy_from_slice(window);
        let base = rng.next_u64() >> 1;
        let mut out = Array2::zeros((count, n));
        for c in 0..count {
            let rx = self.channel.transmit(&stream, base.wrapping_add(c as u64))?;
            out.row_mut(c)
                .as_slice_mut()
                .expect("standard layout")
                .copy_from_slice(&rx[self.centre * n..(self.centre + 1) * n]);
        }
        Ok(out)
    }
}

fn mean_pairwise_distance(a: ArrayView2<'_, f64>, b: ArrayView2<'_, f64>) -> f64 {
    let mut total = 0.0;
    for x in a.rows() {
        let x = x.as_slice().expect("standard layout");
        for y in b.rows() {
            let y = y.as_slice().expect("standard layout");
            total += x.iter().zip(y).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt();
        }
    }
    total / (a.nrows() * b.nrows()) as f64
}

/// Energy distance `2 E|X - Y| - E|X - X'| - E|Y - Y'|` between two samples
/// (V-statistic, one draw per row).
pub fn energy_distance(x: ArrayView2<'_, f64>, y: ArrayView2<'_, f64>) -> f64 {
    let x = x.as_standard_layout();
    let y = y.as_standard_layout();
    2.0 * mean_pairwise_distance(x.view(), y.view())
        - mean_pairwise_distance(x.view(), x.view())
        - mean_pairwise_distance(y.view(), y.view())
}

/// How closely a generator reproduces the channel's conditional law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FidelityReport {
    /// Generator vs channel, one entry per probe window.
    pub energy_distances: Vec<f64>,
    pub mean_energy_distance: f64,
    pub max_energy_distance: f64,
    /// Channel vs an independent channel sample, one entry per probe window.
    pub baseline_energy_distances: Vec<f64>,
    pub mean_baseline_energy_distance: f64,
    /// Per sample position: mean over windows of |mean_gen - mean_channel|.
    pub mean_deltas: Vec<f64>,
    /// Per sample position: mean over windows of |std_gen - std_channel|.
    pub std_deltas: Vec<f64>,
}

pub const MIN_PROBE_WINDOWS: usize = 100;

pub fn validate_generator(
    generator: &dyn ConditionalSource,
    oracle: &dyn ConditionalSource,
    probe_windows: ArrayView2<'_, f64>,
    draws: usize,
    rng: &mut Rng,
) -> Result<FidelityReport> {
    let windows = probe_windows.nrows();
    if windows < MIN_PROBE_WINDOWS {
        return Err(Error::Usage(format!(
            "need at least {MIN_PROBE_WINDOWS} probe windows, got {windows}"
        )));
    }
    if draws < 2 {
        return Err(Error::Usage("need at least two draws per window".into()));
    }
    let mut report = FidelityReport {
        energy_distances: Vec::with_capacity(windows),
        mean_energy_distance: 0.0,
        max_energy_distance: 0.0,
        baseline_energy_distances: Vec::with_capacity(windows),
        mean_baseline_energy_distance: 0.0,
        mean_deltas: Vec::new(),
        std_deltas: Vec::new(),
    };
    for window in probe_windows.rows() {
        let window = window.to_vec();
        let fake = generator.draw(&window, draws, rng)?;
        let real = oracle.draw(&window, draws, rng)?;
        let again = oracle.draw(&window, draws, rng)?;
        report.energy_distances.push(energy_distance(fake.view(), real.view()));
        report
            .baseline_energy_distances
            .push(energy_distance(again.view(), real.view()));

        let (fm, rm) = (
            fake.mean_axis(Axis(0)).expect("rows"),
            real.mean_axis(Axis(0)).expect("rows"),
        );
        let (fs, rs) = (fake.std_axis(Axis(0), 0.0), real.std_axis(Axis(0), 0.0));
        if report.mean_deltas.is_empty() {
            report.mean_deltas = vec![0.0; fm.len()];
            report.std_deltas = vec![0.0; fm.len()];
        }
        for p in 0..fm.len() {
            report.mean_deltas[p] += (fm[p] - rm[p]).abs() / windows as f64;
            report.std_deltas[p] += (fs[p] - rs[p]).abs() / windows as f64;
        }
    }
    report.mean_energy_distance = report.energy_distances.iter().sum::<f64>() / windows as f64;
    report.max_energy_distance = report.energy_distances.iter().copied().fold(f64::MIN, f64::max);
    report.mean_baseline_energy_distance = report.baseline_energy_distances.iter().sum::<f64>() / windows as f64;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn energy_distance_of_identical_samples_is_zero() {
        let x = Array2::from_shape_fn((10, 3), |(i, j)| (i * 3 + j) as f64);
        assert!(energy_distance(x.view(), x.view()).abs() < 1e-12);
    }

    #[test]
    fn energy_distance_of_point_masses() {
        // Two point masses at distance d: 2d - 0 - 0.
        let x = Array2::from_elem((4, 2), 0.0);
        let y = Array2::from_shape_fn((5, 2), |(_, j)| if j == 0 { 3.0 } else { 4.0 });
        assert!((energy_distance(x.view(), y.view()) - 10.0).abs() < 1e-12);
    }
}
