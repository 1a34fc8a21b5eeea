#![allow(dead_code)]

use ganae::gan::GanPair;
use ganae::nn::{softmax_cross_entropy, Activation, DenseNet, Rng};
use ganae::transceiver::TransceiverConfig;
use ndarray::Array2;

const STEP: f64 = 1e-5;
// Below this magnitude the comparison is absolute; central differences carry
// roundoff near eps * |f| / STEP.
const FLOOR: f64 = 1e-4;

/// Worst relative disagreement between analytic and central-difference gradients.
#[derive(Debug, Clone, Copy)]
pub struct GradCheck {
    pub parameters: f64,
    pub inputs: f64,
}

impl GradCheck {
    pub fn worst(&self) -> f64 {
        self.parameters.max(self.inputs)
    }
}

fn relative(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(FLOOR)
}

pub fn random_matrix(rows: usize, cols: usize, low: f64, high: f64, rng: &mut Rng) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || rng.uniform_range(low, high))
}

/// Perturbs every parameter so biases are nonzero.
pub fn jitter(net: &mut DenseNet, rng: &mut Rng) {
    let p: Vec<f64> = net.parameters().map(|v| v + rng.uniform_range(-0.1, 0.1)).collect();
    net.set_parameters(&p).unwrap();
}

enum Objective<'a> {
    /// sum(weights * output)
    Weighted(&'a Array2<f64>),
    /// mean softmax cross entropy, differentiated at the logits
    CrossEntropy(&'a Array2<f64>),
}

fn objective(net: &DenseNet, input: &Array2<f64>, obj: &Objective) -> f64 {
    let out = net.predict_batch(input.view()).unwrap();
    match obj {
        Objective::Weighted(w) => (&out * *w).sum(),
        Objective::CrossEntropy(labels) => softmax_cross_entropy(labels.view(), out.view()).unwrap().0,
    }
}

fn check(net: &DenseNet, input: &Array2<f64>, obj: Objective) -> GradCheck {
    let cache = net.forward_batch(input.view()).unwrap();
    let (grads, input_grad) = match &obj {
        Objective::Weighted(w) => net.backward_batch(&cache, w.view()).unwrap(),
        Objective::CrossEntropy(labels) => {
            let (_, g) = softmax_cross_entropy(labels.view(), cache.output()).unwrap();
            net.backward_batch_pre_activation(&cache, g.view()).unwrap()
        }
    };
    let analytic = grads.to_vec();
    let base: Vec<f64> = net.parameters().collect();
    let mut probe = net.clone();
    let mut worst_param: f64 = 0.0;
    let mut values = base.clone();
    for i in 0..base.len() {
        values[i] = base[i] + STEP;
        probe.set_parameters(&values).unwrap();
        let up = objective(&probe, input, &obj);
        values[i] = base[i] - STEP;
        probe.set_parameters(&values).unwrap();
        let down = objective(&probe, input, &obj);
        values[i] = base[i];
        worst_param = worst_param.max(relative(analytic[i], (up - down) / (2.0 * STEP)));
    }
    let mut worst_input: f64 = 0.0;
    let mut x = input.clone();
    for idx in 0..x.len() {
        let (r, c) = (idx / x.ncols(), idx % x.ncols());
        let orig = x[[r, c]];
        x[[r, c]] = orig + STEP;
        let up = objective(net, &x, &obj);
        x[[r, c]] = orig - STEP;
        let down = objective(net, &x, &obj);
        x[[r, c]] = orig;
        worst_input = worst_input.max(relative(input_grad[[r, c]], (up - down) / (2.0 * STEP)));
    }
    GradCheck {
        parameters: worst_param,
        inputs: worst_input,
    }
}

/// Gradients of a fixed random linear functional of the output.
pub fn check_weighted(net: &DenseNet, input: &Array2<f64>, rng: &mut Rng) -> GradCheck {
    let w = random_matrix(input.nrows(), net.output_width(), -1.0, 1.0, rng);
    check(net, input, Objective::Weighted(&w))
}

/// Gradients of the fused softmax cross entropy through the logits.
pub fn check_cross_entropy(net: &DenseNet, input: &Array2<f64>, labels: &Array2<f64>) -> GradCheck {
    check(net, input, Objective::CrossEntropy(labels))
}

/// Smallest distance of any ReLU pre-activation from its kink.
fn kink_margin(net: &DenseNet, input: &Array2<f64>) -> f64 {
    let mut a = input.clone();
    let mut margin = f64::INFINITY;
    for layer in net.layers() {
        let pre = a.dot(&layer.weights().t()) + layer.biases();
        if layer.activation() == Activation::Relu {
            margin = pre.iter().fold(margin, |m, v| m.min(v.abs()));
        }
        a = pre.mapv(|v| v.max(0.0));
    }
    margin
}

/// A jittered copy of `net` and an input in `[low, high)` whose ReLUs all sit
/// well clear of the kink, so central differences are valid.
fn smooth_point(net: &DenseNet, rows: usize, low: f64, high: f64, rng: &mut Rng) -> (DenseNet, Array2<f64>) {
    loop {
        let mut candidate = net.clone();
        jitter(&mut candidate, rng);
        let input = random_matrix(rows, net.input_width(), low, high, rng);
        if kink_margin(&candidate, &input) > 10.0 * STEP {
            return (candidate, input);
        }
    }
}

/// The four network shapes of the system, with inputs drawn from their working ranges.
pub fn network_zoo(rng: &mut Rng) -> Vec<(&'static str, DenseNet, Array2<f64>)> {
    let (tx, rx) = TransceiverConfig::default().new_pair(rng).unwrap();
    let pair = GanPair::new(3, 6, rng).unwrap();
    let rows = 3;
    let (tx, tx_in) = smooth_point(&tx, rows, 0.0, 1.0, rng);
    let (rx, rx_in) = smooth_point(&rx, rows, -2.0, 2.0, rng);
    let (g, g_in) = smooth_point(&pair.generator, rows, 0.0, 1.0, rng);
    let (d, d_in) = smooth_point(&pair.discriminator, rows, -1.0, 1.0, rng);
    vec![
        ("transmitter", tx, tx_in),
        ("receiver", rx, rx_in),
        ("generator", g, g_in),
        ("discriminator", d, d_in),
    ]
}

/// `0.5 * erfc(q / sqrt 2) = ber` solved by bisection on the linear Q factor,
/// returned in dB as `20 log10 q`.
pub fn q2_by_bisection(ber: f64) -> f64 {
    let tail = |q: f64| 0.5 * statrs::function::erf::erfc(q / std::f64::consts::SQRT_2);
    let (mut lo, mut hi) = (0.0f64, 40.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if tail(mid) > ber {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    20.0 * (0.5 * (lo + hi)).log10()
}

/// Minimum bit-error cost over all S! labelings, by Heap's algorithm.
pub fn brute_force_mapping_cost(counts: &[Vec<u64>]) -> u64 {
    let s = counts.len();
    let cost = |labels: &[usize]| -> u64 {
        let mut total = 0;
        for t in 0..s {
            for d in 0..s {
                total += counts[t][d] * (labels[t] ^ labels[d]).count_ones() as u64;
            }
        }
        total
    };
    let mut labels: Vec<usize> = (0..s).collect();
    let mut best = cost(&labels);
    let mut c = vec![0usize; s];
    let mut i = 0;
    while i < s {
        if c[i] < i {
            if i % 2 == 0 {
                labels.swap(0, i);
            } else {
                labels.swap(c[i], i);
            }
            best = best.min(cost(&labels));
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    best
}

fn block_energy(rx: &[f64], symbol: usize, n: usize) -> f64 {
    rx[symbol * n..(symbol + 1) * n].iter().map(|v| v * v).sum()
}

/// Mean change of the centre block's energy when a direct neighbour is
/// redrawn, over the mean change when a symbol far outside the dispersion
/// span is redrawn (the floor left by sequence normalization and converter
/// rounding). Noise is switched off.
pub fn neighbour_influence(config: &ganae::channel::ChannelConfig, trials: usize) -> f64 {
    use ganae::channel::{Channel, ImddOracle};
    let oracle = ImddOracle::new(ganae::channel::ChannelConfig {
        receiver_noise_sigma: 0.0,
        ..config.clone()
    })
    .unwrap();
    let n = config.samples_per_symbol;
    let (symbols, centre, far) = (128, 64, 96);
    let mut rng = Rng::new(0x5eed);
    let (mut near_change, mut far_change) = (0.0, 0.0);
    for _ in 0..trials {
        let base: Vec<f64> = (0..symbols * n).map(|_| rng.uniform()).collect();
        let reference = block_energy(&oracle.transmit(&base, 0).unwrap(), centre, n);
        let redraw = |symbol: usize, rng: &mut Rng| {
            let mut x = base.clone();
            x[symbol * n..(symbol + 1) * n]
                .iter_mut()
                .for_each(|v| *v = rng.uniform());
            (block_energy(&oracle.transmit(&x, 0).unwrap(), centre, n) - reference).abs()
        };
        near_change += 0.5 * (redraw(centre - 1, &mut rng) + redraw(centre + 1, &mut rng));
        far_change += redraw(far, &mut rng);
    }
    near_change / far_change.max(f64::MIN_POSITIVE)
}

/// A generator in the prescribed shape that ignores its noise and returns the
/// centre block of its window, which is the exact law of a noiseless
/// identity channel.
pub fn pass_through_generator(memory: usize, n: usize) -> DenseNet {
    use ganae::nn::Dense;
    use ndarray::Array1;
    let specs = ganae::gan::generator_specs(memory, n);
    let width = memory * n;
    let centre = width + (memory / 2) * n;
    let layers = specs
        .iter()
        .enumerate()
        .map(|(l, spec)| {
            let mut w = Array2::zeros((spec.output_width, spec.input_width));
            for j in 0..n {
                let source = if l == 0 { centre + j } else { j };
                w[[j, source]] = 1.0;
            }
            Dense::new(w, Array1::zeros(spec.output_width), spec.activation).unwrap()
        })
        .collect();
    DenseNet::from_layers(layers).unwrap()
}

/// A discriminator in the prescribed shape whose output is always (0.5, 0.5).
pub fn oblivious_discriminator(memory: usize, n: usize, rng: &mut Rng) -> DenseNet {
    let mut d = DenseNet::new(&ganae::gan::discriminator_specs(memory, n), rng).unwrap();
    let keep: usize = d.layers()[..d.layers().len() - 1]
        .iter()
        .map(|l| l.weights().len() + l.biases().len())
        .sum();
    let p: Vec<f64> = d
        .parameters()
        .enumerate()
        .map(|(i, v)| if i < keep { v } else { 0.0 })
        .collect();
    d.set_parameters(&p).unwrap();
    d
}

/// Outcome of fitting the GAN to a memoryless AWGN link driven by uniform
/// samples (an identity transmitter).
#[derive(Debug)]
pub struct AwgnFit {
    pub report: ganae::gan::FidelityReport,
    /// Mean over probe windows and positions of |E[fake] - centre block|.
    pub mean_error: f64,
    /// Smallest and largest per-position std of the fake draws, averaged over windows.
    pub std_range: (f64, f64),
    /// Held-out accuracy of the trained discriminator on real and fake pairs.
    pub discriminator_accuracy: f64,
    pub losses: Vec<ganae::gan::StepLosses>,
}

pub fn fit_awgn(sigma: f64, steps: usize, batch: usize, probes: usize, draws: usize) -> AwgnFit {
    use ganae::channel::{AwgnOracle, Channel};
    use ganae::gan::*;
    use ndarray::{s, Axis};
    let (n, m, total) = (6, 3, 20_000);
    let mut rng = Rng::new(1);
    let tx: Vec<f64> = (0..total * n).map(|_| rng.uniform()).collect();
    let oracle = AwgnOracle::new(n, sigma, 5).unwrap();
    let rx = oracle.transmit(&tx, 0).unwrap();
    let messages = vec![1; total];
    let tx_blocks = Array2::from_shape_vec((total, n), tx.clone()).unwrap();
    let rx_blocks = Array2::from_shape_vec((total, n), rx).unwrap();
    let ds = build_conditioning_dataset(&messages, tx_blocks.view(), rx_blocks.view(), m, 0).unwrap();
    let config = GanConfig {
        memory: m,
        samples_per_symbol: n,
        batch_size: batch,
        total_steps: steps,
        ..Default::default()
    };
    let (pair, losses) = train_gan(&ds, &config, &mut rng, None).unwrap();

    // Fresh windows the GAN never saw.
    let probe_windows = Array2::from_shape_simple_fn((probes, m * n), || rng.uniform());
    let generator = GeneratorSource::new(&pair.generator);
    let channel = ChannelSource::new(&oracle, tx[..9 * n].to_vec()).unwrap();
    let report = validate_generator(&generator, &channel, probe_windows.view(), draws, &mut rng).unwrap();

    let mut mean_error = 0.0;
    let mut stds = vec![0.0; n];
    for w in probe_windows.rows() {
        let fake = generator.draw(w.as_slice().unwrap(), draws, &mut rng).unwrap();
        let mean = fake.mean_axis(Axis(0)).unwrap();
        let centre = w.slice(s![n..2 * n]);
        mean_error += (&mean - &centre).mapv(f64::abs).sum() / (n * probes) as f64;
        for (acc, sd) in stds.iter_mut().zip(fake.std_axis(Axis(0), 0.0)) {
            *acc += sd / probes as f64;
        }
    }
    let std_range = stds
        .iter()
        .fold((f64::MAX, f64::MIN), |(lo, hi), &v| (lo.min(v), hi.max(v)));

    let held_out: Vec<usize> = (0..2000).map(|_| rng.below(ds.len())).collect();
    let (windows, targets) = ds.gather(&held_out);
    let noise = draw_noise(windows.nrows(), m * n, &mut rng);
    let batch_losses = pair.batch_losses(windows.view(), targets.view(), noise.view()).unwrap();
    let correct = batch_losses.p_real.rows().into_iter().filter(|p| p[1] > p[0]).count()
        + batch_losses.p_fake.rows().into_iter().filter(|p| p[0] > p[1]).count();
    AwgnFit {
        report,
        mean_error,
        std_range,
        discriminator_accuracy: correct as f64 / (2 * windows.nrows()) as f64,
        losses,
    }
}
