mod common;

use std::f64::consts::LN_2;

use ganae::channel::{AwgnOracle, Channel};
use ganae::gan::{
    build_conditioning_dataset, discriminator_loss, draw_noise, g_lr_schedule, gan_train_step, generator_input,
    generator_loss, train_gan, validate_generator, ChannelSource, ConditionalSource, GanConfig, GanPair, GanTrainer,
    GeneratorSource, LABEL_FAKE, LABEL_REAL,
};
use ganae::nn::{cross_entropy, Activation, Rng, LOG_CLAMP};
use ganae::Error;
use ndarray::{array, Array2};

#[test]
fn layer_widths_follow_the_table_for_several_block_lengths() {
    for n in [2, 6, 8] {
        let pair = GanPair::new(3, n, &mut Rng::new(n as u64)).unwrap();
        let g: Vec<(usize, Activation)> = pair
            .generator
            .specs()
            .iter()
            .map(|s| (s.output_width, s.activation))
            .collect();
        let want_g: Vec<(usize, Activation)> = [30, 20, 13, 8, 5]
            .iter()
            .map(|&w| (w * n, Activation::Relu))
            .chain([(n, Activation::Linear)])
            .collect();
        assert_eq!(g, want_g);
        assert_eq!(pair.generator.input_width(), 6 * n);
        let d: Vec<(usize, Activation)> = pair
            .discriminator
            .specs()
            .iter()
            .map(|s| (s.output_width, s.activation))
            .collect();
        let want_d: Vec<(usize, Activation)> = [16, 10, 6]
            .iter()
            .map(|&w| (w * n, Activation::Relu))
            .chain([(2, Activation::Softmax)])
            .collect();
        assert_eq!(d, want_d);
        assert_eq!(pair.discriminator.input_width(), 4 * n);
    }
}

#[test]
fn oblivious_discriminator_gives_the_chance_losses() {
    let mut rng = Rng::new(2);
    let d = common::oblivious_discriminator(3, 6, &mut rng);
    let pair = GanPair::from_nets(GanPair::new(3, 6, &mut rng).unwrap().generator, d, 3).unwrap();
    let windows = draw_noise(17, 18, &mut rng);
    let targets = draw_noise(17, 6, &mut rng);
    let noise = draw_noise(17, 18, &mut rng);
    let losses = pair.batch_losses(windows.view(), targets.view(), noise.view()).unwrap();
    assert!((losses.discriminator - 2.0 * LN_2).abs() < 1e-12);
    assert!((losses.generator - LN_2).abs() < 1e-12);
}

#[test]
fn reported_losses_recompute_from_stored_outputs() {
    let mut rng = Rng::new(3);
    let pair = GanPair::new(3, 2, &mut rng).unwrap();
    let windows = draw_noise(9, 6, &mut rng);
    let targets = draw_noise(9, 2, &mut rng);
    let noise = draw_noise(9, 6, &mut rng);
    let l = pair.batch_losses(windows.view(), targets.view(), noise.view()).unwrap();
    let mut d = 0.0;
    let mut g = 0.0;
    for (pr, pf) in l.p_real.rows().into_iter().zip(l.p_fake.rows()) {
        let (pr, pf) = (pr.to_vec(), pf.to_vec());
        d += cross_entropy(&LABEL_REAL, &pr).unwrap() + cross_entropy(&LABEL_FAKE, &pf).unwrap();
        g += cross_entropy(&LABEL_REAL, &pf).unwrap();
    }
    assert!((l.discriminator - d / 9.0).abs() < 1e-12);
    assert!((l.generator - g / 9.0).abs() < 1e-12);
}

#[test]
fn loss_limits_and_single_rows() {
    let perfect_real = array![[0.0, 1.0]];
    let perfect_fake = array![[1.0, 0.0]];
    assert!(
        discriminator_loss(perfect_real.view(), perfect_fake.view())
            .unwrap()
            .abs()
            < 1e-9
    );
    let g = generator_loss(perfect_fake.view()).unwrap();
    assert!((g + LOG_CLAMP.ln()).abs() < 1e-9);
    let pr = array![[0.3, 0.7]];
    let pf = array![[0.6, 0.4]];
    let single = -(0.7f64.ln()) - 0.6f64.ln();
    assert!((discriminator_loss(pr.view(), pf.view()).unwrap() - single).abs() < 1e-15);
    let empty = Array2::<f64>::zeros((0, 2));
    assert!(matches!(
        discriminator_loss(empty.view(), empty.view()),
        Err(Error::Usage(_))
    ));
    assert!(matches!(generator_loss(empty.view()), Err(Error::Usage(_))));
}

#[test]
fn schedule_endpoints() {
    let cfg = GanConfig::default();
    assert_eq!(g_lr_schedule(0, &cfg), 5e-4);
    assert_eq!(g_lr_schedule(199, &cfg), 5e-4);
    assert!(g_lr_schedule(200, &cfg) < 5e-4);
    let last = cfg.total_steps - 1;
    for step in [9800, last] {
        assert!((g_lr_schedule(step, &cfg) - 1e-5).abs() <= 1e-12 * 1e-5);
    }
}

#[test]
fn small_dataset_example() {
    let tx = Array2::from_shape_fn((10, 1), |(t, _)| (t + 1) as f64);
    let messages: Vec<usize> = (0..10).map(|t| t % 8 + 1).collect();
    let ds = build_conditioning_dataset(&messages, tx.view(), tx.view(), 3, 2).unwrap();
    assert_eq!(ds.len(), 6);
    let centres: Vec<f64> = ds.targets().column(0).to_vec();
    assert_eq!(centres, vec![4.0, 5.0, 6.0, 7.0, 8.0, 9.0]);
    assert_eq!(
        ds.transceiver_rows().iter().map(|r| r.message).collect::<Vec<_>>(),
        vec![1, 2]
    );
    assert_eq!(ds.transceiver_received().column(0).to_vec(), vec![1.0, 2.0]);
    assert!(matches!(
        build_conditioning_dataset(
            &messages[..4],
            tx.slice(ndarray::s![..4, ..]),
            tx.slice(ndarray::s![..4, ..]),
            3,
            2
        ),
        Err(Error::Usage(_))
    ));
}

#[test]
fn generator_is_deterministic_for_fixed_noise() {
    let mut rng = Rng::new(4);
    let pair = GanPair::new(3, 6, &mut rng).unwrap();
    let input = generator_input(draw_noise(2, 18, &mut rng).view(), draw_noise(2, 18, &mut rng).view()).unwrap();
    let a = pair.generator.predict_batch(input.view()).unwrap();
    assert_eq!(a.ncols(), 6);
    assert_eq!(a, pair.generator.predict_batch(input.view()).unwrap());
}

fn identity_link_dataset(rng: &mut Rng) -> ganae::gan::ConditioningDataset {
    let tx = Array2::from_shape_simple_fn((600, 2), || rng.uniform());
    build_conditioning_dataset(&vec![1; 600], tx.view(), tx.view(), 3, 0).unwrap()
}

#[test]
fn discriminator_cannot_separate_an_exact_generator() {
    let mut rng = Rng::new(5);
    let ds = identity_link_dataset(&mut rng);
    let d = GanPair::new(3, 2, &mut rng).unwrap().discriminator;
    let pair = GanPair::from_nets(common::pass_through_generator(3, 2), d, 3).unwrap();
    let cfg = GanConfig {
        memory: 3,
        samples_per_symbol: 2,
        batch_size: 128,
        total_steps: 100,
        ..Default::default()
    };
    let mut trainer = GanTrainer::new(pair, cfg).unwrap();
    let mut losses = Vec::new();
    for step in 0..100 {
        losses.push(trainer.discriminator_update(&ds, step, &mut rng).unwrap());
    }
    let tail = losses[50..].iter().sum::<f64>() / 50.0;
    assert!((tail - 2.0 * LN_2).abs() < 0.05, "{tail}");
}

#[test]
fn training_is_reproducible_and_records_every_step() {
    let ds = identity_link_dataset(&mut Rng::new(6));
    let cfg = GanConfig {
        memory: 3,
        samples_per_symbol: 2,
        batch_size: 32,
        total_steps: 12,
        ..Default::default()
    };
    let (a, la) = train_gan(&ds, &cfg, &mut Rng::new(8), None).unwrap();
    let (b, lb) = train_gan(&ds, &cfg, &mut Rng::new(8), None).unwrap();
    assert_eq!(la.len(), 12);
    assert_eq!(la, lb);
    assert_eq!(a, b);
    let warm = GanConfig {
        warm_start: true,
        ..cfg.clone()
    };
    let (c, _) = train_gan(&ds, &warm, &mut Rng::new(9), Some(a.clone())).unwrap();
    assert_ne!(c, a);
    let big = GanConfig {
        batch_size: 10_000,
        ..cfg
    };
    assert!(matches!(
        train_gan(&ds, &big, &mut Rng::new(8), None),
        Err(Error::Usage(_))
    ));
}

#[test]
fn nonfinite_losses_abort_with_the_step() {
    let mut rng = Rng::new(10);
    let tx = Array2::from_shape_simple_fn((50, 2), || rng.uniform());
    let mut rx = tx.clone();
    rx[[10, 0]] = f64::NAN;
    let ds = build_conditioning_dataset(&vec![1; 50], tx.view(), rx.view(), 3, 0).unwrap();
    let cfg = GanConfig {
        memory: 3,
        samples_per_symbol: 2,
        batch_size: 48,
        total_steps: 50,
        ..Default::default()
    };
    let mut trainer = GanTrainer::new(GanPair::new(3, 2, &mut rng).unwrap(), cfg).unwrap();
    let err = (0..50)
        .find_map(|s| gan_train_step(&mut trainer, &ds, s, &mut rng).err())
        .unwrap();
    assert!(matches!(err, Error::Numeric { .. }), "{err:?}");
}

#[test]
fn fidelity_report_separates_good_and_bad_sources() {
    let n = 2;
    let oracle = AwgnOracle::new(n, 0.1, 3).unwrap();
    let mut rng = Rng::new(11);
    let background: Vec<f64> = (0..5 * n).map(|_| rng.uniform()).collect();
    let channel = ChannelSource::new(&oracle, background).unwrap();
    let probes = Array2::from_shape_simple_fn((100, 3 * n), || rng.uniform());

    let same = validate_generator(&channel, &channel, probes.view(), 200, &mut Rng::new(1)).unwrap();
    // Resampling distribution of the baseline: how large can a same-law
    // mean energy distance get by chance?
    let mut resampled: Vec<f64> = (0..100)
        .map(|seed| {
            validate_generator(&channel, &channel, probes.view(), 200, &mut Rng::new(100 + seed))
                .unwrap()
                .mean_baseline_energy_distance
        })
        .collect();
    resampled.sort_by(f64::total_cmp);
    assert!(same.mean_energy_distance <= resampled[98]);

    let constant = common::pass_through_generator(3, n);
    let mut flat = constant.clone();
    let zeros = vec![0.0; flat.parameter_count()];
    flat.set_parameters(&zeros).unwrap();
    let bad = validate_generator(&GeneratorSource::new(&flat), &channel, probes.view(), 200, &mut rng).unwrap();
    assert!(bad.mean_energy_distance > 10.0 * bad.mean_baseline_energy_distance);

    let again = validate_generator(&channel, &channel, probes.view(), 200, &mut Rng::new(1)).unwrap();
    assert_eq!(same, again);
    assert!(validate_generator(&channel, &channel, probes.slice(ndarray::s![..50, ..]), 10, &mut rng).is_err());
}

#[test]
fn generator_source_checks_window_width() {
    let pair = GanPair::new(3, 2, &mut Rng::new(0)).unwrap();
    let source = GeneratorSource::new(&pair.generator);
    assert!(matches!(
        source.draw(&[0.5; 5], 2, &mut Rng::new(0)),
        Err(Error::Shape(_))
    ));
    assert_eq!(source.draw(&[0.5; 6], 4, &mut Rng::new(0)).unwrap().dim(), (4, 2));
    let oracle = AwgnOracle::new(2, 0.0, 0).unwrap();
    assert_eq!(oracle.transmit(&[0.25, 0.5], 0).unwrap(), vec![0.25, 0.5]);
}
