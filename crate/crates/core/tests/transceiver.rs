mod common;

use ganae::nn::{one_hot, softmax_cross_entropy, Activation, AdamState, Dense, DenseNet, Rng};
use ganae::transceiver::{
    argmax, compute_ber, confusion_matrix, mapping_cost, optimize_bit_mapping, q2_from_ber, rx_decide, rx_decode,
    tx_encode, BitMapping, ConfusionMatrix, MessageSequence, TransceiverConfig,
};
use ganae::Error;
use ndarray::{Array1, Array2};

fn random_confusion(rng: &mut Rng) -> ConfusionMatrix {
    let mut truth = Vec::new();
    let mut decisions = Vec::new();
    for t in 1..=8 {
        for d in 1..=8 {
            let weight = if t == d { 200 } else { rng.below(4) * rng.below(30) };
            for _ in 0..weight {
                truth.push(t);
                decisions.push(d);
            }
        }
    }
    ConfusionMatrix::from_pairs(&truth, &decisions, 8).unwrap()
}

fn counts(cm: &ConfusionMatrix) -> Vec<Vec<u64>> {
    (1..=8).map(|t| (1..=8).map(|d| cm.count(t, d)).collect()).collect()
}

#[test]
fn exhaustive_mapping_matches_brute_force() {
    let mut rng = Rng::new(101);
    for _ in 0..20 {
        let cm = random_confusion(&mut rng);
        let best = optimize_bit_mapping(&cm);
        assert_eq!(
            mapping_cost(&cm, best.labels()),
            common::brute_force_mapping_cost(&counts(&cm))
        );
        assert!(mapping_cost(&cm, best.labels()) <= mapping_cost(&cm, BitMapping::natural(8).unwrap().labels()));
    }
}

#[test]
fn diagonal_confusion_keeps_natural_labels() {
    let truth: Vec<usize> = (1..=8).collect();
    let cm = confusion_matrix(&truth, &truth, 8).unwrap();
    assert_eq!(
        optimize_bit_mapping(&cm).labels(),
        BitMapping::natural(8).unwrap().labels()
    );
}

#[test]
fn single_confused_pair_gets_adjacent_labels() {
    let mut truth = vec![1; 90];
    let mut decisions = vec![1; 90];
    truth.extend([1; 10]);
    decisions.extend([2; 10]);
    let cm = confusion_matrix(&truth, &decisions, 8).unwrap();
    let mapping = optimize_bit_mapping(&cm);
    assert_eq!(mapping.bit_errors(1, 2), 1);
    let counts = compute_ber(&truth, &decisions, &mapping).unwrap();
    assert!((counts.ber() - counts.ser() / 3.0).abs() < 1e-15);
}

#[test]
fn ber_examples() {
    let natural = BitMapping::natural(8).unwrap();
    let truth = vec![1, 2, 3, 4, 5];
    let perfect = compute_ber(&truth, &truth, &natural).unwrap();
    assert_eq!((perfect.ser(), perfect.ber()), (0.0, 0.0));
    // Flip the lowest label bit of every decision.
    let flipped: Vec<usize> = truth.iter().map(|&t| ((t - 1) ^ 1) + 1).collect();
    let c = compute_ber(&truth, &flipped, &natural).unwrap();
    assert_eq!(c.ser(), 1.0);
    assert!((c.ber() - 1.0 / 3.0).abs() < 1e-15);
    assert!(matches!(compute_ber(&[], &[], &natural), Err(Error::Usage(_))));
}

#[test]
fn uniform_guessing_approaches_analytic_rates() {
    let mut rng = Rng::new(7);
    let n = 200_000;
    let truth: Vec<usize> = (0..n).map(|_| rng.below(8) + 1).collect();
    let guesses: Vec<usize> = (0..n).map(|_| rng.below(8) + 1).collect();
    let c = compute_ber(&truth, &guesses, &BitMapping::natural(8).unwrap()).unwrap();
    // Binomial standard errors are below 1e-3 at this size.
    assert!((c.ser() - 7.0 / 8.0).abs() < 5e-3);
    assert!((c.ber() - 0.5).abs() < 5e-3);
}

#[test]
fn confusion_examples() {
    let truth = vec![1, 2, 2, 3, 8];
    let cm = confusion_matrix(&truth, &truth, 8).unwrap();
    assert_eq!(cm.total(), 5);
    for t in 1..=8 {
        for d in 1..=8 {
            if t != d {
                assert_eq!(cm.count(t, d), 0);
            }
        }
    }
    assert_eq!(cm.row_total(2), 2);
    let decisions = vec![2, 1, 2, 3, 1];
    let swap = |v: usize| match v {
        1 => 2,
        2 => 1,
        o => o,
    };
    let a = confusion_matrix(&truth, &decisions, 8).unwrap();
    let t2: Vec<usize> = truth.iter().map(|&v| swap(v)).collect();
    let d2: Vec<usize> = decisions.iter().map(|&v| swap(v)).collect();
    let b = confusion_matrix(&t2, &d2, 8).unwrap();
    for t in 1..=8 {
        for d in 1..=8 {
            assert_eq!(a.count(t, d), b.count(swap(t), swap(d)));
        }
    }
}

#[test]
fn q2_matches_bisection() {
    for (ber, expected, tol) in [(0.02275, 6.02, 0.01), (1e-3, 9.80, 0.02)] {
        let q2 = q2_from_ber(ber).unwrap();
        assert!((q2 - common::q2_by_bisection(ber)).abs() < 1e-9);
        assert!((q2 - expected).abs() < tol, "{q2}");
    }
    assert!(q2_from_ber(1e-3).unwrap() > q2_from_ber(1e-2).unwrap());
    for bad in [0.0, 0.5, -0.1, f64::NAN] {
        assert!(matches!(q2_from_ber(bad), Err(Error::Domain(_))));
    }
}

#[test]
fn encode_and_decode_shapes() {
    let cfg = TransceiverConfig::default();
    let (tx, rx) = cfg.new_pair(&mut Rng::new(1)).unwrap();
    let stream = tx_encode(&tx, &[3, 1, 3]).unwrap();
    assert_eq!(stream.len(), 18);
    assert_eq!(stream[..6], stream[12..]);
    assert!(stream.iter().all(|&v| v > 0.0 && v < 1.0));
    assert!(matches!(
        tx_encode(&tx, &[9]),
        Err(Error::Message { value: 9, order: 8 })
    ));
    let p = rx_decode(&rx, &[0.3, -1.0, 2.0, 0.0, 0.5, 0.1]).unwrap();
    assert!(p.iter().all(|v| v.is_finite() && *v >= 0.0));
    assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    assert!(matches!(rx_decode(&rx, &[0.0; 5]), Err(Error::Shape(_))));
}

#[test]
fn ties_go_to_the_lowest_message() {
    assert_eq!(argmax(&[0.2, 0.4, 0.4]), 1);
    let net = DenseNet::from_layers(vec![Dense::new(
        Array2::zeros((4, 2)),
        Array1::zeros(4),
        Activation::Softmax,
    )
    .unwrap()])
    .unwrap();
    assert_eq!(
        rx_decide(&net, Array2::from_elem((3, 2), 0.7).view()).unwrap(),
        vec![1, 1, 1]
    );
}

#[test]
fn message_sequences_validate_their_alphabet() {
    assert!(MessageSequence::new(vec![1, 8], 8).is_ok());
    assert!(MessageSequence::new(vec![0], 8).is_err());
    assert!(MessageSequence::new(vec![1], 6).is_err());
    let seq = MessageSequence::random(1000, 8, &mut Rng::new(2)).unwrap();
    assert!(seq.messages().iter().all(|&s| (1..=8).contains(&s)));
}

#[test]
fn autoencoder_closes_over_an_ideal_link() {
    let cfg = TransceiverConfig::default();
    let mut rng = Rng::new(4);
    let (mut tx, mut rx) = cfg.new_pair(&mut rng).unwrap();
    let (mut tx_state, mut rx_state) = (AdamState::for_net(&tx), AdamState::for_net(&rx));
    let labels = one_hot(0..8, 8);
    let mut steps = 0;
    let ser = |tx: &DenseNet, rx: &DenseNet| {
        let decided = rx_decide(rx, tx.predict_batch(labels.view()).unwrap().view()).unwrap();
        decided.iter().enumerate().filter(|(i, &d)| d != i + 1).count()
    };
    while ser(&tx, &rx) > 0 {
        assert!(steps < 500, "not separable after 500 steps");
        let tc = tx.forward_batch(labels.view()).unwrap();
        let rc = rx.forward_batch(tc.output()).unwrap();
        let (_, g) = softmax_cross_entropy(labels.view(), rc.output()).unwrap();
        let (rg, gy) = rx.backward_batch_pre_activation(&rc, g.view()).unwrap();
        let (tg, _) = tx.backward_batch(&tc, gy.view()).unwrap();
        tx.apply_adam(&mut tx_state, &tg, 1e-3).unwrap();
        rx.apply_adam(&mut rx_state, &rg, 1e-3).unwrap();
        steps += 1;
    }
}
