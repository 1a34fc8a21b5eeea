use ndarray::{Array2, ArrayView2};

use crate::channel::Channel;
use crate::error::{Error, Result};
use crate::gan::{build_conditioning_dataset, ConditioningDataset};
use crate::nn::{DenseNet, Rng};
use crate::transceiver::{
    compute_ber, confusion_matrix, optimize_bit_mapping, rx_decide, stream_to_blocks, tx_encode_blocks, BitMapping,
    ConfusionMatrix, MessageSequence, MetricsRecord,
};

/// Aligned messages, transmitted blocks and received blocks of one
/// transmission round, one entry per sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct Measurement {
    pub sequences: Vec<MessageSequence>,
    pub transmitted: Vec<Array2<f64>>,
    pub received: Vec<Array2<f64>>,
}

impl Measurement {
    pub fn symbols(&self) -> usize {
        self.sequences.iter().map(MessageSequence::len).sum()
    }

    pub fn all_messages(&self) -> Vec<usize> {
        self.sequences
            .iter()
            .flat_map(|s| s.messages().iter().copied())
            .collect()
    }
}

/// Sends `sequences` random sequences of `length` messages through the oracle.
/// Sequence `j` uses oracle stream `stream_base + j`.
pub fn transmit_and_measure(
    transmitter: &DenseNet,
    oracle: &dyn Channel,
    sequences: usize,
    length: usize,
    rng: &mut Rng,
    stream_base: u64,
) -> Result<Measurement> {
    let order = transmitter.input_width();
    let n = transmitter.output_width();
    if oracle.samples_per_symbol() != n {
        return Err(Error::Shape(format!(
            "transmitter emits {n} samples per symbol, channel expects {}",
            oracle.samples_per_symbol()
        )));
    }
    let mut out = Measurement {
        sequences: Vec::with_capacity(sequences),
        transmitted: Vec::with_capacity(sequences),
        received: Vec::with_capacity(sequences),
    };
    for j in 0..sequences {
        let seq = MessageSequence::random(length, order, rng)?;
        let blocks = tx_encode_blocks(transmitter, seq.messages())?;
        let stream = blocks.as_slice().expect("standard layout");
        let rx = oracle.transmit(stream, stream_base + j as u64)?;
        out.received.push(stream_to_blocks(&rx, n)?);
        out.transmitted.push(blocks);
        out.sequences.push(seq);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub record: MetricsRecord,
    pub confusion: ConfusionMatrix,
    pub mapping: BitMapping,
}

/// Decides the received blocks, optimizes the bit mapping on the resulting
/// confusion matrix and counts errors. The first and last symbol of every
/// sequence are left out.
pub fn evaluate(receiver: &DenseNet, measurement: &Measurement, k: usize) -> Result<Evaluation> {
    let order = receiver.output_width();
    let mut decisions = Vec::with_capacity(measurement.symbols());
    let mut truth = Vec::with_capacity(measurement.symbols());
    for (seq, rx) in measurement.sequences.iter().zip(&measurement.received) {
        if seq.len() < 3 {
            return Err(Error::Usage(format!(
                "a sequence of {} symbols has no interior",
                seq.len()
            )));
        }
        let interior = rx.slice(ndarray::s![1..seq.len() - 1, ..]);
        decisions.extend(rx_decide(receiver, interior)?);
        truth.extend_from_slice(&seq.messages()[1..seq.len() - 1]);
    }
    let confusion = confusion_matrix(&truth, &decisions, order)?;
    let mapping = optimize_bit_mapping(&confusion);
    let counts = compute_ber(&truth, &decisions, &mapping)?;
    Ok(Evaluation {
        record: MetricsRecord::from_counts(k, &counts),
        confusion,
        mapping,
    })
}

/// GAN training rows from every sequence; the first `q` symbols of sequence 0
/// are held out for the transceiver update.
pub fn conditioning_dataset(measurement: &Measurement, memory: usize, q: usize) -> Result<ConditioningDataset> {
    let mut parts = measurement
        .sequences
        .iter()
        .zip(&measurement.transmitted)
        .zip(&measurement.received)
        .enumerate()
        .map(|(j, ((seq, tx), rx))| {
            build_conditioning_dataset(seq.messages(), tx.view(), rx.view(), memory, if j == 0 { q } else { 0 })
        });
    let mut dataset = parts.next().ok_or_else(|| Error::Usage("empty measurement".into()))??;
    for part in parts {
        dataset.append_windows(&part?)?;
    }
    Ok(dataset)
}

/// The held-out `(message, received block)` pairs of sequence 0.
pub fn held_out_pairs(measurement: &Measurement, q: usize) -> Result<(Vec<usize>, ArrayView2<'_, f64>)> {
    let seq = measurement
        .sequences
        .first()
        .ok_or_else(|| Error::Usage("empty measurement".into()))?;
    if q == 0 || q > seq.len() {
        return Err(Error::Usage(format!("q = {q} outside 1..={}", seq.len())));
    }
    Ok((
        seq.messages()[..q].to_vec(),
        measurement.received[0].slice(ndarray::s![..q, ..]),
    ))
}
