use std::f64::consts::SQRT_2;

use serde::{Deserialize, Serialize};
use statrs::function::erf::{erfc, erfc_inv};

use crate::error::{Error, Result};
use crate::transceiver::BitMapping;

/// Counts of true message `i` decided as `j`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    order: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn zeros(order: usize) -> Self {
        Self {
            order,
            counts: vec![0; order * order],
        }
    }

    pub fn from_pairs(truth: &[usize], decisions: &[usize], order: usize) -> Result<Self> {
        if truth.len() != decisions.len() {
            return Err(Error::Shape(format!(
                "{} true messages vs {} decisions",
                truth.len(),
                decisions.len()
            )));
        }
        let mut m = Self::zeros(order);
        for (&t, &d) in truth.iter().zip(decisions) {
            for v in [t, d] {
                if v == 0 || v > order {
                    return Err(Error::Message { value: v, order });
                }
            }
            m.counts[(t - 1) * order + (d - 1)] += 1;
        }
        Ok(m)
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Entry for true message `truth` decided as `decision` (1-based).
    pub fn count(&self, truth: usize, decision: usize) -> u64 {
        self.counts[(truth - 1) * self.order + (decision - 1)]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn row_total(&self, truth: usize) -> u64 {
        (1..=self.order).map(|d| self.count(truth, d)).sum()
    }

    pub fn merge(&mut self, other: &ConfusionMatrix) {
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
    }

    /// Row-normalized decision probabilities `P(decision | truth)`.
    pub fn probabilities(&self) -> Vec<Vec<f64>> {
        (1..=self.order)
            .map(|t| {
                let total = self.row_total(t).max(1) as f64;
                (1..=self.order).map(|d| self.count(t, d) as f64 / total).collect()
            })
            .collect()
    }
}

pub fn confusion_matrix(truth: &[usize], decisions: &[usize], order: usize) -> Result<ConfusionMatrix> {
    ConfusionMatrix::from_pairs(truth, decisions, order)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorCounts {
    pub symbols: u64,
    pub symbol_errors: u64,
    pub bit_errors: u64,
    pub bits_per_symbol: u32,
}

impl ErrorCounts {
    pub fn ser(&self) -> f64 {
        self.symbol_errors as f64 / self.symbols as f64
    }

    pub fn ber(&self) -> f64 {
        self.bit_errors as f64 / (self.symbols * u64::from(self.bits_per_symbol)) as f64
    }
}

pub fn compute_ber(truth: &[usize], decisions: &[usize], mapping: &BitMapping) -> Result<ErrorCounts> {
    if truth.len() != decisions.len() {
        return Err(Error::Shape(format!(
            "{} true messages vs {} decisions",
            truth.len(),
            decisions.len()
        )));
    }
    if truth.is_empty() {
        return Err(Error::Usage("no symbols to count".into()));
    }
    let order = mapping.order();
    let mut counts = ErrorCounts {
        symbols: truth.len() as u64,
        symbol_errors: 0,
        bit_errors: 0,
        bits_per_symbol: mapping.bits() as u32,
    };
    for (&t, &d) in truth.iter().zip(decisions) {
        for v in [t, d] {
            if v == 0 || v > order {
                return Err(Error::Message { value: v, order });
            }
        }
        if t != d {
            counts.symbol_errors += 1;
            counts.bit_errors += u64::from(mapping.bit_errors(t, d));
        }
    }
    Ok(counts)
}

/// `Q^2 = 20 log10(sqrt(2) * erfc^-1(2 BER))` in dB.
pub fn q2_from_ber(ber: f64) -> Result<f64> {
    if !(ber > 0.0 && ber < 0.5) {
        return Err(Error::Domain(format!("BER {ber} outside (0, 0.5)")));
    }
    Ok(20.0 * (SQRT_2 * erfc_inv(2.0 * ber)).log10())
}

/// Inverse of [`q2_from_ber`].
pub fn ber_from_q2(q2_db: f64) -> f64 {
    let q = 10f64.powf(q2_db / 20.0);
    0.5 * erfc(q / SQRT_2)
}

/// One point of the BER trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub k: usize,
    pub ser: f64,
    pub ber: f64,
    /// Absent when the BER leaves (0, 0.5).
    pub q2_db: Option<f64>,
    pub gan_generator_loss: Option<f64>,
    pub gan_discriminator_loss: Option<f64>,
    pub symbols: u64,
    pub symbol_errors: u64,
    pub bit_errors: u64,
}

impl MetricsRecord {
    pub fn from_counts(k: usize, counts: &ErrorCounts) -> Self {
        let ber = counts.ber();
        Self {
            k,
            ser: counts.ser(),
            ber,
            q2_db: q2_from_ber(ber).ok(),
            gan_generator_loss: None,
            gan_discriminator_loss: None,
            symbols: counts.symbols,
            symbol_errors: counts.symbol_errors,
            bit_errors: counts.bit_errors,
        }
    }
}
