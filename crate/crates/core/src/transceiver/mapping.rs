use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::transceiver::ConfusionMatrix;

/// Assignment of bit labels to messages: message `s` carries `labels[s - 1]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BitMapping {
    labels: Vec<usize>,
}

impl BitMapping {
    pub fn new(labels: Vec<usize>) -> Result<Self> {
        let order = labels.len();
        if order < 2 || !order.is_power_of_two() {
            return Err(Error::Domain(format!("mapping over {order} messages")));
        }
        let mut seen = vec![false; order];
        for &l in &labels {
            if l >= order || std::mem::replace(&mut seen[l], true) {
                return Err(Error::Domain(format!("labels {labels:?} are not a permutation")));
            }
        }
        Ok(Self { labels })
    }

    /// Message `s` carries the binary expansion of `s - 1`.
    pub fn natural(order: usize) -> Result<Self> {
        Self::new((0..order).collect())
    }

    pub fn order(&self) -> usize {
        self.labels.len()
    }

    pub fn bits(&self) -> usize {
        self.labels.len().trailing_zeros() as usize
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    /// Label of the 1-based message `s`.
    pub fn label(&self, message: usize) -> usize {
        self.labels[message - 1]
    }

    /// Bit errors when `truth` is decided as `decision` (both 1-based).
    pub fn bit_errors(&self, truth: usize, decision: usize) -> u32 {
        (self.label(truth) ^ self.label(decision)).count_ones()
    }
}

/// Expected bit errors implied by `confusion` under `labels`.
pub fn mapping_cost(confusion: &ConfusionMatrix, labels: &[usize]) -> u64 {
    let order = confusion.order();
    let mut cost = 0;
    for i in 0..order {
        for j in 0..order {
            if i != j {
                cost += confusion.count(i + 1, j + 1) * u64::from((labels[i] ^ labels[j]).count_ones());
            }
        }
    }
    cost
}

/// Rearranges `perm` into its lexicographic successor; false at the last one.
fn next_permutation(perm: &mut [usize]) -> bool {
    let Some(i) = perm.windows(2).rposition(|w| w[0] < w[1]) else {
        return false;
    };
    let j = perm.iter().rposition(|&v| v > perm[i]).expect("successor exists");
    perm.swap(i, j);
    perm[i + 1..].reverse();
    true
}

/// Largest order searched exhaustively (8! = 40320 candidates).
pub const EXHAUSTIVE_LIMIT: usize = 8;

/// Label assignment minimizing bit errors for the observed symbol confusions.
///
/// Up to [`EXHAUSTIVE_LIMIT`] messages every permutation is scored and the
/// lexicographically first minimum is returned. Larger alphabets fall back to
/// greedy pairwise-swap descent from the natural mapping, which is only a
/// local minimum.
pub fn optimize_bit_mapping(confusion: &ConfusionMatrix) -> BitMapping {
    let order = confusion.order();
    let mut best: Vec<usize> = (0..order).collect();
    let mut best_cost = mapping_cost(confusion, &best);

    if order <= EXHAUSTIVE_LIMIT {
        let mut perm = best.clone();
        while next_permutation(&mut perm) {
            let cost = mapping_cost(confusion, &perm);
            if cost < best_cost {
                best_cost = cost;
                best.copy_from_slice(&perm);
            }
        }
    } else {
        loop {
            let mut improved = None;
            for a in 0..order {
                for b in a + 1..order {
                    best.swap(a, b);
                    let cost = mapping_cost(confusion, &best);
                    best.swap(a, b);
                    if cost < best_cost {
                        best_cost = cost;
                        improved = Some((a, b));
                    }
                }
            }
            match improved {
                Some((a, b)) => best.swap(a, b),
                None => break,
            }
        }
    }
    BitMapping::new(best).expect("permutation by construction")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn permutations_in_lexicographic_order() {
        let mut p = vec![0, 1, 2];
        let mut seen = vec![p.clone()];
        while next_permutation(&mut p) {
            seen.push(p.clone());
        }
        assert_eq!(
            seen,
            vec![
                vec![0, 1, 2],
                vec![0, 2, 1],
                vec![1, 0, 2],
                vec![1, 2, 0],
                vec![2, 0, 1],
                vec![2, 1, 0]
            ]
        );
    }

    #[test]
    fn diagonal_confusion_keeps_identity() {
        let truth: Vec<usize> = (1..=8).collect();
        let c = ConfusionMatrix::from_pairs(&truth, &truth, 8).unwrap();
        assert_eq!(optimize_bit_mapping(&c).labels(), (0..8).collect::<Vec<_>>());
    }

    #[test]
    fn rejects_non_permutation() {
        assert!(BitMapping::new(vec![0, 1, 1, 3]).is_err());
        assert!(BitMapping::new(vec![0, 1, 2]).is_err());
    }

    #[test]
    fn greedy_fallback_for_large_orders() {
        let order = 16;
        let mut truth = Vec::new();
        let mut decided = Vec::new();
        for s in 1..=order {
            truth.push(s);
            decided.push(s % order + 1);
        }
        let c = ConfusionMatrix::from_pairs(&truth, &decided, order).unwrap();
        let m = optimize_bit_mapping(&c);
        let natural: Vec<usize> = (0..order).collect();
        assert!(mapping_cost(&c, m.labels()) <= mapping_cost(&c, &natural));
    }
}
