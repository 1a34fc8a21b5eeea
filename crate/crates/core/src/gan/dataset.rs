use ndarray::{concatenate, s, Array2, ArrayView2, Axis};

use crate::error::{Error, Result};

/// A message reserved for the transceiver update, with its 1-based position
/// in the transmitted sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TransceiverRow {
    pub position: usize,
    pub message: usize,
}

/// Training material cut from one or more aligned transmissions.
///
/// `windows` row r is the concatenation of the `m` transmitted blocks centred
/// on the symbol whose received block is `targets` row r.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditioningDataset {
    memory: usize,
    samples_per_symbol: usize,
    windows: Array2<f64>,
    targets: Array2<f64>,
    transceiver_rows: Vec<TransceiverRow>,
    transceiver_received: Array2<f64>,
}

/// Splits aligned symbol streams into the transceiver part (first `q`
/// symbols) and conditioning windows over 1-based rows `q + 1 + h ..= T - h`
/// with `h = (m - 1) / 2`; for m = 3 that is `q + 2 ..= T - 1`.
pub fn build_conditioning_dataset(
    messages: &[usize],
    tx: ArrayView2<'_, f64>,
    rx: ArrayView2<'_, f64>,
    memory: usize,
    q: usize,
) -> Result<ConditioningDataset> {
    if memory == 0 || memory % 2 == 0 {
        return Err(Error::config(format!("memory {memory} must be odd")));
    }
    let total = tx.nrows();
    let n = tx.ncols();
    if rx.dim() != tx.dim() || messages.len() != total {
        return Err(Error::Shape(format!(
            "misaligned streams: {} messages, tx {:?}, rx {:?}",
            messages.len(),
            tx.dim(),
            rx.dim()
        )));
    }
    let half = (memory - 1) / 2;
    if total < q + 2 * half + 1 {
        return Err(Error::Usage(format!(
            "{total} symbols are too few for q = {q} and memory {memory}"
        )));
    }
    let first = q + 1 + half;
    let last = total - half;
    let rows = last + 1 - first;
    let mut windows = Array2::zeros((rows, memory * n));
    let mut targets = Array2::zeros((rows, n));
    for (r, i) in (first..=last).enumerate() {
        // 1-based index i -> 0-based i - 1.
        let centre = i - 1;
        for (slot, t) in (centre - half..=centre + half).enumerate() {
            windows.slice_mut(s![r, slot * n..(slot + 1) * n]).assign(&tx.row(t));
        }
        targets.row_mut(r).assign(&rx.row(centre));
    }
    Ok(ConditioningDataset {
        memory,
        samples_per_symbol: n,
        windows,
        targets,
        transceiver_rows: messages[..q]
            .iter()
            .enumerate()
            .map(|(i, &message)| TransceiverRow {
                position: i + 1,
                message,
            })
            .collect(),
        transceiver_received: rx.slice(s![..q, ..]).to_owned(),
    })
}

impl ConditioningDataset {
    pub fn from_parts(memory: usize, windows: Array2<f64>, targets: Array2<f64>) -> Result<Self> {
        let n = targets.ncols();
        if memory == 0 || memory % 2 == 0 || windows.ncols() != memory * n || windows.nrows() != targets.nrows() {
            return Err(Error::Shape(format!(
                "windows {:?} and targets {:?} do not fit memory {memory}",
                windows.dim(),
                targets.dim()
            )));
        }
        Ok(Self {
            memory,
            samples_per_symbol: n,
            windows,
            targets,
            transceiver_rows: Vec::new(),
            transceiver_received: Array2::zeros((0, n)),
        })
    }

    /// Appends another transmission's conditioning rows (not its transceiver rows).
    pub fn append_windows(&mut self, other: &ConditioningDataset) -> Result<()> {
        if other.memory != self.memory || other.samples_per_symbol != self.samples_per_symbol {
            return Err(Error::Shape("datasets with different window shapes".into()));
        }
        self.windows = concatenate![Axis(0), self.windows, other.windows];
        self.targets = concatenate![Axis(0), self.targets, other.targets];
        Ok(())
    }

    pub fn memory(&self) -> usize {
        self.memory
    }

    pub fn samples_per_symbol(&self) -> usize {
        self.samples_per_symbol
    }

    pub fn len(&self) -> usize {
        self.windows.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.windows.nrows() == 0
    }

    pub fn windows(&self) -> ArrayView2<'_, f64> {
        self.windows.view()
    }

    pub fn targets(&self) -> ArrayView2<'_, f64> {
        self.targets.view()
    }

    /// The A rows: messages (with positions) reserved for the transceiver update.
    pub fn transceiver_rows(&self) -> &[TransceiverRow] {
        &self.transceiver_rows
    }

    /// The B rows: received blocks of the transceiver messages.
    pub fn transceiver_received(&self) -> ArrayView2<'_, f64> {
        self.transceiver_received.view()
    }

    /// Gathers `(windows, targets)` for the given row indices.
    pub fn gather(&self, rows: &[usize]) -> (Array2<f64>, Array2<f64>) {
        (self.windows.select(Axis(0), rows), self.targets.select(Axis(0), rows))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(total: usize, n: usize) -> (Vec<usize>, Array2<f64>, Array2<f64>) {
        let tx = Array2::from_shape_fn((total, n), |(t, j)| (t + 1) as f64 + j as f64 * 1e-3);
        let rx = Array2::from_shape_fn((total, n), |(t, _)| -((t + 1) as f64));
        let msgs = (0..total).map(|t| t % 8 + 1).collect();
        (msgs, tx, rx)
    }

    #[test]
    fn ten_symbols_q_two() {
        let (msgs, tx, rx) = ramp(10, 2);
        let d = build_conditioning_dataset(&msgs, tx.view(), rx.view(), 3, 2).unwrap();
        assert_eq!(d.len(), 6);
        // Rows cover 1-based indices 4..=9.
        let centres: Vec<f64> = d.targets().column(0).iter().map(|v| -v).collect();
        assert_eq!(centres, vec![4.0, 5.0, 6.0, 7.0, 8.0, 9.0]);
        assert_eq!(d.windows().row(0).to_vec(), vec![3.0, 3.001, 4.0, 4.001, 5.0, 5.001]);
        assert_eq!(d.transceiver_rows().len(), 2);
        assert_eq!(
            d.transceiver_rows()[1],
            TransceiverRow {
                position: 2,
                message: 2
            }
        );
        assert_eq!(d.transceiver_received().row(1).to_vec(), vec![-2.0, -2.0]);
    }

    #[test]
    fn too_short() {
        let (msgs, tx, rx) = ramp(4, 2);
        assert!(matches!(
            build_conditioning_dataset(&msgs, tx.view(), rx.view(), 3, 2),
            Err(Error::Usage(_))
        ));
        let (msgs, tx, rx) = ramp(5, 2);
        assert_eq!(
            build_conditioning_dataset(&msgs, tx.view(), rx.view(), 3, 2)
                .unwrap()
                .len(),
            1
        );
    }

    #[test]
    fn even_memory_rejected() {
        let (msgs, tx, rx) = ramp(10, 2);
        assert!(build_conditioning_dataset(&msgs, tx.view(), rx.view(), 2, 2).is_err());
    }

    #[test]
    fn wider_memory_uses_symmetric_windows() {
        let (msgs, tx, rx) = ramp(12, 1);
        let d = build_conditioning_dataset(&msgs, tx.view(), rx.view(), 5, 1).unwrap();
        // h = 2: rows q + 3 ..= T - 2 = 4..=10.
        assert_eq!(d.len(), 7);
        assert_eq!(d.windows().row(0).to_vec(), vec![2.0, 3.0, 4.0, 5.0, 6.0]);
        assert_eq!(d.targets()[[0, 0]], -4.0);
    }
}
