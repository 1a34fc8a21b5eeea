use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::transceiver::MetricsRecord;

pub const METRICS_JSONL: &str = "metrics.jsonl";
pub const METRICS_CSV: &str = "metrics.csv";
const CSV_HEADER: &str = "k,ser,ber,q2_db,gan_d_loss,gan_g_loss,wallclock_s,seed";

/// One line of `metrics.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsLine {
    pub k: usize,
    pub ser: f64,
    pub ber: f64,
    pub q2_db: Option<f64>,
    pub gan_d_loss: Option<f64>,
    pub gan_g_loss: Option<f64>,
    pub wallclock_s: f64,
    pub seed: u64,
}

impl MetricsLine {
    pub fn from_record(record: &MetricsRecord, wallclock_s: f64, seed: u64) -> Self {
        Self {
            k: record.k,
            ser: record.ser,
            ber: record.ber,
            q2_db: record.q2_db,
            gan_d_loss: record.gan_discriminator_loss,
            gan_g_loss: record.gan_generator_loss,
            wallclock_s,
            seed,
        }
    }

    pub fn csv_row(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{},{}",
            self.k,
            self.ser,
            self.ber,
            opt(self.q2_db),
            opt(self.gan_d_loss),
            opt(self.gan_g_loss),
            self.wallclock_s,
            self.seed
        )
    }
}

/// Appends metrics lines to `metrics.jsonl` and `metrics.csv`, flushing
/// after every line so an interrupted run leaves a parseable prefix.
pub struct MetricsWriter {
    jsonl: File,
    csv: File,
    dir: PathBuf,
    last_k: Option<usize>,
}

impl MetricsWriter {
    /// Starts fresh files in `dir`.
    pub fn create(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let open = |name: &str| {
            let path = dir.join(name);
            OpenOptions::new()
                .create(true)
                .write(true)
                .truncate(true)
                .open(&path)
                .map_err(|e| Error::io(path, e))
        };
        let jsonl = open(METRICS_JSONL)?;
        let mut csv = open(METRICS_CSV)?;
        writeln!(csv, "{CSV_HEADER}").map_err(|e| Error::io(dir.join(METRICS_CSV), e))?;
        Ok(Self {
            jsonl,
            csv,
            dir: dir.to_path_buf(),
            last_k: None,
        })
    }

    pub fn append(&mut self, line: &MetricsLine) -> Result<()> {
        if self.last_k.is_some_and(|k| line.k <= k) {
            return Err(Error::Usage(format!(
                "metrics line k = {} after k = {}",
                line.k,
                self.last_k.unwrap_or_default()
            )));
        }
        let json = serde_json::to_string(line).map_err(|e| Error::Usage(e.to_string()))?;
        let write = |file: &mut File, text: &str, name: &str| {
            file.write_all(text.as_bytes())
                .and_then(|_| file.write_all(b"\n"))
                .and_then(|_| file.flush())
                .map_err(|e| Error::io(self.dir.join(name), e))
        };
        write(&mut self.jsonl, &json, METRICS_JSONL)?;
        write(&mut self.csv, &line.csv_row(), METRICS_CSV)?;
        self.last_k = Some(line.k);
        Ok(())
    }
}

/// Writes both metrics files for a complete history.
pub fn write_metrics(dir: &Path, lines: &[MetricsLine]) -> Result<()> {
    let mut w = MetricsWriter::create(dir)?;
    lines.iter().try_for_each(|l| w.append(l))
}

/// Reads `metrics.jsonl`, skipping a torn final line.
pub fn read_metrics(path: &Path) -> Result<Vec<MetricsLine>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let lines: Vec<String> = BufReader::new(file)
        .lines()
        .collect::<std::io::Result<_>>()
        .map_err(|e| Error::io(path, e))?;
    let mut out = Vec::with_capacity(lines.len());
    for (i, text) in lines.iter().enumerate() {
        if text.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<MetricsLine>(text) {
            Ok(line) => out.push(line),
            Err(_) if i + 1 == lines.len() => break,
            Err(e) => {
                return Err(Error::Usage(format!("{}:{}: {e}", path.display(), i + 1)));
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(k: usize) -> MetricsLine {
        MetricsLine {
            k,
            ser: 0.1,
            ber: 0.04,
            q2_db: Some(4.9),
            gan_d_loss: (k > 0).then_some(1.3),
            gan_g_loss: (k > 0).then_some(0.8),
            wallclock_s: 1.5,
            seed: 7,
        }
    }

    #[test]
    fn write_then_read() {
        let dir = tempfile::tempdir().unwrap();
        let lines: Vec<_> = (0..4).map(line).collect();
        write_metrics(dir.path(), &lines).unwrap();
        assert_eq!(read_metrics(&dir.path().join(METRICS_JSONL)).unwrap(), lines);
        let csv = std::fs::read_to_string(dir.path().join(METRICS_CSV)).unwrap();
        assert_eq!(csv.lines().count(), lines.len() + 1);
    }

    #[test]
    fn k_must_increase() {
        let dir = tempfile::tempdir().unwrap();
        let mut w = MetricsWriter::create(dir.path()).unwrap();
        w.append(&line(0)).unwrap();
        assert!(w.append(&line(0)).is_err());
    }

    #[test]
    fn torn_tail_is_skipped() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(METRICS_JSONL);
        let good = serde_json::to_string(&line(0)).unwrap();
        std::fs::write(&path, format!("{good}\n{{\"k\":1,\"se")).unwrap();
        assert_eq!(read_metrics(&path).unwrap(), vec![line(0)]);
    }
}
