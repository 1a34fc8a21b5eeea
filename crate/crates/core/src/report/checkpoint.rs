use std::io::Write;
use std::path::Path;

use ndarray::{Array1, Array2};

use crate::error::{CheckpointError, Error, Result};
use crate::gan::GanPair;
use crate::nn::{Activation, Dense, DenseNet};

pub const MAGIC: &[u8; 8] = b"GANAE001";
const MAGIC_STEM: &[u8; 5] = b"GANAE";
pub const FORMAT_VERSION: u32 = 1;

/// A named tensor stored as 32-bit little-endian floats.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub name: String,
    pub dims: Vec<usize>,
    pub data: Vec<f32>,
}

impl Tensor {
    pub fn new(name: impl Into<String>, dims: Vec<usize>, data: Vec<f32>) -> Result<Self> {
        let name = name.into();
        if dims.iter().product::<usize>() != data.len() {
            return Err(Error::Shape(format!(
                "tensor `{name}` has {} values for dims {dims:?}",
                data.len()
            )));
        }
        Ok(Self { name, dims, data })
    }

    pub fn from_f64(name: impl Into<String>, dims: Vec<usize>, data: impl IntoIterator<Item = f64>) -> Result<Self> {
        Self::new(name, dims, data.into_iter().map(|v| v as f32).collect())
    }

    /// Bit patterns of the payload, for exact comparisons.
    pub fn bits(&self) -> Vec<u32> {
        self.data.iter().map(|v| v.to_bits()).collect()
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Checkpoint {
    tensors: Vec<Tensor>,
}

impl Checkpoint {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn tensors(&self) -> &[Tensor] {
        &self.tensors
    }

    /// Adds a tensor, replacing one of the same name.
    pub fn insert(&mut self, tensor: Tensor) {
        match self.tensors.iter_mut().find(|t| t.name == tensor.name) {
            Some(slot) => *slot = tensor,
            None => self.tensors.push(tensor),
        }
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.tensors.iter().find(|t| t.name == name)
    }

    fn require(&self, name: &str) -> std::result::Result<&Tensor, CheckpointError> {
        self.get(name)
            .ok_or_else(|| CheckpointError::MissingTensor(name.to_string()))
    }

    pub fn contains_net(&self, prefix: &str) -> bool {
        self.get(&format!("{prefix}.layout")).is_some()
    }

    /// Stores a network as `{prefix}.layout` (activation codes) plus
    /// `{prefix}.{i}.weights` / `{prefix}.{i}.biases` per layer.
    pub fn insert_net(&mut self, prefix: &str, net: &DenseNet) {
        let codes: Vec<f32> = net.layers().iter().map(|l| f32::from(l.activation().code())).collect();
        self.insert(Tensor::new(format!("{prefix}.layout"), vec![codes.len()], codes).expect("layout dims"));
        for (i, layer) in net.layers().iter().enumerate() {
            let w = layer.weights();
            self.insert(
                Tensor::from_f64(
                    format!("{prefix}.{i}.weights"),
                    vec![w.nrows(), w.ncols()],
                    w.iter().copied(),
                )
                .expect("weight dims"),
            );
            self.insert(
                Tensor::from_f64(
                    format!("{prefix}.{i}.biases"),
                    vec![layer.biases().len()],
                    layer.biases().iter().copied(),
                )
                .expect("bias dims"),
            );
        }
    }

    /// Rebuilds a network stored with [`Checkpoint::insert_net`]; parameters
    /// come back at 32-bit precision.
    pub fn net(&self, prefix: &str) -> std::result::Result<DenseNet, CheckpointError> {
        let layout = self.require(&format!("{prefix}.layout"))?;
        let mut layers = Vec::with_capacity(layout.data.len());
        for (i, &code) in layout.data.iter().enumerate() {
            let activation = Activation::from_code(code as u8)
                .filter(|_| code.fract() == 0.0 && (0.0..=255.0).contains(&code))
                .ok_or_else(|| CheckpointError::Malformed(format!("activation code {code} in `{prefix}`")))?;
            let w = self.require(&format!("{prefix}.{i}.weights"))?;
            let b = self.require(&format!("{prefix}.{i}.biases"))?;
            if w.dims.len() != 2 || b.dims != [w.dims[0]] {
                return Err(CheckpointError::Malformed(format!(
                    "layer {i} of `{prefix}` has dims {:?} / {:?}",
                    w.dims, b.dims
                )));
            }
            let weights =
                Array2::from_shape_vec((w.dims[0], w.dims[1]), w.data.iter().map(|&v| f64::from(v)).collect())
                    .map_err(|e| CheckpointError::Malformed(e.to_string()))?;
            let biases = Array1::from_iter(b.data.iter().map(|&v| f64::from(v)));
            layers
                .push(Dense::new(weights, biases, activation).map_err(|e| CheckpointError::Malformed(e.to_string()))?);
        }
        DenseNet::from_layers(layers).map_err(|e| CheckpointError::Malformed(e.to_string()))
    }

    pub fn insert_gan(&mut self, prefix: &str, pair: &GanPair) {
        self.insert_net(&format!("{prefix}.generator"), &pair.generator);
        self.insert_net(&format!("{prefix}.discriminator"), &pair.discriminator);
        self.insert(Tensor::new(format!("{prefix}.memory"), vec![1], vec![pair.memory() as f32]).expect("scalar"));
    }

    pub fn gan(&self, prefix: &str) -> std::result::Result<GanPair, CheckpointError> {
        let memory = self
            .require(&format!("{prefix}.memory"))?
            .data
            .first()
            .copied()
            .unwrap_or(0.0) as usize;
        GanPair::from_nets(
            self.net(&format!("{prefix}.generator"))?,
            self.net(&format!("{prefix}.discriminator"))?,
            memory,
        )
        .map_err(|e| CheckpointError::Malformed(e.to_string()))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.tensors.len() as u32).to_le_bytes());
        for t in &self.tensors {
            out.extend_from_slice(&(t.name.len() as u32).to_le_bytes());
            out.extend_from_slice(t.name.as_bytes());
            out.extend_from_slice(&(t.dims.len() as u32).to_le_bytes());
            for &d in &t.dims {
                out.extend_from_slice(&(d as u64).to_le_bytes());
            }
            for v in &t.data {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        let crc = crc32fast::hash(&out);
        out.extend_from_slice(&crc.to_le_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> std::result::Result<Self, CheckpointError> {
        if bytes.len() < MAGIC.len() || &bytes[..MAGIC_STEM.len()] != MAGIC_STEM {
            return Err(CheckpointError::Magic);
        }
        if &bytes[..MAGIC.len()] != MAGIC {
            return Err(CheckpointError::Version(
                String::from_utf8_lossy(&bytes[MAGIC_STEM.len()..MAGIC.len()]).into_owned(),
            ));
        }
        if bytes.len() < MAGIC.len() + 12 {
            return Err(CheckpointError::Truncated);
        }
        let (body, tail) = bytes.split_at(bytes.len() - 4);
        let stored = u32::from_le_bytes(tail.try_into().expect("4 bytes"));
        let computed = crc32fast::hash(body);
        let mut reader = Reader {
            bytes: body,
            pos: MAGIC.len(),
        };
        let version = reader.u32()?;
        if version != FORMAT_VERSION {
            return Err(CheckpointError::Version(version.to_string()));
        }
        // A short file usually fails the CRC too; report the more specific cause.
        let parsed = (|| {
            let count = reader.u32()? as usize;
            let mut tensors = Vec::with_capacity(count.min(1 << 16));
            for _ in 0..count {
                let name_len = reader.u32()? as usize;
                let name = String::from_utf8(reader.take(name_len)?.to_vec())
                    .map_err(|_| CheckpointError::Malformed("tensor name is not UTF-8".into()))?;
                let rank = reader.u32()? as usize;
                let mut dims = Vec::with_capacity(rank.min(16));
                for _ in 0..rank {
                    dims.push(
                        usize::try_from(reader.u64()?)
                            .map_err(|_| CheckpointError::Malformed("dimension overflow".into()))?,
                    );
                }
                let len = dims
                    .iter()
                    .try_fold(1usize, |acc, &d| acc.checked_mul(d))
                    .and_then(|n| n.checked_mul(4))
                    .ok_or_else(|| CheckpointError::Malformed("tensor size overflow".into()))?;
                let data = reader
                    .take(len)?
                    .chunks_exact(4)
                    .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
                    .collect();
                tensors.push(Tensor { name, dims, data });
            }
            if reader.pos != body.len() {
                return Err(CheckpointError::Malformed(format!(
                    "{} trailing bytes",
                    body.len() - reader.pos
                )));
            }
            Ok(Checkpoint { tensors })
        })();
        match parsed {
            Err(CheckpointError::Truncated) => Err(CheckpointError::Truncated),
            _ if stored != computed => Err(CheckpointError::Crc { stored, computed }),
            other => other,
        }
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, len: usize) -> std::result::Result<&'a [u8], CheckpointError> {
        let end = self
            .pos
            .checked_add(len)
            .filter(|&e| e <= self.bytes.len())
            .ok_or(CheckpointError::Truncated)?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> std::result::Result<u32, CheckpointError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> std::result::Result<u64, CheckpointError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

/// Writes to a sibling temporary file, then renames it into place.
pub fn save_checkpoint(path: &Path, checkpoint: &Checkpoint) -> Result<()> {
    let file_name = path
        .file_name()
        .ok_or_else(|| Error::Usage(format!("checkpoint path {} has no file name", path.display())))?;
    let mut tmp_name = file_name.to_os_string();
    tmp_name.push(".partial");
    let tmp = path.with_file_name(tmp_name);
    let write = || -> std::io::Result<()> {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(&checkpoint.to_bytes())?;
        f.sync_all()?;
        std::fs::rename(&tmp, path)
    };
    write().map_err(|e| {
        let _ = std::fs::remove_file(&tmp);
        Error::io(path, e)
    })
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Checkpoint::from_bytes(&bytes).map_err(|kind| Error::Checkpoint {
        path: path.to_path_buf(),
        kind,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Checkpoint {
        let mut c = Checkpoint::new();
        c.insert(Tensor::new("a", vec![2, 3], vec![1.0, -2.5, f32::MIN_POSITIVE, 0.0, -0.0, 3.25]).unwrap());
        c.insert(Tensor::new("scalar", vec![], vec![7.0]).unwrap());
        c
    }

    #[test]
    fn bytes_round_trip() {
        let c = sample();
        let back = Checkpoint::from_bytes(&c.to_bytes()).unwrap();
        assert_eq!(back.tensors().len(), 2);
        for (x, y) in c.tensors().iter().zip(back.tensors()) {
            assert_eq!(x.bits(), y.bits());
            assert_eq!(x.dims, y.dims);
        }
    }

    #[test]
    fn corruption_is_detected() {
        let bytes = sample().to_bytes();
        let mut bad = bytes.clone();
        let last_payload = bad.len() - 5;
        bad[last_payload] ^= 0x40;
        assert!(matches!(Checkpoint::from_bytes(&bad), Err(CheckpointError::Crc { .. })));
        assert_eq!(
            Checkpoint::from_bytes(&bytes[..bytes.len() - 9]),
            Err(CheckpointError::Truncated)
        );
        assert_eq!(Checkpoint::from_bytes(b"NOTACKPT...."), Err(CheckpointError::Magic));
        let mut old = bytes;
        old[..8].copy_from_slice(b"GANAE000");
        assert_eq!(
            Checkpoint::from_bytes(&old),
            Err(CheckpointError::Version("000".into()))
        );
    }

    #[test]
    fn mismatched_tensor_dims_rejected() {
        assert!(Tensor::new("x", vec![2, 2], vec![0.0; 3]).is_err());
    }
}
