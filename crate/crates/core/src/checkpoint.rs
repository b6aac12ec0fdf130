//! Self-describing model checkpoints.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic        8 bytes   "CKMSRCK1"
//! header_len   u64       length of the JSON header in bytes
//! header       JSON      { format_version, dtype, config, seed, iteration,
//!                          tensors: [{ name, kind, shape, offset, len }] }
//! payload      dtype[]   tensor values, concatenated; offset/len count elements
//! ```
//!
//! `kind` is `"param"` or `"buffer"`. Tensors are matched by name on load, so
//! readers must not depend on their order.

use std::collections::HashMap;
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{SrResNet, SrResNetConfig};
use crate::nn::Scalar;

pub const MAGIC: &[u8; 8] = b"CKMSRCK1";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub kind: String,
    pub shape: Vec<usize>,
    pub offset: usize,
    pub len: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub format_version: u32,
    pub dtype: String,
    pub config: SrResNetConfig,
    pub seed: u64,
    pub iteration: u64,
    pub tensors: Vec<TensorEntry>,
}

fn bad(msg: impl Into<String>) -> Error {
    Error::Checkpoint(msg.into())
}

pub fn write_checkpoint<T: Scalar, W: Write>(model: &SrResNet<T>, iteration: u64, mut out: W) -> Result<()> {
    let mut tensors = Vec::new();
    let mut payload: Vec<f64> = Vec::new();
    let params = model.named_params();
    let buffers = model.named_buffers();
    let all = params
        .iter()
        .map(|(n, p)| (n, "param", &p.shape, &p.value))
        .chain(buffers.iter().map(|(n, b)| (n, "buffer", &b.shape, &b.value)));
    for (name, kind, shape, value) in all {
        tensors.push(TensorEntry {
            name: name.clone(),
            kind: kind.into(),
            shape: shape.clone(),
            offset: payload.len(),
            len: value.len(),
        });
        payload.extend(value.iter().map(|v| v.to_f64_lossy()));
    }
    let header = CheckpointHeader {
        format_version: FORMAT_VERSION,
        dtype: T::DTYPE.into(),
        config: model.config().clone(),
        seed: model.seed(),
        iteration,
        tensors,
    };
    let json = serde_json::to_vec(&header).map_err(|e| bad(e.to_string()))?;
    let mut bytes = Vec::with_capacity(16 + json.len() + payload.len() * 8);
    bytes.extend_from_slice(MAGIC);
    bytes.extend_from_slice(&(json.len() as u64).to_le_bytes());
    bytes.extend_from_slice(&json);
    match T::DTYPE {
        "f32" => payload.iter().for_each(|&v| bytes.extend_from_slice(&(v as f32).to_le_bytes())),
        _ => payload.iter().for_each(|&v| bytes.extend_from_slice(&v.to_le_bytes())),
    }
    out.write_all(&bytes).map_err(|e| bad(e.to_string()))
}

pub fn read_checkpoint<T: Scalar, R: Read>(mut input: R) -> Result<(SrResNet<T>, CheckpointHeader)> {
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes).map_err(|e| bad(e.to_string()))?;
    if bytes.len() < 16 || &bytes[..8] != MAGIC {
        return Err(bad("not a checkpoint (bad magic)"));
    }
    let hlen = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
    let header_bytes = bytes.get(16..16 + hlen).ok_or_else(|| bad("truncated header"))?;
    let header: CheckpointHeader = serde_json::from_slice(header_bytes).map_err(|e| bad(e.to_string()))?;
    if header.format_version != FORMAT_VERSION {
        return Err(bad(format!("unsupported format version {}", header.format_version)));
    }
    let width = match header.dtype.as_str() {
        "f32" => 4,
        "f64" => 8,
        other => return Err(bad(format!("unsupported dtype {other}"))),
    };
    let data = &bytes[16 + hlen..];
    let element = |i: usize| -> Result<f64> {
        let b = data.get(i * width..(i + 1) * width).ok_or_else(|| bad("truncated payload"))?;
        Ok(if width == 4 {
            f32::from_le_bytes(b.try_into().expect("4 bytes")) as f64
        } else {
            f64::from_le_bytes(b.try_into().expect("8 bytes"))
        })
    };

    let mut model = SrResNet::<T>::build(&header.config, header.seed)?;
    let entries: HashMap<(&str, &str), &TensorEntry> = header
        .tensors
        .iter()
        .map(|e| ((e.name.as_str(), e.kind.as_str()), e))
        .collect();
    let fill = |name: &str, kind: &str, shape: &[usize], target: &mut [T]| -> Result<()> {
        let e = entries
            .get(&(name, kind))
            .ok_or_else(|| bad(format!("missing tensor {name}")))?;
        if e.shape != shape || e.len != target.len() {
            return Err(bad(format!("tensor {name} has shape {:?}, expected {shape:?}", e.shape)));
        }
        for (i, t) in target.iter_mut().enumerate() {
            *t = T::lit(element(e.offset + i)?);
        }
        Ok(())
    };
    for (name, p) in model.named_params_mut() {
        fill(&name, "param", &p.shape, &mut p.value)?;
    }
    for (name, b) in model.named_buffers_mut() {
        fill(&name, "buffer", &b.shape, &mut b.value)?;
    }
    Ok((model, header))
}

/// Writes to a sibling temp file, then renames into place.
pub fn save_checkpoint<T: Scalar>(model: &SrResNet<T>, iteration: u64, path: impl AsRef<Path>) -> Result<()> {
    crate::atomic::write_with(path.as_ref(), |tmp| {
        let file = fs::File::create(tmp).map_err(|e| Error::io(tmp, e))?;
        let mut w = std::io::BufWriter::new(file);
        write_checkpoint(model, iteration, &mut w)?;
        w.flush().map_err(|e| Error::io(tmp, e))
    })
}

pub fn load_checkpoint<T: Scalar>(path: impl AsRef<Path>) -> Result<(SrResNet<T>, CheckpointHeader)> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_checkpoint(std::io::BufReader::new(file))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Tensor;

    fn cfg() -> SrResNetConfig {
        SrResNetConfig {
            in_channels: 1,
            feature_channels: 4,
            num_residual_blocks: 2,
            upscale_factor: 4,
            head_kernel: 9,
            body_kernel: 3,
        }
    }

    #[test]
    fn round_trip_is_bitwise() {
        let mut m = SrResNet::<f32>::build(&cfg(), 11).unwrap();
        m.post_bn.running_mean.value[1] = 0.123;
        m.blocks[1].bn2.running_var.value[3] = 7.5;
        let mut buf = Vec::new();
        write_checkpoint(&m, 77, &mut buf).unwrap();
        let (back, header) = read_checkpoint::<f32, _>(buf.as_slice()).unwrap();
        assert_eq!(header.iteration, 77);
        assert_eq!(header.dtype, "f32");
        assert_eq!(header.config, cfg());
        let x = Tensor::from_vec([1, 1, 3, 3], (0..9).map(|v| v as f32 / 9.0).collect()).unwrap();
        let a: Vec<u32> = m.forward(&x).unwrap().data().iter().map(|v| v.to_bits()).collect();
        let b: Vec<u32> = back.forward(&x).unwrap().data().iter().map(|v| v.to_bits()).collect();
        assert_eq!(a, b);
        assert_eq!(back.post_bn.running_mean.value[1], 0.123);
    }

    #[test]
    fn corrupt_inputs_rejected() {
        assert!(read_checkpoint::<f32, _>(&b"nope"[..]).is_err());
        let m = SrResNet::<f64>::build(&cfg(), 1).unwrap();
        let mut buf = Vec::new();
        write_checkpoint(&m, 0, &mut buf).unwrap();
        buf.truncate(buf.len() - 5);
        assert!(read_checkpoint::<f64, _>(buf.as_slice()).is_err());
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        let m = SrResNet::<f32>::build(&cfg(), 5).unwrap();
        save_checkpoint(&m, 3, &path).unwrap();
        let (back, _) = load_checkpoint::<f32>(&path).unwrap();
        assert_eq!(back.tail.weight.value, m.tail.weight.value);
        assert!(!path.with_extension("tmp").exists());
    }
}
