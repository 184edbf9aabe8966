//! `TSQM` model files: architecture plus float32 parameters, little-endian.
//!
//! ```text
//! "TSQM" u32 version u64 run_hash u64 dataset_hash
//! u32 H u32 W u32 C u32 n_classes
//! u32 n_layers { u8 tag u32 a u32 b }*
//! u32 n_tensors { u32 ndims u32 dims* f32 values* }*
//! ```

use std::path::Path;

use super::model::{Activation, LayerSpec, Model, ModelSpec};
use super::tensor::Tensor;
use crate::error::{Error, IoContext, Result};

pub const MODEL_MAGIC: &[u8; 4] = b"TSQM";
pub const MODEL_VERSION: u32 = 1;

/// A trained model together with the hashes of the run configuration and
/// dataset that produced it.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelFile {
    pub run_hash: u64,
    pub dataset_hash: u64,
    pub model: Model<f32>,
}

fn bad(reason: impl Into<String>) -> Error {
    Error::Format { kind: "TSQM", reason: reason.into() }
}

fn layer_code(layer: &LayerSpec) -> (u8, u32, u32) {
    match layer {
        LayerSpec::Conv2D { out_channels, kernel } => (1, *out_channels as u32, *kernel as u32),
        LayerSpec::MaxPool2 => (2, 0, 0),
        LayerSpec::Dropout { rate } => (3, rate.to_bits(), 0),
        LayerSpec::Flatten => (4, 0, 0),
        LayerSpec::Dense { units, activation } => (5, *units as u32, (*activation == Activation::Relu) as u32),
    }
}

fn layer_from_code(tag: u8, a: u32, b: u32) -> Result<LayerSpec> {
    Ok(match tag {
        1 => LayerSpec::Conv2D { out_channels: a as usize, kernel: b as usize },
        2 => LayerSpec::MaxPool2,
        3 => LayerSpec::Dropout { rate: f32::from_bits(a) },
        4 => LayerSpec::Flatten,
        5 => LayerSpec::Dense {
            units: a as usize,
            activation: match b {
                0 => Activation::None,
                1 => Activation::Relu,
                _ => return Err(bad(format!("unknown activation code {b}"))),
            },
        },
        _ => return Err(bad(format!("unknown layer tag {tag}"))),
    })
}

impl ModelFile {
    pub fn to_bytes(&self) -> Vec<u8> {
        let spec = &self.model.spec;
        let mut out = Vec::with_capacity(64 + 4 * self.model.n_parameters());
        out.extend_from_slice(MODEL_MAGIC);
        out.extend_from_slice(&MODEL_VERSION.to_le_bytes());
        out.extend_from_slice(&self.run_hash.to_le_bytes());
        out.extend_from_slice(&self.dataset_hash.to_le_bytes());
        for d in spec.input.iter().chain([&spec.n_classes]) {
            out.extend_from_slice(&(*d as u32).to_le_bytes());
        }
        out.extend_from_slice(&(spec.layers.len() as u32).to_le_bytes());
        for l in &spec.layers {
            let (tag, a, b) = layer_code(l);
            out.push(tag);
            out.extend_from_slice(&a.to_le_bytes());
            out.extend_from_slice(&b.to_le_bytes());
        }
        out.extend_from_slice(&(self.model.params.len() as u32).to_le_bytes());
        for t in &self.model.params {
            out.extend_from_slice(&(t.shape().len() as u32).to_le_bytes());
            for &d in t.shape() {
                out.extend_from_slice(&(d as u32).to_le_bytes());
            }
            for v in t.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != MODEL_MAGIC {
            return Err(bad("bad magic"));
        }
        let version = r.u32()?;
        if version != MODEL_VERSION {
            return Err(bad(format!("unsupported version {version}")));
        }
        let run_hash = r.u64()?;
        let dataset_hash = r.u64()?;
        let input = [r.u32()? as usize, r.u32()? as usize, r.u32()? as usize];
        let n_classes = r.u32()? as usize;
        let n_layers = r.u32()? as usize;
        if n_layers > 1024 {
            return Err(bad(format!("implausible layer count {n_layers}")));
        }
        let mut layers = Vec::with_capacity(n_layers);
        for _ in 0..n_layers {
            let tag = r.take(1)?[0];
            let (a, b) = (r.u32()?, r.u32()?);
            layers.push(layer_from_code(tag, a, b)?);
        }
        let spec = ModelSpec { input, layers, n_classes };
        let want = spec.param_shapes().map_err(|e| bad(format!("architecture: {e}")))?;
        let n_tensors = r.u32()? as usize;
        if n_tensors != want.len() {
            return Err(bad(format!("{n_tensors} tensors, architecture needs {}", want.len())));
        }
        let mut params = Vec::with_capacity(n_tensors);
        for shape in want {
            let ndims = r.u32()? as usize;
            if ndims != shape.len() {
                return Err(bad(format!("tensor rank {ndims}, expected {}", shape.len())));
            }
            for &d in &shape {
                if r.u32()? as usize != d {
                    return Err(bad(format!("tensor shape differs from {shape:?}")));
                }
            }
            let len: usize = shape.iter().product();
            let raw = r.take(len * 4)?;
            let data = raw
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
                .collect();
            params.push(Tensor::new(shape, data)?);
        }
        if r.pos != bytes.len() {
            return Err(bad(format!("{} trailing bytes", bytes.len() - r.pos)));
        }
        Ok(ModelFile { run_hash, dataset_hash, model: Model::from_params(spec, params)? })
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| bad("truncated"))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

/// Writes through a `.partial` sibling and renames into place.
pub fn save_model(path: &Path, file: &ModelFile) -> Result<()> {
    let tmp = crate::quanv::partial_path(path);
    std::fs::write(&tmp, file.to_bytes()).at(&tmp)?;
    std::fs::rename(&tmp, path).at(path)
}

pub fn load_model(path: &Path) -> Result<ModelFile> {
    let bytes = std::fs::read(path).at(path)?;
    ModelFile::from_bytes(&bytes)
}
