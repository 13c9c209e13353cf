//! Binary model files.
//!
//! ```text
//! "DMWM"  u32 version  u32 n_arch  n_arch x u32  u32 n_tensors
//! per tensor: u32 len, len x f32
//! ```
//!
//! All integers and floats are little-endian. Tensors follow the declaration
//! order of [`Weights`]. A JSON sidecar (`<path>.json`) repeats the
//! architecture and records training provenance.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{Architecture, Provenance, Weights, WorldModel};
use crate::error::FormatError;

pub const MODEL_MAGIC: &[u8; 4] = b"DMWM";
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub format: String,
    pub version: u32,
    pub architecture: Architecture,
    pub n_params: usize,
    pub provenance: Provenance,
}

fn arch_fields(a: &Architecture) -> Vec<u32> {
    let mut v = vec![a.grid_h, a.grid_w, a.in_channels];
    v.extend(a.enc_channels);
    v.extend([a.fc_width, a.latent_dim]);
    v.extend(a.dec_channels);
    v.extend([a.action_embed, a.hidden_dim]);
    v.into_iter().map(|x| x as u32).collect()
}

fn arch_from_fields(f: &[u32]) -> Result<Architecture, FormatError> {
    if f.len() != 13 {
        return Err(FormatError::Model(format!("architecture has {} fields, expected 13", f.len())));
    }
    if f.iter().any(|&x| x == 0) {
        return Err(FormatError::Model("architecture field is zero".into()));
    }
    let u = |i: usize| f[i] as usize;
    Ok(Architecture {
        grid_h: u(0),
        grid_w: u(1),
        in_channels: u(2),
        enc_channels: [u(3), u(4), u(5), u(6)],
        fc_width: u(7),
        latent_dim: u(8),
        dec_channels: [u(9), u(10)],
        action_embed: u(11),
        hidden_dim: u(12),
    })
}

pub fn model_to_bytes(model: &WorldModel) -> Vec<u8> {
    let tensors = model.weights.tensors();
    let mut out = Vec::with_capacity(64 + 4 * model.weights.n_params() + 4 * tensors.len());
    out.extend_from_slice(MODEL_MAGIC);
    out.extend_from_slice(&MODEL_VERSION.to_le_bytes());
    let fields = arch_fields(&model.arch);
    out.extend_from_slice(&(fields.len() as u32).to_le_bytes());
    for f in fields {
        out.extend_from_slice(&f.to_le_bytes());
    }
    out.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
    for t in tensors {
        out.extend_from_slice(&(t.len() as u32).to_le_bytes());
        for &v in t {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8], FormatError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| FormatError::Model(format!("truncated at byte {}", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, FormatError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
}

/// Parses a model file. Weights are widened from `f32`; provenance is left empty.
pub fn model_from_bytes(bytes: &[u8]) -> Result<WorldModel, FormatError> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4)? != MODEL_MAGIC {
        return Err(FormatError::Model("bad magic".into()));
    }
    let version = r.u32()?;
    if version != MODEL_VERSION {
        return Err(FormatError::Model(format!("unsupported version {version}")));
    }
    let n_fields = r.u32()? as usize;
    if n_fields > 64 {
        return Err(FormatError::Model(format!("implausible architecture length {n_fields}")));
    }
    let fields = (0..n_fields).map(|_| r.u32()).collect::<Result<Vec<_>, _>>()?;
    let arch = arch_from_fields(&fields)?;
    let mut weights = Weights::zeros(&arch);
    let n_tensors = r.u32()? as usize;
    let mut slots = weights.tensors_mut();
    if n_tensors != slots.len() {
        return Err(FormatError::Model(format!("{n_tensors} tensors, expected {}", slots.len())));
    }
    for (i, slot) in slots.iter_mut().enumerate() {
        let len = r.u32()? as usize;
        if len != slot.len() {
            return Err(FormatError::Model(format!("tensor {i} has {len} values, expected {}", slot.len())));
        }
        let raw = r.take(4 * len)?;
        for (dst, chunk) in slot.iter_mut().zip(raw.chunks_exact(4)) {
            let v = f32::from_le_bytes(chunk.try_into().expect("4 bytes"));
            if !v.is_finite() {
                return Err(FormatError::Model(format!("non-finite weight in tensor {i}")));
            }
            *dst = f64::from(v);
        }
    }
    drop(slots);
    if r.pos != bytes.len() {
        return Err(FormatError::Model(format!("{} trailing bytes", bytes.len() - r.pos)));
    }
    Ok(WorldModel {
        arch,
        weights,
        provenance: Provenance::default(),
    })
}

fn sidecar_path(path: &Path) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(".json");
    PathBuf::from(name)
}

/// Writes the model file and its `<path>.json` sidecar.
pub fn save_model(model: &WorldModel, path: impl AsRef<Path>) -> Result<(), FormatError> {
    let path = path.as_ref();
    fs::write(path, model_to_bytes(model)).map_err(|e| FormatError::io(path, e))?;
    let sidecar = Sidecar {
        format: "DMWM".into(),
        version: MODEL_VERSION,
        architecture: model.arch,
        n_params: model.weights.n_params(),
        provenance: model.provenance.clone(),
    };
    let side = sidecar_path(path);
    let mut json = serde_json::to_string_pretty(&sidecar)?;
    json.push('\n');
    fs::write(&side, json).map_err(|e| FormatError::io(&side, e))
}

/// Reads a model file; provenance comes from the sidecar when one exists,
/// whose architecture must then agree with the binary header.
pub fn load_model(path: impl AsRef<Path>) -> Result<WorldModel, FormatError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| FormatError::io(path, e))?;
    let mut model = model_from_bytes(&bytes)?;
    let side = sidecar_path(path);
    if side.exists() {
        let text = fs::read_to_string(&side).map_err(|e| FormatError::io(&side, e))?;
        let sidecar: Sidecar = serde_json::from_str(&text)?;
        if sidecar.architecture != model.arch {
            return Err(FormatError::Model("sidecar architecture does not match model file".into()));
        }
        model.provenance = sidecar.provenance;
    }
    Ok(model)
}
