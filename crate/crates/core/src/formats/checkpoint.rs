use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::binary::{write_f32s, write_string, LeReader};
use crate::error::{Error, Result};
use crate::model::{ArchitectureConfig, DeepMatchModel, HeadKind, ModelVariant};

const MAGIC: [u8; 4] = *b"DMCK";
pub const CHECKPOINT_VERSION: u16 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub architecture: ArchitectureConfig,
    pub variant: ModelVariant,
    pub head: HeadKind,
    pub seed: u64,
    /// Training history or any other JSON the producer wants to keep.
    #[serde(default)]
    pub history: serde_json::Value,
    /// Free-form provenance such as input content hashes.
    #[serde(default)]
    pub provenance: BTreeMap<String, String>,
}

impl CheckpointHeader {
    pub fn for_model(model: &DeepMatchModel<f32>, seed: u64) -> Self {
        Self {
            architecture: model.arch.clone(),
            variant: model.variant,
            head: model.head_kind,
            seed,
            history: serde_json::Value::Null,
            provenance: BTreeMap::new(),
        }
    }
}

pub fn write_checkpoint<W: Write>(w: &mut W, model: &DeepMatchModel<f32>, header: &CheckpointHeader) -> Result<()> {
    if header.architecture != model.arch || header.variant != model.variant || header.head != model.head_kind {
        return Err(Error::invalid("checkpoint header does not describe the model"));
    }
    w.write_all(&MAGIC)?;
    w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
    write_string(w, &serde_json::to_string(header)?)?;
    let layout = model.param_layout();
    let params = model.params();
    w.write_all(&(params.len() as u32).to_le_bytes())?;
    for ((name, dims), values) in layout.iter().zip(params) {
        write_string(w, name)?;
        w.write_all(&[dims.len() as u8])?;
        for &d in dims {
            w.write_all(&(d as u32).to_le_bytes())?;
        }
        write_f32s(w, values.iter().copied())?;
    }
    Ok(())
}

pub fn read_checkpoint<R: Read>(r: R) -> Result<(DeepMatchModel<f32>, CheckpointHeader)> {
    let mut r = LeReader::new(r);
    r.magic(MAGIC)?;
    r.version(CHECKPOINT_VERSION)?;
    let header: CheckpointHeader = serde_json::from_str(&r.string("header")?)?;
    let base = DeepMatchModel::<f32>::build(&header.architecture, ModelVariant::Standard, None, 0)?;
    let mut model = match header.head {
        HeadKind::Decoder => base,
        HeadKind::Detector => base.attach_detector(0)?,
    };
    model.variant = header.variant;
    let layout = model.param_layout();
    let count = r.u32("tensor count")? as usize;
    if count != layout.len() {
        return Err(Error::Malformed(format!("{count} tensors stored, architecture has {}", layout.len())));
    }
    let mut params = model.params_mut();
    for ((name, expected), slot) in layout.into_iter().zip(params.iter_mut()) {
        let stored = r.string("tensor name")?;
        if stored != name {
            return Err(Error::Malformed(format!("tensor `{stored}` found where `{name}` was expected")));
        }
        let rank = r.u8(&name)? as usize;
        let dims = (0..rank).map(|_| r.u32(&name).map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
        if dims != expected {
            return Err(Error::DimMismatch { name, dims, expected });
        }
        let n: usize = dims.iter().product();
        **slot = r.f32s(n, &name).map_err(|e| match e {
            Error::Truncated(_) => Error::TruncatedTensor(name.clone()),
            other => other,
        })?;
    }
    r.expect_end()?;
    Ok((model, header))
}

pub fn save_checkpoint(path: &Path, model: &DeepMatchModel<f32>, header: &CheckpointHeader) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_checkpoint(&mut w, model, header)?;
    w.flush()?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<(DeepMatchModel<f32>, CheckpointHeader)> {
    read_checkpoint(BufReader::new(File::open(path)?))
}
