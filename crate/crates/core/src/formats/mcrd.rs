use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::binary::{write_f32s, write_string, LeReader};
use crate::error::{Error, Result};
use crate::template::ErpTemplate;
use crate::timeseries::Recording;

const MAGIC: [u8; 4] = *b"MCRD";
pub const RECORDING_VERSION: u16 = 1;

/// Samples are stored as `f32`; values outside its precision are rounded.
pub fn write_recording<W: Write>(w: &mut W, rec: &Recording) -> Result<()> {
    w.write_all(&MAGIC)?;
    w.write_all(&RECORDING_VERSION.to_le_bytes())?;
    w.write_all(&rec.fs().to_le_bytes())?;
    w.write_all(&(rec.n_channels() as u32).to_le_bytes())?;
    w.write_all(&(rec.n_samples() as u64).to_le_bytes())?;
    for name in rec.channels() {
        write_string(w, name)?;
    }
    write_f32s(w, rec.data().iter().map(|&v| v as f32))
}

pub fn read_recording<R: Read>(r: R) -> Result<Recording> {
    let mut r = LeReader::new(r);
    r.magic(MAGIC)?;
    r.version(RECORDING_VERSION)?;
    let fs = r.f64("sampling rate")?;
    let n_ch = r.u32("channel count")? as usize;
    let n = usize::try_from(r.u64("sample count")?)
        .map_err(|_| Error::Malformed("sample count exceeds address space".into()))?;
    let channels = (0..n_ch).map(|i| r.string(&format!("channel name {i}"))).collect::<Result<Vec<_>>>()?;
    let total = n_ch.checked_mul(n).ok_or_else(|| Error::Malformed("sample count overflows".into()))?;
    let values = r.f32s(total, "samples")?;
    r.expect_end()?;
    let data = Array2::from_shape_vec((n_ch, n), values.into_iter().map(f64::from).collect())
        .expect("length checked");
    Recording::new(fs, channels, data)
}

pub fn save_recording(path: &Path, rec: &Recording) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_recording(&mut w, rec)?;
    w.flush()?;
    Ok(())
}

pub fn load_recording(path: &Path) -> Result<Recording> {
    read_recording(BufReader::new(File::open(path)?))
}

/// Metadata stored next to a template's `MCRD` file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TemplateSidecar {
    pub n_subjects_averaged: usize,
    pub smoothing_window: usize,
    /// `[start, end]` of the epoch window relative to the event, in seconds.
    pub epoch_window: [f64; 2],
    #[serde(default)]
    pub subjects: Vec<String>,
}

fn sidecar_path(path: &Path) -> std::path::PathBuf {
    path.with_extension("json")
}

/// Writes `path` (waveforms as `MCRD`) and `path` with a `.json` extension.
pub fn save_template(path: &Path, template: &ErpTemplate, sidecar: &TemplateSidecar) -> Result<()> {
    let rec = Recording::new(template.fs, template.channels.clone(), template.waveforms.clone())?;
    save_recording(path, &rec)?;
    std::fs::write(sidecar_path(path), serde_json::to_vec_pretty(sidecar)?)?;
    Ok(())
}

pub fn load_template(path: &Path) -> Result<(ErpTemplate, TemplateSidecar)> {
    let rec = load_recording(path)?;
    let sidecar: TemplateSidecar = serde_json::from_slice(&std::fs::read(sidecar_path(path))?)?;
    let template = ErpTemplate {
        fs: rec.fs(),
        channels: rec.channels().to_vec(),
        n_subjects_averaged: sidecar.n_subjects_averaged,
        t_start: sidecar.epoch_window[0],
        waveforms: rec.into_data(),
    };
    Ok((template, sidecar))
}
