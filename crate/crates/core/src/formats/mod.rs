//! On-disk formats.
//!
//! * `MCRD`: recordings and templates. Magic, `u16` version, `f64` sampling
//!   rate, `u32` channel count, `u64` sample count, `u32`-length-prefixed
//!   UTF-8 channel names, then channel-major `f32` samples. All integers and
//!   floats little-endian.
//! * `DMCK`: model checkpoints. Magic, `u16` version, `u32`-length-prefixed
//!   JSON header, `u32` tensor count, then per tensor a `u32`-length-prefixed
//!   name, `u8` rank, `u32` dims and `f32` values.
//! * CSV: events (`time_s,label`) and recordings (channel header, optional
//!   leading `time_s` column).

mod binary;
mod checkpoint;
mod mcrd;
mod text;

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, CheckpointHeader, CHECKPOINT_VERSION};
pub use mcrd::{
    load_recording, load_template, read_recording, save_recording, save_template, write_recording,
    TemplateSidecar, RECORDING_VERSION,
};
pub use text::{read_events_csv, read_recording_csv, write_events_csv};
