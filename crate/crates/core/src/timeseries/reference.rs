use ndarray::Axis;

use super::Recording;
use crate::error::{Error, Result};

/// Subtracts the per-sample mean of `ref_channels` from every channel.
pub fn rereference<S: AsRef<str>>(rec: &Recording, ref_channels: &[S]) -> Result<Recording> {
    if ref_channels.is_empty() {
        return Err(Error::invalid("no reference channels given"));
    }
    let idx = ref_channels
        .iter()
        .map(|n| rec.channel_index(n.as_ref()))
        .collect::<Result<Vec<_>>>()?;
    let reference = rec
        .data()
        .select(Axis(0), &idx)
        .mean_axis(Axis(0))
        .expect("at least one reference row");
    let out = rec.data() - &reference.insert_axis(Axis(0));
    rec.with_data(out)
}
