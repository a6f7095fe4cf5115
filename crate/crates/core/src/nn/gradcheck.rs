use rand::seq::index::sample;
use serde::Serialize;

use super::init::layer_rng;
use crate::error::Result;

/// A scalar function of parameter blocks with an analytic gradient.
pub trait Objective {
    fn param_blocks(&mut self) -> Vec<&mut Vec<f64>>;
    fn loss(&self) -> Result<f64>;
    fn gradients(&self) -> Result<Vec<Vec<f64>>>;
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub checked: usize,
    pub total_params: usize,
    /// `(block, index, analytic, numeric)` of the worst coordinate.
    pub worst: Option<(usize, usize, f64, f64)>,
}

/// Denominator floor of the relative error, so coordinates with vanishing
/// gradient are compared on an absolute scale.
const REL_FLOOR: f64 = 1e-6;

pub(crate) fn rel_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

/// Compares analytic gradients with central differences of step `h`.
///
/// With `max_coords` set, that many coordinates are drawn uniformly (seeded)
/// from all parameters; otherwise every coordinate is checked.
pub fn grad_check<O: Objective>(
    obj: &mut O,
    h: f64,
    max_coords: Option<usize>,
    seed: u64,
) -> Result<GradCheckReport> {
    let analytic = obj.gradients()?;
    let sizes: Vec<usize> = analytic.iter().map(Vec::len).collect();
    let total: usize = sizes.iter().sum();
    let coords: Vec<usize> = match max_coords {
        Some(k) if k < total => {
            let mut idx = sample(&mut layer_rng(seed, 0xC0FFEE), total, k).into_vec();
            idx.sort_unstable();
            idx
        }
        _ => (0..total).collect(),
    };
    let mut report = GradCheckReport { max_rel_error: 0.0, checked: 0, total_params: total, worst: None };
    for flat in coords {
        let (mut block, mut idx) = (0, flat);
        while idx >= sizes[block] {
            idx -= sizes[block];
            block += 1;
        }
        let orig = obj.param_blocks()[block][idx];
        obj.param_blocks()[block][idx] = orig + h;
        let plus = obj.loss()?;
        obj.param_blocks()[block][idx] = orig - h;
        let minus = obj.loss()?;
        obj.param_blocks()[block][idx] = orig;
        let numeric = (plus - minus) / (2.0 * h);
        let a = analytic[block][idx];
        let err = rel_error(a, numeric);
        report.checked += 1;
        if err > report.max_rel_error || report.worst.is_none() {
            report.max_rel_error = report.max_rel_error.max(err);
            report.worst = Some((block, idx, a, numeric));
        }
    }
    Ok(report)
}
