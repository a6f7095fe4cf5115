use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MatchResult {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    /// `(predicted, true)` times of every hit.
    pub pairs: Vec<(f64, f64)>,
}

impl MatchResult {
    /// Signed `predicted − true` of every hit, in seconds.
    pub fn timing_errors(&self) -> Vec<f64> {
        self.pairs.iter().map(|(p, t)| p - t).collect()
    }
}

fn check_sorted(xs: &[f64], what: &str) -> Result<()> {
    if xs.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid(format!("{what} contain non-finite times")));
    }
    if xs.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::invalid(format!("{what} must be sorted ascending")));
    }
    Ok(())
}

/// One-to-one matching of predictions to true events within `tolerance_s`.
///
/// Walks the true events in order and gives each the earliest unused
/// prediction inside its window. Because every window has the same width,
/// this attains the maximum number of matches.
pub fn match_events(pred: &[f64], truth: &[f64], tolerance_s: f64) -> Result<MatchResult> {
    check_sorted(pred, "predictions")?;
    check_sorted(truth, "true events")?;
    let mut pairs = Vec::new();
    let mut p = 0;
    for &t in truth {
        while p < pred.len() && pred[p] < t - tolerance_s {
            p += 1;
        }
        if p < pred.len() && pred[p] <= t + tolerance_s {
            pairs.push((pred[p], t));
            p += 1;
        }
    }
    let tp = pairs.len();
    Ok(MatchResult { tp, fp: pred.len() - tp, fn_: truth.len() - tp, pairs })
}

/// Size of the largest one-to-one matching, by exhaustive search. Intended
/// as a reference for small inputs only.
pub fn max_matching_exhaustive(pred: &[f64], truth: &[f64], tolerance_s: f64) -> usize {
    fn go(ti: usize, used: &mut Vec<bool>, pred: &[f64], truth: &[f64], tol: f64) -> usize {
        if ti == truth.len() {
            return 0;
        }
        let mut best = go(ti + 1, used, pred, truth, tol);
        for pi in 0..pred.len() {
            if !used[pi] && (pred[pi] - truth[ti]).abs() <= tol {
                used[pi] = true;
                best = best.max(1 + go(ti + 1, used, pred, truth, tol));
                used[pi] = false;
            }
        }
        best
    }
    go(0, &mut vec![false; pred.len()], pred, truth, tolerance_s)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectScore {
    pub subject: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Every predicted time, matched or not. Filled in by callers that know
    /// the predictions; empty otherwise.
    #[serde(default)]
    pub detected_times: Vec<f64>,
    #[serde(flatten)]
    pub matches: MatchResult,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Precision, recall and F1 of a match. With no predictions and no events
/// all three are 1; any other empty denominator gives 0.
pub fn score(subject: &str, m: MatchResult) -> SubjectScore {
    let (precision, recall, f1) = if m.tp + m.fp + m.fn_ == 0 {
        (1.0, 1.0, 1.0)
    } else {
        (ratio(m.tp, m.tp + m.fp), ratio(m.tp, m.tp + m.fn_), ratio(2 * m.tp, 2 * m.tp + m.fp + m.fn_))
    };
    SubjectScore { subject: subject.to_string(), precision, recall, f1, detected_times: Vec::new(), matches: m }
}
