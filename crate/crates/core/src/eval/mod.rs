//! Peak picking, tolerance matching, scoring and leave-one-subject-out runs.

mod matching;
mod peaks;
mod pipeline;

pub use matching::{match_events, max_matching_exhaustive, score, MatchResult, SubjectScore};
pub use peaks::{find_peaks, PeakParams};
pub use pipeline::{
    build_template, evaluate_subject, loo_run, preprocess, score_trace, subject_average,
    train_variant, FoldRecord, LooReport, PipelineConfig, PreprocessConfig, SubjectAverage,
    TemplateConfig, VariantFold, VariantSummary,
};
