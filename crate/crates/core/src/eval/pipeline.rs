use log::{info, warn};
use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::matching::{match_events, score, SubjectScore};
use super::peaks::{find_peaks, PeakParams};
use crate::error::{Error, Result};
use crate::model::{
    finetune, infer, make_detection_dataset, pretrain, pretrain_inputs, ArchitectureConfig,
    DeepMatchModel, DetectionConfig, DetectionTrace, ModelVariant, SubjectRecording, TrainHistory,
    TrainingConfig,
};
use crate::template::{
    average_epochs, grand_average, smooth, to_kernels, ErpTemplate, KernelLayout,
    DEFAULT_TEMPLATE_CHANNELS,
};
use crate::timeseries::{
    bandpass, baseline_correct, extract_epochs, reject_artifacts, rereference, resample,
    standardize, window, EventList, Recording, RejectionParams,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreprocessConfig {
    pub target_fs: f64,
    /// `[lo, hi]` in Hz; `None` skips filtering.
    pub bandpass_hz: Option<[f64; 2]>,
    /// Channels whose mean is subtracted; empty skips re-referencing.
    pub reference: Vec<String>,
    /// Channels kept, in order, after re-referencing.
    pub channels: Vec<String>,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            target_fs: 250.0,
            bandpass_hz: Some([1.0, 40.0]),
            reference: Vec::new(),
            channels: DEFAULT_TEMPLATE_CHANNELS.iter().map(|s| s.to_string()).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TemplateConfig {
    pub epoch_start_s: f64,
    pub epoch_end_s: f64,
    pub rejection: RejectionParams,
    /// Odd moving-mean width in samples; 1 disables smoothing.
    pub smoothing_window: usize,
    pub layout: KernelLayout,
}

impl Default for TemplateConfig {
    fn default() -> Self {
        Self {
            epoch_start_s: -0.2,
            epoch_end_s: 1.0,
            rejection: RejectionParams::default(),
            smoothing_window: 13,
            layout: KernelLayout::Depthwise,
        }
    }
}

/// Everything a leave-one-subject-out run depends on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub preprocess: PreprocessConfig,
    pub template: TemplateConfig,
    pub architecture: ArchitectureConfig,
    /// Overlap of the reconstruction-stage windows.
    pub pretrain_overlap: f64,
    pub detection: DetectionConfig,
    pub training: TrainingConfig,
    pub inference_hop_s: f64,
    pub peaks: PeakParams,
    pub variants: Vec<ModelVariant>,
    /// Build each fold's template from every subject, held-out one included.
    pub paper_faithful: bool,
    /// Seeds model initialization, dataset sampling and training order.
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            preprocess: PreprocessConfig::default(),
            template: TemplateConfig::default(),
            architecture: ArchitectureConfig::default(),
            pretrain_overlap: 0.5,
            detection: DetectionConfig::default(),
            training: TrainingConfig::default(),
            inference_hop_s: 0.5,
            peaks: PeakParams::default(),
            variants: vec![ModelVariant::DeepMf, ModelVariant::Standard],
            paper_faithful: false,
            seed: 0,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.architecture.validate()?;
        self.detection.validate()?;
        self.training.validate()?;
        self.peaks.validate()?;
        if self.variants.is_empty() {
            return Err(Error::invalid("no model variants selected"));
        }
        if !(0.0..1.0).contains(&self.pretrain_overlap) || !(self.inference_hop_s > 0.0) {
            return Err(Error::invalid("pretrain overlap must lie in [0, 1) and the inference hop be positive"));
        }
        if self.preprocess.channels.len() != self.architecture.input_channels {
            return Err(Error::invalid(format!(
                "{} channels selected but the model takes {}",
                self.preprocess.channels.len(),
                self.architecture.input_channels
            )));
        }
        let win = (self.detection.window_s * self.preprocess.target_fs).round() as usize;
        if win != self.architecture.window_len_samples || self.detection.output_len() != self.architecture.output_len {
            return Err(Error::invalid("detection window and model input/output lengths disagree"));
        }
        Ok(())
    }

    fn training(&self) -> TrainingConfig {
        TrainingConfig { seed: self.seed, ..self.training.clone() }
    }

    fn detection(&self) -> DetectionConfig {
        DetectionConfig { seed: self.seed, ..self.detection.clone() }
    }
}

/// Resample, band-pass, re-reference, then keep the configured channels.
pub fn preprocess(rec: &Recording, cfg: &PreprocessConfig) -> Result<Recording> {
    let mut out = resample(rec, cfg.target_fs)?;
    if let Some([lo, hi]) = cfg.bandpass_hz {
        out = bandpass(&out, lo, hi)?;
    }
    if !cfg.reference.is_empty() {
        out = rereference(&out, &cfg.reference)?;
    }
    out.select_channels(&cfg.channels)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectAverage {
    pub subject: String,
    pub n_epochs: usize,
    pub n_rejected: usize,
    pub n_skipped: usize,
    #[serde(skip)]
    pub waveforms: Array2<f64>,
}

/// Epochs, baseline-corrects, rejects artifacts and averages one subject.
pub fn subject_average(subject: &str, rec: &Recording, events: &EventList, cfg: &TemplateConfig) -> Result<SubjectAverage> {
    let ex = extract_epochs(rec, events, cfg.epoch_start_s, cfg.epoch_end_s)?;
    let corrected = ex.epochs.iter().map(baseline_correct).collect::<Result<Vec<_>>>()?;
    let flagged = reject_artifacts(&corrected, &cfg.rejection)?;
    let n_rejected = flagged.iter().filter(|e| e.rejected).count();
    Ok(SubjectAverage {
        subject: subject.to_string(),
        n_epochs: flagged.len(),
        n_rejected,
        n_skipped: ex.skipped.len(),
        waveforms: average_epochs(&flagged)?,
    })
}

/// Grand average of the given subject averages, smoothed.
pub fn build_template(averages: &[&SubjectAverage], fs: f64, channels: &[String], cfg: &TemplateConfig) -> Result<ErpTemplate> {
    let waves: Vec<Array2<f64>> = averages.iter().map(|a| a.waveforms.clone()).collect();
    let t = grand_average(&waves, fs, channels.to_vec(), cfg.epoch_start_s)?;
    if cfg.smoothing_window > 1 {
        smooth(&t, cfg.smoothing_window)
    } else {
        Ok(t)
    }
}

/// Builds, pretrains and fine-tunes one variant on the training subjects,
/// whose recordings must already be standardized.
pub fn train_variant(
    variant: ModelVariant,
    template: Option<&ErpTemplate>,
    train: &[SubjectRecording],
    cfg: &PipelineConfig,
) -> Result<(DeepMatchModel<f32>, TrainHistory, TrainHistory)> {
    let kernels = match (variant, template) {
        (ModelVariant::DeepMf, Some(t)) => Some(to_kernels(t, cfg.template.layout)?),
        (ModelVariant::DeepMf, None) => return Err(Error::invalid("DeepMF training needs a template")),
        (ModelVariant::Standard, _) => None,
    };
    let model = DeepMatchModel::<f32>::build(&cfg.architecture, variant, kernels.as_ref(), cfg.seed)?;
    let sets = train
        .iter()
        .map(|s| window(&s.recording, cfg.detection.window_s, cfg.pretrain_overlap))
        .collect::<Result<Vec<_>>>()?;
    let training = cfg.training();
    let (model, pre) = pretrain(model, &pretrain_inputs(&sets), &training)?;
    let dataset = make_detection_dataset(train, &cfg.detection())?;
    let (model, fine) = finetune(model.attach_detector(cfg.seed)?, &dataset, &training)?;
    Ok((model, pre, fine))
}

/// Scores a standardized recording: trace, peaks, then matching.
pub fn evaluate_subject<T: crate::nn::Scalar>(
    model: &DeepMatchModel<T>,
    subject: &SubjectRecording,
    cfg: &PipelineConfig,
) -> Result<(SubjectScore, DetectionTrace)> {
    let trace = infer(model, &subject.recording, cfg.inference_hop_s)?;
    let score = score_trace(&subject.subject, &trace, &subject.events, &cfg.peaks)?;
    Ok((score, trace))
}

pub fn score_trace(subject: &str, trace: &DetectionTrace, events: &EventList, peaks: &PeakParams) -> Result<SubjectScore> {
    let pred: Vec<f64> = find_peaks(&trace.scores, peaks.min_height, peaks.min_distance_samples)
        .into_iter()
        .map(|i| trace.time_of(i))
        .collect();
    let mut s = score(subject, match_events(&pred, &events.times(), peaks.tolerance_s)?);
    s.detected_times = pred;
    Ok(s)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantFold {
    pub variant: ModelVariant,
    pub pretrain: TrainHistory,
    pub finetune: TrainHistory,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldRecord {
    pub held_out: String,
    /// Subjects whose epochs entered this fold's template.
    pub template_subjects: Vec<String>,
    pub variants: Vec<VariantFold>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantSummary {
    pub variant: ModelVariant,
    pub subjects: Vec<SubjectScore>,
    pub mean_f1: f64,
    pub best_f1: f64,
    pub worst_f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LooReport {
    pub config: PipelineConfig,
    pub subjects: Vec<String>,
    pub epoch_counts: Vec<SubjectAverage>,
    pub results: Vec<VariantSummary>,
    pub folds: Vec<FoldRecord>,
    /// Set when at least one fold failed; summaries then cover the rest.
    pub incomplete: bool,
}

impl LooReport {
    pub fn summary(&self, variant: ModelVariant) -> Option<&VariantSummary> {
        self.results.iter().find(|r| r.variant == variant)
    }
}

fn summarize(variant: ModelVariant, subjects: Vec<SubjectScore>) -> VariantSummary {
    let f1: Vec<f64> = subjects.iter().map(|s| s.f1).collect();
    let n = f1.len().max(1) as f64;
    VariantSummary {
        variant,
        mean_f1: f1.iter().sum::<f64>() / n,
        best_f1: f1.iter().copied().fold(f64::NAN, f64::max),
        worst_f1: f1.iter().copied().fold(f64::NAN, f64::min),
        subjects,
    }
}

/// Leave-one-subject-out evaluation of every configured variant.
///
/// Each fold rebuilds the template from the training subjects only (all
/// subjects with `paper_faithful`), trains every variant from the same seed,
/// and scores the held-out subject. A failing fold is recorded and skipped.
pub fn loo_run(subjects: &[SubjectRecording], cfg: &PipelineConfig) -> Result<LooReport> {
    cfg.validate()?;
    if subjects.len() < 2 {
        return Err(Error::invalid("leave-one-out needs at least two subjects"));
    }
    let pre: Vec<SubjectRecording> = subjects
        .iter()
        .map(|s| {
            let recording = preprocess(&s.recording, &cfg.preprocess)?;
            s.events.check_within(recording.duration_s())?;
            Ok(SubjectRecording { subject: s.subject.clone(), recording, events: s.events.clone() })
        })
        .collect::<Result<_>>()?;
    let averages: Vec<SubjectAverage> = pre
        .iter()
        .map(|s| subject_average(&s.subject, &s.recording, &s.events, &cfg.template))
        .collect::<Result<_>>()?;
    let standardized: Vec<SubjectRecording> = pre
        .iter()
        .map(|s| {
            Ok(SubjectRecording {
                subject: s.subject.clone(),
                recording: standardize(&s.recording)?.0,
                events: s.events.clone(),
            })
        })
        .collect::<Result<_>>()?;
    let fs = cfg.preprocess.target_fs;

    let mut scores: Vec<Vec<SubjectScore>> = vec![Vec::new(); cfg.variants.len()];
    let mut folds = Vec::with_capacity(subjects.len());
    for (k, held) in standardized.iter().enumerate() {
        info!("fold {}/{}: holding out {}", k + 1, subjects.len(), held.subject);
        let template_from: Vec<&SubjectAverage> = averages
            .iter()
            .enumerate()
            .filter(|&(i, _)| cfg.paper_faithful || i != k)
            .map(|(_, a)| a)
            .collect();
        let mut record = FoldRecord {
            held_out: held.subject.clone(),
            template_subjects: template_from.iter().map(|a| a.subject.clone()).collect(),
            variants: Vec::new(),
            error: None,
        };
        let train: Vec<SubjectRecording> =
            standardized.iter().enumerate().filter(|&(i, _)| i != k).map(|(_, s)| s.clone()).collect();
        let fold = (|| -> Result<Vec<SubjectScore>> {
            let template = build_template(&template_from, fs, &cfg.preprocess.channels, &cfg.template)?;
            let mut out = Vec::new();
            for &variant in &cfg.variants {
                let (model, pre, fine) = train_variant(variant, Some(&template), &train, cfg)?;
                record.variants.push(VariantFold { variant, pretrain: pre, finetune: fine });
                let (s, _) = evaluate_subject(&model, held, cfg)?;
                info!("  {}: F1 {:.3} (tp {}, fp {}, fn {})", variant.as_str(), s.f1, s.matches.tp, s.matches.fp, s.matches.fn_);
                out.push(s);
            }
            Ok(out)
        })();
        match fold {
            Ok(fold_scores) => {
                for (acc, s) in scores.iter_mut().zip(fold_scores) {
                    acc.push(s);
                }
            }
            Err(e) => {
                warn!("fold {} failed: {e}", held.subject);
                record.error = Some(e.to_string());
            }
        }
        folds.push(record);
    }
    let incomplete = folds.iter().any(|f| f.error.is_some());
    Ok(LooReport {
        config: cfg.clone(),
        subjects: subjects.iter().map(|s| s.subject.clone()).collect(),
        epoch_counts: averages,
        results: cfg.variants.iter().zip(scores).map(|(&v, s)| summarize(v, s)).collect(),
        folds,
        incomplete,
    })
}
