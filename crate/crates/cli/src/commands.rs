use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use deepmatch::eval::{
    build_template, loo_run, preprocess, score_trace, subject_average, SubjectAverage,
};
use deepmatch::formats::{
    load_checkpoint, load_recording, load_template, read_events_csv, read_recording_csv,
    save_checkpoint, save_recording, save_template, write_events_csv, CheckpointHeader,
    TemplateSidecar,
};
use deepmatch::model::{
    check_model_gradients, finetune, infer, make_detection_dataset, pretrain, pretrain_inputs,
    ArchitectureConfig, DeepMatchModel, DetectionTrace, HeadKind, ModelVariant, SubjectRecording,
};
use deepmatch::synth::generate_cohort;
use deepmatch::template::to_kernels;
use deepmatch::timeseries::{standardize, window, EventList, Recording};
use log::info;
use serde_json::json;

use crate::config::RunConfig;
use crate::failure::Failure;
use crate::manifest::{write_json, Manifest};
use crate::Command;

/// Largest relative gradient error `gradcheck` accepts.
const GRADCHECK_LIMIT: f64 = 1e-4;

pub fn run(command: &Command, cfg: &RunConfig) -> anyhow::Result<()> {
    match command {
        Command::Synth { out_dir, subjects } => synth(cfg, out_dir, *subjects),
        Command::Preprocess { input, out, fs } => preprocess_cmd(cfg, input, out, *fs),
        Command::Epoch { input, events, out } => epoch(cfg, input, events, out),
        Command::Template { inputs, out } => template(cfg, inputs, out),
        Command::Pretrain { recordings, template, out } => pretrain_cmd(cfg, recordings, template.as_deref(), out),
        Command::Finetune { checkpoint, recordings, events, out } => {
            finetune_cmd(cfg, checkpoint, recordings, events, out)
        }
        Command::Infer { checkpoint, input, out } => infer_cmd(cfg, checkpoint, input, out),
        Command::Eval { trace, events, out, subject } => eval(cfg, trace, events, out, subject),
        Command::Loo { data_dir, synthetic, out } => loo(cfg, data_dir.as_deref(), *synthetic, out),
        Command::Gradcheck { out, coords } => gradcheck(cfg, out.as_deref(), *coords),
    }
}

fn require(path: &Path) -> anyhow::Result<()> {
    if !path.exists() {
        return Err(Failure::MissingInput(path.display().to_string()).into());
    }
    Ok(())
}

fn read_recording_any(path: &Path, fs: Option<f64>) -> anyhow::Result<Recording> {
    require(path)?;
    let rec = if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
        read_recording_csv(path, fs)
    } else {
        load_recording(path)
    };
    rec.with_context(|| format!("reading {}", path.display()))
}

fn read_events(path: &Path) -> anyhow::Result<EventList> {
    require(path)?;
    read_events_csv(path).with_context(|| format!("reading {}", path.display()))
}

fn stem(path: &Path) -> String {
    let name = path.file_name().unwrap_or_default().to_string_lossy();
    name.split('.').next().unwrap_or_default().to_string()
}

fn synth(cfg: &RunConfig, out_dir: &Path, n: usize) -> anyhow::Result<()> {
    std::fs::create_dir_all(out_dir)?;
    let mut manifest = Manifest::new("synth", cfg);
    for (name, subject) in generate_cohort(&cfg.synth, n)? {
        let rec = out_dir.join(format!("{name}.mcrd"));
        let ev = out_dir.join(format!("{name}.events.csv"));
        let truth = out_dir.join(format!("{name}.truth.json"));
        save_recording(&rec, &subject.recording)?;
        write_events_csv(&ev, &subject.events)?;
        write_json(&truth, &subject.truth)?;
        for p in [&rec, &ev, &truth] {
            manifest.output(p)?;
        }
    }
    manifest.write_for(&out_dir.join("synth"))?;
    Ok(())
}

fn preprocess_cmd(cfg: &RunConfig, input: &Path, out: &Path, fs: Option<f64>) -> anyhow::Result<()> {
    let rec = read_recording_any(input, fs)?;
    let mut manifest = Manifest::new("preprocess", cfg);
    manifest.input(input)?;
    save_recording(out, &preprocess(&rec, &cfg.preprocess)?)?;
    manifest.output(out)?;
    manifest.write_for(out)?;
    Ok(())
}

fn epoch(cfg: &RunConfig, input: &Path, events: &Path, out: &Path) -> anyhow::Result<()> {
    let rec = read_recording_any(input, None)?;
    let ev = read_events(events)?;
    let mut manifest = Manifest::new("epoch", cfg);
    manifest.input(input)?;
    manifest.input(events)?;
    let subject = stem(input);
    let avg = subject_average(&subject, &rec, &ev, &cfg.template)?;
    let t = &cfg.template;
    let template = deepmatch::template::ErpTemplate {
        fs: rec.fs(),
        channels: rec.channels().to_vec(),
        waveforms: avg.waveforms.clone(),
        n_subjects_averaged: 1,
        t_start: t.epoch_start_s,
    };
    let sidecar = TemplateSidecar {
        n_subjects_averaged: 1,
        smoothing_window: 1,
        epoch_window: [t.epoch_start_s, t.epoch_end_s],
        subjects: vec![subject],
    };
    save_template(out, &template, &sidecar)?;
    manifest.output(out)?;
    manifest.summary = json!(avg);
    manifest.write_for(out)?;
    Ok(())
}

fn template(cfg: &RunConfig, inputs: &[PathBuf], out: &Path) -> anyhow::Result<()> {
    let mut manifest = Manifest::new("template", cfg);
    let mut averages = Vec::new();
    let mut first: Option<deepmatch::template::ErpTemplate> = None;
    for path in inputs {
        require(path)?;
        let (t, side) = load_template(path).with_context(|| format!("reading {}", path.display()))?;
        manifest.input(path)?;
        averages.push(SubjectAverage {
            subject: side.subjects.first().cloned().unwrap_or_else(|| stem(path)),
            n_epochs: 0,
            n_rejected: 0,
            n_skipped: 0,
            waveforms: t.waveforms.clone(),
        });
        first.get_or_insert(t);
    }
    let first = first.expect("clap requires at least one input");
    let refs: Vec<&SubjectAverage> = averages.iter().collect();
    let t = build_template(&refs, first.fs, &first.channels, &cfg.template)?;
    let sidecar = TemplateSidecar {
        n_subjects_averaged: t.n_subjects_averaged,
        smoothing_window: cfg.template.smoothing_window,
        epoch_window: [cfg.template.epoch_start_s, cfg.template.epoch_end_s],
        subjects: averages.iter().map(|a| a.subject.clone()).collect(),
    };
    save_template(out, &t, &sidecar)?;
    manifest.output(out)?;
    manifest.write_for(out)?;
    Ok(())
}

fn single_variant(cfg: &RunConfig) -> anyhow::Result<ModelVariant> {
    match cfg.run.variants.as_slice() {
        [v] => Ok(*v),
        _ => Err(Failure::Config("select one variant with --variant".into()).into()),
    }
}

fn standardized(path: &Path) -> anyhow::Result<Recording> {
    Ok(standardize(&read_recording_any(path, None)?)?.0)
}

fn pretrain_cmd(cfg: &RunConfig, recordings: &[PathBuf], template: Option<&Path>, out: &Path) -> anyhow::Result<()> {
    let variant = single_variant(cfg)?;
    let pipeline = cfg.pipeline();
    let mut manifest = Manifest::new("pretrain", cfg);
    let kernels = match (variant, template) {
        (ModelVariant::DeepMf, None) => bail!(Failure::Config("the deepmf variant needs --template".into())),
        (ModelVariant::DeepMf, Some(path)) => {
            require(path)?;
            manifest.input(path)?;
            let (t, _) = load_template(path)?;
            Some(to_kernels(&t, cfg.template.layout)?)
        }
        (ModelVariant::Standard, _) => None,
    };
    let mut sets = Vec::new();
    for path in recordings {
        let rec = standardized(path)?;
        manifest.input(path)?;
        sets.push(window(&rec, cfg.detection.window_s, cfg.run.pretrain_overlap)?);
    }
    let model = DeepMatchModel::<f32>::build(&cfg.architecture, variant, kernels.as_ref(), cfg.run.seed)?;
    let training = deepmatch::model::TrainingConfig { seed: cfg.run.seed, ..pipeline.training };
    let (model, history) = pretrain(model, &pretrain_inputs(&sets), &training)?;
    let mut header = CheckpointHeader::for_model(&model, cfg.run.seed);
    header.history = json!({ "pretrain": history });
    header.provenance = manifest.inputs.clone();
    save_checkpoint(out, &model, &header)?;
    manifest.output(out)?;
    manifest.summary = header.history;
    manifest.write_for(out)?;
    Ok(())
}

fn load_model(path: &Path, head: HeadKind) -> anyhow::Result<(DeepMatchModel<f32>, CheckpointHeader)> {
    require(path)?;
    let (model, header) = load_checkpoint(path).with_context(|| format!("reading {}", path.display()))?;
    if model.head_kind != head {
        bail!(Failure::Config(format!(
            "{} holds a {} model, this command needs a {}",
            path.display(),
            model.head_kind.as_str(),
            head.as_str()
        )));
    }
    Ok((model, header))
}

fn finetune_cmd(
    cfg: &RunConfig,
    checkpoint: &Path,
    recordings: &[PathBuf],
    events: &[PathBuf],
    out: &Path,
) -> anyhow::Result<()> {
    if recordings.len() != events.len() {
        bail!(Failure::Config(format!(
            "{} recordings but {} event files",
            recordings.len(),
            events.len()
        )));
    }
    let mut manifest = Manifest::new("finetune", cfg);
    let (model, mut header) = load_model(checkpoint, HeadKind::Decoder)?;
    manifest.input(checkpoint)?;
    let mut subjects = Vec::new();
    for (r, e) in recordings.iter().zip(events) {
        let recording = standardized(r)?;
        let ev = read_events(e)?;
        manifest.input(r)?;
        manifest.input(e)?;
        subjects.push(SubjectRecording { subject: stem(r), recording, events: ev });
    }
    let pipeline = cfg.pipeline();
    let detection = deepmatch::model::DetectionConfig { seed: cfg.run.seed, ..pipeline.detection };
    let dataset = make_detection_dataset(&subjects, &detection)?;
    info!("{} positive / {} negative windows", dataset.n_positive(), dataset.n_negative());
    let training = deepmatch::model::TrainingConfig { seed: cfg.run.seed, ..pipeline.training };
    let (model, history) = finetune(model.attach_detector(cfg.run.seed)?, &dataset, &training)?;
    header.head = HeadKind::Detector;
    header.history["finetune"] = json!(history);
    header.provenance = manifest.inputs.clone();
    save_checkpoint(out, &model, &header)?;
    manifest.output(out)?;
    manifest.summary = json!({ "finetune": history, "skipped_subjects": dataset.skipped });
    manifest.write_for(out)?;
    Ok(())
}

fn infer_cmd(cfg: &RunConfig, checkpoint: &Path, input: &Path, out: &Path) -> anyhow::Result<()> {
    let mut manifest = Manifest::new("infer", cfg);
    let (model, _) = load_model(checkpoint, HeadKind::Detector)?;
    manifest.input(checkpoint)?;
    let rec = standardized(input)?;
    manifest.input(input)?;
    let trace = infer(&model, &rec, cfg.run.inference_hop_s)?;
    write_json(out, &trace)?;
    manifest.output(out)?;
    manifest.write_for(out)?;
    Ok(())
}

fn eval(cfg: &RunConfig, trace: &Path, events: &Path, out: &Path, subject: &str) -> anyhow::Result<()> {
    require(trace)?;
    let mut manifest = Manifest::new("eval", cfg);
    let tr: DetectionTrace = serde_json::from_slice(&std::fs::read(trace)?)
        .map_err(|e| deepmatch::Error::Malformed(format!("{}: {e}", trace.display())))?;
    let ev = read_events(events)?;
    manifest.input(trace)?;
    manifest.input(events)?;
    let score = score_trace(subject, &tr, &ev, &cfg.peaks)?;
    write_json(out, &json!({ "peaks": cfg.peaks, "score": score }))?;
    manifest.output(out)?;
    manifest.write_for(out)?;
    Ok(())
}

fn load_data_dir(dir: &Path, manifest: &mut Manifest) -> anyhow::Result<Vec<SubjectRecording>> {
    require(dir)?;
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "mcrd"))
        .collect();
    paths.sort();
    let mut subjects = Vec::new();
    for rec_path in paths {
        let name = stem(&rec_path);
        let ev_path = dir.join(format!("{name}.events.csv"));
        let recording = read_recording_any(&rec_path, None)?;
        let events = read_events(&ev_path)?;
        manifest.input(&rec_path)?;
        manifest.input(&ev_path)?;
        subjects.push(SubjectRecording { subject: name, recording, events });
    }
    if subjects.len() < 2 {
        bail!(Failure::MissingInput(format!("{} holds fewer than two recordings", dir.display())));
    }
    Ok(subjects)
}

fn loo(cfg: &RunConfig, data_dir: Option<&Path>, synthetic: Option<usize>, out: &Path) -> anyhow::Result<()> {
    let mut manifest = Manifest::new("loo", cfg);
    let subjects = match (data_dir, synthetic) {
        (Some(dir), _) => load_data_dir(dir, &mut manifest)?,
        (None, Some(n)) => generate_cohort(&cfg.synth, n)?
            .into_iter()
            .map(|(subject, s)| SubjectRecording { subject, recording: s.recording, events: s.events })
            .collect(),
        (None, None) => bail!(Failure::Config("give --data-dir or --synthetic".into())),
    };
    let report = loo_run(&subjects, &cfg.pipeline())?;
    write_json(out, &report)?;
    manifest.output(out)?;
    manifest.summary = json!(report
        .results
        .iter()
        .map(|r| json!({ "variant": r.variant, "mean_f1": r.mean_f1 }))
        .collect::<Vec<_>>());
    manifest.write_for(out)?;
    if report.incomplete {
        log::warn!("some folds failed; see the report");
    }
    Ok(())
}

fn gradcheck(cfg: &RunConfig, out: Option<&Path>, coords: usize) -> anyhow::Result<()> {
    let seed = cfg.run.seed;
    let mut rows = Vec::new();
    let mut worst: f64 = 0.0;
    for (label, arch, max) in [
        ("tiny", ArchitectureConfig::tiny(), None),
        ("configured", cfg.architecture.clone(), Some(coords)),
    ] {
        for (head, r) in check_model_gradients(&arch, max, seed)? {
            println!(
                "{label:>10} {:>8}: max relative error {:.3e} over {} of {} parameters",
                head.as_str(),
                r.max_rel_error,
                r.checked,
                r.total_params
            );
            worst = worst.max(r.max_rel_error);
            rows.push(json!({ "architecture": label, "head": head, "report": r }));
        }
    }
    let report = json!({ "limit": GRADCHECK_LIMIT, "max_rel_error": worst, "checks": rows });
    if let Some(out) = out {
        let mut manifest = Manifest::new("gradcheck", cfg);
        write_json(out, &report)?;
        manifest.output(out)?;
        manifest.write_for(out)?;
    }
    if !(worst < GRADCHECK_LIMIT) {
        bail!(Failure::Invariant(format!("max relative error {worst:.3e} is not below {GRADCHECK_LIMIT:e}")));
    }
    Ok(())
}
