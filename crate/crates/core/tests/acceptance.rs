//! Acceptance suite: one test per criterion, each printing a PASS/FAIL line.
//!
//! Run with `cargo test -p deepmatch --test acceptance -- --nocapture` to see
//! the summary lines. Criteria 5 and 6 train full models and take minutes.

use std::io::Write;
use std::time::Instant;

use deepmatch::eval::{loo_run, match_events, max_matching_exhaustive, PipelineConfig};
use deepmatch::formats::{read_checkpoint, read_recording, write_checkpoint, write_recording, CheckpointHeader};
use deepmatch::model::{
    check_model_gradients, ArchitectureConfig, DeepMatchModel, ModelVariant, SubjectRecording,
};
use deepmatch::nn::Tensor;
use deepmatch::synth::{gen_erp_waveform, generate_cohort, SynthConfig};
use deepmatch::template::{scale_factor, to_kernels, ErpTemplate, KernelLayout};
use deepmatch::Recording;
use ndarray::Array2;
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Written to the process stdout directly so the line shows up even when the
/// test harness captures output.
fn report(criterion: u32, pass: bool, detail: &str) {
    let line = format!("criterion {criterion}: {} ({detail})\n", if pass { "PASS" } else { "FAIL" });
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(line.as_bytes());
    let _ = out.flush();
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    (m, (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n).sqrt())
}

#[test]
fn criterion_1_gradient_integrity() {
    let t0 = Instant::now();
    let mut worst: f64 = 0.0;
    let mut details = Vec::new();
    for (label, arch, coords) in [
        ("tiny/all", ArchitectureConfig::tiny(), None),
        ("default/sampled", ArchitectureConfig::default(), Some(150)),
    ] {
        for (head, r) in check_model_gradients(&arch, coords, 17).unwrap() {
            worst = worst.max(r.max_rel_error);
            details.push(format!("{label} {}: {:.2e} over {}", head.as_str(), r.max_rel_error, r.checked));
        }
    }
    let secs = t0.elapsed().as_secs_f64();
    let pass = worst < 1e-4 && secs < 60.0;
    report(1, pass, &format!("max rel error {worst:.2e}, {secs:.1} s; {}", details.join("; ")));
    assert!(pass);
}

#[test]
fn criterion_2_kernel_scaling() {
    let s1 = scale_factor(1, 300, 1).unwrap();
    let s4 = scale_factor(4, 300, 1).unwrap();
    let mut ok = (s1 - 0.0816497).abs() < 5e-8 && (s4 - 0.0408248).abs() < 5e-8;
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst_mean: f64 = 0.0;
    let mut worst_std: f64 = 0.0;
    for trial in 0..50 {
        let scale = rng.random_range(0.1..100.0);
        let w = Array2::from_shape_fn((4, 300), |_| rng.random_range(-1.0..1.0) * scale + trial as f64);
        let t = ErpTemplate {
            fs: 250.0,
            channels: ["C3", "Cz", "Pz", "C4"].map(String::from).to_vec(),
            waveforms: w,
            n_subjects_averaged: 1,
            t_start: -0.2,
        };
        for layout in [KernelLayout::Depthwise, KernelLayout::FullSpatial] {
            let bank = to_kernels(&t, layout).unwrap();
            for k in &bank.kernels {
                let (h, wd, c) = k.shape;
                let sigma = (2.0 / (h * wd * c) as f64).sqrt();
                let (m, s) = mean_std(&k.values);
                worst_mean = worst_mean.max(m.abs());
                worst_std = worst_std.max((s - sigma).abs());
                ok &= (k.sigma - sigma).abs() < 1e-15;
            }
        }
    }
    let pass = ok && worst_mean < 1e-6 && worst_std < 1e-6;
    report(
        2,
        pass,
        &format!("sigma(1,300,1)={s1:.7}, sigma(4,300,1)={s4:.7}, max |mean| {worst_mean:.1e}, max |std-sigma| {worst_std:.1e}"),
    );
    assert!(pass);
}

#[test]
fn criterion_3_matched_filter_equivalence() {
    let t0 = Instant::now();
    let arch = ArchitectureConfig::default();
    let wave = gen_erp_waveform(250.0).unwrap();
    let t = ErpTemplate {
        fs: 250.0,
        channels: ["C3", "Cz", "Pz", "C4"].map(String::from).to_vec(),
        waveforms: Array2::from_shape_fn((4, 300), |(c, i)| wave[i] * [1.0, 1.0, 0.8, 0.8][c]),
        n_subjects_averaged: 1,
        t_start: -0.2,
    };
    let bank = to_kernels(&t, KernelLayout::Depthwise).unwrap();
    let model = DeepMatchModel::<f64>::build(&arch, ModelVariant::DeepMf, Some(&bank), 0).unwrap();
    let layer = &model.encoder.layers[0];
    assert!(layer.bias.iter().all(|&b| b == 0.0));
    let anchor = t.n_pre_event();
    let len = arch.window_len_samples;
    let brute = |x: &Tensor<f64>, b: usize, c: usize| -> Vec<f64> {
        let k = &bank.kernels[c].values;
        (0..len)
            .map(|out| {
                (0..k.len())
                    .filter_map(|j| (out + j).checked_sub(anchor).filter(|&i| i < len).map(|i| k[j] * x.at(b, c, i)))
                    .sum()
            })
            .collect()
    };

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst_rel: f64 = 0.0;
    for _ in 0..5 {
        let x = Tensor::from_fn([2, 4, len], |_, _, _| rng.random_range(-3.0..3.0));
        let y = layer.forward(&x).unwrap();
        for b in 0..2 {
            for c in 0..4 {
                let r = brute(&x, b, c);
                let scale = r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                for (a, e) in y.row(b, c).iter().zip(&r) {
                    worst_rel = worst_rel.max((a - e).abs() / scale);
                }
            }
        }
    }

    let mut located = true;
    for event in [60usize, 137, 200] {
        let x = Tensor::from_fn([1, 4, len], |_, c, i| {
            i.checked_sub(event - anchor).and_then(|j| t.waveforms.get((c, j)).copied()).unwrap_or(0.0)
        });
        let y = layer.forward(&x).unwrap();
        for c in 0..4 {
            let row = y.row(0, c);
            let argmax = (0..len).max_by(|&a, &b| row[a].total_cmp(&row[b])).unwrap();
            located &= argmax == event;
        }
    }
    let secs = t0.elapsed().as_secs_f64();
    let pass = worst_rel < 1e-5 && located && secs < 10.0;
    report(3, pass, &format!("max rel deviation {worst_rel:.1e}, exact localisation {located}, {secs:.2} s"));
    assert!(pass);
}

#[test]
fn criterion_4_matching_oracle() {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut mismatches = 0;
    for _ in 0..1000 {
        let (np, nt) = (rng.random_range(0..=8), rng.random_range(0..=8));
        let mut draw = |n: usize| {
            let mut v: Vec<f64> = (0..n).map(|_| (rng.random_range(0.0..3.0f64) * 100.0).round() / 100.0).collect();
            v.sort_by(f64::total_cmp);
            v
        };
        let (pred, truth) = (draw(np), draw(nt));
        let tol = rng.random_range(0.05..0.5);
        if match_events(&pred, &truth, tol).unwrap().tp != max_matching_exhaustive(&pred, &truth, tol) {
            mismatches += 1;
        }
    }
    let secs = t0.elapsed().as_secs_f64();
    let pass = mismatches == 0 && secs < 10.0;
    report(4, pass, &format!("{mismatches} mismatches in 1000 instances, {secs:.2} s"));
    assert!(pass);
}

/// Training budgets for the end-to-end criteria on a single CPU core.
fn acceptance_pipeline(seed: u64, variants: Vec<ModelVariant>) -> PipelineConfig {
    let mut cfg = PipelineConfig { seed, variants, ..Default::default() };
    cfg.training.pretrain_epochs = PRETRAIN_EPOCHS;
    cfg.training.finetune_epochs = FINETUNE_EPOCHS;
    cfg
}

const PRETRAIN_EPOCHS: usize = 3;
const FINETUNE_EPOCHS: usize = 10;

fn cohort(n: usize, snr_db: f64, seed: u64, base: SynthConfig) -> Vec<SubjectRecording> {
    generate_cohort(&SynthConfig { snr_db, seed, ..base }, n)
        .unwrap()
        .into_iter()
        .map(|(subject, s)| SubjectRecording { subject, recording: s.recording, events: s.events })
        .collect()
}

/// DeepMF mean F1 threshold at 0 dB, fixed from a pilot run (0.868).
const E2E_F1_THRESHOLD: f64 = 0.8;

#[test]
fn criterion_5_end_to_end_detection() {
    let t0 = Instant::now();
    let subjects = cohort(8, 0.0, 0, SynthConfig::default());
    assert!(subjects.iter().all(|s| s.events.len() == 16));
    let report_ = loo_run(&subjects, &acceptance_pipeline(0, vec![ModelVariant::DeepMf])).unwrap();
    let r = report_.summary(ModelVariant::DeepMf).unwrap();
    let per: Vec<String> = r.subjects.iter().map(|s| format!("{:.2}", s.f1)).collect();
    let pass = !report_.incomplete && r.subjects.len() == 8 && r.mean_f1 >= E2E_F1_THRESHOLD;
    report(
        5,
        pass,
        &format!(
            "DeepMF mean F1 {:.3} (threshold {E2E_F1_THRESHOLD}), per subject [{}], {:.0} s",
            r.mean_f1,
            per.join(" "),
            t0.elapsed().as_secs_f64()
        ),
    );
    assert!(pass);
}

const LOW_SNR_SEEDS: u64 = 5;
const LOW_SNR_SUBJECTS: usize = 3;

#[test]
fn criterion_6_low_snr_direction() {
    let t0 = Instant::now();
    let mut gaps = Vec::new();
    let mut lines = Vec::new();
    for seed in 0..LOW_SNR_SEEDS {
        let subjects = cohort(LOW_SNR_SUBJECTS, -10.0, 100 + seed, SynthConfig::default());
        let r = loo_run(&subjects, &acceptance_pipeline(seed, vec![ModelVariant::DeepMf, ModelVariant::Standard])).unwrap();
        let mf = r.summary(ModelVariant::DeepMf).unwrap().mean_f1;
        let st = r.summary(ModelVariant::Standard).unwrap().mean_f1;
        gaps.push(mf - st);
        lines.push(format!("seed {seed}: {mf:.3} vs {st:.3} (gap {:+.3})", mf - st));
    }
    let mean_gap = gaps.iter().sum::<f64>() / gaps.len() as f64;
    let pass = mean_gap >= 0.0;
    report(
        6,
        pass,
        &format!("mean gap DeepMF - Standard {mean_gap:+.3}; {}; {:.0} s", lines.join("; "), t0.elapsed().as_secs_f64()),
    );
    assert!(pass);
}

#[test]
fn criterion_7_determinism() {
    let base = SynthConfig { duration_s: 40.0, n_events: 6, ..Default::default() };
    let subjects = cohort(2, 0.0, 7, base);
    let mut cfg = acceptance_pipeline(7, vec![ModelVariant::DeepMf, ModelVariant::Standard]);
    cfg.training.pretrain_epochs = 1;
    cfg.training.finetune_epochs = 2;
    let a = serde_json::to_string(&loo_run(&subjects, &cfg).unwrap()).unwrap();
    let b = serde_json::to_string(&loo_run(&subjects, &cfg).unwrap()).unwrap();
    let pass = a == b;
    report(7, pass, &format!("two runs, {} byte reports, identical: {pass}", a.len()));
    assert!(pass);
}

#[test]
fn criterion_8_format_round_trips() {
    let mut runner = TestRunner::new(Config { cases: 1000, failure_persistence: None, ..Config::default() });
    let rec_strategy = (
        1usize..5,
        0usize..64,
        1.0f64..5000.0,
        prop::collection::vec(any::<f32>().prop_filter("finite", |v| v.is_finite()), 0..320),
    );
    let mcrd = runner.run(&rec_strategy, |(n_ch, n, fs, pool)| {
        let data = Array2::from_shape_fn((n_ch, n), |(c, t)| {
            pool.get((c * n + t) % pool.len().max(1)).copied().unwrap_or(0.0) as f64
        });
        let names = (0..n_ch).map(|i| format!("ch{i}-é")).collect();
        let rec = Recording::new(fs, names, data).unwrap();
        let mut buf = Vec::new();
        write_recording(&mut buf, &rec).unwrap();
        let back = read_recording(buf.as_slice()).unwrap();
        prop_assert_eq!(back.fs().to_bits(), rec.fs().to_bits());
        prop_assert_eq!(back.channels(), rec.channels());
        prop_assert!(back.data().iter().zip(rec.data()).all(|(a, b)| a.to_bits() == b.to_bits()));
        Ok(())
    });

    let arch = ArchitectureConfig::tiny();
    let mut runner = TestRunner::new(Config { cases: 1000, failure_persistence: None, ..Config::default() });
    let dmck = runner.run(&(any::<u64>(), any::<bool>(), any::<u64>()), |(seed, detector, fill)| {
        let mut model = DeepMatchModel::<f32>::build(&arch, ModelVariant::Standard, None, seed).unwrap();
        if detector {
            model = model.attach_detector(seed).unwrap();
        }
        let mut rng = ChaCha8Rng::seed_from_u64(fill);
        for block in model.params_mut() {
            for v in block.iter_mut() {
                *v = f32::from_bits(rng.random::<u32>() & 0xBFFF_FFFF);
            }
        }
        let header = CheckpointHeader::for_model(&model, seed);
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, &model, &header).unwrap();
        let (back, h) = read_checkpoint(buf.as_slice()).unwrap();
        prop_assert_eq!(h, header);
        for (a, b) in back.params().iter().zip(model.params()) {
            prop_assert!(a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits()));
        }
        Ok(())
    });
    let pass = mcrd.is_ok() && dmck.is_ok();
    report(8, pass, &format!("MCRD {:?}, DMCK {:?} over 1000 cases each", mcrd.is_ok(), dmck.is_ok()));
    assert!(pass, "{mcrd:?} {dmck:?}");
}

/// Needs a local copy of the public dataset converted to `<subject>.mcrd` +
/// `<subject>.events.csv` pairs in the directory named by
/// `DEEPMATCH_DATASET_DIR`. Not part of the default run.
#[test]
#[ignore = "requires a local dataset"]
fn criterion_9_real_data_paper_faithful() {
    let Ok(dir) = std::env::var("DEEPMATCH_DATASET_DIR") else {
        report(9, false, "DEEPMATCH_DATASET_DIR not set");
        panic!("DEEPMATCH_DATASET_DIR not set");
    };
    let dir = std::path::PathBuf::from(dir);
    let mut paths: Vec<_> = std::fs::read_dir(&dir)
        .unwrap()
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "mcrd"))
        .collect();
    paths.sort();
    let subjects: Vec<SubjectRecording> = paths
        .iter()
        .map(|p| {
            let name = p.file_stem().unwrap().to_string_lossy().to_string();
            SubjectRecording {
                recording: deepmatch::formats::load_recording(p).unwrap(),
                events: deepmatch::formats::read_events_csv(&dir.join(format!("{name}.events.csv"))).unwrap(),
                subject: name,
            }
        })
        .collect();
    let cfg = PipelineConfig { paper_faithful: true, ..Default::default() };
    let r = loo_run(&subjects, &cfg).unwrap();
    let mut pass = !r.incomplete;
    for v in &r.results {
        pass &= v.subjects.len() == subjects.len() && v.subjects.iter().all(|s| (0.0..=1.0).contains(&s.f1));
        println!("{}: mean F1 {:.3}, best {:.3}, worst {:.3}", v.variant.as_str(), v.mean_f1, v.best_f1, v.worst_f1);
    }
    report(9, pass, &format!("{} subjects", subjects.len()));
    assert!(pass);
}
