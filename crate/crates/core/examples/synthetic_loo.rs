//! Leave-one-subject-out evaluation on generated subjects.
//!
//! ```text
//! cargo run --release -p deepmatch --example synthetic_loo -- \
//!     [subjects] [snr_db] [pretrain_epochs] [finetune_epochs] [seed]
//! ```

use deepmatch::eval::{loo_run, PipelineConfig};
use deepmatch::model::SubjectRecording;
use deepmatch::synth::{generate_subject, SynthConfig};

fn arg<T: std::str::FromStr>(i: usize, default: T) -> T {
    std::env::args().nth(i).and_then(|s| s.parse().ok()).unwrap_or(default)
}

fn main() -> deepmatch::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let (n, snr_db, pre, fine, seed) = (arg(1, 8usize), arg(2, 0.0f64), arg(3, 5usize), arg(4, 20usize), arg(5, 0u64));
    let subjects = (0..n)
        .map(|i| {
            let s = generate_subject(&SynthConfig { snr_db, seed: seed * 1000 + i as u64, ..Default::default() })?;
            Ok(SubjectRecording { subject: format!("sub{i:02}"), recording: s.recording, events: s.events })
        })
        .collect::<deepmatch::Result<Vec<_>>>()?;
    let mut cfg = PipelineConfig { seed, ..Default::default() };
    cfg.training.pretrain_epochs = pre;
    cfg.training.finetune_epochs = fine;
    let t0 = std::time::Instant::now();
    let report = loo_run(&subjects, &cfg)?;
    for r in &report.results {
        let f1: Vec<String> = r.subjects.iter().map(|s| format!("{:.2}", s.f1)).collect();
        println!("{:>8}: mean F1 {:.3}  [{}]", r.variant.as_str(), r.mean_f1, f1.join(" "));
    }
    println!("elapsed {:.1?}", t0.elapsed());
    Ok(())
}
