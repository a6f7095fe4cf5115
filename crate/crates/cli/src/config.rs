use std::path::Path;

use anyhow::Context;
use deepmatch::eval::{PeakParams, PipelineConfig, PreprocessConfig, TemplateConfig};
use deepmatch::model::{ArchitectureConfig, DetectionConfig, ModelVariant, TrainingConfig};
use deepmatch::synth::SynthConfig;
use serde::{Deserialize, Serialize};

use crate::failure::Failure;

/// Environment variable naming a config file used when `--config` is absent.
pub const CONFIG_ENV: &str = "DEEPMATCH_CONFIG";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub seed: u64,
    pub variants: Vec<ModelVariant>,
    pub paper_faithful: bool,
    pub pretrain_overlap: f64,
    pub inference_hop_s: f64,
}

impl Default for RunSection {
    fn default() -> Self {
        let p = PipelineConfig::default();
        Self {
            seed: p.seed,
            variants: p.variants,
            paper_faithful: p.paper_faithful,
            pretrain_overlap: p.pretrain_overlap,
            inference_hop_s: p.inference_hop_s,
        }
    }
}

/// Every tunable of every stage, one TOML section per stage.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub run: RunSection,
    pub synth: SynthConfig,
    pub preprocess: PreprocessConfig,
    pub template: TemplateConfig,
    pub architecture: ArchitectureConfig,
    pub detection: DetectionConfig,
    pub training: TrainingConfig,
    pub peaks: PeakParams,
}

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::MissingInput(format!("{}: {e}", path.display())))?;
        Self::parse(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn parse(text: &str) -> anyhow::Result<Self> {
        toml::from_str(text).map_err(|e| Failure::Config(e.to_string()).into())
    }

    pub fn pipeline(&self) -> PipelineConfig {
        PipelineConfig {
            preprocess: self.preprocess.clone(),
            template: self.template.clone(),
            architecture: self.architecture.clone(),
            pretrain_overlap: self.run.pretrain_overlap,
            detection: self.detection.clone(),
            training: self.training.clone(),
            inference_hop_s: self.run.inference_hop_s,
            peaks: self.peaks,
            variants: self.run.variants.clone(),
            paper_faithful: self.run.paper_faithful,
            seed: self.run.seed,
        }
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        self.synth.validate().map_err(|e| Failure::Config(e.to_string()))?;
        self.pipeline().validate().map_err(|e| Failure::Config(e.to_string()))?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        assert_eq!(RunConfig::parse("").unwrap(), RunConfig::default());
        RunConfig::default().validate().unwrap();
    }

    #[test]
    fn default_round_trips_through_toml() {
        let text = toml::to_string(&RunConfig::default()).unwrap();
        assert_eq!(RunConfig::parse(&text).unwrap(), RunConfig::default());
    }

    #[test]
    fn unknown_key_named() {
        let err = RunConfig::parse("[training]\nlearning_rate = 0.1\n").unwrap_err();
        assert!(err.to_string().contains("learning_rate"), "{err}");
        assert!(matches!(err.downcast_ref::<Failure>(), Some(Failure::Config(_))));
    }

    #[test]
    fn partial_sections() {
        let c = RunConfig::parse("[run]\nseed = 7\nvariants = [\"deepmf\"]\n[peaks]\ntolerance_s = 0.2\n").unwrap();
        assert_eq!(c.run.seed, 7);
        assert_eq!(c.pipeline().variants, vec![ModelVariant::DeepMf]);
        assert_eq!(c.peaks.tolerance_s, 0.2);
        assert_eq!(c.peaks.min_height, 0.25);
    }
}
