//! Experiment configuration, read from one TOML file.
//!
//! Relative paths are resolved against the directory holding the config file.

use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::attack::{AttackConfig, TargetMode};
use crate::error::{Error, Result};
use crate::evolve::GaConfig;
use crate::qsim::{ChannelKind, NoiseChannel, NoiseModel};
use crate::seed;
use crate::train::{CqcSpec, PcaDraSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Master seed; every random stream is derived from it.
    #[serde(default)]
    pub seed: u64,
    pub out_dir: PathBuf,
    /// Worker threads; `None` lets the thread pool decide.
    #[serde(default)]
    pub threads: Option<usize>,
    pub data: DataConfig,
    pub classifier: ClassifierConfig,
    #[serde(default)]
    pub noise: NoiseConfig,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub eval: EvalConfig,
    #[serde(default)]
    pub attack: AttackSection,
    #[serde(default)]
    pub certify: CertifyConfig,
    #[serde(default)]
    pub sweep: SweepConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub train_images: PathBuf,
    pub train_labels: PathBuf,
    pub test_images: PathBuf,
    pub test_labels: PathBuf,
    pub digits: Vec<u8>,
    #[serde(default = "default_train_size")]
    pub train_size: usize,
    #[serde(default = "default_test_size")]
    pub test_size: usize,
}

fn default_train_size() -> usize {
    1000
}

fn default_test_size() -> usize {
    200
}

impl DataConfig {
    pub fn digit_set(&self) -> BTreeSet<u8> {
        self.digits.iter().copied().collect()
    }

    pub fn num_classes(&self) -> usize {
        self.digits.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ClassifierConfig {
    PcaDra(PcaDraSpec),
    Cqc(CqcSpec),
}

impl ClassifierConfig {
    pub fn param_count(&self, num_classes: usize) -> usize {
        match self {
            ClassifierConfig::PcaDra(s) => s.param_count(),
            ClassifierConfig::Cqc(s) => s.param_count(num_classes),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoisePreset {
    #[default]
    Noiseless,
    DeviceLike,
    /// Uses the per-channel probabilities of the section.
    Custom,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    #[serde(default)]
    pub preset: NoisePreset,
    #[serde(default)]
    pub depolarizing: f64,
    #[serde(default)]
    pub bit_flip: f64,
    #[serde(default)]
    pub phase_flip: f64,
    #[serde(default)]
    pub readout_flip: f64,
}

impl NoiseConfig {
    /// `None` for the noiseless preset.
    pub fn model(&self) -> Result<Option<NoiseModel>> {
        let m = match self.preset {
            NoisePreset::Noiseless => return Ok(None),
            NoisePreset::DeviceLike => NoiseModel::device_like(),
            NoisePreset::Custom => NoiseModel {
                per_gate_channels: vec![
                    NoiseChannel::depolarizing(self.depolarizing)?,
                    NoiseChannel::bit_flip(self.bit_flip)?,
                    NoiseChannel::phase_flip(self.phase_flip)?,
                ],
                readout_flip: self.readout_flip,
            },
        };
        m.validate()?;
        Ok(Some(m))
    }
}

/// GA settings for weight training. Every weight is bounded to `[-bound, bound]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub population_size: usize,
    pub elite_k: usize,
    pub mutation_rate: f64,
    pub mutation_fraction: f64,
    pub mutation_sigma: f64,
    pub max_iters: usize,
    pub stagnation_window: usize,
    pub bound: f64,
    /// Train under the configured noise instead of noiselessly.
    pub noisy: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            population_size: 200,
            elite_k: 100,
            mutation_rate: 0.5,
            mutation_fraction: 0.1,
            mutation_sigma: 0.1,
            max_iters: 300,
            stagnation_window: 20,
            bound: PI,
            noisy: false,
        }
    }
}

impl TrainConfig {
    pub fn ga(&self, genes: usize, master_seed: u64) -> GaConfig {
        GaConfig {
            population_size: self.population_size,
            elite_k: self.elite_k,
            mutation_rate: self.mutation_rate,
            mutation_fraction: self.mutation_fraction,
            mutation_sigma: self.mutation_sigma,
            max_iters: self.max_iters,
            stagnation_window: self.stagnation_window,
            genome_bounds: vec![[-self.bound, self.bound]; genes],
            seed: seed::derive(master_seed, "train"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    /// Adds a finite-shot pass when set.
    pub shots: Option<u64>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig { shots: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AttackSection {
    /// Number of test images attacked, taken from the start of the test split.
    pub samples: usize,
    pub target: TargetMode,
    pub w0: f64,
    pub w1: f64,
    pub population_size: usize,
    pub elite_k: usize,
    pub mutation_rate: f64,
    pub mutation_fraction: f64,
    pub mutation_sigma: f64,
    pub max_iters: usize,
    pub stagnation_window: usize,
}

impl Default for AttackSection {
    fn default() -> Self {
        AttackSection {
            samples: 50,
            target: TargetMode::NextClass,
            w0: 1.0,
            w1: 1.0,
            population_size: 200,
            elite_k: 100,
            mutation_rate: 0.5,
            mutation_fraction: 0.1,
            mutation_sigma: crate::attack::DEFAULT_PIXEL_SIGMA,
            max_iters: 500,
            stagnation_window: 20,
        }
    }
}

impl AttackSection {
    /// Config for attacking test sample `index`.
    pub fn config(&self, pixels: usize, master_seed: u64, index: usize) -> AttackConfig {
        let mut ga = GaConfig::with_uniform_bounds(pixels, 0.0, 255.0, seed::derive_indexed(master_seed, "attack", index as u64));
        ga.population_size = self.population_size;
        ga.elite_k = self.elite_k;
        ga.mutation_rate = self.mutation_rate;
        ga.mutation_fraction = self.mutation_fraction;
        ga.mutation_sigma = self.mutation_sigma;
        ga.max_iters = self.max_iters;
        ga.stagnation_window = self.stagnation_window;
        AttackConfig {
            target: self.target,
            w0: self.w0,
            w1: self.w1,
            ga,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CertifyConfig {
    pub level: f64,
    pub epsilons: Vec<f64>,
    /// Declared depolarization rate for `r_DP`.
    pub depolarizing: Option<f64>,
}

impl Default for CertifyConfig {
    fn default() -> Self {
        CertifyConfig {
            level: 0.9,
            epsilons: (0..=10).map(|i| i as f64 * 0.05).collect(),
            depolarizing: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub channels: Vec<ChannelKind>,
    pub grid: Vec<f64>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            channels: vec![ChannelKind::Depolarizing, ChannelKind::BitFlip, ChannelKind::PhaseFlip],
            grid: vec![0.0, 0.02, 0.05, 0.1, 0.2, 0.3, 0.5],
        }
    }
}

/// Command-line overrides applied after loading.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
    pub shots: Option<u64>,
    pub threads: Option<usize>,
}

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

impl ExperimentConfig {
    /// The config as recorded in reports: without `out_dir` and `threads`,
    /// which do not affect results.
    pub fn snapshot(&self) -> Result<serde_json::Value> {
        let mut v = serde_json::to_value(self).map_err(|e| config_err(e.to_string()))?;
        if let Some(map) = v.as_object_mut() {
            map.remove("out_dir");
            map.remove("threads");
        }
        Ok(v)
    }

    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| config_err(e.to_string()))
    }

    /// Reads, resolves paths, applies overrides and validates.
    pub fn load(path: &Path, overrides: &Overrides) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| config_err(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text)?;
        cfg.resolve_paths(path.parent().unwrap_or(Path::new(".")));
        cfg.apply(overrides);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.out_dir);
        fix(&mut self.data.train_images);
        fix(&mut self.data.train_labels);
        fix(&mut self.data.test_images);
        fix(&mut self.data.test_labels);
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if let Some(d) = &o.out_dir {
            self.out_dir = d.clone();
        }
        if let Some(s) = o.shots {
            self.eval.shots = Some(s);
        }
        if let Some(t) = o.threads {
            self.threads = Some(t);
        }
    }

    pub fn validate(&self) -> Result<()> {
        let d = &self.data;
        for p in [&d.train_images, &d.train_labels, &d.test_images, &d.test_labels] {
            if !p.is_file() {
                return Err(config_err(format!("data file {} does not exist", p.display())));
            }
        }
        let set = d.digit_set();
        if set.len() != d.digits.len() || d.digits.iter().any(|x| *x > 9) {
            return Err(config_err(format!("digits must be distinct values 0-9, got {:?}", d.digits)));
        }
        let classes = d.num_classes();
        let max = match self.classifier {
            ClassifierConfig::PcaDra(_) => 4,
            ClassifierConfig::Cqc(_) => 9,
        };
        if !(2..=max).contains(&classes) {
            return Err(config_err(format!("this classifier supports 2 to {max} classes, got {classes}")));
        }
        if d.train_size < classes || d.test_size < classes {
            return Err(config_err("split sizes must allow at least one sample per class"));
        }
        match &self.classifier {
            ClassifierConfig::PcaDra(s) => {
                if s.components == 0 || s.layers == 0 || s.tied == Some(0) {
                    return Err(config_err("pca_dra needs positive components, layers and tied"));
                }
            }
            ClassifierConfig::Cqc(s) => {
                if s.depths.contains(&0) {
                    return Err(config_err("cqc depths must be positive"));
                }
            }
        }
        self.noise.model().map_err(|e| config_err(format!("noise: {e}")))?;
        if !(self.train.bound > 0.0 && self.train.bound.is_finite()) {
            return Err(config_err("train.bound must be positive"));
        }
        self.train.ga(1, self.seed).validate().map_err(|e| config_err(format!("train: {e}")))?;
        if self.attack.samples == 0 {
            return Err(config_err("attack.samples must be positive"));
        }
        self.attack.config(1, self.seed, 0).validate().map_err(|e| config_err(format!("attack: {e}")))?;
        if let TargetMode::Class(t) = self.attack.target {
            if t >= classes {
                return Err(config_err(format!("attack target {t} out of range")));
            }
        }
        if self.eval.shots == Some(0) {
            return Err(config_err("eval.shots must be positive"));
        }
        let c = &self.certify;
        if !(c.level > 0.0 && c.level < 1.0) {
            return Err(config_err("certify.level must lie in (0, 1)"));
        }
        if c.epsilons.iter().any(|e| !(0.0..=1.0).contains(e)) {
            return Err(config_err("certify.epsilons must lie in [0, 1]"));
        }
        if let Some(p) = c.depolarizing {
            if !(0.0..1.0).contains(&p) {
                return Err(config_err("certify.depolarizing must lie in [0, 1)"));
            }
        }
        if self.sweep.grid.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(config_err("sweep.grid values must lie in [0, 1]"));
        }
        if self.threads == Some(0) {
            return Err(config_err("threads must be positive"));
        }
        Ok(())
    }
}
