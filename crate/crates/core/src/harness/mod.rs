//! Experiment commands: prepare, train, eval, attack, certify and noise sweeps.
//!
//! Every command reads an [`ExperimentConfig`] and works inside its output
//! directory. Reports are JSON Lines plus tab-separated tables and are a pure
//! function of the config, so a fixed seed gives byte-identical files.
//! Wall-clock timings go to `timing.jsonl` only.

pub mod config;
mod report;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::attack::{self, AttackSummary};
use crate::classifier::{evaluate, Classifier, PcaDraClassifier, Shots};
use crate::cqc::CqcModel;
use crate::dra::DraModel;
use crate::error::{Error, Result};
use crate::evolve::{write_history, InitKind};
use crate::features::PcaModel;
use crate::mnist::{self, ImageTensor, LabeledDataset};
use crate::qsim::{ChannelKind, NoiseChannel, NoiseModel};
use crate::robustness::{self, certified_accuracy, certify_record, error_rates, PredictionRecord};
use crate::seed;
use crate::train::{self, Trained};

pub use config::{ClassifierConfig, ExperimentConfig, NoiseConfig, NoisePreset, Overrides};
use report::{write_json, write_jsonl, Table};

pub const TOOL_VERSION: &str = concat!("qrobust ", env!("CARGO_PKG_VERSION"));
const MODEL_FORMAT: &str = "qrobust-model";
const MODEL_VERSION: u32 = 1;

/// File names inside the output directory.
#[derive(Debug, Clone)]
pub struct Layout {
    root: PathBuf,
}

impl Layout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Layout { root: root.into() }
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn root(&self) -> &Path {
        &self.root
    }
}

pub const TRAIN_IMAGES: &str = "train-images-idx3-ubyte";
pub const TRAIN_LABELS: &str = "train-labels-idx1-ubyte";
pub const TEST_IMAGES: &str = "test-images-idx3-ubyte";
pub const TEST_LABELS: &str = "test-labels-idx1-ubyte";
pub const PCA_FILE: &str = "pca.bin";
pub const MODEL_FILE: &str = "model.json";
pub const ADV_IMAGES: &str = "adversarial-images-idx3-ubyte";
pub const ADV_LABELS: &str = "adversarial-labels-idx1-ubyte";

/// A trained classifier of either kind.
#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    PcaDra(PcaDraClassifier),
    Cqc(CqcModel),
}

impl Model {
    pub fn with_noise(&self, noise: Option<NoiseModel>) -> Model {
        match self {
            Model::PcaDra(m) => Model::PcaDra(m.with_noise(noise)),
            Model::Cqc(m) => Model::Cqc(m.with_noise(noise)),
        }
    }

    pub fn param_count(&self) -> usize {
        match self {
            Model::PcaDra(m) => m.dra.theta.iter().map(Vec::len).sum(),
            Model::Cqc(m) => m.param_count(),
        }
    }
}

impl Classifier for Model {
    fn num_classes(&self) -> usize {
        match self {
            Model::PcaDra(m) => m.num_classes(),
            Model::Cqc(m) => m.num_classes(),
        }
    }

    fn probabilities(&self, image: &ImageTensor) -> Result<Vec<f64>> {
        match self {
            Model::PcaDra(m) => m.probabilities(image),
            Model::Cqc(m) => m.probabilities(image),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    digits: Vec<u8>,
    classifier: SavedClassifier,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum SavedClassifier {
    PcaDra { pca_file: String, feature_scale: Vec<f64>, dra: DraModel },
    Cqc { model: CqcModel },
}

/// Writes `model.json` (and `pca.bin` for PCA models). Noise is not stored.
pub fn save_model(layout: &Layout, model: &Model, digits: &[u8]) -> Result<()> {
    let classifier = match model.with_noise(None) {
        Model::PcaDra(m) => {
            std::fs::write(layout.path(PCA_FILE), m.pca.to_bytes())?;
            SavedClassifier::PcaDra {
                pca_file: PCA_FILE.into(),
                feature_scale: m.feature_scale,
                dra: m.dra,
            }
        }
        Model::Cqc(m) => SavedClassifier::Cqc { model: m },
    };
    let file = ModelFile {
        format: MODEL_FORMAT.into(),
        version: MODEL_VERSION,
        digits: digits.to_vec(),
        classifier,
    };
    write_json(&layout.path(MODEL_FILE), &file)
}

pub fn load_model(layout: &Layout) -> Result<(Model, Vec<u8>)> {
    let path = layout.path(MODEL_FILE);
    let text = std::fs::read_to_string(&path).map_err(|e| Error::Config(format!("cannot read model {}: {e}; run `train` first", path.display())))?;
    let file: ModelFile = serde_json::from_str(&text).map_err(|e| Error::format(0, format!("{}: {e}", path.display())))?;
    if file.format != MODEL_FORMAT || file.version != MODEL_VERSION {
        return Err(Error::format(0, format!("unsupported model format {} v{}", file.format, file.version)));
    }
    let model = match file.classifier {
        SavedClassifier::PcaDra { pca_file, feature_scale, dra } => {
            let pca = PcaModel::from_bytes(&std::fs::read(layout.path(&pca_file))?)?;
            Model::PcaDra(PcaDraClassifier::new(pca, feature_scale, dra)?)
        }
        SavedClassifier::Cqc { model } => {
            model.validate()?;
            Model::Cqc(model)
        }
    };
    Ok((model, file.digits))
}

/// Builds a dataset from IDX payloads whose labels are digits drawn from `digits`.
pub fn dataset_from_idx(images: &[u8], labels: &[u8], digits: &[u8]) -> Result<LabeledDataset> {
    let images = mnist::parse_idx_images(images)?;
    let raw = mnist::parse_idx_labels(labels)?;
    if images.len() != raw.len() {
        return Err(Error::format(4, format!("{} images but {} labels", images.len(), raw.len())));
    }
    let class_map: BTreeMap<u8, usize> = digits.iter().enumerate().map(|(c, d)| (*d, c)).collect();
    let labels = raw
        .iter()
        .enumerate()
        .map(|(i, d)| {
            class_map
                .get(d)
                .copied()
                .ok_or_else(|| Error::format(8 + i as u64, format!("digit {d} is not in {digits:?}")))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(LabeledDataset { images, labels, class_map })
}

fn timed<T>(layout: &Layout, command: &str, f: impl FnOnce() -> Result<T>) -> Result<T> {
    let start = Instant::now();
    let out = f()?;
    report::append_timing(&layout.path("timing.jsonl"), command, start.elapsed().as_secs_f64())?;
    Ok(out)
}

/// Runs `f` on a pool sized by `config.threads`.
pub fn with_pool<T: Send>(config: &ExperimentConfig, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = config.threads {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    pool.install(f)
}

fn layout_for(config: &ExperimentConfig) -> Result<Layout> {
    std::fs::create_dir_all(&config.out_dir)?;
    Ok(Layout::new(&config.out_dir))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrepareSummary {
    pub tool: String,
    pub digits: Vec<u8>,
    pub train_size: usize,
    pub test_size: usize,
    pub train_class_counts: Vec<usize>,
    pub test_class_counts: Vec<usize>,
    pub pca_explained_variance_ratio: Option<Vec<f64>>,
}

fn class_counts(d: &LabeledDataset) -> Vec<usize> {
    let mut c = vec![0; d.num_classes()];
    d.labels.iter().for_each(|l| c[*l] += 1);
    c
}

/// Extracts the configured splits into the output directory and, for PCA
/// models, fits PCA on the training split.
pub fn cmd_prepare(config: &ExperimentConfig) -> Result<PrepareSummary> {
    let layout = layout_for(config)?;
    timed(&layout, "prepare", || {
        let digits = config.data.digit_set();
        let classes = digits.len();
        let d = &config.data;
        let train = mnist::load_subset(
            &d.train_images,
            &d.train_labels,
            &digits,
            Some(d.train_size / classes),
            seed::derive(config.seed, "split/train"),
        )?;
        let test = mnist::load_subset(
            &d.test_images,
            &d.test_labels,
            &digits,
            Some(d.test_size / classes),
            seed::derive(config.seed, "split/test"),
        )?;
        for (data, images, labels) in [(&train, TRAIN_IMAGES, TRAIN_LABELS), (&test, TEST_IMAGES, TEST_LABELS)] {
            std::fs::write(layout.path(images), mnist::write_idx_images(&data.images)?)?;
            std::fs::write(layout.path(labels), mnist::write_idx_labels(&data.digit_labels())?)?;
        }
        let ratio = match &config.classifier {
            ClassifierConfig::PcaDra(spec) => {
                let pca = PcaModel::fit(&train, spec.pca, spec.components, spec.kernel_gamma)?;
                std::fs::write(layout.path(PCA_FILE), pca.to_bytes())?;
                Some(pca.explained_variance_ratio())
            }
            ClassifierConfig::Cqc(_) => None,
        };
        let summary = PrepareSummary {
            tool: TOOL_VERSION.into(),
            digits: config.data.digits.clone(),
            train_size: train.len(),
            test_size: test.len(),
            train_class_counts: class_counts(&train),
            test_class_counts: class_counts(&test),
            pca_explained_variance_ratio: ratio,
        };
        write_json(&layout.path("prepare.json"), &summary)?;
        Ok(summary)
    })
}

fn sorted_digits(config: &ExperimentConfig) -> Vec<u8> {
    config.data.digit_set().into_iter().collect()
}

/// Prepared train and test splits, running `prepare` first if they are missing.
pub fn load_splits(config: &ExperimentConfig) -> Result<(LabeledDataset, LabeledDataset)> {
    let layout = layout_for(config)?;
    let needed = [TRAIN_IMAGES, TRAIN_LABELS, TEST_IMAGES, TEST_LABELS];
    let pca_missing = matches!(config.classifier, ClassifierConfig::PcaDra(_)) && !layout.path(PCA_FILE).is_file();
    if pca_missing || needed.iter().any(|n| !layout.path(n).is_file()) {
        log::info!("prepared data missing in {}, running prepare", layout.root().display());
        cmd_prepare(config)?;
    }
    let digits = sorted_digits(config);
    let read = |name: &str| std::fs::read(layout.path(name));
    let train = dataset_from_idx(&read(TRAIN_IMAGES)?, &read(TRAIN_LABELS)?, &digits)?;
    let test = dataset_from_idx(&read(TEST_IMAGES)?, &read(TEST_LABELS)?, &digits)?;
    Ok((train, test))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSummary {
    pub tool: String,
    pub config: serde_json::Value,
    pub param_count: usize,
    pub train_accuracy: f64,
    pub train_cross_entropy: f64,
    pub best_fitness: f64,
    pub generations: usize,
    pub evaluations: usize,
    /// `"stagnated"` or `"max_iters"`.
    pub status: String,
}

pub fn cmd_train(config: &ExperimentConfig) -> Result<TrainSummary> {
    let layout = layout_for(config)?;
    let (train_set, _) = load_splits(config)?;
    timed(&layout, "train", || {
        let noise = if config.train.noisy { config.noise.model()? } else { None };
        let genes = config.classifier.param_count(train_set.num_classes());
        let ga = config.train.ga(genes, config.seed);
        let (model, outcome, acc, ce) = match &config.classifier {
            ClassifierConfig::PcaDra(spec) => {
                let pca = PcaModel::from_bytes(&std::fs::read(layout.path(PCA_FILE))?)?;
                if pca.output_dim() != spec.components || pca.kind() != spec.pca {
                    return Err(Error::Config("pca.bin does not match the classifier section; rerun prepare".into()));
                }
                let scale = if spec.whiten {
                    PcaDraClassifier::whitening_scale(&pca)
                } else {
                    vec![1.0; spec.components]
                };
                let Trained {
                    model,
                    outcome,
                    train_accuracy,
                    train_cross_entropy,
                } = train::train_pca_dra(&train_set, pca, scale, spec, &ga, noise, &InitKind::UniformBounds)?;
                (Model::PcaDra(model), outcome, train_accuracy, train_cross_entropy)
            }
            ClassifierConfig::Cqc(spec) => {
                let Trained {
                    model,
                    outcome,
                    train_accuracy,
                    train_cross_entropy,
                } = train::train_cqc(&train_set, spec, &ga, noise, &InitKind::UniformBounds)?;
                (Model::Cqc(model), outcome, train_accuracy, train_cross_entropy)
            }
        };
        if !outcome.stopped_by_stagnation {
            log::warn!("training reached max_iters ({}) without stagnating", config.train.max_iters);
        }
        save_model(&layout, &model, &sorted_digits(config))?;
        let mut history = Vec::new();
        write_history(&mut history, &outcome.history)?;
        std::fs::write(layout.path("history.tsv"), history)?;
        let summary = TrainSummary {
            tool: TOOL_VERSION.into(),
            config: config.snapshot()?,
            param_count: model.param_count(),
            train_accuracy: acc,
            train_cross_entropy: ce,
            best_fitness: outcome.best.fitness.unwrap_or(f64::NAN),
            generations: outcome.generations,
            evaluations: outcome.evaluations,
            status: if outcome.stopped_by_stagnation { "stagnated" } else { "max_iters" }.into(),
        };
        write_json(&layout.path("train.json"), &summary)?;
        Ok(summary)
    })
}

/// One evaluated test sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    /// `"exact"` or `"shots"`.
    pub mode: String,
    pub index: usize,
    #[serde(flatten)]
    pub record: PredictionRecord,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub tool: String,
    pub config: serde_json::Value,
    pub samples: usize,
    pub exact_accuracy: f64,
    pub shots: Option<u64>,
    pub shot_accuracy: Option<f64>,
}

fn noisy_model(config: &ExperimentConfig, layout: &Layout) -> Result<Model> {
    let (model, digits) = load_model(layout)?;
    if digits != sorted_digits(config) {
        return Err(Error::Config(format!(
            "model was trained on digits {digits:?}, config has {:?}",
            config.data.digits
        )));
    }
    Ok(model.with_noise(config.noise.model()?))
}

fn eval_rows(mode: &str, records: Vec<PredictionRecord>) -> Vec<EvalRow> {
    records
        .into_iter()
        .enumerate()
        .map(|(index, record)| EvalRow {
            mode: mode.into(),
            index,
            record,
        })
        .collect()
}

fn accuracy_of(records: &[PredictionRecord]) -> f64 {
    records.iter().filter(|r| r.correct()).count() as f64 / records.len() as f64
}

pub fn cmd_eval(config: &ExperimentConfig) -> Result<EvalSummary> {
    let layout = layout_for(config)?;
    let (_, test) = load_splits(config)?;
    timed(&layout, "eval", || {
        let model = noisy_model(config, &layout)?;
        let exact = evaluate(&model, &test, None)?;
        let mut rows = eval_rows("exact", exact.records);
        let shot_accuracy = match config.eval.shots {
            Some(shots) => {
                let e = evaluate(
                    &model,
                    &test,
                    Some(Shots {
                        shots,
                        seed: seed::derive(config.seed, "eval/shots"),
                    }),
                )?;
                rows.extend(eval_rows("shots", e.records));
                Some(e.accuracy)
            }
            None => None,
        };
        write_jsonl(&layout.path("eval.jsonl"), &rows)?;
        let mut table = Table::new(&["mode", "index", "truth", "predicted", "correct", "p_a", "p_b", "r_f"]);
        for r in &rows {
            let rec = &r.record;
            table.row(&[
                &r.mode,
                &r.index,
                &rec.truth,
                &rec.predicted,
                &rec.correct(),
                &rec.p_a,
                &rec.p_b,
                &rec.r_f_or_zero(),
            ]);
        }
        table.write(&layout.path("eval.tsv"))?;
        let summary = EvalSummary {
            tool: TOOL_VERSION.into(),
            config: config.snapshot()?,
            samples: test.len(),
            exact_accuracy: exact.accuracy,
            shots: config.eval.shots,
            shot_accuracy,
        };
        write_json(&layout.path("eval.json"), &summary)?;
        Ok(summary)
    })
}

pub fn read_eval_rows(layout: &Layout) -> Result<Vec<EvalRow>> {
    report::read_jsonl(&layout.path("eval.jsonl"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackReport {
    pub tool: String,
    pub config: serde_json::Value,
    pub attacked: usize,
    /// Accuracy on the unmodified seed images.
    pub clean_accuracy: f64,
    /// Accuracy on the adversarial images.
    pub adversarial_accuracy: f64,
    /// Accuracy after rounding the adversarial images to 8-bit pixels, as stored.
    pub stored_adversarial_accuracy: f64,
    pub successes: usize,
    pub mean_perturbation_successful: Option<f64>,
    pub mean_perturbation: f64,
    pub mean_rmse: f64,
    pub classifier_calls: u64,
}

fn mean(v: impl Iterator<Item = f64>) -> Option<f64> {
    let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    (n > 0).then(|| s / n as f64)
}

pub fn cmd_attack(config: &ExperimentConfig) -> Result<AttackReport> {
    let layout = layout_for(config)?;
    let (_, test) = load_splits(config)?;
    timed(&layout, "attack", || {
        let model = noisy_model(config, &layout)?;
        let n = config.attack.samples.min(test.len());
        let results = (0..n)
            .into_par_iter()
            .map(|i| {
                let image = &test.images[i];
                let cfg = config.attack.config(image.len(), config.seed, i);
                attack::generate(&model, image, test.labels[i], &cfg)
            })
            .collect::<Result<Vec<_>>>()?;
        let adversarial: Vec<ImageTensor> = results.iter().map(|r| r.adversarial.clone()).collect();
        let digits = test.digits();
        std::fs::write(layout.path(ADV_IMAGES), mnist::write_idx_images(&adversarial)?)?;
        std::fs::write(
            layout.path(ADV_LABELS),
            mnist::write_idx_labels(&results.iter().map(|r| digits[r.truth]).collect::<Vec<_>>())?,
        )?;

        let stored = dataset_from_idx(&std::fs::read(layout.path(ADV_IMAGES))?, &std::fs::read(layout.path(ADV_LABELS))?, &digits)?;
        let stored_accuracy = evaluate(&model, &stored, None)?.accuracy;
        let clean = LabeledDataset {
            images: test.images[..n].to_vec(),
            labels: test.labels[..n].to_vec(),
            class_map: test.class_map.clone(),
        };
        let clean_accuracy = evaluate(&model, &clean, None)?.accuracy;

        let summaries: Vec<AttackSummary> = results.iter().enumerate().map(|(i, r)| r.summary(i)).collect();
        write_jsonl(&layout.path("attack.jsonl"), &summaries)?;
        let mut table = Table::new(&[
            "index",
            "truth",
            "target",
            "predicted",
            "success",
            "fitness",
            "p_adv",
            "rmse",
            "perturbation",
            "generations",
            "calls",
        ]);
        for s in &summaries {
            table.row(&[
                &s.index,
                &s.truth,
                &s.target,
                &s.predicted,
                &s.success,
                &s.fitness,
                &s.p_adv,
                &s.rmse,
                &s.avg_pixel_perturbation,
                &s.generations_used,
                &s.classifier_calls,
            ]);
        }
        table.write(&layout.path("attack.tsv"))?;
        let report = AttackReport {
            tool: TOOL_VERSION.into(),
            config: config.snapshot()?,
            attacked: n,
            clean_accuracy,
            adversarial_accuracy: attack::adversarial_accuracy(&results)?,
            stored_adversarial_accuracy: stored_accuracy,
            successes: summaries.iter().filter(|s| s.success).count(),
            mean_perturbation_successful: mean(summaries.iter().filter(|s| s.success).map(|s| s.avg_pixel_perturbation)),
            mean_perturbation: mean(summaries.iter().map(|s| s.avg_pixel_perturbation)).unwrap_or(0.0),
            mean_rmse: mean(summaries.iter().map(|s| s.rmse)).unwrap_or(0.0),
            classifier_calls: summaries.iter().map(|s| s.classifier_calls).sum(),
        };
        write_json(&layout.path("attack.json"), &report)?;
        Ok(report)
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertifySummary {
    pub tool: String,
    pub config: serde_json::Value,
    pub level: f64,
    pub records: usize,
    pub accuracy: f64,
    pub certified: usize,
    pub uncertified: usize,
    pub certified_error_rate: Option<f64>,
    pub uncertified_error_rate: Option<f64>,
    pub curve: Vec<(f64, f64)>,
}

/// Certifies the shot-mode records of the last `eval` run.
pub fn cmd_certify(config: &ExperimentConfig) -> Result<CertifySummary> {
    let layout = layout_for(config)?;
    timed(&layout, "certify", || {
        let rows: Vec<EvalRow> = read_eval_rows(&layout)
            .map_err(|e| Error::Config(format!("cannot read eval.jsonl ({e}); run `eval` with shots first")))?
            .into_iter()
            .filter(|r| r.mode == "shots")
            .collect();
        if rows.is_empty() {
            return Err(Error::Config("eval.jsonl has no shot-mode records; set eval.shots or pass --shots".into()));
        }
        let c = &config.certify;
        let certified = rows
            .par_iter()
            .map(|r| certify_record(&r.record, c.level, c.depolarizing).map(|record| EvalRow { record, ..r.clone() }))
            .collect::<Result<Vec<_>>>()?;
        let records: Vec<PredictionRecord> = certified.iter().map(|r| r.record.clone()).collect();
        write_jsonl(&layout.path("certify.jsonl"), &certified)?;
        let mut table = Table::new(&["index", "p_a", "p_b", "r_f", "r_dp", "certified", "correct"]);
        for r in &certified {
            let rec = &r.record;
            table.row(&[
                &r.index,
                &rec.p_a,
                &rec.p_b,
                &rec.r_f_or_zero(),
                &report::Opt(rec.r_dp),
                &rec.certified(),
                &rec.correct(),
            ]);
        }
        table.write(&layout.path("certify.tsv"))?;
        let curve = c
            .epsilons
            .iter()
            .map(|e| Ok((*e, certified_accuracy(&records, *e)?)))
            .collect::<Result<Vec<_>>>()?;
        let mut curve_table = Table::new(&["epsilon", "certified_accuracy"]);
        for (e, a) in &curve {
            curve_table.row(&[e, a]);
        }
        curve_table.write(&layout.path("certify_curve.tsv"))?;
        let (ce, ue) = error_rates(&records);
        let n_cert = records.iter().filter(|r| r.certified()).count();
        let summary = CertifySummary {
            tool: TOOL_VERSION.into(),
            config: config.snapshot()?,
            level: c.level,
            records: records.len(),
            accuracy: accuracy_of(&records),
            certified: n_cert,
            uncertified: records.len() - n_cert,
            certified_error_rate: ce,
            uncertified_error_rate: ue,
            curve,
        };
        write_json(&layout.path("certify.json"), &summary)?;
        Ok(summary)
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub channel: ChannelKind,
    pub probability: f64,
    pub accuracy: f64,
    pub mean_p_a: f64,
    /// Mean `r_DP` at this rate; depolarizing rows only.
    pub mean_r_dp: Option<f64>,
}

/// Accuracy under each configured channel at each grid probability, applied after every gate.
pub fn cmd_noise_sweep(config: &ExperimentConfig) -> Result<Vec<SweepRow>> {
    let layout = layout_for(config)?;
    let (_, test) = load_splits(config)?;
    timed(&layout, "noise-sweep", || {
        let (model, _) = load_model(&layout)?;
        let mut rows = Vec::new();
        for &kind in &config.sweep.channels {
            for &p in &config.sweep.grid {
                let noisy = model.with_noise(Some(NoiseModel::single(NoiseChannel::new(kind, p)?)));
                let e = evaluate(&noisy, &test, None)?;
                let mean_r_dp = match kind {
                    ChannelKind::Depolarizing if p < 1.0 => mean(
                        e.records
                            .iter()
                            .filter(|r| r.p_a > 0.0 && r.p_a < 1.0)
                            .map(|r| robustness::depolarization_radius(p, r.p_a))
                            .collect::<Result<Vec<_>>>()?
                            .into_iter(),
                    ),
                    _ => None,
                };
                rows.push(SweepRow {
                    channel: kind,
                    probability: p,
                    accuracy: e.accuracy,
                    mean_p_a: mean(e.records.iter().map(|r| r.p_a)).unwrap_or(0.0),
                    mean_r_dp,
                });
            }
        }
        write_jsonl(&layout.path("sweep.jsonl"), &rows)?;
        let mut table = Table::new(&["channel", "probability", "accuracy", "mean_p_a", "mean_r_dp"]);
        for r in &rows {
            table.row(&[&r.channel, &r.probability, &r.accuracy, &r.mean_p_a, &report::Opt(r.mean_r_dp)]);
        }
        table.write(&layout.path("sweep.tsv"))?;
        Ok(rows)
    })
}

/// Subcommands in pipeline order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Prepare,
    Train,
    Eval,
    Attack,
    Certify,
    NoiseSweep,
}

/// Runs one command on the configured thread pool and returns its summary as JSON.
pub fn run(command: Command, config: &ExperimentConfig) -> Result<serde_json::Value> {
    fn json<T: Serialize>(v: T) -> Result<serde_json::Value> {
        serde_json::to_value(v).map_err(|e| Error::evaluation(e.to_string()))
    }
    with_pool(config, || match command {
        Command::Prepare => json(cmd_prepare(config)?),
        Command::Train => json(cmd_train(config)?),
        Command::Eval => json(cmd_eval(config)?),
        Command::Attack => json(cmd_attack(config)?),
        Command::Certify => json(cmd_certify(config)?),
        Command::NoiseSweep => json(cmd_noise_sweep(config)?),
    })
}
