//! Genetic training of classifier weights.
//!
//! Fitness is the negative mean cross-entropy of the true class on the
//! training split plus `1e-6 ×` training accuracy as a tie-break.

use serde::{Deserialize, Serialize};

use crate::classifier::PcaDraClassifier;
use crate::cqc::{CqcModel, Head};
use crate::dra::{argmax, label_states, Ansatz, DraModel};
use crate::error::{Error, Result};
use crate::evolve::{self, GaConfig, GaOutcome, InitKind};
use crate::features::{PcaKind, PcaModel};
use crate::mnist::LabeledDataset;
use crate::qsim::NoiseModel;

const PROB_FLOOR: f64 = 1e-12;
const ACCURACY_WEIGHT: f64 = 1e-6;

/// Accumulates cross-entropy and accuracy over a split.
#[derive(Debug, Default, Clone, Copy)]
pub struct LossTally {
    total_ce: f64,
    correct: usize,
    count: usize,
}

impl LossTally {
    pub fn add(&mut self, probabilities: &[f64], truth: usize) {
        self.total_ce -= probabilities[truth].max(PROB_FLOOR).ln();
        self.correct += usize::from(argmax(probabilities) == truth);
        self.count += 1;
    }

    pub fn mean_cross_entropy(&self) -> f64 {
        self.total_ce / self.count as f64
    }

    pub fn accuracy(&self) -> f64 {
        self.correct as f64 / self.count as f64
    }

    pub fn fitness(&self) -> f64 {
        -self.mean_cross_entropy() + ACCURACY_WEIGHT * self.accuracy()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaDraSpec {
    pub pca: PcaKind,
    pub components: usize,
    #[serde(default)]
    pub kernel_gamma: Option<f64>,
    #[serde(default = "default_true")]
    pub whiten: bool,
    #[serde(default = "default_layers")]
    pub layers: usize,
    #[serde(default)]
    pub ansatz: Ansatz,
    #[serde(default)]
    pub tied: Option<usize>,
}

fn default_true() -> bool {
    true
}

fn default_layers() -> usize {
    7
}

impl PcaDraSpec {
    pub fn param_count(&self) -> usize {
        DraModel::param_count(self.layers, self.components, self.tied)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CqcSpec {
    /// Re-upload depth of the 28×28 → 7×7 and 7×7 → 3×3 layers.
    pub depths: [usize; 2],
    #[serde(default)]
    pub head: Head,
}

impl CqcSpec {
    pub fn param_count(&self, num_classes: usize) -> usize {
        CqcModel::param_count_for(&CqcModel::two_layer_spec(self.depths), self.head, num_classes)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trained<M> {
    pub model: M,
    pub outcome: GaOutcome,
    pub train_accuracy: f64,
    pub train_cross_entropy: f64,
}

fn check_genome_len(ga: &GaConfig, need: usize) -> Result<()> {
    if ga.genome_len() != need {
        return Err(Error::invalid(format!(
            "GA bounds cover {} genes, model has {need} parameters",
            ga.genome_len()
        )));
    }
    Ok(())
}

/// Fits PCA on the training images and the per-component feature scale.
pub fn fit_features(train: &LabeledDataset, spec: &PcaDraSpec) -> Result<(PcaModel, Vec<f64>)> {
    let pca = PcaModel::fit(train, spec.pca, spec.components, spec.kernel_gamma)?;
    let scale = if spec.whiten {
        PcaDraClassifier::whitening_scale(&pca)
    } else {
        vec![1.0; spec.components]
    };
    Ok((pca, scale))
}

pub fn train_pca_dra(
    train: &LabeledDataset,
    pca: PcaModel,
    feature_scale: Vec<f64>,
    spec: &PcaDraSpec,
    ga: &GaConfig,
    noise: Option<NoiseModel>,
    init: &InitKind,
) -> Result<Trained<PcaDraClassifier>> {
    check_genome_len(ga, spec.param_count())?;
    if train.is_empty() {
        return Err(Error::EmptyDataset("training split is empty".into()));
    }
    let labels = label_states(train.num_classes())?;
    let shell = PcaDraClassifier::new(
        pca,
        feature_scale,
        DraModel::from_genome(
            spec.ansatz,
            spec.layers,
            spec.components,
            spec.tied,
            &vec![0.0; spec.param_count()],
            labels.clone(),
            noise.clone(),
        )?,
    )?;
    let features = train.images.iter().map(|im| shell.features(im)).collect::<Result<Vec<_>>>()?;
    let tally = |genome: &[f64]| -> Result<LossTally> {
        let dra = DraModel::from_genome(spec.ansatz, spec.layers, spec.components, spec.tied, genome, labels.clone(), noise.clone())?;
        let mut t = LossTally::default();
        for (f, &y) in features.iter().zip(&train.labels) {
            t.add(&dra.forward(f)?, y);
        }
        Ok(t)
    };
    let outcome = evolve::run(ga, |g: &[f64]| Ok(tally(g)?.fitness()), init)?;
    let best = tally(&outcome.best.genome)?;
    let dra = DraModel::from_genome(spec.ansatz, spec.layers, spec.components, spec.tied, &outcome.best.genome, labels, noise)?;
    Ok(Trained {
        model: PcaDraClassifier { dra, ..shell },
        train_accuracy: best.accuracy(),
        train_cross_entropy: best.mean_cross_entropy(),
        outcome,
    })
}

pub fn train_cqc(train: &LabeledDataset, spec: &CqcSpec, ga: &GaConfig, noise: Option<NoiseModel>, init: &InitKind) -> Result<Trained<CqcModel>> {
    let classes = train.num_classes();
    check_genome_len(ga, spec.param_count(classes))?;
    if train.is_empty() {
        return Err(Error::EmptyDataset("training split is empty".into()));
    }
    let build = |genome: &[f64]| CqcModel::from_genome(CqcModel::two_layer_spec(spec.depths), spec.head, classes, genome, noise.clone());
    let shell = build(&vec![0.0; ga.genome_len()])?;
    let inputs = train.images.iter().map(|im| shell.prepare(im)).collect::<Result<Vec<_>>>()?;
    let tally = |genome: &[f64]| -> Result<LossTally> {
        let model = build(genome)?;
        let mut t = LossTally::default();
        for (input, &y) in inputs.iter().zip(&train.labels) {
            t.add(&model.forward_prepared(input)?, y);
        }
        Ok(t)
    };
    let outcome = evolve::run(ga, |g: &[f64]| Ok(tally(g)?.fitness()), init)?;
    let best = tally(&outcome.best.genome)?;
    Ok(Trained {
        model: build(&outcome.best.genome)?,
        train_accuracy: best.accuracy(),
        train_cross_entropy: best.mean_cross_entropy(),
        outcome,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tally_values() {
        let mut t = LossTally::default();
        t.add(&[0.5, 0.5], 0);
        t.add(&[0.0, 1.0], 0);
        assert_eq!(t.accuracy(), 0.5);
        let ce = (-(0.5f64).ln() - PROB_FLOOR.ln()) / 2.0;
        assert!((t.mean_cross_entropy() - ce).abs() < 1e-12);
        assert!((t.fitness() - (-ce + 0.5e-6)).abs() < 1e-12);
    }
}
