//! The black-box classifier surface shared by evaluation, training and attacks.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dra::{argmax, DraModel};
use crate::error::{Error, Result};
use crate::features::PcaModel;
use crate::mnist::{ImageTensor, LabeledDataset};
use crate::qsim::{sample_counts, NoiseModel};
use crate::robustness::PredictionRecord;
use crate::seed;

/// Anything that maps an image to a class probability vector.
pub trait Classifier: Sync {
    fn num_classes(&self) -> usize;

    fn probabilities(&self, image: &ImageTensor) -> Result<Vec<f64>>;

    fn predict(&self, image: &ImageTensor) -> Result<usize> {
        Ok(argmax(&self.probabilities(image)?))
    }
}

impl<C: Classifier + ?Sized> Classifier for &C {
    fn num_classes(&self) -> usize {
        (**self).num_classes()
    }

    fn probabilities(&self, image: &ImageTensor) -> Result<Vec<f64>> {
        (**self).probabilities(image)
    }
}

/// PCA features, optionally rescaled per component, fed to a DRA model.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaDraClassifier {
    pub pca: PcaModel,
    /// Multiplies each PCA coordinate before it reaches the circuit.
    pub feature_scale: Vec<f64>,
    pub dra: DraModel,
}

impl PcaDraClassifier {
    pub fn new(pca: PcaModel, feature_scale: Vec<f64>, dra: DraModel) -> Result<Self> {
        if feature_scale.len() != pca.output_dim() || dra.feature_dim() != pca.output_dim() {
            return Err(Error::invalid(format!(
                "PCA emits {} features, scale has {}, DRA expects {}",
                pca.output_dim(),
                feature_scale.len(),
                dra.feature_dim()
            )));
        }
        Ok(PcaDraClassifier { pca, feature_scale, dra })
    }

    /// `1/√variance` per component, giving unit-variance features on the fit data.
    pub fn whitening_scale(pca: &PcaModel) -> Vec<f64> {
        pca.explained_variance().iter().map(|v| if *v > 0.0 { 1.0 / v.sqrt() } else { 1.0 }).collect()
    }

    pub fn features(&self, image: &ImageTensor) -> Result<Vec<f64>> {
        let mut f = self.pca.transform(image)?;
        f.iter_mut().zip(&self.feature_scale).for_each(|(x, s)| *x *= s);
        Ok(f)
    }

    pub fn with_noise(&self, noise: Option<NoiseModel>) -> Self {
        PcaDraClassifier {
            dra: self.dra.with_noise(noise),
            ..self.clone()
        }
    }
}

impl Classifier for PcaDraClassifier {
    fn num_classes(&self) -> usize {
        self.dra.num_classes()
    }

    fn probabilities(&self, image: &ImageTensor) -> Result<Vec<f64>> {
        self.dra.forward(&self.features(image)?)
    }
}

/// Finite-shot readout: `shots` samples per input, seeded per sample index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Shots {
    pub shots: u64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub accuracy: f64,
    pub records: Vec<PredictionRecord>,
}

/// Classifies every sample of `dataset`. With `shots`, each probability vector is
/// replaced by the empirical frequencies of a multinomial draw.
pub fn evaluate<C: Classifier + ?Sized>(classifier: &C, dataset: &LabeledDataset, shots: Option<Shots>) -> Result<Evaluation> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset("nothing to evaluate".into()));
    }
    let records = dataset
        .images
        .par_iter()
        .zip(dataset.labels.par_iter())
        .enumerate()
        .map(|(i, (image, &truth))| {
            let exact = classifier.probabilities(image)?;
            match shots {
                None => PredictionRecord::from_probabilities(exact, None, truth),
                Some(s) => {
                    let counts = sample_counts(&exact, s.shots, seed::derive_indexed(s.seed, "shots", i as u64))?;
                    let est = counts.iter().map(|c| *c as f64 / s.shots as f64).collect();
                    PredictionRecord::from_probabilities(est, Some(counts), truth)
                }
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let correct = records.iter().filter(|r| r.correct()).count();
    Ok(Evaluation {
        accuracy: correct as f64 / records.len() as f64,
        records,
    })
}
