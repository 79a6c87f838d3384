//! Black-box genetic adversarial attack.
//!
//! Genomes are images on the 0–255 pixel scale. Fitness is
//! `w0·p_adv − w1·RMSE/255`, where `p_adv` is the classifier's probability of
//! the adversarial class. The classifier is only ever asked for probabilities.

use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

use crate::classifier::Classifier;
use crate::dra::argmax;
use crate::error::{Error, Result};
use crate::evolve::{self, GaConfig, InitKind};
use crate::mnist::ImageTensor;

pub const PIXEL_SCALE: f64 = 255.0;

/// Default mutation scale for pixel genomes, in 0–255 units.
pub const DEFAULT_PIXEL_SIGMA: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetMode {
    /// A fixed adversarial class.
    Class(usize),
    /// `(truth + 1) mod C`.
    NextClass,
    /// The most probable wrong class of each candidate.
    Untargeted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackConfig {
    pub target: TargetMode,
    pub w0: f64,
    pub w1: f64,
    pub ga: GaConfig,
}

impl AttackConfig {
    /// 200 individuals, at most 500 generations, `w0 = w1 = 1`, next-class target.
    pub fn new(pixels: usize, seed: u64) -> Self {
        let mut ga = GaConfig::with_uniform_bounds(pixels, 0.0, PIXEL_SCALE, seed);
        ga.mutation_sigma = DEFAULT_PIXEL_SIGMA;
        AttackConfig {
            target: TargetMode::NextClass,
            w0: 1.0,
            w1: 1.0,
            ga,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.w0 >= 0.0 && self.w1 >= 0.0 && self.w0.is_finite() && self.w1.is_finite()) {
            return Err(Error::invalid(format!("weights must be finite and >= 0, got w0={} w1={}", self.w0, self.w1)));
        }
        self.ga.validate()
    }

    fn resolve_target(&self, truth: usize, classes: usize) -> Result<Option<usize>> {
        match self.target {
            TargetMode::Class(t) if t == truth => Err(Error::invalid(format!("target class {t} equals the true label"))),
            TargetMode::Class(t) if t >= classes => Err(Error::invalid(format!("target class {t} out of range for {classes} classes"))),
            TargetMode::Class(t) => Ok(Some(t)),
            TargetMode::NextClass => Ok(Some((truth + 1) % classes)),
            TargetMode::Untargeted => Ok(None),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdversarialResult {
    pub adversarial: ImageTensor,
    pub seed_image: ImageTensor,
    pub truth: usize,
    /// Adversarial class scored for the returned image.
    pub target: usize,
    pub predicted: usize,
    pub fitness: f64,
    pub p_adv: f64,
    pub rmse: f64,
    pub avg_pixel_perturbation: f64,
    pub generations_used: usize,
    pub success: bool,
    pub classifier_calls: u64,
}

/// Per-attack numbers for sidecar reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackSummary {
    pub index: usize,
    pub truth: usize,
    pub target: usize,
    pub predicted: usize,
    pub success: bool,
    pub fitness: f64,
    pub p_adv: f64,
    pub rmse: f64,
    pub avg_pixel_perturbation: f64,
    pub generations_used: usize,
    pub classifier_calls: u64,
}

impl AdversarialResult {
    pub fn summary(&self, index: usize) -> AttackSummary {
        AttackSummary {
            index,
            truth: self.truth,
            target: self.target,
            predicted: self.predicted,
            success: self.success,
            fitness: self.fitness,
            p_adv: self.p_adv,
            rmse: self.rmse,
            avg_pixel_perturbation: self.avg_pixel_perturbation,
            generations_used: self.generations_used,
            classifier_calls: self.classifier_calls,
        }
    }
}

fn check_shapes(a: &ImageTensor, b: &ImageTensor) -> Result<()> {
    if !a.same_shape(b) {
        return Err(Error::invalid(format!(
            "shape mismatch {}x{} vs {}x{}",
            a.height(),
            a.width(),
            b.height(),
            b.width()
        )));
    }
    Ok(())
}

/// Root mean squared pixel difference on the 0–255 scale.
pub fn rmse(a: &ImageTensor, b: &ImageTensor) -> Result<f64> {
    check_shapes(a, b)?;
    let sum: f64 = a.values().iter().zip(b.values()).map(|(x, y)| (PIXEL_SCALE * (x - y)).powi(2)).sum();
    Ok((sum / a.len() as f64).sqrt())
}

/// Mean of `|Δ|/255` over pixels.
pub fn perturbation_stats(seed_image: &ImageTensor, adversarial: &ImageTensor) -> Result<f64> {
    check_shapes(seed_image, adversarial)?;
    let sum: f64 = seed_image.values().iter().zip(adversarial.values()).map(|(x, y)| (x - y).abs()).sum();
    Ok(sum / seed_image.len() as f64)
}

fn adversarial_class(probs: &[f64], truth: usize, target: Option<usize>) -> usize {
    target.unwrap_or_else(|| {
        let mut masked = probs.to_vec();
        masked[truth] = f64::NEG_INFINITY;
        argmax(&masked)
    })
}

fn score(w0: f64, w1: f64, p_adv: f64, rmse: f64) -> f64 {
    w0 * p_adv - w1 * (rmse / PIXEL_SCALE)
}

/// `w0·p_adv − w1·rmse/255` for one candidate and its adversarial class.
pub fn fitness<C: Classifier + ?Sized>(classifier: &C, candidate: &ImageTensor, seed_image: &ImageTensor, target: usize, w0: f64, w1: f64) -> Result<f64> {
    let probs = classifier.probabilities(candidate)?;
    let p_adv = *probs
        .get(target)
        .ok_or_else(|| Error::evaluation(format!("classifier returned {} probabilities, target is {target}", probs.len())))?;
    Ok(score(w0, w1, p_adv, rmse(candidate, seed_image)?))
}

fn genome_to_image(genome: &[f64], height: usize, width: usize) -> Result<ImageTensor> {
    ImageTensor::new(height, width, genome.iter().map(|g| (g / PIXEL_SCALE).clamp(0.0, 1.0)).collect())
}

struct Counting<'a, C: ?Sized> {
    inner: &'a C,
    calls: AtomicU64,
}

impl<C: Classifier + ?Sized> Counting<'_, C> {
    fn probabilities(&self, image: &ImageTensor) -> Result<Vec<f64>> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        self.inner.probabilities(image)
    }
}

/// Attacks one seed image whose true class is `truth`.
pub fn generate<C: Classifier + ?Sized>(classifier: &C, seed_image: &ImageTensor, truth: usize, config: &AttackConfig) -> Result<AdversarialResult> {
    config.validate()?;
    let classes = classifier.num_classes();
    if truth >= classes {
        return Err(Error::invalid(format!("true label {truth} out of range for {classes} classes")));
    }
    if config.ga.genome_len() != seed_image.len() {
        return Err(Error::invalid(format!(
            "genome has {} genes, image has {} pixels",
            config.ga.genome_len(),
            seed_image.len()
        )));
    }
    let target = config.resolve_target(truth, classes)?;
    let counting = Counting {
        inner: classifier,
        calls: AtomicU64::new(0),
    };
    let (h, w) = (seed_image.height(), seed_image.width());

    let outcome = evolve::run(
        &config.ga,
        |genome: &[f64]| {
            let candidate = genome_to_image(genome, h, w)?;
            let probs = counting.probabilities(&candidate)?;
            if probs.len() != classes {
                return Err(Error::evaluation(format!("expected {classes} probabilities, got {}", probs.len())));
            }
            let adv = adversarial_class(&probs, truth, target);
            Ok(score(config.w0, config.w1, probs[adv], rmse(&candidate, seed_image)?))
        },
        &InitKind::UniformBounds,
    )?;

    let adversarial = genome_to_image(&outcome.best.genome, h, w)?;
    let probs = counting.probabilities(&adversarial)?;
    let predicted = argmax(&probs);
    let adv = adversarial_class(&probs, truth, target);
    let rmse = rmse(&adversarial, seed_image)?;
    Ok(AdversarialResult {
        fitness: score(config.w0, config.w1, probs[adv], rmse),
        p_adv: probs[adv],
        rmse,
        avg_pixel_perturbation: perturbation_stats(seed_image, &adversarial)?,
        generations_used: outcome.generations,
        success: match target {
            Some(t) => predicted == t,
            None => predicted != truth,
        },
        predicted,
        target: adv,
        truth,
        adversarial,
        seed_image: seed_image.clone(),
        classifier_calls: counting.calls.into_inner(),
    })
}

/// Fraction of adversarial images still assigned their true label.
pub fn adversarial_accuracy(results: &[AdversarialResult]) -> Result<f64> {
    if results.is_empty() {
        return Err(Error::EmptyDataset("no attack results".into()));
    }
    Ok(results.iter().filter(|r| r.predicted == r.truth).count() as f64 / results.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Constant(Vec<f64>);

    impl Classifier for Constant {
        fn num_classes(&self) -> usize {
            self.0.len()
        }

        fn probabilities(&self, _: &ImageTensor) -> Result<Vec<f64>> {
            Ok(self.0.clone())
        }
    }

    fn small_config(pixels: usize) -> AttackConfig {
        let mut c = AttackConfig::new(pixels, 5);
        c.ga.population_size = 20;
        c.ga.elite_k = 10;
        c.ga.max_iters = 30;
        c
    }

    #[test]
    fn rmse_examples() {
        let z = ImageTensor::zeros(28, 28);
        assert_eq!(rmse(&z, &z).unwrap(), 0.0);
        assert_eq!(rmse(&z, &ImageTensor::filled(28, 28, 1.0).unwrap()).unwrap(), 255.0);
        let mut v = vec![0.0; 784];
        v[3] = 1.0;
        let one = ImageTensor::new(28, 28, v).unwrap();
        assert!((rmse(&z, &one).unwrap() - 255.0 / 28.0).abs() < 1e-12);
        assert!(rmse(&z, &ImageTensor::zeros(3, 3)).is_err());
    }

    #[test]
    fn perturbation_examples() {
        let z = ImageTensor::zeros(4, 4);
        assert_eq!(perturbation_stats(&z, &z).unwrap(), 0.0);
        assert!((perturbation_stats(&z, &ImageTensor::filled(4, 4, 0.1).unwrap()).unwrap() - 0.1).abs() < 1e-15);
        assert_eq!(perturbation_stats(&z, &ImageTensor::filled(4, 4, 1.0).unwrap()).unwrap(), 1.0);
    }

    #[test]
    fn fitness_examples() {
        let c = Constant(vec![0.3, 0.7]);
        let seed = ImageTensor::zeros(2, 2);
        let other = ImageTensor::filled(2, 2, 0.5).unwrap();
        assert_eq!(fitness(&c, &other, &seed, 1, 1.0, 0.0).unwrap(), 0.7);
        assert_eq!(fitness(&c, &seed, &seed, 1, 2.0, 1.5).unwrap(), 1.4);
        assert!(fitness(&c, &seed, &seed, 1, 0.0, 1.0).unwrap() > fitness(&c, &other, &seed, 1, 0.0, 1.0).unwrap());
    }

    #[test]
    fn constant_classifier_is_fooled_immediately() {
        let c = Constant(vec![0.0, 1.0]);
        let seed = ImageTensor::filled(3, 3, 0.5).unwrap();
        let r = generate(&c, &seed, 0, &small_config(9)).unwrap();
        assert!(r.success);
        assert_eq!(r.p_adv, 1.0);
        assert_eq!(r.fitness, r.p_adv - r.rmse / 255.0);
        assert!(r.rmse < 60.0, "{}", r.rmse);
        assert!((0.0..=1.0).contains(&r.avg_pixel_perturbation));
        assert_eq!(r.adversarial.height(), 3);
    }

    #[test]
    fn target_validation() {
        let c = Constant(vec![0.5, 0.5]);
        let seed = ImageTensor::zeros(2, 2);
        let mut cfg = small_config(4);
        cfg.target = TargetMode::Class(0);
        assert!(generate(&c, &seed, 0, &cfg).is_err());
        cfg.target = TargetMode::NextClass;
        assert!(generate(&c, &seed, 2, &cfg).is_err());
        cfg.w1 = -1.0;
        assert!(generate(&c, &seed, 0, &cfg).is_err());
    }
}
