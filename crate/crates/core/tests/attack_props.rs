use std::sync::atomic::{AtomicU64, Ordering};

use proptest::prelude::*;
use qrobust_core::attack::{self, PIXEL_SCALE};
use qrobust_core::{AttackConfig, Classifier, ImageTensor, Result};

/// Class 1 grows with mean brightness; every call is counted.
struct Brightness {
    calls: AtomicU64,
}

impl Brightness {
    fn new() -> Self {
        Brightness { calls: AtomicU64::new(0) }
    }
}

impl Classifier for Brightness {
    fn num_classes(&self) -> usize {
        2
    }

    fn probabilities(&self, image: &ImageTensor) -> Result<Vec<f64>> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        let m = image.values().iter().sum::<f64>() / image.len() as f64;
        let p1 = 1.0 - (-3.0 * m).exp();
        Ok(vec![1.0 - p1, p1])
    }
}

fn config(seed: u64, w1: f64) -> AttackConfig {
    let mut c = AttackConfig::new(16, seed);
    c.w1 = w1;
    c.ga.population_size = 40;
    c.ga.elite_k = 20;
    c.ga.max_iters = 60;
    c
}

fn seed_image(level: f64) -> ImageTensor {
    ImageTensor::filled(4, 4, level).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn attack_only_queries_probabilities_and_counts_every_call(seed in any::<u64>()) {
        let clf = Brightness::new();
        let r = attack::generate(&clf, &seed_image(0.1), 0, &config(seed, 1.0)).unwrap();
        // One extra call makes the final success prediction.
        prop_assert_eq!(r.classifier_calls, clf.calls.load(Ordering::Relaxed));
        prop_assert!(r.classifier_calls > 0);
    }

    #[test]
    fn results_are_reproducible_and_decompose(seed in any::<u64>(), w1 in 0.0f64..2.0) {
        let clf = Brightness::new();
        let c = config(seed, w1);
        let a = attack::generate(&clf, &seed_image(0.2), 0, &c).unwrap();
        let b = attack::generate(&clf, &seed_image(0.2), 0, &c).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert_eq!(a.fitness, c.w0 * a.p_adv - c.w1 * (a.rmse / PIXEL_SCALE));
        prop_assert!(a.rmse >= 0.0 && (0.0..=1.0).contains(&a.avg_pixel_perturbation));
        prop_assert_eq!(a.rmse, attack::rmse(&a.adversarial, &a.seed_image).unwrap());
    }
}

#[test]
fn mean_rmse_falls_as_w1_rises() {
    let clf = Brightness::new();
    let mean_rmse = |w1: f64| {
        (0..6u64)
            .map(|s| attack::generate(&clf, &seed_image(0.0), 0, &config(100 + s, w1)).unwrap().rmse)
            .sum::<f64>()
            / 6.0
    };
    let r: Vec<f64> = [0.9, 1.2, 1.5].into_iter().map(mean_rmse).collect();
    assert!(r[0] >= r[1] && r[1] >= r[2], "{r:?}");
}
