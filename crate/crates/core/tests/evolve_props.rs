use std::sync::atomic::{AtomicBool, Ordering};

use proptest::prelude::*;
use qrobust_core::evolve::{self, GaConfig, InitKind};

fn small_config(seed: u64, genes: usize) -> GaConfig {
    let mut c = GaConfig::with_uniform_bounds(genes, -2.0, 3.0, seed);
    c.population_size = 31;
    c.elite_k = 12;
    c.max_iters = 25;
    c.mutation_sigma = 0.7;
    c
}

fn bumpy(g: &[f64]) -> qrobust_core::Result<f64> {
    Ok(-g
        .iter()
        .enumerate()
        .map(|(i, x)| (x - 0.1 * i as f64).powi(2) + 0.3 * (5.0 * x).sin())
        .sum::<f64>())
}

fn run_in_pool(threads: usize, config: &GaConfig) -> evolve::GaOutcome {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .unwrap()
        .install(|| evolve::run(config, bumpy, &InitKind::UniformBounds).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn thread_count_does_not_change_the_result(seed in any::<u64>()) {
        let c = small_config(seed, 6);
        let a = run_in_pool(1, &c);
        let b = run_in_pool(3, &c);
        prop_assert_eq!(a, b);
    }

    #[test]
    fn best_fitness_never_decreases(seed in any::<u64>(), pm in 0.0f64..=1.0) {
        let mut c = small_config(seed, 4);
        c.mutation_rate = pm;
        let out = evolve::run(&c, bumpy, &InitKind::UniformBounds).unwrap();
        for w in out.history.windows(2) {
            prop_assert!(w[1].best >= w[0].best);
        }
        prop_assert_eq!(out.best.fitness, Some(out.history.last().unwrap().best));
    }

    #[test]
    fn genes_stay_within_bounds(seed in any::<u64>(), sigma in 0.0f64..50.0) {
        let mut c = small_config(seed, 5);
        c.mutation_sigma = sigma;
        c.mutation_rate = 1.0;
        c.mutation_fraction = 1.0;
        let escaped = AtomicBool::new(false);
        evolve::run(&c, |g: &[f64]| {
            if g.iter().any(|x| !(-2.0..=3.0).contains(x)) {
                escaped.store(true, Ordering::Relaxed);
            }
            bumpy(g)
        }, &InitKind::UniformBounds).unwrap();
        prop_assert!(!escaped.load(Ordering::Relaxed));
    }

    #[test]
    fn seeded_runs_are_reproducible(seed in any::<u64>()) {
        let c = small_config(seed, 3);
        let init = InitKind::SeededFrom(vec![0.5, 0.5, 0.5]);
        prop_assert_eq!(evolve::run(&c, bumpy, &init).unwrap(), evolve::run(&c, bumpy, &init).unwrap());
    }
}

#[test]
fn sphere_optimum_is_found_by_grid_search_and_by_the_ga() {
    // Brute-force grid over [-1, 1]^4 locates the optimum.
    let steps: Vec<f64> = (0..=20).map(|i| -1.0 + 0.1 * i as f64).collect();
    let mut best = f64::NEG_INFINITY;
    for a in &steps {
        for b in &steps {
            for c in &steps {
                for d in &steps {
                    best = best.max(-(a * a + b * b + c * c + d * d));
                }
            }
        }
    }
    assert!(best.abs() < 1e-12);

    let mut c = GaConfig::with_uniform_bounds(4, -1.0, 1.0, 5);
    c.population_size = 50;
    c.elite_k = 25;
    c.max_iters = 200;
    c.mutation_sigma = 0.1;
    let out = evolve::run(&c, |g: &[f64]| Ok(-g.iter().map(|x| x * x).sum::<f64>()), &InitKind::UniformBounds).unwrap();
    assert!(out.best.fitness.unwrap() >= -0.01, "{:?}", out.best.fitness);
}
