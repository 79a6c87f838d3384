//! Genetic algorithm over flat real genomes.
//!
//! One generation is: top-k selection, crossover back up to `N`, mutation of
//! everyone but the best, then evaluation of changed genomes only. The run
//! stops after `max_iters` generations or once the top-10 genome set has been
//! unchanged for `stagnation_window` consecutive generations.

use std::io::Write;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

/// Size of the candidate set watched for stagnation.
pub const STAGNATION_SET: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaConfig {
    pub population_size: usize,
    pub elite_k: usize,
    pub mutation_rate: f64,
    pub mutation_fraction: f64,
    pub mutation_sigma: f64,
    pub max_iters: usize,
    pub stagnation_window: usize,
    /// Inclusive `[lo, hi]` per gene; its length fixes the genome length.
    pub genome_bounds: Vec<[f64; 2]>,
    pub seed: u64,
}

impl GaConfig {
    /// Defaults with every gene bounded to `[lo, hi]`.
    pub fn with_uniform_bounds(genes: usize, lo: f64, hi: f64, seed: u64) -> Self {
        GaConfig {
            population_size: 200,
            elite_k: 100,
            mutation_rate: 0.5,
            mutation_fraction: 0.1,
            mutation_sigma: 1.0,
            max_iters: 500,
            stagnation_window: 20,
            genome_bounds: vec![[lo, hi]; genes],
            seed,
        }
    }

    pub fn genome_len(&self) -> usize {
        self.genome_bounds.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.population_size;
        if n == 0 || self.elite_k == 0 || self.elite_k > n {
            return Err(Error::invalid(format!("need 1 <= elite_k ({}) <= population_size ({n})", self.elite_k)));
        }
        if self.elite_k < 2 && n > 1 {
            return Err(Error::invalid("crossover needs at least two parents (elite_k >= 2)"));
        }
        for (name, v) in [("mutation_rate", self.mutation_rate), ("mutation_fraction", self.mutation_fraction)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::invalid(format!("{name} must lie in [0, 1], got {v}")));
            }
        }
        if !(self.mutation_sigma >= 0.0 && self.mutation_sigma.is_finite()) {
            return Err(Error::invalid(format!("mutation_sigma must be finite and >= 0, got {}", self.mutation_sigma)));
        }
        if self.max_iters == 0 {
            return Err(Error::invalid("max_iters must be at least 1"));
        }
        if self.genome_bounds.is_empty() {
            return Err(Error::invalid("genome must have at least one gene"));
        }
        if let Some([lo, hi]) = self.genome_bounds.iter().find(|[lo, hi]| !(lo <= hi) || !lo.is_finite() || !hi.is_finite()) {
            return Err(Error::invalid(format!("bad gene bounds [{lo}, {hi}]")));
        }
        Ok(())
    }

    fn clamp(&self, genome: &mut [f64]) {
        for (g, [lo, hi]) in genome.iter_mut().zip(&self.genome_bounds) {
            *g = g.clamp(*lo, *hi);
        }
    }

    fn genes_per_mutation(&self) -> usize {
        if self.mutation_fraction == 0.0 {
            0
        } else {
            ((self.mutation_fraction * self.genome_len() as f64).round() as usize).clamp(1, self.genome_len())
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Individual {
    pub genome: Vec<f64>,
    /// `None` until evaluated, and again after the genome changes.
    pub fitness: Option<f64>,
    /// Generation in which this genome was produced.
    pub age: usize,
}

impl Individual {
    pub fn new(genome: Vec<f64>, age: usize) -> Self {
        Individual { genome, fitness: None, age }
    }

    fn score(&self) -> f64 {
        self.fitness.unwrap_or(f64::NEG_INFINITY)
    }
}

pub type Population = Vec<Individual>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum InitKind {
    UniformBounds,
    /// Member 0 is the genome itself; the rest add `N(0, mutation_sigma)` to every gene.
    SeededFrom(Vec<f64>),
}

pub fn init_population(config: &GaConfig, init: &InitKind) -> Result<Population> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed::derive(config.seed, "ga/init"));
    match init {
        InitKind::UniformBounds => Ok((0..config.population_size)
            .map(|_| {
                let genome = config
                    .genome_bounds
                    .iter()
                    .map(|&[lo, hi]| if lo == hi { lo } else { rng.random_range(lo..=hi) })
                    .collect();
                Individual::new(genome, 0)
            })
            .collect()),
        InitKind::SeededFrom(base) => {
            if base.len() != config.genome_len() {
                return Err(Error::invalid(format!(
                    "seed genome has {} genes, bounds have {}",
                    base.len(),
                    config.genome_len()
                )));
            }
            let noise = Normal::new(0.0, config.mutation_sigma).map_err(|e| Error::invalid(e.to_string()))?;
            Ok((0..config.population_size)
                .map(|i| {
                    let mut genome = base.clone();
                    if i > 0 {
                        genome.iter_mut().for_each(|g| *g += noise.sample(&mut rng));
                    }
                    config.clamp(&mut genome);
                    Individual::new(genome, 0)
                })
                .collect())
        }
    }
}

/// Indices of the `k` fittest individuals, best first, ties to the lower index.
fn ranking(population: &[Individual], k: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..population.len()).collect();
    order.sort_by(|&a, &b| population[b].score().total_cmp(&population[a].score()));
    order.truncate(k);
    order
}

/// The `k` fittest individuals in descending order with their scores.
/// Individuals must already be evaluated.
pub fn top_candidates(population: &[Individual], k: usize) -> Result<(Population, Vec<f64>)> {
    if k > population.len() {
        return Err(Error::invalid(format!("k = {k} exceeds population size {}", population.len())));
    }
    if population.iter().any(|p| p.fitness.is_none()) {
        return Err(Error::invalid("top_candidates needs an evaluated population"));
    }
    let order = ranking(population, k);
    let scores = order.iter().map(|&i| population[i].score()).collect();
    Ok((order.into_iter().map(|i| population[i].clone()).collect(), scores))
}

/// Extends `parents` to exactly `n` members with uniform-crossover children.
pub fn crossover(parents: Population, n: usize, generation: usize, rng: &mut impl Rng) -> Result<Population> {
    if parents.len() >= n {
        let mut p = parents;
        p.truncate(n);
        return Ok(p);
    }
    if parents.len() < 2 {
        return Err(Error::invalid("crossover needs at least two parents"));
    }
    let mut out = parents;
    let k = out.len();
    while out.len() < n {
        let pair = index::sample(rng, k, 2);
        let (a, b) = (pair.index(0), pair.index(1));
        let mut c0 = out[a].genome.clone();
        let mut c1 = out[b].genome.clone();
        for (x, y) in c0.iter_mut().zip(c1.iter_mut()) {
            if rng.random_bool(0.5) {
                std::mem::swap(x, y);
            }
        }
        out.push(Individual::new(c0, generation));
        out.push(Individual::new(c1, generation));
    }
    out.truncate(n);
    Ok(out)
}

/// Mutates every member except index 0 (the current best) in place.
pub fn mutate(population: &mut [Individual], config: &GaConfig, rng: &mut impl Rng) -> Result<()> {
    let genes = config.genes_per_mutation();
    if genes == 0 || config.mutation_rate == 0.0 || config.mutation_sigma == 0.0 {
        return Ok(());
    }
    let noise = Normal::new(0.0, config.mutation_sigma).map_err(|e| Error::invalid(e.to_string()))?;
    for ind in population.iter_mut().skip(1) {
        if !rng.random_bool(config.mutation_rate) {
            continue;
        }
        let before = ind.genome.clone();
        for g in index::sample(rng, ind.genome.len(), genes) {
            ind.genome[g] += noise.sample(rng);
        }
        config.clamp(&mut ind.genome);
        if ind.genome != before {
            ind.fitness = None;
        }
    }
    Ok(())
}

/// Evaluates all members lacking a fitness, in parallel.
pub fn evaluate<F>(population: &mut [Individual], fitness: &F) -> Result<usize>
where
    F: Fn(&[f64]) -> Result<f64> + Sync,
{
    let pending: Vec<&mut Individual> = population.iter_mut().filter(|p| p.fitness.is_none()).collect();
    let count = pending.len();
    pending.into_par_iter().try_for_each(|ind| {
        let f = fitness(&ind.genome).map_err(|e| match e {
            Error::Evaluation { message, genome: None } => Error::Evaluation {
                message,
                genome: Some(ind.genome.clone()),
            },
            other => other,
        })?;
        if !f.is_finite() {
            return Err(Error::Evaluation {
                message: format!("fitness is {f}"),
                genome: Some(ind.genome.clone()),
            });
        }
        ind.fitness = Some(f);
        Ok(())
    })?;
    Ok(count)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenerationStats {
    pub generation: usize,
    pub best: f64,
    pub mean: f64,
    pub std: f64,
}

impl GenerationStats {
    fn of(generation: usize, population: &[Individual]) -> Self {
        let n = population.len() as f64;
        let scores: Vec<f64> = population.iter().map(Individual::score).collect();
        let mean = scores.iter().sum::<f64>() / n;
        let var = scores.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / n;
        GenerationStats {
            generation,
            best: scores.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            mean,
            std: var.sqrt(),
        }
    }
}

/// Tab-separated history log with a header line.
pub fn write_history(mut w: impl Write, history: &[GenerationStats]) -> std::io::Result<()> {
    writeln!(w, "generation\tbest\tmean\tstd")?;
    for h in history {
        writeln!(w, "{}\t{}\t{}\t{}", h.generation, h.best, h.mean, h.std)?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaOutcome {
    pub best: Individual,
    /// Entry 0 describes the initial population.
    pub history: Vec<GenerationStats>,
    pub generations: usize,
    pub stopped_by_stagnation: bool,
    pub evaluations: usize,
}

fn top_set(population: &[Individual]) -> Vec<Vec<u64>> {
    let mut set: Vec<Vec<u64>> = ranking(population, STAGNATION_SET.min(population.len()))
        .into_iter()
        .map(|i| population[i].genome.iter().map(|g| g.to_bits()).collect())
        .collect();
    set.sort();
    set
}

pub fn run<F>(config: &GaConfig, fitness: F, init: &InitKind) -> Result<GaOutcome>
where
    F: Fn(&[f64]) -> Result<f64> + Sync,
{
    let mut population = init_population(config, init)?;
    let mut evaluations = evaluate(&mut population, &fitness)?;
    let mut history = vec![GenerationStats::of(0, &population)];
    let mut previous = top_set(&population);
    let mut unchanged = 0;
    let mut generation = 0;
    let mut stopped_by_stagnation = false;
    while generation < config.max_iters {
        generation += 1;
        let mut rng = ChaCha8Rng::seed_from_u64(seed::derive_indexed(config.seed, "ga/generation", generation as u64));
        let (parents, _) = top_candidates(&population, config.elite_k)?;
        population = crossover(parents, config.population_size, generation, &mut rng)?;
        mutate(&mut population, config, &mut rng)?;
        evaluations += evaluate(&mut population, &fitness)?;
        history.push(GenerationStats::of(generation, &population));

        let current = top_set(&population);
        if current == previous {
            unchanged += 1;
        } else {
            unchanged = 0;
            previous = current;
        }
        if unchanged >= config.stagnation_window {
            stopped_by_stagnation = true;
            break;
        }
    }
    let best = population[ranking(&population, 1)[0]].clone();
    Ok(GaOutcome {
        best,
        history,
        generations: generation,
        stopped_by_stagnation,
        evaluations,
    })
}
