//! Robustness certificates.
//!
//! * `r_F`, the minimum robustness fidelity from the top two output
//!   probabilities, and certified test-set accuracy at fidelity `1 − ε`;
//! * `r_DP`, the trace-distance radius guaranteed by depolarizing noise;
//! * one-sided Clopper–Pearson bounds for finite-shot estimates;
//! * an empirical check that samples state perturbations inside a radius.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;

use crate::dra::{argmax, DraModel};
use crate::error::{Error, Result};
use crate::qsim::{NoiseChannel, QubitState};

/// One classified sample and its certificates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub probabilities: Vec<f64>,
    pub shot_counts: Option<Vec<u64>>,
    pub predicted: usize,
    pub truth: usize,
    pub p_a: f64,
    pub p_b: f64,
    /// `None` marks an uncertified record.
    pub r_f: Option<f64>,
    pub r_dp: Option<f64>,
}

/// Largest and second-largest entries with the index of the largest
/// (lowest index on ties).
pub fn top_two(values: &[f64]) -> (usize, f64, f64) {
    let a = argmax(values);
    let b = values.iter().enumerate().filter(|(i, _)| *i != a).map(|(_, v)| *v).fold(0.0, f64::max);
    (a, values[a], b)
}

impl PredictionRecord {
    pub fn from_probabilities(probabilities: Vec<f64>, shot_counts: Option<Vec<u64>>, truth: usize) -> Result<Self> {
        if probabilities.is_empty() {
            return Err(Error::evaluation("classifier returned an empty probability vector"));
        }
        if probabilities.iter().any(|p| !p.is_finite()) {
            return Err(Error::evaluation(format!("non-finite probabilities {probabilities:?}")));
        }
        let (predicted, p_a, p_b) = top_two(&probabilities);
        let r_f = min_robustness_fidelity(p_a.min(1.0), p_b.min(p_a.min(1.0))).ok();
        Ok(PredictionRecord {
            probabilities,
            shot_counts,
            predicted,
            truth,
            p_a,
            p_b,
            r_f,
            r_dp: None,
        })
    }

    pub fn correct(&self) -> bool {
        self.predicted == self.truth
    }

    pub fn certified(&self) -> bool {
        self.r_f.is_some()
    }

    /// `r_F` with the report convention of 0 for uncertified records.
    pub fn r_f_or_zero(&self) -> f64 {
        self.r_f.unwrap_or(0.0)
    }
}

fn check_probability(name: &str, p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::invalid(format!("{name} must lie in [0, 1], got {p}")));
    }
    Ok(())
}

/// `r_F = ½(1 + √(1 − p_B − p_A(1 − 2p_B) + 2√(p_A p_B (1−p_A)(1−p_B))))`.
///
/// The radicand equals `(√((1−p_A)(1−p_B)) + √(p_A p_B))²`, so the square
/// root is evaluated in that cancellation-free form.
pub fn min_robustness_fidelity(p_a: f64, p_b: f64) -> Result<f64> {
    check_probability("p_A", p_a)?;
    check_probability("p_B", p_b)?;
    if p_a < p_b {
        return Err(Error::invalid(format!("p_A ({p_a}) must not be below p_B ({p_b})")));
    }
    let root = ((1.0 - p_a) * (1.0 - p_b)).sqrt() + (p_a * p_b).sqrt();
    let r = 0.5 * (1.0 + root);
    if !r.is_finite() {
        return Err(Error::NumericDomain(format!("r_F undefined for p_A={p_a}, p_B={p_b}")));
    }
    Ok(r.min(1.0))
}

/// Fraction of records that are correct and have `r_F ≤ 1 − ε`.
pub fn certified_accuracy(records: &[PredictionRecord], epsilon: f64) -> Result<f64> {
    check_probability("epsilon", epsilon)?;
    if records.is_empty() {
        return Err(Error::EmptyDataset("no records to certify".into()));
    }
    let hits = records.iter().filter(|r| r.correct() && r.r_f.is_some_and(|f| f <= 1.0 - epsilon)).count();
    Ok(hits as f64 / records.len() as f64)
}

/// Error rates `(certified, uncertified)`; `None` for an empty group.
pub fn error_rates(records: &[PredictionRecord]) -> (Option<f64>, Option<f64>) {
    let rate = |certified: bool| {
        let group: Vec<_> = records.iter().filter(|r| r.certified() == certified).collect();
        (!group.is_empty()).then(|| group.iter().filter(|r| !r.correct()).count() as f64 / group.len() as f64)
    };
    (rate(true), rate(false))
}

/// `r_DP(p) = p/(2(1−p)) · (√(p_A/(1−p_A)) − 1)`, clamped at 0 for `p_A ≤ ½`.
pub fn depolarization_radius(p: f64, p_a: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&p) {
        return Err(Error::invalid(format!("depolarization rate must lie in [0, 1), got {p}")));
    }
    if !(p_a > 0.0 && p_a < 1.0) {
        return Err(Error::NumericDomain(format!("p_A must lie strictly inside (0, 1), got {p_a}")));
    }
    let r = p / (2.0 * (1.0 - p)) * ((p_a / (1.0 - p_a)).sqrt() - 1.0);
    Ok(r.max(0.0))
}

fn bisect(mut lo: f64, mut hi: f64, f: impl Fn(f64) -> f64) -> f64 {
    // f is increasing on [lo, hi] with a sign change.
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// One-sided Clopper–Pearson lower bound on a binomial proportion.
pub fn binomial_lower_bound(successes: u64, trials: u64, level: f64) -> f64 {
    if successes == 0 {
        return 0.0;
    }
    let (a, b) = (successes as f64, (trials - successes + 1) as f64);
    bisect(0.0, 1.0, |x| beta_reg(a, b, x) - (1.0 - level))
}

/// One-sided Clopper–Pearson upper bound on a binomial proportion.
pub fn binomial_upper_bound(successes: u64, trials: u64, level: f64) -> f64 {
    if successes >= trials {
        return 1.0;
    }
    let (a, b) = ((successes + 1) as f64, (trials - successes) as f64);
    bisect(0.0, 1.0, |x| beta_reg(a, b, x) - level)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceBounds {
    pub class_a: usize,
    pub p_a_lower: f64,
    pub p_b_upper: f64,
    pub certified: bool,
}

/// Lower bound on the top class and upper bound on the runner-up, each one-sided at `level`.
pub fn confidence_bounds(counts: &[u64], shots: u64, level: f64) -> Result<ConfidenceBounds> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::invalid(format!("confidence level must lie in (0, 1), got {level}")));
    }
    if counts.len() < 2 {
        return Err(Error::invalid("need counts for at least two classes"));
    }
    if shots == 0 || counts.iter().sum::<u64>() != shots {
        return Err(Error::invalid(format!("counts {counts:?} do not sum to {shots} shots")));
    }
    let as_f: Vec<f64> = counts.iter().map(|c| *c as f64).collect();
    let (class_a, _, n_b) = top_two(&as_f);
    let p_a_lower = binomial_lower_bound(counts[class_a], shots, level);
    let p_b_upper = binomial_upper_bound(n_b as u64, shots, level);
    Ok(ConfidenceBounds {
        class_a,
        p_a_lower,
        p_b_upper,
        certified: p_a_lower >= p_b_upper,
    })
}

/// Recomputes `r_F` (from confidence bounds when shot counts are present) and,
/// given a depolarization rate, `r_DP` from `p_A`.
pub fn certify_record(record: &PredictionRecord, level: f64, depolarizing: Option<f64>) -> Result<PredictionRecord> {
    let mut out = record.clone();
    out.r_f = match &record.shot_counts {
        Some(counts) => {
            let b = confidence_bounds(counts, counts.iter().sum(), level)?;
            if b.certified {
                Some(min_robustness_fidelity(b.p_a_lower, b.p_b_upper.min(b.p_a_lower))?)
            } else {
                None
            }
        }
        None => Some(min_robustness_fidelity(record.p_a.min(1.0), record.p_b.min(record.p_a.min(1.0)))?),
    };
    out.r_dp = match depolarizing {
        Some(p) => Some(depolarization_radius(p, record.p_a.clamp(1e-15, 1.0 - 1e-15))?),
        None => None,
    };
    Ok(out)
}

/// A classifier that encodes its input into one qubit state and reads labels from it.
pub trait StateClassifier {
    type Input: ?Sized;

    fn encode(&self, input: &Self::Input) -> Result<QubitState>;

    /// Class distribution for an arbitrary encoded state.
    fn classify(&self, state: &QubitState) -> Vec<f64>;
}

/// A DRA model whose encoded state passes through a depolarizing channel of
/// rate `p` before the label projections.
#[derive(Debug, Clone, Copy)]
pub struct DepolarizedDra<'a> {
    pub model: &'a DraModel,
    pub p: f64,
}

impl<'a> DepolarizedDra<'a> {
    pub fn new(model: &'a DraModel, p: f64) -> Result<Self> {
        NoiseChannel::depolarizing(p)?;
        Ok(DepolarizedDra { model, p })
    }
}

impl StateClassifier for DepolarizedDra<'_> {
    type Input = [f64];

    fn encode(&self, input: &[f64]) -> Result<QubitState> {
        self.model.final_state(input)
    }

    fn classify(&self, state: &QubitState) -> Vec<f64> {
        let channel = NoiseChannel {
            kind: crate::qsim::ChannelKind::Depolarizing,
            probability: self.p,
        };
        self.model.readout(&state.channel_unchecked(&channel))
    }
}

/// Uniform sample of a state within trace distance `radius` of `center`
/// (strictly less), by rejection inside the Bloch ball.
pub fn perturbed_state(center: &QubitState, radius: f64, rng: &mut impl Rng) -> Result<QubitState> {
    let c = center.bloch();
    for _ in 0..10_000 {
        let dir: [f64; 3] = [rng.sample(StandardNormal), rng.sample(StandardNormal), rng.sample(StandardNormal)];
        let norm = dir.iter().map(|d| d * d).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        // Trace distance is half the Bloch distance.
        let t = radius * rng.random::<f64>().cbrt();
        let r: Vec<f64> = c.iter().zip(&dir).map(|(c, d)| c + 2.0 * t * d / norm).collect();
        if r.iter().map(|x| x * x).sum::<f64>() <= 1.0 {
            return QubitState::from_bloch(r[0], r[1], r[2]);
        }
    }
    Err(Error::NumericDomain("could not sample a perturbation inside the Bloch ball".into()))
}

/// Samples `trials` perturbed encoded states and counts predicted-label changes.
pub fn empirical_robustness_check<M: StateClassifier + ?Sized>(model: &M, input: &M::Input, radius: f64, trials: usize, seed: u64) -> Result<usize> {
    if !(radius >= 0.0) {
        return Err(Error::invalid(format!("radius must be non-negative, got {radius}")));
    }
    let center = model.encode(input)?;
    let label = argmax(&model.classify(&center));
    if radius == 0.0 {
        return Ok(0);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut violations = 0;
    for _ in 0..trials {
        let rho = perturbed_state(&center, radius, &mut rng)?;
        if argmax(&model.classify(&rho)) != label {
            violations += 1;
        }
    }
    Ok(violations)
}
