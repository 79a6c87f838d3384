//! Feature-based data re-uploading classifier on one qubit.
//!
//! The circuit starts in `|0⟩` and applies `L` layers; layer `l` (counted
//! from 1) rotates by the angle `θ_l · x̄`, where `x̄` is the feature vector
//! with a trailing 1 for the bias. In the alternating ansatz odd layers are
//! `Rz` and even layers `Ry`; in the pair ansatz every layer is `Rz(a)·Ry(a)`.
//! The class probabilities are projections onto fixed label states.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qsim::{gates_are_clean, noisy_gate, Amplitudes, Axis, NoiseModel, QubitState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ansatz {
    /// `Rz` on odd layers, `Ry` on even layers.
    #[default]
    Alternating,
    /// `Rz(a)·Ry(a)` on every layer.
    ZyPair,
}

impl Ansatz {
    /// Gates applied (in time order) for layer `layer`, counted from 1.
    pub(crate) fn gates(self, layer: usize) -> &'static [Axis] {
        match self {
            Ansatz::Alternating if layer % 2 == 1 => &[Axis::Z],
            Ansatz::Alternating => &[Axis::Y],
            Ansatz::ZyPair => &[Axis::Y, Axis::Z],
        }
    }
}

/// Appends the constant 1 used as the bias input.
pub fn augment(features: &[f64]) -> Vec<f64> {
    let mut v = Vec::with_capacity(features.len() + 1);
    v.extend_from_slice(features);
    v.push(1.0);
    v
}

/// Maximally separated pure label states for `n` classes.
///
/// Two classes use `|0⟩, |1⟩`; three sit 120° apart on the x–z great circle;
/// four are the vertices of a tetrahedron.
pub fn label_states(n: usize) -> Result<Vec<QubitState>> {
    let bloch: Vec<[f64; 3]> = match n {
        2 => vec![[0.0, 0.0, 1.0], [0.0, 0.0, -1.0]],
        3 => (0..3)
            .map(|k| {
                let phi = 2.0 * PI * k as f64 / 3.0;
                [phi.sin(), 0.0, phi.cos()]
            })
            .collect(),
        4 => {
            let r = (8.0f64).sqrt() / 3.0;
            let mut v = vec![[0.0, 0.0, 1.0]];
            v.extend((0..3).map(|k| {
                let phi = 2.0 * PI * k as f64 / 3.0;
                [r * phi.cos(), r * phi.sin(), -1.0 / 3.0]
            }));
            v
        }
        _ => return Err(Error::invalid(format!("label states are defined for 2 to 4 classes, got {n}"))),
    };
    bloch.into_iter().map(|[x, y, z]| QubitState::from_bloch(x, y, z)).collect()
}

/// Converts raw projection probabilities into a class distribution: readout
/// flips first, then division by the sum.
pub(crate) fn normalize_readout(raw: &mut [f64], noise: Option<&NoiseModel>) {
    if let Some(n) = noise {
        raw.iter_mut().for_each(|p| *p = n.readout(*p));
    }
    let total: f64 = raw.iter().sum();
    if total > 0.0 {
        raw.iter_mut().for_each(|p| *p /= total);
    } else {
        let u = 1.0 / raw.len() as f64;
        raw.iter_mut().for_each(|p| *p = u);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DraModel {
    pub ansatz: Ansatz,
    /// One weight vector per layer, each of length `feature_dim + 1`.
    pub theta: Vec<Vec<f64>>,
    pub label_states: Vec<QubitState>,
    #[serde(default)]
    pub noise: Option<NoiseModel>,
}

impl DraModel {
    pub fn new(ansatz: Ansatz, theta: Vec<Vec<f64>>, label_states: Vec<QubitState>, noise: Option<NoiseModel>) -> Result<Self> {
        let m = DraModel {
            ansatz,
            theta,
            label_states,
            noise,
        };
        m.validate()?;
        Ok(m)
    }

    /// Builds a model from a flat genome. With `tied = Some(t)` the genome holds
    /// `t` distinct weight vectors and layer `l` reuses vector `(l - 1) mod t`.
    pub fn from_genome(
        ansatz: Ansatz,
        layers: usize,
        feature_dim: usize,
        tied: Option<usize>,
        genome: &[f64],
        label_states: Vec<QubitState>,
        noise: Option<NoiseModel>,
    ) -> Result<Self> {
        let width = feature_dim + 1;
        let distinct = tied.unwrap_or(layers);
        if distinct == 0 || genome.len() != distinct * width {
            return Err(Error::invalid(format!(
                "genome of length {} does not hold {distinct} vectors of length {width}",
                genome.len()
            )));
        }
        let theta = (0..layers)
            .map(|l| genome[(l % distinct) * width..(l % distinct + 1) * width].to_vec())
            .collect();
        Self::new(ansatz, theta, label_states, noise)
    }

    /// Number of free parameters for a configuration.
    pub fn param_count(layers: usize, feature_dim: usize, tied: Option<usize>) -> usize {
        tied.unwrap_or(layers) * (feature_dim + 1)
    }

    pub fn validate(&self) -> Result<()> {
        if self.theta.is_empty() {
            return Err(Error::invalid("model needs at least one layer"));
        }
        let width = self.theta[0].len();
        if width == 0 || self.theta.iter().any(|t| t.len() != width) {
            return Err(Error::invalid("all layer weight vectors must share one non-zero length"));
        }
        if self.theta.iter().flatten().any(|w| !w.is_finite()) {
            return Err(Error::invalid("weights must be finite"));
        }
        if self.label_states.len() < 2 {
            return Err(Error::invalid("at least two label states are required"));
        }
        if let Some(s) = self.label_states.iter().find(|s| !s.is_pure()) {
            return Err(Error::invalid(format!("label state {s:?} is not pure")));
        }
        if let Some(n) = &self.noise {
            n.validate()?;
        }
        Ok(())
    }

    pub fn layers(&self) -> usize {
        self.theta.len()
    }

    pub fn feature_dim(&self) -> usize {
        self.theta[0].len() - 1
    }

    pub fn num_classes(&self) -> usize {
        self.label_states.len()
    }

    /// Rotation angle of every layer for `features`.
    pub fn layer_angles(&self, features: &[f64]) -> Result<Vec<f64>> {
        if features.len() != self.feature_dim() {
            return Err(Error::invalid(format!("expected {} features, got {}", self.feature_dim(), features.len())));
        }
        let x = augment(features);
        Ok(self.theta.iter().map(|t| t.iter().zip(&x).map(|(w, x)| w * x).sum()).collect())
    }

    /// State after the circuit, with per-gate noise if the model carries any.
    pub fn final_state(&self, features: &[f64]) -> Result<QubitState> {
        let angles = self.layer_angles(features)?;
        if let Some(l) = angles.iter().position(|a| !a.is_finite()) {
            return Err(Error::evaluation(format!("layer {} angle is not finite", l + 1)));
        }
        let noise = self.noise.as_ref();
        let gates = angles
            .into_iter()
            .enumerate()
            .flat_map(|(l, angle)| self.ansatz.gates(l + 1).iter().map(move |axis| (*axis, angle)));
        if gates_are_clean(noise) {
            return Ok(gates.fold(Amplitudes::ground(), |a, (axis, angle)| a.rotate(axis, angle)).to_state());
        }
        Ok(gates.fold(QubitState::ground(), |s, (axis, angle)| noisy_gate(s, axis, angle, noise)))
    }

    /// Class distribution read from `state`.
    pub fn readout(&self, state: &QubitState) -> Vec<f64> {
        let mut p: Vec<f64> = self.label_states.iter().map(|l| state.overlap(l)).collect();
        normalize_readout(&mut p, self.noise.as_ref());
        p
    }

    pub fn forward(&self, features: &[f64]) -> Result<Vec<f64>> {
        Ok(self.readout(&self.final_state(features)?))
    }

    pub fn predict(&self, features: &[f64]) -> Result<usize> {
        Ok(argmax(&self.forward(features)?))
    }

    pub fn with_noise(&self, noise: Option<NoiseModel>) -> Self {
        DraModel { noise, ..self.clone() }
    }
}

/// Index of the largest value; the lowest index wins ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}
