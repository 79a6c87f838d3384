//! Exact single-qubit simulation on 2×2 density matrices.
//!
//! Every state is a density matrix, including the noiseless case. Gates are
//! `ρ ↦ UρU†` with `U = exp(-i·θ·σ/2)`, noise channels are CPTP maps given
//! in closed form (their Kraus operators are exposed for verification), and
//! readout is a projection onto a pure label state.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row-major 2×2 complex matrix.
pub type Matrix2 = [[Complex64; 2]; 2];

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Tolerance used by [`QubitState::is_valid`] and the purity check on label states.
pub const STATE_TOL: f64 = 1e-10;
const PURITY_TOL: f64 = 1e-9;

/// A single-qubit density matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(into = "StateRepr", try_from = "StateRepr")]
pub struct QubitState {
    m: Matrix2,
}

#[derive(Serialize, Deserialize)]
struct StateRepr {
    re: [[f64; 2]; 2],
    im: [[f64; 2]; 2],
}

impl From<QubitState> for StateRepr {
    fn from(s: QubitState) -> Self {
        let m = s.m;
        StateRepr {
            re: [[m[0][0].re, m[0][1].re], [m[1][0].re, m[1][1].re]],
            im: [[m[0][0].im, m[0][1].im], [m[1][0].im, m[1][1].im]],
        }
    }
}

impl TryFrom<StateRepr> for QubitState {
    type Error = Error;

    fn try_from(r: StateRepr) -> Result<Self> {
        let c = |i: usize, j: usize| Complex64::new(r.re[i][j], r.im[i][j]);
        QubitState::from_matrix([[c(0, 0), c(0, 1)], [c(1, 0), c(1, 1)]])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    Y,
    Z,
}

impl QubitState {
    /// `|0⟩⟨0|`.
    pub fn ground() -> Self {
        QubitState {
            m: [[ONE, ZERO], [ZERO, ZERO]],
        }
    }

    /// `|1⟩⟨1|`.
    pub fn excited() -> Self {
        QubitState {
            m: [[ZERO, ZERO], [ZERO, ONE]],
        }
    }

    /// `I/2`.
    pub fn maximally_mixed() -> Self {
        let h = Complex64::new(0.5, 0.0);
        QubitState { m: [[h, ZERO], [ZERO, h]] }
    }

    /// `|ψ⟩⟨ψ|` for `|ψ⟩ = a|0⟩ + b|1⟩`, normalized.
    pub fn pure(a: Complex64, b: Complex64) -> Result<Self> {
        let norm = (a.norm_sqr() + b.norm_sqr()).sqrt();
        if !norm.is_finite() || norm == 0.0 {
            return Err(Error::invalid("pure state amplitudes must be finite and non-zero"));
        }
        let (a, b) = (a / norm, b / norm);
        Ok(QubitState {
            m: [[a * a.conj(), a * b.conj()], [b * a.conj(), b * b.conj()]],
        })
    }

    /// State with Bloch vector `(x, y, z)`, `|r| ≤ 1`.
    pub fn from_bloch(x: f64, y: f64, z: f64) -> Result<Self> {
        let r2 = x * x + y * y + z * z;
        if !r2.is_finite() || r2 > 1.0 + STATE_TOL {
            return Err(Error::invalid(format!("Bloch vector length {} exceeds 1", r2.sqrt())));
        }
        Ok(QubitState {
            m: [
                [Complex64::new((1.0 + z) / 2.0, 0.0), Complex64::new(x / 2.0, -y / 2.0)],
                [Complex64::new(x / 2.0, y / 2.0), Complex64::new((1.0 - z) / 2.0, 0.0)],
            ],
        })
    }

    /// Validates Hermiticity, unit trace and positivity before accepting `m`.
    pub fn from_matrix(m: Matrix2) -> Result<Self> {
        let s = QubitState { m };
        if !s.is_valid(STATE_TOL) {
            return Err(Error::invalid(format!("matrix is not a density matrix: {m:?}")));
        }
        Ok(s)
    }

    pub fn matrix(&self) -> &Matrix2 {
        &self.m
    }

    pub fn bloch(&self) -> [f64; 3] {
        let m = &self.m;
        [2.0 * m[1][0].re, 2.0 * m[1][0].im, (m[0][0] - m[1][1]).re]
    }

    pub fn trace(&self) -> Complex64 {
        self.m[0][0] + self.m[1][1]
    }

    /// `Tr(ρ²)`.
    pub fn purity(&self) -> f64 {
        let m = &self.m;
        (m[0][0] * m[0][0] + m[0][1] * m[1][0] + m[1][0] * m[0][1] + m[1][1] * m[1][1]).re
    }

    pub fn is_pure(&self) -> bool {
        (self.purity() - 1.0).abs() <= PURITY_TOL
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> [f64; 2] {
        let m = &self.m;
        let tr = (m[0][0] + m[1][1]).re;
        let det = (m[0][0] * m[1][1] - m[0][1] * m[1][0]).re;
        let disc = (tr * tr / 4.0 - det).max(0.0).sqrt();
        [tr / 2.0 - disc, tr / 2.0 + disc]
    }

    pub fn is_valid(&self, tol: f64) -> bool {
        let m = &self.m;
        let finite = m.iter().flatten().all(|c| c.re.is_finite() && c.im.is_finite());
        let hermitian = (m[0][1] - m[1][0].conj()).norm() <= tol && m[0][0].im.abs() <= tol && m[1][1].im.abs() <= tol;
        let trace = (self.trace() - ONE).norm() <= tol;
        finite && hermitian && trace && self.eigenvalues()[0] >= -tol
    }

    /// `UρU†` with `U = exp(-i·angle·σ_axis/2)`.
    pub fn apply_rotation(&self, axis: Axis, angle: f64) -> Result<Self> {
        if !angle.is_finite() {
            return Err(Error::invalid(format!("rotation angle must be finite, got {angle}")));
        }
        Ok(self.rotate(axis, angle))
    }

    pub(crate) fn rotate(&self, axis: Axis, angle: f64) -> Self {
        let m = &self.m;
        match axis {
            Axis::Z => {
                let phase = Complex64::from_polar(1.0, -angle);
                QubitState {
                    m: [[m[0][0], m[0][1] * phase], [m[1][0] * phase.conj(), m[1][1]]],
                }
            }
            Axis::Y => {
                let (s, c) = (angle / 2.0).sin_cos();
                // U = [[c, -s], [s, c]] is real, so U† = Uᵀ.
                let a00 = m[0][0] * c - m[1][0] * s;
                let a01 = m[0][1] * c - m[1][1] * s;
                let a10 = m[0][0] * s + m[1][0] * c;
                let a11 = m[0][1] * s + m[1][1] * c;
                QubitState {
                    m: [[a00 * c - a01 * s, a00 * s + a01 * c], [a10 * c - a11 * s, a10 * s + a11 * c]],
                }
            }
        }
    }

    pub fn apply_channel(&self, channel: &NoiseChannel) -> Result<Self> {
        channel.validate()?;
        Ok(self.channel_unchecked(channel))
    }

    pub(crate) fn channel_unchecked(&self, channel: &NoiseChannel) -> Self {
        let p = channel.probability;
        let q = 1.0 - p;
        let m = &self.m;
        let m = match channel.kind {
            ChannelKind::Depolarizing => {
                let mix = Complex64::new(p / 2.0, 0.0);
                [[m[0][0] * q + mix, m[0][1] * q], [m[1][0] * q, m[1][1] * q + mix]]
            }
            // XρX swaps both the diagonal and the off-diagonal entries.
            ChannelKind::BitFlip => [
                [m[0][0] * q + m[1][1] * p, m[0][1] * q + m[1][0] * p],
                [m[1][0] * q + m[0][1] * p, m[1][1] * q + m[0][0] * p],
            ],
            // ZρZ negates the coherences.
            ChannelKind::PhaseFlip => [[m[0][0], m[0][1] * (q - p)], [m[1][0] * (q - p), m[1][1]]],
        };
        QubitState { m }
    }

    /// `Tr(ρ·|ψ⟩⟨ψ|)`; `label` must be pure.
    pub fn projection_probability(&self, label: &QubitState) -> Result<f64> {
        if !label.is_pure() {
            return Err(Error::invalid(format!("label state must be pure, purity is {}", label.purity())));
        }
        Ok(self.overlap(label))
    }

    pub(crate) fn overlap(&self, other: &QubitState) -> f64 {
        let (a, b) = (&self.m, &other.m);
        let t = a[0][0] * b[0][0] + a[0][1] * b[1][0] + a[1][0] * b[0][1] + a[1][1] * b[1][1];
        t.re.clamp(0.0, 1.0)
    }

    /// Trace distance `½‖ρ − σ‖₁`, which for qubits is half the Bloch-vector distance.
    pub fn trace_distance(&self, other: &QubitState) -> f64 {
        let (a, b) = (self.bloch(), other.bloch());
        let d2: f64 = a.iter().zip(&b).map(|(x, y)| (x - y) * (x - y)).sum();
        d2.sqrt() / 2.0
    }
}

/// State vector for the noiseless path. Gate conventions match
/// [`QubitState::apply_rotation`], so `to_state` reproduces the density-matrix result.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Amplitudes([Complex64; 2]);

impl Amplitudes {
    pub(crate) fn ground() -> Self {
        Amplitudes([ONE, ZERO])
    }

    pub(crate) fn rotate(self, axis: Axis, angle: f64) -> Self {
        let [a, b] = self.0;
        let (s, c) = (angle / 2.0).sin_cos();
        match axis {
            Axis::Z => {
                let phase = Complex64::new(c, -s);
                Amplitudes([a * phase, b * phase.conj()])
            }
            Axis::Y => Amplitudes([a * c - b * s, a * s + b * c]),
        }
    }

    /// `⟨φ|σ|φ⟩` for a density matrix `σ`.
    pub(crate) fn overlap(&self, other: &QubitState) -> f64 {
        let [a, b] = self.0;
        let m = &other.m;
        let t = a.conj() * (m[0][0] * a + m[0][1] * b) + b.conj() * (m[1][0] * a + m[1][1] * b);
        t.re.clamp(0.0, 1.0)
    }

    pub(crate) fn to_state(self) -> QubitState {
        let [a, b] = self.0;
        QubitState {
            m: [[a * a.conj(), a * b.conj()], [b * a.conj(), b * b.conj()]],
        }
    }
}

/// True when no gate is followed by a non-trivial channel.
pub(crate) fn gates_are_clean(noise: Option<&NoiseModel>) -> bool {
    noise.is_none_or(|n| n.per_gate_channels.iter().all(|c| c.probability == 0.0))
}

/// `|0⟩⟨0|`.
pub fn ground_state() -> QubitState {
    QubitState::ground()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelKind {
    Depolarizing,
    BitFlip,
    PhaseFlip,
}

impl std::str::FromStr for ChannelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "depolarizing" => Ok(ChannelKind::Depolarizing),
            "bit_flip" | "bit-flip" => Ok(ChannelKind::BitFlip),
            "phase_flip" | "phase-flip" => Ok(ChannelKind::PhaseFlip),
            other => Err(Error::invalid(format!("unknown channel kind {other:?}"))),
        }
    }
}

impl std::fmt::Display for ChannelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ChannelKind::Depolarizing => "depolarizing",
            ChannelKind::BitFlip => "bit_flip",
            ChannelKind::PhaseFlip => "phase_flip",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseChannel {
    pub kind: ChannelKind,
    pub probability: f64,
}

impl NoiseChannel {
    pub fn new(kind: ChannelKind, probability: f64) -> Result<Self> {
        let ch = NoiseChannel { kind, probability };
        ch.validate()?;
        Ok(ch)
    }

    pub fn depolarizing(p: f64) -> Result<Self> {
        Self::new(ChannelKind::Depolarizing, p)
    }

    pub fn bit_flip(p: f64) -> Result<Self> {
        Self::new(ChannelKind::BitFlip, p)
    }

    pub fn phase_flip(p: f64) -> Result<Self> {
        Self::new(ChannelKind::PhaseFlip, p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.probability) {
            return Err(Error::invalid(format!(
                "{} probability must lie in [0, 1], got {}",
                self.kind, self.probability
            )));
        }
        Ok(())
    }

    /// Kraus operators `{K_i}` with `Σ K_i† K_i = I`.
    pub fn kraus_operators(&self) -> Vec<Matrix2> {
        let p = self.probability;
        let c = |x: f64| Complex64::new(x, 0.0);
        let scale = |k: Matrix2, s: f64| k.map(|row| row.map(|e| e * s));
        let id = [[ONE, ZERO], [ZERO, ONE]];
        let x = [[ZERO, ONE], [ONE, ZERO]];
        let y = [[ZERO, c(0.0) - Complex64::i()], [Complex64::i(), ZERO]];
        let z = [[ONE, ZERO], [ZERO, c(-1.0)]];
        match self.kind {
            // (1-p)ρ + p·I/2 = (1 - 3p/4)ρ + (p/4)(XρX + YρY + ZρZ)
            ChannelKind::Depolarizing => vec![
                scale(id, (1.0 - 0.75 * p).sqrt()),
                scale(x, (p / 4.0).sqrt()),
                scale(y, (p / 4.0).sqrt()),
                scale(z, (p / 4.0).sqrt()),
            ],
            ChannelKind::BitFlip => vec![scale(id, (1.0 - p).sqrt()), scale(x, p.sqrt())],
            ChannelKind::PhaseFlip => vec![scale(id, (1.0 - p).sqrt()), scale(z, p.sqrt())],
        }
    }
}

/// Channels applied after every gate, plus a classical readout flip.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct NoiseModel {
    pub per_gate_channels: Vec<NoiseChannel>,
    pub readout_flip: f64,
}

impl NoiseModel {
    pub fn noiseless() -> Self {
        Self::default()
    }

    /// Uncalibrated defaults resembling a trapped-ion device: depolarizing 1%,
    /// bit and phase flips 0.5% each per gate, 1% readout flip.
    pub fn device_like() -> Self {
        NoiseModel {
            per_gate_channels: vec![
                NoiseChannel {
                    kind: ChannelKind::Depolarizing,
                    probability: 0.01,
                },
                NoiseChannel {
                    kind: ChannelKind::BitFlip,
                    probability: 0.005,
                },
                NoiseChannel {
                    kind: ChannelKind::PhaseFlip,
                    probability: 0.005,
                },
            ],
            readout_flip: 0.01,
        }
    }

    pub fn single(channel: NoiseChannel) -> Self {
        NoiseModel {
            per_gate_channels: vec![channel],
            readout_flip: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for ch in &self.per_gate_channels {
            ch.validate()?;
        }
        if !(0.0..=1.0).contains(&self.readout_flip) {
            return Err(Error::invalid(format!(
                "readout flip probability must lie in [0, 1], got {}",
                self.readout_flip
            )));
        }
        Ok(())
    }

    pub fn is_noiseless(&self) -> bool {
        self.readout_flip == 0.0 && self.per_gate_channels.iter().all(|c| c.probability == 0.0)
    }

    pub(crate) fn after_gate(&self, state: QubitState) -> QubitState {
        self.per_gate_channels.iter().fold(state, |s, ch| s.channel_unchecked(ch))
    }

    /// Probability of reading "projected" once the classical bit may have flipped.
    pub fn readout(&self, probability: f64) -> f64 {
        let q = self.readout_flip;
        (1.0 - q) * probability + q * (1.0 - probability)
    }
}

/// Applies a rotation followed by the per-gate channels of `noise`.
pub(crate) fn noisy_gate(state: QubitState, axis: Axis, angle: f64, noise: Option<&NoiseModel>) -> QubitState {
    let s = state.rotate(axis, angle);
    match noise {
        Some(n) => n.after_gate(s),
        None => s,
    }
}

/// Draws `shots` multinomial samples from `probabilities` with a seeded generator.
pub fn sample_counts(probabilities: &[f64], shots: u64, seed: u64) -> Result<Vec<u64>> {
    if shots == 0 {
        return Err(Error::invalid("shots must be positive"));
    }
    if probabilities.is_empty() || probabilities.iter().any(|p| !p.is_finite() || *p < 0.0) {
        return Err(Error::invalid("probabilities must be non-negative and finite"));
    }
    let total: f64 = probabilities.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::invalid(format!("probabilities sum to {total}, expected 1")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts = Vec::with_capacity(probabilities.len());
    let mut remaining = shots;
    let mut mass = 1.0;
    for (i, &p) in probabilities.iter().enumerate() {
        if i + 1 == probabilities.len() {
            counts.push(remaining);
            break;
        }
        // Conditional binomial decomposition of the multinomial.
        let cond = if mass > 0.0 { (p / mass).clamp(0.0, 1.0) } else { 0.0 };
        let k = if remaining == 0 || cond == 0.0 {
            0
        } else if cond >= 1.0 {
            remaining
        } else {
            Binomial::new(remaining, cond).map_err(|e| Error::invalid(e.to_string()))?.sample(&mut rng)
        };
        counts.push(k);
        remaining -= k;
        mass -= p;
    }
    Ok(counts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn assert_close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b}");
    }

    fn diag(s: &QubitState) -> (f64, f64) {
        (s.matrix()[0][0].re, s.matrix()[1][1].re)
    }

    #[test]
    fn ground_state_is_pure_projector() {
        let g = ground_state();
        assert_eq!(diag(&g), (1.0, 0.0));
        assert_eq!(g.trace(), ONE);
        assert_eq!(g.purity(), 1.0);
    }

    #[test]
    fn ry_pi_flips_ground() {
        let s = ground_state().apply_rotation(Axis::Y, PI).unwrap();
        let (a, b) = diag(&s);
        assert_close(a, 0.0, 1e-15);
        assert_close(b, 1.0, 1e-15);
    }

    #[test]
    fn ry_half_pi_is_balanced() {
        let s = ground_state().apply_rotation(Axis::Y, PI / 2.0).unwrap();
        assert_close(s.projection_probability(&QubitState::ground()).unwrap(), 0.5, 1e-15);
        assert_close(s.projection_probability(&QubitState::excited()).unwrap(), 0.5, 1e-15);
    }

    #[test]
    fn rz_fixes_ground() {
        for angle in [0.3, -2.0, 17.0] {
            let s = ground_state().apply_rotation(Axis::Z, angle).unwrap();
            assert_eq!(s, ground_state());
        }
    }

    #[test]
    fn non_finite_angle_rejected() {
        assert!(matches!(ground_state().apply_rotation(Axis::Y, f64::NAN), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn channel_examples() {
        let g = ground_state();
        let d = g.apply_channel(&NoiseChannel::depolarizing(0.5).unwrap()).unwrap();
        assert_eq!(diag(&d), (0.75, 0.25));
        let b = g.apply_channel(&NoiseChannel::bit_flip(1.0).unwrap()).unwrap();
        assert_eq!(diag(&b), (0.0, 1.0));
        let any = QubitState::from_bloch(0.3, -0.4, 0.5).unwrap();
        let m = any.apply_channel(&NoiseChannel::depolarizing(1.0).unwrap()).unwrap();
        assert_eq!(m, QubitState::maximally_mixed());
    }

    #[test]
    fn channel_probability_out_of_range() {
        assert!(NoiseChannel::bit_flip(1.5).is_err());
        let bad = NoiseChannel {
            kind: ChannelKind::PhaseFlip,
            probability: -0.1,
        };
        assert!(ground_state().apply_channel(&bad).is_err());
    }

    #[test]
    fn kraus_completeness() {
        for kind in [ChannelKind::Depolarizing, ChannelKind::BitFlip, ChannelKind::PhaseFlip] {
            for p in [0.0, 0.13, 0.5, 1.0] {
                let ks = NoiseChannel::new(kind, p).unwrap().kraus_operators();
                let mut sum = [[ZERO; 2]; 2];
                for k in &ks {
                    for i in 0..2 {
                        for j in 0..2 {
                            for l in 0..2 {
                                sum[i][j] += k[l][i].conj() * k[l][j];
                            }
                        }
                    }
                }
                assert!((sum[0][0] - ONE).norm() < 1e-12);
                assert!((sum[1][1] - ONE).norm() < 1e-12);
                assert!(sum[0][1].norm() < 1e-12 && sum[1][0].norm() < 1e-12);
            }
        }
    }

    #[test]
    fn projection_examples() {
        let g = QubitState::ground();
        let e = QubitState::excited();
        assert_eq!(g.projection_probability(&g).unwrap(), 1.0);
        assert_eq!(g.projection_probability(&e).unwrap(), 0.0);
        let psi = QubitState::from_bloch(0.6, 0.0, 0.8).unwrap();
        assert_close(QubitState::maximally_mixed().projection_probability(&psi).unwrap(), 0.5, 1e-15);
        assert!(g.projection_probability(&QubitState::maximally_mixed()).is_err());
    }

    #[test]
    fn sample_counts_examples() {
        assert_eq!(sample_counts(&[1.0, 0.0], 100, 3).unwrap(), vec![100, 0]);
        let c = sample_counts(&[0.5, 0.5], 1_000_000, 7).unwrap();
        assert_eq!(c.iter().sum::<u64>(), 1_000_000);
        assert!((c[0] as f64 - 500_000.0).abs() <= 5.0 * 500.0);
        assert_eq!(c, sample_counts(&[0.5, 0.5], 1_000_000, 7).unwrap());
        assert!(sample_counts(&[0.5, 0.5], 0, 7).is_err());
        assert!(sample_counts(&[0.5, 0.6], 10, 7).is_err());
    }

    #[test]
    fn readout_flip_mixes_outcomes() {
        let n = NoiseModel {
            per_gate_channels: vec![],
            readout_flip: 0.1,
        };
        assert_close(n.readout(1.0), 0.9, 1e-15);
        assert_close(n.readout(0.0), 0.1, 1e-15);
        assert!(NoiseModel::device_like().validate().is_ok());
    }

    #[test]
    fn serde_roundtrip_validates() {
        let s = QubitState::from_bloch(0.1, 0.2, -0.3).unwrap();
        let text = serde_json::to_string(&s).unwrap();
        let back: QubitState = serde_json::from_str(&text).unwrap();
        assert_eq!(s, back);
        let bad = r#"{"re":[[2.0,0.0],[0.0,0.0]],"im":[[0.0,0.0],[0.0,0.0]]}"#;
        assert!(serde_json::from_str::<QubitState>(bad).is_err());
    }

    #[test]
    fn amplitudes_match_density_path() {
        let label = QubitState::from_bloch(0.6, 0.0, -0.8).unwrap();
        let mut amp = Amplitudes::ground();
        let mut rho = QubitState::ground();
        for k in 0..15 {
            let axis = if k % 3 == 0 { Axis::Z } else { Axis::Y };
            let angle = 0.37 * k as f64 - 1.1;
            amp = amp.rotate(axis, angle);
            rho = rho.rotate(axis, angle);
        }
        assert_close(amp.overlap(&label), rho.overlap(&label), 1e-14);
        let back = amp.to_state();
        for (i, j) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
            assert!((back.matrix()[i][j] - rho.matrix()[i][j]).norm() < 1e-14);
        }
    }
}
