//! Convolutional quantum classifier built from grids of single qubits.
//!
//! Layer `l` holds an `out_height × out_width` grid of qubits. The qubit at
//! `(h, w)` reads the `(2r+1)×(2r+1)` patch of the previous tensor centred at
//! `(p_h, q_w)` (zero padded), runs `K` re-upload gates whose angles are
//! weighted patch sums, and is projected onto a fixed state. The projection
//! probabilities form the next tensor. Weights are shared by every qubit of a
//! layer. The first `num_classes` qubits of the last grid, in row-major
//! order, are read out; the rest are ancillas.

use serde::{Deserialize, Serialize};

use crate::classifier::Classifier;
use crate::dra::{normalize_readout, Ansatz};
use crate::error::{Error, Result};
use crate::mnist::ImageTensor;
use crate::qsim::{gates_are_clean, noisy_gate, Amplitudes, NoiseModel, QubitState};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CqcLayerSpec {
    pub in_height: usize,
    pub in_width: usize,
    pub out_height: usize,
    pub out_width: usize,
    /// Receptive half-width, the same along both axes.
    pub field_radius: usize,
    /// Number of re-upload gates per qubit.
    pub depth: usize,
    pub projection_state: QubitState,
    #[serde(default)]
    pub gate_order: Ansatz,
}

impl CqcLayerSpec {
    pub fn new(input: (usize, usize), output: (usize, usize), field_radius: usize, depth: usize) -> Self {
        CqcLayerSpec {
            in_height: input.0,
            in_width: input.1,
            out_height: output.0,
            out_width: output.1,
            field_radius,
            depth,
            projection_state: QubitState::excited(),
            gate_order: Ansatz::Alternating,
        }
    }

    pub fn field_side(&self) -> usize {
        2 * self.field_radius + 1
    }

    /// `K · (2r+1)²`.
    pub fn weight_count(&self) -> usize {
        self.depth * self.field_side() * self.field_side()
    }

    pub fn row_centers(&self) -> Vec<usize> {
        centers(self.in_height, self.out_height)
    }

    pub fn col_centers(&self) -> Vec<usize> {
        centers(self.in_width, self.out_width)
    }

    fn validate(&self) -> Result<()> {
        if self.out_height == 0 || self.out_width == 0 || self.in_height == 0 || self.in_width == 0 {
            return Err(Error::invalid("layer dimensions must be positive"));
        }
        if self.depth == 0 {
            return Err(Error::invalid("layer depth must be at least 1"));
        }
        if !self.projection_state.is_pure() {
            return Err(Error::invalid("projection state must be pure"));
        }
        Ok(())
    }
}

/// Receptive-field centres `round((h + 0.5)·n_in/n_out − 0.5)` for each output index.
pub fn centers(n_in: usize, n_out: usize) -> Vec<usize> {
    (0..n_out)
        .map(|h| {
            let c = ((h as f64 + 0.5) * n_in as f64 / n_out as f64 - 0.5).round();
            c.clamp(0.0, (n_in - 1) as f64) as usize
        })
        .collect()
}

/// Weighted sum of the patch centred at `center`; entries outside the tensor count as zero.
/// `weights` is the row-major `(2r+1)×(2r+1)` grid for one re-upload step.
pub fn patch_angle(tensor: &ImageTensor, center: (usize, usize), radius: usize, weights: &[f64]) -> Result<f64> {
    let side = 2 * radius + 1;
    if weights.len() != side * side {
        return Err(Error::invalid(format!("weight grid has {} entries, expected {}", weights.len(), side * side)));
    }
    let mut patch = vec![0.0; side * side];
    fill_patch(tensor.values(), tensor.height(), tensor.width(), center, radius, &mut patch);
    Ok(weights.iter().zip(&patch).map(|(w, x)| w * x).sum())
}

fn fill_patch(values: &[f64], height: usize, width: usize, (p, q): (usize, usize), radius: usize, out: &mut [f64]) {
    let r = radius as isize;
    let side = 2 * radius + 1;
    for i in -r..=r {
        for j in -r..=r {
            let (row, col) = (p as isize + i, q as isize + j);
            let inside = row >= 0 && col >= 0 && (row as usize) < height && (col as usize) < width;
            out[(i + r) as usize * side + (j + r) as usize] = if inside { values[row as usize * width + col as usize] } else { 0.0 };
        }
    }
}

/// Every qubit's receptive field, concatenated in row-major qubit order.
fn patches(values: &[f64], spec: &CqcLayerSpec) -> Vec<f64> {
    let field = spec.field_side() * spec.field_side();
    let mut out = vec![0.0; spec.out_height * spec.out_width * field];
    let cols = spec.col_centers();
    let mut chunks = out.chunks_exact_mut(field);
    for p in spec.row_centers() {
        for &q in &cols {
            let chunk = chunks.next().unwrap();
            fill_patch(values, spec.in_height, spec.in_width, (p, q), spec.field_radius, chunk);
        }
    }
    out
}

/// Runs `K` gates from `|0⟩` and returns the projection probability.
pub fn qubit_forward(angles: &[f64], projection: &QubitState, noise: Option<&NoiseModel>, order: Ansatz) -> Result<f64> {
    if angles.is_empty() {
        return Err(Error::invalid("a qubit needs at least one re-upload gate"));
    }
    if !projection.is_pure() {
        return Err(Error::invalid("projection state must be pure"));
    }
    if let Some(a) = angles.iter().find(|a| !a.is_finite()) {
        return Err(Error::invalid(format!("angle {a} is not finite")));
    }
    Ok(qubit_probability(angles, projection, noise, order))
}

fn qubit_probability(angles: &[f64], projection: &QubitState, noise: Option<&NoiseModel>, order: Ansatz) -> f64 {
    let gates = angles
        .iter()
        .enumerate()
        .flat_map(|(k, angle)| order.gates(k + 1).iter().map(move |axis| (*axis, *angle)));
    if gates_are_clean(noise) {
        gates.fold(Amplitudes::ground(), |a, (axis, angle)| a.rotate(axis, angle)).overlap(projection)
    } else {
        gates
            .fold(QubitState::ground(), |s, (axis, angle)| noisy_gate(s, axis, angle, noise))
            .overlap(projection)
    }
}

fn layer_from_patches(patches: &[f64], spec: &CqcLayerSpec, weights: &[f64], noise: Option<&NoiseModel>) -> Result<Vec<f64>> {
    let field = spec.field_side() * spec.field_side();
    let mut angles = vec![0.0; spec.depth];
    let mut out = Vec::with_capacity(spec.out_height * spec.out_width);
    for patch in patches.chunks_exact(field) {
        for (a, w) in angles.iter_mut().zip(weights.chunks_exact(field)) {
            *a = w.iter().zip(patch).map(|(w, x)| w * x).sum();
        }
        if angles.iter().any(|a| !a.is_finite()) {
            return Err(Error::evaluation("non-finite re-upload angle"));
        }
        out.push(qubit_probability(&angles, &spec.projection_state, noise, spec.gate_order));
    }
    Ok(out)
}

/// Maps `tensor` through one layer of shared-weight qubits.
pub fn layer_forward(tensor: &ImageTensor, spec: &CqcLayerSpec, weights: &[f64], noise: Option<&NoiseModel>) -> Result<ImageTensor> {
    if tensor.height() != spec.in_height || tensor.width() != spec.in_width {
        return Err(Error::invalid(format!(
            "layer expects {}x{} input, got {}x{}",
            spec.in_height,
            spec.in_width,
            tensor.height(),
            tensor.width()
        )));
    }
    if weights.len() != spec.weight_count() {
        return Err(Error::invalid(format!("layer expects {} weights, got {}", spec.weight_count(), weights.len())));
    }
    let out = layer_from_patches(&patches(tensor.values(), spec), spec, weights, noise)?;
    ImageTensor::new(spec.out_height, spec.out_width, out)
}

/// First-layer receptive fields of one image, reusable across weight settings
/// of the same architecture.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedInput {
    patches: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Head {
    /// Readouts divided by their sum.
    #[default]
    Normalize,
    /// Softmax of a fully connected layer over the readouts.
    SoftmaxFc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CqcModel {
    pub layers: Vec<CqcLayerSpec>,
    /// Per layer, `K × (2r+1) × (2r+1)` weights in row-major order.
    pub weights: Vec<Vec<f64>>,
    pub head: Head,
    /// `C×C` matrix followed by `C` biases when `head` is `SoftmaxFc`.
    #[serde(default)]
    pub head_weights: Vec<f64>,
    pub num_classes: usize,
    #[serde(default)]
    pub noise: Option<NoiseModel>,
}

impl CqcModel {
    /// The two-layer 28×28 → 7×7 → 3×3 architecture with 3×3 fields.
    pub fn two_layer_spec(depths: [usize; 2]) -> Vec<CqcLayerSpec> {
        vec![
            CqcLayerSpec::new((28, 28), (7, 7), 1, depths[0]),
            CqcLayerSpec::new((7, 7), (3, 3), 1, depths[1]),
        ]
    }

    pub fn param_count_for(layers: &[CqcLayerSpec], head: Head, num_classes: usize) -> usize {
        let conv: usize = layers.iter().map(CqcLayerSpec::weight_count).sum();
        conv + match head {
            Head::Normalize => 0,
            Head::SoftmaxFc => num_classes * num_classes + num_classes,
        }
    }

    pub fn from_genome(layers: Vec<CqcLayerSpec>, head: Head, num_classes: usize, genome: &[f64], noise: Option<NoiseModel>) -> Result<Self> {
        let need = Self::param_count_for(&layers, head, num_classes);
        if genome.len() != need {
            return Err(Error::invalid(format!("genome has {} genes, model needs {need}", genome.len())));
        }
        let mut rest = genome;
        let mut weights = Vec::with_capacity(layers.len());
        for spec in &layers {
            let (w, tail) = rest.split_at(spec.weight_count());
            weights.push(w.to_vec());
            rest = tail;
        }
        let m = CqcModel {
            layers,
            weights,
            head,
            head_weights: rest.to_vec(),
            num_classes,
            noise,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() || self.layers.len() != self.weights.len() {
            return Err(Error::invalid("one weight block per layer is required"));
        }
        for (i, (spec, w)) in self.layers.iter().zip(&self.weights).enumerate() {
            spec.validate()?;
            if w.len() != spec.weight_count() {
                return Err(Error::invalid(format!("layer {i} has {} weights, expected {}", w.len(), spec.weight_count())));
            }
            if i > 0 {
                let prev = &self.layers[i - 1];
                if (prev.out_height, prev.out_width) != (spec.in_height, spec.in_width) {
                    return Err(Error::invalid(format!("layer {i} input does not match layer {} output", i - 1)));
                }
            }
        }
        let last = self.layers.last().unwrap();
        if self.num_classes < 2 || last.out_height * last.out_width < self.num_classes {
            return Err(Error::invalid(format!(
                "final {}x{} grid cannot read out {} classes",
                last.out_height, last.out_width, self.num_classes
            )));
        }
        let head_len = match self.head {
            Head::Normalize => 0,
            Head::SoftmaxFc => self.num_classes * (self.num_classes + 1),
        };
        if self.head_weights.len() != head_len {
            return Err(Error::invalid(format!("head needs {head_len} weights, got {}", self.head_weights.len())));
        }
        if let Some(n) = &self.noise {
            n.validate()?;
        }
        Ok(())
    }

    pub fn param_count(&self) -> usize {
        Self::param_count_for(&self.layers, self.head, self.num_classes)
    }

    pub fn genome(&self) -> Vec<f64> {
        let mut g: Vec<f64> = self.weights.iter().flatten().copied().collect();
        g.extend(&self.head_weights);
        g
    }

    /// Every intermediate tensor, starting with the input.
    pub fn tensors(&self, image: &ImageTensor) -> Result<Vec<ImageTensor>> {
        let mut out = vec![image.clone()];
        for (spec, w) in self.layers.iter().zip(&self.weights) {
            let next = layer_forward(out.last().unwrap(), spec, w, self.noise.as_ref())?;
            out.push(next);
        }
        Ok(out)
    }

    /// Raw projection probabilities of the readout qubits.
    pub fn readouts(&self, image: &ImageTensor) -> Result<Vec<f64>> {
        self.readouts_prepared(&self.prepare(image)?)
    }

    pub fn prepare(&self, image: &ImageTensor) -> Result<PreparedInput> {
        let first = &self.layers[0];
        if image.height() != first.in_height || image.width() != first.in_width {
            return Err(Error::invalid(format!(
                "model expects {}x{} input, got {}x{}",
                first.in_height,
                first.in_width,
                image.height(),
                image.width()
            )));
        }
        Ok(PreparedInput {
            patches: patches(image.values(), first),
        })
    }

    fn readouts_prepared(&self, input: &PreparedInput) -> Result<Vec<f64>> {
        let first = &self.layers[0];
        if input.patches.len() != first.out_height * first.out_width * first.field_side() * first.field_side() {
            return Err(Error::invalid("prepared input does not match this architecture"));
        }
        let noise = self.noise.as_ref();
        let mut values = layer_from_patches(&input.patches, first, &self.weights[0], noise)?;
        for (spec, w) in self.layers.iter().zip(&self.weights).skip(1) {
            values = layer_from_patches(&patches(&values, spec), spec, w, noise)?;
        }
        values.truncate(self.num_classes);
        Ok(values)
    }

    pub fn forward_prepared(&self, input: &PreparedInput) -> Result<Vec<f64>> {
        Ok(self.apply_head(&self.readouts_prepared(input)?))
    }

    /// Maps readout probabilities to a class distribution through the head.
    pub fn apply_head(&self, readouts: &[f64]) -> Vec<f64> {
        let mut r = readouts.to_vec();
        match self.head {
            Head::Normalize => {
                normalize_readout(&mut r, self.noise.as_ref());
                r
            }
            Head::SoftmaxFc => {
                if let Some(n) = &self.noise {
                    r.iter_mut().for_each(|p| *p = n.readout(*p));
                }
                let c = self.num_classes;
                let logits: Vec<f64> = (0..c)
                    .map(|i| {
                        let row = &self.head_weights[i * c..(i + 1) * c];
                        row.iter().zip(&r).map(|(w, x)| w * x).sum::<f64>() + self.head_weights[c * c + i]
                    })
                    .collect();
                softmax(&logits)
            }
        }
    }

    pub fn forward(&self, image: &ImageTensor) -> Result<Vec<f64>> {
        Ok(self.apply_head(&self.readouts(image)?))
    }

    pub fn with_noise(&self, noise: Option<NoiseModel>) -> Self {
        CqcModel { noise, ..self.clone() }
    }
}

fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|x| x / s).collect()
}

impl Classifier for CqcModel {
    fn num_classes(&self) -> usize {
        self.num_classes
    }

    fn probabilities(&self, image: &ImageTensor) -> Result<Vec<f64>> {
        self.forward(image)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qsim::NoiseChannel;
    use std::f64::consts::PI;

    #[test]
    fn patch_angle_examples() {
        let zero = ImageTensor::zeros(5, 5);
        assert_eq!(patch_angle(&zero, (2, 2), 1, &[0.7; 9]).unwrap(), 0.0);
        let t = ImageTensor::new(3, 3, (0..9).map(|i| i as f64 / 10.0).collect()).unwrap();
        let mut onehot = [0.0; 9];
        onehot[4] = 1.0;
        assert_eq!(patch_angle(&t, (1, 1), 1, &onehot).unwrap(), t.get(1, 1));
        let ones = ImageTensor::filled(4, 4, 1.0).unwrap();
        assert_eq!(patch_angle(&ones, (0, 0), 1, &[1.0; 9]).unwrap(), 4.0);
        assert!(patch_angle(&ones, (0, 0), 1, &[1.0; 4]).is_err());
    }

    #[test]
    fn qubit_forward_examples() {
        let one = QubitState::excited();
        assert_eq!(qubit_forward(&[0.0; 5], &one, None, Ansatz::Alternating).unwrap(), 0.0);
        let p = qubit_forward(&[1.234, PI], &one, None, Ansatz::Alternating).unwrap();
        assert!((p - 1.0).abs() < 1e-15);
        let full = NoiseModel::single(NoiseChannel::depolarizing(1.0).unwrap());
        assert_eq!(qubit_forward(&[1.234, PI], &one, Some(&full), Ansatz::Alternating).unwrap(), 0.5);
        assert!(qubit_forward(&[], &one, None, Ansatz::Alternating).is_err());
    }

    #[test]
    fn centers_cover_fig_sizes() {
        assert_eq!(centers(28, 7), vec![2, 6, 10, 14, 18, 22, 26]);
        assert_eq!(centers(7, 3), vec![1, 3, 5]);
        assert_eq!(centers(5, 5), vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn zero_input_gives_zero_output() {
        let spec = CqcLayerSpec::new((28, 28), (7, 7), 1, 5);
        let w: Vec<f64> = (0..45).map(|i| (i as f64).sin()).collect();
        let out = layer_forward(&ImageTensor::zeros(28, 28), &spec, &w, None).unwrap();
        assert!(out.values().iter().all(|v| *v == 0.0));
        assert!(layer_forward(&ImageTensor::zeros(27, 28), &spec, &w, None).is_err());
    }

    #[test]
    fn identical_patches_identical_outputs() {
        let spec = CqcLayerSpec::new((28, 28), (7, 7), 1, 5);
        let w: Vec<f64> = (0..45).map(|i| (i as f64 * 0.37).cos()).collect();
        let mut v = vec![0.0; 784];
        for (r, c) in [(2, 2), (22, 14)] {
            for (dr, dc, x) in [(0, 0, 0.8), (1, 0, 0.3), (0, 1, 0.5)] {
                v[(r + dr) * 28 + c + dc] = x;
            }
        }
        let out = layer_forward(&ImageTensor::new(28, 28, v).unwrap(), &spec, &w, None).unwrap();
        assert!(out.get(0, 0) > 0.0);
        assert_eq!(out.get(0, 0), out.get(5, 3));
    }

    #[test]
    fn param_counts() {
        assert_eq!(CqcModel::param_count_for(&CqcModel::two_layer_spec([5, 5]), Head::Normalize, 2), 90);
        assert_eq!(CqcModel::param_count_for(&CqcModel::two_layer_spec([6, 6]), Head::Normalize, 3), 108);
        assert_eq!(CqcModel::param_count_for(&CqcModel::two_layer_spec([7, 8]), Head::Normalize, 4), 135);
        let tiny = vec![CqcLayerSpec::new((1, 1), (1, 1), 0, 1)];
        assert_eq!(CqcModel::param_count_for(&tiny, Head::Normalize, 1), 1);
        assert_eq!(CqcModel::param_count_for(&CqcModel::two_layer_spec([5, 5]), Head::SoftmaxFc, 2), 96);
    }

    #[test]
    fn normalize_head() {
        let m = CqcModel::from_genome(CqcModel::two_layer_spec([5, 5]), Head::Normalize, 2, &[0.0; 90], None).unwrap();
        let p = m.apply_head(&[0.3, 0.1]);
        assert!((p[0] - 0.75).abs() < 1e-15 && (p[1] - 0.25).abs() < 1e-15);
        assert_eq!(m.apply_head(&[0.4, 0.4]), vec![0.5, 0.5]);
        assert_eq!(m.apply_head(&[0.0, 0.0]), vec![0.5, 0.5]);
    }

    #[test]
    fn softmax_head_and_genome_roundtrip() {
        let g: Vec<f64> = (0..96).map(|i| (i as f64 * 0.1).sin()).collect();
        let m = CqcModel::from_genome(CqcModel::two_layer_spec([5, 5]), Head::SoftmaxFc, 2, &g, None).unwrap();
        assert_eq!(m.genome(), g);
        let p = m.forward(&ImageTensor::filled(28, 28, 0.3).unwrap()).unwrap();
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(CqcModel::from_genome(CqcModel::two_layer_spec([5, 5]), Head::SoftmaxFc, 2, &g[..90], None).is_err());
    }

    #[test]
    fn readout_grid_must_fit_classes() {
        let layers = vec![CqcLayerSpec::new((4, 4), (1, 1), 1, 2)];
        assert!(CqcModel::from_genome(layers, Head::Normalize, 2, &[0.0; 18], None).is_err());
    }
}
