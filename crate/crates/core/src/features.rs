//! Linear and kernel PCA feature extraction.
//!
//! Both fits use a deterministic symmetric eigensolver and canonicalize
//! component signs so that the largest-magnitude entry of every eigenvector
//! is positive. Fitted models persist to a small binary format:
//!
//! ```text
//! offset  field
//! 0       magic  b"QPCA"
//! 4       version u32 (= 1)
//! 8       kind u8 (0 linear, 1 kernel_rbf, 2 kernel_linear)
//! 9       input_dim u32, output_dim u32, n_samples u32 (0 for linear)
//! 21      gamma f64, total_variance f64
//! 37      explained_variance [f64; output_dim]
//!         linear: mean [f64; input_dim], components [[f64; input_dim]; output_dim]
//!         kernel: column_means [f64; n], grand_mean f64,
//!                 coefficients [[f64; n]; output_dim], samples [[f64; input_dim]; n]
//! ```
//!
//! Integers and floats are little-endian.

use std::io::{Cursor, Read, Write};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mnist::{ImageTensor, LabeledDataset};

const MAGIC: &[u8; 4] = b"QPCA";
const VERSION: u32 = 1;
/// Eigenvalues below this fraction of the largest count as zero.
const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PcaKind {
    Linear,
    KernelRbf,
    /// Kernel PCA with `k(x, y) = x·y`; reproduces linear PCA and exists for verification.
    KernelLinear,
}

#[derive(Debug, Clone, PartialEq)]
enum Basis {
    Linear {
        mean: Vec<f64>,
        components: Vec<Vec<f64>>,
    },
    Kernel {
        samples: Vec<Vec<f64>>,
        coefficients: Vec<Vec<f64>>,
        column_means: Vec<f64>,
        grand_mean: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PcaModel {
    kind: PcaKind,
    input_dim: usize,
    output_dim: usize,
    kernel_gamma: f64,
    explained_variance: Vec<f64>,
    total_variance: f64,
    basis: Basis,
}

struct Eigen {
    values: Vec<f64>,
    vectors: Vec<Vec<f64>>,
}

/// Top `k` eigenpairs of a symmetric matrix, descending, sign-canonicalized.
fn top_eigen(m: DMatrix<f64>, k: usize) -> Result<Eigen> {
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|a, b| eig.eigenvalues[*b].total_cmp(&eig.eigenvalues[*a]).then(a.cmp(b)));
    let largest = eig.eigenvalues[order[0]].max(0.0);
    let rank = order.iter().filter(|i| eig.eigenvalues[**i] > RANK_TOL * largest && largest > 0.0).count();
    if rank < k {
        return Err(Error::RankDeficient { requested: k, rank });
    }
    let vectors = order[..k]
        .iter()
        .map(|&i| {
            let mut v: Vec<f64> = eig.eigenvectors.column(i).iter().copied().collect();
            canonicalize_sign(&mut v);
            v
        })
        .collect();
    Ok(Eigen {
        values: order[..k].iter().map(|&i| eig.eigenvalues[i]).collect(),
        vectors,
    })
}

/// Flips `v` so its largest-magnitude entry (first one on ties) is positive.
pub fn canonicalize_sign(v: &mut [f64]) {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v.get(best).is_some_and(|x| *x < 0.0) {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `1 / median pairwise squared distance`.
pub fn median_heuristic_gamma(samples: &[Vec<f64>]) -> Result<f64> {
    let mut d: Vec<f64> = Vec::with_capacity(samples.len() * samples.len().saturating_sub(1) / 2);
    for i in 0..samples.len() {
        for j in i + 1..samples.len() {
            d.push(sq_dist(&samples[i], &samples[j]));
        }
    }
    if d.is_empty() {
        return Err(Error::invalid("median heuristic needs at least two samples"));
    }
    let mid = d.len() / 2;
    let (_, median, _) = d.select_nth_unstable_by(mid, f64::total_cmp);
    if *median <= 0.0 {
        return Err(Error::NumericDomain("median pairwise distance is zero".into()));
    }
    Ok(1.0 / *median)
}

impl PcaModel {
    /// Fits on the images of `dataset`.
    pub fn fit(dataset: &LabeledDataset, kind: PcaKind, output_dim: usize, kernel_gamma: Option<f64>) -> Result<Self> {
        let samples: Vec<Vec<f64>> = dataset.images.iter().map(|t| t.values().to_vec()).collect();
        Self::fit_vectors(&samples, kind, output_dim, kernel_gamma)
    }

    pub fn fit_vectors(samples: &[Vec<f64>], kind: PcaKind, output_dim: usize, kernel_gamma: Option<f64>) -> Result<Self> {
        if output_dim == 0 {
            return Err(Error::invalid("output_dim must be at least 1"));
        }
        if samples.len() < output_dim + 1 {
            return Err(Error::invalid(format!(
                "need at least {} samples for {output_dim} components, got {}",
                output_dim + 1,
                samples.len()
            )));
        }
        let input_dim = samples[0].len();
        if samples.iter().any(|s| s.len() != input_dim) {
            return Err(Error::invalid("samples have inconsistent dimensions"));
        }
        match kind {
            PcaKind::Linear => Self::fit_linear(samples, input_dim, output_dim),
            PcaKind::KernelRbf | PcaKind::KernelLinear => {
                let gamma = match (kind, kernel_gamma) {
                    (PcaKind::KernelLinear, _) => 0.0,
                    (_, Some(g)) if g > 0.0 && g.is_finite() => g,
                    (_, Some(g)) => return Err(Error::invalid(format!("kernel gamma must be positive, got {g}"))),
                    (_, None) => median_heuristic_gamma(samples)?,
                };
                Self::fit_kernel(samples, kind, gamma, input_dim, output_dim)
            }
        }
    }

    fn fit_linear(samples: &[Vec<f64>], d: usize, k: usize) -> Result<Self> {
        let n = samples.len();
        let mut mean = vec![0.0; d];
        for s in samples {
            mean.iter_mut().zip(s).for_each(|(m, x)| *m += x);
        }
        mean.iter_mut().for_each(|m| *m /= n as f64);
        let centered = DMatrix::from_fn(n, d, |i, j| samples[i][j] - mean[j]);
        let cov = centered.tr_mul(&centered) / (n as f64 - 1.0);
        let total_variance = cov.trace();
        let eig = top_eigen(cov, k)?;
        Ok(PcaModel {
            kind: PcaKind::Linear,
            input_dim: d,
            output_dim: k,
            kernel_gamma: 0.0,
            explained_variance: eig.values,
            total_variance,
            basis: Basis::Linear { mean, components: eig.vectors },
        })
    }

    fn fit_kernel(samples: &[Vec<f64>], kind: PcaKind, gamma: f64, d: usize, k: usize) -> Result<Self> {
        let n = samples.len();
        let kern = |a: &[f64], b: &[f64]| kernel_value(kind, gamma, a, b);
        let mut gram = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let v = kern(&samples[i], &samples[j]);
                gram[(i, j)] = v;
                gram[(j, i)] = v;
            }
        }
        let column_means: Vec<f64> = (0..n).map(|j| gram.column(j).sum() / n as f64).collect();
        let grand_mean = column_means.iter().sum::<f64>() / n as f64;
        let centered = DMatrix::from_fn(n, n, |i, j| gram[(i, j)] - column_means[i] - column_means[j] + grand_mean);
        let total_variance = centered.trace() / n as f64;
        let eig = top_eigen(centered, k)?;
        let coefficients = eig
            .vectors
            .iter()
            .zip(&eig.values)
            .map(|(v, l)| v.iter().map(|x| x / l.sqrt()).collect())
            .collect();
        Ok(PcaModel {
            kind,
            input_dim: d,
            output_dim: k,
            kernel_gamma: gamma,
            explained_variance: eig.values.iter().map(|l| l / n as f64).collect(),
            total_variance,
            basis: Basis::Kernel {
                samples: samples.to_vec(),
                coefficients,
                column_means,
                grand_mean,
            },
        })
    }

    pub fn kind(&self) -> PcaKind {
        self.kind
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    pub fn kernel_gamma(&self) -> Option<f64> {
        (self.kind == PcaKind::KernelRbf).then_some(self.kernel_gamma)
    }

    /// Variance captured by each component.
    pub fn explained_variance(&self) -> &[f64] {
        &self.explained_variance
    }

    pub fn explained_variance_ratio(&self) -> Vec<f64> {
        self.explained_variance.iter().map(|v| v / self.total_variance).collect()
    }

    /// Linear components (one row per component); `None` for kernel models.
    pub fn components(&self) -> Option<&[Vec<f64>]> {
        match &self.basis {
            Basis::Linear { components, .. } => Some(components),
            Basis::Kernel { .. } => None,
        }
    }

    pub fn mean(&self) -> Option<&[f64]> {
        match &self.basis {
            Basis::Linear { mean, .. } => Some(mean),
            Basis::Kernel { .. } => None,
        }
    }

    pub fn transform(&self, image: &ImageTensor) -> Result<Vec<f64>> {
        self.transform_vector(image.values())
    }

    pub fn transform_vector(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_dim {
            return Err(Error::invalid(format!("expected {} input values, got {}", self.input_dim, x.len())));
        }
        Ok(match &self.basis {
            Basis::Linear { mean, components } => components
                .iter()
                .map(|c| c.iter().zip(x).zip(mean).map(|((c, x), m)| c * (x - m)).sum())
                .collect(),
            Basis::Kernel {
                samples,
                coefficients,
                column_means,
                grand_mean,
            } => {
                let kx: Vec<f64> = samples.iter().map(|s| kernel_value(self.kind, self.kernel_gamma, x, s)).collect();
                let row_mean = kx.iter().sum::<f64>() / kx.len() as f64;
                let centered: Vec<f64> = kx.iter().zip(column_means).map(|(k, c)| k - row_mean - c + grand_mean).collect();
                coefficients.iter().map(|a| dot(a, &centered)).collect()
            }
        })
    }

    /// Maps linear-PCA coordinates back to input space.
    pub fn reconstruct(&self, features: &[f64]) -> Result<Vec<f64>> {
        match &self.basis {
            Basis::Linear { mean, components } => {
                if features.len() != self.output_dim {
                    return Err(Error::invalid("feature length does not match output_dim"));
                }
                let mut out = mean.clone();
                for (f, c) in features.iter().zip(components) {
                    out.iter_mut().zip(c).for_each(|(o, c)| *o += f * c);
                }
                Ok(out)
            }
            Basis::Kernel { .. } => Err(Error::invalid("kernel PCA has no linear reconstruction")),
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        let w = &mut out;
        let f64s = |w: &mut Vec<u8>, xs: &[f64]| xs.iter().for_each(|x| w.write_f64::<LittleEndian>(*x).unwrap());
        w.write_all(MAGIC).unwrap();
        w.write_u32::<LittleEndian>(VERSION).unwrap();
        w.write_u8(match self.kind {
            PcaKind::Linear => 0,
            PcaKind::KernelRbf => 1,
            PcaKind::KernelLinear => 2,
        })
        .unwrap();
        let n = match &self.basis {
            Basis::Linear { .. } => 0,
            Basis::Kernel { samples, .. } => samples.len(),
        };
        for v in [self.input_dim, self.output_dim, n] {
            w.write_u32::<LittleEndian>(v as u32).unwrap();
        }
        f64s(w, &[self.kernel_gamma, self.total_variance]);
        f64s(w, &self.explained_variance);
        match &self.basis {
            Basis::Linear { mean, components } => {
                f64s(w, mean);
                components.iter().for_each(|c| f64s(w, c));
            }
            Basis::Kernel {
                samples,
                coefficients,
                column_means,
                grand_mean,
            } => {
                f64s(w, column_means);
                f64s(w, &[*grand_mean]);
                coefficients.iter().for_each(|c| f64s(w, c));
                samples.iter().for_each(|s| f64s(w, s));
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut cur = Cursor::new(bytes);
        let trunc = |cur: &Cursor<&[u8]>| Error::format(cur.position(), "truncated PCA model file");
        let mut magic = [0u8; 4];
        cur.read_exact(&mut magic).map_err(|_| trunc(&cur))?;
        if &magic != MAGIC {
            return Err(Error::format(0, "not a PCA model file"));
        }
        let version = cur.read_u32::<LittleEndian>().map_err(|_| trunc(&cur))?;
        if version != VERSION {
            return Err(Error::format(4, format!("unsupported PCA model version {version}")));
        }
        let kind = match cur.read_u8().map_err(|_| trunc(&cur))? {
            0 => PcaKind::Linear,
            1 => PcaKind::KernelRbf,
            2 => PcaKind::KernelLinear,
            other => return Err(Error::format(8, format!("unknown PCA kind {other}"))),
        };
        let mut u32s = [0usize; 3];
        for v in &mut u32s {
            *v = cur.read_u32::<LittleEndian>().map_err(|_| trunc(&cur))? as usize;
        }
        let [input_dim, output_dim, n] = u32s;
        let expected = 37
            + 8 * match kind {
                PcaKind::Linear => output_dim + input_dim * (output_dim + 1),
                _ => output_dim + n + 1 + output_dim * n + n * input_dim,
            };
        if bytes.len() != expected {
            return Err(Error::format(
                bytes.len().min(expected) as u64,
                format!("PCA model file has {} bytes, header implies {expected}", bytes.len()),
            ));
        }
        let mut read = |len: usize| -> Vec<f64> { (0..len).map(|_| cur.read_f64::<LittleEndian>().unwrap()).collect() };
        let head = read(2);
        let explained_variance = read(output_dim);
        let basis = match kind {
            PcaKind::Linear => Basis::Linear {
                mean: read(input_dim),
                components: (0..output_dim).map(|_| read(input_dim)).collect(),
            },
            _ => {
                let column_means = read(n);
                let grand_mean = read(1)[0];
                let coefficients = (0..output_dim).map(|_| read(n)).collect();
                let samples = (0..n).map(|_| read(input_dim)).collect();
                Basis::Kernel {
                    samples,
                    coefficients,
                    column_means,
                    grand_mean,
                }
            }
        };
        Ok(PcaModel {
            kind,
            input_dim,
            output_dim,
            kernel_gamma: head[0],
            explained_variance,
            total_variance: head[1],
            basis,
        })
    }
}

fn kernel_value(kind: PcaKind, gamma: f64, a: &[f64], b: &[f64]) -> f64 {
    match kind {
        PcaKind::KernelRbf => (-gamma * sq_dist(a, b)).exp(),
        _ => dot(a, b),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn random_samples(n: usize, d: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| (0..d).map(|_| rng.random::<f64>()).collect()).collect()
    }

    #[test]
    fn points_on_a_line() {
        let dir: Vec<f64> = (0..784).map(|i| ((i % 7) as f64 - 3.0) / 10.0).collect();
        let samples: Vec<Vec<f64>> = (0..20).map(|t| dir.iter().map(|d| 0.5 + d * (t as f64 / 20.0 - 0.5)).collect()).collect();
        let m = PcaModel::fit_vectors(&samples, PcaKind::Linear, 1, None).unwrap();
        assert!(m.explained_variance_ratio()[0] >= 0.999);
        assert!(matches!(
            PcaModel::fit_vectors(&samples, PcaKind::Linear, 2, None),
            Err(Error::RankDeficient { requested: 2, rank: 1 })
        ));
    }

    #[test]
    fn components_orthonormal_and_deterministic() {
        let s = random_samples(50, 12, 1);
        let a = PcaModel::fit_vectors(&s, PcaKind::Linear, 4, None).unwrap();
        let b = PcaModel::fit_vectors(&s, PcaKind::Linear, 4, None).unwrap();
        assert_eq!(a, b);
        let c = a.components().unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((dot(&c[i], &c[j]) - want).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn mean_maps_to_origin_and_transform_is_affine() {
        let s = random_samples(40, 10, 2);
        let m = PcaModel::fit_vectors(&s, PcaKind::Linear, 3, None).unwrap();
        let mean = m.mean().unwrap().to_vec();
        assert!(m.transform_vector(&mean).unwrap().iter().all(|v| v.abs() < 1e-12));
        let (a, b) = (&s[0], &s[1]);
        let sum: Vec<f64> = a.iter().zip(b).zip(&mean).map(|((a, b), m)| a + b - m).collect();
        let ta = m.transform_vector(a).unwrap();
        let tb = m.transform_vector(b).unwrap();
        let ts = m.transform_vector(&sum).unwrap();
        for i in 0..3 {
            assert!((ts[i] - ta[i] - tb[i]).abs() < 1e-12);
        }
        assert!(m.transform_vector(&[0.0; 3]).is_err());
    }

    #[test]
    fn kernel_training_points_reproduce_fit_coordinates() {
        let s = random_samples(30, 6, 3);
        let m = PcaModel::fit_vectors(&s, PcaKind::KernelRbf, 2, None).unwrap();
        let Basis::Kernel {
            coefficients,
            column_means,
            grand_mean,
            ..
        } = &m.basis
        else {
            unreachable!()
        };
        // Fit-time coordinates: row i of the centered Gram matrix times α.
        for (i, x) in s.iter().enumerate() {
            let row: Vec<f64> = s.iter().map(|y| kernel_value(PcaKind::KernelRbf, m.kernel_gamma, x, y)).collect();
            let row_mean = row.iter().sum::<f64>() / row.len() as f64;
            assert!((row_mean - column_means[i]).abs() < 1e-12);
            let fitted: Vec<f64> = coefficients
                .iter()
                .map(|a| {
                    a.iter()
                        .zip(&row)
                        .zip(column_means)
                        .map(|((a, k), c)| a * (k - column_means[i] - c + grand_mean))
                        .sum()
                })
                .collect();
            let t = m.transform_vector(x).unwrap();
            for k in 0..2 {
                assert!((fitted[k] - t[k]).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn linear_kernel_matches_linear_pca() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let s: Vec<Vec<f64>> = (0..40)
            .map(|_| (0..8).map(|j| rng.sample::<f64, _>(StandardNormal) * (8 - j) as f64).collect())
            .collect();
        let lin = PcaModel::fit_vectors(&s, PcaKind::Linear, 3, None).unwrap();
        let ker = PcaModel::fit_vectors(&s, PcaKind::KernelLinear, 3, None).unwrap();
        let probe = random_samples(5, 8, 5);
        for k in 0..3 {
            let a: Vec<f64> = probe.iter().map(|x| lin.transform_vector(x).unwrap()[k]).collect();
            let b: Vec<f64> = probe.iter().map(|x| ker.transform_vector(x).unwrap()[k]).collect();
            let sign = if dot(&a, &b) >= 0.0 { 1.0 } else { -1.0 };
            for (x, y) in a.iter().zip(&b) {
                assert!((x - sign * y).abs() < 1e-6, "{x} vs {y}");
            }
        }
    }

    #[test]
    fn persistence_roundtrip() {
        let s = random_samples(25, 5, 6);
        for kind in [PcaKind::Linear, PcaKind::KernelRbf] {
            let m = PcaModel::fit_vectors(&s, kind, 2, None).unwrap();
            let bytes = m.to_bytes();
            assert_eq!(PcaModel::from_bytes(&bytes).unwrap(), m);
            assert!(PcaModel::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        }
        assert!(PcaModel::from_bytes(b"nope").is_err());
    }

    #[test]
    fn too_few_samples() {
        let s = random_samples(2, 5, 7);
        assert!(matches!(PcaModel::fit_vectors(&s, PcaKind::Linear, 2, None), Err(Error::InvalidArgument(_))));
    }
}
