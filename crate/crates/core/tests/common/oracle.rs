//! Dense-matrix reference for single-qubit gate and channel sequences.
//!
//! Every operation is turned into a 4×4 Liouville superoperator
//! `S = Σ K ⊗ conj(K)` acting on the row-major vectorized density matrix,
//! and a sequence is the ordinary matrix product of its superoperators.

#![allow(dead_code)]

use num_complex::Complex64 as C;

pub type M2 = [[C; 2]; 2];
pub type Super = [[C; 4]; 4];

const O: C = C::new(0.0, 0.0);
const I1: C = C::new(1.0, 0.0);
const J: C = C::new(0.0, 1.0);

pub const ID: M2 = [[I1, O], [O, I1]];
pub const X: M2 = [[O, I1], [I1, O]];
pub const Y: M2 = [[O, C::new(0.0, -1.0)], [J, O]];
pub const Z: M2 = [[I1, O], [O, C::new(-1.0, 0.0)]];

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Op {
    Ry(f64),
    Rz(f64),
    Depolarizing(f64),
    BitFlip(f64),
    PhaseFlip(f64),
}

fn add(a: &M2, b: &M2) -> M2 {
    let mut m = [[O; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            m[i][j] = a[i][j] + b[i][j];
        }
    }
    m
}

fn scale(a: &M2, s: C) -> M2 {
    let mut m = *a;
    for row in &mut m {
        for v in row {
            *v *= s;
        }
    }
    m
}

/// `exp(-i·θ·σ/2) = cos(θ/2)·I − i·sin(θ/2)·σ`.
pub fn rotation(pauli: &M2, theta: f64) -> M2 {
    let (s, c) = (theta / 2.0).sin_cos();
    add(&scale(&ID, C::new(c, 0.0)), &scale(pauli, C::new(0.0, -s)))
}

pub fn kraus(op: Op) -> Vec<M2> {
    let r = |x: f64| C::new(x.sqrt(), 0.0);
    match op {
        Op::Ry(t) => vec![rotation(&Y, t)],
        Op::Rz(t) => vec![rotation(&Z, t)],
        // (1-p)ρ + p·I/2 written as a Pauli mixture.
        Op::Depolarizing(p) => vec![
            scale(&ID, r(1.0 - 0.75 * p)),
            scale(&X, r(p / 4.0)),
            scale(&Y, r(p / 4.0)),
            scale(&Z, r(p / 4.0)),
        ],
        Op::BitFlip(p) => vec![scale(&ID, r(1.0 - p)), scale(&X, r(p))],
        Op::PhaseFlip(p) => vec![scale(&ID, r(1.0 - p)), scale(&Z, r(p))],
    }
}

pub fn superoperator(op: Op) -> Super {
    let mut s = [[O; 4]; 4];
    for k in kraus(op) {
        for i in 0..2 {
            for j in 0..2 {
                for a in 0..2 {
                    for b in 0..2 {
                        s[2 * i + j][2 * a + b] += k[i][a] * k[j][b].conj();
                    }
                }
            }
        }
    }
    s
}

fn mul(a: &Super, b: &Super) -> Super {
    let mut m = [[O; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            for k in 0..4 {
                m[i][j] += a[i][k] * b[k][j];
            }
        }
    }
    m
}

/// Superoperator of `ops` applied in order.
pub fn compose(ops: &[Op]) -> Super {
    let mut total = superoperator(Op::Rz(0.0));
    for op in ops {
        total = mul(&superoperator(*op), &total);
    }
    total
}

pub fn apply(s: &Super, rho: &M2) -> M2 {
    let v = [rho[0][0], rho[0][1], rho[1][0], rho[1][1]];
    let mut out = [O; 4];
    for i in 0..4 {
        for k in 0..4 {
            out[i] += s[i][k] * v[k];
        }
    }
    [[out[0], out[1]], [out[2], out[3]]]
}

/// `½(I + xX + yY + zZ)`.
pub fn from_bloch(x: f64, y: f64, z: f64) -> M2 {
    let m = add(
        &add(&ID, &scale(&X, C::new(x, 0.0))),
        &add(&scale(&Y, C::new(y, 0.0)), &scale(&Z, C::new(z, 0.0))),
    );
    scale(&m, C::new(0.5, 0.0))
}

pub fn max_abs_diff(a: &M2, b: &M2) -> f64 {
    let mut d: f64 = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            d = d.max((a[i][j] - b[i][j]).norm());
        }
    }
    d
}

/// `Tr(ρ·|ψ⟩⟨ψ|)` for `ψ` given by amplitudes.
pub fn projection(rho: &M2, psi: [C; 2]) -> f64 {
    let mut t = O;
    for i in 0..2 {
        for j in 0..2 {
            t += psi[i].conj() * rho[i][j] * psi[j];
        }
    }
    t.re
}
