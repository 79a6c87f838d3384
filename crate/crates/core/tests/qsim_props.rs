mod common;

use common::oracle::{self, Op};
use proptest::prelude::*;
use qrobust_core::qsim::{sample_counts, ChannelKind, NoiseChannel, QubitState};
use qrobust_core::Axis;

fn op_strategy() -> impl Strategy<Value = Op> {
    let angle = -10.0f64..10.0;
    let p = 0.0f64..=1.0;
    prop_oneof![
        angle.clone().prop_map(Op::Ry),
        angle.prop_map(Op::Rz),
        p.clone().prop_map(Op::Depolarizing),
        p.clone().prop_map(Op::BitFlip),
        p.prop_map(Op::PhaseFlip),
    ]
}

fn bloch_strategy() -> impl Strategy<Value = [f64; 3]> {
    (-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0).prop_map(|(x, y, z)| {
        let n = (x * x + y * y + z * z).sqrt();
        if n > 1.0 {
            [x / n, y / n, z / n]
        } else {
            [x, y, z]
        }
    })
}

fn apply_ops(mut s: QubitState, ops: &[Op]) -> QubitState {
    for op in ops {
        s = match *op {
            Op::Ry(t) => s.apply_rotation(Axis::Y, t).unwrap(),
            Op::Rz(t) => s.apply_rotation(Axis::Z, t).unwrap(),
            Op::Depolarizing(p) => s.apply_channel(&NoiseChannel::new(ChannelKind::Depolarizing, p).unwrap()).unwrap(),
            Op::BitFlip(p) => s.apply_channel(&NoiseChannel::new(ChannelKind::BitFlip, p).unwrap()).unwrap(),
            Op::PhaseFlip(p) => s.apply_channel(&NoiseChannel::new(ChannelKind::PhaseFlip, p).unwrap()).unwrap(),
        };
    }
    s
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn sequences_match_dense_composition(b in bloch_strategy(), ops in prop::collection::vec(op_strategy(), 0..=20)) {
        let start = QubitState::from_bloch(b[0], b[1], b[2]).unwrap();
        let got = apply_ops(start, &ops);
        let want = oracle::apply(&oracle::compose(&ops), &oracle::from_bloch(b[0], b[1], b[2]));
        prop_assert!(oracle::max_abs_diff(got.matrix(), &want) < 1e-10);
    }

    #[test]
    fn sequences_preserve_state_invariants(b in bloch_strategy(), ops in prop::collection::vec(op_strategy(), 0..=20)) {
        let s = apply_ops(QubitState::from_bloch(b[0], b[1], b[2]).unwrap(), &ops);
        prop_assert!(s.is_valid(1e-10));
    }

    #[test]
    fn rotation_group_law(b in bloch_strategy(), y in any::<bool>(), t1 in -10.0f64..10.0, t2 in -10.0f64..10.0) {
        let axis = if y { Axis::Y } else { Axis::Z };
        let s = QubitState::from_bloch(b[0], b[1], b[2]).unwrap();
        let two = s.apply_rotation(axis, t1).unwrap().apply_rotation(axis, t2).unwrap();
        let one = s.apply_rotation(axis, t1 + t2).unwrap();
        prop_assert!(oracle::max_abs_diff(two.matrix(), one.matrix()) < 1e-10);
    }

    #[test]
    fn depolarizing_never_raises_purity(b in bloch_strategy(), p in 0.0f64..=1.0) {
        let s = QubitState::from_bloch(b[0], b[1], b[2]).unwrap();
        let d = s.apply_channel(&NoiseChannel::depolarizing(p).unwrap()).unwrap();
        prop_assert!(d.purity() <= s.purity() + 1e-12);
        prop_assert!(d.purity() >= 0.5 - 1e-12);
    }

    #[test]
    fn kraus_sets_are_complete(kind in prop_oneof![Just(ChannelKind::Depolarizing), Just(ChannelKind::BitFlip), Just(ChannelKind::PhaseFlip)], p in 0.0f64..=1.0) {
        let ch = NoiseChannel::new(kind, p).unwrap();
        let mut sum = [[num_complex::Complex64::new(0.0, 0.0); 2]; 2];
        for k in ch.kraus_operators() {
            for i in 0..2 {
                for j in 0..2 {
                    for a in 0..2 {
                        sum[i][j] += k[a][i].conj() * k[a][j];
                    }
                }
            }
        }
        prop_assert!(oracle::max_abs_diff(&sum, &oracle::ID) < 1e-12);
    }

    #[test]
    fn counts_sum_to_shots(p in 0.0f64..=1.0, shots in 1u64..5000, seed in any::<u64>()) {
        let c = sample_counts(&[p, 1.0 - p], shots, seed).unwrap();
        prop_assert_eq!(c.iter().sum::<u64>(), shots);
        prop_assert_eq!(c, sample_counts(&[p, 1.0 - p], shots, seed).unwrap());
    }
}

#[test]
fn library_kraus_operators_reproduce_the_closed_forms() {
    let s = QubitState::from_bloch(0.3, -0.4, 0.5).unwrap();
    for kind in [ChannelKind::Depolarizing, ChannelKind::BitFlip, ChannelKind::PhaseFlip] {
        let ch = NoiseChannel::new(kind, 0.37).unwrap();
        let mut want = [[num_complex::Complex64::new(0.0, 0.0); 2]; 2];
        let m = s.matrix();
        for k in ch.kraus_operators() {
            for i in 0..2 {
                for j in 0..2 {
                    for a in 0..2 {
                        for b in 0..2 {
                            want[i][j] += k[i][a] * m[a][b] * k[j][b].conj();
                        }
                    }
                }
            }
        }
        let got = s.apply_channel(&ch).unwrap();
        assert!(oracle::max_abs_diff(got.matrix(), &want) < 1e-12, "{kind:?}");
    }
}

#[test]
fn balanced_shots_concentrate() {
    let c = sample_counts(&[0.5, 0.5], 1_000_000, 7).unwrap();
    for n in c {
        assert!((n as f64 - 500_000.0).abs() < 5.0 * 500.0, "{n}");
    }
}
