//! Closed-form references for the scattering cascade.
//!
//! With one static qubit the exchange `σf·σ1` has eigenvalue +1 on the
//! triplet and −3 on the singlet, so the whole cascade splits into two scalar
//! Fabry-Perot problems. With Ω = 0 the qubits are transparent and the
//! channel is a spinless cavity for any `n`.

use num_complex::Complex64;
use wstate_core::linalg::CMatrix;
use wstate_core::scattering::{total_reflection, ChannelConfig};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

fn cis(x: f64) -> Complex64 {
    Complex64::from_polar(1.0, x)
}

/// Scalar version of the cascade rule.
fn scalar_cascade(prev: Complex64, t: Complex64, phase: f64) -> Complex64 {
    let r = t - 1.0;
    let e = cis(2.0 * phase);
    r + e * t * t * prev / (1.0 - e * prev * r)
}

fn scalar_channel(t_qubit: Complex64, c: &ChannelConfig) -> Complex64 {
    let wall = Complex64::new(-1.0, 0.0);
    let after = scalar_cascade(wall, t_qubit, c.kd0);
    scalar_cascade(after, 1.0 / (1.0 + I * c.gamma), c.kd0)
}

fn swap2() -> CMatrix {
    let mut s = CMatrix::zeros(4, 4);
    for (a, b) in [(0, 0), (1, 2), (2, 1), (3, 3)] {
        s[(a, b)] = Complex64::new(1.0, 0.0);
    }
    s
}

fn configs() -> Vec<ChannelConfig> {
    let mut out = vec![ChannelConfig::reference(1)];
    for (kd0, gamma, omega) in [(0.7, 3.0, 0.2), (1.9, 40.0, -0.05), (2.6, 0.5, 1.3), (1.2, 1e3, 1e-3)] {
        out.push(ChannelConfig {
            kd0,
            gamma,
            omega,
            ..ChannelConfig::reference(1)
        });
    }
    out
}

#[test]
fn single_qubit_channel_matches_singlet_triplet_split() {
    let id = CMatrix::identity(4, 4);
    let s = swap2() * Complex64::new(2.0, 0.0) - &id;
    let p_trip = (&id * Complex64::new(3.0, 0.0) + &s) / Complex64::new(4.0, 0.0);
    let p_sing = (&id - &s) / Complex64::new(4.0, 0.0);
    for c in configs() {
        let r_trip = scalar_channel(1.0 / (1.0 + I * c.omega), &c);
        let r_sing = scalar_channel(1.0 / (1.0 - I * 3.0 * c.omega), &c);
        let expect = &p_trip * r_trip + &p_sing * r_sing;
        let got = total_reflection(&c).unwrap();
        let err = (got - expect).iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(err < 1e-12, "{c:?}: {err:e}");
    }
}

#[test]
fn transparent_qubits_leave_a_spinless_cavity() {
    for n in 1..=4 {
        for (kd, kd0, gamma) in [(0.3, 1.1, 5.0), (2.2, 0.4, 200.0)] {
            let c = ChannelConfig {
                n,
                kd,
                kd0,
                gamma,
                omega: 0.0,
                ..ChannelConfig::reference(n)
            };
            // transparent qubits: the wall phase simply accumulates
            let wall = -cis(2.0 * (kd0 + (n - 1) as f64 * kd));
            let expect = scalar_cascade(wall, 1.0 / (1.0 + I * gamma), kd0);
            let got = total_reflection(&c).unwrap();
            let dim = got.nrows();
            for r in 0..dim {
                for k in 0..dim {
                    let want = if r == k { expect } else { Complex64::new(0.0, 0.0) };
                    assert!((got[(r, k)] - want).norm() < 1e-12, "n={n} ({r},{k})");
                }
            }
            assert!((expect.norm() - 1.0).abs() < 1e-12);
        }
    }
}
