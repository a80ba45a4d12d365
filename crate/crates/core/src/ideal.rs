//! Closed-form dynamics of the all-to-all exchange Hamiltonian
//! `H = J Σ_{i<j} σ_i·σ_j` in the one-hot subspace, with a dense full-space
//! oracle for cross-checking. `ħ = 1` throughout.

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{CMatrix, CVector, I};
use crate::state::{Basis, StateVector};

/// One-hot block of the Hamiltonian: `J(n−1)(n−4)/2` on the diagonal and
/// `2J` everywhere off it.
pub fn build_onehot_hamiltonian(n: usize, j: f64) -> Result<CMatrix> {
    if n == 0 {
        return Err(Error::InvalidArgument("qubit count must be positive".into()));
    }
    let nf = n as f64;
    let diag = j * (nf - 1.0) * (nf - 4.0) / 2.0;
    Ok(CMatrix::from_fn(n, n, |r, c| {
        Complex64::new(if r == c { diag } else { 2.0 * j }, 0.0)
    }))
}

/// Amplitudes after evolving `u_i` for time `t`: `a` stays on `u_i`, `b` lands
/// on every other one-hot label.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvolutionCoeffs {
    pub a: Complex64,
    pub b: Complex64,
    pub n: usize,
    pub j: f64,
    pub t: f64,
}

impl EvolutionCoeffs {
    /// `|a|² + (n−1)|b|²`
    pub fn norm_sqr(&self) -> f64 {
        self.a.norm_sqr() + (self.n as f64 - 1.0) * self.b.norm_sqr()
    }
}

/// Closed-form `a(t)`, `b(t)`. The constant diagonal shift of the one-hot
/// Hamiltonian only contributes a global phase and is left out.
pub fn evolve_coeffs(n: usize, j: f64, t: f64) -> Result<EvolutionCoeffs> {
    if n < 2 {
        return Err(Error::InvalidArgument("evolve_coeffs needs n >= 2".into()));
    }
    let nf = n as f64;
    let x = j * nf * t;
    let envelope = Complex64::from_polar(1.0, -(nf - 2.0) * j * t);
    let transfer = -I * (2.0 / nf) * x.sin();
    Ok(EvolutionCoeffs {
        a: (Complex64::from_polar(1.0, x) + transfer) * envelope,
        b: transfer * envelope,
        n,
        j,
        t,
    })
}

/// A `W_q → W_n` jump: stopping time and the branch amplitudes there.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct JumpSpec {
    pub q: usize,
    pub n: usize,
    pub j: f64,
    pub t_w: f64,
    /// `arg(c/d)`
    pub theta: f64,
    /// Amplitude on each initially excited label.
    pub c: Complex64,
    /// Amplitude on each initially empty label.
    pub d: Complex64,
}

pub fn plan_jump(q: usize, n: usize, j: f64) -> Result<JumpSpec> {
    plan_jump_branch(q, n, j, 0)
}

/// Like [`plan_jump`], but picks the `branch`-th positive solution of
/// `sin²(|J| n t) = n / 4q` (branch 0 is the earliest).
pub fn plan_jump_branch(q: usize, n: usize, j: f64, branch: usize) -> Result<JumpSpec> {
    if q == 0 || q > n {
        return Err(Error::InvalidArgument(format!("need 1 <= q <= n, got q={q}, n={n}")));
    }
    if n < 2 {
        return Err(Error::InvalidArgument("a jump needs n >= 2".into()));
    }
    if n > 4 * q {
        return Err(Error::JumpInfeasible { q, n });
    }
    if j == 0.0 || !j.is_finite() {
        return Err(Error::InvalidArgument(format!("exchange energy must be finite and nonzero, got {j}")));
    }
    let target = n as f64 / (4.0 * q as f64);
    let x0 = target.sqrt().asin();
    let x = if n == 4 * q {
        x0 + branch as f64 * PI
    } else {
        let k = (branch / 2) as f64;
        if branch.is_multiple_of(2) {
            k * PI + x0
        } else {
            (k + 1.0) * PI - x0
        }
    };
    let t_w = x / (n as f64 * j.abs());
    let co = evolve_coeffs(n, j, t_w)?;
    let sq = (q as f64).sqrt();
    let c = (co.a + (q as f64 - 1.0) * co.b) / sq;
    let d = sq * co.b;
    if (d.norm_sqr() - 1.0 / n as f64).abs() > 1e-9 {
        return Err(Error::Numerical(format!(
            "|d|^2 = {} differs from 1/n at the stopping time",
            d.norm_sqr()
        )));
    }
    Ok(JumpSpec {
        q,
        n,
        j,
        t_w,
        theta: (c / d).arg(),
        c,
        d,
    })
}

/// Which side of a jump gets the z rotations.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PhaseBranch {
    /// Qubits `1..=q`, the ones holding the initial `W_q`.
    #[default]
    FirstQ,
    /// Qubits `q+1..=n`.
    LastNMinusQ,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseCorrection {
    pub branch: PhaseBranch,
    pub qubits: Vec<usize>,
    /// Angle for `R_z(phi)` on every qubit in `qubits`, in `(−π, π]`.
    pub phi: f64,
}

/// Map an angle into `(−π, π]`.
pub fn wrap_angle(x: f64) -> f64 {
    let mut y = x.rem_euclid(2.0 * PI);
    if y > PI {
        y -= 2.0 * PI;
    }
    y
}

/// Rotation that brings both branches of `jump` into phase.
///
/// `R_z(phi)` on every qubit of one branch multiplies that branch's one-hot
/// amplitudes by `e^{iφ}` relative to the other branch.
pub fn correct_phase(jump: &JumpSpec, branch: PhaseBranch) -> PhaseCorrection {
    let (qubits, phi): (Vec<usize>, f64) = match branch {
        PhaseBranch::FirstQ => ((1..=jump.q).collect(), -jump.theta),
        PhaseBranch::LastNMinusQ => ((jump.q + 1..=jump.n).collect(), jump.theta),
    };
    PhaseCorrection {
        branch,
        qubits,
        phi: wrap_angle(phi),
    }
}

/// `W_n` over the one-hot basis.
pub fn w_state_vector(n: usize) -> Result<StateVector> {
    if n == 0 {
        return Err(Error::InvalidArgument("qubit count must be positive".into()));
    }
    let amp = Complex64::new(1.0 / (n as f64).sqrt(), 0.0);
    StateVector::new(Basis::OneHot { qubits: n }, CVector::from_element(n, amp))
}

/// `W_q ⊗ |0…0⟩` over `n` qubits, in the one-hot basis.
pub fn seeded_w_state(q: usize, n: usize) -> Result<StateVector> {
    if q > n {
        return Err(Error::InvalidArgument(format!("q={q} exceeds n={n}")));
    }
    Ok(w_state_vector(q)?.append_ground(n - q))
}

/// `⟨ψ|H|ψ⟩` without the constant diagonal shift, i.e. with matrix elements
/// `2J(1 − δ_ij)`.
pub fn energy_expectation(state: &StateVector, j: f64) -> Result<f64> {
    let norm = state.norm();
    if (norm - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidState(format!("state norm {norm} is not 1")));
    }
    let psi = state.to_basis(Basis::OneHot { qubits: state.basis.qubits() })?;
    let sum: Complex64 = psi.amps.iter().sum();
    let weight: f64 = psi.amps.iter().map(|z| z.norm_sqr()).sum();
    Ok(2.0 * j * (sum.norm_sqr() - weight))
}

/// Full `2^n` Hamiltonian `J Σ_{i<j} σ_i·σ_j`, built from the action of each
/// pair on computational basis states: `σ_z σ_z` is ±1 on the diagonal and
/// `σ_x σ_x + σ_y σ_y` maps `|…0…1…⟩` to `2|…1…0…⟩`.
pub fn full_hamiltonian(n: usize, j: f64) -> DMatrix<f64> {
    let dim = 1usize << n;
    let mut h = DMatrix::<f64>::zeros(dim, dim);
    for b in 0..dim {
        for p in 0..n {
            for q in p + 1..n {
                let bp = (b >> p) & 1;
                let bq = (b >> q) & 1;
                if bp == bq {
                    h[(b, b)] += j;
                } else {
                    h[(b, b)] -= j;
                    let flipped = b ^ (1 << p) ^ (1 << q);
                    h[(flipped, b)] += 2.0 * j;
                }
            }
        }
    }
    h
}

/// Eigendecomposition of the full Hamiltonian, reusable across times.
pub struct FullSpaceOracle {
    pub n: usize,
    eigen: SymmetricEigen<f64, nalgebra::Dyn>,
}

pub const ORACLE_MAX_QUBITS: usize = 12;

impl FullSpaceOracle {
    pub fn new(n: usize, j: f64) -> Result<Self> {
        if n == 0 || n > ORACLE_MAX_QUBITS {
            return Err(Error::InvalidArgument(format!(
                "oracle supports 1..={ORACLE_MAX_QUBITS} qubits, got {n}"
            )));
        }
        Ok(Self {
            n,
            eigen: SymmetricEigen::new(full_hamiltonian(n, j)),
        })
    }

    /// `exp(−iHt)|ψ⟩`
    pub fn evolve(&self, t: f64, psi: &StateVector) -> Result<StateVector> {
        let basis = Basis::Full { qubits: self.n };
        if psi.amps.len() != basis.dim() {
            return Err(Error::DimensionMismatch {
                expected: basis.dim(),
                actual: psi.amps.len(),
            });
        }
        let v = self.eigen.eigenvectors.map(|x| Complex64::new(x, 0.0));
        let mut coeffs = v.adjoint() * &psi.amps;
        for (c, e) in coeffs.iter_mut().zip(self.eigen.eigenvalues.iter()) {
            *c *= Complex64::from_polar(1.0, -e * t);
        }
        StateVector::new(basis, v * coeffs)
    }
}

pub fn brute_force_evolve(n: usize, j: f64, t: f64, psi: &StateVector) -> Result<StateVector> {
    FullSpaceOracle::new(n, j)?.evolve(t, psi)
}

/// Best global phase `e^{iχ}` aligning `a` onto `b`, and the residual
/// `max |e^{iχ} a − b|`.
pub fn phase_aligned_residual(a: &CVector, b: &CVector) -> f64 {
    let overlap = a.dotc(b);
    let phase = if overlap.norm() > 0.0 {
        overlap / overlap.norm()
    } else {
        Complex64::new(1.0, 0.0)
    };
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x * phase - y).norm())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::PhaseRotate;

    #[test]
    fn hamiltonian_small_cases() {
        let h1 = build_onehot_hamiltonian(1, 1.0).unwrap();
        assert_eq!(h1[(0, 0)], Complex64::new(0.0, 0.0));
        let h4 = build_onehot_hamiltonian(4, 1.0).unwrap();
        for r in 0..4 {
            for c in 0..4 {
                let expect = if r == c { 0.0 } else { 2.0 };
                assert_eq!(h4[(r, c)].re, expect);
                assert_eq!(h4[(r, c)].im, 0.0);
            }
        }
        assert!(build_onehot_hamiltonian(0, 1.0).is_err());
    }

    #[test]
    fn hamiltonian_offdiagonal_spectrum() {
        // n=3, J=0.5: off-diagonal part has eigenvalues 2J(n-1)=2 and -2J=-1 (x2).
        let mut h = build_onehot_hamiltonian(3, 0.5).unwrap();
        let shift = h[(0, 0)];
        assert!((shift.re + 0.5).abs() < 1e-15);
        for k in 0..3 {
            h[(k, k)] -= shift;
        }
        let mut ev: Vec<f64> = h.symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!((ev[0] + 1.0).abs() < 1e-12);
        assert!((ev[1] + 1.0).abs() < 1e-12);
        assert!((ev[2] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn coeffs_examples() {
        let c = evolve_coeffs(2, 1.0, PI / 8.0).unwrap();
        assert!((c.a.norm_sqr() - 0.5).abs() < 1e-14);
        assert!((c.b.norm_sqr() - 0.5).abs() < 1e-14);

        let c = evolve_coeffs(3, 1.0, 0.0).unwrap();
        assert!((c.a - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        assert!(c.b.norm() < 1e-15);

        let c = evolve_coeffs(3, 1.0, PI / 9.0).unwrap();
        assert!((c.a.norm_sqr() - 1.0 / 3.0).abs() < 1e-14);
        assert!((c.b.norm_sqr() - 1.0 / 3.0).abs() < 1e-14);
        assert!(((c.a / c.b).arg().abs() - 2.0 * PI / 3.0).abs() < 1e-12);
        assert!(evolve_coeffs(1, 1.0, 0.1).is_err());
    }

    #[test]
    fn coeffs_match_matrix_exponential_of_onehot_block() {
        // Oracle: expm of the one-hot block with its diagonal removed.
        for n in 2..6 {
            let mut h = build_onehot_hamiltonian(n, 0.7).unwrap();
            for k in 0..n {
                h[(k, k)] = Complex64::new(0.0, 0.0);
            }
            for t in [0.1, 0.55, 1.3] {
                let u = (h.clone() * Complex64::new(0.0, -t)).exp();
                let c = evolve_coeffs(n, 0.7, t).unwrap();
                assert!((u[(0, 0)] - c.a).norm() < 1e-12);
                assert!((u[(1, 0)] - c.b).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn jump_examples() {
        let j = plan_jump(1, 4, 1.0).unwrap();
        assert!((j.t_w - PI / 8.0).abs() < 1e-14);
        assert!((j.theta.abs() - PI).abs() < 1e-9);

        for n in 2..10 {
            let s = plan_jump(n, n, 1.3).unwrap();
            assert!((s.d.norm_sqr() - 1.0 / n as f64).abs() < 1e-12);
            assert!((s.theta.cos() - 0.5).abs() < 1e-9);
        }
        assert!(matches!(plan_jump(1, 5, 1.0), Err(Error::JumpInfeasible { q: 1, n: 5 })));
        assert!(plan_jump(3, 2, 1.0).is_err());
        assert!(plan_jump(1, 3, 0.0).is_err());
    }

    #[test]
    fn later_branches_also_reach_w() {
        for branch in 0..5 {
            let s = plan_jump_branch(2, 5, 1.0, branch).unwrap();
            assert!((s.d.norm_sqr() - 0.2).abs() < 1e-12);
            let x = 5.0 * s.t_w;
            assert!((x.sin().powi(2) - 5.0 / 8.0).abs() < 1e-12);
            if branch > 0 {
                let prev = plan_jump_branch(2, 5, 1.0, branch - 1).unwrap();
                assert!(s.t_w > prev.t_w);
            }
        }
    }

    #[test]
    fn phase_correction_examples() {
        let zero = JumpSpec {
            q: 1,
            n: 2,
            j: 1.0,
            t_w: 0.0,
            theta: 0.0,
            c: Complex64::new(1.0, 0.0),
            d: Complex64::new(1.0, 0.0),
        };
        assert_eq!(correct_phase(&zero, PhaseBranch::FirstQ).phi, 0.0);

        let s = plan_jump(3, 12, 1.0).unwrap();
        assert!((s.theta.abs() - PI).abs() < 1e-9);
        assert!((correct_phase(&s, PhaseBranch::FirstQ).phi - PI).abs() < 1e-9);

        let s = plan_jump(1, 3, 1.0).unwrap();
        let fix = correct_phase(&s, PhaseBranch::FirstQ);
        assert_eq!(fix.qubits, vec![1]);
        assert!((wrap_angle(fix.phi + s.theta)).abs() < 1e-12);
    }

    #[test]
    fn w3_round_trip_through_rz() {
        let s = plan_jump(1, 3, 1.0).unwrap();
        let co = evolve_coeffs(3, 1.0, s.t_w).unwrap();
        // qubit 1 excited is u_3
        let mut psi = StateVector::new(
            Basis::OneHot { qubits: 3 },
            CVector::from_vec(vec![co.b, co.b, co.a]),
        )
        .unwrap();
        let fix = correct_phase(&s, PhaseBranch::FirstQ);
        psi.apply_rz(1, fix.phi).unwrap();
        let w = w_state_vector(3).unwrap();
        let fid = w.inner(&psi).unwrap().norm();
        assert!((fid - 1.0).abs() < 1e-12);
    }

    #[test]
    fn w_state_normalized() {
        assert_eq!(w_state_vector(1).unwrap().amps[0].re, 1.0);
        let w = w_state_vector(12).unwrap();
        assert!((w.norm() - 1.0).abs() < 1e-15);
        for a in w.amps.iter() {
            assert!((a.re - 1.0 / 12f64.sqrt()).abs() < 1e-16);
        }
    }

    #[test]
    fn energy_examples() {
        for (q, n) in [(1, 3), (2, 7), (3, 12)] {
            let psi = seeded_w_state(q, n).unwrap();
            let e = energy_expectation(&psi, 0.8).unwrap();
            assert!((e - 2.0 * 0.8 * (q as f64 - 1.0)).abs() < 1e-12);
        }
        let w = w_state_vector(5).unwrap();
        assert!((energy_expectation(&w, 1.0).unwrap() - 8.0).abs() < 1e-12);
        let mut bad = w.clone();
        bad.amps *= Complex64::new(1.1, 0.0);
        assert!(matches!(energy_expectation(&bad, 1.0), Err(Error::InvalidState(_))));
    }

    #[test]
    fn full_hamiltonian_is_symmetric_and_matches_onehot_block() {
        let n = 4;
        let h = full_hamiltonian(n, 1.0);
        assert_eq!(h.clone(), h.transpose());
        let block = build_onehot_hamiltonian(n, 1.0).unwrap();
        for r in 0..n {
            for c in 0..n {
                assert!((h[(1 << r, 1 << c)] - block[(r, c)].re).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn oracle_trivial_cases() {
        let n = 3;
        let o = FullSpaceOracle::new(n, 1.0).unwrap();
        let psi = StateVector::basis_state(Basis::Full { qubits: n }, 5).unwrap();
        let same = o.evolve(0.0, &psi).unwrap();
        assert!(phase_aligned_residual(&same.amps, &psi.amps) < 1e-12);

        let ground = StateVector::basis_state(Basis::Full { qubits: n }, 0).unwrap();
        let out = o.evolve(0.9, &ground).unwrap();
        // |0…0⟩ has energy J·n(n−1)/2
        let expect = Complex64::from_polar(1.0, -3.0 * 0.9);
        assert!((out.amps[0] - expect).norm() < 1e-12);

        let wrong = StateVector::basis_state(Basis::Full { qubits: 2 }, 0).unwrap();
        assert!(o.evolve(0.1, &wrong).is_err());
        assert!(FullSpaceOracle::new(13, 1.0).is_err());
    }
}
