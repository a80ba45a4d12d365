use std::f64::consts::PI;

use num_complex::Complex64;
use proptest::prelude::*;
use wstate_core::fom::{evaluate, structure_report};
use wstate_core::ideal::{energy_expectation, evolve_coeffs, plan_jump, wrap_angle};
use wstate_core::kraus::{step, Engine, KrausPair};
use wstate_core::linalg::{self, CVector};
use wstate_core::protocol::{run_ideal, schedule_with, Strategy as Plan};
use wstate_core::scattering::{total_reflection, total_reflection_all_sectors, ChannelConfig};
use wstate_core::{Basis, PhaseBranch, PhaseRotate, StateVector};

fn state(n: usize, raw: &[(f64, f64)]) -> StateVector {
    let v = CVector::from_iterator(n, raw.iter().take(n).map(|&(a, b)| Complex64::new(a, b)));
    let norm = v.norm();
    StateVector::new(Basis::OneHot { qubits: n }, v / Complex64::new(norm, 0.0)).unwrap()
}

fn raw_amps() -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 12).prop_filter("nonzero", |v| {
        v.iter().map(|(a, b)| a * a + b * b).sum::<f64>() > 1e-3
    })
}

/// Channels away from the cavity resonances.
fn channel(n: usize) -> impl Strategy<Value = ChannelConfig> {
    (0.2..3.0f64, 0.3..1.3f64, 10.0..2000.0f64, -1e-3..1e-3f64).prop_map(move |(kd, kd0, gamma, omega)| {
        ChannelConfig {
            kd,
            kd0,
            gamma,
            omega,
            ..ChannelConfig::reference(n)
        }
    })
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn jump_feasible_iff_within_four_times(q in 1usize..20, extra in 0usize..90) {
        let n = q + extra;
        prop_assume!(n >= 2);
        prop_assert_eq!(plan_jump(q, n, 1.0).is_ok(), n <= 4 * q);
    }

    #[test]
    fn wrap_angle_range(x in -100.0..100.0f64) {
        let y = wrap_angle(x);
        prop_assert!(y > -PI && y <= PI);
        prop_assert!(((x - y) / (2.0 * PI)).fract().abs() < 1e-9
            || (1.0 - ((x - y) / (2.0 * PI)).fract().abs()) < 1e-9);
    }

    #[test]
    fn rz_round_trip(raw in raw_amps(), n in 1usize..12, q in 1usize..12, phi in -7.0..7.0f64) {
        prop_assume!(q <= n);
        let psi = state(n, &raw);
        let mut out = psi.clone();
        out.apply_rz(q, phi).unwrap();
        out.apply_rz(q, -phi).unwrap();
        prop_assert!((&out.amps - &psi.amps).norm() < 1e-12);
    }

    #[test]
    fn coefficients_conserve_norm_and_energy(raw in raw_amps(), n in 2usize..12, t in 0.0..20.0f64, j in -2.0..2.0f64) {
        let psi = state(n, &raw);
        let c = evolve_coeffs(n, j, t).unwrap();
        let total: Complex64 = psi.amps.iter().sum();
        let amps = CVector::from_iterator(n, psi.amps.iter().map(|&x| (c.a - c.b) * x + c.b * total));
        let out = StateVector::new(psi.basis, amps).unwrap();
        prop_assert!((out.norm() - 1.0).abs() < 1e-12);
        let e0 = energy_expectation(&psi, j).unwrap();
        let e1 = energy_expectation(&out, j).unwrap();
        prop_assert!((e0 - e1).abs() < 1e-10 * (1.0 + e0.abs()));
    }

    #[test]
    fn ideal_pipeline_reaches_w(n in 1usize..64, forward in any::<bool>(), last in any::<bool>(), j in 0.1..3.0f64) {
        let strategy = if forward { Plan::MaxForward } else { Plan::MinBackward };
        let branch = if last { PhaseBranch::LastNMinusQ } else { PhaseBranch::FirstQ };
        let plan = schedule_with(n, strategy, j, branch).unwrap();
        let run = run_ideal(&plan).unwrap();
        let w = wstate_core::ideal::w_state_vector(n).unwrap();
        prop_assert!(1.0 - run.state.inner(&w).unwrap().norm() < 1e-10);
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn reflection_is_unitary_and_conserves_excitations(c in channel(3)) {
        let rb = total_reflection(&c).unwrap();
        prop_assert!(linalg::unitarity_defect(&rb) < 1e-10);
        for r in 0..rb.nrows() {
            for k in 0..rb.ncols() {
                if (r as u32).count_ones() != (k as u32).count_ones() {
                    prop_assert_eq!(rb[(r, k)], Complex64::new(0.0, 0.0));
                }
            }
        }
    }

    #[test]
    fn kraus_step_keeps_trace_and_hermiticity(c in channel(3), raw in raw_amps()) {
        let pair = KrausPair::for_channel(&c, Engine::Sector).unwrap();
        prop_assert!(pair.completeness_defect() < 1e-10);
        let rho = state(3, &raw).to_basis(pair.basis).unwrap().density();
        let next = step(&rho, &pair).unwrap();
        prop_assert!((next.trace() - 1.0).abs() < 1e-12);
        prop_assert!(linalg::max_abs(&(&next.mat - next.mat.adjoint())) < 1e-14);
        prop_assert!(linalg::min_hermitian_eigenvalue(&next.mat) > -1e-10);
    }

    #[test]
    fn sector_and_full_pairs_agree(c in channel(3)) {
        let full = KrausPair::for_channel(&c, Engine::Full).unwrap();
        let sector = KrausPair::for_channel(&c, Engine::Sector).unwrap();
        for a in 0..sector.basis.dim() {
            for b in 0..sector.basis.dim() {
                let (fa, fb) = (sector.basis.full_index(a), sector.basis.full_index(b));
                prop_assert!((full.m0[(fa, fb)] - sector.m0[(a, b)]).norm() < 1e-12);
                prop_assert!((full.m1[(fa, fb)] - sector.m1[(a, b)]).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn fom_has_half_wavelength_period(c in channel(3)) {
        let shifted = ChannelConfig { kd: c.kd + PI, kd0: c.kd0 + PI, ..c };
        let (a, b) = (evaluate(&c), evaluate(&shifted));
        prop_assert_eq!(a.degenerate, b.degenerate);
        if !a.degenerate {
            prop_assert!((a.fom - b.fom).abs() < 1e-9, "{} vs {}", a.fom, b.fom);
        }
    }

    // Only holds when neighbouring qubits sit a whole number of half
    // wavelengths apart; generic spacing breaks the permutation symmetry.
    #[test]
    fn transfer_amplitudes_are_uniform(c in channel(4), m in 1usize..3) {
        let c = ChannelConfig { kd: m as f64 * PI, ..c };
        let r = structure_report(&total_reflection_all_sectors(&c).unwrap()).unwrap();
        prop_assert!(r.alpha_spread <= 1e-8 * (1.0 + r.alpha.norm()));
    }
}
