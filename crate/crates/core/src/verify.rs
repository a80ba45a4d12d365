//! Property checks run by `wstate verify`.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use serde::Serialize;

use crate::error::Result;
use crate::ideal::{energy_expectation, evolve_coeffs, phase_aligned_residual, seeded_w_state, FullSpaceOracle};
use crate::kraus::{fit_effective_exchange, run_until, Engine, KrausPair, RunOptions, StopCriterion};
use crate::linalg::{self, CVector};
use crate::protocol::{run_ideal, schedule, torque_stage, w_seed, Strategy, TorqueOptions};
use crate::scattering::{total_reflection, total_reflection_sector, ChannelConfig, SectorBasis};
use crate::state::{Basis, StateVector};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub skipped: bool,
    /// Shape or ordering claim rather than a numeric tolerance.
    pub qualitative: bool,
    /// Worst observed value (for qualitative checks, 1 when the shape holds).
    pub value: f64,
    pub tolerance: f64,
    pub detail: String,
}

#[derive(Clone, Debug, Default)]
pub struct VerifyOptions {
    /// Skip full-space oracles at `n >= 5`.
    pub fast: bool,
    /// Name of a check whose tolerance is replaced by an impossible one.
    pub inject: Option<String>,
}

struct Suite<'a> {
    opts: &'a VerifyOptions,
    out: Vec<CheckResult>,
}

impl Suite<'_> {
    fn tol(&self, name: &str, tol: f64) -> f64 {
        if self.opts.inject.as_deref() == Some(name) {
            -1.0
        } else {
            tol
        }
    }

    fn numeric(&mut self, name: &str, tol: f64, run: impl FnOnce() -> Result<(f64, String)>) {
        let tol = self.tol(name, tol);
        let r = match run() {
            Ok((value, detail)) => CheckResult {
                name: name.into(),
                passed: value <= tol,
                skipped: false,
                qualitative: false,
                value,
                tolerance: tol,
                detail,
            },
            Err(e) => CheckResult {
                name: name.into(),
                passed: false,
                skipped: false,
                qualitative: false,
                value: f64::NAN,
                tolerance: tol,
                detail: e.to_string(),
            },
        };
        self.out.push(r);
    }

    fn qualitative(&mut self, name: &str, run: impl FnOnce() -> Result<(bool, String)>) {
        let injected = self.tol(name, 0.0) < 0.0;
        let (ok, detail) = run().unwrap_or_else(|e| (false, e.to_string()));
        self.out.push(CheckResult {
            name: name.into(),
            passed: ok && !injected,
            skipped: false,
            qualitative: true,
            value: if ok { 1.0 } else { 0.0 },
            tolerance: 1.0,
            detail,
        });
    }

    fn skip(&mut self, name: &str, why: &str) {
        self.out.push(CheckResult {
            name: name.into(),
            passed: true,
            skipped: true,
            qualitative: false,
            value: f64::NAN,
            tolerance: f64::NAN,
            detail: why.into(),
        });
    }
}

/// Parameter grid used for the completeness and unitarity sweep at `n = 3`:
/// three values for each of `kd, kd0, Γ, Ω`.
pub fn parameter_grid() -> Vec<ChannelConfig> {
    let mut out = Vec::with_capacity(81);
    for kd in [FRAC_PI_2, PI, 3.0 * FRAC_PI_2] {
        for kd0 in [FRAC_PI_4, FRAC_PI_2, 3.0 * FRAC_PI_4] {
            for gamma in [10.0, 100.0, 1000.0] {
                for omega in [1e-5, 1e-4, 1e-3] {
                    out.push(ChannelConfig {
                        kd,
                        kd0,
                        gamma,
                        omega,
                        ..ChannelConfig::reference(3)
                    });
                }
            }
        }
    }
    out
}

pub fn run_verify(opts: &VerifyOptions) -> Vec<CheckResult> {
    let mut s = Suite { opts, out: Vec::new() };
    let full_max = if opts.fast { 4 } else { 5 };

    s.numeric("rb-unitarity", 1e-10, || {
        let mut worst: f64 = 0.0;
        for n in 1..=12 {
            worst = worst.max(total_reflection_sector(&ChannelConfig::reference(n), &[0, 1])?.unitarity_defect());
        }
        for c in parameter_grid() {
            worst = worst.max(total_reflection_sector(&c, &[0, 1, 2, 3, 4])?.unitarity_defect());
        }
        Ok((worst, "sector blocks, reference point n<=12 and 3^4 grid at n=3".into()))
    });

    s.numeric("kraus-completeness", 1e-10, || {
        let mut worst: f64 = 0.0;
        for n in 1..=12 {
            worst = worst.max(KrausPair::for_channel(&ChannelConfig::reference(n), Engine::Sector)?.completeness_defect());
        }
        for c in parameter_grid() {
            worst = worst.max(KrausPair::for_channel(&c, Engine::Full)?.completeness_defect());
        }
        Ok((worst, "sector pairs n<=12, full pairs on the 3^4 grid".into()))
    });

    s.numeric("excitation-closure", 1e-14, || {
        let rb = total_reflection(&ChannelConfig::reference(3))?;
        let mut worst: f64 = 0.0;
        for r in 0..rb.nrows() {
            for c in 0..rb.ncols() {
                if (r as u32).count_ones() != (c as u32).count_ones() {
                    worst = worst.max(rb[(r, c)].norm());
                }
            }
        }
        Ok((worst, "largest R_B element between different excitation numbers, n=3".into()))
    });

    s.numeric("oracle-equivalence", 1e-9, || {
        let mut worst: f64 = 0.0;
        for n in 2..=full_max {
            let oracle = FullSpaceOracle::new(n, 1.0)?;
            let start = seeded_w_state(1, n)?;
            let full = start.to_basis(Basis::Full { qubits: n })?;
            for k in 0..20 {
                let t = 0.137 * k as f64;
                let closed = closed_form(&start, t)?.to_basis(full.basis)?;
                worst = worst.max(phase_aligned_residual(&closed.amps, &oracle.evolve(t, &full)?.amps));
            }
        }
        Ok((worst, format!("closed form vs dense exponential, n=2..={full_max}, 20 times")))
    });

    s.numeric("sector-consistency", 1e-10, || {
        let mut worst: f64 = 0.0;
        for n in 1..=full_max {
            let c = ChannelConfig::reference(n);
            let rb = total_reflection(&c)?;
            let sec = total_reflection_sector(&c, &(0..=n + 1).collect::<Vec<_>>())?;
            for (basis, block) in &sec.blocks {
                worst = worst.max(linalg::max_abs(&(basis.restrict(&rb) - block)));
            }
            if n >= 2 {
                worst = worst.max(trace_deviation(n, 200)?);
            }
        }
        Ok((worst, format!("R_B blocks and 200-electron traces, n<={full_max}")))
    });

    s.numeric("energy-conservation", 1e-12, || {
        let mut worst: f64 = 0.0;
        for n in 2..=8 {
            let e0 = energy_expectation(&seeded_w_state(1, n)?, 1.0)?;
            for k in 1..20 {
                let psi = closed_form(&seeded_w_state(1, n)?, 0.21 * k as f64)?;
                worst = worst.max((energy_expectation(&psi, 1.0)? - e0).abs());
            }
        }
        Ok((worst, "<H> drift along the ideal evolution, n=2..=8".into()))
    });

    s.numeric("trace-positivity", 1e-10, || {
        let pair = KrausPair::for_channel(&ChannelConfig::reference(3), Engine::Sector)?;
        let rho = StateVector::basis_state(pair.basis, 4)?.density();
        let out = run_until(&rho, &[pair], &StopCriterion::ElectronBudget(1000), &RunOptions::default())?;
        let drift = out.trace.records.iter().map(|r| (r.trace - 1.0).abs()).fold(0.0, f64::max);
        let neg = (-linalg::min_hermitian_eigenvalue(&out.rho.mat)).max(0.0);
        Ok((drift.max(neg), "1000 electrons at n=3: trace drift and negative eigenvalue".into()))
    });

    s.numeric("effective-exchange-fit", 1e-6, || {
        let mut worst: f64 = 0.0;
        for n in 2..=12 {
            let pair = KrausPair::for_channel(&ChannelConfig::reference(n), Engine::Sector)?;
            let fit = fit_effective_exchange(&pair.m0, pair.basis)?;
            worst = worst.max(fit.residual).max(fit.reconstruction_error);
        }
        Ok((worst, "all-to-all residual and reconstruction error, n=2..=12".into()))
    });

    s.numeric("schedule-properties", 1e-10, || {
        let mut worst: f64 = 0.0;
        for n in 1..=64 {
            for strategy in [Strategy::MaxForward, Strategy::MinBackward] {
                let plan = schedule(n, strategy)?;
                let stages = ceil_log4(n);
                if plan.stages.len() != stages || plan.totals.single_qubit_gates > 2 * n {
                    return Ok((f64::INFINITY, format!("n={n} {strategy}: stage or gate count off")));
                }
                let run = run_ideal(&plan)?;
                let w = crate::ideal::w_state_vector(n)?;
                worst = worst.max(1.0 - run.state.inner(&w)?.norm());
            }
        }
        Ok((worst, "stage count, gate count and ideal infidelity, n<=64".into()))
    });

    s.qualitative("single-excitation-degradation", || {
        let opts = TorqueOptions::default();
        let mut prev = f64::INFINITY;
        let mut monotone = true;
        for n in 5..=12 {
            let f = torque_stage(&w_seed(1, &opts)?, n, &opts)?.fidelity;
            monotone &= f < prev;
            prev = f;
        }
        let seeded = torque_stage(&w_seed(3, &opts)?, 12, &opts)?.fidelity;
        Ok((
            monotone && prev < seeded,
            format!("single-excitation fidelity falls for n=5..=12 (n=12: {prev:.4}) and stays below W_3 seeding ({seeded:.4}); ordering only"),
        ))
    });

    s.qualitative("effective-exchange-shape", || {
        let mut js = Vec::new();
        for n in 3..=12 {
            let pair = KrausPair::for_channel(&ChannelConfig::reference(n), Engine::Sector)?;
            js.push(fit_effective_exchange(&pair.m0, pair.basis)?.j_eff);
        }
        let sign_change = js[..4].windows(2).any(|w| w[0].signum() != w[1].signum());
        let decays = js[3..].windows(2).all(|w| w[1].abs() < w[0].abs());
        Ok((
            sign_change && decays,
            "J_eff changes sign for small n, then decays in magnitude from n=6; shape only".into(),
        ))
    });

    if opts.fast {
        s.skip("full-space-n5", "skipped by --fast");
    }
    s.out
}

/// `a|u_i⟩ + b Σ_{j≠i} |u_j⟩` applied to a one-hot state, `J = 1`.
fn closed_form(psi: &StateVector, t: f64) -> Result<StateVector> {
    let n = psi.basis.qubits();
    let c = evolve_coeffs(n, 1.0, t)?;
    let total: num_complex::Complex64 = psi.amps.iter().sum();
    let amps = CVector::from_iterator(n, psi.amps.iter().map(|&x| (c.a - c.b) * x + c.b * total));
    StateVector::new(psi.basis, amps)
}

/// Largest one-hot population difference between full-space and sector
/// evolution from `|10…0⟩`.
fn trace_deviation(n: usize, electrons: usize) -> Result<f64> {
    let c = ChannelConfig::reference(n);
    let mut worst: f64 = 0.0;
    let mut traces = Vec::new();
    for engine in [Engine::Full, Engine::Sector] {
        let pair = KrausPair::for_channel(&c, engine)?;
        let rho = StateVector::basis_state(pair.basis, 1 << (n - 1))?.density();
        let out = run_until(&rho, &[pair], &StopCriterion::ElectronBudget(electrons), &RunOptions::default())?;
        traces.push(out.trace);
    }
    for (a, b) in traces[0].records.iter().zip(&traces[1].records) {
        for (x, y) in a.diag.iter().zip(&b.diag) {
            worst = worst.max((x - y).abs());
        }
    }
    Ok(worst)
}

/// `⌈log₄ n⌉` in integers.
pub fn ceil_log4(n: usize) -> usize {
    let mut k = 0;
    let mut p = 1usize;
    while p < n {
        p *= 4;
        k += 1;
    }
    k
}

/// Convenience for callers that only need the sector basis sizes.
pub fn sector_dims(n: usize) -> Result<Vec<usize>> {
    (0..=1).map(|k| SectorBasis::new(n + 1, k).map(|b| b.dim())).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log4() {
        assert_eq!(ceil_log4(1), 0);
        assert_eq!(ceil_log4(4), 1);
        assert_eq!(ceil_log4(5), 2);
        assert_eq!(ceil_log4(64), 3);
        assert_eq!(ceil_log4(65), 4);
    }

    #[test]
    fn grid_has_81_points() {
        assert_eq!(parameter_grid().len(), 81);
    }

    #[test]
    fn sector_dims_n3() {
        assert_eq!(sector_dims(3).unwrap(), vec![1, 4]);
    }
}
