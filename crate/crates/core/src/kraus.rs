//! Kraus operators of one scattered electron and the electron-by-electron
//! evolution of the static register.
//!
//! Time is counted in electrons: one electron is one unit of `δt`, so every
//! rate here (effective exchange, rotation per electron) is in radians per
//! electron.

use std::f64::consts::PI;

use log::warn;
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::ideal::wrap_angle;
use crate::linalg::{self, identity, CMatrix, I, ZERO};
use crate::scattering::{total_reflection, total_reflection_sector, ChannelConfig, InjectedSpin, SectorReflection};
use crate::state::{Basis, DensityMatrix, StateVector};
use crate::trace::{EvolutionTrace, TraceRecord};

/// Completeness defect above which extraction is rejected.
pub const EXTRACTION_TOLERANCE: f64 = 1e-8;
/// Per-step trace drift above which evolution aborts.
pub const TRACE_DRIFT_LIMIT: f64 = 1e-8;
/// Eigenvalue floor for positivity checks.
pub const POSITIVITY_FLOOR: f64 = -1e-10;
/// Default electron cap for [`run_until`].
pub const DEFAULT_CAP: usize = 10_000_000;

/// Which representation of `R_B` feeds the Kraus operators.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Engine {
    /// Vacuum and single-excitation sectors only (`n + 1` static states).
    #[default]
    Sector,
    /// Dense `2^(n+1)` reflection matrix.
    Full,
}

impl std::str::FromStr for Engine {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sector" => Ok(Self::Sector),
            "full" => Ok(Self::Full),
            other => Err(Error::InvalidArgument(format!("unknown engine {other:?} (sector, full)"))),
        }
    }
}

impl std::fmt::Display for Engine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Sector => "sector",
            Self::Full => "full",
        })
    }
}

/// `M0`, `M1`: the register's evolution conditioned on the outgoing flying
/// spin being `|0⟩` or `|1⟩`.
#[derive(Clone, Debug, PartialEq)]
pub struct KrausPair {
    pub m0: CMatrix,
    pub m1: CMatrix,
    pub basis: Basis,
    pub config: Option<ChannelConfig>,
}

impl KrausPair {
    /// `‖M0†M0 + M1†M1 − I‖_max`
    pub fn completeness_defect(&self) -> f64 {
        let g = self.m0.adjoint() * &self.m0 + self.m1.adjoint() * &self.m1;
        linalg::max_abs(&(g - identity(self.basis.dim())))
    }

    fn checked(self) -> Result<Self> {
        let defect = self.completeness_defect();
        if defect > EXTRACTION_TOLERANCE {
            return Err(Error::ExtractionInconsistency { defect });
        }
        Ok(self)
    }

    /// Kraus pair for a channel, computed on the requested engine.
    pub fn for_channel(config: &ChannelConfig, engine: Engine) -> Result<Self> {
        match engine {
            Engine::Full => {
                let rb = total_reflection(config)?;
                let mut pair = extract_kraus(&rb, config.n, &config.injected)?;
                pair.config = Some(*config);
                Ok(pair)
            }
            Engine::Sector => {
                if !config.injected.is_z_up() {
                    return Err(Error::InvalidArgument(
                        "the sector engine needs |0⟩ injection; use the full engine".into(),
                    ));
                }
                let refl = total_reflection_sector(config, &[0, 1])?;
                Self::from_sector(&refl)
            }
        }
    }

    /// Kraus pair on the vacuum + one-hot register from the 0- and
    /// 1-excitation blocks of `R_B`, for `|0⟩` injection.
    pub fn from_sector(refl: &SectorReflection) -> Result<Self> {
        let n = refl.config.n;
        let basis = Basis::Sector { qubits: n };
        let dim = basis.dim();
        let flying = 1usize << n;
        let mut m0 = CMatrix::zeros(dim, dim);
        let mut m1 = CMatrix::zeros(dim, dim);
        let missing = || Error::InvalidArgument("sector reflection lacks the 0/1 excitation blocks".into());
        for b in 0..dim {
            let col = basis.full_index(b);
            for a in 0..dim {
                let row = basis.full_index(a);
                m0[(a, b)] = refl.element(row, col).ok_or_else(missing)?;
                m1[(a, b)] = refl.element(flying | row, col).ok_or_else(missing)?;
            }
        }
        Self {
            m0,
            m1,
            basis,
            config: Some(refl.config),
        }
        .checked()
    }

    /// Lift a single-qubit pair (`2×2`) to act on `qubit` of a register.
    pub fn embed_single_qubit(&self, register: Basis, qubit: usize) -> Result<KrausPair> {
        if self.basis.dim() != 2 {
            return Err(Error::DimensionMismatch {
                expected: 2,
                actual: self.basis.dim(),
            });
        }
        let bit = register.qubit_bit(qubit)?;
        let dim = register.dim();
        let mut m0 = CMatrix::zeros(dim, dim);
        let mut m1 = CMatrix::zeros(dim, dim);
        for col in 0..dim {
            let s = register.full_index(col);
            let local = (s >> bit) & 1;
            for out in 0..2usize {
                let target = (s & !(1 << bit)) | (out << bit);
                let (a0, a1) = (self.m0[(out, local)], self.m1[(out, local)]);
                match register.index_of(target) {
                    Some(row) => {
                        m0[(row, col)] = a0;
                        m1[(row, col)] = a1;
                    }
                    None if a0.norm() > 1e-14 || a1.norm() > 1e-14 => {
                        return Err(Error::InvalidArgument(format!(
                            "single-qubit map leaves the {register:?} register"
                        )))
                    }
                    None => {}
                }
            }
        }
        Ok(KrausPair {
            m0,
            m1,
            basis: register,
            config: self.config,
        })
    }

    /// One-hot block of `M0`, rows and columns in label order `u_1..u_n`.
    pub fn onehot_block(&self) -> CMatrix {
        onehot_block(&self.m0, &self.basis)
    }
}

fn onehot_block(m: &CMatrix, basis: &Basis) -> CMatrix {
    let idx = basis.onehot_indices();
    CMatrix::from_fn(idx.len(), idx.len(), |r, c| m[(idx[r], idx[c])])
}

/// `M_k = ⟨k|R_B|χ⟩` over the full `2^n` register.
pub fn extract_kraus(rb: &CMatrix, n: usize, injected: &InjectedSpin) -> Result<KrausPair> {
    let dim = 1usize << n;
    if rb.nrows() != 2 * dim || rb.ncols() != 2 * dim {
        return Err(Error::DimensionMismatch {
            expected: 2 * dim,
            actual: rb.nrows(),
        });
    }
    let chi = injected.amplitudes();
    let block = |k: usize| {
        CMatrix::from_fn(dim, dim, |a, b| {
            chi[0] * rb[(k * dim + a, b)] + chi[1] * rb[(k * dim + a, dim + b)]
        })
    };
    KrausPair {
        m0: block(0),
        m1: block(1),
        basis: Basis::Full { qubits: n },
        config: None,
    }
    .checked()
}

fn apply_pair(rho: &CMatrix, pair: &KrausPair) -> CMatrix {
    &pair.m0 * rho * pair.m0.adjoint() + &pair.m1 * rho * pair.m1.adjoint()
}

/// `rho' = M0 rho M0† + M1 rho M1†`
pub fn step(rho: &DensityMatrix, kraus: &KrausPair) -> Result<DensityMatrix> {
    if rho.basis != kraus.basis {
        return Err(Error::DimensionMismatch {
            expected: kraus.basis.dim(),
            actual: rho.basis.dim(),
        });
    }
    let next = DensityMatrix {
        basis: rho.basis,
        mat: apply_pair(&rho.mat, kraus),
    };
    let drift = (next.trace() - rho.trace()).abs();
    if drift > TRACE_DRIFT_LIMIT {
        return Err(Error::TraceDrift { drift, electron: 0 });
    }
    Ok(next)
}

/// `√⟨ψ|rho|ψ⟩`, clamped to `[0, 1]`.
pub fn fidelity(rho: &DensityMatrix, target: &StateVector) -> Result<f64> {
    let psi = target.to_basis(rho.basis).map_err(|_| Error::DimensionMismatch {
        expected: rho.basis.dim(),
        actual: target.basis.dim(),
    })?;
    let v = psi.amps.dotc(&(&rho.mat * &psi.amps)).re;
    Ok(v.max(0.0).sqrt().min(1.0))
}

#[derive(Clone, Debug)]
pub enum StopCriterion {
    /// First local maximum of the product of one-hot populations.
    DiagProductMax,
    /// First local maximum of the fidelity to a target.
    FidelityMax(StateVector),
    /// Exactly this many electrons.
    ElectronBudget(usize),
}

#[derive(Clone, Debug)]
pub struct RunOptions {
    pub cap: usize,
    /// Accept `m = 0` as a maximum when the scalar drops after the first
    /// electron.
    pub allow_boundary: bool,
    /// Record fidelity to this state even when it is not the stop scalar.
    pub track: Option<StateVector>,
    /// Electrons between positivity checks.
    pub positivity_every: usize,
    /// Consecutive electrons with a bit-identical scalar before declaring a
    /// stall.
    pub flat_limit: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            cap: DEFAULT_CAP,
            allow_boundary: true,
            track: None,
            positivity_every: 100,
            flat_limit: 1000,
        }
    }
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub rho: DensityMatrix,
    pub trace: EvolutionTrace,
    pub m_stop: usize,
}

impl RunOutcome {
    pub fn at_stop(&self) -> &TraceRecord {
        self.trace.get(self.m_stop).expect("stop record present")
    }
}

fn check_positive(rho: &DensityMatrix, electron: usize) -> Result<()> {
    let min = linalg::min_hermitian_eigenvalue(&rho.mat);
    if min < POSITIVITY_FLOOR {
        return Err(Error::PositivityViolation {
            min_eigenvalue: min,
            electron,
        });
    }
    Ok(())
}

fn record(m: usize, rho: &DensityMatrix, target: Option<&StateVector>) -> Result<TraceRecord> {
    let diag = rho.onehot_diagonal();
    let log_product = diag.iter().map(|d| d.max(0.0).ln()).sum();
    let fidelity = target.map(|t| fidelity(rho, t)).transpose()?;
    Ok(TraceRecord {
        m,
        diag,
        log_product,
        fidelity,
        trace: rho.trace(),
    })
}

/// Scatter electrons one at a time until the criterion fires.
///
/// Each electron applies every pair in `maps` in order (several commuting
/// single-qubit channels count as one electron each, in lockstep). For the
/// maximum criteria the first strict local maximum of the tracked scalar is
/// returned: `v[m] > v[m−1]` and `v[m] > v[m+1]`.
pub fn run_until(
    rho0: &DensityMatrix,
    maps: &[KrausPair],
    criterion: &StopCriterion,
    options: &RunOptions,
) -> Result<RunOutcome> {
    for pair in maps {
        if pair.basis != rho0.basis {
            return Err(Error::DimensionMismatch {
                expected: pair.basis.dim(),
                actual: rho0.basis.dim(),
            });
        }
    }
    let target = match criterion {
        StopCriterion::FidelityMax(t) => Some(t),
        _ => options.track.as_ref(),
    };
    let scalar = |r: &TraceRecord| -> f64 {
        match criterion {
            StopCriterion::FidelityMax(_) => r.fidelity.unwrap_or(0.0),
            _ => r.log_product,
        }
    };
    let n = rho0.basis.qubits();
    let mut trace = EvolutionTrace::new(n);
    trace.push(record(0, rho0, target)?);
    let mut rho = rho0.clone();
    let budget = match criterion {
        StopCriterion::ElectronBudget(b) => Some(*b),
        _ => None,
    };
    if budget == Some(0) {
        return Ok(RunOutcome { rho, trace, m_stop: 0 });
    }
    let mut flat_run = 0usize;
    let mut m = 0usize;
    loop {
        m += 1;
        let before = rho.trace();
        let mut next = rho.mat.clone();
        for pair in maps {
            next = apply_pair(&next, pair);
        }
        let next = DensityMatrix { basis: rho.basis, mat: next };
        let drift = (next.trace() - before).abs();
        if drift > TRACE_DRIFT_LIMIT {
            return Err(Error::TraceDrift { drift, electron: m });
        }
        if m.is_multiple_of(options.positivity_every.max(1)) {
            check_positive(&next, m)?;
        }
        trace.push(record(m, &next, target)?);
        let prev = std::mem::replace(&mut rho, next);

        if let Some(b) = budget {
            if m == b {
                check_positive(&rho, m)?;
                return Ok(RunOutcome { rho, trace, m_stop: m });
            }
            continue;
        }

        let k = trace.len();
        let cur = scalar(&trace.records[k - 1]);
        let mid = scalar(&trace.records[k - 2]);
        let peaked = if k >= 3 {
            let left = scalar(&trace.records[k - 3]);
            mid > left && mid > cur
        } else {
            options.allow_boundary && mid > cur
        };
        if peaked {
            check_positive(&prev, m - 1)?;
            return Ok(RunOutcome {
                rho: prev,
                trace,
                m_stop: m - 1,
            });
        }
        if cur.to_bits() == mid.to_bits() {
            flat_run += 1;
        } else {
            flat_run = 0;
        }
        if flat_run >= options.flat_limit {
            return Err(Error::Stall {
                electrons: m,
                reason: format!("tracked value unchanged for {flat_run} electrons"),
                trace: Box::new(trace),
            });
        }
        if m >= options.cap {
            return Err(Error::Stall {
                electrons: m,
                reason: format!("electron cap {} reached", options.cap),
                trace: Box::new(trace),
            });
        }
    }
}

/// Effective all-to-all exchange read off the one-hot block of `M0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EffectiveExchange {
    pub n: usize,
    /// Radians per electron.
    pub j_eff: f64,
    /// Same quantity from `M0 ≈ I − iH` to first order.
    pub j_first_order: f64,
    /// Non-uniformity of `H_eff` relative to its off-diagonal size.
    pub residual: f64,
    /// `‖B − e^{iχ} exp(−i H_uniform)‖_F` for the one-hot block `B`.
    pub reconstruction_error: f64,
    /// Common phase `χ` removed before taking the logarithm.
    pub global_phase: f64,
}

pub const DEFAULT_FIT_THRESHOLD: f64 = 1e-6;
/// Allowed `‖B†B − I‖_max` of the one-hot block.
pub const FIT_UNITARITY_TOLERANCE: f64 = 1e-4;

pub fn fit_effective_exchange(m0: &CMatrix, basis: Basis) -> Result<EffectiveExchange> {
    fit_effective_exchange_with(m0, basis, DEFAULT_FIT_THRESHOLD)
}

/// `H_eff = i·log(M0_onehot)` per electron, after removing the block's common
/// phase (which only shifts the diagonal). `J_eff` is half the mean
/// off-diagonal element.
pub fn fit_effective_exchange_with(m0: &CMatrix, basis: Basis, threshold: f64) -> Result<EffectiveExchange> {
    let n = basis.qubits();
    if n < 2 {
        return Err(Error::InvalidArgument("effective exchange needs n >= 2".into()));
    }
    if m0.nrows() != basis.dim() {
        return Err(Error::DimensionMismatch {
            expected: basis.dim(),
            actual: m0.nrows(),
        });
    }
    let block = onehot_block(m0, &basis);
    let defect = linalg::unitarity_defect(&block);
    if defect > FIT_UNITARITY_TOLERANCE {
        return Err(Error::InvalidArgument(format!(
            "one-hot block of M0 is not near-unitary (defect {defect:e})"
        )));
    }
    let tr = block.trace();
    let phase = if tr.norm() > 0.0 { tr / tr.norm() } else { Complex64::new(1.0, 0.0) };
    let a = &block * phase.conj();
    let eig = linalg::eigenvalues(&a).ok_or_else(|| Error::Numerical("Schur decomposition failed".into()))?;
    if let Some(bad) = eig.iter().map(|z| z.arg()).find(|p| p.abs() > PI - 0.1) {
        return Err(Error::BranchCut { phase: bad });
    }
    let h = linalg::logm(&a)? * I;
    let (off_mean, diag_mean) = uniform_parts(&h);
    let mut off_dev = 0.0;
    let mut diag_dev = 0.0;
    let mut off_size = 0.0;
    for r in 0..n {
        for c in 0..n {
            if r == c {
                diag_dev += (h[(r, c)] - diag_mean).norm_sqr();
            } else {
                off_dev += (h[(r, c)] - off_mean).norm_sqr();
                off_size += h[(r, c)].norm_sqr();
            }
        }
    }
    let dev = off_dev.sqrt() + diag_dev.sqrt();
    let residual = if off_size > 0.0 { dev / off_size.sqrt() } else { dev };
    if residual > threshold {
        return Err(Error::Numerical(format!(
            "effective Hamiltonian not of all-to-all form (residual {residual:e} > {threshold:e})"
        )));
    }
    let first = (&a - identity(n)) * I;
    let (first_off, _) = uniform_parts(&first);
    let uniform = CMatrix::from_fn(n, n, |r, c| if r == c { diag_mean } else { off_mean });
    let rebuilt = (uniform * (-I)).exp() * phase;
    Ok(EffectiveExchange {
        n,
        j_eff: off_mean.re / 2.0,
        j_first_order: first_off.re / 2.0,
        residual,
        reconstruction_error: linalg::frobenius(&(rebuilt - &block)),
        global_phase: phase.arg(),
    })
}

fn uniform_parts(h: &CMatrix) -> (Complex64, Complex64) {
    let n = h.nrows();
    let mut off = ZERO;
    let mut diag = ZERO;
    for r in 0..n {
        for c in 0..n {
            if r == c {
                diag += h[(r, c)];
            } else {
                off += h[(r, c)];
            }
        }
    }
    let pairs = (n * (n - 1)) as f64;
    (
        if pairs > 0.0 { off / pairs } else { ZERO },
        diag / n as f64,
    )
}

/// Electrons to reach `W̄_n` from `W_q`: `asin(√(n/4q)) / (n |J_eff|)`.
/// The sign of `J_eff` does not change the stopping time.
pub fn estimate_electrons(n: usize, q: usize, j_eff: f64) -> Result<f64> {
    if q == 0 || n == 0 {
        return Err(Error::InvalidArgument("q and n must be positive".into()));
    }
    if n > 4 * q {
        return Err(Error::JumpInfeasible { q, n });
    }
    if j_eff == 0.0 || !j_eff.is_finite() {
        return Err(Error::InvalidArgument(format!("J_eff must be finite and nonzero, got {j_eff}")));
    }
    let s = (n as f64 / (4.0 * q as f64)).sqrt().asin();
    Ok(s / (n as f64 * j_eff.abs()))
}

/// Single-qubit channel under +z injection, compared against `R_z`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RzCalibration {
    /// `arg(M0₁₁) − arg(M0₀₀)`, radians per electron.
    pub phi_per_electron: f64,
    /// `1 − min |M0_kk|`
    pub leakage: f64,
    pub reliable: bool,
}

pub const DEFAULT_LEAKAGE_THRESHOLD: f64 = 1e-3;

pub fn calibrate_rz_per_electron(config: &ChannelConfig) -> Result<RzCalibration> {
    if config.n != 1 {
        return Err(Error::InvalidArgument("rotation calibration needs a one-qubit channel".into()));
    }
    if !config.injected.is_z_up() {
        return Err(Error::InvalidArgument("rotation calibration needs +z injection".into()));
    }
    let pair = KrausPair::for_channel(config, Engine::Full)?;
    let (b0, b1) = (pair.m0[(0, 0)], pair.m0[(1, 1)]);
    let phi = wrap_angle(b1.arg() - b0.arg());
    let leakage = 1.0 - b0.norm().min(b1.norm());
    let reliable = leakage <= DEFAULT_LEAKAGE_THRESHOLD;
    if !reliable {
        warn!("rotation-per-electron calibration unreliable: leakage {leakage:e}");
    }
    Ok(RzCalibration {
        phi_per_electron: phi,
        leakage,
        reliable,
    })
}

/// Electrons for a relative phase `phi_needed` when each electron adds
/// `phi_per_electron` (the rotation only runs one way, so the required angle
/// is taken in that direction, modulo 2π).
pub fn estimate_phase_electrons(phi_needed: f64, phi_per_electron: f64) -> Result<f64> {
    if phi_per_electron == 0.0 || !phi_per_electron.is_finite() {
        return Err(Error::InvalidArgument("rotation per electron must be nonzero".into()));
    }
    let along = (phi_needed * phi_per_electron.signum()).rem_euclid(2.0 * PI);
    Ok(along / phi_per_electron.abs())
}
