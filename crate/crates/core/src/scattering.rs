//! Spin-dependent scattering of a flying qubit off a chain of static qubits
//! held between a hard wall and a partial barrier.
//!
//! The flying qubit is the most significant bit of the `(n+1)`-qubit index, so
//! full-space operators over the channel are laid out as `flying ⊗ static`.
//! Qubit positions passed to [`exchange_operator`] count from that end: 0 is
//! the flying qubit, `j` is static qubit `j`.
//!
//! Reflection matrices are built from the hard wall outwards: start at `−I`,
//! cascade static qubit 1 at phase `kd0`, qubits `2..=n` at phase `kd`, and
//! close with the partial barrier at phase `kd0`.

use log::warn;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, identity, kron, CMatrix, I, ONE, ZERO};

/// Pure spin state of the injected electrons, `up|0⟩ + down|1⟩`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InjectedSpin {
    pub up: Complex64,
    pub down: Complex64,
}

impl InjectedSpin {
    /// `|0⟩`, the +z polarized reservoir.
    pub fn z_up() -> Self {
        Self { up: ONE, down: ZERO }
    }

    pub fn z_down() -> Self {
        Self { up: ZERO, down: ONE }
    }

    /// `(|0⟩ + i|1⟩)/√2`
    pub fn y_plus() -> Self {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        Self {
            up: Complex64::new(s, 0.0),
            down: Complex64::new(0.0, s),
        }
    }

    pub fn x_plus() -> Self {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        Self {
            up: Complex64::new(s, 0.0),
            down: Complex64::new(s, 0.0),
        }
    }

    pub fn norm(&self) -> f64 {
        (self.up.norm_sqr() + self.down.norm_sqr()).sqrt()
    }

    pub fn is_z_up(&self) -> bool {
        self.down.norm() == 0.0 && (self.up.norm() - 1.0).abs() <= 1e-12
    }

    pub fn amplitudes(&self) -> [Complex64; 2] {
        [self.up, self.down]
    }
}

/// Dimensionless channel parameters plus qubit count and injected spin.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelConfig {
    /// Static qubits in the channel.
    pub n: usize,
    /// Propagation phase between neighbouring static qubits.
    pub kd: f64,
    /// Propagation phase between an end qubit and the adjacent barrier.
    pub kd0: f64,
    /// Partial barrier strength.
    pub gamma: f64,
    /// Exchange strength `J0 / ħv`.
    pub omega: f64,
    pub injected: InjectedSpin,
}

impl ChannelConfig {
    /// `(kd, kd0, Γ, Ω) = (π, π/2, 1000, 1e-4)` with +z injection.
    pub fn reference(n: usize) -> Self {
        Self {
            n,
            kd: std::f64::consts::PI,
            kd0: std::f64::consts::FRAC_PI_2,
            gamma: 1000.0,
            omega: 1e-4,
            injected: InjectedSpin::z_up(),
        }
    }

    pub fn with_n(mut self, n: usize) -> Self {
        self.n = n;
        self
    }

    pub fn with_injected(mut self, injected: InjectedSpin) -> Self {
        self.injected = injected;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidArgument("channel needs at least one static qubit".into()));
        }
        if self.gamma.is_nan() || self.gamma <= 0.0 || !self.gamma.is_finite() {
            return Err(Error::InvalidArgument(format!("gamma must be positive, got {}", self.gamma)));
        }
        if !self.omega.is_finite() || !self.kd.is_finite() || !self.kd0.is_finite() {
            return Err(Error::InvalidArgument("channel phases and omega must be finite".into()));
        }
        if (self.injected.norm() - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidArgument(format!(
                "injected spin norm {} is not 1",
                self.injected.norm()
            )));
        }
        Ok(())
    }

    /// Qubits in the scattering problem, flying qubit included.
    pub fn total_qubits(&self) -> usize {
        self.n + 1
    }

    fn singular(&self, step: usize) -> Error {
        Error::ResonanceSingularity {
            kd: self.kd,
            kd0: self.kd0,
            gamma: self.gamma,
            omega: self.omega,
            step,
        }
    }
}

/// Transmission and reflection of one scatterer; `r = t − I`.
#[derive(Clone, Debug, PartialEq)]
pub struct ScatterElement {
    pub t: CMatrix,
    pub r: CMatrix,
}

impl ScatterElement {
    pub fn from_transmission(t: CMatrix) -> Self {
        let r = &t - identity(t.nrows());
        Self { t, r }
    }

    pub fn dim(&self) -> usize {
        self.t.nrows()
    }
}

fn pauli() -> [CMatrix; 3] {
    [
        CMatrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO]),
        CMatrix::from_row_slice(2, 2, &[ZERO, -I, I, ZERO]),
        CMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE]),
    ]
}

/// `σ_i·σ_j` on `total` qubits, as the sum of the three tensor-embedded
/// Pauli products. Position 0 is the most significant qubit.
pub fn exchange_operator(total: usize, i: usize, j: usize) -> Result<CMatrix> {
    if i >= total {
        return Err(Error::IndexOutOfRange { index: i, qubits: total });
    }
    if j >= total {
        return Err(Error::IndexOutOfRange { index: j, qubits: total });
    }
    if i == j {
        return Err(Error::InvalidArgument(format!("exchange needs distinct qubits, got {i} twice")));
    }
    let id2 = identity(2);
    let dim = 1usize << total;
    let mut out = CMatrix::zeros(dim, dim);
    for p in pauli() {
        let mut term = CMatrix::identity(1, 1);
        for k in 0..total {
            let factor = if k == i || k == j { &p } else { &id2 };
            term = kron(&term, factor);
        }
        out += term;
    }
    Ok(out)
}

/// Spin-independent barrier: `t = I/(1 + iΓ)`.
pub fn barrier(gamma: f64, dim: usize) -> ScatterElement {
    let t = identity(dim) / Complex64::new(1.0, gamma);
    ScatterElement::from_transmission(t)
}

/// Delta scatterer with transmission `[I + iΩ E]^{-1}` for a given
/// exchange operator `E`.
fn delta_scatterer(omega: f64, exchange: &CMatrix) -> Option<ScatterElement> {
    let a = identity(exchange.nrows()) + exchange * Complex64::new(0.0, omega);
    let (t, _) = linalg::inverse_with_cond(&a)?;
    Some(ScatterElement::from_transmission(t))
}

/// Full-space scatterer for static qubit `j` (`1..=n`).
pub fn qubit_scatterer(config: &ChannelConfig, j: usize) -> Result<ScatterElement> {
    if j == 0 || j > config.n {
        return Err(Error::IndexOutOfRange { index: j, qubits: config.n });
    }
    let e = exchange_operator(config.total_qubits(), 0, j)?;
    delta_scatterer(config.omega, &e).ok_or_else(|| config.singular(j))
}

/// One application of the cascade rule:
/// `r̂ = r + e^{2i·phase} t (I − e^{2i·phase} r̂_prev r)^{-1} r̂_prev t`.
///
/// A singular denominator is reported as a resonance with `kd` set to
/// `phase`; [`total_reflection`] re-labels it with the full configuration.
pub fn cascade(prev: &CMatrix, element: &ScatterElement, phase: f64) -> Result<CMatrix> {
    let dim = element.dim();
    if prev.nrows() != dim || prev.ncols() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            actual: prev.nrows(),
        });
    }
    let ph = Complex64::from_polar(1.0, 2.0 * phase);
    let denom = identity(dim) - prev * &element.r * ph;
    let (inv, cond) = linalg::inverse_with_cond(&denom).ok_or(Error::ResonanceSingularity {
        kd: phase,
        kd0: f64::NAN,
        gamma: f64::NAN,
        omega: f64::NAN,
        step: 0,
    })?;
    if cond > linalg::COND_WARN {
        warn!("ill-conditioned cascade denominator (cond {cond:.3e}) at phase {phase}");
    }
    Ok(&element.r + &element.t * inv * prev * &element.t * ph)
}

/// A space in which the cascade can be carried out: the full `2^(n+1)` space
/// or one excitation sector of it.
trait CascadeSpace {
    fn dim(&self) -> usize;
    /// `σ_f·σ_j` for static qubit `j`.
    fn exchange(&self, j: usize) -> Result<CMatrix>;
}

struct FullSpace {
    total: usize,
}

impl CascadeSpace for FullSpace {
    fn dim(&self) -> usize {
        1 << self.total
    }

    fn exchange(&self, j: usize) -> Result<CMatrix> {
        exchange_operator(self.total, 0, j)
    }
}

fn cascade_in(space: &dyn CascadeSpace, config: &ChannelConfig) -> Result<CMatrix> {
    config.validate()?;
    let dim = space.dim();
    let mut r = -identity(dim);
    for j in 1..=config.n {
        let e = space.exchange(j)?;
        let element = delta_scatterer(config.omega, &e).ok_or_else(|| config.singular(j))?;
        let phase = if j == 1 { config.kd0 } else { config.kd };
        r = cascade(&r, &element, phase).map_err(|err| match err {
            Error::ResonanceSingularity { .. } => config.singular(j),
            other => other,
        })?;
    }
    cascade(&r, &barrier(config.gamma, dim), config.kd0).map_err(|err| match err {
        Error::ResonanceSingularity { .. } => config.singular(config.n + 1),
        other => other,
    })
}

/// Overall reflection matrix `R_B` over the full `2^(n+1)` space.
///
/// Dense and exponential in `n`; kept as the reference for the sector path.
pub fn total_reflection(config: &ChannelConfig) -> Result<CMatrix> {
    cascade_in(
        &FullSpace {
            total: config.total_qubits(),
        },
        config,
    )
}

/// Computational basis states of `total` qubits with exactly `excitations`
/// bits set, in ascending integer order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SectorBasis {
    pub total: usize,
    pub excitations: usize,
    states: Vec<usize>,
}

impl SectorBasis {
    pub fn new(total: usize, excitations: usize) -> Result<Self> {
        if excitations > total {
            return Err(Error::InvalidArgument(format!(
                "{excitations} excitations exceed {total} qubits"
            )));
        }
        let states = (0..1usize << total)
            .filter(|b| b.count_ones() as usize == excitations)
            .collect();
        Ok(Self {
            total,
            excitations,
            states,
        })
    }

    pub fn dim(&self) -> usize {
        self.states.len()
    }

    pub fn states(&self) -> &[usize] {
        &self.states
    }

    pub fn full_index(&self, idx: usize) -> usize {
        self.states[idx]
    }

    pub fn index_of(&self, full: usize) -> Option<usize> {
        self.states.binary_search(&full).ok()
    }

    /// `σ_i·σ_j = 2·SWAP_ij − I` restricted to this sector. Positions count
    /// from the most significant qubit, as in [`exchange_operator`].
    pub fn exchange_operator(&self, i: usize, j: usize) -> Result<CMatrix> {
        if i >= self.total || j >= self.total {
            return Err(Error::IndexOutOfRange {
                index: i.max(j),
                qubits: self.total,
            });
        }
        if i == j {
            return Err(Error::InvalidArgument(format!("exchange needs distinct qubits, got {i} twice")));
        }
        let (bi, bj) = (self.total - 1 - i, self.total - 1 - j);
        let dim = self.dim();
        let mut out = -identity(dim);
        for (col, &b) in self.states.iter().enumerate() {
            let swapped = if ((b >> bi) & 1) != ((b >> bj) & 1) {
                b ^ (1 << bi) ^ (1 << bj)
            } else {
                b
            };
            let row = self.index_of(swapped).expect("swap preserves excitation count");
            out[(row, col)] += Complex64::new(2.0, 0.0);
        }
        Ok(out)
    }

    /// Sub-block of a full-space operator on this sector.
    pub fn restrict(&self, full: &CMatrix) -> CMatrix {
        CMatrix::from_fn(self.dim(), self.dim(), |r, c| full[(self.states[r], self.states[c])])
    }
}

impl CascadeSpace for SectorBasis {
    fn dim(&self) -> usize {
        SectorBasis::dim(self)
    }

    fn exchange(&self, j: usize) -> Result<CMatrix> {
        self.exchange_operator(0, j)
    }
}

/// `R_B` restricted to a set of excitation sectors.
#[derive(Clone, Debug)]
pub struct SectorReflection {
    pub config: ChannelConfig,
    pub blocks: Vec<(SectorBasis, CMatrix)>,
}

impl SectorReflection {
    pub fn block(&self, excitations: usize) -> Option<&(SectorBasis, CMatrix)> {
        self.blocks.iter().find(|(b, _)| b.excitations == excitations)
    }

    /// `⟨row|R_B|col⟩` for full-space integers. Zero across sectors; `None`
    /// when the sector was not computed.
    pub fn element(&self, row: usize, col: usize) -> Option<Complex64> {
        if row.count_ones() != col.count_ones() {
            return Some(ZERO);
        }
        let (basis, r) = self.block(col.count_ones() as usize)?;
        Some(r[(basis.index_of(row)?, basis.index_of(col)?)])
    }

    /// Largest `‖R†R − I‖_max` over the blocks.
    pub fn unitarity_defect(&self) -> f64 {
        self.blocks
            .iter()
            .map(|(_, r)| linalg::unitarity_defect(r))
            .fold(0.0, f64::max)
    }

    /// Total dimension covered by the computed blocks.
    pub fn dim(&self) -> usize {
        self.blocks.iter().map(|(b, _)| b.dim()).sum()
    }
}

/// `R_B` computed block by block inside the requested excitation sectors of
/// the `(n+1)`-qubit space. Total excitation number is conserved by every
/// scatterer, so each block is an independent cascade.
pub fn total_reflection_sector(config: &ChannelConfig, excitations: &[usize]) -> Result<SectorReflection> {
    config.validate()?;
    let total = config.total_qubits();
    let blocks = excitations
        .iter()
        .map(|&k| {
            let basis = SectorBasis::new(total, k)?;
            let r = cascade_in(&basis, config)?;
            Ok((basis, r))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SectorReflection {
        config: *config,
        blocks,
    })
}

/// Every sector `0..=n+1`; covers the whole space.
pub fn total_reflection_all_sectors(config: &ChannelConfig) -> Result<SectorReflection> {
    let ks: Vec<usize> = (0..=config.total_qubits()).collect();
    total_reflection_sector(config, &ks)
}
