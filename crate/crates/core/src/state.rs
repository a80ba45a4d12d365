//! State vectors and density matrices over the register bases used in this
//! crate.
//!
//! Static qubits are numbered `1..=n`; qubit 1 is the most significant bit of
//! the computational-basis integer. The one-hot label `u_i` is the basis state
//! with integer `2^(i-1)`, i.e. qubit `n + 1 - i` excited.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{CMatrix, CVector, ONE, ZERO};

/// Coordinates of a register state.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Basis {
    /// All `2^n` computational basis states.
    Full { qubits: usize },
    /// The `n` one-hot states; index `k` is `u_{k+1}` (integer `2^k`).
    OneHot { qubits: usize },
    /// Vacuum followed by the one-hot states (`n + 1` entries); index 0 is
    /// `|0…0⟩`, index `k >= 1` is `u_k`.
    Sector { qubits: usize },
}

impl Basis {
    pub fn qubits(&self) -> usize {
        match *self {
            Basis::Full { qubits } | Basis::OneHot { qubits } | Basis::Sector { qubits } => qubits,
        }
    }

    pub fn dim(&self) -> usize {
        match *self {
            Basis::Full { qubits } => 1usize << qubits,
            Basis::OneHot { qubits } => qubits,
            Basis::Sector { qubits } => qubits + 1,
        }
    }

    /// Computational-basis integer of coordinate `idx`.
    pub fn full_index(&self, idx: usize) -> usize {
        match *self {
            Basis::Full { .. } => idx,
            Basis::OneHot { .. } => 1usize << idx,
            Basis::Sector { .. } => {
                if idx == 0 {
                    0
                } else {
                    1usize << (idx - 1)
                }
            }
        }
    }

    /// Coordinate of a computational-basis integer, if representable.
    pub fn index_of(&self, full: usize) -> Option<usize> {
        let n = self.qubits();
        if full.checked_shr(n as u32).is_some_and(|hi| hi != 0) {
            return None;
        }
        match *self {
            Basis::Full { .. } => Some(full),
            Basis::OneHot { .. } => full.is_power_of_two().then(|| full.trailing_zeros() as usize),
            Basis::Sector { .. } => {
                if full == 0 {
                    Some(0)
                } else {
                    full.is_power_of_two().then(|| full.trailing_zeros() as usize + 1)
                }
            }
        }
    }

    /// Coordinates of `u_1..u_n`, in label order.
    pub fn onehot_indices(&self) -> Vec<usize> {
        let n = self.qubits();
        (0..n).map(|k| self.index_of(1 << k).expect("one-hot state")).collect()
    }

    /// Coordinate of the state with only `qubit` excited.
    pub fn excited_index(&self, qubit: usize) -> Result<usize> {
        let bit = self.qubit_bit(qubit)?;
        Ok(self.index_of(1 << bit).expect("one-hot state"))
    }

    /// Bit position (from the least significant end) of static qubit `qubit`.
    pub fn qubit_bit(&self, qubit: usize) -> Result<usize> {
        let n = self.qubits();
        if qubit == 0 || qubit > n {
            return Err(Error::IndexOutOfRange { index: qubit, qubits: n });
        }
        Ok(n - qubit)
    }

    /// Same kind of basis over a different qubit count.
    pub fn with_qubits(&self, qubits: usize) -> Basis {
        match *self {
            Basis::Full { .. } => Basis::Full { qubits },
            Basis::OneHot { .. } => Basis::OneHot { qubits },
            Basis::Sector { .. } => Basis::Sector { qubits },
        }
    }
}

/// Phases picked up under `R_z(phi) = exp(-i sigma_z phi / 2)` on `qubit`,
/// one per coordinate of `basis`.
fn rz_phases(basis: &Basis, qubit: usize, phi: f64) -> Result<Vec<Complex64>> {
    let bit = basis.qubit_bit(qubit)?;
    let down = Complex64::from_polar(1.0, -phi / 2.0);
    let up = Complex64::from_polar(1.0, phi / 2.0);
    Ok((0..basis.dim())
        .map(|idx| if (basis.full_index(idx) >> bit) & 1 == 1 { up } else { down })
        .collect())
}

/// Single-qubit z rotation for pure and mixed register states.
pub trait PhaseRotate {
    fn apply_rz(&mut self, qubit: usize, phi: f64) -> Result<()>;
}

#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    pub basis: Basis,
    pub amps: CVector,
}

impl StateVector {
    pub fn new(basis: Basis, amps: CVector) -> Result<Self> {
        if amps.len() != basis.dim() {
            return Err(Error::DimensionMismatch {
                expected: basis.dim(),
                actual: amps.len(),
            });
        }
        Ok(Self { basis, amps })
    }

    /// Computational basis state with integer `full`.
    pub fn basis_state(basis: Basis, full: usize) -> Result<Self> {
        let idx = basis
            .index_of(full)
            .ok_or_else(|| Error::InvalidArgument(format!("basis integer {full} not in {basis:?}")))?;
        let mut amps = CVector::zeros(basis.dim());
        amps[idx] = ONE;
        Ok(Self { basis, amps })
    }

    pub fn norm(&self) -> f64 {
        self.amps.norm()
    }

    pub fn inner(&self, other: &StateVector) -> Result<Complex64> {
        let other = other.to_basis(self.basis)?;
        Ok(self.amps.dotc(&other.amps))
    }

    /// Re-express in another basis over the same qubits. Fails if an
    /// amplitude has no coordinate in the target basis.
    pub fn to_basis(&self, target: Basis) -> Result<StateVector> {
        if target == self.basis {
            return Ok(self.clone());
        }
        if target.qubits() != self.basis.qubits() {
            return Err(Error::DimensionMismatch {
                expected: target.qubits(),
                actual: self.basis.qubits(),
            });
        }
        let mut amps = CVector::zeros(target.dim());
        for (idx, a) in self.amps.iter().enumerate() {
            if a.norm() == 0.0 {
                continue;
            }
            let full = self.basis.full_index(idx);
            let j = target.index_of(full).ok_or_else(|| {
                Error::InvalidState(format!("amplitude on basis integer {full} outside {target:?}"))
            })?;
            amps[j] = *a;
        }
        Ok(StateVector { basis: target, amps })
    }

    /// Tensor with `|0⟩` on `extra` new trailing qubits.
    pub fn append_ground(&self, extra: usize) -> StateVector {
        let basis = self.basis.with_qubits(self.basis.qubits() + extra);
        let mut amps = CVector::zeros(basis.dim());
        for (idx, a) in self.amps.iter().enumerate() {
            let full = self.basis.full_index(idx) << extra;
            amps[basis.index_of(full).expect("shifted state representable")] = *a;
        }
        StateVector { basis, amps }
    }

    pub fn density(&self) -> DensityMatrix {
        DensityMatrix {
            basis: self.basis,
            mat: &self.amps * self.amps.adjoint(),
        }
    }
}

impl PhaseRotate for StateVector {
    fn apply_rz(&mut self, qubit: usize, phi: f64) -> Result<()> {
        let phases = rz_phases(&self.basis, qubit, phi)?;
        for (a, p) in self.amps.iter_mut().zip(phases) {
            *a *= p;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    pub basis: Basis,
    pub mat: CMatrix,
}

impl DensityMatrix {
    pub fn new(basis: Basis, mat: CMatrix) -> Result<Self> {
        if mat.nrows() != basis.dim() || mat.ncols() != basis.dim() {
            return Err(Error::DimensionMismatch {
                expected: basis.dim(),
                actual: mat.nrows(),
            });
        }
        Ok(Self { basis, mat })
    }

    /// `|0…0⟩⟨0…0|` on a register.
    pub fn ground(basis: Basis) -> Self {
        let mut mat = CMatrix::zeros(basis.dim(), basis.dim());
        mat[(basis.index_of(0).expect("vacuum coordinate"), basis.index_of(0).unwrap())] = ONE;
        Self { basis, mat }
    }

    pub fn trace(&self) -> f64 {
        self.mat.trace().re
    }

    pub fn purity(&self) -> f64 {
        (&self.mat * &self.mat).trace().re
    }

    /// Populations `⟨u_i|rho|u_i⟩` for `i = 1..=n`.
    pub fn onehot_diagonal(&self) -> Vec<f64> {
        self.basis
            .onehot_indices()
            .into_iter()
            .map(|k| self.mat[(k, k)].re)
            .collect()
    }

    /// Population of computational basis integer `full` (zero if not
    /// representable in this basis).
    pub fn population(&self, full: usize) -> f64 {
        self.basis.index_of(full).map_or(0.0, |k| self.mat[(k, k)].re)
    }

    /// Re-express over the same qubits in another basis. Fails if weight
    /// would be dropped.
    pub fn to_basis(&self, target: Basis) -> Result<DensityMatrix> {
        if target == self.basis {
            return Ok(self.clone());
        }
        if target.qubits() != self.basis.qubits() {
            return Err(Error::DimensionMismatch {
                expected: target.qubits(),
                actual: self.basis.qubits(),
            });
        }
        let map: Vec<Option<usize>> = (0..self.basis.dim())
            .map(|i| target.index_of(self.basis.full_index(i)))
            .collect();
        let mut mat = CMatrix::zeros(target.dim(), target.dim());
        for i in 0..self.basis.dim() {
            for j in 0..self.basis.dim() {
                let v = self.mat[(i, j)];
                match (map[i], map[j]) {
                    (Some(a), Some(b)) => mat[(a, b)] = v,
                    _ if v.norm() > 1e-14 => {
                        return Err(Error::InvalidState(format!(
                            "density weight outside {target:?}"
                        )))
                    }
                    _ => {}
                }
            }
        }
        Ok(DensityMatrix { basis: target, mat })
    }

    /// `rho ⊗ |0…0⟩⟨0…0|` on `extra` new trailing qubits.
    pub fn append_ground(&self, extra: usize) -> DensityMatrix {
        let basis = self.basis.with_qubits(self.basis.qubits() + extra);
        let map: Vec<usize> = (0..self.basis.dim())
            .map(|i| {
                basis
                    .index_of(self.basis.full_index(i) << extra)
                    .expect("shifted state representable")
            })
            .collect();
        let mut mat = CMatrix::from_element(basis.dim(), basis.dim(), ZERO);
        for (i, &a) in map.iter().enumerate() {
            for (j, &b) in map.iter().enumerate() {
                mat[(a, b)] = self.mat[(i, j)];
            }
        }
        DensityMatrix { basis, mat }
    }
}

impl PhaseRotate for DensityMatrix {
    fn apply_rz(&mut self, qubit: usize, phi: f64) -> Result<()> {
        let phases = rz_phases(&self.basis, qubit, phi)?;
        let d = self.basis.dim();
        for i in 0..d {
            for j in 0..d {
                self.mat[(i, j)] *= phases[i] * phases[j].conj();
            }
        }
        Ok(())
    }
}
