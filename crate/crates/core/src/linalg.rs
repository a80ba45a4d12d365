//! Small dense complex linear algebra helpers shared by the scattering and
//! Kraus engines.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);
pub const I: Complex64 = Complex64::new(0.0, 1.0);

/// Condition number above which a linear solve is logged as ill-conditioned.
pub const COND_WARN: f64 = 1e8;
/// Condition number above which a matrix is treated as singular.
pub const COND_SINGULAR: f64 = 1e13;

pub fn identity(dim: usize) -> CMatrix {
    CMatrix::identity(dim, dim)
}

/// Largest absolute entry.
pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

pub fn frobenius(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Induced 1-norm (max column sum).
pub fn norm1(m: &CMatrix) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// `‖A†A − I‖_max`
pub fn unitarity_defect(m: &CMatrix) -> f64 {
    let g = m.adjoint() * m;
    max_abs(&(g - identity(m.nrows())))
}

/// Inverse through LU with partial pivoting, together with the 1-norm
/// condition number. Fails when the matrix is numerically singular.
pub fn inverse_with_cond(m: &CMatrix) -> Option<(CMatrix, f64)> {
    let inv = m.clone().lu().try_inverse()?;
    let cond = norm1(m) * norm1(&inv);
    if !cond.is_finite() || cond > COND_SINGULAR {
        return None;
    }
    Some((inv, cond))
}

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

/// Principal logarithm of a matrix whose spectrum stays away from the
/// negative real axis.
///
/// Inverse scaling and squaring: take Denman-Beavers square roots until the
/// matrix is close to the identity, evaluate `log` through the series
/// `2 Σ_{k odd} Y^k / k` with `Y = (A − I)(A + I)^{-1}`, then scale back up.
pub fn logm(a: &CMatrix) -> Result<CMatrix> {
    let dim = a.nrows();
    if dim != a.ncols() {
        return Err(Error::DimensionMismatch {
            expected: dim,
            actual: a.ncols(),
        });
    }
    let id = identity(dim);
    let mut x = a.clone();
    let mut squarings = 0u32;
    while norm1(&(&x - &id)) > 0.25 {
        x = sqrtm(&x)?;
        squarings += 1;
        if squarings > 60 {
            return Err(Error::Numerical("matrix square roots failed to approach the identity".into()));
        }
    }
    let denom = (&x + &id)
        .lu()
        .try_inverse()
        .ok_or_else(|| Error::Numerical("singular A + I in log series".into()))?;
    let y = (&x - &id) * denom;
    let y2 = &y * &y;
    let mut term = y.clone();
    let mut acc = y.clone();
    let mut k = 1.0;
    loop {
        term = &term * &y2;
        k += 2.0;
        let contrib = &term / Complex64::new(k, 0.0);
        let size = max_abs(&contrib);
        acc += contrib;
        if size < 1e-18 || k > 200.0 {
            break;
        }
    }
    Ok(acc * Complex64::new(2.0 * f64::from(2u32).powi(squarings as i32), 0.0))
}

/// Principal square root by the Denman-Beavers iteration.
fn sqrtm(a: &CMatrix) -> Result<CMatrix> {
    let dim = a.nrows();
    let mut y = a.clone();
    let mut z = identity(dim);
    for _ in 0..100 {
        let yi = y
            .clone()
            .lu()
            .try_inverse()
            .ok_or_else(|| Error::Numerical("singular iterate in matrix square root".into()))?;
        let zi = z
            .clone()
            .lu()
            .try_inverse()
            .ok_or_else(|| Error::Numerical("singular iterate in matrix square root".into()))?;
        let y_next = (&y + zi) * Complex64::new(0.5, 0.0);
        let z_next = (&z + yi) * Complex64::new(0.5, 0.0);
        let change = max_abs(&(&y_next - &y));
        y = y_next;
        z = z_next;
        if change <= 1e-15 * max_abs(&y).max(1.0) {
            return Ok(y);
        }
    }
    Err(Error::Numerical("matrix square root did not converge".into()))
}

/// Eigenvalues of a general complex square matrix via Schur decomposition.
pub fn eigenvalues(m: &CMatrix) -> Option<Vec<Complex64>> {
    let schur = nalgebra::linalg::Schur::try_new(m.clone(), 1e-14, 10_000)?;
    let (_, t) = schur.unpack();
    Some((0..t.nrows()).map(|i| t[(i, i)]).collect())
}

/// Smallest eigenvalue of a Hermitian matrix.
pub fn min_hermitian_eigenvalue(m: &CMatrix) -> f64 {
    let herm = (m + m.adjoint()) * Complex64::new(0.5, 0.0);
    herm.symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// Format a float for CSV output with 17 significant digits.
pub fn fmt_full(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        format!("{x}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(dim: usize, seed: u64) -> CMatrix {
        let mut s = seed;
        CMatrix::from_fn(dim, dim, |_, _| {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let a = ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5;
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let b = ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5;
            Complex64::new(a, b)
        })
    }

    #[test]
    fn logm_inverts_exp() {
        for (dim, seed) in [(2, 1), (3, 7), (5, 11), (8, 3)] {
            let h = sample(dim, seed) * Complex64::new(0.8, 0.0);
            let a = h.clone().exp();
            let back = logm(&a).unwrap().exp();
            assert!(max_abs(&(back - &a)) < 1e-11, "dim {dim}");
        }
    }

    #[test]
    fn logm_of_unitary_is_anti_hermitian() {
        let h = sample(4, 5);
        let herm = (&h + h.adjoint()) * Complex64::new(0.5, 0.0);
        let u = (herm.clone() * Complex64::new(0.0, -0.7)).exp();
        let l = logm(&u).unwrap();
        assert!(max_abs(&(&l + l.adjoint())) < 1e-11);
        assert!(max_abs(&(l - herm * Complex64::new(0.0, -0.7))) < 1e-10);
    }

    #[test]
    fn singular_matrix_rejected() {
        let m = CMatrix::from_element(3, 3, ONE);
        assert!(inverse_with_cond(&m).is_none());
    }

    #[test]
    fn fmt_has_17_significant_digits() {
        assert_eq!(fmt_full(1.0 / 3.0), "3.3333333333333331e-1");
    }
}
