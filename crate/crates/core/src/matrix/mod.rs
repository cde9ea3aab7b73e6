//! Complex dense and sparse matrix primitives.
//!
//! Vectorization is row-major: `|i⟩⟨j|` of a `d×d` operator maps to index
//! `i·d + j`. Under this convention `vec(AρB) = (A ⊗ Bᵀ)·vec(ρ)`, so left
//! multiplication by `A` is `A ⊗ 1` and right multiplication by `B` is `1 ⊗ Bᵀ`.

mod dense;
mod eig;
mod sparse;

use num_complex::Complex64;

use crate::error::{Error, Result};

pub use dense::DenseMatrix;
pub use eig::{
    eig_dense, eig_hermitian, eig_targeted, eig_targeted_with, herm_sqrt, solve_dense, EigResult,
    KrylovOptions, DENSE_THRESHOLD,
};
pub use sparse::{kron, kron_dense, SparseMatrix, ZERO_PURGE_TOL};

#[inline]
pub fn c64(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn vectorize(rho: &DenseMatrix) -> Vec<Complex64> {
    rho.as_slice().to_vec()
}

pub fn devectorize(v: &[Complex64], rows: usize, cols: usize) -> Result<DenseMatrix> {
    if rows.checked_mul(cols) != Some(v.len()) {
        return Err(Error::Dimension(format!(
            "vector of length {} cannot hold a {rows}x{cols} matrix",
            v.len()
        )));
    }
    DenseMatrix::new(rows, cols, v.to_vec())
}

/// Superoperator of `ρ ↦ AρB` in the row-major convention: `A ⊗ Bᵀ`.
pub fn sandwich(a: &SparseMatrix, b: &SparseMatrix) -> Result<SparseMatrix> {
    kron(a, &b.transpose())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basis_element_position() {
        let mut rho = DenseMatrix::zeros(2, 2);
        rho[(0, 1)] = c64(1.0, 0.0);
        let v = vectorize(&rho);
        assert_eq!(v.iter().position(|z| z.norm() > 0.0), Some(1));
    }

    #[test]
    fn devectorize_checks_length() {
        assert!(devectorize(&[c64(1.0, 0.0); 3], 2, 2).is_err());
    }
}
