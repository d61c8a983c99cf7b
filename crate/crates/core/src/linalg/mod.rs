//! Dense matrix kernels.
//!
//! Matrices are `nalgebra` dense matrices over `f64` or `Complex<f64>`. The
//! kernels that carry the simplicity machinery (characteristic polynomials,
//! Sylvester matrices, discriminants, rank revelation, Schur complements) are
//! written here; the symmetric eigensolver and the Schur form used for large
//! non-normal matrices come from `nalgebra`.

mod eig;
mod lu;
mod poly;
mod rank;
mod schur;

use nalgebra::{ComplexField, DMatrix, DVector};
use num_complex::Complex64;

pub use eig::{
    cluster_values, general_eig, hermitian_eig, psd_sqrt, EigenDecomposition, GeneralSpectrum,
};
pub use lu::{determinant, lu_solve, resolvent_block, resolvent_columns, BandedLu, Lu};
pub use poly::{
    char_poly, discriminant, discriminant_from_roots, is_simple, sylvester_matrix, PolyCoeffs,
    SimplicityReport,
};
pub use rank::{column_rank, RankReport};
pub use schur::schur_resolvent;

pub type C64 = Complex64;
pub type RMatrix = DMatrix<f64>;
pub type CMatrix = DMatrix<C64>;
pub type RVector = DVector<f64>;
pub type CVector = DVector<C64>;

/// Scalars the generic kernels accept: `f64` and `Complex<f64>`.
pub trait Scalar: ComplexField<RealField = f64> + Copy {}
impl<T: ComplexField<RealField = f64> + Copy> Scalar for T {}

pub fn c64(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn to_complex(m: &RMatrix) -> CMatrix {
    m.map(|x| C64::new(x, 0.0))
}

pub fn max_abs<T: Scalar>(m: &DMatrix<T>) -> f64 {
    m.iter().fold(0.0, |acc, x| acc.max(x.modulus()))
}

/// Operator 2-norm (largest singular value).
pub fn spectral_norm<T: Scalar>(m: &DMatrix<T>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().svd(false, false).singular_values.max()
}

pub fn is_hermitian<T: Scalar>(m: &DMatrix<T>, rel_tol: f64) -> bool {
    if !m.is_square() {
        return false;
    }
    let scale = max_abs(m).max(f64::MIN_POSITIVE);
    let n = m.nrows();
    (0..n).all(|i| (0..=i).all(|j| (m[(i, j)] - m[(j, i)].conjugate()).modulus() <= rel_tol * scale))
}

/// Principal submatrix `m[rows, cols]`.
pub fn submatrix<T: Scalar>(m: &DMatrix<T>, rows: &[usize], cols: &[usize]) -> DMatrix<T> {
    DMatrix::from_fn(rows.len(), cols.len(), |i, j| m[(rows[i], cols[j])])
}

/// Real and imaginary parts of a resolvent-like matrix, symmetrized.
pub fn imaginary_part(m: &CMatrix) -> CMatrix {
    let adj = m.adjoint();
    (m - adj).map(|x| x / C64::new(0.0, 2.0))
}
