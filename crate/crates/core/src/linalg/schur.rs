use super::{max_abs, submatrix, CMatrix, Lu, C64};
use crate::error::{Error, Result};

/// `P (M - z)^{-1} P` computed as `(A - B D^{-1} C)^{-1}` where `A` is the
/// `P`-block of `M - z` and `D` its complement block. The result is checked
/// against a direct inverse to `1e-9` relative.
pub fn schur_resolvent(m: &CMatrix, z: C64, p: &[usize]) -> Result<CMatrix> {
    if !m.is_square() {
        return Err(Error::domain("schur_resolvent requires a square matrix"));
    }
    let n = m.nrows();
    if p.iter().any(|&i| i >= n) {
        return Err(Error::domain("index subset exceeds matrix dimension"));
    }
    let q: Vec<usize> = (0..n).filter(|i| !p.contains(i)).collect();
    let shifted = m - CMatrix::identity(n, n) * z;

    let a = submatrix(&shifted, p, p);
    let complement = if q.is_empty() {
        a
    } else {
        let b = submatrix(&shifted, p, &q);
        let c = submatrix(&shifted, &q, p);
        let d = submatrix(&shifted, &q, &q);
        let d_inv_c = Lu::factor(&d)?.solve(&c);
        a - b * d_inv_c
    };
    let via_schur = Lu::factor(&complement)?.inverse();

    let direct = submatrix(&Lu::factor(&shifted)?.inverse(), p, p);
    let deviation = max_abs(&(&via_schur - &direct));
    let scale = max_abs(&direct).max(f64::MIN_POSITIVE);
    if deviation > 1e-9 * scale {
        return Err(Error::NumericalFailure(format!(
            "Schur complement and direct inverse disagree (relative {:.3e})",
            deviation / scale
        )));
    }
    Ok(via_schur)
}
