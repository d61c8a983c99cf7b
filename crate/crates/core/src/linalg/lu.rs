use nalgebra::DMatrix;

use super::{max_abs, CMatrix, RMatrix, Scalar, C64};
use crate::error::{Error, Result};

/// Pivots at or below this fraction of `max |a_ij|` are treated as zero.
pub const PIVOT_REL_TOL: f64 = 1e-14;

/// LU factorization with partial pivoting, `P A = L U`.
#[derive(Debug, Clone)]
pub struct Lu<T: Scalar> {
    lu: DMatrix<T>,
    perm: Vec<usize>,
    swaps: usize,
}

impl<T: Scalar> Lu<T> {
    pub fn factor(a: &DMatrix<T>) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::domain("LU requires a square matrix"));
        }
        let threshold = PIVOT_REL_TOL * max_abs(a);
        let (lu, perm, swaps) = eliminate(a.clone());
        for k in 0..lu.nrows() {
            let pivot = lu[(k, k)].modulus();
            if pivot <= threshold {
                return Err(Error::SingularMatrix { pivot, threshold });
            }
        }
        Ok(Self { lu, perm, swaps })
    }

    pub fn dim(&self) -> usize {
        self.lu.nrows()
    }

    pub fn solve(&self, b: &DMatrix<T>) -> DMatrix<T> {
        let n = self.dim();
        assert_eq!(b.nrows(), n, "right-hand side has wrong row count");
        let mut x = DMatrix::from_fn(n, b.ncols(), |i, j| b[(self.perm[i], j)]);
        for c in 0..x.ncols() {
            for i in 0..n {
                let mut s = x[(i, c)];
                for k in 0..i {
                    s -= self.lu[(i, k)] * x[(k, c)];
                }
                x[(i, c)] = s;
            }
            for i in (0..n).rev() {
                let mut s = x[(i, c)];
                for k in i + 1..n {
                    s -= self.lu[(i, k)] * x[(k, c)];
                }
                x[(i, c)] = s / self.lu[(i, i)];
            }
        }
        x
    }

    pub fn inverse(&self) -> DMatrix<T> {
        self.solve(&DMatrix::identity(self.dim(), self.dim()))
    }

    pub fn determinant(&self) -> T {
        let mut d = T::one();
        for k in 0..self.dim() {
            d *= self.lu[(k, k)];
        }
        if self.swaps % 2 == 1 {
            -d
        } else {
            d
        }
    }
}

fn eliminate<T: Scalar>(mut a: DMatrix<T>) -> (DMatrix<T>, Vec<usize>, usize) {
    let n = a.nrows();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut swaps = 0;
    for k in 0..n {
        let (p, best) = (k..n)
            .map(|i| (i, a[(i, k)].modulus()))
            .fold((k, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        if best == 0.0 {
            continue;
        }
        if p != k {
            a.swap_rows(p, k);
            perm.swap(p, k);
            swaps += 1;
        }
        let pivot = a[(k, k)];
        for i in k + 1..n {
            let l = a[(i, k)] / pivot;
            a[(i, k)] = l;
            if l == T::zero() {
                continue;
            }
            for j in k + 1..n {
                let u = a[(k, j)];
                a[(i, j)] -= l * u;
            }
        }
    }
    (a, perm, swaps)
}

/// Solves `A X = B`.
pub fn lu_solve<T: Scalar>(a: &DMatrix<T>, b: &DMatrix<T>) -> Result<DMatrix<T>> {
    if b.nrows() != a.nrows() {
        return Err(Error::SizeMismatch { expected: a.nrows(), got: b.nrows() });
    }
    Ok(Lu::factor(a)?.solve(b))
}

/// Determinant by partial-pivoting elimination; exactly singular input gives zero.
pub fn determinant<T: Scalar>(a: &DMatrix<T>) -> T {
    assert!(a.is_square(), "determinant of a non-square matrix");
    let (lu, _, swaps) = eliminate(a.clone());
    let mut d = T::one();
    for k in 0..lu.nrows() {
        d *= lu[(k, k)];
    }
    if swaps % 2 == 1 {
        -d
    } else {
        d
    }
}

/// Band LU without pivoting for `H - z` with `H` real symmetric and banded.
///
/// For `Im z != 0` the anti-Hermitian part of `H - z` is `-Im z * I`, which is
/// definite; every Schur complement inherits this, so all pivots satisfy
/// `|u_kk| >= |Im z|` and elimination never breaks down.
#[derive(Debug, Clone)]
pub struct BandedLu {
    n: usize,
    bw: usize,
    // row i, column j stored at band[i * width + (j + bw - i)]
    band: Vec<C64>,
}

impl BandedLu {
    pub fn bandwidth(h: &RMatrix) -> usize {
        let n = h.nrows();
        let mut bw = 0;
        for j in 0..n {
            for i in 0..n {
                if h[(i, j)] != 0.0 {
                    bw = bw.max(i.abs_diff(j));
                }
            }
        }
        bw
    }

    pub fn factor_shifted(h: &RMatrix, z: C64) -> Result<Self> {
        if !h.is_square() {
            return Err(Error::domain("banded LU requires a square matrix"));
        }
        let n = h.nrows();
        let bw = Self::bandwidth(h);
        let width = 2 * bw + 1;
        let mut band = vec![C64::new(0.0, 0.0); n * width];
        for i in 0..n {
            let lo = i.saturating_sub(bw);
            let hi = (i + bw).min(n - 1);
            for j in lo..=hi {
                let mut v = C64::new(h[(i, j)], 0.0);
                if i == j {
                    v -= z;
                }
                band[i * width + (j + bw - i)] = v;
            }
        }
        let threshold = PIVOT_REL_TOL * (max_abs(h) + z.norm());
        for k in 0..n {
            let pivot = band[k * width + bw];
            if pivot.norm() <= threshold {
                return Err(Error::SingularMatrix { pivot: pivot.norm(), threshold });
            }
            let hi = (k + bw).min(n - 1);
            for i in k + 1..=hi {
                let ik = i * width + (k + bw - i);
                let l = band[ik] / pivot;
                band[ik] = l;
                if l.norm() == 0.0 {
                    continue;
                }
                for j in k + 1..=hi {
                    let u = band[k * width + (j + bw - k)];
                    band[i * width + (j + bw - i)] -= l * u;
                }
            }
        }
        Ok(Self { n, bw, band })
    }

    fn at(&self, i: usize, j: usize) -> C64 {
        self.band[i * (2 * self.bw + 1) + (j + self.bw - i)]
    }

    pub fn solve_in_place(&self, x: &mut [C64]) {
        let n = self.n;
        for i in 0..n {
            let lo = i.saturating_sub(self.bw);
            let mut s = x[i];
            for k in lo..i {
                s -= self.at(i, k) * x[k];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let hi = (i + self.bw).min(n - 1);
            let mut s = x[i];
            for k in i + 1..=hi {
                s -= self.at(i, k) * x[k];
            }
            x[i] = s / self.at(i, i);
        }
    }
}

/// Columns `(H - z)^{-1} e_c` for `c` in `cols`.
///
/// Non-real `z` goes through the banded solver; real `z` falls back to dense
/// LU with partial pivoting.
pub fn resolvent_columns(h: &RMatrix, z: C64, cols: &[usize]) -> Result<CMatrix> {
    let n = h.nrows();
    if z.im != 0.0 {
        let lu = BandedLu::factor_shifted(h, z)?;
        let mut out = CMatrix::zeros(n, cols.len());
        let mut x = vec![C64::new(0.0, 0.0); n];
        for (k, &c) in cols.iter().enumerate() {
            x.iter_mut().for_each(|v| *v = C64::new(0.0, 0.0));
            x[c] = C64::new(1.0, 0.0);
            lu.solve_in_place(&mut x);
            out.column_mut(k).copy_from_slice(&x);
        }
        Ok(out)
    } else {
        let shifted = CMatrix::from_fn(n, n, |i, j| {
            let v = C64::new(h[(i, j)], 0.0);
            if i == j {
                v - z
            } else {
                v
            }
        });
        let rhs = CMatrix::from_fn(n, cols.len(), |i, k| {
            if i == cols[k] {
                C64::new(1.0, 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        });
        Ok(Lu::factor(&shifted)?.solve(&rhs))
    }
}

/// The block `P_rows (H - z)^{-1} P_cols`.
pub fn resolvent_block(h: &RMatrix, z: C64, rows: &[usize], cols: &[usize]) -> Result<CMatrix> {
    let full = resolvent_columns(h, z, cols)?;
    Ok(CMatrix::from_fn(rows.len(), cols.len(), |i, j| full[(rows[i], j)]))
}
