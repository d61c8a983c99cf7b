use nalgebra::linalg::{Schur, SymmetricEigen};
use nalgebra::DMatrix;

use super::poly::char_poly;
use super::{is_hermitian, max_abs, CMatrix, Lu, RMatrix, Scalar, C64};
use crate::error::{Error, Result};

const MAX_SWEEPS: usize = 10_000;

/// Eigenpairs of a Hermitian matrix, values ascending.
#[derive(Debug, Clone)]
pub struct EigenDecomposition<T: Scalar> {
    pub values: Vec<f64>,
    pub vectors: DMatrix<T>,
}

impl<T: Scalar> EigenDecomposition<T> {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// Largest `||H v_i - lambda_i v_i||`.
    pub fn max_residual(&self, h: &DMatrix<T>) -> f64 {
        (0..self.dim())
            .map(|i| {
                let v = self.vectors.column(i);
                (h * v - v * T::from_real(self.values[i])).norm()
            })
            .fold(0.0, f64::max)
    }

    /// `max |(V^* V - I)_ij|`.
    pub fn orthonormality_defect(&self) -> f64 {
        let g = self.vectors.adjoint() * &self.vectors;
        max_abs(&(g - DMatrix::<T>::identity(self.dim(), self.dim())))
    }
}

pub fn hermitian_eig<T: Scalar>(h: &DMatrix<T>) -> Result<EigenDecomposition<T>> {
    if !is_hermitian(h, 1e-12) {
        return Err(Error::domain("hermitian_eig requires a Hermitian matrix"));
    }
    let n = h.nrows();
    if n == 0 {
        return Ok(EigenDecomposition { values: vec![], vectors: DMatrix::zeros(0, 0) });
    }
    let eig = SymmetricEigen::try_new(h.clone(), f64::EPSILON, MAX_SWEEPS).ok_or_else(|| {
        Error::NumericalFailure(format!("symmetric eigensolver did not converge (n = {n})"))
    })?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    Ok(EigenDecomposition { values, vectors })
}

/// Positive semidefinite square root of a real symmetric matrix.
pub fn psd_sqrt(m: &RMatrix) -> Result<RMatrix> {
    let eig = hermitian_eig(m)?;
    let scale = eig.values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if let Some(&low) = eig.values.first() {
        if low < -1e-12 * scale.max(1.0) {
            return Err(Error::domain(format!(
                "matrix is not positive semidefinite (eigenvalue {low:.3e})"
            )));
        }
    }
    let roots = nalgebra::DVector::from_iterator(eig.dim(), eig.values.iter().map(|v| v.max(0.0).sqrt()));
    let v = &eig.vectors;
    let mut out = v * RMatrix::from_diagonal(&roots) * v.transpose();
    out = (&out + out.transpose()) * 0.5;
    Ok(out)
}

/// Eigenvalues of a general complex matrix with multiplicity clusters.
#[derive(Debug, Clone)]
pub struct GeneralSpectrum {
    /// Sorted by real part, then imaginary part.
    pub values: Vec<C64>,
    /// Index sets into `values`, each sorted, ordered by first member.
    pub clusters: Vec<Vec<usize>>,
}

impl GeneralSpectrum {
    pub fn max_cluster_size(&self) -> usize {
        self.clusters.iter().map(Vec::len).max().unwrap_or(0)
    }
}

/// Up to this size eigenvalues come from characteristic-polynomial roots
/// refined against the matrix; above it from a complex Schur form.
pub const CHAR_POLY_MAX_DIM: usize = 8;

pub fn general_eig(a: &CMatrix, tol: f64) -> Result<GeneralSpectrum> {
    if !a.is_square() {
        return Err(Error::domain("general_eig requires a square matrix"));
    }
    let n = a.nrows();
    let mut values = if n == 0 {
        vec![]
    } else if n <= CHAR_POLY_MAX_DIM {
        let seeds = char_poly(a).roots()?;
        refine_against_matrix(a, seeds)
    } else {
        let schur = Schur::try_new(a.clone(), f64::EPSILON, MAX_SWEEPS)
            .ok_or_else(|| Error::NumericalFailure("complex Schur iteration did not converge".into()))?;
        let (_, t) = schur.unpack();
        (0..n).map(|i| t[(i, i)]).collect()
    };
    values.sort_by(|x, y| x.re.total_cmp(&y.re).then(x.im.total_cmp(&y.im)));
    let clusters = cluster_values(&values, tol);
    Ok(GeneralSpectrum { values, clusters })
}

/// Aberth iteration with the logarithmic derivative of `det(x - A)` taken from
/// the matrix itself, `tr (x - A)^{-1}`. Roots of the characteristic
/// polynomial are only used as starting points, so close pairs are resolved to
/// the accuracy of the matrix rather than of its coefficients.
fn refine_against_matrix(a: &CMatrix, mut roots: Vec<C64>) -> Vec<C64> {
    let n = a.nrows();
    let scale = max_abs(a).max(f64::MIN_POSITIVE);
    let mut frozen = vec![false; n];
    for _ in 0..100 {
        let mut moved = 0.0f64;
        for i in 0..n {
            if frozen[i] {
                continue;
            }
            let shifted = DMatrix::from_fn(n, n, |r, c| {
                if r == c {
                    roots[i] - a[(r, c)]
                } else {
                    -a[(r, c)]
                }
            });
            let lu = match Lu::factor(&shifted) {
                Ok(lu) => lu,
                Err(_) => {
                    // exact eigenvalue to working precision
                    frozen[i] = true;
                    continue;
                }
            };
            let trace = lu.inverse().trace();
            let repulsion: C64 = (0..n)
                .filter(|&j| j != i)
                .map(|j| {
                    let d = roots[i] - roots[j];
                    if d.norm() == 0.0 {
                        C64::new(0.0, 0.0)
                    } else {
                        d.inv()
                    }
                })
                .sum();
            let denom = trace - repulsion;
            if denom.norm() == 0.0 || !denom.is_finite() {
                frozen[i] = true;
                continue;
            }
            let step = denom.inv();
            roots[i] -= step;
            moved = moved.max(step.norm());
            if step.norm() <= 4.0 * f64::EPSILON * scale {
                frozen[i] = true;
            }
        }
        if moved <= 4.0 * f64::EPSILON * scale || frozen.iter().all(|&f| f) {
            break;
        }
    }
    roots
}

/// Single-linkage clusters: two values join when
/// `|x - y| < tol * (1 + diameter)`.
pub fn cluster_values(values: &[C64], tol: f64) -> Vec<Vec<usize>> {
    let n = values.len();
    let diameter = diameter(values);
    let cut = tol * (1.0 + diameter);
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut i: usize) -> usize {
        while p[i] != i {
            p[i] = p[p[i]];
            i = p[i];
        }
        i
    }
    for i in 0..n {
        for j in i + 1..n {
            if (values[i] - values[j]).norm() < cut {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                if ri != rj {
                    parent[ri.max(rj)] = ri.min(rj);
                }
            }
        }
    }
    let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for i in 0..n {
        let r = find(&mut parent, i);
        groups.entry(r).or_default().push(i);
    }
    groups.into_values().collect()
}

pub(crate) fn diameter(values: &[C64]) -> f64 {
    let mut d = 0.0f64;
    for i in 0..values.len() {
        for j in i + 1..values.len() {
            d = d.max((values[i] - values[j]).norm());
        }
    }
    d
}
