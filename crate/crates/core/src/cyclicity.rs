//! Reducing subspaces, span conditions for compressed resolvents, the
//! two-tile span property of Model B and its coupling-constant limit.

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fit::loglog_fit;
use crate::lattice::{BoundaryLayer, LatticeBox, TileGeometry};
use crate::linalg::{
    cluster_values, column_rank, hermitian_eig, resolvent_columns, spectral_norm, to_complex, CMatrix,
    CVector, RMatrix, RVector, C64,
};
use crate::models::{build_model_b, build_two_tile, tile_indices, trial_rng};

/// Relative size below which a new Krylov direction is treated as zero.
pub const KRYLOV_TOL: f64 = 1e-12;
/// Rank tolerance for stacked, normalized resolvent columns.
pub const SPAN_RANK_TOL: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct ReducingSubspace {
    /// Orthonormal columns.
    pub basis: RMatrix,
    /// `||(I - Q Q^T) H Q||`.
    pub invariance_residual: f64,
}

impl ReducingSubspace {
    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    /// Distance from `u` to the subspace.
    pub fn distance(&self, u: &RVector) -> f64 {
        (u - &self.basis * (self.basis.transpose() * u)).norm()
    }
}

fn orthogonalize(v: &mut RVector, basis: &[RVector]) {
    for _ in 0..2 {
        for q in basis {
            let p = q.dot(v);
            v.axpy(-p, q, 1.0);
        }
    }
}

/// Orthonormal basis of `span{H^n m : n >= 0, m in M}`.
pub fn krylov_reducing(h: &RMatrix, m: &[RVector]) -> Result<ReducingSubspace> {
    let n = h.nrows();
    if let Some(bad) = m.iter().find(|v| v.len() != n) {
        return Err(Error::SizeMismatch { expected: n, got: bad.len() });
    }
    let mut basis: Vec<RVector> = Vec::new();
    let mut frontier: Vec<RVector> = m.to_vec();
    while !frontier.is_empty() && basis.len() < n {
        let mut added = Vec::new();
        for mut v in frontier {
            let before = v.norm();
            if before == 0.0 {
                continue;
            }
            orthogonalize(&mut v, &basis);
            let after = v.norm();
            if after > KRYLOV_TOL * before {
                v /= after;
                basis.push(v.clone());
                added.push(v);
            }
        }
        frontier = added.iter().map(|q| h * q).collect();
    }
    let q = if basis.is_empty() { RMatrix::zeros(n, 0) } else { RMatrix::from_columns(&basis) };
    let hq = h * &q;
    let invariance_residual = if q.ncols() == 0 {
        0.0
    } else {
        spectral_norm(&(&hq - &q * (q.transpose() * &hq)))
    };
    Ok(ReducingSubspace { basis: q, invariance_residual })
}

#[derive(Debug, Clone, Serialize)]
pub struct CyclicityReport {
    pub dim: usize,
    pub subspace_dim: usize,
    pub invariance_residual: f64,
    /// Distance of each eigenvector of `H` (ascending eigenvalue order) to the
    /// reducing subspace generated by `R(V)`.
    pub distances: Vec<f64>,
    /// Number of eigenvectors at distance `>= tol`.
    pub failures: usize,
    pub passes: bool,
}

/// Whether every eigenvector of `H` lies in the reducing subspace generated by `R(V)`.
pub fn weak_cyclicity_check(h: &RMatrix, v: &RMatrix, tol: f64) -> Result<CyclicityReport> {
    let n = h.nrows();
    let range: Vec<RVector> =
        (0..n).map(|j| v.column(j).into_owned()).filter(|c| c.iter().any(|&x| x != 0.0)).collect();
    let sub = krylov_reducing(h, &range)?;
    let eig = hermitian_eig(h)?;
    let distances: Vec<f64> = eig.vectors.column_iter().map(|u| sub.distance(&u.into_owned())).collect();
    let failures = distances.iter().filter(|&&d| d >= tol).count();
    Ok(CyclicityReport {
        dim: n,
        subspace_dim: sub.dim(),
        invariance_residual: sub.invariance_residual,
        distances,
        failures,
        passes: failures == 0,
    })
}

/// Rank of the span of `{(H - z_i)^{-1} m}` next to the Krylov dimension of
/// `M` and the rank of their union.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ResolventSpanComparison {
    pub resolvent_rank: usize,
    pub krylov_rank: usize,
    pub union_rank: usize,
}

impl ResolventSpanComparison {
    pub fn equal(&self) -> bool {
        self.resolvent_rank == self.krylov_rank && self.krylov_rank == self.union_rank
    }
}

pub fn resolvent_span_comparison(h: &RMatrix, m: &[RVector], z_list: &[C64]) -> Result<ResolventSpanComparison> {
    let n = h.nrows();
    let mut resolvent_cols = Vec::new();
    for &z in z_list {
        let r = crate::linalg::Lu::factor(&(to_complex(h) - CMatrix::identity(n, n) * z))?;
        for v in m {
            let rhs = CMatrix::from_iterator(n, 1, v.iter().map(|&x| C64::new(x, 0.0)));
            let col = r.solve(&rhs).column(0).into_owned();
            resolvent_cols.push(normalized(col));
        }
    }
    let krylov = krylov_reducing(h, m)?;
    let krylov_cols: Vec<CVector> =
        krylov.basis.column_iter().map(|c| c.map(|x| C64::new(x, 0.0))).collect();
    let mut union = resolvent_cols.clone();
    union.extend(krylov_cols.iter().cloned());
    let rank = |cols: &[CVector]| -> Result<usize> {
        if cols.is_empty() {
            Ok(0)
        } else {
            Ok(column_rank(cols, SPAN_RANK_TOL)?.rank)
        }
    };
    Ok(ResolventSpanComparison {
        resolvent_rank: rank(&resolvent_cols)?,
        krylov_rank: rank(&krylov_cols)?,
        union_rank: rank(&union)?,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SpanCheckResult {
    pub target_dim: usize,
    pub achieved_rank: usize,
    pub mu_values: Vec<f64>,
    /// Smallest accepted pivot residual of the normalized columns.
    pub smallest_retained: f64,
}

impl SpanCheckResult {
    pub fn full(&self) -> bool {
        self.achieved_rank == self.target_dim
    }
}

fn normalized(c: CVector) -> CVector {
    let n = c.norm();
    if n > 0.0 {
        c / C64::new(n, 0.0)
    } else {
        c
    }
}

fn stacked_rank(columns: Vec<CVector>, target_dim: usize, mu_values: Vec<f64>) -> Result<SpanCheckResult> {
    let nonzero: Vec<CVector> = columns.into_iter().filter(|c| c.norm() > 0.0).map(normalized).collect();
    let (achieved_rank, smallest_retained) = if nonzero.is_empty() {
        (0, f64::INFINITY)
    } else {
        let r = column_rank(&nonzero, SPAN_RANK_TOL)?;
        (r.rank, r.smallest_retained())
    };
    Ok(SpanCheckResult { target_dim, achieved_rank, mu_values, smallest_retained })
}

/// Rank of the stacked columns of `P_X (H + mu V - z_0)^{-1} P_Y` over `mu`,
/// for coordinate subspaces `X`, `Y` given by basis indices.
pub fn span_condition(
    h: &RMatrix,
    v: &RMatrix,
    x: &[usize],
    y: &[usize],
    z0: C64,
    mu_list: &[f64],
) -> Result<SpanCheckResult> {
    if x.len() != y.len() {
        return Err(Error::domain(format!("dim X = {} differs from dim Y = {}", x.len(), y.len())));
    }
    if !(z0.im > 0.0) {
        return Err(Error::domain("z0 must lie in the upper half-plane"));
    }
    if v.shape() != h.shape() {
        return Err(Error::SizeMismatch { expected: h.nrows(), got: v.nrows() });
    }
    let mut columns = Vec::new();
    for &mu in mu_list {
        let full = resolvent_columns(&(h + v * mu), z0, y)?;
        for j in 0..y.len() {
            columns.push(CVector::from_iterator(x.len(), x.iter().map(|&i| full[(i, j)])));
        }
    }
    stacked_rank(columns, x.len(), mu_list.to_vec())
}

fn check_positive_profile(f: &[f64]) -> Result<()> {
    if f.iter().any(|&x| !(x > 0.0)) {
        return Err(Error::domain("the profile f must be strictly positive"));
    }
    Ok(())
}

/// Rank of the stacked columns of `chi_C (h_0^{(C,C')} + mu f_C - z_0)^{-1} chi_{C'}`.
pub fn two_tile_span(
    geom: &TileGeometry,
    c: &[i64],
    c_prime: &[i64],
    f: &[f64],
    z0: C64,
    mu_list: &[f64],
) -> Result<SpanCheckResult> {
    check_positive_profile(f)?;
    if !TileGeometry::are_neighbors(c, c_prime) {
        return Err(Error::domain(format!("tiles {c:?} and {c_prime:?} are not neighbours")));
    }
    let mut columns = Vec::new();
    for &mu in mu_list {
        let t = build_two_tile(geom, c, c_prime, mu, f)?;
        let full = resolvent_columns(&t.hamiltonian.matrix, z0, &t.c_prime)?;
        for j in 0..t.c_prime.len() {
            columns.push(CVector::from_iterator(t.c.len(), t.c.iter().map(|&i| full[(i, j)])));
        }
    }
    stacked_rank(columns, geom.tile_size(), mu_list.to_vec())
}

/// [`two_tile_span`] with `|C|` coupling values drawn uniformly from `[1, 2]`,
/// redrawn once if the first draw does not reach full rank.
pub fn two_tile_span_auto(
    geom: &TileGeometry,
    c: &[i64],
    c_prime: &[i64],
    f: &[f64],
    z0: C64,
    seed: u64,
) -> Result<SpanCheckResult> {
    let mut first = None;
    for attempt in 0..2 {
        let mut rng = trial_rng(seed, attempt);
        let mu: Vec<f64> = (0..geom.tile_size()).map(|_| rng.random_range(1.0..=2.0)).collect();
        let r = two_tile_span(geom, c, c_prime, f, z0, &mu)?;
        if r.full() {
            return Ok(r);
        }
        first.get_or_insert(r);
    }
    Ok(first.expect("two attempts"))
}

#[derive(Debug, Clone, Serialize)]
pub struct CouplingRow {
    pub lambda: f64,
    pub deviation: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CouplingTable {
    pub rows: Vec<CouplingRow>,
    pub slope: f64,
    pub monotone: bool,
}

/// `||chi_C (H_{omega(lambda, mu)} - z_0)^{-1} chi_{C'} - chi_C (h_0^{(C,C')} + mu f_C - z_0)^{-1} chi_{C'}||`
/// along `lambda_list`, where `omega(lambda, mu)` is `mu` on `C`, `0` on `C'`,
/// `lambda` on the tile shell around `C u C'` and `omega` elsewhere.
///
/// `omega` is indexed like [`TileGeometry::tiles_in`] of `lattice`; its entries
/// on `C`, `C'` and the shell are ignored.
#[allow(clippy::too_many_arguments)]
pub fn coupling_limit(
    lattice: &LatticeBox,
    geom: &TileGeometry,
    f: &[f64],
    c: &[i64],
    c_prime: &[i64],
    mu: f64,
    lambda_list: &[f64],
    omega: &[f64],
    z0: C64,
) -> Result<CouplingTable> {
    check_positive_profile(f)?;
    if lambda_list.is_empty() || lambda_list.iter().any(|&l| !(l > 0.0)) {
        return Err(Error::domain("lambda list must be non-empty and positive"));
    }
    if lambda_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::domain("lambda list must be increasing"));
    }
    let tiles = geom.tiles_in(lattice);
    if omega.len() != tiles.len() {
        return Err(Error::SizeMismatch { expected: tiles.len(), got: omega.len() });
    }
    let shell = BoundaryLayer::around(geom, lattice, &[c.to_vec(), c_prime.to_vec()]);
    for m in shell.inner.iter().chain(&shell.layer) {
        if tile_indices(lattice, geom, m).len() != geom.tile_size() {
            return Err(Error::domain(format!("tile {m:?} of C, C' or the shell is cut by the box")));
        }
    }
    let limit_tiles = build_two_tile(geom, c, c_prime, mu, f)?;
    let limit_full = resolvent_columns(&limit_tiles.hamiltonian.matrix, z0, &limit_tiles.c_prime)?;
    let limit = CMatrix::from_fn(limit_tiles.c.len(), limit_tiles.c_prime.len(), |i, j| {
        limit_full[(limit_tiles.c[i], j)]
    });

    let rows_idx = tile_indices(lattice, geom, c);
    let cols_idx = tile_indices(lattice, geom, c_prime);
    let mut rows = Vec::with_capacity(lambda_list.len());
    for &lambda in lambda_list {
        let w: Vec<f64> = tiles
            .iter()
            .zip(omega)
            .map(|(m, &w)| {
                if m.as_slice() == c {
                    mu
                } else if m.as_slice() == c_prime {
                    0.0
                } else if shell.layer.contains(m) {
                    lambda
                } else {
                    w
                }
            })
            .collect();
        let h = build_model_b(lattice, geom, f, &w)?;
        let full = resolvent_columns(&h.matrix, z0, &cols_idx)?;
        let block = CMatrix::from_fn(rows_idx.len(), cols_idx.len(), |i, j| full[(rows_idx[i], j)]);
        rows.push(CouplingRow { lambda, deviation: spectral_norm(&(block - &limit)) });
    }
    let xs: Vec<f64> = rows.iter().map(|r| r.lambda).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.deviation).collect();
    let slope = if ys.iter().all(|&y| y > 0.0) {
        loglog_fit(&xs, &ys).map_or(f64::NAN, |f| f.slope)
    } else {
        f64::NAN
    };
    let monotone = ys.windows(2).all(|w| w[1] <= w[0]);
    Ok(CouplingTable { rows, slope, monotone })
}

#[derive(Debug, Clone, Serialize)]
pub struct TransferEntry {
    pub energy: f64,
    pub multiplicity: usize,
    pub residual: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct TransferReport {
    pub entries: Vec<TransferEntry>,
    pub skipped: Vec<f64>,
}

impl TransferReport {
    pub fn max_residual(&self) -> f64 {
        self.entries.iter().map(|e| e.residual).fold(0.0, f64::max)
    }
}

/// Residual of `P_e P_Y = -(lambda - mu) P_e V (H_mu - e)^{-1} P_Y` for each
/// eigenvalue `e` of `H_lambda = H_mu + (lambda - mu) V` away from `sigma(H_mu)`.
pub fn eigenprojection_transfer(
    h_lam: &RMatrix,
    h_mu: &RMatrix,
    v: &RMatrix,
    lambda: f64,
    mu: f64,
    y: &[usize],
) -> Result<TransferReport> {
    if lambda == mu {
        return Err(Error::precondition("eigenprojection transfer needs lambda != mu"));
    }
    let n = h_mu.nrows();
    let expected = h_mu + v * (lambda - mu);
    let scale = spectral_norm(&expected).max(1.0);
    if h_lam.shape() != h_mu.shape() || spectral_norm(&(h_lam - &expected)) > 1e-12 * scale {
        return Err(Error::precondition("H_lambda must equal H_mu + (lambda - mu) V"));
    }
    let spectrum_mu = hermitian_eig(h_mu)?.values;
    let eig = hermitian_eig(h_lam)?;
    let values: Vec<C64> = eig.values.iter().map(|&x| C64::new(x, 0.0)).collect();
    let clusters = cluster_values(&values, 1e-10);
    let p_y = RMatrix::from_fn(n, y.len(), |i, j| if i == y[j] { 1.0 } else { 0.0 });
    let mut entries = Vec::new();
    let mut skipped = Vec::new();
    for cluster in clusters {
        let e = cluster.iter().map(|&k| eig.values[k]).sum::<f64>() / cluster.len() as f64;
        let dist = spectrum_mu.iter().map(|s| (s - e).abs()).fold(f64::INFINITY, f64::min);
        if dist <= 1e-6 {
            skipped.push(e);
            continue;
        }
        let u = RMatrix::from_columns(&cluster.iter().map(|&k| eig.vectors.column(k)).collect::<Vec<_>>());
        let p_e = &u * u.transpose();
        let lhs = &p_e * &p_y;
        let r = resolvent_columns(h_mu, C64::new(e, 0.0), y)?;
        let rhs = to_complex(&(&p_e * v)) * r * C64::new(-(lambda - mu), 0.0);
        let residual = spectral_norm(&(to_complex(&lhs) - rhs));
        entries.push(TransferEntry { energy: e, multiplicity: cluster.len(), residual });
    }
    Ok(TransferReport { entries, skipped })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c64;
    use crate::models::{build_model_a, tile_potential, SingleSiteMatrix};

    fn e(n: usize, i: usize) -> RVector {
        let mut v = RVector::zeros(n);
        v[i] = 1.0;
        v
    }

    fn model_b_6x6(seed: u64) -> (LatticeBox, TileGeometry, crate::models::Hamiltonian) {
        let b = LatticeBox::cube(2, 0, 5).unwrap();
        let g = TileGeometry::new(vec![2, 2]).unwrap();
        let mut rng = trial_rng(seed, 0);
        let omega: Vec<f64> = (0..g.tiles_in(&b).len()).map(|_| rng.random::<f64>()).collect();
        let h = build_model_b(&b, &g, &[1.0, 0.5, 2.0, 1.5], &omega).unwrap();
        (b, g, h)
    }

    #[test]
    fn krylov_examples() {
        let d = RMatrix::from_diagonal(&RVector::from_row_slice(&[1.0, 2.0]));
        assert_eq!(krylov_reducing(&d, &[e(2, 0)]).unwrap().dim(), 1);
        let x = RMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        assert_eq!(krylov_reducing(&x, &[e(2, 0)]).unwrap().dim(), 2);

        let (b, g, h) = model_b_6x6(3);
        let c0: Vec<RVector> = tile_indices(&b, &g, &[0, 0]).into_iter().map(|i| e(h.dim(), i)).collect();
        let s = krylov_reducing(&h.matrix, &c0).unwrap();
        assert!(s.invariance_residual < 1e-10);
        for v in &c0 {
            assert!(s.distance(v) < 1e-12);
        }
    }

    #[test]
    fn weak_cyclicity_examples() {
        let (_, _, h) = model_b_6x6(5);
        let id = RMatrix::identity(h.dim(), h.dim());
        assert!(weak_cyclicity_check(&h.matrix, &id, 1e-8).unwrap().passes);
        let b = LatticeBox::cube(2, 0, 5).unwrap();
        let v = tile_potential(&b, &TileGeometry::new(vec![2, 2]).unwrap(), &[1.0, 0.5, 2.0, 1.5], &[0, 0]).unwrap();
        let r = weak_cyclicity_check(&h.matrix, &v.full, 1e-8).unwrap();
        assert!(r.passes, "max distance {:?}", r.distances.iter().cloned().fold(0.0, f64::max));
    }

    #[test]
    fn model_a_degenerate_w_is_direct_sum() {
        let b = LatticeBox::cube(2, 0, 3).unwrap();
        let mut rng = trial_rng(1, 0);
        let omega: Vec<f64> = (0..b.len()).map(|_| rng.random::<f64>()).collect();
        let w = SingleSiteMatrix::diagonal(&[1.0, 1.0]).unwrap();
        let h = build_model_a(&b, &w, &omega).unwrap();
        let n = h.dim();
        // one channel at the origin only reaches its own copy of the scalar model
        let s = krylov_reducing(&h.matrix, &[e(n, 0)]).unwrap();
        assert_eq!(s.dim(), b.len());
        for site in 0..b.len() {
            assert!(s.distance(&e(n, site * 2 + 1)) > 1.0 - 1e-12);
        }
        // both channels together generate everything
        let v = RMatrix::from_fn(n, n, |i, j| if i == j && i < 2 { 1.0 } else { 0.0 });
        let r = weak_cyclicity_check(&h.matrix, &v, 1e-8).unwrap();
        assert_eq!(r.subspace_dim, n);
        assert!(r.passes);
        // a single channel leaves the eigenvectors of the degenerate pairs outside
        let v1 = RMatrix::from_fn(n, n, |i, j| if i == 0 && j == 0 { 1.0 } else { 0.0 });
        let r = weak_cyclicity_check(&h.matrix, &v1, 1e-8).unwrap();
        assert_eq!(r.subspace_dim, b.len());
        assert!(!r.passes);
    }

    #[test]
    fn resolvent_span_equals_krylov() {
        let (_, _, h) = model_b_6x6(9);
        let m = vec![e(h.dim(), 0), e(h.dim(), 7)];
        let zs: Vec<C64> = (0..h.dim()).map(|k| c64(-3.0 + 0.17 * k as f64, 1.0)).collect();
        let c = resolvent_span_comparison(&h.matrix, &m, &zs).unwrap();
        assert!(c.equal(), "{c:?}");
    }

    #[test]
    fn span_condition_examples() {
        let (_, _, h) = model_b_6x6(2);
        let v = RMatrix::zeros(h.dim(), h.dim());
        let r = span_condition(&h.matrix, &v, &[3], &[0], c64(0.0, 1.0), &[0.0]).unwrap();
        assert_eq!(r.achieved_rank, 1);
        let r = span_condition(&h.matrix, &v, &[3], &[0], c64(0.0, 1.0), &[]).unwrap();
        assert_eq!(r.achieved_rank, 0);

        let b = LatticeBox::cube(2, -3, 3).unwrap();
        let mut rng = trial_rng(4, 0);
        let omega: Vec<f64> = (0..b.len()).map(|_| rng.random::<f64>()).collect();
        let w = SingleSiteMatrix::diagonal(&[1.0, 2.0, 3.0]).unwrap();
        let h = build_model_a(&b, &w, &omega).unwrap();
        let x = h.indices_of_sites([[1i64, 1].as_slice()]);
        let y = h.indices_of_sites([[0i64, 0].as_slice()]);
        let v = RMatrix::zeros(h.dim(), h.dim());
        let r = span_condition(&h.matrix, &v, &x, &y, c64(0.0, 100.0), &[0.0]).unwrap();
        assert_eq!(r.achieved_rank, 3);
    }

    #[test]
    fn two_tile_examples() {
        let g1 = TileGeometry::new(vec![1]).unwrap();
        let r = two_tile_span(&g1, &[0], &[-1], &[1.0], c64(1.0, 1.0), &[1.5]).unwrap();
        assert_eq!(r.achieved_rank, 1);

        let g = TileGeometry::new(vec![2, 2]).unwrap();
        let f = [1.0; 4];
        let r = two_tile_span_auto(&g, &[0, 0], &[-1, 0], &f, c64(1.0, 1.0), 0).unwrap();
        assert!(r.full());
        let r = two_tile_span(&g, &[0, 0], &[-1, 0], &f, c64(1.0, 1.0), &[1.3]).unwrap();
        assert!(r.achieved_rank < 4);
        assert!(two_tile_span(&g, &[0, 0], &[1, 1], &f, c64(1.0, 1.0), &[1.3]).is_err());
    }

    #[test]
    fn coupling_limit_decays() {
        let b = LatticeBox::new(vec![-4, -2], vec![3, 3]).unwrap();
        let g = TileGeometry::new(vec![2, 2]).unwrap();
        let mut rng = trial_rng(7, 0);
        let omega: Vec<f64> = (0..g.tiles_in(&b).len()).map(|_| rng.random::<f64>()).collect();
        let f = [1.0, 0.5, 2.0, 1.5];
        let lambdas = [1e2, 1e3, 1e4, 1e5, 1e6];
        let t = coupling_limit(&b, &g, &f, &[0, 0], &[-1, 0], 1.3, &lambdas, &omega, c64(1.0, 1.0)).unwrap();
        assert!(t.monotone);
        assert!((t.slope + 1.0).abs() < 0.2, "slope {}", t.slope);
        assert!(t.rows.last().unwrap().deviation < 1e-4);
    }

    #[test]
    fn transfer_examples() {
        let h_mu = RMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.5]);
        let v = RMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        let h_lam = &h_mu + &v * 2.0;
        let r = eigenprojection_transfer(&h_lam, &h_mu, &v, 2.0, 0.0, &[1]).unwrap();
        assert_eq!(r.entries.len(), 2);
        assert!(r.max_residual() < 1e-12);
        assert!(eigenprojection_transfer(&h_mu, &h_mu, &v, 1.0, 1.0, &[0]).is_err());

        let (b, g, h) = model_b_6x6(11);
        let v = tile_potential(&b, &g, &[1.0, 0.5, 2.0, 1.5], &[1, 1]).unwrap().full;
        let h_lam = &h.matrix + &v * 0.7;
        let r = eigenprojection_transfer(&h_lam, &h.matrix, &v, 0.7, 0.0, &[0, 5, 13]).unwrap();
        assert!(r.entries.len() >= 10);
        assert!(r.max_residual() < 1e-8, "{}", r.max_residual());
    }
}
