//! Birman-Schwinger blocks `G(z) = sqrt(V) (H_0 - z)^{-1} sqrt(V)` on the range
//! of a finite-rank perturbation, the eigenvector correspondence between
//! `H_0 + lambda V` and `G(E) + 1/lambda`, and large-`|z|` expansions of
//! compressed resolvents.
//!
//! All resolvent blocks are obtained by direct solves of the finite-volume
//! problem; asymptotic statements are checked by comparing those exact blocks
//! with the truncated Neumann series `-(1/z) sum_n H^n / z^n`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fit::loglog_fit;
use crate::lattice::TileGeometry;
use crate::linalg::{
    general_eig, hermitian_eig, imaginary_part, is_simple, max_abs, resolvent_block,
    resolvent_columns, spectral_norm, submatrix, to_complex, CMatrix, CVector, Lu, RMatrix, C64,
};
use crate::models::{build_two_site, shortest_path_count, tile_indices, two_site_geometry, Hamiltonian, Potential};

/// Gap tolerance used when a check asks whether a block is simple.
pub const DEFAULT_GAP_TOL: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct BsBlock {
    pub z: C64,
    /// `G(z)` in the basis `support` of `R(V)`.
    pub block: CMatrix,
    pub support: Vec<usize>,
}

impl BsBlock {
    /// Smallest eigenvalue of `(G - G^*) / 2i`.
    pub fn herglotz_margin(&self) -> Result<f64> {
        if self.block.is_empty() {
            return Ok(0.0);
        }
        Ok(hermitian_eig(&imaginary_part(&self.block))?.values[0])
    }
}

fn spectrum_distance(h0: &RMatrix, e: f64) -> Result<(f64, f64)> {
    let values = hermitian_eig(h0)?.values;
    let dist = values.iter().map(|v| (v - e).abs()).fold(f64::INFINITY, f64::min);
    let norm = values.iter().map(|v| v.abs()).fold(0.0, f64::max);
    Ok((dist, norm))
}

fn sandwich(v: &Potential, resolvent: &CMatrix) -> CMatrix {
    let s = to_complex(&v.sqrt_block);
    &s * resolvent * &s
}

pub fn bs_block(h0: &RMatrix, v: &Potential, z: C64) -> Result<BsBlock> {
    if v.dim() != h0.nrows() {
        return Err(Error::SizeMismatch { expected: h0.nrows(), got: v.dim() });
    }
    if z.im == 0.0 {
        let (dist, norm) = spectrum_distance(h0, z.re)?;
        let allowed = 1e-8 * norm;
        if dist <= allowed {
            return Err(Error::NearSpectrum { distance: dist, allowed });
        }
    }
    if v.support.is_empty() {
        return Ok(BsBlock { z, block: CMatrix::zeros(0, 0), support: vec![] });
    }
    let r = resolvent_block(h0, z, &v.support, &v.support)?;
    Ok(BsBlock { z, block: sandwich(v, &r), support: v.support.clone() })
}

#[derive(Debug, Clone)]
pub struct BoundaryReport {
    pub energy: f64,
    pub epsilons: Vec<f64>,
    pub blocks: Vec<BsBlock>,
    /// `||G(E + i eps_{n+1}) - G(E + i eps_n)||`.
    pub differences: Vec<f64>,
    pub converged: bool,
    /// `G(E)` evaluated directly on the real axis.
    pub real_axis: BsBlock,
    pub distance_to_real_axis_value: f64,
}

/// Minimum distance from the spectrum of `H_0` for boundary-value evaluation.
pub const BOUNDARY_SPECTRUM_GAP: f64 = 1e-6;

pub fn bs_boundary(h0: &RMatrix, v: &Potential, energy: f64, epsilons: &[f64]) -> Result<BoundaryReport> {
    if epsilons.is_empty() || epsilons.iter().any(|e| !(*e > 0.0)) {
        return Err(Error::precondition("epsilon list must be non-empty and positive"));
    }
    if epsilons.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::precondition("epsilon list must be strictly decreasing"));
    }
    let (dist, _) = spectrum_distance(h0, energy)?;
    if dist <= BOUNDARY_SPECTRUM_GAP {
        return Err(Error::NearSpectrum { distance: dist, allowed: BOUNDARY_SPECTRUM_GAP });
    }
    let blocks: Vec<BsBlock> = epsilons
        .iter()
        .map(|&eps| bs_block(h0, v, C64::new(energy, eps)))
        .collect::<Result<_>>()?;
    let differences: Vec<f64> =
        blocks.windows(2).map(|w| spectral_norm(&(&w[1].block - &w[0].block))).collect();
    let converged = differences.last().map_or(false, |d| *d < 1e-8);
    let real_axis = bs_block(h0, v, C64::new(energy, 0.0))?;
    let last = blocks.last().expect("non-empty");
    let distance_to_real_axis_value = spectral_norm(&(&last.block - &real_axis.block));
    Ok(BoundaryReport {
        energy,
        epsilons: epsilons.to_vec(),
        blocks,
        differences,
        converged,
        real_axis,
        distance_to_real_axis_value,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct CorrespondenceEntry {
    pub energy: f64,
    /// `||G(E) sqrt(V) u + sqrt(V) u / lambda|| / ||sqrt(V) u||`.
    pub residual: f64,
    pub sqrt_v_u_norm: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CorrespondenceReport {
    pub lambda: f64,
    pub entries: Vec<CorrespondenceEntry>,
    /// Eigenvalues of `H_lambda` too close to the spectrum of `H_0`.
    pub skipped: Vec<f64>,
}

impl CorrespondenceReport {
    pub fn max_residual(&self) -> f64 {
        self.entries.iter().map(|e| e.residual).fold(0.0, f64::max)
    }
}

/// For each eigenpair `(E, u)` of `H_lambda = H_0 + lambda V` with `E` away from
/// `sigma(H_0)`, checks that `sqrt(V) u` is a nonzero vector in the kernel of
/// `G(E) + 1/lambda`.
pub fn bs_correspondence(h_lam: &RMatrix, h0: &RMatrix, v: &Potential, lambda: f64) -> Result<CorrespondenceReport> {
    if lambda == 0.0 {
        return Err(Error::precondition("coupling lambda must be non-zero"));
    }
    if h_lam.shape() != h0.shape() || v.dim() != h0.nrows() {
        return Err(Error::SizeMismatch { expected: h0.nrows(), got: h_lam.nrows() });
    }
    let eig0 = hermitian_eig(h0)?;
    let spectrum0 = &eig0.values;
    let eig = hermitian_eig(h_lam)?;
    let sqrt_v = to_complex(&v.sqrt_block);
    // G(E) = sqrt(V) U_S diag(1/(e_k - E)) U_S^T sqrt(V), one decomposition for all energies
    let us = RMatrix::from_fn(v.support.len(), h0.nrows(), |r, k| eig0.vectors[(v.support[r], k)]);
    let left = &v.sqrt_block * &us;
    let mut entries = Vec::new();
    let mut skipped = Vec::new();
    for (i, &e) in eig.values.iter().enumerate() {
        let dist = spectrum0.iter().map(|x| (x - e).abs()).fold(f64::INFINITY, f64::min);
        if dist <= BOUNDARY_SPECTRUM_GAP {
            skipped.push(e);
            continue;
        }
        let u_support = CVector::from_iterator(
            v.support.len(),
            v.support.iter().map(|&k| C64::new(eig.vectors[(k, i)], 0.0)),
        );
        let w = &sqrt_v * u_support;
        let w_norm = w.norm();
        if w_norm == 0.0 {
            return Err(Error::NumericalFailure(format!(
                "sqrt(V) u vanishes for eigenvalue {e} away from sigma(H_0)"
            )));
        }
        let scaled = RMatrix::from_fn(left.nrows(), left.ncols(), |r, k| left[(r, k)] / (spectrum0[k] - e));
        let g = to_complex(&(&scaled * left.transpose()));
        let r = &g * &w + &w / C64::new(lambda, 0.0);
        entries.push(CorrespondenceEntry { energy: e, residual: r.norm() / w_norm, sqrt_v_u_norm: w_norm });
    }
    Ok(CorrespondenceReport { lambda, entries, skipped })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct NeumannReport {
    pub order: usize,
    pub remainder: f64,
    /// `(||H|| / |z|)^{m+1} / (|z| - ||H||)`.
    pub bound: f64,
}

/// `||(H - z)^{-1} + (1/z) sum_{n=0}^{m} H^n / z^n||` with its geometric bound.
pub fn neumann_remainder(h: &RMatrix, z: C64, order: usize) -> Result<NeumannReport> {
    let norm = spectral_norm(h);
    if z.norm() <= norm {
        return Err(Error::domain(format!("|z| = {} must exceed ||H|| = {norm}", z.norm())));
    }
    let n = h.nrows();
    let hc = to_complex(h);
    let resolvent = Lu::factor(&(&hc - CMatrix::identity(n, n) * z))?.inverse();
    let mut term = CMatrix::identity(n, n);
    let mut partial = CMatrix::identity(n, n);
    for _ in 0..order {
        term = &hc * term / z;
        partial += &term;
    }
    let remainder = spectral_norm(&(resolvent + partial / z));
    let ratio = norm / z.norm();
    let bound = ratio.powi(order as i32 + 1) / (z.norm() - norm);
    if remainder > bound * (1.0 + 1e-8) + 1e-14 / z.norm() {
        return Err(Error::NumericalFailure(format!(
            "Neumann remainder {remainder:.3e} exceeds geometric bound {bound:.3e}"
        )));
    }
    Ok(NeumannReport { order, remainder, bound })
}

/// `||-z G(z) - V|_{R(V)}||`, the first-order deviation of a
/// Birman-Schwinger block.
pub fn first_order_deviation(h0: &RMatrix, v: &Potential, z: C64) -> Result<f64> {
    let g = bs_block(h0, v, z)?;
    Ok(spectral_norm(&(g.block * (-z) - to_complex(&v.block))))
}

/// `||P_j (H - z)^{-1} P_0 + C_{j,d} z^{-(|j|_1 + 1)} I||` for a lattice
/// Hamiltonian with `channels` components per site.
pub fn offdiagonal_leading_deviation(h: &Hamiltonian, j: &[i64], z: C64) -> Result<f64> {
    let origin = vec![0i64; j.len()];
    let rows = h.indices_of_sites([j]);
    let cols = h.indices_of_sites([origin.as_slice()]);
    if rows.len() != h.channels || cols.len() != h.channels {
        return Err(Error::domain("both 0 and j must lie in the box"));
    }
    let order: i32 = j.iter().map(|x| x.abs() as i32).sum();
    let c = shortest_path_count(j)? as f64;
    let block = resolvent_block(&h.matrix, z, &rows, &cols)?;
    let lead = CMatrix::identity(h.channels, h.channels) * (z.powi(-(order + 1)) * c);
    Ok(spectral_norm(&(block + lead)))
}

#[derive(Debug, Clone, Serialize)]
pub struct AsymptoticRow {
    pub z_re: f64,
    pub z_im: f64,
    pub abs_z: f64,
    pub deviation: f64,
    pub simple: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct AsymptoticTable {
    pub rows: Vec<AsymptoticRow>,
    /// Log-log slope of deviation against `|z|`.
    pub slope: f64,
    /// Mean of `deviation * |z|`.
    pub constant: f64,
    /// Smallest tested `|z|` from which every larger tested `|z|` is simple.
    pub simple_from: Option<f64>,
}

fn finish_table(mut rows: Vec<AsymptoticRow>) -> AsymptoticTable {
    rows.sort_by(|a, b| a.abs_z.total_cmp(&b.abs_z));
    let xs: Vec<f64> = rows.iter().map(|r| r.abs_z).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.deviation).collect();
    let slope = if ys.iter().all(|y| *y > 0.0) {
        loglog_fit(&xs, &ys).map_or(f64::NAN, |f| f.slope)
    } else {
        f64::NAN
    };
    let constant = rows.iter().map(|r| r.deviation * r.abs_z).sum::<f64>() / rows.len().max(1) as f64;
    let simple_from = rows
        .iter()
        .rposition(|r| !r.simple)
        .map_or(rows.first().map(|r| r.abs_z), |k| rows.get(k + 1).map(|r| r.abs_z));
    AsymptoticTable { rows, slope, constant, simple_from }
}

fn base_tile_indices(h: &Hamiltonian, geom: &TileGeometry) -> Result<Vec<usize>> {
    let origin = vec![0i64; geom.dim()];
    let idx = tile_indices(&h.lattice, geom, &origin);
    if idx.len() != geom.tile_size() {
        return Err(Error::domain("the base tile must lie inside the box"));
    }
    Ok(idx)
}

/// Case of a simple single-site profile: `-z sqrt(f) (H - z)^{-1} sqrt(f) -> f`.
pub fn case_i_check(h: &Hamiltonian, geom: &TileGeometry, f: &[f64], z_list: &[C64]) -> Result<AsymptoticTable> {
    if f.len() != geom.tile_size() {
        return Err(Error::SizeMismatch { expected: geom.tile_size(), got: f.len() });
    }
    for i in 0..f.len() {
        for j in i + 1..f.len() {
            if f[i] == f[j] {
                return Err(Error::precondition("single-site profile f must take distinct values"));
            }
        }
    }
    let c0 = base_tile_indices(h, geom)?;
    let entries: Vec<(usize, f64)> = c0.iter().copied().zip(f.iter().copied()).collect();
    let v = Potential::diagonal(h.dim(), &entries)?;
    let rows = z_list
        .iter()
        .map(|&z| {
            let g = bs_block(&h.matrix, &v, z)?;
            let deviation = spectral_norm(&(&g.block * (-z) - to_complex(&v.block)));
            let simple = is_simple(&g.block, DEFAULT_GAP_TOL)?.simple;
            Ok(AsymptoticRow { z_re: z.re, z_im: z.im, abs_z: z.norm(), deviation, simple })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(finish_table(rows))
}

#[derive(Debug, Clone, Serialize)]
pub struct CaseIiReport {
    pub table: AsymptoticTable,
    /// `chi h_0 chi` on the strip, the limit of the rescaled block.
    pub limit: Vec<Vec<f64>>,
}

/// Strip tiles with `f = chi_{C_0}`: the rescaled block
/// `z(-z chi G chi - (1 + omega_0 / z))` tends to the Jacobi matrix `chi h_0 chi`.
pub fn case_ii_check(h: &Hamiltonian, geom: &TileGeometry, z_list: &[C64]) -> Result<CaseIiReport> {
    if geom.period().iter().filter(|&&l| l > 1).count() > 1 {
        return Err(Error::domain("case (ii) needs a strip tile: at most one period may exceed 1"));
    }
    let c0 = base_tile_indices(h, geom)?;
    let omega0 = h.potential[(c0[0], c0[0])];
    if c0.iter().any(|&i| h.potential[(i, i)] != omega0) {
        return Err(Error::precondition("case (ii) needs f = chi_{C_0} (constant on the base tile)"));
    }
    let limit = submatrix(&h.hopping(), &c0, &c0);
    let limit_c = to_complex(&limit);
    let l = c0.len();
    let rows = z_list
        .iter()
        .map(|&z| {
            let g = resolvent_block(&h.matrix, z, &c0, &c0)?;
            let shift = CMatrix::identity(l, l) * (C64::new(1.0, 0.0) + omega0 / z);
            let rescaled = (&g * (-z) - shift) * z;
            let deviation = spectral_norm(&(&rescaled - &limit_c));
            let simple = is_simple(&g, DEFAULT_GAP_TOL)?.simple;
            Ok(AsymptoticRow { z_re: z.re, z_im: z.im, abs_z: z.norm(), deviation, simple })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CaseIiReport {
        table: finish_table(rows),
        limit: limit.row_iter().map(|r| r.iter().copied().collect()).collect(),
    })
}

/// Orthonormal basis of `l^2({0,1}^2)` adapted to the reflection symmetries.
#[derive(Debug, Clone)]
pub struct SymmetryBasis {
    /// `delta_i` as printed 2x2 arrays: row 0 is the upper row (`j_2 = 1`),
    /// column index is `j_1`.
    pub arrays: [[[f64; 2]; 2]; 4],
    /// Columns `delta_i` in site order (0,0), (0,1), (1,0), (1,1).
    pub matrix: RMatrix,
}

pub fn symmetry_basis() -> SymmetryBasis {
    let arrays = [
        [[0.5, 0.5], [0.5, 0.5]],
        [[0.5, -0.5], [-0.5, 0.5]],
        [[0.5, 0.5], [-0.5, -0.5]],
        [[0.5, -0.5], [0.5, -0.5]],
    ];
    let geom = two_site_geometry();
    let mut matrix = RMatrix::zeros(4, 4);
    for (col, arr) in arrays.iter().enumerate() {
        for (r, row) in arr.iter().enumerate() {
            for (c, &value) in row.iter().enumerate() {
                let site = [c as i64, 1 - r as i64];
                matrix[(geom.local_index(&site), col)] = value;
            }
        }
    }
    SymmetryBasis { arrays, matrix }
}

/// The five compressions entering the fourth-order expansion for `h_{a,b}`,
/// expressed in the symmetry basis.
#[derive(Debug, Clone)]
pub struct CaseIiiMatrices {
    pub h0: RMatrix,
    pub h0_sq: RMatrix,
    pub h0_cube: RMatrix,
    pub h0_v_h0: RMatrix,
    pub h0_hv_sq_h0: RMatrix,
}

impl CaseIiiMatrices {
    pub fn named(&self) -> [(&'static str, &RMatrix); 5] {
        [
            ("chi h0 chi", &self.h0),
            ("chi h0^2 chi", &self.h0_sq),
            ("chi h0^3 chi", &self.h0_cube),
            ("chi h0 V h0 chi", &self.h0_v_h0),
            ("chi h0 (h0+V)^2 h0 chi", &self.h0_hv_sq_h0),
        ]
    }

    /// Order-`n` coefficient of `z(-z chi (h_{a,b} - z)^{-1} chi - I)` for n = 0..=3.
    pub fn expansion_terms(&self) -> [RMatrix; 4] {
        [
            self.h0.clone(),
            self.h0_sq.clone(),
            &self.h0_cube + &self.h0_v_h0,
            self.h0_hv_sq_h0.clone(),
        ]
    }
}

/// Minimum assembly radius for which all five compressions are exact.
pub const CASE_III_EXACT_RADIUS: i64 = 4;

pub fn case_iii_matrices(a: f64, b: f64) -> CaseIiiMatrices {
    case_iii_matrices_at_radius(a, b, CASE_III_EXACT_RADIUS).expect("radius is admissible")
}

pub fn case_iii_matrices_at_radius(a: f64, b: f64, radius: i64) -> Result<CaseIiiMatrices> {
    let h = build_two_site(a, b, radius)?;
    let c0 = tile_indices(&h.lattice, &two_site_geometry(), &[0, 0]);
    let n = h.dim();
    let basis = symmetry_basis().matrix;
    let mut d = RMatrix::zeros(n, 4);
    for (local, &i) in c0.iter().enumerate() {
        d.row_mut(i).copy_from(&basis.row(local));
    }
    let h0 = h.hopping();
    let full = &h.matrix;
    let h0d = &h0 * &d;
    let h0h0d = &h0 * &h0d;
    let hh0d = full * &h0d;
    let sym = |m: RMatrix| (&m + m.transpose()) * 0.5;
    Ok(CaseIiiMatrices {
        h0: sym(d.transpose() * &h0d),
        h0_sq: sym(h0d.transpose() * &h0d),
        h0_cube: sym(h0d.transpose() * &h0h0d),
        h0_v_h0: sym(h0d.transpose() * &h.potential * &h0d),
        h0_hv_sq_h0: sym(hh0d.transpose() * &hh0d),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SplittingRow {
    pub z_re: f64,
    pub z_im: f64,
    pub abs_z: f64,
    /// The near-degenerate pair after removing the common shift; the first
    /// entry is the one matched to `+(a-b)/z^3`.
    pub measured: [(f64, f64); 2],
    pub predicted: (f64, f64),
    pub gap: f64,
    /// `gap |z|^3 / (2 |a - b|)`, tends to one.
    pub gap_ratio: f64,
    pub relative_deviation: f64,
    /// Roots of `det(D - x - C (A - x)^{-1} B)` near the pair, shifted likewise.
    pub schur_roots: [(f64, f64); 2],
    /// `max |schur - eigen| / gap`.
    pub schur_disagreement: f64,
    /// Max entry change of the rescaled block when the radius doubles.
    pub truncation_change: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SplittingTable {
    pub a: f64,
    pub b: f64,
    pub radius: i64,
    pub rows: Vec<SplittingRow>,
}

fn pair(x: C64) -> (f64, f64) {
    (x.re, x.im)
}

/// `z(-z chi_{C_0} (h_{a,b} - z)^{-1} chi_{C_0} - I)` in the symmetry basis.
pub fn case_iii_rescaled(h: &Hamiltonian, z: C64) -> Result<CMatrix> {
    let c0 = tile_indices(&h.lattice, &two_site_geometry(), &[0, 0]);
    let g = resolvent_block(&h.matrix, z, &c0, &c0)?;
    let basis = to_complex(&symmetry_basis().matrix);
    let g_delta = basis.transpose() * g * &basis;
    Ok((g_delta * (-z) - CMatrix::identity(4, 4)) * z)
}

/// Roots of `det(D - x - C (A - x)^{-1} B)` for the 2+2 split of `m`, by
/// simultaneous Newton steps with mutual deflation from the given starts.
fn schur_pair_roots(m: &CMatrix, start: [C64; 2]) -> Result<[C64; 2]> {
    let a = m.view((0, 0), (2, 2)).into_owned();
    let b = m.view((0, 2), (2, 2)).into_owned();
    let c = m.view((2, 0), (2, 2)).into_owned();
    let d = m.view((2, 2), (2, 2)).into_owned();
    let id = CMatrix::identity(2, 2);
    // d/dx log det K(x) = tr(K^{-1} K'), K' = -I - C (A - x)^{-2} B
    let log_derivative = |x: C64| -> Result<C64> {
        let a_inv = Lu::factor(&(&a - &id * x))?.inverse();
        let k = &d - &id * x - &c * &a_inv * &b;
        let dk = -&id - &c * &a_inv * &a_inv * &b;
        Ok((Lu::factor(&k)?.solve(&dk)).trace())
    };
    let mut roots = start;
    let scale = (start[0] - start[1]).norm().max(f64::MIN_POSITIVE);
    for _ in 0..60 {
        let mut moved = 0.0f64;
        for i in 0..2 {
            let g = match log_derivative(roots[i]) {
                Ok(g) => g,
                Err(Error::SingularMatrix { .. }) => continue,
                Err(e) => return Err(e),
            };
            let step = (g - (roots[i] - roots[1 - i]).inv()).inv();
            if step.is_finite() {
                roots[i] -= step;
                moved = moved.max(step.norm());
            }
        }
        if moved <= 1e-13 * scale {
            break;
        }
    }
    Ok(roots)
}

/// Measured splitting of the near-degenerate pair of the rescaled compressed
/// resolvent of `h_{a,b}` against the prediction `+-(a-b)/z^3`.
pub fn case_iii_splitting(a: f64, b: f64, z_list: &[C64], radius: i64) -> Result<SplittingTable> {
    if a == b {
        return Err(Error::precondition("case (iii) splitting needs a != b"));
    }
    if let Some(z) = z_list.iter().find(|z| z.norm() < 10.0) {
        return Err(Error::precondition(format!("|z| must be at least 10 (got {})", z.norm())));
    }
    let terms = case_iii_matrices(a, b).expansion_terms();
    let h = build_two_site(a, b, radius)?;
    let h_double = build_two_site(a, b, 2 * radius)?;
    let mut rows = Vec::with_capacity(z_list.len());
    for &z in z_list {
        let m = case_iii_rescaled(&h, z)?;
        let truncation_change = max_abs(&(&m - case_iii_rescaled(&h_double, z)?));

        // common shift of the lower-right pair through third order
        let shift: C64 = terms
            .iter()
            .enumerate()
            .map(|(n, t)| C64::new(0.5 * (t[(2, 2)] + t[(3, 3)]), 0.0) / z.powi(n as i32))
            .sum();
        let predicted = C64::new(a - b, 0.0) / z.powi(3);

        let spectrum = general_eig(&m, 1e-14)?;
        let mut values = spectrum.values.clone();
        values.sort_by(|x, y| x.norm().total_cmp(&y.norm()));
        let (mut lo, mut hi) = (values[0] - shift, values[1] - shift);
        if (hi - predicted).norm() < (lo - predicted).norm() {
            std::mem::swap(&mut lo, &mut hi);
        }
        let gap = (lo - hi).norm();
        let relative_deviation =
            ((lo - predicted).norm()).max((hi + predicted).norm()) / predicted.norm();

        let schur = schur_pair_roots(&m, [shift + predicted, shift - predicted])?;
        let schur_shifted = [schur[0] - shift, schur[1] - shift];
        let schur_disagreement =
            ((schur_shifted[0] - lo).norm()).max((schur_shifted[1] - hi).norm()) / gap;
        rows.push(SplittingRow {
            z_re: z.re,
            z_im: z.im,
            abs_z: z.norm(),
            measured: [pair(lo), pair(hi)],
            predicted: pair(predicted),
            gap,
            gap_ratio: gap * z.norm().powi(3) / (2.0 * (a - b).abs()),
            relative_deviation,
            schur_roots: [pair(schur_shifted[0]), pair(schur_shifted[1])],
            schur_disagreement,
            truncation_change,
        });
    }
    rows.sort_by(|x, y| x.abs_z.total_cmp(&y.abs_z));
    Ok(SplittingTable { a, b, radius, rows })
}

#[derive(Debug, Clone, Serialize)]
pub struct ScanRow {
    pub abs_z: f64,
    pub simple: bool,
    /// Minimal eigenvalue gap over `diameter + 1`.
    pub normalized_gap: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScanReport {
    pub rows: Vec<ScanRow>,
    /// Smallest tested `|z|` at which the block is simple.
    pub first_simple: Option<f64>,
    /// Whether every larger tested `|z|` is also simple.
    pub persistent: bool,
}

/// Simplicity of `G(i t)` along increasing `t`.
pub fn simplicity_threshold_scan(h0: &RMatrix, v: &Potential, magnitudes: &[f64]) -> Result<ScanReport> {
    let mut mags = magnitudes.to_vec();
    mags.sort_by(f64::total_cmp);
    let rows = mags
        .iter()
        .map(|&t| {
            let g = bs_block(h0, v, C64::new(0.0, t))?;
            let r = is_simple(&g.block, DEFAULT_GAP_TOL)?;
            let normalized_gap = if r.min_gap.is_finite() { r.min_gap / (r.diameter + 1.0) } else { f64::INFINITY };
            Ok(ScanRow { abs_z: t, simple: r.simple, normalized_gap })
        })
        .collect::<Result<Vec<_>>>()?;
    let first = rows.iter().position(|r| r.simple);
    let persistent = first.map_or(false, |k| rows[k..].iter().all(|r| r.simple));
    Ok(ScanReport { first_simple: first.map(|k| rows[k].abs_z), persistent, rows })
}

/// Columns of `(H - z)^{-1}` restricted to `rows`; convenience for callers
/// building their own compressions.
pub fn compressed_resolvent(h: &RMatrix, z: C64, rows: &[usize], cols: &[usize]) -> Result<CMatrix> {
    let full = resolvent_columns(h, z, cols)?;
    Ok(CMatrix::from_fn(rows.len(), cols.len(), |i, j| full[(rows[i], j)]))
}
