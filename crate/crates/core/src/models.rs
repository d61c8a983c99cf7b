//! Finite-volume Hamiltonians and disorder sampling.
//!
//! Every builder assembles `h_0` (nearest-neighbour hopping of strength one,
//! Dirichlet truncation at the box boundary) plus a diagonal or block-diagonal
//! potential. Assembly writes `(i, j)` and `(j, i)` from the same value, so the
//! matrices are exactly symmetric.

use std::collections::HashMap;
use std::sync::OnceLock;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Uniform};
use serde::Serialize;
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::lattice::{LatticeBox, TileGeometry};
use crate::linalg::{hermitian_eig, psd_sqrt, submatrix, RMatrix};

/// Law of the i.i.d. couplings; always supported on a bounded interval.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum DisorderLaw {
    Uniform { lo: f64, hi: f64 },
    TruncatedGaussian { mean: f64, sd: f64, lo: f64, hi: f64 },
}

impl DisorderLaw {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.support();
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::domain("disorder support must be a bounded interval lo < hi"));
        }
        if let DisorderLaw::TruncatedGaussian { mean, sd, .. } = *self {
            if !(sd > 0.0 && mean.is_finite()) {
                return Err(Error::domain("truncated gaussian needs finite mean and sd > 0"));
            }
        }
        Ok(())
    }

    pub fn support(&self) -> (f64, f64) {
        match *self {
            DisorderLaw::Uniform { lo, hi } => (lo, hi),
            DisorderLaw::TruncatedGaussian { lo, hi, .. } => (lo, hi),
        }
    }

    fn truncation(mean: f64, sd: f64, lo: f64, hi: f64) -> (Normal, f64, f64) {
        let std = Normal::new(0.0, 1.0).expect("standard normal");
        let a = (lo - mean) / sd;
        let b = (hi - mean) / sd;
        (std, a, b)
    }

    pub fn mean(&self) -> f64 {
        match *self {
            DisorderLaw::Uniform { lo, hi } => 0.5 * (lo + hi),
            DisorderLaw::TruncatedGaussian { mean, sd, lo, hi } => {
                let (n, a, b) = Self::truncation(mean, sd, lo, hi);
                let z = n.cdf(b) - n.cdf(a);
                mean + sd * (n.pdf(a) - n.pdf(b)) / z
            }
        }
    }

    pub fn variance(&self) -> f64 {
        match *self {
            DisorderLaw::Uniform { lo, hi } => (hi - lo).powi(2) / 12.0,
            DisorderLaw::TruncatedGaussian { mean, sd, lo, hi } => {
                let (n, a, b) = Self::truncation(mean, sd, lo, hi);
                let z = n.cdf(b) - n.cdf(a);
                let t1 = (a * n.pdf(a) - b * n.pdf(b)) / z;
                let t2 = (n.pdf(a) - n.pdf(b)) / z;
                sd * sd * (1.0 + t1 - t2 * t2)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DisorderSpec {
    #[serde(flatten)]
    pub law: DisorderLaw,
    pub master_seed: u64,
}

impl Default for DisorderSpec {
    fn default() -> Self {
        Self { law: DisorderLaw::Uniform { lo: 0.0, hi: 1.0 }, master_seed: 0 }
    }
}

/// Independent generator for one trial: ChaCha8 keyed by the master seed, with
/// the trial number as stream id.
pub fn trial_rng(master_seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(trial);
    rng
}

/// `count` i.i.d. draws for `trial`; identical for identical `(seed, trial)`.
pub fn sample_omega(spec: &DisorderSpec, count: usize, trial: u64) -> Vec<f64> {
    let mut rng = trial_rng(spec.master_seed, trial);
    match spec.law {
        DisorderLaw::Uniform { lo, hi } => {
            let u = Uniform::new_inclusive(lo, hi).expect("validated interval");
            (0..count).map(|_| u.sample(&mut rng)).collect()
        }
        DisorderLaw::TruncatedGaussian { mean, sd, lo, hi } => {
            // inverse-CDF sampling restricted to [Phi(a), Phi(b)]
            let (n, a, b) = DisorderLaw::truncation(mean, sd, lo, hi);
            let (pa, pb) = (n.cdf(a), n.cdf(b));
            let u = Uniform::new_inclusive(pa, pb).expect("ordered probabilities");
            (0..count)
                .map(|_| (mean + sd * n.inverse_cdf(u.sample(&mut rng))).clamp(lo, hi))
                .collect()
        }
    }
}

/// Nearest-neighbour hopping matrix of the box (Dirichlet truncation).
pub fn hopping_matrix(lattice: &LatticeBox) -> RMatrix {
    let n = lattice.len();
    let mut h = RMatrix::zeros(n, n);
    for i in 0..n {
        for j in lattice.neighbor_indices(i) {
            if j > i {
                h[(i, j)] = 1.0;
                h[(j, i)] = 1.0;
            }
        }
    }
    h
}

/// A lattice Hamiltonian `h_0 (x) I_k + V`.
#[derive(Debug, Clone)]
pub struct Hamiltonian {
    pub lattice: LatticeBox,
    /// Internal components per site (`k` for Model A, 1 otherwise).
    pub channels: usize,
    pub matrix: RMatrix,
    /// The potential part `V`.
    pub potential: RMatrix,
    sqrt_potential: OnceLock<Result<RMatrix>>,
}

impl Hamiltonian {
    pub fn new(lattice: LatticeBox, channels: usize, hopping: RMatrix, potential: RMatrix) -> Self {
        let n = hopping.nrows();
        let mut matrix = hopping;
        for i in 0..n {
            for j in 0..=i {
                let v = potential[(i, j)];
                if v != 0.0 {
                    matrix[(i, j)] += v;
                    if i != j {
                        matrix[(j, i)] = matrix[(i, j)];
                    }
                }
            }
        }
        Self { lattice, channels, matrix, potential, sqrt_potential: OnceLock::new() }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// Basis index of `(site, channel)`.
    pub fn index(&self, site: &[i64], channel: usize) -> Option<usize> {
        self.lattice.index_of(site).map(|s| s * self.channels + channel)
    }

    /// Basis indices of all channels of the given sites.
    pub fn indices_of_sites<'a>(&self, sites: impl IntoIterator<Item = &'a [i64]>) -> Vec<usize> {
        sites
            .into_iter()
            .filter_map(|s| self.lattice.index_of(s))
            .flat_map(|s| (0..self.channels).map(move |c| s * self.channels + c))
            .collect()
    }

    pub fn hopping(&self) -> RMatrix {
        &self.matrix - &self.potential
    }

    /// `sqrt(V)`, computed once. Fails when `V` is not positive semidefinite.
    pub fn sqrt_potential(&self) -> Result<&RMatrix> {
        self.sqrt_potential
            .get_or_init(|| blockwise_sqrt(&self.potential, self.channels))
            .as_ref()
            .map_err(Clone::clone)
    }
}

fn blockwise_sqrt(v: &RMatrix, k: usize) -> Result<RMatrix> {
    let n = v.nrows();
    let mut out = RMatrix::zeros(n, n);
    for start in (0..n).step_by(k) {
        let idx: Vec<usize> = (start..start + k).collect();
        let block = submatrix(v, &idx, &idx);
        if block.iter().all(|&x| x == 0.0) {
            continue;
        }
        let s = if k == 1 {
            if block[(0, 0)] < 0.0 {
                return Err(Error::domain("potential has a negative entry; sqrt(V) undefined"));
            }
            RMatrix::from_element(1, 1, block[(0, 0)].sqrt())
        } else {
            psd_sqrt(&block)?
        };
        for (a, &i) in idx.iter().enumerate() {
            for (b, &j) in idx.iter().enumerate() {
                out[(i, j)] = s[(a, b)];
            }
        }
    }
    Ok(out)
}

/// A non-negative perturbation `V` together with its range data.
#[derive(Debug, Clone)]
pub struct Potential {
    pub full: RMatrix,
    /// Basis indices spanning `R(V)`.
    pub support: Vec<usize>,
    /// `V` restricted to the support.
    pub block: RMatrix,
    /// `sqrt(V)` restricted to the support.
    pub sqrt_block: RMatrix,
}

impl Potential {
    pub fn new(full: RMatrix) -> Result<Self> {
        if !full.is_square() {
            return Err(Error::domain("potential must be square"));
        }
        let n = full.nrows();
        let support: Vec<usize> =
            (0..n).filter(|&i| (0..n).any(|j| full[(i, j)] != 0.0)).collect();
        let block = submatrix(&full, &support, &support);
        let sqrt_block = if support.is_empty() { RMatrix::zeros(0, 0) } else { psd_sqrt(&block)? };
        Ok(Self { full, support, block, sqrt_block })
    }

    /// Diagonal potential with the given `(index, value)` entries.
    pub fn diagonal(n: usize, entries: &[(usize, f64)]) -> Result<Self> {
        let mut full = RMatrix::zeros(n, n);
        for &(i, v) in entries {
            full[(i, i)] = v;
        }
        Self::new(full)
    }

    pub fn dim(&self) -> usize {
        self.full.nrows()
    }

    pub fn rank(&self) -> usize {
        self.support.len()
    }
}

/// Single-site matrix of Model A, stored with its diagonalization.
#[derive(Debug, Clone, Serialize)]
pub struct SingleSiteMatrix {
    pub w: Vec<Vec<f64>>,
    pub eigenvalues: Vec<f64>,
    #[serde(skip)]
    pub eigenvectors: RMatrix,
}

impl SingleSiteMatrix {
    pub fn new(w: &RMatrix) -> Result<Self> {
        if !w.is_square() || w.nrows() == 0 {
            return Err(Error::domain("W must be a non-empty square matrix"));
        }
        let eig = hermitian_eig(w).map_err(|_| Error::domain("W must be symmetric"))?;
        if eig.values[0] <= 0.0 {
            return Err(Error::domain(format!(
                "W must be positive definite (smallest eigenvalue {:.6e})",
                eig.values[0]
            )));
        }
        Ok(Self {
            w: w.row_iter().map(|r| r.iter().copied().collect()).collect(),
            eigenvalues: eig.values,
            eigenvectors: eig.vectors,
        })
    }

    pub fn diagonal(values: &[f64]) -> Result<Self> {
        Self::new(&RMatrix::from_diagonal(&nalgebra::DVector::from_row_slice(values)))
    }

    pub fn k(&self) -> usize {
        self.eigenvalues.len()
    }
}

fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::SizeMismatch { expected, got });
    }
    Ok(())
}

pub fn build_discrete_anderson(lattice: &LatticeBox, omega: &[f64]) -> Result<Hamiltonian> {
    check_len(lattice.len(), omega.len())?;
    let h0 = hopping_matrix(lattice);
    let v = RMatrix::from_diagonal(&nalgebra::DVector::from_row_slice(omega));
    Ok(Hamiltonian::new(lattice.clone(), 1, h0, v))
}

/// Model A in the eigenbasis of `W`: `h_0 (x) I_k + sum_n omega_n P_n (x) diag(lambda)`.
pub fn build_model_a(lattice: &LatticeBox, w: &SingleSiteMatrix, omega: &[f64]) -> Result<Hamiltonian> {
    check_len(lattice.len(), omega.len())?;
    let k = w.k();
    let n = lattice.len();
    let h0 = hopping_matrix(lattice);
    let mut hop = RMatrix::zeros(n * k, n * k);
    let mut v = RMatrix::zeros(n * k, n * k);
    for i in 0..n {
        for j in 0..n {
            if h0[(i, j)] != 0.0 {
                for c in 0..k {
                    hop[(i * k + c, j * k + c)] = h0[(i, j)];
                }
            }
        }
        for c in 0..k {
            v[(i * k + c, i * k + c)] = omega[i] * w.eigenvalues[c];
        }
    }
    Ok(Hamiltonian::new(lattice.clone(), k, hop, v))
}

fn check_profile(geom: &TileGeometry, f: &[f64]) -> Result<()> {
    check_len(geom.tile_size(), f.len())?;
    if let Some(bad) = f.iter().find(|&&x| !(x > 0.0)) {
        return Err(Error::domain(format!("single-site profile must be positive, found {bad}")));
    }
    Ok(())
}

/// Model B: `h_0 + sum_m omega_m f(. - mL)` with `omega` listed in the order of
/// [`TileGeometry::tiles_in`].
pub fn build_model_b(
    lattice: &LatticeBox,
    geom: &TileGeometry,
    f: &[f64],
    omega: &[f64],
) -> Result<Hamiltonian> {
    if geom.dim() != lattice.dim() {
        return Err(Error::domain("tile geometry and box have different dimensions"));
    }
    check_profile(geom, f)?;
    let tiles = geom.tiles_in(lattice);
    check_len(tiles.len(), omega.len())?;
    let tile_index: HashMap<&[i64], usize> =
        tiles.iter().enumerate().map(|(i, m)| (m.as_slice(), i)).collect();
    let n = lattice.len();
    let mut v = RMatrix::zeros(n, n);
    for (i, site) in lattice.sites().enumerate() {
        let m = geom.tile_of(&site);
        v[(i, i)] = omega[tile_index[m.as_slice()]] * f[geom.local_index(&site)];
    }
    Ok(Hamiltonian::new(lattice.clone(), 1, hopping_matrix(lattice), v))
}

/// Indices of the sites of tile `m` inside `lattice`, in `C_0` local order.
pub fn tile_indices(lattice: &LatticeBox, geom: &TileGeometry, m: &[i64]) -> Vec<usize> {
    geom.tile(m).sites().filter_map(|s| lattice.index_of(&s)).collect()
}

/// `f_m` as a potential on the box; the whole tile must lie in the box.
pub fn tile_potential(lattice: &LatticeBox, geom: &TileGeometry, f: &[f64], m: &[i64]) -> Result<Potential> {
    check_profile(geom, f)?;
    let tile = geom.tile(m);
    let mut entries = Vec::with_capacity(tile.len());
    for (local, site) in tile.sites().enumerate() {
        let i = lattice
            .index_of(&site)
            .ok_or_else(|| Error::domain(format!("tile {m:?} is not contained in the box")))?;
        entries.push((i, f[local]));
    }
    Potential::diagonal(lattice.len(), &entries)
}

pub const TWO_SITE_MIN_RADIUS: i64 = 4;

/// Base tile `{0,1}^2` of the two-site model.
pub fn two_site_geometry() -> TileGeometry {
    TileGeometry::new(vec![2, 2]).expect("positive periods")
}

/// `h_{a,b} = h_0 + a chi_{C_(0,1)} + b chi_{C_(-1,0)}` on `[-R, R+1]^2`.
pub fn build_two_site(a: f64, b: f64, radius: i64) -> Result<Hamiltonian> {
    if radius < TWO_SITE_MIN_RADIUS {
        return Err(Error::domain(format!("two-site truncation radius must be >= {TWO_SITE_MIN_RADIUS}")));
    }
    let lattice = LatticeBox::cube(2, -radius, radius + 1)?;
    let geom = two_site_geometry();
    let n = lattice.len();
    let mut v = RMatrix::zeros(n, n);
    for (m, value) in [([0i64, 1i64], a), ([-1, 0], b)] {
        for i in tile_indices(&lattice, &geom, &m) {
            v[(i, i)] = value;
        }
    }
    Ok(Hamiltonian::new(lattice.clone(), 1, hopping_matrix(&lattice), v))
}

/// Restriction of `h_0` to two neighbouring tiles plus `mu f_C` on the first.
#[derive(Debug, Clone)]
pub struct TwoTile {
    pub hamiltonian: Hamiltonian,
    /// Indices of `C` in the union box, local `C_0` order.
    pub c: Vec<usize>,
    /// Indices of `C'` in the union box, local `C_0` order.
    pub c_prime: Vec<usize>,
}

pub fn build_two_tile(
    geom: &TileGeometry,
    c: &[i64],
    c_prime: &[i64],
    mu: f64,
    f: &[f64],
) -> Result<TwoTile> {
    if !TileGeometry::are_neighbors(c, c_prime) {
        return Err(Error::domain(format!("tiles {c:?} and {c_prime:?} are not neighbours")));
    }
    check_profile(geom, f)?;
    let (tc, tp) = (geom.tile(c), geom.tile(c_prime));
    let lower = tc.lower().iter().zip(tp.lower()).map(|(a, b)| *a.min(b)).collect();
    let upper = tc.upper().iter().zip(tp.upper()).map(|(a, b)| *a.max(b)).collect();
    let union = LatticeBox::new(lower, upper)?;
    let c_idx = tile_indices(&union, geom, c);
    let cp_idx = tile_indices(&union, geom, c_prime);
    let n = union.len();
    let mut v = RMatrix::zeros(n, n);
    for (local, &i) in c_idx.iter().enumerate() {
        v[(i, i)] = mu * f[local];
    }
    let hamiltonian = Hamiltonian::new(union.clone(), 1, hopping_matrix(&union), v);
    Ok(TwoTile { hamiltonian, c: c_idx, c_prime: cp_idx })
}

/// Number of shortest lattice paths from 0 to `j` in `Z^d`.
pub fn shortest_path_count(j: &[i64]) -> Result<u64> {
    if j.iter().all(|&x| x == 0) {
        return Err(Error::domain("shortest path count is undefined for j = 0"));
    }
    // Pascal-style recursion: paths(v) = sum over axes of paths(v - e_axis).
    let target: Vec<usize> = j.iter().map(|x| x.unsigned_abs() as usize).collect();
    let grid = LatticeBox::new(vec![0; target.len()], target.iter().map(|&t| t as i64).collect())?;
    let mut count = vec![0u64; grid.len()];
    count[0] = 1;
    for i in 1..grid.len() {
        let site = grid.site(i);
        let mut total = 0u64;
        for axis in 0..site.len() {
            if site[axis] > 0 {
                total = total
                    .checked_add(count[i - grid.stride(axis)])
                    .ok_or_else(|| Error::NumericalFailure("path count overflows u64".into()))?;
            }
        }
        count[i] = total;
    }
    Ok(count[grid.len() - 1])
}

/// Which Hamiltonian family to build.
#[derive(Debug, Clone, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelKind {
    Discrete,
    ModelA { w: SingleSiteMatrix },
    ModelB { period: Vec<i64>, f: Vec<f64> },
    TwoSite { a: f64, b: f64, radius: i64 },
}

#[derive(Debug, Clone, Serialize)]
pub struct ModelSpec {
    #[serde(flatten)]
    pub kind: ModelKind,
    pub lattice: LatticeBox,
}

impl ModelSpec {
    /// Number of random couplings one configuration needs.
    pub fn disorder_count(&self) -> usize {
        match &self.kind {
            ModelKind::Discrete | ModelKind::ModelA { .. } => self.lattice.len(),
            ModelKind::ModelB { period, .. } => TileGeometry::new(period.clone())
                .map(|g| g.tiles_in(&self.lattice).len())
                .unwrap_or(0),
            ModelKind::TwoSite { .. } => 0,
        }
    }

    pub fn build(&self, omega: &[f64]) -> Result<Hamiltonian> {
        match &self.kind {
            ModelKind::Discrete => build_discrete_anderson(&self.lattice, omega),
            ModelKind::ModelA { w } => build_model_a(&self.lattice, w, omega),
            ModelKind::ModelB { period, f } => {
                build_model_b(&self.lattice, &TileGeometry::new(period.clone())?, f, omega)
            }
            ModelKind::TwoSite { a, b, radius } => build_two_site(*a, *b, *radius),
        }
    }

    /// The single-site perturbation `V_0` attached to the origin.
    pub fn origin_potential(&self) -> Result<Potential> {
        let origin = vec![0i64; self.lattice.dim()];
        let missing = || Error::domain("the origin is not inside the model box");
        match &self.kind {
            ModelKind::Discrete => {
                let i = self.lattice.index_of(&origin).ok_or_else(missing)?;
                Potential::diagonal(self.lattice.len(), &[(i, 1.0)])
            }
            ModelKind::ModelA { w } => {
                let s = self.lattice.index_of(&origin).ok_or_else(missing)?;
                let k = w.k();
                let entries: Vec<(usize, f64)> =
                    (0..k).map(|c| (s * k + c, w.eigenvalues[c])).collect();
                Potential::diagonal(self.lattice.len() * k, &entries)
            }
            ModelKind::ModelB { period, f } => {
                tile_potential(&self.lattice, &TileGeometry::new(period.clone())?, f, &origin)
            }
            ModelKind::TwoSite { .. } => {
                let geom = two_site_geometry();
                let ones = vec![1.0; 4];
                let built = self.build(&[])?;
                tile_potential(&built.lattice, &geom, &ones, &origin)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs;

    fn spectrum(h: &RMatrix) -> Vec<f64> {
        hermitian_eig(h).unwrap().values
    }

    #[test]
    fn discrete_anderson_examples() {
        let single = LatticeBox::cube(1, 0, 0).unwrap();
        let h = build_discrete_anderson(&single, &[0.5]).unwrap();
        assert_eq!(h.matrix.as_slice(), &[0.5]);

        let pair = LatticeBox::cube(1, 0, 1).unwrap();
        let h = build_discrete_anderson(&pair, &[0.0, 0.0]).unwrap();
        assert_eq!(h.matrix, RMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]));

        let square = LatticeBox::cube(2, 0, 1).unwrap();
        let h = build_discrete_anderson(&square, &[0.0; 4]).unwrap();
        let ev = spectrum(&h.matrix);
        for (a, b) in ev.iter().zip([-2.0, 0.0, 0.0, 2.0]) {
            assert!((a - b).abs() < 1e-14);
        }
        assert!(build_discrete_anderson(&square, &[0.0; 3]).is_err());
    }

    #[test]
    fn model_a_reduces_to_scalar_model() {
        let b = LatticeBox::cube(2, 0, 2).unwrap();
        let omega: Vec<f64> = (0..9).map(|i| 0.1 * i as f64).collect();
        let w = SingleSiteMatrix::diagonal(&[1.0]).unwrap();
        let a = build_model_a(&b, &w, &omega).unwrap();
        let d = build_discrete_anderson(&b, &omega).unwrap();
        assert_eq!(a.matrix, d.matrix);
    }

    #[test]
    fn model_a_rejects_indefinite_w() {
        let w = RMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(SingleSiteMatrix::new(&w).is_err());
    }

    #[test]
    fn model_b_examples() {
        let b = LatticeBox::cube(2, 0, 3).unwrap();
        let omega: Vec<f64> = (0..16).map(|i| (i as f64).sin()).collect();
        let unit = TileGeometry::new(vec![1, 1]).unwrap();
        let mb = build_model_b(&b, &unit, &[1.0], &omega).unwrap();
        assert_eq!(mb.matrix, build_discrete_anderson(&b, &omega).unwrap().matrix);

        let g = TileGeometry::new(vec![2, 2]).unwrap();
        let mut om = vec![0.0; 4];
        om[0] = 1.0;
        let mb = build_model_b(&b, &g, &[1.0; 4], &om).unwrap();
        for (i, s) in b.sites().enumerate() {
            let expected = if s[0] < 2 && s[1] < 2 { 1.0 } else { 0.0 };
            assert_eq!(mb.potential[(i, i)], expected);
        }

        let shifted = build_model_b(&b, &g, &[1.0; 4], &[0.7; 4]).unwrap();
        let base = spectrum(&hopping_matrix(&b));
        for (x, y) in spectrum(&shifted.matrix).iter().zip(&base) {
            assert!((x - y - 0.7).abs() < 1e-13);
        }
        assert!(build_model_b(&b, &g, &[1.0, 0.0, 1.0, 1.0], &[0.0; 4]).is_err());
    }

    #[test]
    fn two_site_examples() {
        let h = build_two_site(0.0, 0.0, 4).unwrap();
        assert_eq!(h.matrix, hopping_matrix(&h.lattice));
        let h = build_two_site(1.0, 0.0, 4).unwrap();
        let mut support: Vec<Vec<i64>> = h
            .lattice
            .sites()
            .enumerate()
            .filter(|(i, _)| h.potential[(*i, *i)] != 0.0)
            .map(|(_, s)| s)
            .collect();
        support.sort();
        assert_eq!(support, vec![vec![0, 2], vec![0, 3], vec![1, 2], vec![1, 3]]);
        assert!(build_two_site(1.0, 0.0, 3).is_err());
    }

    #[test]
    fn two_tile_examples() {
        let g1 = TileGeometry::new(vec![1]).unwrap();
        let t = build_two_tile(&g1, &[0], &[1], 0.0, &[1.0]).unwrap();
        assert_eq!(t.hamiltonian.matrix, RMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]));

        let g = TileGeometry::new(vec![2, 2]).unwrap();
        let t = build_two_tile(&g, &[0, 0], &[1, 0], 5.0, &[1.0; 4]).unwrap();
        let m = &t.hamiltonian.matrix;
        assert_eq!(max_abs(&(m - m.transpose())), 0.0);
        for i in 0..8 {
            let expected = if t.c.contains(&i) { 5.0 } else { 0.0 };
            assert_eq!(m[(i, i)], expected);
        }
        assert!(build_two_tile(&g, &[0, 0], &[1, 1], 0.0, &[1.0; 4]).is_err());
    }

    #[test]
    fn sampling_is_deterministic_and_bounded() {
        let spec = DisorderSpec { master_seed: 99, ..Default::default() };
        let a = sample_omega(&spec, 50, 3);
        assert_eq!(a, sample_omega(&spec, 50, 3));
        assert_ne!(a, sample_omega(&spec, 50, 4));
        assert!(a.iter().all(|x| (0.0..=1.0).contains(x)));
    }

    #[test]
    fn sample_means_within_clt_band() {
        for law in [
            DisorderLaw::Uniform { lo: 0.0, hi: 1.0 },
            DisorderLaw::TruncatedGaussian { mean: 0.2, sd: 1.0, lo: -1.0, hi: 2.0 },
        ] {
            let spec = DisorderSpec { law: law.clone(), master_seed: 5 };
            let n = 10_000;
            let x = sample_omega(&spec, n, 0);
            let (lo, hi) = law.support();
            assert!(x.iter().all(|v| *v >= lo && *v <= hi));
            let mean = x.iter().sum::<f64>() / n as f64;
            let band = 3.0 * (law.variance() / n as f64).sqrt();
            assert!((mean - law.mean()).abs() < band, "{law:?}: {mean} vs {}", law.mean());
        }
    }

    fn bfs_paths(j: &[i64]) -> u64 {
        // enumerate all step sequences of length |j|_1 and count those ending at j
        let len: i64 = j.iter().map(|x| x.abs()).sum();
        let d = j.len();
        let mut frontier: HashMap<Vec<i64>, u64> = HashMap::from([(vec![0; d], 1)]);
        for _ in 0..len {
            let mut next: HashMap<Vec<i64>, u64> = HashMap::new();
            for (site, c) in frontier {
                for axis in 0..d {
                    for step in [-1, 1] {
                        let mut s = site.clone();
                        s[axis] += step;
                        *next.entry(s).or_default() += c;
                    }
                }
            }
            frontier = next;
        }
        frontier.get(j).copied().unwrap_or(0)
    }

    #[test]
    fn path_counts_match_enumeration() {
        assert_eq!(shortest_path_count(&[1, 0]).unwrap(), 1);
        assert_eq!(shortest_path_count(&[1, 1]).unwrap(), 2);
        assert_eq!(shortest_path_count(&[2, 1]).unwrap(), 3);
        for j in [[1, 1], [2, 1], [-2, 1], [3, 0], [1, -2]] {
            assert_eq!(shortest_path_count(&j).unwrap(), bfs_paths(&j));
        }
        assert_eq!(shortest_path_count(&[1, 1, 1]).unwrap(), bfs_paths(&[1, 1, 1]));
        assert!(shortest_path_count(&[0, 0]).is_err());
    }

    #[test]
    fn sqrt_potential_squares_to_potential() {
        let b = LatticeBox::cube(1, 0, 2).unwrap();
        let w = SingleSiteMatrix::new(&RMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0])).unwrap();
        let h = build_model_a(&b, &w, &[0.3, 0.0, 1.2]).unwrap();
        let s = h.sqrt_potential().unwrap();
        assert!(max_abs(&(s * s - &h.potential)) < 1e-12);
        let neg = build_discrete_anderson(&b, &[-1.0, 0.0, 0.0]).unwrap();
        assert!(neg.sqrt_potential().is_err());
    }
}
