//! Monte Carlo and sweep experiments: multiplicity censuses, the spectral
//! averaging inequality, off-diagonal resolvent decay, and the identity suite.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{Beta, ContinuousCDF};

use crate::birman_schwinger::{
    bs_block, bs_correspondence, case_i_check, case_ii_check, case_iii_matrices, case_iii_splitting,
    neumann_remainder, offdiagonal_leading_deviation,
};
use crate::cyclicity::{coupling_limit, eigenprojection_transfer, two_tile_span_auto};
use crate::error::{Error, Result};
use crate::fit::linear_fit;
use crate::lattice::{LatticeBox, TileGeometry};
use crate::linalg::{
    c64, char_poly, discriminant, discriminant_from_roots, hermitian_eig, max_abs, resolvent_columns,
    to_complex, CMatrix, RMatrix, RVector, C64,
};
use crate::models::{
    build_discrete_anderson, build_model_a, build_model_b, sample_omega, shortest_path_count, tile_potential,
    trial_rng, DisorderSpec, Hamiltonian, ModelSpec, Potential, SingleSiteMatrix,
};

/// Default cluster threshold, relative to the spectral diameter.
pub const DEFAULT_TAU: f64 = 1e-10;

#[derive(Debug, Clone, Serialize)]
pub struct SpectralReport {
    pub eigenvalues: Vec<f64>,
    pub min_gap: f64,
    /// `min_gap / diameter`.
    pub relative_min_gap: f64,
    /// Sizes of the eigenvalue clusters at threshold `tau * diameter`.
    pub cluster_sizes: Vec<usize>,
    /// `sum_{i<j} log |lambda_i - lambda_j|^2`.
    pub log_discriminant: f64,
    /// Relative difference between the Sylvester-determinant discriminant and
    /// the product of squared gaps (dimension at most 6).
    pub discriminant_agreement: Option<f64>,
}

impl SpectralReport {
    pub fn max_cluster(&self) -> usize {
        self.cluster_sizes.iter().copied().max().unwrap_or(0)
    }

    pub fn degenerate_clusters(&self) -> usize {
        self.cluster_sizes.iter().filter(|&&s| s >= 2).count()
    }
}

pub fn spectral_report(h: &RMatrix, tau: f64) -> Result<SpectralReport> {
    if !(tau > 0.0) {
        return Err(Error::domain("tau must be positive"));
    }
    let eigenvalues = hermitian_eig(h)?.values;
    let n = eigenvalues.len();
    let diameter = eigenvalues.last().copied().unwrap_or(0.0) - eigenvalues.first().copied().unwrap_or(0.0);
    let gaps: Vec<f64> = eigenvalues.windows(2).map(|w| w[1] - w[0]).collect();
    let min_gap = gaps.iter().copied().fold(f64::INFINITY, f64::min);
    let relative_min_gap = if diameter > 0.0 { min_gap / diameter } else { 0.0 };
    let cut = tau * diameter;
    let mut cluster_sizes = Vec::new();
    let mut size = 1;
    for &g in &gaps {
        if g <= cut {
            size += 1;
        } else {
            cluster_sizes.push(size);
            size = 1;
        }
    }
    if n > 0 {
        cluster_sizes.push(size);
    }
    let mut log_discriminant = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            log_discriminant += 2.0 * (eigenvalues[j] - eigenvalues[i]).abs().ln();
        }
    }
    let discriminant_agreement = (2..=6).contains(&n).then(|| {
        let values: Vec<C64> = eigenvalues.iter().map(|&x| c64(x, 0.0)).collect();
        let from_roots = discriminant_from_roots(&values);
        let from_sylvester = discriminant(&to_complex(h));
        (from_sylvester - from_roots).norm() / from_roots.norm().max(f64::MIN_POSITIVE)
    });
    Ok(SpectralReport {
        eigenvalues,
        min_gap,
        relative_min_gap,
        cluster_sizes,
        log_discriminant,
        discriminant_agreement,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct TrialRecord {
    pub trial: u64,
    pub min_gap: f64,
    pub relative_min_gap: f64,
    /// Number of clusters of size at least two.
    pub cluster_count: usize,
    pub max_cluster: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct HistogramBin {
    /// Bin covers `10^lo <= relative gap < 10^(lo+1)`; the lowest bin also
    /// collects everything smaller.
    pub log10_lo: i32,
    pub count: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct CensusResult {
    pub trials: usize,
    pub tau: f64,
    pub records: Vec<TrialRecord>,
    pub degenerate_trials: usize,
    pub degenerate_fraction: f64,
    /// One-sided 95% Clopper-Pearson upper bound on the degeneracy probability.
    pub upper_bound_95: f64,
    pub histogram: Vec<HistogramBin>,
}

pub fn clopper_pearson_upper(successes: usize, trials: usize, confidence: f64) -> f64 {
    if successes >= trials {
        return 1.0;
    }
    let beta = Beta::new(successes as f64 + 1.0, (trials - successes) as f64).expect("positive shape");
    beta.inverse_cdf(confidence)
}

fn gap_histogram(records: &[TrialRecord]) -> Vec<HistogramBin> {
    let mut bins: Vec<HistogramBin> = (-16..=0).map(|lo| HistogramBin { log10_lo: lo, count: 0 }).collect();
    for r in records {
        let g = r.relative_min_gap;
        let k = if g > 0.0 { g.log10().floor().clamp(-16.0, 0.0) as i32 } else { -16 };
        bins[(k + 16) as usize].count += 1;
    }
    bins
}

fn with_workers<T: Send>(workers: Option<usize>, job: impl FnOnce() -> T + Send) -> Result<T> {
    match workers {
        None => Ok(job()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| Error::NumericalFailure(format!("thread pool: {e}")))?;
            Ok(pool.install(job))
        }
    }
}

/// Eigenvalue clustering over independent disorder draws. Trial `t` uses
/// stream `t` of the master seed, so results do not depend on `workers`.
pub fn multiplicity_census(
    model: &ModelSpec,
    disorder: &DisorderSpec,
    trials: usize,
    tau: f64,
    workers: Option<usize>,
) -> Result<CensusResult> {
    if trials == 0 {
        return Err(Error::domain("trials must be at least 1"));
    }
    if !(tau > 0.0) {
        return Err(Error::domain("tau must be positive"));
    }
    disorder.law.validate()?;
    let count = model.disorder_count();
    let records = with_workers(workers, || {
        (0..trials as u64)
            .into_par_iter()
            .map(|trial| {
                let omega = sample_omega(disorder, count, trial);
                let h = model.build(&omega)?;
                let r = spectral_report(&h.matrix, tau).map_err(|e| match e {
                    Error::NumericalFailure(m) => Error::NumericalFailure(format!("trial {trial}: {m}")),
                    other => other,
                })?;
                Ok(TrialRecord {
                    trial,
                    min_gap: r.min_gap,
                    relative_min_gap: r.relative_min_gap,
                    cluster_count: r.degenerate_clusters(),
                    max_cluster: r.max_cluster(),
                })
            })
            .collect::<Result<Vec<_>>>()
    })??;
    let degenerate_trials = records.iter().filter(|r| r.max_cluster >= 2).count();
    Ok(CensusResult {
        trials,
        tau,
        degenerate_trials,
        degenerate_fraction: degenerate_trials as f64 / trials as f64,
        upper_bound_95: clopper_pearson_upper(degenerate_trials, trials, 0.95),
        histogram: gap_histogram(&records),
        records,
    })
}

pub const AVERAGING_GRID_POINTS: usize = 2001;
pub const AVERAGING_HALF_WIDTH: f64 = 50.0;

#[derive(Debug, Clone, Serialize)]
pub struct SpectralAveragingReport {
    pub lhs: f64,
    /// `|B| ||phi||^2`.
    pub rhs: f64,
    /// Tail of the Cauchy weight plus a jump allowance for the trapezoid rule.
    pub error_budget: f64,
    pub margin: f64,
    pub holds: bool,
}

/// Trapezoid estimate of
/// `int <chi_B(H_0 + lambda V) sqrt(V) phi, sqrt(V) phi> / (1 + lambda^2) d lambda`
/// over `[-half_width, half_width]`, compared with `|B| ||phi||^2`.
pub fn spectral_averaging_check(
    h0: &RMatrix,
    v: &Potential,
    interval: (f64, f64),
    phi: &RVector,
    half_width: f64,
    points: usize,
) -> Result<SpectralAveragingReport> {
    let (lo, hi) = interval;
    if !(lo <= hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::domain("B must be a bounded interval"));
    }
    if half_width < AVERAGING_HALF_WIDTH || points < 2 {
        return Err(Error::domain(format!(
            "grid must cover [-L, L] with L >= {AVERAGING_HALF_WIDTH} and at least 2 points"
        )));
    }
    let n = h0.nrows();
    if phi.len() != n || v.dim() != n {
        return Err(Error::SizeMismatch { expected: n, got: phi.len() });
    }
    let mut psi = RVector::zeros(n);
    if !v.support.is_empty() {
        let local = RVector::from_iterator(v.support.len(), v.support.iter().map(|&i| phi[i]));
        let s = &v.sqrt_block * local;
        for (k, &i) in v.support.iter().enumerate() {
            psi[i] = s[k];
        }
    }
    let psi_sq = psi.norm_squared();
    let step = 2.0 * half_width / (points - 1) as f64;
    let values = (0..points)
        .map(|i| {
            let lambda = -half_width + step * i as f64;
            let eig = hermitian_eig(&(h0 + &v.full * lambda))?;
            let weight: f64 = eig
                .values
                .iter()
                .zip(eig.vectors.column_iter())
                .filter(|(e, _)| **e >= lo && **e <= hi)
                .map(|(_, u)| u.dot(&psi).powi(2))
                .sum();
            Ok(weight / (1.0 + lambda * lambda))
        })
        .collect::<Result<Vec<f64>>>()?;
    let lhs = step * (values.iter().sum::<f64>() - 0.5 * (values[0] + values[points - 1]));
    let variation: f64 = values.windows(2).map(|w| (w[1] - w[0]).abs()).sum();
    let tail = (std::f64::consts::PI - 2.0 * half_width.atan()) * psi_sq;
    let error_budget = tail + 0.5 * step * variation;
    let rhs = (hi - lo) * phi.norm_squared();
    let margin = rhs + error_budget - lhs;
    Ok(SpectralAveragingReport { lhs, rhs, error_budget, margin, holds: margin >= 0.0 })
}

#[derive(Debug, Clone, Serialize)]
pub struct DecayFit {
    /// Tile distances whose norms entered the fit.
    pub distances: Vec<i64>,
    pub norms: Vec<f64>,
    /// Distances whose norm fell below the underflow floor.
    pub underflow: Vec<i64>,
    /// `-slope` of `ln norm` against distance.
    pub eta: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// Norms non-increasing in the distance, up to `1e-12`.
    pub monotone: bool,
}

pub const UNDERFLOW_FLOOR: f64 = 1e-15;

/// `||chi_{C_0} (H - z)^{-1} chi_{A(L)}||` for the annuli `A(L)` of tiles at
/// `l^inf` tile distance `L` from `C_0`, with a log-linear fit.
pub fn combes_thomas_fit(h: &Hamiltonian, geom: &TileGeometry, z: C64, distances: &[i64]) -> Result<DecayFit> {
    if z.im < 1.0 {
        return Err(Error::domain("decay fits need Im z >= 1"));
    }
    if distances.len() < 4 {
        return Err(Error::domain("at least four distances are needed"));
    }
    if distances.windows(2).any(|w| w[1] <= w[0]) || distances[0] < 1 {
        return Err(Error::domain("distances must be positive and strictly increasing"));
    }
    if geom.dim() != h.lattice.dim() {
        return Err(Error::domain("tile geometry and box have different dimensions"));
    }
    let origin = vec![0i64; geom.dim()];
    let c0: Vec<Vec<i64>> = geom.tile(&origin).sites().collect();
    let c0_idx = h.indices_of_sites(c0.iter().map(|s| s.as_slice()));
    if c0_idx.len() != geom.tile_size() * h.channels {
        return Err(Error::domain("the base tile must lie inside the box"));
    }
    let columns = resolvent_columns(&h.matrix, z, &c0_idx)?;
    let mut by_distance = vec![Vec::new(); distances.len()];
    for (s, site) in h.lattice.sites().enumerate() {
        let d = geom.tile_of(&site).iter().map(|x| x.abs()).max().unwrap_or(0);
        if let Ok(k) = distances.binary_search(&d) {
            by_distance[k].extend((0..h.channels).map(|c| s * h.channels + c));
        }
    }
    let mut kept = Vec::new();
    let mut norms = Vec::new();
    let mut underflow = Vec::new();
    let mut all = Vec::new();
    for (k, rows) in by_distance.iter().enumerate() {
        if rows.is_empty() {
            return Err(Error::domain(format!("annulus at distance {} lies outside the box", distances[k])));
        }
        let block = CMatrix::from_fn(rows.len(), c0_idx.len(), |i, j| columns[(rows[i], j)]);
        let norm = crate::linalg::spectral_norm(&block);
        all.push(norm);
        if norm < UNDERFLOW_FLOOR {
            underflow.push(distances[k]);
        } else {
            kept.push(distances[k]);
            norms.push(norm);
        }
    }
    let monotone = all.windows(2).all(|w| w[1] <= w[0] + 1e-12);
    let xs: Vec<f64> = kept.iter().map(|&d| d as f64).collect();
    let ys: Vec<f64> = norms.iter().map(|n| n.ln()).collect();
    let (eta, intercept, r_squared) = match linear_fit(&xs, &ys) {
        Some(f) => (-f.slope, f.intercept, f.r_squared),
        None => (f64::NAN, f64::NAN, f64::NAN),
    };
    Ok(DecayFit { distances: kept, norms, underflow, eta, intercept, r_squared, monotone })
}

/// Expected values checked by [`verify_identity_suite`]. Every field can be
/// altered to confirm that the corresponding ledger line reacts.
#[derive(Debug, Clone, PartialEq)]
pub struct IdentityReference {
    pub chi_h0_chi: [[f64; 4]; 4],
    pub chi_h0_sq_chi: [[f64; 4]; 4],
    pub chi_h0_cube_chi: [[f64; 4]; 4],
    /// `chi h0 V_{a,b} h0 chi = a * A + b * B`.
    pub h0_v_h0_a: [[f64; 4]; 4],
    pub h0_v_h0_b: [[f64; 4]; 4],
    /// Constant part of the multiple of the identity removed from the fifth compression.
    pub fifth_shift: f64,
    /// Lower-right block of the fifth compression after the shift, per unit of `a - b`.
    pub fifth_lower_block: [[f64; 2]; 2],
    pub path_count_11: u64,
    pub path_count_21: u64,
    pub discriminant_x2_minus_1: f64,
}

impl Default for IdentityReference {
    fn default() -> Self {
        let h = 0.5;
        Self {
            chi_h0_chi: diag4([2.0, -2.0, 0.0, 0.0]),
            chi_h0_sq_chi: diag4([6.0, 6.0, 2.0, 2.0]),
            chi_h0_cube_chi: diag4([18.0, -18.0, 0.0, 0.0]),
            h0_v_h0_a: [[h, 0.0, h, 0.0], [0.0, h, 0.0, h], [h, 0.0, h, 0.0], [0.0, h, 0.0, h]],
            h0_v_h0_b: [[h, 0.0, 0.0, h], [0.0, h, h, 0.0], [0.0, h, h, 0.0], [h, 0.0, 0.0, h]],
            fifth_shift: 12.0,
            fifth_lower_block: [[1.0, 0.0], [0.0, -1.0]],
            path_count_11: 2,
            path_count_21: 3,
            discriminant_x2_minus_1: 4.0,
        }
    }
}

fn diag4(d: [f64; 4]) -> [[f64; 4]; 4] {
    let mut m = [[0.0; 4]; 4];
    for i in 0..4 {
        m[i][i] = d[i];
    }
    m
}

fn mat4(m: &[[f64; 4]; 4]) -> RMatrix {
    RMatrix::from_fn(4, 4, |i, j| m[i][j])
}

#[derive(Debug, Clone, Serialize)]
pub struct LedgerLine {
    pub id: String,
    /// What the line verifies.
    pub anchor: String,
    pub passed: bool,
    pub deviation: f64,
    pub tolerance: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct IdentityLedger {
    pub seed: u64,
    pub passed: bool,
    pub lines: Vec<LedgerLine>,
}

impl IdentityLedger {
    pub fn failures(&self) -> Vec<&LedgerLine> {
        self.lines.iter().filter(|l| !l.passed).collect()
    }
}

/// `(a, b)` pairs at which the symmetry-basis compressions are checked.
pub const CASE_III_PAIRS: [(f64, f64); 3] = [(1.0, 0.0), (2.0, 3.0), (-1.0, 4.0)];

type Check = (&'static str, &'static str, Box<dyn Fn(&IdentityReference, u64) -> Result<(f64, f64)> + Send + Sync>);

fn line(id: &str, anchor: &str, deviation: f64, tolerance: f64) -> LedgerLine {
    LedgerLine {
        id: id.to_string(),
        anchor: anchor.to_string(),
        passed: deviation.is_finite() && deviation <= tolerance,
        deviation,
        tolerance,
    }
}

fn matrix_check(
    reference: &IdentityReference,
    pick: impl Fn(&crate::birman_schwinger::CaseIiiMatrices) -> RMatrix,
    expected: impl Fn(&IdentityReference, f64, f64) -> RMatrix,
) -> f64 {
    CASE_III_PAIRS
        .iter()
        .map(|&(a, b)| max_abs(&(pick(&case_iii_matrices(a, b)) - expected(reference, a, b))))
        .fold(0.0, f64::max)
}

fn fixed_model_b(seed: u64, stream: u64) -> Result<(LatticeBox, TileGeometry, Vec<f64>, Hamiltonian)> {
    let lattice = LatticeBox::cube(2, 0, 5)?;
    let geom = TileGeometry::new(vec![2, 2])?;
    let mut rng = trial_rng(seed, stream);
    let f: Vec<f64> = (0..4).map(|_| rng.random_range(0.5..2.0)).collect();
    let omega: Vec<f64> = (0..geom.tiles_in(&lattice).len()).map(|_| rng.random::<f64>()).collect();
    let h = build_model_b(&lattice, &geom, &f, &omega)?;
    Ok((lattice, geom, f, h))
}

fn ratio_spread(deviations: &[f64]) -> f64 {
    deviations.windows(2).map(|w| (w[0] / w[1] / 2.0 - 1.0).abs()).fold(0.0, f64::max)
}

fn checks() -> Vec<Check> {
    let mut v: Vec<Check> = Vec::new();
    v.push((
        "case-iii/chi-h0-chi",
        "symmetry-basis compression of h0 to the 2x2 tile",
        Box::new(|r, _| Ok((matrix_check(r, |m| m.h0.clone(), |r, _, _| mat4(&r.chi_h0_chi)), 1e-10))),
    ));
    v.push((
        "case-iii/chi-h0sq-chi",
        "symmetry-basis compression of h0^2",
        Box::new(|r, _| Ok((matrix_check(r, |m| m.h0_sq.clone(), |r, _, _| mat4(&r.chi_h0_sq_chi)), 1e-10))),
    ));
    v.push((
        "case-iii/chi-h0cube-chi",
        "symmetry-basis compression of h0^3",
        Box::new(|r, _| Ok((matrix_check(r, |m| m.h0_cube.clone(), |r, _, _| mat4(&r.chi_h0_cube_chi)), 1e-10))),
    ));
    v.push((
        "case-iii/chi-h0-v-h0-chi",
        "compression of h0 V_ab h0: a/b coupling pattern",
        Box::new(|r, _| {
            let dev = matrix_check(
                r,
                |m| m.h0_v_h0.clone(),
                |r, a, b| mat4(&r.h0_v_h0_a) * a + mat4(&r.h0_v_h0_b) * b,
            );
            Ok((dev, 1e-10))
        }),
    ));
    v.push((
        "case-iii/chi-h0-hv2-h0-chi",
        "lower-right block of h0 (h0+V_ab)^2 h0 after the identity shift",
        Box::new(|r, _| {
            let dev = CASE_III_PAIRS
                .iter()
                .map(|&(a, b)| {
                    let m = case_iii_matrices(a, b).h0_hv_sq_h0;
                    let shift = r.fifth_shift + 0.5 * (a * a + b * b);
                    (0..2)
                        .flat_map(|i| (0..2).map(move |j| (i, j)))
                        .map(|(i, j)| {
                            let diag = if i == j { shift } else { 0.0 };
                            (m[(2 + i, 2 + j)] - diag - r.fifth_lower_block[i][j] * (a - b)).abs()
                        })
                        .fold(0.0, f64::max)
                })
                .fold(0.0, f64::max);
            Ok((dev, 1e-10))
        }),
    ));
    v.push((
        "case-iii/splitting",
        "near-degenerate pair of h_{1,0} splits as +-(a-b)/z^3",
        Box::new(|_, _| {
            let zs = [c64(0.0, 20.0), c64(0.0, 40.0), c64(0.0, 80.0)];
            let t = case_iii_splitting(1.0, 0.0, &zs, 12)?;
            let dev: Vec<f64> = t.rows.iter().map(|r| (r.gap_ratio - 1.0).abs()).collect();
            let decreasing = dev.windows(2).all(|w| w[1] < w[0]);
            let truncation = t.rows.iter().map(|r| r.truncation_change).fold(0.0, f64::max);
            let ok = decreasing && truncation < 1e-8;
            Ok((if ok { dev[dev.len() - 1] } else { f64::INFINITY }, 0.5))
        }),
    ));
    v.push((
        "discriminant/x2-minus-1",
        "signed Sylvester determinant of x^2 - 1",
        Box::new(|r, _| {
            let a = to_complex(&RMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]));
            let f = discriminant(&a);
            Ok(((f - c64(r.discriminant_x2_minus_1, 0.0)).norm(), 1e-12))
        }),
    ));
    v.push((
        "discriminant/roots",
        "Sylvester discriminant equals product of squared root gaps",
        Box::new(|_, seed| {
            let mut rng = trial_rng(seed, 100);
            let mut worst: f64 = 0.0;
            for k in 2..=6 {
                for _ in 0..10 {
                    let a = CMatrix::from_fn(k, k, |_, _| c64(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
                    let roots = char_poly(&a).roots()?;
                    let from_roots = discriminant_from_roots(&roots);
                    let rel = (discriminant(&a) - from_roots).norm() / from_roots.norm();
                    worst = worst.max(rel);
                }
            }
            Ok((worst, 1e-6))
        }),
    ));
    v.push((
        "leading-order/path-counts",
        "shortest-path counts to (1,1) and (2,1)",
        Box::new(|r, _| {
            let d = (shortest_path_count(&[1, 1])? as f64 - r.path_count_11 as f64).abs()
                + (shortest_path_count(&[2, 1])? as f64 - r.path_count_21 as f64).abs();
            Ok((d, 0.0))
        }),
    ));
    v.push((
        "leading-order/offdiagonal",
        "P_j (H - z)^{-1} P_0 = -C_{j,d} z^{-(|j|+1)} I + O(|z|^{-(|j|+2)})",
        Box::new(|_, seed| {
            let lattice = LatticeBox::cube(2, -4, 4)?;
            let mut rng = trial_rng(seed, 101);
            let omega: Vec<f64> = (0..lattice.len()).map(|_| rng.random::<f64>()).collect();
            let w = SingleSiteMatrix::diagonal(&[1.0, 2.0])?;
            let h = build_model_a(&lattice, &w, &omega)?;
            let mut spread: f64 = 0.0;
            for j in [[1i64, 0], [1, 1], [2, 1], [0, 3]] {
                let order: i32 = j.iter().map(|x| x.abs() as i32).sum();
                let scaled: Vec<f64> = [50.0, 100.0, 200.0, 400.0]
                    .iter()
                    .map(|&t| {
                        let z = c64(0.0, t);
                        offdiagonal_leading_deviation(&h, &j, z).map(|d| d * t.powi(order + 2))
                    })
                    .collect::<Result<_>>()?;
                let max = scaled.iter().copied().fold(0.0, f64::max);
                let min = scaled.iter().copied().fold(f64::INFINITY, f64::min);
                spread = spread.max(max / min);
            }
            Ok((spread, 2.0))
        }),
    ));
    v.push((
        "neumann/remainder",
        "geometric bound on the Neumann remainder",
        Box::new(|_, seed| {
            let (_, _, _, h) = fixed_model_b(seed, 102)?;
            let norm = crate::linalg::spectral_norm(&h.matrix);
            let mut worst: f64 = 0.0;
            for m in 0..4 {
                let r = neumann_remainder(&h.matrix, c64(0.0, 2.0 * norm), m)?;
                worst = worst.max(r.remainder / r.bound);
            }
            Ok((worst, 1.0))
        }),
    ));
    v.push((
        "case-i/halving",
        "deviation of -z sqrt(f) G sqrt(f) from f halves as |z| doubles",
        Box::new(|_, seed| {
            let lattice = LatticeBox::cube(2, -4, 5)?;
            let geom = TileGeometry::new(vec![2, 2])?;
            let f = [1.0, 2.0, 3.0, 4.0];
            let mut rng = trial_rng(seed, 103);
            let omega: Vec<f64> = (0..geom.tiles_in(&lattice).len()).map(|_| rng.random::<f64>()).collect();
            let h = build_model_b(&lattice, &geom, &f, &omega)?;
            let t = case_i_check(&h, &geom, &f, &[c64(0.0, 50.0), c64(0.0, 100.0), c64(0.0, 200.0)])?;
            let devs: Vec<f64> = t.rows.iter().map(|r| r.deviation).collect();
            let simple = t.rows.last().is_some_and(|r| r.simple);
            Ok((if simple { ratio_spread(&devs) } else { f64::INFINITY }, 0.2))
        }),
    ));
    v.push((
        "case-ii/halving",
        "rescaled strip block tends to the Jacobi matrix chi h0 chi",
        Box::new(|_, seed| {
            let mut worst: f64 = 0.0;
            for l in 2..=6i64 {
                let lattice = LatticeBox::new(vec![-6, -6], vec![6 + l, 6])?;
                let geom = TileGeometry::new(vec![l, 1])?;
                let mut rng = trial_rng(seed, 104 + l as u64);
                let omega: Vec<f64> = (0..geom.tiles_in(&lattice).len()).map(|_| rng.random::<f64>()).collect();
                let h = build_model_b(&lattice, &geom, &vec![1.0; l as usize], &omega)?;
                let r = case_ii_check(&h, &geom, &[c64(0.0, 50.0), c64(0.0, 100.0), c64(0.0, 200.0)])?;
                let devs: Vec<f64> = r.table.rows.iter().map(|r| r.deviation).collect();
                let jacobi_ok = (0..l as usize).all(|i| {
                    (0..l as usize).all(|j| r.limit[i][j] == if i.abs_diff(j) == 1 { 1.0 } else { 0.0 })
                });
                let simple = r.table.rows.last().is_some_and(|r| r.simple);
                if !jacobi_ok || !simple {
                    return Ok((f64::INFINITY, 0.2));
                }
                worst = worst.max(ratio_spread(&devs));
            }
            Ok((worst, 0.2))
        }),
    ));
    v.push((
        "bs/herglotz",
        "Im G(z) >= 0 on the upper half-plane",
        Box::new(|_, seed| {
            let (lattice, geom, f, h) = fixed_model_b(seed, 110)?;
            let v = tile_potential(&lattice, &geom, &f, &[1, 1])?;
            let mut worst: f64 = 0.0;
            for z in [c64(-2.0, 0.1), c64(0.3, 1.0), c64(3.0, 5.0)] {
                worst = worst.max(-bs_block(&h.hopping(), &v, z)?.herglotz_margin()?);
            }
            Ok((worst.max(0.0), 1e-12))
        }),
    ));
    v.push((
        "bs/correspondence",
        "sqrt(V) u lies in the kernel of G(E) + 1/lambda",
        Box::new(|_, seed| {
            let (lattice, geom, f, h) = fixed_model_b(seed, 111)?;
            let v = tile_potential(&lattice, &geom, &f, &[1, 1])?;
            let lambda = 0.8;
            let h_lam = &h.matrix + &v.full * lambda;
            let r = bs_correspondence(&h_lam, &h.matrix, &v, lambda)?;
            Ok((r.max_residual(), 1e-8))
        }),
    ));
    v.push((
        "cyclicity/eigenprojection-transfer",
        "P_e^lambda P_Y = -(lambda - mu) P_e^lambda V (H_mu - e)^{-1} P_Y",
        Box::new(|_, seed| {
            let (lattice, geom, f, h) = fixed_model_b(seed, 112)?;
            let v = tile_potential(&lattice, &geom, &f, &[1, 1])?.full;
            let h_lam = &h.matrix + &v * 1.1;
            let r = eigenprojection_transfer(&h_lam, &h.matrix, &v, 1.1, 0.0, &[0, 5, 13])?;
            Ok((r.max_residual(), 1e-8))
        }),
    ));
    v.push((
        "cyclicity/two-tile-span",
        "resolvent columns of two neighbouring tiles span l^2(C)",
        Box::new(|_, seed| {
            let mut missing = 0usize;
            for (k, period) in [vec![1i64], vec![2], vec![2, 2], vec![3, 2]].into_iter().enumerate() {
                let geom = TileGeometry::new(period.clone())?;
                let c = vec![0i64; period.len()];
                let mut cp = c.clone();
                cp[0] = -1;
                let f = vec![1.0; geom.tile_size()];
                let r = two_tile_span_auto(&geom, &c, &cp, &f, c64(1.0, 1.0), seed.wrapping_add(k as u64))?;
                missing += r.target_dim - r.achieved_rank;
            }
            Ok((missing as f64, 0.0))
        }),
    ));
    v.push((
        "cyclicity/coupling-limit",
        "compressed resolvent tends to the two-tile block as the shell coupling grows",
        Box::new(|_, seed| {
            let lattice = LatticeBox::new(vec![-4, -2], vec![3, 3])?;
            let geom = TileGeometry::new(vec![2, 2])?;
            let mut rng = trial_rng(seed, 113);
            let omega: Vec<f64> = (0..geom.tiles_in(&lattice).len()).map(|_| rng.random::<f64>()).collect();
            let f = [1.0, 0.5, 2.0, 1.5];
            let lambdas = [1e2, 1e3, 1e4, 1e5, 1e6];
            let t = coupling_limit(&lattice, &geom, &f, &[0, 0], &[-1, 0], 1.3, &lambdas, &omega, c64(1.0, 1.0))?;
            let last = t.rows.last().map_or(f64::INFINITY, |r| r.deviation);
            let ok = t.monotone && (t.slope + 1.0).abs() <= 0.2;
            Ok((if ok { last } else { f64::INFINITY }, 1e-4))
        }),
    ));
    v.push((
        "census/forced-degeneracy",
        "degenerate W forces multiplicity two in Model A",
        Box::new(|_, seed| {
            let lattice = LatticeBox::cube(2, 0, 3)?;
            let w = SingleSiteMatrix::diagonal(&[1.0, 1.0])?;
            let mut rng = trial_rng(seed, 114);
            let omega: Vec<f64> = (0..lattice.len()).map(|_| rng.random::<f64>()).collect();
            let h = build_model_a(&lattice, &w, &omega)?;
            let r = spectral_report(&h.matrix, 1e-12)?;
            Ok((if r.max_cluster() >= 2 { 0.0 } else { 1.0 }, 0.0))
        }),
    ));
    v.push((
        "census/discrete-simple",
        "random discrete Anderson spectrum is simple",
        Box::new(|_, seed| {
            let lattice = LatticeBox::cube(2, 0, 7)?;
            let mut rng = trial_rng(seed, 115);
            let omega: Vec<f64> = (0..lattice.len()).map(|_| rng.random::<f64>()).collect();
            let h = build_discrete_anderson(&lattice, &omega)?;
            let r = spectral_report(&h.matrix, 1e-12)?;
            Ok((r.degenerate_clusters() as f64, 0.0))
        }),
    ));
    v
}

/// Runs every identity check with the given reference values and seed.
pub fn verify_identity_suite(reference: &IdentityReference, seed: u64, workers: Option<usize>) -> Result<IdentityLedger> {
    let checks = checks();
    let lines = with_workers(workers, || {
        checks
            .par_iter()
            .map(|(id, anchor, run)| match run(reference, seed) {
                Ok((deviation, tol)) => line(id, anchor, deviation, tol),
                Err(e) => LedgerLine {
                    id: id.to_string(),
                    anchor: format!("{anchor} (error: {e})"),
                    passed: false,
                    deviation: f64::INFINITY,
                    tolerance: 0.0,
                },
            })
            .collect::<Vec<_>>()
    })?;
    Ok(IdentityLedger { seed, passed: lines.iter().all(|l| l.passed), lines })
}

/// Eigenvalues of a Hermitian model Hamiltonian sampled at `trial`.
pub fn sample_spectrum(model: &ModelSpec, disorder: &DisorderSpec, trial: u64, tau: f64) -> Result<SpectralReport> {
    let omega = sample_omega(disorder, model.disorder_count(), trial);
    spectral_report(&model.build(&omega)?.matrix, tau)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{DisorderLaw, ModelKind};

    #[test]
    fn detector_sees_exact_double() {
        let mut rng = trial_rng(0, 0);
        let a = RMatrix::from_fn(4, 4, |_, _| rng.random::<f64>() - 0.5);
        let q = a.qr().q();
        let h = &q * RMatrix::from_diagonal(&RVector::from_row_slice(&[1.0, 1.0, 2.0, 3.0])) * q.transpose();
        let h = (&h + h.transpose()) * 0.5;
        for tau in [1e-12, 1e-10, 1e-6] {
            let r = spectral_report(&h, tau).unwrap();
            assert_eq!(r.max_cluster(), 2);
            assert_eq!(r.cluster_sizes.iter().sum::<usize>(), 4);
        }
    }

    #[test]
    fn clopper_pearson_values() {
        assert!((clopper_pearson_upper(0, 200, 0.95) - (1.0 - 0.05f64.powf(1.0 / 200.0))).abs() < 1e-9);
        assert_eq!(clopper_pearson_upper(5, 5, 0.95), 1.0);
    }

    #[test]
    fn census_is_deterministic() {
        let model = ModelSpec { kind: ModelKind::Discrete, lattice: LatticeBox::cube(2, 0, 3).unwrap() };
        let disorder = DisorderSpec { law: DisorderLaw::Uniform { lo: 0.0, hi: 1.0 }, master_seed: 17 };
        let a = multiplicity_census(&model, &disorder, 6, DEFAULT_TAU, Some(1)).unwrap();
        let b = multiplicity_census(&model, &disorder, 6, DEFAULT_TAU, Some(3)).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        assert_eq!(a.histogram.iter().map(|b| b.count).sum::<usize>(), 6);
    }

    #[test]
    fn averaging_trivial_cases() {
        let lattice = LatticeBox::cube(2, 0, 3).unwrap();
        let omega: Vec<f64> = (0..16).map(|i| (i as f64 * 0.3).fract()).collect();
        let h = build_discrete_anderson(&lattice, &omega).unwrap().matrix;
        let phi = RVector::from_fn(16, |i, _| (i as f64).sin());
        let zero = Potential::new(RMatrix::zeros(16, 16)).unwrap();
        let r = spectral_averaging_check(&h, &zero, (0.0, 0.5), &phi, 50.0, 201).unwrap();
        assert_eq!(r.lhs, 0.0);
        assert!(r.holds);
        let v = Potential::diagonal(16, &[(0, 1.0)]).unwrap();
        let r = spectral_averaging_check(&h, &v, (100.0, 101.0), &phi, 50.0, 201).unwrap();
        assert!(r.lhs.abs() < 1e-12);
        let r = spectral_averaging_check(&h, &v, (0.0, 0.5), &phi, 50.0, AVERAGING_GRID_POINTS).unwrap();
        assert!(r.holds, "{r:?}");
    }

    #[test]
    fn decay_steeper_for_larger_imaginary_part() {
        let lattice = LatticeBox::cube(2, -8, 8).unwrap();
        let omega: Vec<f64> = (0..lattice.len()).map(|i| (i as f64 * 0.61).fract()).collect();
        let h = build_discrete_anderson(&lattice, &omega).unwrap();
        let g = TileGeometry::new(vec![1, 1]).unwrap();
        let ls: Vec<i64> = (1..=6).collect();
        let f1 = combes_thomas_fit(&h, &g, c64(0.0, 1.0), &ls).unwrap();
        let f4 = combes_thomas_fit(&h, &g, c64(0.0, 4.0), &ls).unwrap();
        assert!(f4.eta > f1.eta && f1.eta > 0.0);
        assert!(f1.monotone && f4.monotone);
        let far: Vec<i64> = (1..=8).collect();
        let f100 = combes_thomas_fit(&h, &g, c64(0.0, 100.0), &far).unwrap();
        assert!(!f100.underflow.is_empty());
        assert!(combes_thomas_fit(&h, &g, c64(0.0, 0.5), &ls).is_err());
    }

    #[test]
    fn reference_mutation_fails_one_line() {
        let mut r = IdentityReference::default();
        r.chi_h0_chi[1][1] = -2.5;
        let ledger = verify_identity_suite(&r, 0, Some(2)).unwrap();
        let failed: Vec<&str> = ledger.failures().iter().map(|l| l.id.as_str()).collect();
        assert_eq!(failed, vec!["case-iii/chi-h0-chi"]);
    }
}
