use std::path::PathBuf;
use std::process::Command;
use std::time::{Duration, Instant};

use bslab::birman_schwinger::{
    bs_correspondence, case_i_check, case_ii_check, case_iii_matrices, case_iii_splitting,
    offdiagonal_leading_deviation,
};
use bslab::cyclicity::{coupling_limit, two_tile_span_auto};
use bslab::experiments::{
    combes_thomas_fit, multiplicity_census, spectral_averaging_check, spectral_report, CASE_III_PAIRS,
    AVERAGING_GRID_POINTS, AVERAGING_HALF_WIDTH,
};
use bslab::lattice::{LatticeBox, TileGeometry};
use bslab::linalg::{c64, discriminant, discriminant_from_roots, max_abs, CMatrix, RMatrix, RVector, C64};
use bslab::models::{
    build_discrete_anderson, build_model_a, build_model_b, shortest_path_count, tile_potential, trial_rng,
    DisorderLaw, DisorderSpec, ModelKind, ModelSpec, Potential, SingleSiteMatrix,
};
use rand::Rng;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome { passed, detail: detail.into() }
}

fn sci(xs: &[f64]) -> String {
    let parts: Vec<String> = xs.iter().map(|x| format!("{x:.3e}")).collect();
    format!("[{}]", parts.join(", "))
}

fn diag4(d: [f64; 4]) -> RMatrix {
    RMatrix::from_diagonal(&RVector::from_row_slice(&d))
}

fn c1_matrix_identities() -> Outcome {
    let mut worst: f64 = 0.0;
    for &(a, b) in &CASE_III_PAIRS {
        let m = case_iii_matrices(a, b);
        worst = worst.max(max_abs(&(&m.h0 - diag4([2.0, -2.0, 0.0, 0.0]))));
        worst = worst.max(max_abs(&(&m.h0_sq - diag4([6.0, 6.0, 2.0, 2.0]))));
        worst = worst.max(max_abs(&(&m.h0_cube - diag4([18.0, -18.0, 0.0, 0.0]))));
        let s = a + b;
        let pattern = RMatrix::from_row_slice(4, 4, &[s, 0.0, a, b, 0.0, s, b, a, a, b, s, 0.0, b, a, 0.0, s]);
        worst = worst.max(max_abs(&(&m.h0_v_h0 - pattern * 0.5)));
        let shift = 12.0 + 0.5 * (a * a + b * b);
        let lower = m.h0_hv_sq_h0.view((2, 2), (2, 2)).into_owned() - RMatrix::identity(2, 2) * shift;
        let expected = RMatrix::from_row_slice(2, 2, &[a - b, 0.0, 0.0, b - a]);
        worst = worst.max(max_abs(&(lower - expected)));
    }
    outcome(
        worst <= 1e-10,
        format!("max abs deviation {worst:.3e} over 3 (a,b) pairs; the h0 V h0 pattern carries an overall factor 1/2"),
    )
}

fn c2_splitting() -> Outcome {
    let zs = [c64(0.0, 20.0), c64(0.0, 40.0), c64(0.0, 80.0)];
    let t = match case_iii_splitting(1.0, 0.0, &zs, 12) {
        Ok(t) => t,
        Err(e) => return outcome(false, e.to_string()),
    };
    let dev: Vec<f64> = t.rows.iter().map(|r| (r.gap_ratio - 1.0).abs()).collect();
    let decreasing = dev.windows(2).all(|w| w[1] < w[0]);
    let trunc = t.rows.iter().map(|r| r.truncation_change).fold(0.0, f64::max);
    let last = dev[dev.len() - 1];
    outcome(
        decreasing && last <= 0.5 && trunc < 1e-8,
        format!("|gap R^3/2 - 1| = {}; R-doubling change {trunc:.1e}", sci(&dev)),
    )
}

fn schur_eigenvalues(a: &CMatrix) -> Vec<C64> {
    let (_, t) = a.clone().schur().unpack();
    t.diagonal().iter().copied().collect()
}

fn c3_discriminant() -> Outcome {
    let mut rng = trial_rng(2024, 3);
    let mut worst: f64 = 0.0;
    let mut tested = 0;
    for i in 0..500 {
        let k = 1 + i % 6;
        let a = CMatrix::from_fn(k, k, |_, _| c64(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
        let roots = schur_eigenvalues(&a);
        let mut min_gap = f64::INFINITY;
        let mut diameter: f64 = 0.0;
        for p in 0..k {
            for q in p + 1..k {
                let d = (roots[p] - roots[q]).norm();
                min_gap = min_gap.min(d);
                diameter = diameter.max(d);
            }
        }
        if k > 1 && min_gap <= 1e-2 * diameter {
            continue;
        }
        tested += 1;
        let oracle = discriminant_from_roots(&roots);
        let f = discriminant(&a);
        worst = worst.max((f - oracle).norm() / oracle.norm());
    }
    let x2 = CMatrix::from_row_slice(2, 2, &[c64(0.0, 0.0), c64(1.0, 0.0), c64(1.0, 0.0), c64(0.0, 0.0)]);
    let f4 = (discriminant(&x2) - c64(4.0, 0.0)).norm();
    outcome(
        worst <= 1e-6 && f4 <= 1e-12 && tested > 400,
        format!("{tested} admissible matrices, worst relative deviation {worst:.3e}; |F(x^2-1) - 4| = {f4:.1e}"),
    )
}

fn c4_correspondence() -> Outcome {
    let lattice = LatticeBox::cube(2, 0, 5).unwrap();
    let geom = TileGeometry::new(vec![2, 2]).unwrap();
    let origin_tile = geom.tiles_in(&lattice).iter().position(|m| m == &vec![0, 0]).unwrap();
    let mut worst: f64 = 0.0;
    let mut pairs = 0;
    for trial in 0..100 {
        let mut rng = trial_rng(4, trial);
        let f: Vec<f64> = (0..4).map(|_| rng.random_range(0.2..2.0)).collect();
        let mut omega: Vec<f64> = (0..geom.tiles_in(&lattice).len()).map(|_| rng.random::<f64>()).collect();
        let lambda = omega[origin_tile].max(0.05);
        omega[origin_tile] = 0.0;
        let h0 = build_model_b(&lattice, &geom, &f, &omega).unwrap().matrix;
        let v = tile_potential(&lattice, &geom, &f, &[0, 0]).unwrap();
        let h = &h0 + &v.full * lambda;
        match bs_correspondence(&h, &h0, &v, lambda) {
            Ok(r) => {
                pairs += r.entries.len();
                worst = worst.max(r.max_residual());
            }
            Err(e) => return outcome(false, format!("trial {trial}: {e}")),
        }
    }
    outcome(worst < 1e-8, format!("{pairs} admissible eigenpairs, max residual {worst:.3e}"))
}

fn c5_model_a() -> Outcome {
    let lattice = LatticeBox::cube(2, 0, 4).unwrap();
    let mut rng = trial_rng(5, 0);
    let omega: Vec<f64> = (0..lattice.len()).map(|_| rng.random::<f64>()).collect();
    let w = SingleSiteMatrix::diagonal(&[1.0, 2.0]).unwrap();
    let h = build_model_a(&lattice, &w, &omega).unwrap();
    let mut merged = Vec::new();
    for scale in [1.0, 2.0] {
        let o: Vec<f64> = omega.iter().map(|x| x * scale).collect();
        merged.extend(spectral_report(&build_discrete_anderson(&lattice, &o).unwrap().matrix, 1e-12).unwrap().eigenvalues);
    }
    merged.sort_by(f64::total_cmp);
    let spec = spectral_report(&h.matrix, 1e-12).unwrap().eigenvalues;
    let merge_dev = spec.iter().zip(&merged).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);

    let disorder = DisorderSpec { law: DisorderLaw::Uniform { lo: 0.0, hi: 1.0 }, master_seed: 5 };
    let model = |w: SingleSiteMatrix| ModelSpec { kind: ModelKind::ModelA { w }, lattice: lattice.clone() };
    let degenerate =
        multiplicity_census(&model(SingleSiteMatrix::diagonal(&[1.0, 1.0]).unwrap()), &disorder, 100, 1e-12, None).unwrap();
    let simple_w = SingleSiteMatrix::new(&RMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 3.0])).unwrap();
    let simple = multiplicity_census(&model(simple_w), &disorder, 200, 1e-12, None).unwrap();
    let small_gaps = simple.records.iter().filter(|r| r.relative_min_gap < 1e-12).count();
    outcome(
        merge_dev <= 1e-10 && degenerate.degenerate_trials == 100 && small_gaps == 0,
        format!(
            "merge deviation {merge_dev:.1e}; W=diag(1,1): {}/100 degenerate; simple W: {small_gaps}/200 with relative gap < 1e-12 (95% upper bound {:.4})",
            degenerate.degenerate_trials, simple.upper_bound_95
        ),
    )
}

fn c6_leading_orders() -> Outcome {
    let lattice = LatticeBox::cube(2, -5, 5).unwrap();
    let mut rng = trial_rng(6, 0);
    let omega: Vec<f64> = (0..lattice.len()).map(|_| rng.random::<f64>()).collect();
    let h = build_model_a(&lattice, &SingleSiteMatrix::diagonal(&[1.0, 2.5]).unwrap(), &omega).unwrap();
    let mut worst_growth: f64 = 0.0;
    let mut count = 0;
    for j1 in -3i64..=3 {
        for j2 in -3i64..=3 {
            let order = j1.abs() + j2.abs();
            if order == 0 || order > 3 {
                continue;
            }
            count += 1;
            let scaled: Vec<f64> = [50.0, 100.0, 200.0, 400.0]
                .iter()
                .map(|&t| offdiagonal_leading_deviation(&h, &[j1, j2], c64(0.0, t)).unwrap() * t.powi(order as i32 + 2))
                .collect();
            worst_growth = worst_growth.max(scaled.iter().copied().fold(0.0, f64::max) / scaled[0]);
        }
    }
    let c11 = shortest_path_count(&[1, 1]).unwrap();
    let c21 = shortest_path_count(&[2, 1]).unwrap();
    outcome(
        worst_growth <= 2.0 && c11 == 2 && c21 == 3,
        format!("{count} offsets, max(scaled)/scaled(|z|=50) = {worst_growth:.4}; C_(1,1) = {c11}, C_(2,1) = {c21}"),
    )
}

fn c7_two_tile() -> Outcome {
    let z0 = c64(1.0, 1.0);
    let mut failures = Vec::new();
    let mut checks = 0;
    for period in [vec![1i64], vec![2], vec![2, 2], vec![3, 2]] {
        let geom = TileGeometry::new(period.clone()).unwrap();
        let c = vec![0i64; period.len()];
        let mut cp = c.clone();
        cp[0] = -1;
        let n = geom.tile_size();
        let mut profiles = vec![vec![1.0; n]];
        let mut rng = trial_rng(7, n as u64);
        for _ in 0..200 {
            profiles.push((0..n).map(|_| rng.random_range(0.1..3.0)).collect());
        }
        for (i, f) in profiles.iter().enumerate() {
            checks += 1;
            let r = two_tile_span_auto(&geom, &c, &cp, f, z0, i as u64).unwrap();
            if !r.full() {
                failures.push(format!("L={period:?} profile {i}: rank {}", r.achieved_rank));
            }
        }
    }
    outcome(failures.is_empty(), format!("{checks} checks, failures: {failures:?}"))
}

fn c8_coupling_limit() -> Outcome {
    let lattice = LatticeBox::new(vec![-4, -2], vec![3, 3]).unwrap();
    let geom = TileGeometry::new(vec![2, 2]).unwrap();
    let mut rng = trial_rng(8, 0);
    let omega: Vec<f64> = (0..geom.tiles_in(&lattice).len()).map(|_| rng.random::<f64>()).collect();
    let lambdas = [1e2, 1e3, 1e4, 1e5, 1e6];
    let t = coupling_limit(&lattice, &geom, &[1.0, 0.5, 2.0, 1.5], &[0, 0], &[-1, 0], 1.3, &lambdas, &omega, c64(1.0, 1.0))
        .unwrap();
    let last = t.rows.last().unwrap().deviation;
    let devs: Vec<f64> = t.rows.iter().map(|r| r.deviation).collect();
    outcome(
        (t.slope + 1.0).abs() <= 0.2 && last < 1e-4,
        format!("slope {:.4}, deviations {}", t.slope, sci(&devs)),
    )
}

fn c9_combes_thomas() -> Outcome {
    let lattice = LatticeBox::cube(2, -12, 11).unwrap();
    let mut rng = trial_rng(9, 0);
    let omega: Vec<f64> = (0..lattice.len()).map(|_| rng.random::<f64>()).collect();
    let h = build_discrete_anderson(&lattice, &omega).unwrap();
    let geom = TileGeometry::new(vec![1, 1]).unwrap();
    let ls: Vec<i64> = (1..=10).collect();
    let fit = combes_thomas_fit(&h, &geom, c64(0.0, 2.0), &ls).unwrap();
    outcome(
        fit.eta > 0.0 && fit.r_squared >= 0.99 && fit.monotone,
        format!("eta {:.4}, R^2 {:.6}, monotone {}, {} underflowed", fit.eta, fit.r_squared, fit.monotone, fit.underflow.len()),
    )
}

fn c10_spectral_averaging() -> Outcome {
    let lattice = LatticeBox::cube(2, 0, 3).unwrap();
    let mut worst_margin = f64::INFINITY;
    for draw in 0..50 {
        let mut rng = trial_rng(10, draw);
        let omega: Vec<f64> = (0..lattice.len()).map(|_| rng.random::<f64>()).collect();
        let h0 = build_discrete_anderson(&lattice, &omega).unwrap().matrix;
        let site = rng.random_range(0..lattice.len());
        let v = Potential::diagonal(lattice.len(), &[(site, rng.random_range(0.5..2.0))]).unwrap();
        let lo = rng.random_range(-4.0..4.0);
        let b = (lo, lo + rng.random_range(0.05..1.5));
        let phi = RVector::from_fn(lattice.len(), |_, _| rng.random::<f64>() - 0.5);
        let r = spectral_averaging_check(&h0, &v, b, &phi, AVERAGING_HALF_WIDTH, AVERAGING_GRID_POINTS).unwrap();
        if !r.holds {
            return outcome(false, format!("draw {draw}: lhs {:.6e} rhs {:.6e} budget {:.3e}", r.lhs, r.rhs, r.error_budget));
        }
        worst_margin = worst_margin.min(r.margin);
    }
    outcome(true, format!("50 draws, smallest margin {worst_margin:.4e}"))
}

fn halving(devs: &[f64]) -> bool {
    devs.windows(2).all(|w| (w[0] / w[1] / 2.0 - 1.0).abs() <= 0.2)
}

fn c11_cases_i_ii() -> Outcome {
    let zs = [c64(0.0, 50.0), c64(0.0, 100.0), c64(0.0, 200.0)];
    let lattice = LatticeBox::cube(2, -4, 5).unwrap();
    let geom = TileGeometry::new(vec![2, 2]).unwrap();
    let f = [1.0, 2.0, 3.0, 4.0];
    let mut rng = trial_rng(11, 0);
    let omega: Vec<f64> = (0..geom.tiles_in(&lattice).len()).map(|_| rng.random::<f64>()).collect();
    let h = build_model_b(&lattice, &geom, &f, &omega).unwrap();
    let t = case_i_check(&h, &geom, &f, &zs).unwrap();
    let case_i: Vec<f64> = t.rows.iter().map(|r| r.deviation).collect();
    let mut ok = halving(&case_i) && t.rows[2].simple;
    let mut notes = vec![format!("case (i) {}", sci(&case_i))];
    for l in 2..=6i64 {
        let lattice = LatticeBox::new(vec![-6, -6], vec![6 + l, 6]).unwrap();
        let geom = TileGeometry::new(vec![l, 1]).unwrap();
        let omega: Vec<f64> = (0..geom.tiles_in(&lattice).len()).map(|_| rng.random::<f64>()).collect();
        let h = build_model_b(&lattice, &geom, &vec![1.0; l as usize], &omega).unwrap();
        let r = case_ii_check(&h, &geom, &zs).unwrap();
        let n = l as usize;
        let jacobi = (0..n).all(|i| (0..n).all(|j| r.limit[i][j] == if i.abs_diff(j) == 1 { 1.0 } else { 0.0 }));
        let devs: Vec<f64> = r.table.rows.iter().map(|r| r.deviation).collect();
        let simple = r.table.rows[2].simple;
        ok &= jacobi && halving(&devs) && simple;
        notes.push(format!("L1={l}: ratios {:.3?} jacobi {jacobi} simple {simple}", [devs[0] / devs[1], devs[1] / devs[2]]));
    }
    outcome(ok, notes.join("; "))
}

fn bin_run(dir: &PathBuf, workers: &str) -> (Option<i32>, Vec<u8>) {
    let status = Command::new(env!("CARGO_BIN_EXE_bslab"))
        .args(["verify-identities", "--seed", "7", "--workers", workers, "--out-dir"])
        .arg(dir)
        .output()
        .expect("binary runs");
    let ledger = std::fs::read(dir.join("ledger.json")).unwrap_or_default();
    (status.status.code(), ledger)
}

fn c12_end_to_end() -> Outcome {
    let base = std::env::temp_dir().join(format!("bslab-acceptance-{}", std::process::id()));
    let runs: Vec<(Option<i32>, Vec<u8>)> =
        ["1", "4", "1"].iter().enumerate().map(|(i, w)| bin_run(&base.join(i.to_string()), w)).collect();
    let _ = std::fs::remove_dir_all(&base);
    let codes: Vec<Option<i32>> = runs.iter().map(|r| r.0).collect();
    let identical = runs.windows(2).all(|w| w[0].1 == w[1].1) && !runs[0].1.is_empty();
    outcome(
        codes.iter().all(|c| *c == Some(0)) && identical,
        format!("exit codes {codes:?}, ledgers byte-identical across workers {{1, 4, 1}}: {identical}"),
    )
}

fn main() {
    let criteria: Vec<(&str, Duration, fn() -> Outcome)> = vec![
        ("symmetry-basis matrix identities", Duration::from_secs(1), c1_matrix_identities),
        ("near-degenerate pair splitting", Duration::from_secs(30), c2_splitting),
        ("discriminant machinery", Duration::from_secs(10), c3_discriminant),
        ("Birman-Schwinger correspondence", Duration::from_secs(60), c4_correspondence),
        ("Model A structure", Duration::from_secs(60), c5_model_a),
        ("leading orders of P_j (H - z)^{-1} P_0", Duration::from_secs(10), c6_leading_orders),
        ("two-tile span", Duration::from_secs(30), c7_two_tile),
        ("coupling limit", Duration::from_secs(30), c8_coupling_limit),
        ("Combes-Thomas decay", Duration::from_secs(60), c9_combes_thomas),
        ("spectral averaging", Duration::from_secs(120), c10_spectral_averaging),
        ("cases (i)/(ii)", Duration::from_secs(30), c11_cases_i_ii),
        ("end-to-end verify-identities", Duration::from_secs(300), c12_end_to_end),
    ];
    let mut failed = 0;
    for (i, (name, limit, run)) in criteria.into_iter().enumerate() {
        let start = Instant::now();
        let result = std::panic::catch_unwind(run).unwrap_or_else(|_| outcome(false, "panicked"));
        let elapsed = start.elapsed();
        let in_time = elapsed <= limit;
        let passed = result.passed && in_time;
        if !passed {
            failed += 1;
        }
        println!(
            "criterion {:>2} {}: {} ({:.2} s of {} s) {}",
            i + 1,
            name,
            if passed { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            limit.as_secs(),
            result.detail
        );
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
