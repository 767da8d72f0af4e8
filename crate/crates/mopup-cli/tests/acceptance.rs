//! End-to-end acceptance checks, one per release criterion. Each test
//! prints a single pass/fail line (visible with --nocapture) and asserts.

use std::time::Instant;

use mopup_core::linalg::{self, Matrix, Subspace};
use mopup_core::mopup;
use mopup_core::oracles;
use mopup_core::spiked::{self, sample_matrix_set, sample_tensor_set, MatrixModelParams, TensorModelParams};
use mopup_core::{baselines, tensor, tensor_fit, ApOptions, NoiseSpec, ScoreDist, UpdateOrder};
use mopup_cli::experiment::{self, ExperimentConfig, Study};

fn report(num: usize, name: &str, ok: bool, detail: &str) {
    println!(
        "criterion {num} ({name}): {} [{detail}]",
        if ok { "PASS" } else { "FAIL" }
    );
    assert!(ok, "criterion {num} ({name}) failed: {detail}");
}

fn noiseless_fixture(seed: u64) -> mopup_core::MatrixSampleSet {
    let p = if seed % 2 == 0 { 8 } else { 20 };
    let params = MatrixModelParams::random(
        p,
        p,
        2,
        2,
        ScoreDist::GaussianStd,
        NoiseSpec::none(),
        seed,
    )
    .unwrap();
    sample_matrix_set(&params, 5, seed.wrapping_add(1000)).unwrap()
}

#[test]
fn criterion_01_noiseless_exact_recovery() {
    let start = Instant::now();
    let mut worst = 0.0f64;
    for seed in 0..50u64 {
        let set = noiseless_fixture(seed);
        let truth = set.truth().unwrap().params.clone();
        let (u, v) = mopup::asc_init(&set, 2, 2).unwrap();
        worst = worst
            .max(linalg::sin_theta(&truth.u_loading, &u).unwrap())
            .max(linalg::sin_theta(&truth.v_loading, &v).unwrap());
    }
    let secs = start.elapsed().as_secs_f64();
    report(
        1,
        "noiseless exact recovery",
        worst <= 1e-8 && secs < 5.0,
        &format!("worst sin-theta {worst:.2e}, {secs:.2}s"),
    );
}

#[test]
fn criterion_02_intersection_oracle_equivalence() {
    let start = Instant::now();
    let mut worst = 0.0f64;
    for seed in 0..50u64 {
        let set = noiseless_fixture(seed);
        let (u, v) = mopup::asc_init(&set, 2, 2).unwrap();
        let span_u = oracles::common_column_space(&set, 1e-9).unwrap().unwrap();
        worst = worst.max(linalg::sin_theta(&span_u, &u).unwrap());
        let transposed =
            mopup_core::MatrixSampleSet::new(set.samples().iter().map(|m| m.transpose()).collect())
                .unwrap();
        let span_v = oracles::common_column_space(&transposed, 1e-9).unwrap().unwrap();
        worst = worst.max(linalg::sin_theta(&span_v, &v).unwrap());
    }
    let secs = start.elapsed().as_secs_f64();
    report(
        2,
        "intersection oracle equivalence",
        worst <= 1e-8 && secs < 10.0,
        &format!("worst sin-theta {worst:.2e}, {secs:.2}s"),
    );
}

#[test]
fn criterion_03_rank_selection_table() {
    let start = Instant::now();
    let cfg = ExperimentConfig {
        study: Study::RankBic,
        sweep: Some(vec![0.05, 0.1]),
        ..Default::default()
    }
    .resolve()
    .unwrap();
    let records = experiment::run_study(&cfg).unwrap();
    let mut detail = String::new();
    let mut ok = true;
    for &level in &[0.05, 0.1] {
        let recs: Vec<_> = records.iter().filter(|r| r.sweep == level).collect();
        assert_eq!(recs.len(), 20);
        let md1 = recs.iter().map(|r| r.extras[2]).sum::<f64>() / recs.len() as f64;
        let md2 = recs.iter().map(|r| r.extras[3]).sum::<f64>() / recs.len() as f64;
        ok &= md1 == 0.0 && md2 == 0.0;
        detail.push_str(&format!("R={level}: mean |dr| = ({md1}, {md2}); "));
    }
    let secs = start.elapsed().as_secs_f64();
    ok &= secs < 180.0;
    report(3, "rank-selection table", ok, &format!("{detail}{secs:.1}s"));
}

#[test]
fn criterion_04_n_scaling_slope() {
    let start = Instant::now();
    let cfg = ExperimentConfig {
        study: Study::ScaleN,
        ..Default::default()
    }
    .resolve()
    .unwrap();
    let records = experiment::run_study(&cfg).unwrap();
    let rows = experiment::summarize(&records);
    let slope = experiment::loglog_slope(&rows).unwrap();
    let secs = start.elapsed().as_secs_f64();
    report(
        4,
        "n-scaling slope",
        (-0.65..=-0.35).contains(&slope) && secs < 300.0,
        &format!("slope {slope:.3}, {secs:.1}s"),
    );
}

#[test]
fn criterion_05_noise_scaling_slope() {
    let start = Instant::now();
    let cfg = ExperimentConfig {
        study: Study::ScaleR,
        ..Default::default()
    }
    .resolve()
    .unwrap();
    let records = experiment::run_study(&cfg).unwrap();
    let rows: Vec<_> = experiment::summarize(&records)
        .into_iter()
        .filter(|r| r.mean < 0.5)
        .collect();
    let slope = experiment::loglog_slope(&rows).unwrap();
    let secs = start.elapsed().as_secs_f64();
    report(
        5,
        "noise-scaling slope",
        (0.8..=1.2).contains(&slope) && secs < 300.0,
        &format!("slope {slope:.3} over {} levels, {secs:.1}s", rows.len()),
    );
}

#[test]
fn criterion_06_perturbation_bounds() {
    let start = Instant::now();
    let mut applicable = 0usize;
    let mut violations = 0usize;
    for seed in 0..1000u64 {
        let p = 5 + (seed % 26) as usize;
        let r = 1 + (seed as usize / 26) % (p - 1).min(6);
        let mut rng = spiked::stream_rng(seed, &[42]);
        let g = spiked::gaussian_matrix(p, p, &mut rng);
        let x = (&g + &g.transpose()) * 0.5;
        let e = spiked::gaussian_matrix(p, p, &mut rng);
        let z = (&e + &e.transpose()) * (0.05 / p as f64);
        let rep = oracles::check_perturbation_bound(&x, &z, r).unwrap();
        for b in [rep.spectral, rep.frobenius] {
            if b.applicable {
                applicable += 1;
                violations += usize::from(!b.satisfied);
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    report(
        6,
        "perturbation bounds",
        violations == 0 && applicable > 0 && secs < 30.0,
        &format!("{applicable} applicable checks, {violations} violations, {secs:.1}s"),
    );
}

#[test]
fn criterion_07_minimizer_optimality() {
    let start = Instant::now();
    let mut worst = f64::INFINITY;
    for seed in 0..50u64 {
        let params = MatrixModelParams::random(
            12,
            10,
            3,
            2,
            ScoreDist::GaussianStd,
            NoiseSpec::gaussian(0.1),
            seed,
        )
        .unwrap();
        let set = sample_matrix_set(&params, 8, seed.wrapping_add(1)).unwrap();
        let v = spiked::random_subspace(10, 2, seed.wrapping_add(2)).unwrap();
        let rep = oracles::check_prop1_minimizer(&set, &v, 3, 200, seed.wrapping_add(3)).unwrap();
        worst = worst.min(rep.worst_margin);
    }
    // Exhaustive 360-point angular sweep at r1 = 1, p1 = 2: every candidate
    // direction must score at least the closed-form minimizer.
    for seed in 0..5u64 {
        let params = MatrixModelParams::random(
            2,
            6,
            1,
            2,
            ScoreDist::GaussianStd,
            NoiseSpec::gaussian(0.2),
            seed.wrapping_add(500),
        )
        .unwrap();
        let set = sample_matrix_set(&params, 6, seed.wrapping_add(501)).unwrap();
        let v = spiked::random_subspace(6, 2, seed.wrapping_add(502)).unwrap();
        let v_perp = linalg::orthonormal_complement(&v).unwrap();
        let mut gram = Matrix::zeros(2, 2);
        for c in set.centered() {
            let w = &c * v_perp.basis();
            gram += &w * w.transpose();
        }
        let u_star = linalg::top_eigenvectors(&gram, 1).unwrap();
        let base = mopup::objective(&set, &u_star, &v).unwrap();
        for k in 0..360 {
            let theta = (k as f64) * std::f64::consts::PI / 180.0;
            let u = Subspace::new(Matrix::from_vec(2, 1, vec![theta.cos(), theta.sin()])).unwrap();
            worst = worst.min(mopup::objective(&set, &u, &v).unwrap() - base);
        }
    }
    let secs = start.elapsed().as_secs_f64();
    report(
        7,
        "minimizer optimality",
        worst >= -1e-10 && secs < 30.0,
        &format!("worst margin {worst:.2e}, {secs:.1}s"),
    );
}

#[test]
fn criterion_08_hosvd_structural_failure() {
    let start = Instant::now();
    let mut min_hosvd = f64::INFINITY;
    let mut max_asc = 0.0f64;
    for seed in 0..20u64 {
        // X_i = u a_i^T + b_i v^T with b_i deliberately correlated with u,
        // so u is never a left singular vector of any individual sample.
        let p = 6;
        let u = spiked::random_subspace(p, 1, seed).unwrap();
        let v = spiked::random_subspace(p, 1, seed ^ 1).unwrap();
        let samples: Vec<Matrix> = (0..4)
            .map(|i| {
                let mut rng = spiked::stream_rng(seed, &[i, 3]);
                let a = spiked::gaussian_matrix(1, p, &mut rng);
                let b = spiked::gaussian_matrix(p, 1, &mut rng) + u.basis() * 3.0;
                u.basis() * a + b * v.basis().transpose()
            })
            .collect();
        let set = mopup_core::MatrixSampleSet::new(samples).unwrap();
        let (hu, _) = baselines::hosvd_matrix_init(&set, 1, 1).unwrap();
        let (au, _) = mopup::asc_init(&set, 1, 1).unwrap();
        min_hosvd = min_hosvd.min(linalg::sin_theta(&u, &hu).unwrap());
        max_asc = max_asc.max(linalg::sin_theta(&u, &au).unwrap());
    }
    let secs = start.elapsed().as_secs_f64();
    report(
        8,
        "hosvd structural failure",
        min_hosvd > 0.05 && max_asc <= 1e-8 && secs < 5.0,
        &format!("hosvd err >= {min_hosvd:.3}, asc err <= {max_asc:.2e}, {secs:.2}s"),
    );
}

#[test]
fn criterion_09_gauss_seidel_monotonicity() {
    let start = Instant::now();
    let opts = ApOptions {
        update_order: UpdateOrder::GaussSeidel,
        record_trace: true,
        max_iter: 30,
        ..Default::default()
    };
    let mut worst_rise = 0.0f64;
    for seed in 0..30u64 {
        let params = MatrixModelParams::random(
            15,
            12,
            3,
            2,
            ScoreDist::UniformPm1,
            NoiseSpec::gaussian(0.2),
            seed,
        )
        .unwrap();
        let set = sample_matrix_set(&params, 10, seed.wrapping_add(1)).unwrap();
        let fit = mopup::fit(&set, 3, 2, &opts).unwrap();
        for pair in fit.objective_trace.windows(2) {
            worst_rise = worst_rise.max(pair[1] - pair[0]);
        }
    }
    let secs = start.elapsed().as_secs_f64();
    report(
        9,
        "gauss-seidel monotonicity",
        worst_rise <= 1e-10 && secs < 30.0,
        &format!("worst objective rise {worst_rise:.2e}, {secs:.1}s"),
    );
}

#[test]
fn criterion_10_order_three_improvement() {
    let start = Instant::now();
    let mut ok = true;
    let mut worst_final = 0.0f64;
    for seed in 0..20u64 {
        let params = TensorModelParams::random(
            &[8, 8, 8],
            &[2, 2, 2],
            ScoreDist::GaussianStd,
            NoiseSpec::none(),
            seed,
        )
        .unwrap();
        let set = sample_tensor_set(&params, 6, seed.wrapping_add(1)).unwrap();
        let truth = set.truth().unwrap().params.loadings.clone();
        let init = tensor_fit::hosvd_init(&set, &[2, 2, 2]).unwrap();
        let init_err = tensor_fit::max_mode_error(&init, &truth).unwrap();
        let fit = tensor_fit::ap_fit_tensor(&set, &[2, 2, 2], init, &ApOptions::default()).unwrap();
        let final_err = tensor_fit::max_mode_error(&fit.loadings, &truth).unwrap();
        worst_final = worst_final.max(final_err);
        ok &= final_err <= 0.05 && final_err <= init_err + 1e-12;
    }
    let secs = start.elapsed().as_secs_f64();
    report(
        10,
        "order-3 improvement",
        ok && secs < 60.0,
        &format!("worst final error {worst_final:.2e}, {secs:.1}s"),
    );
}

#[test]
fn criterion_11_invariant_suite() {
    let start = Instant::now();
    let mut ok = true;
    let mut notes = Vec::new();

    // Unfold / refold round-trip on an order-4 tensor.
    let mut rng = spiked::stream_rng(3, &[0]);
    let dims = vec![3, 4, 2, 5];
    let data: Vec<f64> = (0..120).map(|_| rand::Rng::random::<f64>(&mut rng)).collect();
    let t = mopup_core::Tensor::new(dims.clone(), data).unwrap();
    for mode in 0..4 {
        let m = tensor::unfold(&t, mode).unwrap();
        let back = tensor::refold(&m, &dims, mode).unwrap();
        ok &= back.data() == t.data();
    }
    notes.push("round-trip");

    // Dual sin-theta formulas agree.
    let u = spiked::random_subspace(9, 3, 5).unwrap();
    let v = spiked::random_subspace(9, 3, 6).unwrap();
    let pu = u.basis() * u.basis().transpose();
    let pv = v.basis() * v.basis().transpose();
    ok &= (linalg::sin_theta(&u, &v).unwrap() - linalg::spectral_norm(&(&pu - &pv))).abs() <= 1e-9;
    notes.push("dual formula");

    // Translation and scale invariance of the fit.
    let params = MatrixModelParams::random(
        12,
        10,
        2,
        3,
        ScoreDist::UniformPm1,
        NoiseSpec::gaussian(0.1),
        11,
    )
    .unwrap();
    let set = sample_matrix_set(&params, 8, 12).unwrap();
    let shift = spiked::gaussian_matrix(12, 10, &mut spiked::stream_rng(13, &[0]));
    let moved = mopup_core::MatrixSampleSet::new(
        set.samples().iter().map(|x| x * 2.5 + &shift).collect(),
    )
    .unwrap();
    let opts = ApOptions::default();
    let f1 = mopup::fit(&set, 2, 3, &opts).unwrap();
    let f2 = mopup::fit(&moved, 2, 3, &opts).unwrap();
    ok &= linalg::sin_theta(&f1.u_hat, &f2.u_hat).unwrap() <= 1e-8;
    ok &= linalg::sin_theta(&f1.v_hat, &f2.v_hat).unwrap() <= 1e-8;
    notes.push("affine invariance");

    // Denoise idempotence.
    let once = mopup::denoise(&set, &f1.u_hat, &f1.v_hat).unwrap();
    let cleaned = mopup_core::MatrixSampleSet::new(once.clone()).unwrap();
    let twice = mopup::denoise(&cleaned, &f1.u_hat, &f1.v_hat).unwrap();
    ok &= once
        .iter()
        .zip(&twice)
        .all(|(a, b)| (a - b).norm() <= 1e-10);
    notes.push("denoise idempotence");

    // Full-pipeline CSV determinism modulo the wall_ms column.
    let cfg = ExperimentConfig {
        study: Study::ScaleN,
        sweep: Some(vec![8.0, 16.0]),
        replicates: Some(2),
        ..Default::default()
    }
    .resolve()
    .unwrap();
    let strip = |csv: &str| -> String {
        csv.lines()
            .map(|l| {
                let mut f: Vec<&str> = l.split(',').collect();
                f.remove(8);
                f.join(",")
            })
            .collect::<Vec<_>>()
            .join("\n")
    };
    let a = experiment::records_to_csv(&cfg, &experiment::run_study(&cfg).unwrap());
    let b = experiment::records_to_csv(&cfg, &experiment::run_study(&cfg).unwrap());
    ok &= strip(&a) == strip(&b);
    notes.push("csv determinism");

    let secs = start.elapsed().as_secs_f64();
    report(
        11,
        "invariant suite",
        ok,
        &format!("{}, {secs:.1}s", notes.join(", ")),
    );
}
