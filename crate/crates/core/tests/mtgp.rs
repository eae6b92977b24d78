use mfbo::gp::{fit_mle, FitOptions, GaussianProcess, Kernel, KernelParams};
use mfbo::mtgp::{block_gram, mf_fit_mle, mt_kernel, MfDoe, MtFitOptions, MtParams, MultiTaskGp, NoiseMode, TaskCovariance};
use mfbo::sampling::DesignMatrix;
use mfbo::gp::Doe;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_doe(rng: &mut ChaCha8Rng, n: usize, d: usize, f: impl Fn(&[f64]) -> f64) -> Doe<f64> {
    let x: Vec<f64> = (0..n * d).map(|_| rng.gen()).collect();
    let x = DesignMatrix::from_row_major(n, d, x).unwrap();
    let y = x.iter_rows().map(|r| f(r)).collect();
    Doe::new(x, y).unwrap()
}

fn smooth(x: &[f64]) -> f64 {
    x.iter().enumerate().map(|(k, v)| ((k + 2) as f64 * v).sin()).sum()
}

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-300) || (a - b).abs() <= tol * 1e-3
}

#[test]
fn identity_task_matrix_matches_independent_posteriors() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let lf = random_doe(&mut rng, 12, 2, |x| smooth(x) + 0.5);
    let hf = random_doe(&mut rng, 7, 2, |x| 2.0 * smooth(x));
    let md = MfDoe::new(vec![lf.clone(), hf.clone()]).unwrap();
    let base = KernelParams::new(1.3, 0.35, 1e-6);
    let mt = MultiTaskGp::with_params(&md, Kernel::Matern52, MtParams::new(base, TaskCovariance::identity(2))).unwrap();
    let stdz = md.pooled_standardization();
    for (m, level) in [(1, &lf), (2, &hf)] {
        let pooled = Doe::new(level.x.clone(), level.y.iter().map(|&v| stdz.apply(v)).collect()).unwrap();
        let single = GaussianProcess::raw(&pooled, Kernel::Matern52, base).unwrap();
        for _ in 0..50 {
            let x = [rng.gen::<f64>(), rng.gen::<f64>()];
            let a = mt.predict_level(&x, m);
            let s = single.predict(&x);
            let b_mean = stdz.invert(s.mean);
            let b_var = stdz.invert_var(s.var);
            assert!(rel_close(a.mean, b_mean, 1e-8), "{} vs {}", a.mean, b_mean);
            assert!(rel_close(a.var, b_var, 1e-8), "{} vs {}", a.var, b_var);
            let joint = mt.predict(&x).at(m);
            assert_eq!(joint.mean, a.mean);
            assert!(rel_close(joint.var, a.var, 1e-12));
        }
    }
}

#[test]
fn single_fidelity_reduces_to_gp() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for trial in 0..5 {
        let doe = random_doe(&mut rng, 10 + trial, 3, smooth);
        let md = MfDoe::new(vec![doe.clone()]).unwrap();
        let opts = MtFitOptions { base: FitOptions { seed: trial as u64, ..Default::default() }, ..Default::default() };
        let mt = MultiTaskGp::fit(&md, Kernel::Rbf, &opts).unwrap();
        let gp = GaussianProcess::fit(&doe, Kernel::Rbf, &opts.base).unwrap();
        assert_eq!(mt.params().base, *gp.params());
        for _ in 0..20 {
            let x: Vec<f64> = (0..3).map(|_| rng.gen()).collect();
            let a = mt.predict_level(&x, 1);
            let b = gp.predict(&x);
            assert!((a.mean - b.mean).abs() <= 1e-10 * b.mean.abs().max(1.0));
            assert!((a.var - b.var).abs() <= 1e-10 * b.var.abs().max(1.0));
        }
    }
}

#[test]
fn block_gram_matches_elementwise_evaluation() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let levels: Vec<Doe<f64>> = [5, 4, 6].iter().map(|&n| random_doe(&mut rng, n, 2, smooth)).collect();
    let md = MfDoe::new(levels.clone()).unwrap();
    let task = TaskCovariance::from_factor(vec![vec![0.9], vec![0.4, 0.7], vec![-0.3, 0.2, 1.1]]).unwrap();
    let p = MtParams::new(KernelParams::new(1.7, 0.4, 1e-3), task);
    let k = block_gram(&md, Kernel::Rbf, &p).unwrap();
    let stacked: Vec<(usize, Vec<f64>)> = levels
        .iter()
        .enumerate()
        .flat_map(|(t, l)| l.x.iter_rows().map(move |r| (t + 1, r.to_vec())))
        .collect();
    assert_eq!(k.rows(), 15);
    for (a, (i, u)) in stacked.iter().enumerate() {
        for (b, (j, v)) in stacked.iter().enumerate() {
            let want = mt_kernel(u, *i, v, *j, Kernel::Rbf, &p);
            assert!((k.get(a, b) - want).abs() <= 1e-12, "({a},{b})");
        }
    }
}

#[test]
fn two_level_identity_gram_is_block_diagonal() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let md = MfDoe::new(vec![random_doe(&mut rng, 4, 1, smooth), random_doe(&mut rng, 3, 1, smooth)]).unwrap();
    let p = MtParams::new(KernelParams::new(1.0, 0.3, 0.0), TaskCovariance::identity(2));
    let k = block_gram(&md, Kernel::Matern52, &p).unwrap();
    for a in 0..4 {
        for b in 4..7 {
            assert_eq!(k.get(a, b), 0.0);
            assert_eq!(k.get(b, a), 0.0);
        }
    }
}

fn fitted_correlation(md: &MfDoe<f64>, seed: u64) -> f64 {
    let opts = MtFitOptions { base: FitOptions { seed, ..Default::default() }, ..Default::default() };
    let r = mf_fit_mle(md, Kernel::Matern52, &opts).unwrap();
    r.params.task.correlation(1, 2)
}

#[test]
fn duplicated_data_fits_high_correlation() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let doe = random_doe(&mut rng, 20, 2, smooth);
    let md = MfDoe::new(vec![doe.clone(), doe]).unwrap();
    let rho = fitted_correlation(&md, 1);
    assert!(rho >= 0.95, "{rho}");
}

/// Exact draw of a unit-variance Matérn-5/2 process (length scale 0.1,
/// nugget 1e-6) at the points `x`.
fn gp_draw(rng: &mut ChaCha8Rng, x: &DesignMatrix<f64>) -> Vec<f64> {
    let p = KernelParams::new(1.0, 0.1, 1e-6);
    let k = mfbo::gp::gram(x, Kernel::Matern52, &p);
    let l = mfbo::linalg::cholesky(&k).unwrap();
    let z: Vec<f64> = (0..x.rows())
        .map(|_| {
            // Box–Muller
            let u: f64 = 1.0 - rng.gen::<f64>();
            let v: f64 = rng.gen();
            (-2.0 * u.ln()).sqrt() * (std::f64::consts::TAU * v).cos()
        })
        .collect();
    l.mul_vec(&z)
}

#[test]
fn independent_functions_fit_low_correlation() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let x: Vec<f64> = (0..60).map(|_| rng.gen()).collect();
    let dm = DesignMatrix::from_row_major(60, 1, x).unwrap();
    let y1 = gp_draw(&mut rng, &dm);
    let y2 = gp_draw(&mut rng, &dm);
    let md = MfDoe::new(vec![Doe::new(dm.clone(), y1).unwrap(), Doe::new(dm, y2).unwrap()]).unwrap();
    let rho = fitted_correlation(&md, 2);
    assert!(rho.abs() <= 0.3, "{rho}");
}

#[test]
fn fit_is_deterministic_under_seed() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let md = MfDoe::new(vec![
        random_doe(&mut rng, 10, 2, |x| smooth(x) + 0.3 * x[0]),
        random_doe(&mut rng, 5, 2, smooth),
    ])
    .unwrap();
    let opts = MtFitOptions::<f64> { noise: NoiseMode::PerFidelity, ..Default::default() };
    let a = mf_fit_mle(&md, Kernel::Rbf, &opts).unwrap();
    let b = mf_fit_mle(&md, Kernel::Rbf, &opts).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.params.noise.as_ref().map(Vec::len), Some(2));
}

#[test]
fn low_fidelity_data_shrinks_high_fidelity_variance() {
    let f = |x: &[f64]| (6.0 * x[0] - 2.0).powi(2) * (12.0 * x[0] - 4.0).sin();
    let hf_x = [0.0, 0.5, 1.0];
    let lf_x: Vec<f64> = (0..11).map(|k| k as f64 / 10.0).collect();
    let dm = |xs: &[f64]| DesignMatrix::from_row_major(xs.len(), 1, xs.to_vec()).unwrap();
    let hf = Doe::new(dm(&hf_x), hf_x.iter().map(|&x| f(&[x])).collect()).unwrap();
    let lf = Doe::new(dm(&lf_x), lf_x.iter().map(|&x| f(&[x])).collect()).unwrap();
    let md = MfDoe::new(vec![lf, hf.clone()]).unwrap();
    let base = KernelParams::new(1.0, 0.15, 1e-8);
    let corr = TaskCovariance::from_factor(vec![vec![1.0], vec![0.999, 0.0447]]).unwrap();
    let mt = MultiTaskGp::with_params(&md, Kernel::Matern52, MtParams::new(base, corr)).unwrap();
    let stdz = md.pooled_standardization();
    let pooled = Doe::new(hf.x.clone(), hf.y.iter().map(|&v| stdz.apply(v)).collect()).unwrap();
    let hf_only = GaussianProcess::raw(&pooled, Kernel::Matern52, base).unwrap();
    for &x in &[0.2, 0.3, 0.7, 0.8] {
        let with_lf = mt.predict_level(&[x], 2).var;
        let without = stdz.invert_var(hf_only.predict(&[x]).var);
        assert!(with_lf < without, "x={x}: {with_lf} vs {without}");
    }
}

#[test]
fn duplicated_fidelities_need_regularization() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let doe = random_doe(&mut rng, 6, 1, smooth);
    let md = MfDoe::new(vec![doe.clone(), doe]).unwrap();
    let ones = TaskCovariance::from_factor(vec![vec![1.0], vec![1.0, 1e-12]]).unwrap();
    let noisy = MtParams::new(KernelParams::new(1.0, 0.3, 1e-4), ones.clone());
    assert!(MultiTaskGp::with_params(&md, Kernel::Rbf, noisy).is_ok());
    let noiseless = MtParams::new(KernelParams::new(1.0, 0.3, 0.0), ones);
    // the plain factorization fails, jitter rescues it
    let k = block_gram(&md, Kernel::Rbf, &noiseless).unwrap();
    assert!(mfbo::linalg::cholesky(&k).is_none());
    assert!(MultiTaskGp::with_params(&md, Kernel::Rbf, noiseless).is_ok());
}

#[test]
fn record_round_trips_through_json() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let md = MfDoe::new(vec![random_doe(&mut rng, 5, 2, smooth), random_doe(&mut rng, 3, 2, smooth)]).unwrap();
    let task = TaskCovariance::from_factor(vec![vec![1.0], vec![0.5, 0.5]]).unwrap();
    let gp = MultiTaskGp::with_params(&md, Kernel::Rbf, MtParams::new(KernelParams::new(1.0, 0.3, 1e-6), task)).unwrap();
    let rec = gp.record(Some(vec!["lf.csv".into(), "hf.csv".into()]));
    let json = serde_json::to_string(&rec).unwrap();
    let back: mfbo::mtgp::MtModelRecord<f64> = serde_json::from_str(&json).unwrap();
    assert_eq!(back, rec);
    assert_eq!(back.n_levels, 2);
    assert_eq!(back.counts, vec![5, 3]);
}

#[test]
fn single_level_fit_equals_gp_fit() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let doe = random_doe(&mut rng, 9, 2, smooth);
    let a = mf_fit_mle(&MfDoe::new(vec![doe.clone()]).unwrap(), Kernel::Rbf, &MtFitOptions::default()).unwrap();
    let b = fit_mle(&doe, Kernel::Rbf, &MtFitOptions::<f64>::default().base).unwrap();
    assert_eq!(a.params.base, b.params);
    assert_eq!(a.nll, b.nll);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn task_covariance_is_psd(raw in proptest::collection::vec(-3.0f64..3.0, 6), diag in proptest::collection::vec(0.01f64..3.0, 3)) {
        let l = vec![vec![diag[0]], vec![raw[0], diag[1]], vec![raw[1], raw[2], diag[2]]];
        let b = TaskCovariance::from_factor(l).unwrap().matrix();
        prop_assert!(b.is_symmetric(1e-12));
        // xᵀBx = |Lᵀx|² ≥ 0 for probe directions
        for k in 0..3 {
            let x = [raw[3 + k], raw[(4 + k) % 6], 1.0];
            let bx = b.mul_vec(&x);
            let q: f64 = x.iter().zip(&bx).map(|(a, b)| a * b).sum();
            prop_assert!(q >= -1e-10);
        }
        for i in 0..3 {
            prop_assert!(b.get(i, i) > 0.0);
        }
    }

    #[test]
    fn mt_kernel_is_symmetric(u in proptest::collection::vec(0.0f64..1.0, 2), v in proptest::collection::vec(0.0f64..1.0, 2), i in 1usize..=2, j in 1usize..=2) {
        let task = TaskCovariance::from_factor(vec![vec![0.8], vec![0.3, 0.6]]).unwrap();
        let p = MtParams::new(KernelParams::new(1.2, 0.4, 1e-3), task);
        prop_assert_eq!(mt_kernel(&u, i, &v, j, Kernel::Matern52, &p), mt_kernel(&v, j, &u, i, Kernel::Matern52, &p));
    }
}

