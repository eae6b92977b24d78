use mfbo::acquisition::{
    coefficient_of_variation, ei, estimate_rho, log_ei, maximize, maximize_mf, ucb, vf_log_ei, vf_ucb,
    AcquisitionContext, MaximizeOptions, Sense, UcbWeights,
};
use mfbo::gp::{Doe, GaussianProcess, Kernel, KernelParams, Posterior};
use mfbo::mtgp::{MfDoe, MtParams, MultiTaskGp, TaskCovariance};
use mfbo::sampling::DesignMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn two_level_model() -> MultiTaskGp<f64> {
    let f = |x: f64| (6.0 * x - 2.0).powi(2) * (12.0 * x - 4.0).sin();
    let lf_x: Vec<f64> = (0..8).map(|k| k as f64 / 7.0).collect();
    let hf_x = [0.0, 0.4, 1.0];
    let doe = |xs: &[f64], g: &dyn Fn(f64) -> f64| {
        Doe::new(DesignMatrix::from_row_major(xs.len(), 1, xs.to_vec()).unwrap(), xs.iter().map(|&x| g(x)).collect()).unwrap()
    };
    let md = MfDoe::new(vec![doe(&lf_x, &|x| 0.5 * f(x) + 10.0 * (x - 0.5) - 5.0), doe(&hf_x, &f)]).unwrap();
    let task = TaskCovariance::from_factor(vec![vec![1.0], vec![0.8, 0.5]]).unwrap();
    MultiTaskGp::with_params(&md, Kernel::Matern52, MtParams::new(KernelParams::new(1.0, 0.2, 1e-6), task)).unwrap()
}

#[test]
fn vf_log_ei_at_top_fidelity_is_log_ei() {
    let model = two_level_model();
    let ctx = AcquisitionContext::multi(1.5, Sense::Maximize, 1.0, vec![0.11, 1.0], vec![0.68, 1.0]).unwrap();
    for k in 0..50 {
        let x = [k as f64 / 49.0];
        let post = model.predict(&x);
        assert_eq!(vf_log_ei(&post, 2, &ctx).to_bits(), log_ei(&post.at(2), &ctx).to_bits());
    }
}

#[test]
fn vf_log_ei_low_fidelity_offset() {
    let model = two_level_model();
    let ctx = AcquisitionContext::multi(1.5, Sense::Maximize, 1.0, vec![0.11, 1.0], vec![0.68, 1.0]).unwrap();
    let post = model.predict(&[0.63]);
    let want = log_ei(&post.at(1), &ctx) + (0.11f64 * 0.68).ln();
    assert!((vf_log_ei(&post, 1, &ctx) - want).abs() < 1e-12);
}

#[test]
fn zero_correlation_excludes_low_fidelity() {
    let model = two_level_model();
    let ctx = AcquisitionContext::multi(-100.0, Sense::Maximize, 1.0, vec![0.11, 1.0], vec![0.0, 1.0]).unwrap();
    assert_eq!(vf_log_ei(&model.predict(&[0.2]), 1, &ctx), f64::NEG_INFINITY);
    for seed in 0..5 {
        let opts = MaximizeOptions { seed, ..Default::default() };
        let c = maximize_mf(|x: &[f64], m| vf_log_ei(&model.predict(x), m, &ctx), 1, 2, &opts);
        assert_eq!(c.fidelity, 2);
    }
}

#[test]
fn vf_ucb_special_cases() {
    let model = two_level_model();
    let mut ctx = AcquisitionContext::multi(0.0, Sense::Maximize, 1.0, vec![0.11, 1.0], vec![0.68, 1.0]).unwrap();
    let post = model.predict(&[0.3]);
    ctx.ucb_weights = vec![UcbWeights::new(1.0, 0.0); 2];
    assert_eq!(vf_ucb(&post, 1, &ctx), post.mean[0]);
    ctx.ucb_weights = vec![UcbWeights::new(1.0, 1.0); 2];
    assert_eq!(vf_ucb(&post, 2, &ctx), ucb(&post.at(2), &ctx));
    let lf_spread = vf_ucb(&post, 1, &ctx) - post.mean[0];
    assert!((lf_spread - 0.11 * post.at(1).std()).abs() < 1e-12);
}

#[test]
fn cv_weights_are_bounded() {
    let model = two_level_model();
    let cv = coefficient_of_variation(&model, 1, 64, 3);
    assert_eq!(cv.len(), 2);
    for c in cv {
        assert!((0.0..=10.0).contains(&c));
        let w = UcbWeights::from_cv(c);
        assert!((w.mean + w.spread - 1.0).abs() < 1e-15);
        assert!(w.spread >= 0.0 && w.spread < 1.0);
    }
}

#[test]
fn rho_from_coincident_designs() {
    let x = DesignMatrix::from_row_major(5, 1, vec![0.1, 0.3, 0.5, 0.7, 0.9]).unwrap();
    let y: Vec<f64> = vec![1.0, 3.0, 2.0, 5.0, 4.0];
    let neg: Vec<f64> = y.iter().map(|v| -v).collect();
    let same = MfDoe::new(vec![Doe::new(x.clone(), y.clone()).unwrap(), Doe::new(x.clone(), y.clone()).unwrap()]).unwrap();
    assert!((estimate_rho::<f64>(&same).unwrap() - 1.0).abs() < 1e-15);
    let anti = MfDoe::new(vec![Doe::new(x.clone(), y).unwrap(), Doe::new(x.clone(), neg).unwrap()]).unwrap();
    assert!((estimate_rho::<f64>(&anti).unwrap() + 1.0).abs() < 1e-15);
    let hf = Doe::new(x.head(2), vec![0.0, 1.0]).unwrap();
    let few = MfDoe::new(vec![Doe::new(x, vec![0.0; 5]).unwrap(), hf]).unwrap();
    assert!(matches!(estimate_rho(&few), Err(mfbo::Error::InsufficientData(_))));
}

#[test]
fn maximize_is_deterministic_and_stays_in_box() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let x: Vec<f64> = (0..16).map(|_| rng.gen()).collect();
    let y: Vec<f64> = (0..8).map(|_| rng.gen()).collect();
    let doe = Doe::new(DesignMatrix::from_row_major(8, 2, x).unwrap(), y).unwrap();
    let gp = GaussianProcess::with_params(&doe, Kernel::Rbf, KernelParams::new(1.0, 0.2, 1e-6)).unwrap();
    let ctx = AcquisitionContext::single(0.9, Sense::Maximize, 2.0);
    let opts = MaximizeOptions { seed: 4, ..Default::default() };
    let a = maximize(|x: &[f64]| ucb(&gp.predict(x), &ctx), 2, &opts);
    let b = maximize(|x: &[f64]| ucb(&gp.predict(x), &ctx), 2, &opts);
    assert_eq!(a, b);
    assert!(a.x.iter().all(|v| (0.0..=1.0).contains(v)));
}

#[test]
fn maximize_never_worse_than_screened_starts() {
    let f = |x: &[f64]| (9.0 * x[0]).sin() * (7.0 * x[1]).cos() - x[0];
    let opts = MaximizeOptions::default();
    let c = maximize(f, 2, &opts);
    let starts = mfbo::optim::sobol_starts::<f64>(opts.screen, &[0.0, 0.0], &[1.0, 1.0], opts.seed);
    assert!(starts.iter().all(|s| f(s) <= c.value));
}

proptest! {
    #[test]
    fn ei_is_nonnegative_and_monotone_in_sigma(mu in -5.0f64..5.0, best in -5.0f64..5.0, s1 in 0.0f64..3.0, ds in 0.0f64..3.0) {
        let ctx = AcquisitionContext::single(best, Sense::Maximize, 0.0);
        let a = ei(&Posterior { mean: mu, var: s1 * s1 }, &ctx);
        let b = ei(&Posterior { mean: mu, var: (s1 + ds) * (s1 + ds) }, &ctx);
        prop_assert!(a >= 0.0);
        prop_assert!(b >= a - 1e-14);
    }

    #[test]
    fn ei_scales_with_common_factor(mu in -5.0f64..5.0, best in -5.0f64..5.0, s in 0.01f64..3.0, k in 0.1f64..10.0) {
        // compared in the log domain, where deep-tail values stay representable
        let a = log_ei(&Posterior { mean: mu, var: s * s }, &AcquisitionContext::single(best, Sense::Maximize, 0.0));
        let b = log_ei(&Posterior { mean: k * mu, var: k * k * s * s }, &AcquisitionContext::single(k * best, Sense::Maximize, 0.0));
        prop_assert!((b - k.ln() - a).abs() <= 1e-9 * a.abs().max(1.0), "{} {}", a, b);
    }

    #[test]
    fn log_ei_is_finite_for_positive_sigma(mu in -1e3f64..1e3, best in -1e3f64..1e3, s in 1e-3f64..10.0) {
        let ctx = AcquisitionContext::single(best, Sense::Minimize, 0.0);
        let v = log_ei(&Posterior { mean: mu, var: s * s }, &ctx);
        prop_assert!(v.is_finite());
    }
}
