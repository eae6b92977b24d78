use std::sync::atomic::{AtomicUsize, Ordering};

use mfbo::gp::{FitOptions, Kernel};
use mfbo::objectives::{benchmark, EvalError, FnObjective, Objective, ObjectiveSpec, Sense};
use mfbo::optim::NelderMeadOptions;
use mfbo::optimizer::{
    build_initial_doe, run_bo, run_mfbo, AcquisitionKind, EvalRecord, InitialDoeOptions, LoopOptions, Phase,
    RecommendationRule, RunHistory, StopReason,
};
use mfbo::acquisition::MaximizeOptions;
use mfbo::sampling::Bounds;

fn quick_options(iterations: usize, seed: u64) -> LoopOptions<f64> {
    LoopOptions {
        iterations,
        seed,
        fit: FitOptions {
            restarts: 3,
            local: NelderMeadOptions {
                max_evals: 150,
                f_tol: 1e-8,
                x_tol: 1e-5,
                initial_step: 0.1,
            },
            ..FitOptions::default()
        },
        maximize: MaximizeOptions {
            starts: 8,
            screen: 128,
            ..MaximizeOptions::default()
        },
        cv_probes: 64,
        ..LoopOptions::default()
    }
}

fn quadratic() -> FnObjective<impl Fn(&[f64], usize) -> Result<f64, EvalError> + Send + Sync> {
    let spec = ObjectiveSpec::new("quadratic", Bounds::unit(1), vec![1.0], Sense::Maximize).unwrap();
    FnObjective::new(spec, |x: &[f64], _| Ok(-(x[0] - 0.6).powi(2)))
}

fn initial<O: Objective<f64>>(obj: &O, budget: f64, multi: bool, seed: u64) -> RunHistory<f64> {
    build_initial_doe(
        obj,
        &InitialDoeOptions {
            budget,
            multi_fidelity: multi,
            hf_share: 0.5,
            seed,
        },
    )
    .unwrap()
}

fn no_observer() -> impl FnMut(&EvalRecord<f64>) -> mfbo::Result<()> {
    |_| Ok(())
}

#[test]
fn zero_iterations_recommend_the_initial_best() {
    let obj = quadratic();
    let h = initial(&obj, 5.0, false, 3);
    let best = h.best(1).unwrap().clone();
    let out = run_bo(&obj, h, &quick_options(0, 0), &mut no_observer()).unwrap();
    assert_eq!(out.history.len(), 5);
    assert_eq!(out.recommendation.x, best.x);
    assert_eq!(out.recommendation.y, best.value.unwrap());
}

#[test]
fn quadratic_optimum_is_found() {
    let obj = quadratic();
    let mut opts = quick_options(15, 1);
    opts.kernel = Kernel::Rbf;
    let out = run_bo(&obj, initial(&obj, 4.0, false, 1), &opts, &mut no_observer()).unwrap();
    let loop_records = out.history.records().iter().filter(|r| r.phase == Phase::Iteration).count();
    assert_eq!(loop_records, 15);
    assert!((out.recommendation.x[0] - 0.6).abs() <= 0.02, "{:?}", out.recommendation);
    // cumulative best never gets worse
    let cb: Vec<f64> = out.history.cumulative_best(1).into_iter().map(Option::unwrap).collect();
    assert!(cb.windows(2).all(|w| w[1] >= w[0]));
    assert_eq!(out.stop, StopReason::Iterations);
}

#[test]
fn single_level_mfbo_matches_bo_bit_for_bit() {
    let spec = ObjectiveSpec::new("wave", Bounds::unit(2), vec![1.0], Sense::Minimize).unwrap();
    let obj = FnObjective::new(spec, |x: &[f64], _| Ok((7.0 * x[0]).sin() * x[1] + (x[0] - 0.3).powi(2)));
    for acq in [AcquisitionKind::LogEi, AcquisitionKind::Ucb] {
        let mut opts = quick_options(6, 11);
        opts.acquisition = acq;
        opts.budget = Some(6.0);
        let h = initial(&obj, 6.0, false, 5);
        let bo = run_bo(&obj, h.clone(), &opts, &mut no_observer()).unwrap();
        let mf = run_mfbo(&obj, h, &opts, &mut no_observer()).unwrap();
        let strip = |h: &RunHistory<f64>| -> Vec<(Vec<u64>, usize, Option<u64>)> {
            h.records()
                .iter()
                .map(|r| (r.x.iter().map(|v| v.to_bits()).collect(), r.fidelity, r.value.map(f64::to_bits)))
                .collect()
        };
        assert_eq!(strip(&bo.history), strip(&mf.history), "{acq}");
        assert_eq!(bo.recommendation.x, mf.recommendation.x);
        assert_eq!(mf.ledger.spent(), 6.0);
    }
}

fn counted_pair(calls: &AtomicUsize) -> FnObjective<impl Fn(&[f64], usize) -> Result<f64, EvalError> + Send + Sync + '_> {
    let spec = ObjectiveSpec::new("pair", Bounds::unit(1), vec![0.11, 1.0], Sense::Maximize).unwrap();
    FnObjective::new(spec, move |x: &[f64], m| {
        calls.fetch_add(1, Ordering::SeqCst);
        let hf = (6.0 * x[0] - 2.0).powi(2) * (12.0 * x[0] - 4.0).sin();
        Ok(if m == 2 { -hf } else { -(0.5 * hf + 10.0 * (x[0] - 0.5) - 5.0) })
    })
}

#[test]
fn budget_below_cheapest_fidelity_evaluates_nothing() {
    let calls = AtomicUsize::new(0);
    let obj = counted_pair(&calls);
    let h = initial(&obj, 4.0, true, 0);
    let before = calls.load(Ordering::SeqCst);
    let mut opts = quick_options(10, 0);
    opts.budget = Some(0.1);
    let out = run_mfbo(&obj, h.clone(), &opts, &mut no_observer()).unwrap();
    assert_eq!(calls.load(Ordering::SeqCst), before);
    assert_eq!(out.history.len(), h.len());
    assert_eq!(out.stop, StopReason::Budget);
    assert_eq!(out.recommendation.y, h.best(2).unwrap().value.unwrap());
    assert_eq!(out.recommendation.rule, RecommendationRule::NoHeadroom);
}

#[test]
fn only_the_evaluated_fidelity_is_augmented() {
    let calls = AtomicUsize::new(0);
    let obj = counted_pair(&calls);
    let mut opts = quick_options(8, 2);
    opts.budget = Some(4.0);
    opts.promote = false;
    let out = run_mfbo(&obj, initial(&obj, 4.0, true, 2), &opts, &mut no_observer()).unwrap();
    let h = &out.history;
    let mut counts = [0usize; 2];
    for r in h.records() {
        if r.phase == Phase::Initial {
            counts[r.fidelity - 1] += 1;
        }
    }
    for r in h.records().iter().filter(|r| r.phase == Phase::Iteration) {
        counts[r.fidelity - 1] += 1;
    }
    assert_eq!(h.doe(1).unwrap().len(), counts[0]);
    assert_eq!(h.doe(2).unwrap().len(), counts[1]);
    // the ledger equals the cost of the loop evaluations
    let sum: f64 = h.records().iter().filter(|r| r.phase != Phase::Initial).map(|r| r.cost).sum();
    assert!((out.ledger.spent() - sum).abs() <= 1e-12);
    assert!(out.ledger.spent() <= 4.0);
}

#[test]
fn failed_evaluations_are_recorded_charged_and_excluded() {
    let spec = ObjectiveSpec::new("flaky", Bounds::unit(1), vec![1.0], Sense::Maximize).unwrap();
    // the simulator crashes near the optimum
    let obj = FnObjective::new(spec, |x: &[f64], _| {
        if (x[0] - 0.6).abs() < 0.05 {
            Err(EvalError::Other("mesh failure".into()))
        } else {
            Ok(-(x[0] - 0.6).powi(2))
        }
    });
    let mut opts = quick_options(8, 4);
    opts.budget = Some(8.0);
    let out = run_bo(&obj, initial(&obj, 4.0, false, 4), &opts, &mut no_observer()).unwrap();
    let loop_recs: Vec<_> = out.history.records().iter().filter(|r| r.phase == Phase::Iteration).collect();
    assert_eq!(loop_recs.len(), 8);
    assert_eq!(out.ledger.spent(), 8.0);
    let failed: Vec<_> = loop_recs.iter().filter(|r| !r.is_success()).collect();
    assert!(!failed.is_empty());
    assert!(failed.iter().all(|r| r.error.as_deref().unwrap().contains("mesh failure")));
    // no design is retried within the exclusion radius
    for (k, f) in failed.iter().enumerate() {
        for g in &failed[k + 1..] {
            assert!((f.x[0] - g.x[0]).abs() > opts.exclusion_radius);
        }
    }
    assert!(out.recommendation.y.is_finite());
}

#[test]
fn observer_failure_aborts_with_partial_history() {
    let obj = quadratic();
    let mut seen = 0;
    let mut observer = |_: &EvalRecord<f64>| {
        seen += 1;
        if seen == 3 {
            Err(mfbo::Error::InvalidArgument("disk full".into()))
        } else {
            Ok(())
        }
    };
    let err = run_bo(&obj, initial(&obj, 4.0, false, 0), &quick_options(10, 0), &mut observer).unwrap_err();
    assert_eq!(err.history.len(), 4 + 3);
    assert!(err.to_string().contains("disk full"));
}

#[test]
fn constant_initial_data_is_rejected() {
    let spec = ObjectiveSpec::new("flat", Bounds::unit(1), vec![1.0], Sense::Maximize).unwrap();
    let obj = FnObjective::new(spec, |_: &[f64], _| Ok(1.0));
    let err = run_bo(&obj, initial(&obj, 4.0, false, 0), &quick_options(3, 0), &mut no_observer()).unwrap_err();
    assert_eq!(err.history.len(), 4);
}

#[test]
fn resume_replays_bit_for_bit() {
    let calls = AtomicUsize::new(0);
    let obj = counted_pair(&calls);
    let mut opts = quick_options(6, 9);
    opts.budget = Some(3.0);
    let h0 = initial(&obj, 4.0, true, 9);
    let full = run_mfbo(&obj, h0.clone(), &opts, &mut no_observer()).unwrap();

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("history.jsonl");
    let mut first = opts.clone();
    first.iterations = 3;
    first.promote = false;
    let part = run_mfbo(&obj, h0, &first, &mut no_observer()).unwrap();
    part.history.write_jsonl(&path).unwrap();
    let reloaded = RunHistory::read_jsonl(&path, Sense::Maximize, vec![0.11, 1.0]).unwrap();
    let resumed = run_mfbo(&obj, reloaded, &opts, &mut no_observer()).unwrap();

    let strip = |h: &RunHistory<f64>| -> Vec<String> {
        h.records()
            .iter()
            .map(|r| {
                let mut r = r.clone();
                r.wall_seconds = 0.0;
                serde_json::to_string(&r).unwrap()
            })
            .collect()
    };
    assert_eq!(strip(&full.history), strip(&resumed.history));
    assert_eq!(full.recommendation, resumed.recommendation);
}

#[test]
fn initial_split_follows_the_hf_share() {
    let b = benchmark("hartmann3").unwrap();
    let h = build_initial_doe::<f64, _>(
        &b,
        &InitialDoeOptions {
            budget: 160.0,
            multi_fidelity: true,
            hf_share: 0.5,
            seed: 7,
        },
    )
    .unwrap();
    let lf = h.doe(1).unwrap();
    let hf = h.doe(2).unwrap();
    assert_eq!((lf.len(), hf.len()), (727, 80));
    // HF designs are the first LF designs
    for k in 0..80 {
        assert_eq!(hf.x.row(k), lf.x.row(k));
    }
    let hf_equiv: f64 = 727.0 * 0.11 + 80.0;
    assert!((hf_equiv - 160.0).abs() <= 0.11);
    let single = build_initial_doe::<f64, _>(&b, &InitialDoeOptions { budget: 160.0, seed: 7, ..Default::default() }).unwrap();
    assert_eq!(single.len(), 160);
    assert!(single.records().iter().all(|r| r.fidelity == 2));
    let again = build_initial_doe::<f64, _>(&b, &InitialDoeOptions { budget: 160.0, seed: 7, ..Default::default() }).unwrap();
    assert_eq!(
        single.records().iter().map(|r| r.x.clone()).collect::<Vec<_>>(),
        again.records().iter().map(|r| r.x.clone()).collect::<Vec<_>>()
    );
}

#[test]
fn promotion_checks_lf_incumbent_at_hf() {
    let calls = AtomicUsize::new(0);
    let obj = counted_pair(&calls);
    let mut opts = quick_options(4, 3);
    opts.budget = Some(6.0);
    let out = run_mfbo(&obj, initial(&obj, 4.0, true, 3), &opts, &mut no_observer()).unwrap();
    let h = &out.history;
    let lf_best = h.best(1).unwrap().x.clone();
    assert!(h.records().iter().any(|r| r.fidelity == 2 && r.x == lf_best));
    let rec = &h.records()[out.recommendation.record];
    assert_eq!(rec.fidelity, 2);
    assert_eq!(rec.value, Some(out.recommendation.y));
    assert!(out.ledger.spent() <= 6.0);
    assert!(matches!(
        out.recommendation.rule,
        RecommendationRule::Promoted | RecommendationRule::HighFidelityObserved
    ));
}
