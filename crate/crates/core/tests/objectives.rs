use std::fs;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use mfbo::objectives::{
    benchmark, benchmark_names, cache_key, ea_normalized, probe_correlation, tunable_pair, CachedObjective, EvalCache,
    EvalError, ExternalConfig, ExternalObjective, FnObjective, ForceDisplacementCurve, Objective, ObjectiveSpec, Sense,
};
use mfbo::sampling::{Bounds, ParameterBound};
use proptest::prelude::*;

#[test]
fn registry_correlations_match_probe_grid() {
    for name in benchmark_names() {
        let b = benchmark(name).unwrap();
        let spec = Objective::<f64>::spec(&b);
        if spec.fidelities() < 2 {
            continue;
        }
        let documented = spec.correlation.unwrap();
        let measured = probe_correlation(&b).unwrap();
        assert!((documented - measured).abs() <= 0.05, "{name}: {documented} vs {measured}");
        assert!((documented - measured).abs() <= 1e-9, "{name}: {documented} vs {measured}");
    }
}

#[test]
fn tunable_pair_hits_its_target() {
    for target in [0.5, 0.68, 0.9] {
        let b = tunable_pair(target, vec![0.11, 1.0]).unwrap();
        let rho = probe_correlation(&b).unwrap();
        assert!((rho - target).abs() < 1e-6, "{target}: {rho}");
    }
    assert!(tunable_pair(1.5, vec![0.11, 1.0]).is_err());
}

fn grid_min(dim: usize, per_axis: usize, f: impl Fn(&[f64]) -> f64) -> f64 {
    let mut best = f64::INFINITY;
    let mut idx = vec![0usize; dim];
    let mut x = vec![0.0; dim];
    loop {
        for (v, &i) in x.iter_mut().zip(&idx) {
            *v = i as f64 / (per_axis - 1) as f64;
        }
        best = best.min(f(&x));
        let mut k = 0;
        loop {
            if k == dim {
                return best;
            }
            idx[k] += 1;
            if idx[k] < per_axis {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

#[test]
fn stored_optima_match_dense_grids() {
    for (name, per_axis) in [("forrester", 100_001), ("hartmann3", 201), ("tunable", 2001)] {
        let b = benchmark(name).unwrap();
        let spec = Objective::<f64>::spec(&b).clone();
        let opt = spec.optimum.clone().unwrap();
        let top = spec.fidelities();
        let g = grid_min(spec.dim(), per_axis, |x| b.eval_f64(x, top));
        assert!((g - opt.value).abs() <= 1e-3, "{name}: grid {g} vs stored {}", opt.value);
        // the stored optimum is a true minimizer, not worse than the grid
        assert!(g >= opt.value - 1e-9, "{name}");
        assert!((b.eval_f64(&opt.x, top) - opt.value).abs() <= 1e-6, "{name}");
    }
}

#[test]
fn top_fidelity_alias_is_hf() {
    let b = benchmark("hartmann3").unwrap();
    let x = [0.2, 0.4, 0.9];
    assert_eq!(Objective::<f64>::evaluate(&b, &x, 2).unwrap(), b.eval_f64(&x, 2));
    assert_ne!(b.eval_f64(&x, 1), b.eval_f64(&x, 2));
}

#[test]
fn ea_on_analytic_curves() {
    let n = 20_001;
    let xs: Vec<f64> = (0..n).map(|k| std::f64::consts::PI * k as f64 / (n - 1) as f64).collect();
    let sin = ForceDisplacementCurve::new(xs.clone(), xs.iter().map(|x| x.sin()).collect(), std::f64::consts::PI, 1.0).unwrap();
    assert!((ea_normalized(&sin).unwrap() - 2.0).abs() < 1e-4);
    let lin = ForceDisplacementCurve::new(vec![0.0, 0.25, 1.0], vec![0.0, 0.25, 1.0], 1.0, 1.0).unwrap();
    assert!((ea_normalized(&lin).unwrap() - 0.5).abs() < 1e-15);
    let flat = ForceDisplacementCurve::new(vec![0.0, 5.0], vec![10.0, 10.0], 5.0, 1000.0).unwrap();
    assert!((ea_normalized(&flat).unwrap() - 0.05).abs() < 1e-15);
}

proptest! {
    #[test]
    fn ea_is_linear_in_force(ps in proptest::collection::vec(-50.0f64..50.0, 2..20), k in 0.1f64..10.0) {
        let xs: Vec<f64> = (0..ps.len()).map(|i| i as f64 * 0.5).collect();
        let d = xs[xs.len() - 1] * 0.8 + 0.01;
        let a = ea_normalized(&ForceDisplacementCurve::new(xs.clone(), ps.clone(), d, 3.0).unwrap()).unwrap();
        let b = ea_normalized(&ForceDisplacementCurve::new(xs, ps.iter().map(|p| k * p).collect(), d, 3.0).unwrap()).unwrap();
        prop_assert!((b - k * a).abs() <= 1e-12 * (k * a).abs().max(1.0));
    }

    #[test]
    fn ea_invariant_to_refining_linear_segments(ps in proptest::collection::vec(-50.0f64..50.0, 2..12), refine in 2usize..6) {
        let xs: Vec<f64> = (0..ps.len()).map(|i| i as f64).collect();
        let d = xs[xs.len() - 1];
        let coarse = ea_normalized(&ForceDisplacementCurve::new(xs.clone(), ps.clone(), d, 1.0).unwrap()).unwrap();
        let mut fx = Vec::new();
        let mut fp = Vec::new();
        for k in 0..ps.len() - 1 {
            for j in 0..refine {
                let t = j as f64 / refine as f64;
                fx.push(xs[k] + t);
                fp.push(ps[k] + t * (ps[k + 1] - ps[k]));
            }
        }
        fx.push(d);
        fp.push(ps[ps.len() - 1]);
        let fine = ea_normalized(&ForceDisplacementCurve::new(fx, fp, d, 1.0).unwrap()).unwrap();
        prop_assert!((fine - coarse).abs() <= 1e-9 * coarse.abs().max(1.0));
    }
}

fn counting_objective(calls: Arc<AtomicUsize>) -> FnObjective<impl Fn(&[f64], usize) -> Result<f64, EvalError> + Send + Sync> {
    let spec = ObjectiveSpec::new("counted", Bounds::unit(2), vec![0.5, 1.0], Sense::Maximize).unwrap();
    FnObjective::new(spec, move |x: &[f64], m: usize| {
        calls.fetch_add(1, Ordering::SeqCst);
        Ok(x[0] + 10.0 * x[1] + m as f64)
    })
}

#[test]
fn cache_hits_and_misses() {
    let calls = Arc::new(AtomicUsize::new(0));
    let obj = CachedObjective::new(counting_objective(calls.clone()), EvalCache::in_memory());
    let x = [0.25, 0.5];
    let a: f64 = obj.evaluate(&x, 1).unwrap();
    let b: f64 = obj.evaluate(&x, 1).unwrap();
    assert_eq!(a, b);
    assert_eq!(calls.load(Ordering::SeqCst), 1);
    assert_eq!(obj.cache().hits(), 1);
    // differs only at the 13th decimal
    let _: f64 = obj.evaluate(&[0.25 + 3e-13, 0.5], 1).unwrap();
    assert_eq!(calls.load(Ordering::SeqCst), 1);
    assert_eq!(obj.cache().hits(), 2);
    let _: f64 = obj.evaluate(&x, 2).unwrap();
    assert_eq!(calls.load(Ordering::SeqCst), 2);
}

#[test]
fn cache_key_depends_on_identity() {
    let spec = ObjectiveSpec::new("a", Bounds::unit(1), vec![1.0], Sense::Maximize).unwrap();
    let mut other = spec.clone();
    other.version = "2".into();
    assert_ne!(cache_key(&spec, &[0.5], 1), cache_key(&other, &[0.5], 1));
    assert_eq!(cache_key(&spec, &[0.0], 1), cache_key(&spec, &[-0.0], 1));
    assert_ne!(cache_key(&spec, &[0.5], 1), cache_key(&spec, &[0.500000000002], 1));
}

#[test]
fn persisted_cache_round_trip_and_rebuild() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cache.jsonl");
    let calls = Arc::new(AtomicUsize::new(0));
    {
        let obj = CachedObjective::new(counting_objective(calls.clone()), EvalCache::open(&path).unwrap());
        for k in 0..5 {
            let _: f64 = obj.evaluate(&[k as f64 / 5.0, 0.5], 2).unwrap();
        }
    }
    assert_eq!(calls.load(Ordering::SeqCst), 5);
    let reopened = CachedObjective::new(counting_objective(calls.clone()), EvalCache::open(&path).unwrap());
    for k in 0..5 {
        let _: f64 = reopened.evaluate(&[k as f64 / 5.0, 0.5], 2).unwrap();
    }
    assert_eq!(calls.load(Ordering::SeqCst), 5);
    assert_eq!(reopened.cache().hits(), 5);

    let mut text = fs::read_to_string(&path).unwrap();
    text.push_str("{not json\n");
    fs::write(&path, text).unwrap();
    let rebuilt = EvalCache::open(&path).unwrap();
    assert_eq!(rebuilt.len(), 5);
    assert_eq!(fs::read_to_string(&path).unwrap().lines().count(), 5);
}

fn script(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, format!("#!/bin/sh\n{body}\n")).unwrap();
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        fs::set_permissions(&path, fs::Permissions::from_mode(0o755)).unwrap();
    }
    path.to_string_lossy().into_owned()
}

const READ_ID: &str = r#"id=$(sed -n 's/.*"id": *"\([^"]*\)".*/\1/p' "$MFBO_REQUEST")"#;

fn adapter(dir: &Path, body: &str, timeout: f64) -> ExternalObjective {
    let bounds = Bounds::new(vec![
        ParameterBound { name: "thickness".into(), lower: 1.0, upper: 3.0, unit: Some("mm".into()) },
        ParameterBound { name: "angle".into(), lower: 0.0, upper: 90.0, unit: Some("deg".into()) },
    ])
    .unwrap();
    let spec = ObjectiveSpec::new("mock-sim", bounds, vec![0.11, 1.0], Sense::Maximize).unwrap();
    let cmd = script(dir, "sim.sh", body);
    ExternalObjective::new(
        spec,
        ExternalConfig {
            command: vec![cmd],
            workdir: dir.join("runs"),
            timeout_seconds: timeout,
            delta_max: Some(5.0),
            ea_s: Some(1000.0),
        },
    )
    .unwrap()
}

#[test]
fn adapter_passes_values_through() {
    let dir = tempfile::tempdir().unwrap();
    let body = format!(
        "{READ_ID}\nprintf '{{\"schema_version\":1,\"id\":\"%s\",\"status\":\"ok\",\"value\":0.5}}' \"$id\" > \"$MFBO_RESPONSE\""
    );
    let obj = adapter(dir.path(), &body, 10.0);
    let v: f64 = obj.evaluate(&[0.5, 0.5], 2).unwrap();
    assert_eq!(v, 0.5);
    // the request carries physical units
    let run = fs::read_dir(dir.path().join("runs")).unwrap().next().unwrap().unwrap().path();
    let req: serde_json::Value = serde_json::from_str(&fs::read_to_string(run.join("request.json")).unwrap()).unwrap();
    assert_eq!(req["design"]["thickness"], 2.0);
    assert_eq!(req["design"]["angle"], 45.0);
    assert_eq!(req["fidelity"], 2);
    assert_eq!(req["units"]["thickness"], "mm");
    assert_eq!(req["schema_version"], 1);
}

#[test]
fn adapter_integrates_returned_curves() {
    let dir = tempfile::tempdir().unwrap();
    let body = format!(
        "{READ_ID}\nprintf 'displacement,force\\n0,10\\n2.5,10\\n6,10\\n' > curve.csv\nprintf '{{\"schema_version\":1,\"id\":\"%s\",\"status\":\"ok\",\"curve_path\":\"curve.csv\"}}' \"$id\" > \"$MFBO_RESPONSE\""
    );
    let obj = adapter(dir.path(), &body, 10.0);
    let v: f64 = obj.evaluate(&[0.1, 0.9], 1).unwrap();
    let curve = ForceDisplacementCurve::new(vec![0.0, 2.5, 6.0], vec![10.0; 3], 5.0, 1000.0).unwrap();
    assert_eq!(v, ea_normalized(&curve).unwrap());
    assert!((v - 0.05).abs() < 1e-15);
}

#[test]
fn adapter_times_out_with_request_id() {
    let dir = tempfile::tempdir().unwrap();
    let obj = adapter(dir.path(), "sleep 5", 0.3);
    let start = std::time::Instant::now();
    let err = Objective::<f64>::evaluate(&obj, &[0.5, 0.5], 1).unwrap_err();
    assert!(start.elapsed().as_secs_f64() < 3.0);
    match err {
        EvalError::Timeout { id, .. } => assert!(id.starts_with("m1-")),
        other => panic!("{other:?}"),
    }
}

#[test]
fn adapter_reports_failures_with_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    let obj = adapter(dir.path(), "echo 'mesh failed' >&2\nexit 3", 10.0);
    match Objective::<f64>::evaluate(&obj, &[0.5, 0.5], 1).unwrap_err() {
        EvalError::ProcessFailed { stderr, .. } => assert!(stderr.contains("mesh failed")),
        other => panic!("{other:?}"),
    }
    let dir = tempfile::tempdir().unwrap();
    let obj = adapter(dir.path(), "echo 'not json' > \"$MFBO_RESPONSE\"", 10.0);
    assert!(matches!(
        Objective::<f64>::evaluate(&obj, &[0.5, 0.5], 1),
        Err(EvalError::MalformedResponse { .. })
    ));
    let dir = tempfile::tempdir().unwrap();
    let body = format!(
        "{READ_ID}\nprintf '{{\"schema_version\":1,\"id\":\"%s\",\"status\":\"error\",\"message\":\"diverged\"}}' \"$id\" > \"$MFBO_RESPONSE\""
    );
    let obj = adapter(dir.path(), &body, 10.0);
    match Objective::<f64>::evaluate(&obj, &[0.5, 0.5], 1).unwrap_err() {
        EvalError::Reported { message, .. } => assert_eq!(message, "diverged"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn repeated_requests_get_separate_directories() {
    let dir = tempfile::tempdir().unwrap();
    let body = format!(
        "{READ_ID}\nprintf '{{\"schema_version\":1,\"id\":\"%s\",\"status\":\"ok\",\"value\":1}}' \"$id\" > \"$MFBO_RESPONSE\""
    );
    let obj = adapter(dir.path(), &body, 10.0);
    for _ in 0..3 {
        let _: f64 = obj.evaluate(&[0.3, 0.3], 1).unwrap();
    }
    assert_eq!(fs::read_dir(dir.path().join("runs")).unwrap().count(), 3);
}
