use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;

use mfbo::objectives::{cache_key, CacheEntry, EvalCache, Objective};
use mfbo::sampling::{read_design_csv, SaltelliSet};

use super::{cache_path, command_dir, EVALUATE_DIR, RESPONSES_FILE, SALTELLI_DIR, SAMPLE_DIR};
use crate::error::{CliError, Result};
use crate::manifest::Manifest;
use crate::LoadedConfig;

pub const RESPONSES_SCHEMA_VERSION: u32 = 1;
pub const FAILURES_FILE: &str = "failures.csv";

/// One design to evaluate; `block` is empty for plain design files.
#[derive(Clone, Debug)]
pub struct Design {
    pub block: String,
    pub row: usize,
    pub x: Vec<f64>,
}

/// Reads a Saltelli directory (in evaluation order) or a design CSV.
pub fn load_designs(path: &Path, dim: usize) -> Result<Vec<Design>> {
    let designs: Vec<Design> = if path.is_dir() {
        let (_, set) = SaltelliSet::<f64>::read_dir(path)?;
        set.iter_designs()
            .map(|(b, row, x)| Design {
                block: b.label(),
                row,
                x: x.to_vec(),
            })
            .collect()
    } else {
        let (_, m) = read_design_csv::<f64>(path)?;
        m.iter_rows()
            .enumerate()
            .map(|(row, x)| Design {
                block: String::new(),
                row,
                x: x.to_vec(),
            })
            .collect()
    };
    if let Some(d) = designs.iter().find(|d| d.x.len() != dim) {
        return Err(CliError::Config(format!(
            "{} has designs of dimension {}, the objective has {dim}",
            path.display(),
            d.x.len()
        )));
    }
    Ok(designs)
}

/// Evaluates `tasks` with up to `jobs` threads. Cache hits are served
/// first; new values enter the cache in task order so that the cache file
/// does not depend on thread scheduling.
pub fn evaluate_all(
    objective: &dyn Objective<f64>,
    cache: &EvalCache,
    tasks: &[(Vec<f64>, usize)],
    jobs: usize,
) -> Vec<Result<f64, String>> {
    let spec = objective.spec();
    let mut results: Vec<Option<Result<f64, String>>> = tasks
        .iter()
        .map(|(x, m)| cache.get(&cache_key(spec, x, *m)).map(Ok))
        .collect();
    let misses: Vec<usize> = (0..tasks.len()).filter(|&i| results[i].is_none()).collect();
    if misses.is_empty() {
        return results.into_iter().map(Option::unwrap).collect();
    }
    let next = AtomicUsize::new(0);
    let (tx, rx) = mpsc::channel::<(usize, Result<f64, String>)>();
    std::thread::scope(|scope| {
        for _ in 0..jobs.clamp(1, misses.len()) {
            let tx = tx.clone();
            let (next, misses) = (&next, &misses);
            scope.spawn(move || loop {
                let k = next.fetch_add(1, Ordering::Relaxed);
                let Some(&i) = misses.get(k) else { break };
                let (x, m) = &tasks[i];
                let out = match objective.evaluate(x, *m) {
                    Ok(v) if v.is_finite() => Ok(v),
                    Ok(v) => Err(format!("non-finite value {v}")),
                    Err(e) => Err(e.to_string()),
                };
                if tx.send((k, out)).is_err() {
                    break;
                }
            });
        }
        drop(tx);
        // reorder buffer: persist results as soon as every earlier one is in
        let mut pending = BTreeMap::new();
        let mut flushed = 0;
        for (k, out) in rx {
            pending.insert(k, out);
            while let Some(out) = pending.remove(&flushed) {
                let i = misses[flushed];
                let (x, m) = &tasks[i];
                match &out {
                    Ok(v) => {
                        if let Err(e) = cache.insert(CacheEntry::new(spec, x, *m, *v)) {
                            log::warn!("could not persist cache entry: {e}");
                        }
                    }
                    Err(e) => log::warn!("design {i} at fidelity {m} failed: {e}"),
                }
                results[i] = Some(out);
                flushed += 1;
            }
        }
    });
    results
        .into_iter()
        .map(|r| r.unwrap_or_else(|| Err("evaluation did not complete".into())))
        .collect()
}

/// Writes `<out>/evaluate/responses.csv` (one row per design and fidelity)
/// and `failures.csv`.
pub fn run(cfg: &LoadedConfig, out: &Path, cli_jobs: Option<usize>) -> Result<()> {
    let objective = cfg.objective()?;
    let spec = objective.spec().clone();
    let e = &cfg.config.evaluate;
    let source = match &e.designs {
        Some(p) => cfg.resolve(p),
        None => out.join(SAMPLE_DIR).join(SALTELLI_DIR),
    };
    if !source.exists() {
        return Err(CliError::Config(format!(
            "design source {} does not exist (run `sample` first or set evaluate.designs)",
            source.display()
        )));
    }
    let designs = load_designs(&source, spec.dim())?;
    let fidelities = e.fidelities.clone().unwrap_or_else(|| vec![spec.fidelities()]);
    if let Some(&m) = fidelities.iter().find(|&&m| m == 0 || m > spec.fidelities()) {
        return Err(CliError::Config(format!(
            "fidelity {m} not in 1..={}",
            spec.fidelities()
        )));
    }
    let jobs = cli_jobs.or(e.jobs).unwrap_or(1);
    if jobs == 0 {
        return Err(CliError::Config("--jobs must be positive".into()));
    }
    let cache_file = cache_path(cfg, out);
    if let Some(dir) = cache_file.parent() {
        fs::create_dir_all(dir)?;
    }
    let cache = EvalCache::open(&cache_file)?;

    let tasks: Vec<(Vec<f64>, usize)> = designs
        .iter()
        .flat_map(|d| fidelities.iter().map(move |&m| (d.x.clone(), m)))
        .collect();
    let hits_before = cache.hits();
    let results = evaluate_all(objective.as_ref(), &cache, &tasks, jobs);
    let hits = cache.hits() - hits_before;

    let dir = command_dir(out, EVALUATE_DIR)?;
    let mut w = csv::Writer::from_path(dir.join(RESPONSES_FILE))?;
    w.write_record(["index", "block", "row", "fidelity", "status", "value"])?;
    let mut f = csv::Writer::from_path(dir.join(FAILURES_FILE))?;
    f.write_record(["index", "block", "row", "fidelity", "error"])?;
    let mut failures = 0;
    for (k, out) in results.iter().enumerate() {
        let d = &designs[k / fidelities.len()];
        let m = tasks[k].1.to_string();
        let (idx, row) = ((k / fidelities.len()).to_string(), d.row.to_string());
        match out {
            Ok(v) => w.write_record([&idx, &d.block, &row, &m, "ok", &v.to_string()])?,
            Err(msg) => {
                failures += 1;
                w.write_record([&idx, &d.block, &row, &m, "error", ""])?;
                f.write_record([&idx, &d.block, &row, &m, msg])?;
            }
        }
    }
    w.flush()?;
    f.flush()?;

    let mut man = Manifest::new("evaluate", cfg.config.seed, Some(spec));
    man.artifact(RESPONSES_FILE, "responses-csv", RESPONSES_SCHEMA_VERSION)
        .artifact(FAILURES_FILE, "failures-csv", RESPONSES_SCHEMA_VERSION)
        .detail("designs", designs.len())
        .detail("fidelities", &fidelities)
        .detail("evaluations", results.len())
        .detail("failures", failures);
    man.write(&dir, Some(&cfg.text))?;
    println!(
        "{} evaluations ({hits} from cache, {} invoked, {failures} failed) in {}",
        results.len(),
        results.len() - hits,
        dir.display()
    );
    if failures == results.len() {
        return Err(CliError::Evaluation(format!("all {failures} evaluations failed")));
    }
    Ok(())
}
