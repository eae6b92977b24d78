use std::fs;
use std::path::{Path, PathBuf};

use mfbo::objectives::ObjectiveSpec;
use mfbo::optimizer::{Phase, RunHistory};

use super::{HISTORY_FILE, OPTIMIZE_DIR};
use crate::error::{CliError, Result};
use crate::manifest::Manifest;
use crate::svg::{render, Series};
use crate::LoadedConfig;

pub const CURVES_FILE: &str = "curves.csv";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const PLOT_FILE: &str = "cumulative_best.svg";
pub const REPORT_SCHEMA_VERSION: u32 = 1;

struct Run {
    label: String,
    kernel: String,
    acquisition: String,
    spec: ObjectiveSpec,
    history: RunHistory<f64>,
}

/// Cumulative best at the highest fidelity against optimization cost, in
/// highest-fidelity equivalents. The initial design sits at cost 0.
fn curve(h: &RunHistory<f64>) -> Vec<(f64, f64)> {
    let top_cost = h.costs[h.costs.len() - 1];
    let mut cost = 0.0;
    let mut out = Vec::new();
    for (r, best) in h.records().iter().zip(h.cumulative_best(h.n_levels())) {
        if r.phase != Phase::Initial {
            cost += r.cost;
        }
        if let Some(b) = best {
            out.push((cost / top_cost, b));
        }
    }
    out
}

fn load(dir: &Path) -> Result<Run> {
    let dir = if dir.join(OPTIMIZE_DIR).join(HISTORY_FILE).exists() {
        dir.join(OPTIMIZE_DIR)
    } else {
        dir.to_path_buf()
    };
    if !dir.join(HISTORY_FILE).exists() {
        return Err(CliError::Config(format!("{} holds no optimization history", dir.display())));
    }
    let man = Manifest::read(&dir)
        .map_err(|e| CliError::Config(format!("{}: unreadable manifest: {e}", dir.display())))?;
    let spec = man
        .objective
        .ok_or_else(|| CliError::Config(format!("{}: manifest names no objective", dir.display())))?;
    let history = RunHistory::read_jsonl(&dir.join(HISTORY_FILE), spec.sense, spec.costs.clone())?;
    if history.best(history.n_levels()).is_none() {
        return Err(CliError::Config(format!("{}: no successful evaluation", dir.display())));
    }
    let detail = |k: &str| man.details.get(k).and_then(|v| v.as_str()).unwrap_or("").to_string();
    Ok(Run {
        label: dir.display().to_string(),
        kernel: detail("kernel"),
        acquisition: detail("acquisition"),
        spec,
        history,
    })
}

/// Merges optimize runs into a curve table, a summary table and a plot.
pub fn run(dirs: &[PathBuf], within_pct: f64, out: &Path, cfg: Option<&LoadedConfig>) -> Result<()> {
    if dirs.is_empty() {
        return Err(CliError::Config("no runs to report".into()));
    }
    if !(within_pct >= 0.0) {
        return Err(CliError::Config("--within must be non-negative".into()));
    }
    let runs = dirs.iter().map(|d| load(d)).collect::<Result<Vec<_>>>()?;
    let first = &runs[0].spec;
    for r in &runs[1..] {
        let s = &r.spec;
        if (&s.name, &s.version, s.sense, s.dim()) != (&first.name, &first.version, first.sense, first.dim()) {
            return Err(CliError::Config(format!(
                "incompatible objectives: `{}` v{} and `{}` v{}",
                first.name, first.version, s.name, s.version
            )));
        }
    }
    let sense = first.sense;
    let observed_best = runs
        .iter()
        .filter_map(|r| r.history.best(r.history.n_levels()).and_then(|b| b.value))
        .reduce(|a, b| if sense.better(b, a) { b } else { a })
        .expect("every run has a best value");
    let known = first.optimum.as_ref().map_or(observed_best, |o| o.value);
    let tol = within_pct / 100.0 * if known != 0.0 { known.abs() } else { 1.0 };

    fs::create_dir_all(out)?;
    let curves: Vec<Vec<(f64, f64)>> = runs.iter().map(|r| curve(&r.history)).collect();
    let mut w = csv::Writer::from_path(out.join(CURVES_FILE))?;
    w.write_record(["run", "acquisition", "kernel", "cost", "best"])?;
    for (r, c) in runs.iter().zip(&curves) {
        for (cost, best) in c {
            w.write_record([&r.label, &r.acquisition, &r.kernel, &cost.to_string(), &best.to_string()])?;
        }
    }
    w.flush()?;

    let within_col = format!("cost_within_{within_pct}pct");
    let mut w = csv::Writer::from_path(out.join(SUMMARY_FILE))?;
    w.write_record([
        "acquisition",
        "kernel",
        "best_value",
        "best_known",
        "hf_evaluations",
        "optimization_cost",
        within_col.as_str(),
        "run",
    ])?;
    for (r, c) in runs.iter().zip(&curves) {
        let top = r.history.n_levels();
        let best = r.history.best(top).and_then(|b| b.value).expect("checked on load");
        let hf = r.history.records().iter().filter(|x| x.fidelity == top && x.is_success()).count();
        let reached = c
            .iter()
            .find(|(_, b)| sense.canonical(known - *b) <= tol)
            .map_or(String::new(), |(cost, _)| cost.to_string());
        let total = c.last().map_or(0.0, |p| p.0);
        w.write_record([
            r.acquisition.as_str(),
            &r.kernel,
            &best.to_string(),
            &known.to_string(),
            &hf.to_string(),
            &total.to_string(),
            &reached,
            &r.label,
        ])?;
    }
    w.flush()?;

    let series: Vec<Series> = runs
        .iter()
        .zip(curves)
        .map(|(r, points)| Series {
            label: format!("{} {} ({})", r.acquisition, r.kernel, r.label),
            points,
        })
        .collect();
    fs::write(
        out.join(PLOT_FILE),
        render(&series, "optimization cost [HF equivalents]", &format!("best {}", first.name)),
    )?;

    let seed = cfg.map_or(0, |c| c.config.seed);
    let mut man = Manifest::new("report", seed, Some(first.clone()));
    man.artifact(CURVES_FILE, "curves-csv", REPORT_SCHEMA_VERSION)
        .artifact(SUMMARY_FILE, "summary-csv", REPORT_SCHEMA_VERSION)
        .artifact(PLOT_FILE, "svg", REPORT_SCHEMA_VERSION)
        .detail("runs", runs.iter().map(|r| r.label.clone()).collect::<Vec<_>>())
        .detail("within_pct", within_pct)
        .detail("best_known", known);
    man.write(out, cfg.map(|c| c.text.as_str()))?;
    println!("{} runs compared in {}", runs.len(), out.display());
    Ok(())
}
