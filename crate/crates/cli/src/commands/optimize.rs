use std::fs;
use std::path::Path;

use mfbo::acquisition::MaximizeOptions;
use mfbo::gp::FitOptions;
use mfbo::objectives::{CachedObjective, EvalCache, Objective};
use mfbo::optimizer::{
    build_initial_doe, run_bo, run_mfbo, HistoryWriter, InitialDoeOptions, LoopOptions, Recommendation, RunHistory,
    StopReason,
};
use mfbo::Error as CoreError;
use serde::Serialize;

use super::{cache_path, command_dir, HISTORY_FILE, OPTIMIZE_DIR};
use crate::error::{CliError, Result};
use crate::manifest::Manifest;
use crate::LoadedConfig;

pub const HISTORY_CSV: &str = "history.csv";
pub const RECOMMENDATION_FILE: &str = "recommendation.json";
pub const HISTORY_SCHEMA_VERSION: u32 = 1;

#[derive(Serialize)]
struct RecommendationFile<'a> {
    schema_version: u32,
    recommendation: &'a Recommendation<f64>,
    /// Recommended design in physical units, keyed like the parameters.
    x_physical: Vec<f64>,
    stop: StopReason,
    /// Optimization budget and spend, in the objective's cost units.
    budget: Option<f64>,
    spent: f64,
    evaluations: usize,
}

pub fn loop_options(cfg: &LoadedConfig, top_cost: f64) -> LoopOptions<f64> {
    let o = &cfg.config.optimize;
    LoopOptions {
        kernel: o.kernel,
        acquisition: o.acquisition,
        beta: o.beta,
        iterations: o.iterations,
        budget: o.budget.map(|b| b * top_cost),
        seed: cfg.config.seed,
        fit: FitOptions {
            restarts: o.restarts,
            ..Default::default()
        },
        maximize: MaximizeOptions {
            starts: o.maximize_starts,
            screen: o.maximize_screen.max(o.maximize_starts),
            ..Default::default()
        },
        promote: o.promote,
        ..Default::default()
    }
}

/// Runs (or resumes) the configured optimization. The history file gains one
/// line per evaluation as it happens; evaluations also go through the
/// experiment's cache, so an interrupted initial design is cheap to redo.
pub fn run(cfg: &LoadedConfig, out: &Path, resume: bool) -> Result<()> {
    let raw = cfg.objective()?;
    let spec = raw.spec().clone();
    let cache_file = cache_path(cfg, out);
    if let Some(d) = cache_file.parent() {
        fs::create_dir_all(d)?;
    }
    let objective = CachedObjective::new(raw, EvalCache::open(&cache_file)?);
    let o = &cfg.config.optimize;
    let dir = command_dir(out, OPTIMIZE_DIR)?;
    let history_path = dir.join(HISTORY_FILE);

    let history = if resume && history_path.exists() {
        let h = RunHistory::<f64>::read_jsonl(&history_path, spec.sense, spec.costs.clone())?;
        log::info!("resuming from {} records", h.len());
        h
    } else {
        if resume {
            log::info!("no history at {}; starting fresh", history_path.display());
        }
        let doe_opts = InitialDoeOptions {
            budget: o.initial_budget,
            multi_fidelity: o.multi_fidelity(),
            hf_share: o.hf_share,
            seed: cfg.config.seed,
        };
        let h = build_initial_doe(&objective, &doe_opts).map_err(|e| match e {
            CoreError::InsufficientData(m) => CliError::Evaluation(m),
            e => e.into(),
        })?;
        h.write_jsonl(&history_path)?;
        h
    };

    let opts = loop_options(cfg, spec.costs[spec.costs.len() - 1]);
    let mut writer = HistoryWriter::append(&history_path)?;
    let mut observer = |r: &mfbo::EvalRecord| writer.write(r);
    let result = if o.multi_fidelity() {
        run_mfbo(&objective, history, &opts, &mut observer)
    } else {
        run_bo(&objective, history, &opts, &mut observer)
    };
    let outcome = match result {
        Ok(o) => o,
        Err(aborted) => {
            aborted.history.write_csv(&dir.join(HISTORY_CSV))?;
            return Err(aborted.source.into());
        }
    };
    outcome.history.write_csv(&dir.join(HISTORY_CSV))?;
    let rec = &outcome.recommendation;
    let file = RecommendationFile {
        schema_version: HISTORY_SCHEMA_VERSION,
        recommendation: rec,
        x_physical: spec.bounds.scale_point(&rec.x)?,
        stop: outcome.stop,
        budget: opts.budget,
        spent: outcome.ledger.spent(),
        evaluations: outcome.ledger.evaluations(),
    };
    fs::write(dir.join(RECOMMENDATION_FILE), serde_json::to_string_pretty(&file)? + "\n")?;

    let mut man = Manifest::new("optimize", cfg.config.seed, Some(spec.clone()));
    man.artifact(HISTORY_FILE, "history-jsonl", HISTORY_SCHEMA_VERSION)
        .artifact(HISTORY_CSV, "history-csv", HISTORY_SCHEMA_VERSION)
        .artifact(RECOMMENDATION_FILE, "recommendation", HISTORY_SCHEMA_VERSION)
        .detail("method", if o.multi_fidelity() { "mfbo" } else { "bo" })
        .detail("kernel", o.kernel)
        .detail("acquisition", o.acquisition)
        .detail("records", outcome.history.len())
        .detail("stop", outcome.stop);
    man.write(&dir, Some(&cfg.text))?;

    println!(
        "{} records, stopped on {:?}; best {} = {} at fidelity {} ({:?})",
        outcome.history.len(),
        outcome.stop,
        spec.name,
        rec.y,
        rec.fidelity,
        rec.rule
    );
    Ok(())
}
