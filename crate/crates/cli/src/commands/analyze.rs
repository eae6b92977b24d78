use std::collections::HashMap;
use std::fs;
use std::path::Path;

use mfbo::sampling::{SaltelliBlock, SaltelliSet};
use mfbo::sensitivity::{bootstrap_ci, convergence_scan, write_convergence_csv, BootstrapOptions, SaltelliEvaluations};

use super::{command_dir, ANALYZE_DIR, EVALUATE_DIR, RESPONSES_FILE, SALTELLI_DIR, SAMPLE_DIR};
use crate::error::{CliError, Result};
use crate::manifest::Manifest;
use crate::LoadedConfig;

pub const REPORT_FILE: &str = "report.json";
pub const CONVERGENCE_FILE: &str = "convergence.csv";
pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Successful responses keyed by `(block, row, fidelity)`.
fn read_responses(path: &Path) -> Result<HashMap<(String, usize, usize), f64>> {
    let mut r = csv::Reader::from_path(path)?;
    let mut out = HashMap::new();
    for rec in r.records() {
        let rec = rec?;
        let field = |i: usize| rec.get(i).unwrap_or("");
        if field(4) != "ok" {
            continue;
        }
        let parse_err = || CliError::Config(format!("{}: malformed row {:?}", path.display(), rec));
        let row: usize = field(2).parse().map_err(|_| parse_err())?;
        let m: usize = field(3).parse().map_err(|_| parse_err())?;
        let v: f64 = field(5).parse().map_err(|_| parse_err())?;
        out.insert((field(1).to_string(), row, m), v);
    }
    Ok(out)
}

/// Matches responses to the Saltelli blocks; every design needs a value.
fn assemble(
    set: &SaltelliSet<f64>,
    responses: &HashMap<(String, usize, usize), f64>,
    m: usize,
) -> Result<SaltelliEvaluations<f64>> {
    let n = set.base_count();
    let column = |blk: SaltelliBlock| -> Result<Vec<f64>> {
        (0..n)
            .map(|j| {
                responses.get(&(blk.label(), j, m)).copied().ok_or_else(|| {
                    CliError::Config(format!(
                        "shape mismatch: no response for {} row {j} at fidelity {m}",
                        blk.label()
                    ))
                })
            })
            .collect()
    };
    let f_a = column(SaltelliBlock::A)?;
    let f_b = column(SaltelliBlock::B)?;
    let f_ab = (0..set.dim())
        .map(|i| column(SaltelliBlock::AB(i)))
        .collect::<Result<Vec<_>>>()?;
    Ok(SaltelliEvaluations::new(f_a, f_b, f_ab)?)
}

/// Powers of two below `n`, then `n`.
fn default_grid(n: usize) -> Vec<usize> {
    let mut g: Vec<usize> = (4..).map(|k| 1usize << k).take_while(|&p| p < n).collect();
    g.push(n);
    g
}

/// Writes `<out>/analyze/report.json` and the convergence table.
pub fn run(cfg: &LoadedConfig, out: &Path) -> Result<()> {
    let objective = cfg.objective()?;
    let spec = objective.spec().clone();
    let saltelli = match &cfg.config.evaluate.designs {
        Some(p) if cfg.resolve(p).is_dir() => cfg.resolve(p),
        _ => out.join(SAMPLE_DIR).join(SALTELLI_DIR),
    };
    let responses_path = out.join(EVALUATE_DIR).join(RESPONSES_FILE);
    for p in [&saltelli, &responses_path] {
        if !p.exists() {
            return Err(CliError::Config(format!("{} does not exist", p.display())));
        }
    }
    let (_, set) = SaltelliSet::<f64>::read_dir(&saltelli)?;
    if set.dim() != spec.dim() {
        return Err(CliError::Config(format!(
            "shape mismatch: designs have dimension {}, the objective has {}",
            set.dim(),
            spec.dim()
        )));
    }
    let responses = read_responses(&responses_path)?;
    let a = &cfg.config.analyze;
    let m = match a.fidelity {
        Some(m) => m,
        None => responses
            .keys()
            .map(|k| k.2)
            .max()
            .ok_or_else(|| CliError::Config("no successful responses".into()))?,
    };
    let ev = assemble(&set, &responses, m)?.with_name(spec.name.clone(), Some(m));
    let names = spec.bounds.names();
    let opts = BootstrapOptions {
        n_boot: a.n_boot,
        level: a.level,
        seed: cfg.config.seed,
    };
    let report = bootstrap_ci(&ev, &names, opts)?;
    let grid = a.grid.clone().unwrap_or_else(|| default_grid(ev.base_count()));
    let scan = convergence_scan(&ev, &names, &grid, opts)?;

    let dir = command_dir(out, ANALYZE_DIR)?;
    fs::write(dir.join(REPORT_FILE), serde_json::to_string_pretty(&report)? + "\n")?;
    write_convergence_csv(&dir.join(CONVERGENCE_FILE), &scan)?;
    let mut man = Manifest::new("analyze", cfg.config.seed, Some(spec));
    man.artifact(REPORT_FILE, "sensitivity-report", REPORT_SCHEMA_VERSION)
        .artifact(CONVERGENCE_FILE, "convergence-csv", REPORT_SCHEMA_VERSION)
        .detail("fidelity", m)
        .detail("n_base", ev.base_count())
        .detail("grid", &grid)
        .detail("n_boot", a.n_boot)
        .detail("level", a.level);
    man.write(&dir, Some(&cfg.text))?;

    println!("{:<16} {:>8} {:>8}", "parameter", "S1", "ST");
    for p in &report.parameters {
        println!("{:<16} {:>8.4} {:>8.4}", p.name, p.s1, p.st);
    }
    for (name, kind, v) in report.negative_estimates() {
        log::warn!("negative {kind} estimate for {name}: {v:.4} (sampling noise)");
    }
    Ok(())
}
