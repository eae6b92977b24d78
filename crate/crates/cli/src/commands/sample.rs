use std::path::Path;

use mfbo::sampling::{saltelli_sample, SALTELLI_SCHEMA_VERSION};

use super::{command_dir, SALTELLI_DIR, SAMPLE_DIR};
use crate::error::Result;
use crate::manifest::Manifest;
use crate::LoadedConfig;

/// Writes `<out>/sample/saltelli/` plus the command manifest.
pub fn run(cfg: &LoadedConfig, out: &Path) -> Result<()> {
    let objective = cfg.objective()?;
    let spec = objective.spec();
    let s = &cfg.config.sampling;
    let set = saltelli_sample::<f64>(spec.dim(), s.n_base, s.skip)?;
    let dir = command_dir(out, SAMPLE_DIR)?;
    let saltelli = set.write_dir(&dir.join(SALTELLI_DIR), &spec.bounds.names())?;

    let mut m = Manifest::new("sample", cfg.config.seed, Some(spec.clone()));
    for f in &saltelli.files {
        m.artifact(format!("{SALTELLI_DIR}/{f}"), "design-csv", SALTELLI_SCHEMA_VERSION);
    }
    m.artifact(format!("{SALTELLI_DIR}/manifest.json"), "saltelli-manifest", SALTELLI_SCHEMA_VERSION);
    m.detail("dim", spec.dim())
        .detail("n_base", s.n_base)
        .detail("skip", s.skip)
        .detail("total_designs", set.total_designs());
    m.write(&dir, Some(&cfg.text))?;
    println!("{} designs ({} base rows, dim {}) in {}", set.total_designs(), s.n_base, spec.dim(), dir.display());
    Ok(())
}
