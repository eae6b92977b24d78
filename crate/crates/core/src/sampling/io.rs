//! CSV/JSON persistence of designs and Saltelli collections.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sampling::{DesignMatrix, SaltelliBlock, SaltelliSet};
use crate::scalar::Scalar;

pub const SALTELLI_SCHEMA_VERSION: u32 = 1;

/// Writes one design per row under a header of parameter names.
pub fn write_design_csv<T: Scalar>(path: &Path, names: &[String], design: &DesignMatrix<T>) -> Result<()> {
    if names.len() != design.cols() {
        return Err(Error::DimensionMismatch {
            expected: design.cols(),
            got: names.len(),
        });
    }
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(names)?;
    for row in design.iter_rows() {
        w.write_record(row.iter().map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a design CSV written by [`write_design_csv`]; returns names and rows.
pub fn read_design_csv<T: Scalar>(path: &Path) -> Result<(Vec<String>, DesignMatrix<T>)> {
    let mut r = csv::Reader::from_path(path)?;
    let names: Vec<String> = r.headers()?.iter().map(str::to_owned).collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let row = rec
            .iter()
            .map(|s| parse_scalar::<T>(s))
            .collect::<Result<Vec<T>>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::InvalidArgument(format!("{} holds no designs", path.display())));
    }
    Ok((names, DesignMatrix::from_rows(&rows)?))
}

pub(crate) fn parse_scalar<T: Scalar>(s: &str) -> Result<T> {
    s.trim()
        .parse::<f64>()
        .map(T::lit)
        .map_err(|_| Error::InvalidArgument(format!("not a number: `{s}`")))
}

/// Self-description written next to the matrices of a Saltelli directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SaltelliManifest {
    pub schema_version: u32,
    pub kind: String,
    pub dim: usize,
    pub base_count: usize,
    pub skip: usize,
    pub total_designs: usize,
    pub parameter_names: Vec<String>,
    pub files: Vec<String>,
}

impl<T: Scalar> SaltelliSet<T> {
    /// Writes `A.csv`, `B.csv`, `AB_1.csv` … `AB_D.csv`, a stacked
    /// `designs.csv` (evaluation order) and `manifest.json`.
    pub fn write_dir(&self, dir: &Path, names: &[String]) -> Result<SaltelliManifest> {
        fs::create_dir_all(dir)?;
        let mut files = Vec::new();
        for blk in self.blocks() {
            let file = format!("{}.csv", blk.label());
            write_design_csv(&dir.join(&file), names, self.block(blk))?;
            files.push(file);
        }
        let mut w = csv::Writer::from_path(dir.join("designs.csv"))?;
        let mut header = vec!["block".to_string(), "row".to_string()];
        header.extend(names.iter().cloned());
        w.write_record(&header)?;
        for (blk, j, row) in self.iter_designs() {
            let mut rec = vec![blk.label(), j.to_string()];
            rec.extend(row.iter().map(|v| v.to_string()));
            w.write_record(&rec)?;
        }
        w.flush()?;
        files.push("designs.csv".into());
        let manifest = SaltelliManifest {
            schema_version: SALTELLI_SCHEMA_VERSION,
            kind: "saltelli".into(),
            dim: self.dim(),
            base_count: self.base_count(),
            skip: self.skip,
            total_designs: self.total_designs(),
            parameter_names: names.to_vec(),
            files,
        };
        fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)? + "\n")?;
        Ok(manifest)
    }

    /// Loads a directory written by [`SaltelliSet::write_dir`].
    pub fn read_dir(dir: &Path) -> Result<(SaltelliManifest, Self)> {
        let manifest: SaltelliManifest =
            serde_json::from_str(&fs::read_to_string(dir.join("manifest.json"))?)?;
        if manifest.schema_version != SALTELLI_SCHEMA_VERSION {
            return Err(Error::InvalidArgument(format!(
                "unsupported Saltelli schema version {}",
                manifest.schema_version
            )));
        }
        let (_, a) = read_design_csv::<T>(&dir.join("A.csv"))?;
        let (_, b) = read_design_csv::<T>(&dir.join("B.csv"))?;
        let mut ab = Vec::with_capacity(manifest.dim);
        for i in 0..manifest.dim {
            let (_, m) = read_design_csv::<T>(&dir.join(format!("{}.csv", SaltelliBlock::AB(i).label())))?;
            ab.push(m);
        }
        let set = Self { a, b, ab, skip: manifest.skip };
        if set.base_count() != manifest.base_count || set.ab.iter().any(|m| m.rows() != set.base_count()) {
            return Err(Error::InvalidArgument("Saltelli blocks disagree with the manifest".into()));
        }
        Ok((manifest, set))
    }
}
