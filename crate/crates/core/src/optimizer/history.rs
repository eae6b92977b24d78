use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::acquisition::Sense;
use crate::error::{Error, Result};
use crate::gp::Doe;
use crate::mtgp::{MfDoe, MtParams};
use crate::sampling::DesignMatrix;
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    /// Initial design of experiments.
    Initial,
    /// One pass of the optimization loop.
    Iteration,
    /// High-fidelity check of a lower-fidelity incumbent before recommending.
    Promotion,
}

/// One evaluation, successful or not.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord<T> {
    pub phase: Phase,
    /// Loop iteration that issued the evaluation; 0 for the initial DoE.
    pub iteration: usize,
    pub x: Vec<T>,
    /// 1-based.
    pub fidelity: usize,
    pub value: Option<T>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    /// `c(m)` of this evaluation.
    pub cost: f64,
    /// Total cost of this and all earlier records, initial DoE included.
    pub cumulative_cost: f64,
    pub wall_seconds: f64,
    /// Surrogate hyperparameters behind the proposal.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<MtParams<T>>,
}

impl<T: Scalar> EvalRecord<T> {
    pub fn is_success(&self) -> bool {
        self.value.is_some()
    }
}

/// Rejects NaN and infinite objective values as failed evaluations.
pub(crate) fn finite<T: Scalar>(v: T) -> std::result::Result<T, String> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("objective returned non-finite value {v}"))
    }
}

/// Ordered evaluation log of one run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunHistory<T> {
    pub sense: Sense,
    /// `c(m)` of the objective, lowest fidelity first.
    pub costs: Vec<f64>,
    records: Vec<EvalRecord<T>>,
}

impl<T: Scalar> RunHistory<T> {
    pub fn new(sense: Sense, costs: Vec<f64>) -> Self {
        Self {
            sense,
            costs,
            records: Vec::new(),
        }
    }

    /// Wraps an already evaluated DoE at fidelity `m` as initial records.
    pub fn from_doe(doe: &Doe<T>, m: usize, sense: Sense, costs: Vec<f64>) -> Result<Self> {
        let mut h = Self::new(sense, costs);
        h.check_fidelity(m)?;
        for (x, &y) in doe.x.iter_rows().zip(&doe.y) {
            h.append(Phase::Initial, 0, x.to_vec(), m, Ok(y), 0.0, None);
        }
        Ok(h)
    }

    /// Initial records for every level of `mfdoe`, lowest fidelity first.
    pub fn from_mfdoe(mfdoe: &MfDoe<T>, sense: Sense, costs: Vec<f64>) -> Result<Self> {
        if mfdoe.n_levels() != costs.len() {
            return Err(Error::DimensionMismatch {
                expected: costs.len(),
                got: mfdoe.n_levels(),
            });
        }
        let mut h = Self::new(sense, costs);
        for m in 1..=mfdoe.n_levels() {
            let doe = mfdoe.level(m);
            for (x, &y) in doe.x.iter_rows().zip(&doe.y) {
                h.append(Phase::Initial, 0, x.to_vec(), m, Ok(y), 0.0, None);
            }
        }
        Ok(h)
    }

    fn check_fidelity(&self, m: usize) -> Result<()> {
        if m == 0 || m > self.costs.len() {
            return Err(Error::InvalidArgument(format!("fidelity {m} out of range 1..={}", self.costs.len())));
        }
        Ok(())
    }

    pub fn n_levels(&self) -> usize {
        self.costs.len()
    }

    pub fn records(&self) -> &[EvalRecord<T>] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last(&self) -> Option<&EvalRecord<T>> {
        self.records.last()
    }

    /// Appends an evaluation outcome and returns the stored record.
    #[allow(clippy::too_many_arguments)]
    pub fn append(
        &mut self,
        phase: Phase,
        iteration: usize,
        x: Vec<T>,
        m: usize,
        outcome: std::result::Result<T, String>,
        wall_seconds: f64,
        model: Option<MtParams<T>>,
    ) -> &EvalRecord<T> {
        let cost = self.costs[m - 1];
        let cumulative_cost = self.records.last().map_or(0.0, |r| r.cumulative_cost) + cost;
        let (value, error) = match outcome {
            Ok(v) => (Some(v), None),
            Err(e) => (None, Some(e)),
        };
        self.records.push(EvalRecord {
            phase,
            iteration,
            x,
            fidelity: m,
            value,
            error,
            cost,
            cumulative_cost,
            wall_seconds,
            model,
        });
        self.records.last().expect("just pushed")
    }

    /// Appends a record read back from storage, checking its bookkeeping.
    pub fn push_record(&mut self, record: EvalRecord<T>) -> Result<()> {
        self.check_fidelity(record.fidelity)?;
        if let Some(prev) = self.records.last() {
            if record.cumulative_cost < prev.cumulative_cost {
                return Err(Error::InvalidArgument("cumulative cost decreases in history".into()));
            }
        }
        self.records.push(record);
        Ok(())
    }

    /// Sum of `c(m)` over loop and promotion evaluations, in record order.
    pub fn optimization_cost(&self) -> f64 {
        self.records
            .iter()
            .filter(|r| r.phase != Phase::Initial)
            .fold(0.0, |acc, r| acc + r.cost)
    }

    /// Largest loop iteration recorded, 0 if the loop never ran.
    pub fn last_iteration(&self) -> usize {
        self.records
            .iter()
            .filter(|r| r.phase == Phase::Iteration)
            .map(|r| r.iteration)
            .max()
            .unwrap_or(0)
    }

    /// Successful data at fidelity `m`.
    pub fn doe(&self, m: usize) -> Result<Doe<T>> {
        let mut rows = Vec::new();
        let mut y = Vec::new();
        for r in self.records.iter().filter(|r| r.fidelity == m) {
            if let Some(v) = r.value {
                rows.push(r.x.clone());
                y.push(v);
            }
        }
        if rows.is_empty() {
            return Err(Error::InsufficientData(format!("no successful evaluation at fidelity {m}")));
        }
        Doe::new(DesignMatrix::from_rows(&rows)?, y)
    }

    /// Successful data at every fidelity.
    pub fn mfdoe(&self) -> Result<MfDoe<T>> {
        MfDoe::new((1..=self.n_levels()).map(|m| self.doe(m)).collect::<Result<_>>()?)
    }

    /// Index of the best successful record at fidelity `m`; ties go to the
    /// earliest record.
    pub fn best_index(&self, m: usize) -> Option<usize> {
        let mut best: Option<(usize, T)> = None;
        for (i, r) in self.records.iter().enumerate() {
            if r.fidelity != m {
                continue;
            }
            if let Some(v) = r.value {
                if best.map_or(true, |(_, b)| self.sense.better(v, b)) {
                    best = Some((i, v));
                }
            }
        }
        best.map(|(i, _)| i)
    }

    pub fn best(&self, m: usize) -> Option<&EvalRecord<T>> {
        self.best_index(m).map(|i| &self.records[i])
    }

    /// Best value at fidelity `m` seen up to and including each record.
    pub fn cumulative_best(&self, m: usize) -> Vec<Option<T>> {
        let mut best: Option<T> = None;
        self.records
            .iter()
            .map(|r| {
                if let (true, Some(v)) = (r.fidelity == m, r.value) {
                    if best.map_or(true, |b| self.sense.better(v, b)) {
                        best = Some(v);
                    }
                }
                best
            })
            .collect()
    }

    /// Writes every record as one JSON line.
    pub fn write_jsonl(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        for r in &self.records {
            serde_json::to_writer(&mut w, r)?;
            w.write_all(b"\n")?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a JSON-lines history written by [`write_jsonl`](Self::write_jsonl)
    /// or [`HistoryWriter`].
    pub fn read_jsonl(path: &Path, sense: Sense, costs: Vec<f64>) -> Result<Self> {
        let mut h = Self::new(sense, costs);
        for (k, line) in BufReader::new(File::open(path)?).lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: EvalRecord<T> = serde_json::from_str(&line)
                .map_err(|e| Error::InvalidArgument(format!("{}:{}: {e}", path.display(), k + 1)))?;
            h.push_record(rec)?;
        }
        Ok(h)
    }

    /// Plot-ready table: one row per evaluation with cost, value, fidelity
    /// and the running best at the highest fidelity.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let top = self.n_levels();
        let dim = self.records.first().map_or(0, |r| r.x.len());
        let mut w = csv::Writer::from_path(path)?;
        let mut header: Vec<String> = [
            "phase",
            "iteration",
            "fidelity",
            "cost",
            "cumulative_cost",
            "value",
            "best_hf",
            "status",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        header.extend((0..dim).map(|k| format!("x{k}")));
        w.write_record(&header)?;
        let best = self.cumulative_best(top);
        for (r, b) in self.records.iter().zip(best) {
            let phase = match r.phase {
                Phase::Initial => "initial",
                Phase::Iteration => "iteration",
                Phase::Promotion => "promotion",
            };
            let mut row = vec![
                phase.to_string(),
                r.iteration.to_string(),
                r.fidelity.to_string(),
                r.cost.to_string(),
                r.cumulative_cost.to_string(),
                r.value.map_or(String::new(), |v| v.to_string()),
                b.map_or(String::new(), |v| v.to_string()),
                if r.is_success() { "ok".into() } else { "failed".into() },
            ];
            row.extend(r.x.iter().map(|v| v.to_string()));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Appends records to a JSON-lines file as they arrive, flushing each one.
pub struct HistoryWriter {
    file: File,
}

impl HistoryWriter {
    /// Opens `path` for appending, creating it if needed.
    pub fn append(path: &Path) -> Result<Self> {
        Ok(Self {
            file: OpenOptions::new().create(true).append(true).open(path)?,
        })
    }

    pub fn write<T: Scalar>(&mut self, record: &EvalRecord<T>) -> Result<()> {
        let mut line = serde_json::to_vec(record)?;
        line.push(b'\n');
        self.file.write_all(&line)?;
        self.file.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn history() -> RunHistory<f64> {
        let mut h = RunHistory::new(Sense::Maximize, vec![0.25, 1.0]);
        h.append(Phase::Initial, 0, vec![0.1], 2, Ok(1.0), 0.0, None);
        h.append(Phase::Initial, 0, vec![0.2], 1, Ok(9.0), 0.0, None);
        h.append(Phase::Iteration, 1, vec![0.3], 2, Ok(3.0), 0.0, None);
        h.append(Phase::Iteration, 2, vec![0.4], 2, Err("boom".into()), 0.0, None);
        h.append(Phase::Iteration, 3, vec![0.5], 2, Ok(3.0), 0.0, None);
        h
    }

    #[test]
    fn bookkeeping() {
        let h = history();
        assert_eq!(h.records()[4].cumulative_cost, 0.25 + 4.0);
        assert_eq!(h.optimization_cost(), 3.0);
        assert_eq!(h.last_iteration(), 3);
        // the LF record is larger but the HF best is reported per fidelity
        assert_eq!(h.best_index(2), Some(2));
        assert_eq!(h.best_index(1), Some(1));
        assert_eq!(h.doe(2).unwrap().len(), 3);
        let cb: Vec<Option<f64>> = h.cumulative_best(2);
        assert_eq!(cb, vec![Some(1.0), Some(1.0), Some(3.0), Some(3.0), Some(3.0)]);
    }

    #[test]
    fn jsonl_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("h.jsonl");
        let mut h = history();
        h.append(Phase::Promotion, 3, vec![0.1 + 0.2], 2, Ok(1.0 / 3.0), 0.5, None);
        h.write_jsonl(&path).unwrap();
        let back = RunHistory::<f64>::read_jsonl(&path, Sense::Maximize, vec![0.25, 1.0]).unwrap();
        assert_eq!(back, h);
    }

    #[test]
    fn writer_appends() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("h.jsonl");
        let h = history();
        let mut w = HistoryWriter::append(&path).unwrap();
        for r in h.records() {
            w.write(r).unwrap();
        }
        let back = RunHistory::<f64>::read_jsonl(&path, Sense::Maximize, vec![0.25, 1.0]).unwrap();
        assert_eq!(back.records(), h.records());
    }
}
