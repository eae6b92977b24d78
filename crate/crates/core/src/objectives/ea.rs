use std::path::Path;

use thiserror::Error;

#[derive(Clone, Debug, Error, PartialEq)]
pub enum CurveError {
    #[error("curve needs at least two samples")]
    TooShort,
    #[error("curve must start at zero displacement, starts at {0}")]
    StartsAfterZero(f64),
    #[error("displacements must be strictly increasing (sample {0})")]
    NotIncreasing(usize),
    #[error("non-finite sample at index {0}")]
    NonFinite(usize),
    #[error("curve ends at {end} before the threshold {delta_max}")]
    EndsEarly { end: f64, delta_max: f64 },
    #[error("threshold displacement must be positive, got {0}")]
    BadThreshold(f64),
    #[error("reference absorption must be positive, got {0}")]
    BadReference(f64),
    #[error("curve file: {0}")]
    Read(String),
}

/// Sampled force–displacement response.
#[derive(Clone, Debug, PartialEq)]
pub struct ForceDisplacementCurve {
    displacement: Vec<f64>,
    force: Vec<f64>,
    /// Integration limit.
    pub delta_max: f64,
    /// Solid-reference absorption used for normalization.
    pub ea_s: f64,
}

impl ForceDisplacementCurve {
    pub fn new(displacement: Vec<f64>, force: Vec<f64>, delta_max: f64, ea_s: f64) -> Result<Self, CurveError> {
        if displacement.len() != force.len() || displacement.len() < 2 {
            return Err(CurveError::TooShort);
        }
        if let Some(i) = displacement
            .iter()
            .zip(&force)
            .position(|(x, p)| !x.is_finite() || !p.is_finite())
        {
            return Err(CurveError::NonFinite(i));
        }
        if displacement[0] != 0.0 {
            return Err(CurveError::StartsAfterZero(displacement[0]));
        }
        if let Some(i) = displacement.windows(2).position(|w| !(w[1] > w[0])) {
            return Err(CurveError::NotIncreasing(i + 1));
        }
        if !(delta_max > 0.0 && delta_max.is_finite()) {
            return Err(CurveError::BadThreshold(delta_max));
        }
        if !(ea_s > 0.0 && ea_s.is_finite()) {
            return Err(CurveError::BadReference(ea_s));
        }
        Ok(Self {
            displacement,
            force,
            delta_max,
            ea_s,
        })
    }

    pub fn displacement(&self) -> &[f64] {
        &self.displacement
    }

    pub fn force(&self) -> &[f64] {
        &self.force
    }
}

/// `(1/EA_s)·∫₀^δmax P dx` by the trapezoidal rule; the interval containing
/// `δ_max` is cut there by linear interpolation.
pub fn ea_normalized(curve: &ForceDisplacementCurve) -> Result<f64, CurveError> {
    let (x, p, d) = (&curve.displacement, &curve.force, curve.delta_max);
    let end = x[x.len() - 1];
    if end < d {
        return Err(CurveError::EndsEarly { end, delta_max: d });
    }
    let mut area = 0.0;
    for k in 1..x.len() {
        let (x0, x1, p0, p1) = (x[k - 1], x[k], p[k - 1], p[k]);
        if x1 <= d {
            area += 0.5 * (p0 + p1) * (x1 - x0);
            if x1 == d {
                break;
            }
        } else {
            let pd = p0 + (p1 - p0) * (d - x0) / (x1 - x0);
            area += 0.5 * (p0 + pd) * (d - x0);
            break;
        }
    }
    Ok(area / curve.ea_s)
}

/// Reads a two-column CSV (displacement, force) with a header row.
pub fn read_curve_csv(path: &Path) -> Result<(Vec<f64>, Vec<f64>), CurveError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CurveError::Read(e.to_string()))?;
    let headers = rdr.headers().map_err(|e| CurveError::Read(e.to_string()))?;
    if headers.len() != 2 || headers.iter().any(|h| h.parse::<f64>().is_ok()) {
        return Err(CurveError::Read("expected a header row with two columns".into()));
    }
    let mut xs = Vec::new();
    let mut ps = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| CurveError::Read(e.to_string()))?;
        let parse = |k: usize| -> Result<f64, CurveError> {
            rec.get(k)
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| CurveError::Read(format!("row {}: bad number", i + 1)))
        };
        xs.push(parse(0)?);
        ps.push(parse(1)?);
    }
    Ok((xs, ps))
}
