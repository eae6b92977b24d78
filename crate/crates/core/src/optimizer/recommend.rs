use serde::{Deserialize, Serialize};

use super::history::{Phase, RunHistory};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Which recommendation rule produced the result.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RecommendationRule {
    /// Single fidelity: best observed value.
    BestObserved,
    /// Best highest-fidelity value; no lower-fidelity incumbent needed a check.
    HighFidelityObserved,
    /// Lower-fidelity incumbents were evaluated at the highest fidelity first.
    Promoted,
    /// Some incumbent could not be checked within the budget; only
    /// highest-fidelity records were considered.
    NoHeadroom,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Recommendation<T> {
    pub x: Vec<T>,
    pub y: T,
    pub fidelity: usize,
    pub iteration: usize,
    pub phase: Phase,
    /// Position of the cited record in the history.
    pub record: usize,
    pub rule: RecommendationRule,
}

/// Best successful highest-fidelity record; ties go to the earliest one.
pub fn recommend<T: Scalar>(history: &RunHistory<T>) -> Result<Recommendation<T>> {
    let top = history.n_levels();
    let idx = history.best_index(top).ok_or(Error::EmptyHistory)?;
    let r = &history.records()[idx];
    let single = history.records().iter().all(|r| r.fidelity == top);
    Ok(Recommendation {
        x: r.x.clone(),
        y: r.value.expect("best record is successful"),
        fidelity: top,
        iteration: r.iteration,
        phase: r.phase,
        record: idx,
        rule: if single {
            RecommendationRule::BestObserved
        } else {
            RecommendationRule::HighFidelityObserved
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::acquisition::Sense;

    #[test]
    fn single_point_and_ties() {
        let mut h = RunHistory::<f64>::new(Sense::Minimize, vec![1.0]);
        assert!(matches!(recommend(&h), Err(Error::EmptyHistory)));
        h.append(Phase::Initial, 0, vec![0.5], 1, Ok(2.0), 0.0, None);
        assert_eq!(recommend(&h).unwrap().x, vec![0.5]);
        h.append(Phase::Iteration, 1, vec![0.1], 1, Ok(1.0), 0.0, None);
        h.append(Phase::Iteration, 2, vec![0.2], 1, Ok(1.0), 0.0, None);
        let r = recommend(&h).unwrap();
        assert_eq!((r.iteration, r.record, r.y), (1, 1, 1.0));
        assert_eq!(r.rule, RecommendationRule::BestObserved);
    }

    #[test]
    fn cites_high_fidelity_even_when_lf_is_larger() {
        let mut h = RunHistory::<f64>::new(Sense::Maximize, vec![0.1, 1.0]);
        h.append(Phase::Initial, 0, vec![0.5], 1, Ok(100.0), 0.0, None);
        h.append(Phase::Initial, 0, vec![0.5], 2, Ok(1.0), 0.0, None);
        h.append(Phase::Initial, 0, vec![0.7], 2, Ok(2.0), 0.0, None);
        let r = recommend(&h).unwrap();
        assert_eq!((r.fidelity, r.y), (2, 2.0));
    }
}
