use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Running cost account of an optimization: spent `b`, budget `B` and the
/// per-fidelity cost `c(m)`.
///
/// An evaluation is admitted only if `b + c(m) ≤ B`, so `b` never exceeds `B`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BudgetLedger {
    budget: f64,
    costs: Vec<f64>,
    spent: f64,
    evaluations: usize,
}

impl BudgetLedger {
    /// `costs[m - 1]` is `c(m)`. An infinite budget is allowed.
    pub fn new(budget: f64, costs: Vec<f64>) -> Result<Self> {
        if !(budget > 0.0) {
            return Err(Error::InvalidArgument(format!("budget must be positive, got {budget}")));
        }
        if costs.is_empty() || costs.iter().any(|&c| !(c > 0.0 && c.is_finite())) {
            return Err(Error::InvalidArgument("costs must be positive and finite".into()));
        }
        Ok(Self {
            budget,
            costs,
            spent: 0.0,
            evaluations: 0,
        })
    }

    pub fn budget(&self) -> f64 {
        self.budget
    }

    pub fn spent(&self) -> f64 {
        self.spent
    }

    pub fn remaining(&self) -> f64 {
        self.budget - self.spent
    }

    pub fn evaluations(&self) -> usize {
        self.evaluations
    }

    pub fn n_levels(&self) -> usize {
        self.costs.len()
    }

    /// `c(m)`, 1-based.
    pub fn cost(&self, m: usize) -> f64 {
        self.costs[m - 1]
    }

    pub fn can_afford(&self, m: usize) -> bool {
        self.spent + self.cost(m) <= self.budget
    }

    /// True while at least one fidelity is still affordable.
    pub fn any_affordable(&self) -> bool {
        (1..=self.n_levels()).any(|m| self.can_afford(m))
    }

    /// Books one evaluation at fidelity `m` and returns its cost.
    pub fn charge(&mut self, m: usize) -> Result<f64> {
        if !self.can_afford(m) {
            return Err(Error::InvalidArgument(format!(
                "fidelity {m} costs {} but only {} of the budget remains",
                self.cost(m),
                self.remaining()
            )));
        }
        let c = self.cost(m);
        self.spent += c;
        self.evaluations += 1;
        Ok(c)
    }
}
