//! Synthetic single- and two-fidelity benchmarks on the unit hypercube.
//!
//! | name        | D | M | sense    | low fidelity                                   |
//! |-------------|---|---|----------|------------------------------------------------|
//! | `forrester` | 1 | 2 | minimize | `0.5·f(x) + 10·(x − 0.5) − 5`                  |
//! | `hartmann3` | 3 | 2 | minimize | Hartmann-3 with weights `α + 3·(0.01, −0.01, −0.1, 0.1)` |
//! | `tunable`   | 2 | 2 | minimize | Branin blended with a smooth distortion to a target correlation |
//! | `ishigami`  | 3 | 1 | maximize | none                                           |

use std::f64::consts::PI;

use super::{check_request, EvalError, KnownOptimum, Objective, ObjectiveSpec, Sense};
use crate::acquisition::pearson;
use crate::error::{Error, Result};
use crate::sampling::{sobol_sequence, Bounds, ParameterBound};
use crate::scalar::Scalar;

/// Size of the Sobol' probe grid used for correlation metadata.
pub const PROBE_POINTS: usize = 4096;

/// LF/HF correlation of `forrester` over the probe grid.
const FORRESTER_RHO: f64 = 0.735_265_581_853_111;
/// LF/HF correlation of `hartmann3` over the probe grid.
const HARTMANN3_RHO: f64 = 0.996_706_198_084_955_3;

#[derive(Clone, Debug, PartialEq)]
enum Kind {
    Forrester,
    Hartmann3,
    Tunable(Blend),
    Ishigami,
}

/// `LF = μ_f + σ_f·((1 − w)·f̃ + w·g̃)` with `f̃`, `g̃` standardized over the
/// probe grid, so LF keeps the scale of HF.
#[derive(Clone, Copy, Debug, PartialEq)]
struct Blend {
    w: f64,
    f_mean: f64,
    f_std: f64,
    g_mean: f64,
    g_std: f64,
}

impl Blend {
    fn eval(&self, x: &[f64]) -> f64 {
        let f = (branin(x) - self.f_mean) / self.f_std;
        let g = (distortion(x) - self.g_mean) / self.g_std;
        self.f_mean + self.f_std * ((1.0 - self.w) * f + self.w * g)
    }
}

/// A registered synthetic objective.
#[derive(Clone, Debug, PartialEq)]
pub struct Benchmark {
    spec: ObjectiveSpec,
    kind: Kind,
}

pub fn benchmark_names() -> &'static [&'static str] {
    &["forrester", "hartmann3", "tunable", "ishigami"]
}

/// Looks up a benchmark by name. `tunable` uses a target correlation of 0.68
/// and cost ratio 0.11; see [`tunable_pair`] for other settings.
pub fn benchmark(name: &str) -> Result<Benchmark> {
    match name {
        "forrester" => {
            let mut spec = ObjectiveSpec::new("forrester", Bounds::unit(1), vec![0.1, 1.0], Sense::Minimize)?;
            spec.optimum = Some(KnownOptimum {
                x: vec![0.757_248_758_523_3],
                value: -6.020_740_055_767_082,
            });
            spec.correlation = Some(FORRESTER_RHO);
            Ok(Benchmark { spec, kind: Kind::Forrester })
        }
        "hartmann3" => {
            let mut spec = ObjectiveSpec::new("hartmann3", Bounds::unit(3), vec![0.11, 1.0], Sense::Minimize)?;
            spec.optimum = Some(KnownOptimum {
                x: vec![0.114_588_86, 0.555_648_89, 0.852_546_98],
                value: -3.862_779_787_332_659,
            });
            spec.correlation = Some(HARTMANN3_RHO);
            Ok(Benchmark { spec, kind: Kind::Hartmann3 })
        }
        "tunable" => tunable_pair(0.68, vec![0.11, 1.0]),
        "ishigami" => {
            let bounds = Bounds::new(
                (1..=3)
                    .map(|i| ParameterBound {
                        name: format!("x{i}"),
                        lower: -PI,
                        upper: PI,
                        unit: None,
                    })
                    .collect(),
            )?;
            let spec = ObjectiveSpec::new("ishigami", bounds, vec![1.0], Sense::Maximize)?;
            Ok(Benchmark { spec, kind: Kind::Ishigami })
        }
        other => Err(Error::UnknownObjective(other.to_string())),
    }
}

/// Two-fidelity Branin pair whose LF/HF probe-grid correlation is `target`.
/// The blend weight is found by bisection.
pub fn tunable_pair(target: f64, costs: Vec<f64>) -> Result<Benchmark> {
    if !(target > 0.0 && target < 1.0) {
        return Err(Error::InvalidArgument(format!("target correlation {target} not in (0, 1)")));
    }
    if costs.len() != 2 {
        return Err(Error::InvalidArgument("the tunable pair has exactly two fidelities".into()));
    }
    let grid = sobol_sequence::<f64>(2, PROBE_POINTS, 0)?;
    let f: Vec<f64> = grid.iter_rows().map(branin).collect();
    let g: Vec<f64> = grid.iter_rows().map(distortion).collect();
    let stats = |v: &[f64]| {
        let n = v.len() as f64;
        let m = v.iter().sum::<f64>() / n;
        let s = (v.iter().map(|a| (a - m) * (a - m)).sum::<f64>() / (n - 1.0)).sqrt();
        (m, s)
    };
    let (f_mean, f_std) = stats(&f);
    let (g_mean, g_std) = stats(&g);
    let blend = |w: f64| Blend { w, f_mean, f_std, g_mean, g_std };
    let rho = |w: f64| -> Result<f64> {
        let b = blend(w);
        let lf: Vec<f64> = grid.iter_rows().map(|x| b.eval(x)).collect();
        pearson(&lf, &f)
    };
    let (mut lo, mut hi) = (0.0, 1.0);
    if rho(hi)? > target {
        return Err(Error::InvalidArgument(format!("target correlation {target} is below the reachable range")));
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if rho(mid)? > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let w = 0.5 * (lo + hi);
    let mut spec = ObjectiveSpec::new("tunable", Bounds::unit(2), costs, Sense::Minimize)?;
    spec.version = format!("1+rho{target}");
    spec.optimum = Some(KnownOptimum {
        x: vec![(PI + 5.0) / 15.0, 2.275 / 15.0],
        value: 5.0 / (4.0 * PI),
    });
    spec.correlation = Some(rho(w)?);
    Ok(Benchmark {
        spec,
        kind: Kind::Tunable(blend(w)),
    })
}

impl Benchmark {
    /// Replaces the cost table; the number of fidelities is fixed.
    pub fn with_costs(mut self, costs: Vec<f64>) -> Result<Self> {
        if costs.len() != self.spec.fidelities() {
            return Err(Error::InvalidArgument(format!(
                "`{}` has {} fidelities but {} costs were given",
                self.spec.name,
                self.spec.fidelities(),
                costs.len()
            )));
        }
        self.spec.costs = costs;
        self.spec.validate()?;
        Ok(self)
    }

    /// Evaluation in `f64` without domain checks.
    pub fn eval_f64(&self, x: &[f64], m: usize) -> f64 {
        let top = m == self.spec.fidelities();
        match &self.kind {
            Kind::Forrester if top => forrester(x[0]),
            Kind::Forrester => 0.5 * forrester(x[0]) + 10.0 * (x[0] - 0.5) - 5.0,
            Kind::Hartmann3 if top => hartmann3(x, &HARTMANN_ALPHA),
            Kind::Hartmann3 => {
                let a: [f64; 4] = std::array::from_fn(|i| HARTMANN_ALPHA[i] + 3.0 * HARTMANN_SHIFT[i]);
                hartmann3(x, &a)
            }
            Kind::Tunable(_) if top => branin(x),
            Kind::Tunable(b) => b.eval(x),
            Kind::Ishigami => {
                let p: Vec<f64> = x.iter().map(|u| -PI + 2.0 * PI * u).collect();
                p[0].sin() + 7.0 * p[1].sin().powi(2) + 0.1 * p[2].powi(4) * p[0].sin()
            }
        }
    }
}

impl<T: Scalar> Objective<T> for Benchmark {
    fn spec(&self) -> &ObjectiveSpec {
        &self.spec
    }

    fn evaluate(&self, x: &[T], m: usize) -> Result<T, EvalError> {
        check_request(&self.spec, x, m)?;
        let x: Vec<f64> = x.iter().map(|v| v.as_f64()).collect();
        Ok(T::lit(self.eval_f64(&x, m)))
    }
}

/// Pearson correlation between the lowest and highest fidelity over the
/// first [`PROBE_POINTS`] Sobol' points.
pub fn probe_correlation(b: &Benchmark) -> Result<f64> {
    let m = b.spec.fidelities();
    if m < 2 {
        return Err(Error::InvalidArgument(format!("`{}` has a single fidelity", b.spec.name)));
    }
    let grid = sobol_sequence::<f64>(b.spec.dim(), PROBE_POINTS, 0)?;
    let lf: Vec<f64> = grid.iter_rows().map(|x| b.eval_f64(x, 1)).collect();
    let hf: Vec<f64> = grid.iter_rows().map(|x| b.eval_f64(x, m)).collect();
    pearson(&lf, &hf)
}

fn forrester(x: f64) -> f64 {
    (6.0 * x - 2.0).powi(2) * (12.0 * x - 4.0).sin()
}

const HARTMANN_ALPHA: [f64; 4] = [1.0, 1.2, 3.0, 3.2];
const HARTMANN_SHIFT: [f64; 4] = [0.01, -0.01, -0.1, 0.1];
const HARTMANN_A: [[f64; 3]; 4] = [[3.0, 10.0, 30.0], [0.1, 10.0, 35.0], [3.0, 10.0, 30.0], [0.1, 10.0, 35.0]];
const HARTMANN_P: [[f64; 3]; 4] = [
    [0.3689, 0.1170, 0.2673],
    [0.4699, 0.4387, 0.7470],
    [0.1091, 0.8732, 0.5547],
    [0.0381, 0.5743, 0.8828],
];

fn hartmann3(x: &[f64], alpha: &[f64; 4]) -> f64 {
    -(0..4)
        .map(|i| {
            let e: f64 = (0..3).map(|j| HARTMANN_A[i][j] * (x[j] - HARTMANN_P[i][j]).powi(2)).sum();
            alpha[i] * (-e).exp()
        })
        .sum::<f64>()
}

/// Branin on `[−5, 10] × [0, 15]`, mapped from the unit square.
fn branin(x: &[f64]) -> f64 {
    let (a, b) = (15.0 * x[0] - 5.0, 15.0 * x[1]);
    let t = b - 5.1 / (4.0 * PI * PI) * a * a + 5.0 / PI * a - 6.0;
    t * t + 10.0 * (1.0 - 1.0 / (8.0 * PI)) * a.cos() + 10.0
}

/// Smooth companion surface used to decorrelate the tunable LF.
fn distortion(x: &[f64]) -> f64 {
    (3.0 * PI * x[0]).sin() * (2.0 * PI * x[1]).cos() + x[1]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_name() {
        assert!(matches!(benchmark("nope"), Err(Error::UnknownObjective(_))));
    }

    #[test]
    fn top_fidelity_is_the_high_fidelity_function() {
        let b = benchmark("forrester").unwrap();
        assert_eq!(b.eval_f64(&[0.3], 2), forrester(0.3));
        let t = benchmark("tunable").unwrap();
        assert_eq!(t.eval_f64(&[0.3, 0.6], 2), branin(&[0.3, 0.6]));
    }

    #[test]
    fn domain_checks() {
        let b = benchmark("hartmann3").unwrap();
        assert_eq!(Objective::<f64>::evaluate(&b, &[0.1, 0.2], 1), Err(EvalError::OutOfDomain));
        assert_eq!(Objective::<f64>::evaluate(&b, &[0.1, 0.2, 1.5], 1), Err(EvalError::OutOfDomain));
        assert_eq!(
            Objective::<f64>::evaluate(&b, &[0.1, 0.2, 0.3], 3),
            Err(EvalError::BadFidelity { fidelity: 3, max: 2 })
        );
    }
}
