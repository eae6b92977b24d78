use std::fs;
use std::path::{Path, PathBuf};

use mfbo::gp::Kernel;
use mfbo::objectives::{
    benchmark, benchmark_names, tunable_pair, Benchmark, ExternalConfig, ExternalObjective, Objective,
    ObjectiveSpec, Sense,
};
use mfbo::optimizer::AcquisitionKind;
use mfbo::sampling::{Bounds, ParameterBound};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

/// Overrides the output directory; no other setting reads the environment.
pub const OUT_ENV: &str = "MFBO_OUT";

/// One experiment, read from a TOML file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    pub output_dir: PathBuf,
    pub objective: ObjectiveConfig,
    #[serde(default)]
    pub sampling: SamplingConfig,
    #[serde(default)]
    pub evaluate: EvaluateConfig,
    #[serde(default)]
    pub analyze: AnalyzeConfig,
    #[serde(default)]
    pub optimize: OptimizeConfig,
}

/// Either a registered benchmark or an external simulator.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectiveConfig {
    pub benchmark: Option<String>,
    /// Target LF/HF correlation of the `tunable` benchmark.
    pub correlation: Option<f64>,
    /// Cost per fidelity, lowest first.
    pub costs: Option<Vec<f64>>,
    pub name: Option<String>,
    pub version: Option<String>,
    pub sense: Option<Sense>,
    #[serde(default)]
    pub parameters: Vec<ParameterBound<f64>>,
    pub external: Option<ExternalConfig>,
    /// Evaluation cache shared by `evaluate` and `optimize`.
    pub cache: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplingConfig {
    pub n_base: usize,
    pub skip: usize,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        Self { n_base: 1024, skip: 0 }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluateConfig {
    /// A design CSV or a Saltelli directory; defaults to the `sample` output.
    pub designs: Option<PathBuf>,
    /// Defaults to the highest fidelity.
    pub fidelities: Option<Vec<usize>>,
    pub jobs: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalyzeConfig {
    /// Defaults to the highest evaluated fidelity.
    pub fidelity: Option<usize>,
    pub n_boot: usize,
    pub level: f64,
    /// Base counts of the convergence scan; defaults to powers of two.
    pub grid: Option<Vec<usize>>,
}

impl Default for AnalyzeConfig {
    fn default() -> Self {
        Self {
            fidelity: None,
            n_boot: 1000,
            level: 0.95,
            grid: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizeConfig {
    pub kernel: Kernel,
    /// `logei`/`ucb` run single-fidelity BO, `vf-logei`/`vf-ucb` multi-fidelity BO.
    pub acquisition: AcquisitionKind,
    pub beta: f64,
    /// Initial design budget, in highest-fidelity equivalents.
    pub initial_budget: f64,
    pub hf_share: f64,
    /// Optimization budget, in highest-fidelity equivalents.
    pub budget: Option<f64>,
    pub iterations: usize,
    pub restarts: usize,
    pub maximize_starts: usize,
    pub maximize_screen: usize,
    pub promote: bool,
}

impl Default for OptimizeConfig {
    fn default() -> Self {
        Self {
            kernel: Kernel::Matern52,
            acquisition: AcquisitionKind::LogEi,
            beta: 2.0,
            initial_budget: 160.0,
            hf_share: 0.5,
            budget: Some(50.0),
            iterations: 50,
            restarts: 8,
            maximize_starts: 32,
            maximize_screen: 256,
            promote: true,
        }
    }
}

impl OptimizeConfig {
    pub fn multi_fidelity(&self) -> bool {
        matches!(self.acquisition, AcquisitionKind::VfLogEi | AcquisitionKind::VfUcb)
    }
}

/// A config together with its source text and location.
#[derive(Clone, Debug)]
pub struct LoadedConfig {
    pub config: ExperimentConfig,
    pub text: String,
    /// Directory that relative paths in the file resolve against.
    pub base: PathBuf,
}

impl LoadedConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let config: ExperimentConfig =
            toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let loaded = Self { config, text, base };
        loaded.validate()?;
        Ok(loaded)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base.join(p)
        }
    }

    /// `--out`, then `$MFBO_OUT`, then the config's `output_dir`.
    pub fn output_dir(&self, cli_out: Option<&Path>) -> PathBuf {
        if let Some(p) = cli_out {
            return p.to_path_buf();
        }
        if let Some(p) = std::env::var_os(OUT_ENV) {
            return PathBuf::from(p);
        }
        self.resolve(&self.config.output_dir)
    }

    fn validate(&self) -> Result<()> {
        let c = &self.config;
        let bad = |m: String| Err(CliError::Config(m));
        if c.sampling.n_base == 0 {
            return bad("sampling.n_base must be positive".into());
        }
        let o = &c.optimize;
        if !(o.initial_budget > 0.0) {
            return bad("optimize.initial_budget must be positive".into());
        }
        if let Some(b) = o.budget {
            if !(b > 0.0) {
                return bad("optimize.budget must be positive".into());
            }
        } else if o.multi_fidelity() {
            return bad(format!("optimize.budget is required with acquisition `{}`", o.acquisition));
        }
        if o.restarts == 0 || o.maximize_starts == 0 {
            return bad("optimize.restarts and optimize.maximize_starts must be positive".into());
        }
        if c.evaluate.jobs == Some(0) {
            return bad("evaluate.jobs must be positive".into());
        }
        // builds the objective once so unknown names fail up front
        self.objective().map(|_| ())
    }

    /// Builds the configured objective.
    pub fn objective(&self) -> Result<Box<dyn Objective<f64>>> {
        let o = &self.config.objective;
        match (&o.benchmark, &o.external) {
            (Some(name), None) => {
                if !o.parameters.is_empty() || o.sense.is_some() || o.name.is_some() {
                    return Err(CliError::Config(
                        "benchmarks define their own name, sense and parameters".into(),
                    ));
                }
                let b = self.benchmark(name)?;
                Ok(Box::new(b))
            }
            (None, Some(ext)) => {
                let name = o
                    .name
                    .clone()
                    .ok_or_else(|| CliError::Config("external objectives need objective.name".into()))?;
                let costs = o
                    .costs
                    .clone()
                    .ok_or_else(|| CliError::Config("external objectives need objective.costs".into()))?;
                let bounds = Bounds::new(o.parameters.clone())?;
                let mut spec = ObjectiveSpec::new(name, bounds, costs, o.sense.unwrap_or_default())?;
                if let Some(v) = &o.version {
                    spec.version = v.clone();
                }
                let mut ext = ext.clone();
                ext.workdir = self.resolve(&ext.workdir);
                if let Some(first) = ext.command.first_mut() {
                    // commands given as relative paths are relative to the config file
                    if first.contains('/') && Path::new(first.as_str()).is_relative() {
                        *first = self.resolve(Path::new(first.as_str())).to_string_lossy().into_owned();
                    }
                }
                Ok(Box::new(ExternalObjective::new(spec, ext)?))
            }
            _ => Err(CliError::Config(
                "objective needs exactly one of `benchmark` or `external`".into(),
            )),
        }
    }

    fn benchmark(&self, name: &str) -> Result<Benchmark> {
        let o = &self.config.objective;
        if !benchmark_names().contains(&name) {
            return Err(CliError::Config(format!(
                "unknown benchmark `{name}` (known: {})",
                benchmark_names().join(", ")
            )));
        }
        let b = match (name, o.correlation) {
            ("tunable", Some(rho)) => {
                let costs = o.costs.clone().unwrap_or_else(|| vec![0.11, 1.0]);
                return Ok(tunable_pair(rho, costs)?);
            }
            (_, Some(_)) => {
                return Err(CliError::Config("objective.correlation only applies to `tunable`".into()));
            }
            _ => benchmark(name)?,
        };
        match &o.costs {
            Some(c) => Ok(b.with_costs(c.clone())?),
            None => Ok(b),
        }
    }
}
