//! File-based request/response bridge to an external simulator.
//!
//! For every evaluation the adapter creates `<workdir>/<id>/`, writes
//! `request.json` there, runs the configured command inside that directory
//! and reads `response.json` back. Placeholders `{request}`, `{response}`,
//! `{dir}` and `{fidelity}` in the command are substituted, and the same
//! paths are exported as `MFBO_REQUEST`, `MFBO_RESPONSE` and `MFBO_DIR`.

use std::collections::{BTreeMap, HashMap};
use std::fs::{self, File};
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::ea::{ea_normalized, read_curve_csv, ForceDisplacementCurve};
use super::{check_request, EvalError, Objective, ObjectiveSpec};
use crate::scalar::Scalar;

pub const PROTOCOL_SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Request {
    pub schema_version: u32,
    pub id: String,
    /// Design in physical units, keyed by parameter name.
    pub design: BTreeMap<String, f64>,
    pub fidelity: usize,
    pub units: BTreeMap<String, String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Response {
    pub schema_version: u32,
    pub id: String,
    /// `"ok"` or `"error"`.
    pub status: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    /// Force–displacement CSV, relative paths resolve against the request directory.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub curve_path: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_seconds: Option<f64>,
    /// Overrides the configured reference absorption for this response.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ea_s: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExternalConfig {
    /// Program followed by its arguments.
    pub command: Vec<String>,
    pub workdir: PathBuf,
    pub timeout_seconds: f64,
    /// Integration limit applied to returned curves.
    #[serde(default)]
    pub delta_max: Option<f64>,
    /// Default reference absorption for returned curves.
    #[serde(default)]
    pub ea_s: Option<f64>,
}

pub struct ExternalObjective {
    spec: ObjectiveSpec,
    config: ExternalConfig,
    attempts: Mutex<HashMap<String, usize>>,
}

impl ExternalObjective {
    pub fn new(spec: ObjectiveSpec, config: ExternalConfig) -> crate::Result<Self> {
        if config.command.is_empty() {
            return Err(crate::Error::InvalidArgument("external command is empty".into()));
        }
        if !(config.timeout_seconds > 0.0) {
            return Err(crate::Error::InvalidArgument("timeout must be positive".into()));
        }
        Ok(Self {
            spec,
            config,
            attempts: Mutex::new(HashMap::new()),
        })
    }

    pub fn config(&self) -> &ExternalConfig {
        &self.config
    }

    /// Deterministic request id: design hash plus a per-design attempt count,
    /// so repeated or concurrent requests never share a directory.
    fn next_id(&self, x: &[f64], m: usize) -> String {
        let mut h = Sha256::new();
        h.update(super::cache_key(&self.spec, x, m).as_bytes());
        let base = hex::encode(&h.finalize()[..6]);
        let mut attempts = self.attempts.lock().expect("attempt lock");
        let n = attempts.entry(base.clone()).or_insert(0);
        *n += 1;
        format!("m{m}-{base}-{n}")
    }

    fn run(&self, x: &[f64], m: usize) -> Result<f64, EvalError> {
        let id = self.next_id(x, m);
        let io = |e: std::io::Error| EvalError::Other(format!("request {id}: {e}"));
        let dir = self.config.workdir.join(&id);
        fs::create_dir_all(&dir).map_err(io)?;
        let physical = self
            .spec
            .bounds
            .scale_point(x)
            .map_err(|e| EvalError::Other(e.to_string()))?;
        let params = self.spec.bounds.params();
        let request = Request {
            schema_version: PROTOCOL_SCHEMA_VERSION,
            id: id.clone(),
            design: params.iter().zip(&physical).map(|(p, &v)| (p.name.clone(), v)).collect(),
            fidelity: m,
            units: params
                .iter()
                .filter_map(|p| p.unit.clone().map(|u| (p.name.clone(), u)))
                .collect(),
        };
        let req_path = dir.join("request.json");
        let resp_path = dir.join("response.json");
        let json = serde_json::to_string_pretty(&request).map_err(|e| EvalError::Other(e.to_string()))?;
        fs::write(&req_path, json).map_err(io)?;

        let subst = |s: &str| {
            s.replace("{request}", &req_path.to_string_lossy())
                .replace("{response}", &resp_path.to_string_lossy())
                .replace("{dir}", &dir.to_string_lossy())
                .replace("{fidelity}", &m.to_string())
        };
        let stderr_path = dir.join("stderr.txt");
        let mut child = Command::new(subst(&self.config.command[0]))
            .args(self.config.command[1..].iter().map(|a| subst(a)))
            .current_dir(&dir)
            .env("MFBO_REQUEST", &req_path)
            .env("MFBO_RESPONSE", &resp_path)
            .env("MFBO_DIR", &dir)
            .stdin(Stdio::null())
            .stdout(File::create(dir.join("stdout.txt")).map_err(io)?)
            .stderr(File::create(&stderr_path).map_err(io)?)
            .spawn()
            .map_err(|e| EvalError::ProcessFailed {
                id: id.clone(),
                status: "spawn failure".into(),
                stderr: e.to_string(),
            })?;

        let deadline = Instant::now() + Duration::from_secs_f64(self.config.timeout_seconds);
        let status = loop {
            match child.try_wait().map_err(io)? {
                Some(status) => break status,
                None if Instant::now() >= deadline => {
                    let _ = child.kill();
                    let _ = child.wait();
                    return Err(EvalError::Timeout {
                        id,
                        seconds: self.config.timeout_seconds,
                    });
                }
                None => std::thread::sleep(Duration::from_millis(5)),
            }
        };
        if !status.success() {
            return Err(EvalError::ProcessFailed {
                id,
                status: status.to_string(),
                stderr: tail(&stderr_path),
            });
        }
        let malformed = |message: String| EvalError::MalformedResponse { id: id.clone(), message };
        let text = fs::read_to_string(&resp_path).map_err(|e| malformed(format!("reading response: {e}")))?;
        let resp: Response = serde_json::from_str(&text).map_err(|e| malformed(e.to_string()))?;
        if resp.id != id {
            return Err(malformed(format!("response id `{}` does not match", resp.id)));
        }
        match resp.status.as_str() {
            "ok" => {}
            "error" => {
                return Err(EvalError::Reported {
                    id,
                    message: resp.message.unwrap_or_default(),
                })
            }
            other => return Err(malformed(format!("unknown status `{other}`"))),
        }
        let value = match (&resp.curve_path, resp.value) {
            (Some(p), _) => {
                let path = resolve(&dir, p);
                let (xs, ps) = read_curve_csv(&path).map_err(|e| malformed(e.to_string()))?;
                let delta_max = self
                    .config
                    .delta_max
                    .ok_or_else(|| malformed("curve returned but no delta_max configured".into()))?;
                let ea_s = resp
                    .ea_s
                    .or(self.config.ea_s)
                    .ok_or_else(|| malformed("curve returned but no EA_s available".into()))?;
                let curve = ForceDisplacementCurve::new(xs, ps, delta_max, ea_s).map_err(|e| malformed(e.to_string()))?;
                ea_normalized(&curve).map_err(|e| malformed(e.to_string()))?
            }
            (None, Some(v)) => v,
            (None, None) => return Err(malformed("neither value nor curve_path given".into())),
        };
        if !value.is_finite() {
            return Err(malformed(format!("non-finite value {value}")));
        }
        Ok(value)
    }
}

fn resolve(dir: &Path, p: &str) -> PathBuf {
    let path = Path::new(p);
    if path.is_absolute() {
        path.to_path_buf()
    } else {
        dir.join(path)
    }
}

fn tail(path: &Path) -> String {
    let s = fs::read_to_string(path).unwrap_or_default();
    let s = s.trim_end();
    match s.char_indices().rev().nth(1999) {
        Some((i, _)) => s[i..].to_string(),
        None => s.to_string(),
    }
}

impl<T: Scalar> Objective<T> for ExternalObjective {
    fn spec(&self) -> &ObjectiveSpec {
        &self.spec
    }

    fn evaluate(&self, x: &[T], m: usize) -> Result<T, EvalError> {
        check_request(&self.spec, x, m)?;
        let xf: Vec<f64> = x.iter().map(|v| v.as_f64()).collect();
        self.run(&xf, m).map(T::lit)
    }
}
