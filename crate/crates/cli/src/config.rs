//! Run configuration: one JSON document plus `--section.key=value` overrides.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("config is not valid JSON: {0}")]
    Parse(String),
    #[error("bad override `{0}`: expected --section.key=value")]
    Override(String),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub u: f64,
    pub w: f64,
    pub lambda: f64,
    #[serde(rename = "L")]
    pub cells: usize,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self { u: 0.6, w: 0.0, lambda: 1.0, cells: 8 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    pub n_k: usize,
    pub t_max: f64,
    pub n_samples: usize,
}

impl Default for GridSection {
    fn default() -> Self {
        Self { n_k: 256, t_max: 20.0, n_samples: 2000 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitialSection {
    pub a: f64,
    pub b: f64,
    /// Replaces the upper occupation of every `C_k(0)`; only for exercising
    /// the unphysical-input path of `validate`.
    pub eigenvalue_override: Option<f64>,
}

impl Default for InitialSection {
    fn default() -> Self {
        Self { a: 1.0, b: 2.0, eigenvalue_override: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToleranceSection {
    pub ep_tol: f64,
    pub gap_tol: f64,
    pub engine_tol: f64,
}

impl Default for ToleranceSection {
    fn default() -> Self {
        Self { ep_tol: 1e-8, gap_tol: 1e-6, engine_tol: 1e-6 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub directory: PathBuf,
    pub format: Format,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { directory: PathBuf::from("."), format: Format::Csv }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub u_min: f64,
    pub u_max: f64,
    pub u_steps: usize,
    pub w_min: f64,
    pub w_max: f64,
    pub w_steps: usize,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self { u_min: 0.0, u_max: 3.0, u_steps: 61, w_min: 0.0, w_max: 1.0, w_steps: 41 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ValidateSection {
    pub times: Vec<f64>,
    pub ode_dt_max: f64,
}

impl Default for ValidateSection {
    fn default() -> Self {
        Self { times: vec![0.0, 0.25, 0.5, 1.0, 2.0, 4.0], ode_dt_max: 0.005 }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelSection,
    pub grid: GridSection,
    pub initial: InitialSection,
    pub tolerances: ToleranceSection,
    pub output: OutputSection,
    pub sweep: SweepSection,
    pub validate: ValidateSection,
}

/// Splits `--a.b=v` / `--a.b v` overrides out of the argument list.
pub fn split_overrides(args: Vec<String>) -> Result<(Vec<String>, Vec<(String, String)>), ConfigError> {
    let mut rest = Vec::new();
    let mut overrides = Vec::new();
    let mut it = args.into_iter();
    while let Some(arg) = it.next() {
        let Some(body) = arg.strip_prefix("--") else {
            rest.push(arg);
            continue;
        };
        let key = body.split('=').next().unwrap_or_default();
        if !key.contains('.') {
            rest.push(arg);
            continue;
        }
        match body.split_once('=') {
            Some((k, v)) => overrides.push((k.to_string(), v.to_string())),
            None => {
                let v = it.next().ok_or_else(|| ConfigError::Override(arg.clone()))?;
                overrides.push((key.to_string(), v));
            }
        }
    }
    Ok((rest, overrides))
}

fn set_path(root: &mut Value, path: &str, value: Value) -> Result<(), ConfigError> {
    let mut node = root;
    let parts: Vec<&str> = path.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(ConfigError::Override(path.to_string()));
    }
    for part in &parts[..parts.len() - 1] {
        let obj = node.as_object_mut().ok_or_else(|| ConfigError::Override(path.to_string()))?;
        node = obj.entry(part.to_string()).or_insert_with(|| Value::Object(Default::default()));
    }
    let obj = node.as_object_mut().ok_or_else(|| ConfigError::Override(path.to_string()))?;
    obj.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

fn parse_value(raw: &str) -> Value {
    serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()))
}

impl RunConfig {
    pub fn load(path: Option<&Path>, overrides: &[(String, String)], out: Option<&Path>) -> Result<Self, ConfigError> {
        let mut doc = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|source| ConfigError::Read { path: p.to_path_buf(), source })?;
                serde_json::from_str(&text).map_err(|e| ConfigError::Parse(e.to_string()))?
            }
            None => Value::Object(Default::default()),
        };
        if !doc.is_object() {
            return Err(ConfigError::Parse("top level must be an object".into()));
        }
        for (key, raw) in overrides {
            set_path(&mut doc, key, parse_value(raw))?;
        }
        if let Some(dir) = out {
            set_path(&mut doc, "output.directory", Value::String(dir.to_string_lossy().into_owned()))?;
        }
        let config: RunConfig = serde_json::from_value(doc).map_err(|e| ConfigError::Invalid(e.to_string()))?;
        config.check()?;
        Ok(config)
    }

    fn check(&self) -> Result<(), ConfigError> {
        let fail = |msg: String| Err(ConfigError::Invalid(msg));
        let m = &self.model;
        if ![m.u, m.w, m.lambda].iter().all(|x| x.is_finite()) || m.lambda < 0.0 {
            return fail(format!("model needs finite u, w and lambda >= 0 (got {m:?})"));
        }
        if m.cells < 2 {
            return fail(format!("model.L = {} < 2", m.cells));
        }
        let g = &self.grid;
        if g.n_k < 8 {
            return fail(format!("grid.n_k = {} < 8", g.n_k));
        }
        if g.n_samples < 16 {
            return fail(format!("grid.n_samples = {} < 16", g.n_samples));
        }
        if !(g.t_max > 0.0 && g.t_max.is_finite()) {
            return fail(format!("grid.t_max = {} must be positive", g.t_max));
        }
        let i = &self.initial;
        if !(i.a > 0.0 && i.b > 0.0 && i.a.is_finite() && i.b.is_finite()) {
            return fail(format!("initial needs a > 0 and b > 0 (got a={}, b={})", i.a, i.b));
        }
        let t = &self.tolerances;
        if ![t.ep_tol, t.gap_tol, t.engine_tol].iter().all(|x| *x > 0.0 && x.is_finite()) {
            return fail(format!("tolerances must be positive (got {t:?})"));
        }
        let v = &self.validate;
        if v.times.iter().any(|x| !(*x >= 0.0 && x.is_finite())) || !(v.ode_dt_max > 0.0) {
            return fail("validate.times must be non-negative and ode_dt_max positive".into());
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON of everything except the output directory.
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.output.directory = PathBuf::new();
        let text = serde_json::to_string(&canonical).expect("config serializes");
        hex::encode(Sha256::digest(text.as_bytes()))
    }
}
