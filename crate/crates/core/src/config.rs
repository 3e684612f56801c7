//! Run configuration: a JSON document validated key by key.
//!
//! ```json
//! {
//!   "gamma": {"kind": "poly", "coeffs": [-1.0], "B": 1.0},
//!   "g": 1.0, "L": 1.0,
//!   "grid": [128, 128], "tol": 1e-8, "seed": 7,
//!   "out": "runs/a",
//!   "params": {"q": 3.1}
//! }
//! ```
//!
//! Only `gamma` is required. `B` may be repeated at top level but must then
//! agree with the vorticity. `params` holds subcommand-specific values and
//! is checked by the subcommand that reads it; any key in it named `input`
//! or ending in `_file` must name an existing path.

use std::path::{Path, PathBuf};

use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::vorticity::VorticityFn;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub vorticity: VorticityFn,
    pub g: f64,
    pub b: f64,
    pub l: f64,
    pub nx: usize,
    pub ny: usize,
    pub tol: f64,
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub params: Map<String, Value>,
}

impl RunConfig {
    /// Defaults around a given vorticity.
    pub fn with_vorticity(vorticity: VorticityFn) -> Self {
        let b = vorticity.b();
        Self { vorticity, g: 1.0, b, l: 1.0, nx: 128, ny: 128, tol: 1e-8, seed: 0, out: None, params: Map::new() }
    }

    /// Numeric parameter `params.<key>`.
    pub fn param_f64(&self, key: &str) -> Result<Option<f64>> {
        match self.params.get(key) {
            None => Ok(None),
            Some(v) => v.as_f64().map(Some).ok_or_else(|| schema(&format!("params.{key}"), "expected a number")),
        }
    }

    pub fn param_usize(&self, key: &str) -> Result<Option<usize>> {
        match self.params.get(key) {
            None => Ok(None),
            Some(v) => v
                .as_u64()
                .map(|n| Some(n as usize))
                .ok_or_else(|| schema(&format!("params.{key}"), "expected a nonnegative integer")),
        }
    }

    pub fn param_str(&self, key: &str) -> Result<Option<&str>> {
        match self.params.get(key) {
            None => Ok(None),
            Some(v) => v.as_str().map(Some).ok_or_else(|| schema(&format!("params.{key}"), "expected a string")),
        }
    }

    /// Either a single number or an array of numbers.
    pub fn param_list(&self, key: &str) -> Result<Option<Vec<f64>>> {
        let path = format!("params.{key}");
        match self.params.get(key) {
            None => Ok(None),
            Some(Value::Number(n)) => Ok(Some(vec![n.as_f64().unwrap_or(f64::NAN)])),
            Some(Value::Array(a)) => a
                .iter()
                .enumerate()
                .map(|(i, v)| v.as_f64().ok_or_else(|| schema(&format!("{path}[{i}]"), "expected a number")))
                .collect::<Result<Vec<_>>>()
                .map(Some),
            Some(_) => Err(schema(&path, "expected a number or an array of numbers")),
        }
    }

    /// A vorticity-like object at `params.<key>`.
    pub fn param_vorticity(&self, key: &str) -> Result<Option<VorticityFn>> {
        match self.params.get(key) {
            None => Ok(None),
            Some(v) => vorticity_at(v, &format!("params.{key}")).map(Some),
        }
    }
}

fn schema(path: &str, message: &str) -> Error {
    Error::Schema { path: path.to_string(), message: message.to_string() }
}

fn vorticity_at(v: &Value, path: &str) -> Result<VorticityFn> {
    if !v.is_object() {
        return Err(schema(path, "expected an object"));
    }
    match serde_json::from_value::<VorticityFn>(v.clone()) {
        Ok(f) => Ok(f),
        Err(e) => {
            let msg = e.to_string();
            // structural problems are schema errors, violated invariants are not
            if msg.contains("missing field") || msg.contains("unknown") || msg.contains("invalid type") {
                Err(schema(path, &msg))
            } else {
                Err(Error::Validation(format!("{path}: {msg}")))
            }
        }
    }
}

fn positive(obj: &Map<String, Value>, key: &str, default: f64) -> Result<f64> {
    match obj.get(key) {
        None => Ok(default),
        Some(v) => {
            let x = v.as_f64().ok_or_else(|| schema(key, "expected a number"))?;
            if !(x > 0.0 && x.is_finite()) {
                return Err(Error::Validation(format!("{key} must be strictly positive, got {x}")));
            }
            Ok(x)
        }
    }
}

fn grid(v: &Value) -> Result<(usize, usize)> {
    let dim = |v: &Value, path: &str| -> Result<usize> {
        let n = v.as_u64().ok_or_else(|| schema(path, "expected a positive integer"))?;
        if n < 2 {
            return Err(Error::Validation(format!("{path} must be at least 2, got {n}")));
        }
        Ok(n as usize)
    };
    match v {
        Value::Array(a) if a.len() == 2 => Ok((dim(&a[0], "grid[0]")?, dim(&a[1], "grid[1]")?)),
        Value::Object(o) => {
            for k in o.keys() {
                if k != "nx" && k != "ny" {
                    return Err(schema(&format!("grid.{k}"), "unknown key"));
                }
            }
            let nx = o.get("nx").ok_or_else(|| schema("grid.nx", "missing"))?;
            let ny = o.get("ny").ok_or_else(|| schema("grid.ny", "missing"))?;
            Ok((dim(nx, "grid.nx")?, dim(ny, "grid.ny")?))
        }
        Value::String(s) => parse_grid(s),
        _ => Err(schema("grid", "expected [nx, ny], {\"nx\", \"ny\"} or \"NxM\"")),
    }
}

/// `"128x64"` to `(128, 64)`.
pub fn parse_grid(s: &str) -> Result<(usize, usize)> {
    let bad = || Error::Parse(format!("grid must look like NxM, got {s:?}"));
    let (a, b) = s.split_once(['x', 'X']).ok_or_else(bad)?;
    let nx: usize = a.trim().parse().map_err(|_| bad())?;
    let ny: usize = b.trim().parse().map_err(|_| bad())?;
    if nx < 2 || ny < 2 {
        return Err(Error::Validation(format!("grid {nx}x{ny} needs at least 2 points per direction")));
    }
    Ok((nx, ny))
}

pub fn check_tol(tol: f64) -> Result<f64> {
    if !(tol > 0.0 && tol < 1.0) {
        return Err(Error::Validation(format!("tol must lie in (0, 1), got {tol}")));
    }
    Ok(tol)
}

const KEYS: [&str; 10] = ["gamma", "g", "B", "L", "grid", "tol", "seed", "out", "params", "comment"];

/// Parse and validate a configuration document. Relative input paths are
/// resolved against `base` when given.
pub fn parse_config_in(text: &str, base: Option<&Path>) -> Result<RunConfig> {
    let doc: Value = serde_json::from_str(text).map_err(|e| Error::Parse(format!("config is not valid JSON: {e}")))?;
    let obj = doc.as_object().ok_or_else(|| schema("", "top level must be an object"))?;
    for k in obj.keys() {
        if !KEYS.contains(&k.as_str()) {
            return Err(schema(k, "unknown key"));
        }
    }
    let gamma = obj.get("gamma").ok_or_else(|| schema("gamma", "missing required key"))?;
    let vorticity = vorticity_at(gamma, "gamma")?;
    let mut cfg = RunConfig::with_vorticity(vorticity);
    cfg.g = positive(obj, "g", 1.0)?;
    cfg.l = positive(obj, "L", 1.0)?;
    let b = positive(obj, "B", cfg.vorticity.b())?;
    if (b - cfg.vorticity.b()).abs() > 1e-12 * b {
        return Err(Error::Validation(format!("B = {b} disagrees with gamma.B = {}", cfg.vorticity.b())));
    }
    cfg.b = b;
    if let Some(v) = obj.get("grid") {
        (cfg.nx, cfg.ny) = grid(v)?;
    }
    if let Some(v) = obj.get("tol") {
        cfg.tol = check_tol(v.as_f64().ok_or_else(|| schema("tol", "expected a number"))?)?;
    }
    if let Some(v) = obj.get("seed") {
        cfg.seed = v.as_u64().ok_or_else(|| schema("seed", "expected a nonnegative integer"))?;
    }
    if let Some(v) = obj.get("out") {
        cfg.out = Some(PathBuf::from(v.as_str().ok_or_else(|| schema("out", "expected a string"))?));
    }
    if let Some(v) = obj.get("params") {
        let p = v.as_object().ok_or_else(|| schema("params", "expected an object"))?;
        for (k, val) in p {
            if k == "input" || k.ends_with("_file") {
                let s = val.as_str().ok_or_else(|| schema(&format!("params.{k}"), "expected a path string"))?;
                let path = match base {
                    Some(dir) if Path::new(s).is_relative() => dir.join(s),
                    _ => PathBuf::from(s),
                };
                if !path.exists() {
                    return Err(Error::Validation(format!("params.{k}: {} does not exist", path.display())));
                }
                cfg.params.insert(k.clone(), Value::String(path.to_string_lossy().into_owned()));
            } else {
                cfg.params.insert(k.clone(), val.clone());
            }
        }
    }
    Ok(cfg)
}

pub fn parse_config(text: &str) -> Result<RunConfig> {
    parse_config_in(text, None)
}
