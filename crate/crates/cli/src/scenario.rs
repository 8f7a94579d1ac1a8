//! Scenario files: what to analyze, design or simulate, and where results go.

use std::path::{Path, PathBuf};

use normforge::designer::{DesignSpec, Problem};
use normforge::sim::{Behavior, DeviantPolicy, Flavor, InitialReputations, SimConfig, UploadCapacity};
use normforge::{NetworkEnv, ParamError, ProtocolParams};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

/// Invalid or incomplete scenario. `field` is a dotted path such as `env.eps`.
#[derive(Debug, Error)]
#[error("{message}")]
pub struct ConfigError {
    pub field: Option<String>,
    pub message: String,
}

impl ConfigError {
    pub fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        ConfigError {
            field: Some(field.into()),
            message: message.into(),
        }
    }

    pub fn to_json(&self) -> Value {
        serde_json::json!({
            "error": {
                "kind": "config",
                "field": self.field,
                "message": self.message,
            }
        })
    }
}

const ENV_FIELDS: [&str; 7] = ["r", "c", "eps", "lambda", "delta", "p_c", "p_d"];
const PARAM_FIELDS: [&str; 5] = ["L", "h_o", "m_o", "beta", "b"];

/// Attach a validation error to the scenario section that owns the field.
pub fn qualify(section: &str, err: &ParamError) -> ConfigError {
    let f = err.field();
    let path = if ENV_FIELDS.contains(&f) {
        format!("env.{f}")
    } else if PARAM_FIELDS.contains(&f) && section != "design" {
        format!("params.{f}")
    } else {
        format!("{section}.{f}")
    };
    ConfigError::new(path, err.to_string())
}

/// Norm parameters as written in a scenario. Omitted client thresholds
/// default to the uniform profile `m_o ≡ h_o`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsInput {
    #[serde(rename = "L")]
    pub l: u32,
    pub h_o: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m_o: Option<Vec<u32>>,
    #[serde(default)]
    pub beta: f64,
    pub b: u32,
}

impl ParamsInput {
    pub fn resolve(&self) -> ProtocolParams {
        let p = ProtocolParams::uniform(self.l, self.h_o, self.b).with_beta(self.beta);
        match &self.m_o {
            Some(m) => p.with_thresholds(m.clone()),
            None => p,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignInput {
    pub problem: Problem,
    #[serde(rename = "L")]
    pub l: u32,
    pub b_cap: u32,
    #[serde(default = "default_grid")]
    pub beta_grid: f64,
    #[serde(default = "default_grid")]
    pub pc_grid: f64,
    #[serde(default = "default_pc_range")]
    pub pc_range: (f64, f64),
    #[serde(default)]
    pub refine_beta: bool,
    #[serde(default)]
    pub literal_table3: bool,
}

fn default_grid() -> f64 {
    0.01
}

fn default_pc_range() -> (f64, f64) {
    (0.0, 1.0)
}

impl DesignInput {
    pub fn spec(&self, env: NetworkEnv) -> DesignSpec {
        let mut spec = DesignSpec::new(self.problem, self.l, self.b_cap, env)
            .with_beta_grid(self.beta_grid)
            .with_pc_grid(self.pc_grid)
            .with_pc_range(self.pc_range.0, self.pc_range.1);
        spec.refine_beta = self.refine_beta;
        spec.literal_table3 = self.literal_table3;
        spec
    }
}

/// What a sweep evaluates at each grid point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepTarget {
    Analyze,
    Solve,
}

/// One swept parameter: either an explicit list or `min..=max` by `step`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    pub param: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepInput {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<SweepTarget>,
    pub axes: Vec<Axis>,
}

/// Parameters that can be swept.
pub const SWEEP_PARAMS: [&str; 13] = [
    "r", "c", "c_over_r", "eps", "lambda", "delta", "p_c", "p_d", "L", "h_o", "b", "beta", "b_cap",
];
const INTEGER_PARAMS: [&str; 4] = ["L", "h_o", "b", "b_cap"];

impl Axis {
    pub fn points(&self, at: &str) -> Result<Vec<f64>, ConfigError> {
        if !SWEEP_PARAMS.contains(&self.param.as_str()) {
            return Err(ConfigError::new(
                format!("{at}.param"),
                format!("unknown sweep parameter `{}`; expected one of {}", self.param, SWEEP_PARAMS.join(", ")),
            ));
        }
        let values = match (&self.values, self.min, self.max, self.step) {
            (Some(v), None, None, None) => v.clone(),
            (None, Some(lo), Some(hi), Some(step)) => {
                if !(step > 0.0) {
                    return Err(ConfigError::new(format!("{at}.step"), "step must be positive"));
                }
                if !(hi >= lo) {
                    return Err(ConfigError::new(format!("{at}.max"), "max must not be below min"));
                }
                let n = ((hi - lo) / step + 1e-9).floor() as usize + 1;
                (0..n).map(|i| ((lo + i as f64 * step) * 1e12).round() / 1e12).collect()
            }
            _ => {
                return Err(ConfigError::new(
                    at.to_string(),
                    "give either `values` or all of `min`, `max` and `step`",
                ))
            }
        };
        if values.is_empty() {
            return Err(ConfigError::new(format!("{at}.values"), "axis has no points"));
        }
        if INTEGER_PARAMS.contains(&self.param.as_str()) {
            if let Some(v) = values.iter().find(|v| v.fract() != 0.0 || **v < 0.0) {
                return Err(ConfigError::new(
                    format!("{at}.values"),
                    format!("`{}` takes non-negative integers, got {v}", self.param),
                ));
            }
        }
        Ok(values)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimInput {
    pub n_peers: usize,
    pub n_periods: usize,
    #[serde(default)]
    pub seed: u64,
    /// Independent runs with seeds `seed, seed + 1, ...`.
    #[serde(default = "one")]
    pub replicas: u64,
    #[serde(default = "default_flavor")]
    pub flavor: Flavor,
    #[serde(default = "default_behavior")]
    pub behavior: Behavior,
    #[serde(default = "default_initial")]
    pub initial: InitialReputations,
    #[serde(default = "default_capacity")]
    pub capacity: UploadCapacity,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deviant: Option<DeviantPolicy>,
    #[serde(default)]
    pub window: usize,
    #[serde(default = "yes")]
    pub record_periods: bool,
    /// Compare the empirical reputation distribution with the analytic one.
    #[serde(default)]
    pub compare: bool,
}

fn one() -> u64 {
    1
}
fn yes() -> bool {
    true
}
fn default_flavor() -> Flavor {
    Flavor::SocialNorm
}
fn default_behavior() -> Behavior {
    Behavior::Compliant
}
fn default_initial() -> InitialReputations {
    InitialReputations::Zero
}
fn default_capacity() -> UploadCapacity {
    UploadCapacity::Matched
}

impl SimInput {
    pub fn config(&self, seed: u64, params: ProtocolParams, env: NetworkEnv) -> SimConfig {
        let mut cfg = SimConfig::new(self.n_peers, self.n_periods, seed, params, env);
        cfg.flavor = self.flavor;
        cfg.behavior = self.behavior;
        cfg.initial = self.initial;
        cfg.capacity = self.capacity;
        cfg.deviant = self.deviant;
        cfg.window = self.window;
        cfg.record_periods = self.record_periods;
        cfg
    }
}

/// Destinations for results; `-` is standard output.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputInput {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub json: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub env: NetworkEnv,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<ParamsInput>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub design: Option<DesignInput>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepInput>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sim: Option<SimInput>,
    #[serde(default)]
    pub output: OutputInput,
}

/// Command-line values that override the scenario file.
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub env: Vec<(&'static str, f64)>,
    pub params: Vec<(&'static str, Value)>,
    pub l: Option<u32>,
    pub design: Vec<(&'static str, Value)>,
    pub sim: Vec<(&'static str, Value)>,
    pub json: Option<PathBuf>,
    pub csv: Option<PathBuf>,
}

fn section<'a>(root: &'a mut Map<String, Value>, key: &str) -> Result<&'a mut Map<String, Value>, ConfigError> {
    root.entry(key.to_string())
        .or_insert_with(|| Value::Object(Map::new()))
        .as_object_mut()
        .ok_or_else(|| ConfigError::new(key, "expected an object"))
}

impl Scenario {
    /// Read a scenario file (if any), apply overrides and parse.
    pub fn load(path: Option<&Path>, overrides: &Overrides) -> Result<Scenario, ConfigError> {
        let mut root = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| ConfigError::new("scenario", format!("cannot read {}: {e}", p.display())))?;
                serde_json::from_str::<Value>(&text).map_err(|e| ConfigError {
                    field: None,
                    message: format!("malformed JSON in {}: {e}", p.display()),
                })?
            }
            None => Value::Object(Map::new()),
        };
        let obj = root
            .as_object_mut()
            .ok_or_else(|| ConfigError::new("scenario", "top level must be an object"))?;
        for (k, v) in &overrides.env {
            section(obj, "env")?.insert(k.to_string(), Value::from(*v));
        }
        for (k, v) in &overrides.params {
            section(obj, "params")?.insert(k.to_string(), v.clone());
        }
        for (k, v) in &overrides.design {
            section(obj, "design")?.insert(k.to_string(), v.clone());
        }
        if let Some(l) = overrides.l {
            let has_design = obj.contains_key("design");
            if obj.contains_key("params") || !has_design {
                section(obj, "params")?.insert("L".into(), l.into());
            }
            if has_design {
                section(obj, "design")?.insert("L".into(), l.into());
            }
        }
        // thresholds given in the file belong to the file's h_o and L
        let reshaped = overrides.params.iter().any(|(k, _)| *k == "h_o") || overrides.l.is_some();
        let explicit_m_o = overrides.params.iter().any(|(k, _)| *k == "m_o");
        if reshaped && !explicit_m_o {
            if let Some(Value::Object(p)) = obj.get_mut("params") {
                p.remove("m_o");
            }
        }
        for (k, v) in &overrides.sim {
            section(obj, "sim")?.insert(k.to_string(), v.clone());
        }
        let out = section(obj, "output")?;
        if let Some(p) = &overrides.json {
            out.insert("json".into(), Value::from(p.to_string_lossy().into_owned()));
        }
        if let Some(p) = &overrides.csv {
            out.insert("csv".into(), Value::from(p.to_string_lossy().into_owned()));
        }
        Self::from_value(root)
    }

    pub fn from_value(value: Value) -> Result<Scenario, ConfigError> {
        let scenario: Scenario = serde_path_to_error::deserialize(value).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner().to_string();
            // the path stops at the parent object when a key is missing
            let field = match inner.strip_prefix("missing field `").and_then(|s| s.split('`').next()) {
                Some(missing) if path == "." => missing.to_string(),
                Some(missing) => format!("{path}.{missing}"),
                None => path,
            };
            ConfigError::new(field, inner)
        })?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.env.validate().map_err(|e| qualify("env", &e))?;
        if let Some(p) = &self.params {
            p.resolve().validate().map_err(|e| qualify("params", &e))?;
        }
        if let Some(d) = &self.design {
            d.spec(self.env).validate().map_err(|e| qualify("design", &e))?;
        }
        if let Some(s) = &self.sweep {
            if s.axes.is_empty() {
                return Err(ConfigError::new("sweep.axes", "at least one axis is required"));
            }
            for (i, a) in s.axes.iter().enumerate() {
                a.points(&format!("sweep.axes[{i}]"))?;
            }
        }
        if let Some(s) = &self.sim {
            if s.replicas == 0 {
                return Err(ConfigError::new("sim.replicas", "must be at least 1"));
            }
            if let Some(p) = &self.params {
                s.config(s.seed, p.resolve(), self.env)
                    .validate()
                    .map_err(|e| qualify("sim", &e))?;
            }
        }
        Ok(())
    }

    /// Fill in defaults so the echoed scenario reloads to itself.
    pub fn resolved(&self) -> Scenario {
        let mut s = self.clone();
        if let Some(p) = &mut s.params {
            p.m_o = Some(p.resolve().m_o);
        }
        s
    }

    pub fn require_params(&self) -> Result<ProtocolParams, ConfigError> {
        self.params
            .as_ref()
            .map(ParamsInput::resolve)
            .ok_or_else(|| ConfigError::new("params", "this command needs concrete norm parameters"))
    }

    pub fn require_design(&self) -> Result<&DesignInput, ConfigError> {
        self.design
            .as_ref()
            .ok_or_else(|| ConfigError::new("design", "this command needs a design section"))
    }

    pub fn require_sim(&self) -> Result<&SimInput, ConfigError> {
        self.sim
            .as_ref()
            .ok_or_else(|| ConfigError::new("sim", "this command needs a sim section"))
    }

    /// Copy of the scenario with one swept parameter set to `v`.
    pub fn with_value(&self, param: &str, v: f64, at: &str) -> Result<Scenario, ConfigError> {
        let mut s = self.clone();
        let missing = |what: &str| ConfigError::new(format!("{at}.param"), format!("`{param}` needs a {what} section"));
        match param {
            "r" => s.env.r = v,
            "c" => s.env.c = v,
            "c_over_r" => s.env.c = v * s.env.r,
            "eps" => s.env.eps = v,
            "lambda" => s.env.lambda = v,
            "delta" => s.env.delta = v,
            "p_c" => s.env.p_c = v,
            "p_d" => s.env.p_d = v,
            "beta" => s.params.as_mut().ok_or_else(|| missing("params"))?.beta = v,
            "b" => s.params.as_mut().ok_or_else(|| missing("params"))?.b = v as u32,
            "h_o" => {
                let p = s.params.as_mut().ok_or_else(|| missing("params"))?;
                p.h_o = v as u32;
                p.m_o = None;
            }
            "L" => {
                if s.params.is_none() && s.design.is_none() {
                    return Err(missing("params or design"));
                }
                if let Some(p) = &mut s.params {
                    p.l = v as u32;
                    p.m_o = None;
                }
                if let Some(d) = &mut s.design {
                    d.l = v as u32;
                }
            }
            "b_cap" => s.design.as_mut().ok_or_else(|| missing("design"))?.b_cap = v as u32,
            _ => unreachable!("axis names are checked before evaluation"),
        }
        Ok(s)
    }
}
