//! Experiment configuration: parsing, `--set` overrides, preset defaults and validation.

use std::path::{Path, PathBuf};

use noiselab::lab::{MAX_RATE_QUBITS, MAX_SCALING_QUBITS, MAX_SEARCH_QUBITS, COR2Q_MAX_ETA};
use noiselab::noise::{KernelSpec, MAX_HAAR_QUBITS};
use noiselab::entanglement::{MAX_ENT_QUBITS, MAX_MAXENT_QUBITS};
use noiselab::lab::MAX_DNOISE_QUBITS;
use noiselab::{Caps, Circuit};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{CliError, Result};
use crate::presets::Preset;

/// Environment variable holding a partial caps object that overrides the config's caps.
pub const CAPS_ENV: &str = "NOISELAB_CAPS_JSON";

/// Hard ceilings on caps overrides.
pub const MAX_DENSE_CAP: usize = 14;
pub const MAX_SUPEROP_CAP: usize = 7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Factory {
    Bell,
    Ghz,
    Idle,
    Product,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum CircuitSpec {
    Factory(Factory),
    Inline(Circuit),
}

impl CircuitSpec {
    pub fn build(&self, n: usize) -> noiselab::Result<Circuit> {
        match self {
            CircuitSpec::Factory(Factory::Bell) => Ok(Circuit::bell()),
            CircuitSpec::Factory(Factory::Ghz) => Circuit::ghz(n),
            CircuitSpec::Factory(Factory::Idle) => Ok(Circuit::idle(n, n)),
            CircuitSpec::Factory(Factory::Product) => Circuit::product_rx(n, 0.7),
            CircuitSpec::Inline(c) => Ok(c.clone()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    /// `dep(p)` on every qubit, every cycle.
    #[default]
    Depolarizing,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    #[serde(rename = "type", default)]
    pub kind: NoiseKind,
    pub p: f64,
}

fn one() -> usize {
    1
}

/// A run description. Every field a preset uses is filled in by [`ExperimentConfig::resolve`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: String,
    /// Master seed; there is no clock-derived fallback.
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub circuit: Option<CircuitSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<NoiseSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel: Option<KernelSpec>,
    #[serde(default = "one")]
    pub trials: usize,
    /// Target expected error count.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s: Option<f64>,
    /// Optimizer restarts.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget: Option<usize>,
    #[serde(default)]
    pub caps: Caps,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

/// Fields a preset reads besides `experiment`, `seed`, `trials`, `caps` and `output_dir`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Field {
    N,
    Circuit,
    Noise,
    Kernel,
    Alpha,
    Eta,
    S,
    Budget,
}

impl Field {
    fn name(self) -> &'static str {
        match self {
            Field::N => "n",
            Field::Circuit => "circuit",
            Field::Noise => "noise",
            Field::Kernel => "kernel",
            Field::Alpha => "alpha",
            Field::Eta => "eta",
            Field::S => "s",
            Field::Budget => "budget",
        }
    }
}

impl ExperimentConfig {
    pub fn preset(&self) -> Result<Preset> {
        Preset::from_name(&self.experiment)
    }

    pub fn n(&self) -> usize {
        self.n.unwrap_or(0)
    }

    pub fn p(&self) -> f64 {
        self.noise.map(|s| s.p).unwrap_or(0.0)
    }

    pub fn kernel(&self) -> KernelSpec {
        self.kernel.unwrap_or(KernelSpec::Uniform)
    }

    pub fn budget(&self) -> usize {
        self.budget.unwrap_or(1)
    }

    /// Fills preset defaults for every unset field, then validates.
    pub fn resolve(mut self) -> Result<Self> {
        let preset = self.preset()?;
        let d = preset.defaults();
        let used = preset.fields();
        for (field, set) in [
            (Field::N, self.n.is_some()),
            (Field::Circuit, self.circuit.is_some()),
            (Field::Noise, self.noise.is_some()),
            (Field::Kernel, self.kernel.is_some()),
            (Field::Alpha, self.alpha.is_some()),
            (Field::Eta, self.eta.is_some()),
            (Field::S, self.s.is_some()),
            (Field::Budget, self.budget.is_some()),
        ] {
            if set && !used.contains(&field) {
                return Err(CliError::validation(field.name(), format!("not used by preset {}", preset.name())));
            }
        }
        self.n = self.n.or(d.n);
        self.circuit = self.circuit.or(d.circuit);
        self.noise = self.noise.or(d.noise);
        self.kernel = self.kernel.or(d.kernel);
        self.alpha = self.alpha.or(d.alpha);
        self.eta = self.eta.or(d.eta);
        self.s = self.s.or(d.s);
        self.budget = self.budget.or(d.budget);
        self.validate(preset)?;
        Ok(self)
    }

    fn validate(&self, preset: Preset) -> Result<()> {
        validate_caps(&self.caps)?;
        if self.trials == 0 {
            return Err(CliError::validation("trials", "must be at least 1"));
        }
        if let Some(noise) = self.noise {
            if !(0.0..=1.0).contains(&noise.p) {
                return Err(CliError::validation("noise.p", format!("probability {} outside [0, 1]", noise.p)));
            }
        }
        if let Some(k) = self.kernel {
            k.validate().map_err(|e| CliError::validation("kernel", e.to_string()))?;
        }
        if let Some(b) = self.budget {
            if b == 0 {
                return Err(CliError::validation("budget", "must be at least 1"));
            }
        }
        let n = self.n();
        let (min, cap, cap_name) = self.n_limits(preset);
        if n < min {
            return Err(CliError::validation("n", format!("{} needs at least {min} qubits", preset.name())));
        }
        if n > cap {
            return Err(CliError::validation("n", format!("{n} qubits exceeds the {cap_name} cap of {cap}")));
        }
        if let Some(spec) = &self.circuit {
            let c = spec.build(n).map_err(|e| CliError::validation("circuit", e.to_string()))?;
            if c.n() != n {
                return Err(CliError::validation("circuit", format!("circuit acts on {} qubits but n = {n}", c.n())));
            }
            if c.depth() == 0 {
                return Err(CliError::validation("circuit", "circuit has no cycles"));
            }
            if preset == Preset::RateScaling && !matches!(spec, CircuitSpec::Factory(Factory::Ghz | Factory::Idle)) {
                return Err(CliError::validation("circuit", "rate-scaling needs the ghz or idle factory"));
            }
        }
        if let Some(alpha) = self.alpha {
            let top = 0.75 * n as f64;
            if !(alpha > 0.0 && alpha < top) {
                return Err(CliError::validation("alpha", format!("{alpha} outside (0, {top})")));
            }
        }
        if let Some(eta) = self.eta {
            if !(eta > 0.0 && eta <= COR2Q_MAX_ETA) {
                return Err(CliError::validation("eta", format!("{eta} outside (0, {COR2Q_MAX_ETA}]")));
            }
        }
        if let Some(s) = self.s {
            if !(s > 0.0 && s <= 1.0) {
                return Err(CliError::validation("s", format!("{s} outside (0, 1]")));
            }
        }
        Ok(())
    }

    /// `(minimum n, cap, cap name)` for a preset under the configured caps.
    fn n_limits(&self, preset: Preset) -> (usize, usize, &'static str) {
        let superop = self.caps.superop_qubits;
        match preset {
            Preset::BellDetrimental | Preset::SmoothingCompare => (2, superop, "superop_qubits"),
            Preset::GhzSync => (2, superop, "superop_qubits"),
            Preset::HaarWeight => (1, MAX_HAAR_QUBITS, "conditioned Haar"),
            Preset::RateCompare => (2, MAX_RATE_QUBITS, "rate comparison"),
            Preset::RateScaling => (2, MAX_SCALING_QUBITS, "rate scaling"),
            Preset::Cor2qSearch => (2, MAX_SEARCH_QUBITS, "cor2q search"),
            Preset::MaxentEnt => (2, MAX_MAXENT_QUBITS, "max-entropy"),
            Preset::EmergentGhz => (3, MAX_ENT_QUBITS, "emergent entanglement"),
            Preset::DnoiseCheck => (1, MAX_DNOISE_QUBITS.min(superop), "D-noise"),
        }
    }

    /// Where outputs go when `--out` is absent.
    pub fn default_output_dir(&self) -> PathBuf {
        self.output_dir.clone().unwrap_or_else(|| PathBuf::from("runs").join(format!("{}-seed{}", self.experiment, self.seed)))
    }
}

fn validate_caps(caps: &Caps) -> Result<()> {
    if caps.dense_qubits == 0 || caps.dense_qubits > MAX_DENSE_CAP {
        return Err(CliError::validation("caps.dense_qubits", format!("must be in 1..={MAX_DENSE_CAP}")));
    }
    if caps.superop_qubits == 0 || caps.superop_qubits > MAX_SUPEROP_CAP.min(caps.dense_qubits) {
        return Err(CliError::validation(
            "caps.superop_qubits",
            format!("must be in 1..={} and at most dense_qubits", MAX_SUPEROP_CAP),
        ));
    }
    if caps.kraus_count < 4 {
        return Err(CliError::validation("caps.kraus_count", "must be at least 4"));
    }
    if caps.trajectory_bytes == 0 {
        return Err(CliError::validation("caps.trajectory_bytes", "must be positive"));
    }
    Ok(())
}

/// Applies `key=value`; dotted keys descend into objects, values parse as JSON or fall back to strings.
pub fn apply_override(root: &mut Value, assignment: &str) -> Result<()> {
    let (key, raw) = assignment.split_once('=').ok_or_else(|| CliError::BadOverride(assignment.to_string()))?;
    let key = key.trim();
    if key.is_empty() || key.split('.').any(str::is_empty) {
        return Err(CliError::BadOverride(assignment.to_string()));
    }
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut node = root;
    let parts: Vec<&str> = key.split('.').collect();
    for (depth, part) in parts.iter().enumerate() {
        if !node.is_object() {
            *node = Value::Object(Map::new());
        }
        let map = node.as_object_mut().expect("object ensured above");
        if depth + 1 == parts.len() {
            map.insert(part.to_string(), value);
            return Ok(());
        }
        node = map.entry(part.to_string()).or_insert_with(|| Value::Object(Map::new()));
    }
    Ok(())
}

fn merge_caps_env(root: &mut Value) -> Result<()> {
    let Ok(raw) = std::env::var(CAPS_ENV) else { return Ok(()) };
    let overlay: Value = serde_json::from_str(&raw).map_err(|e| CliError::validation(CAPS_ENV, e.to_string()))?;
    let Value::Object(overlay) = overlay else {
        return Err(CliError::validation(CAPS_ENV, "expected a JSON object"));
    };
    let Value::Object(map) = root else { return Ok(()) };
    let caps = map.entry("caps").or_insert_with(|| Value::Object(Map::new()));
    let Value::Object(caps) = caps else {
        return Err(CliError::validation("caps", "expected an object"));
    };
    caps.extend(overlay);
    Ok(())
}

/// Deserializes with field paths in errors, then resolves preset defaults.
pub fn config_from_value(mut value: Value) -> Result<ExperimentConfig> {
    if !value.is_object() {
        return Err(CliError::validation("$", "config must be a JSON object"));
    }
    if let Some(name) = value.get("experiment").and_then(Value::as_str) {
        Preset::from_name(name)?;
    }
    merge_caps_env(&mut value)?;
    let cfg: ExperimentConfig = serde_path_to_error::deserialize(value).map_err(|e| {
        let path = e.path().to_string();
        let message = e.inner().to_string();
        let field = if path == "." { missing_field(&message).unwrap_or(path) } else { path };
        CliError::Validation { field, message }
    })?;
    cfg.resolve()
}

fn missing_field(message: &str) -> Option<String> {
    let rest = message.strip_prefix("missing field `")?;
    Some(rest.split('`').next()?.to_string())
}

pub fn read_config_value(path: &Path) -> Result<Value> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Parse { path: path.display().to_string(), message: e.to_string() })
}

/// Reads, validates and completes a JSON config. Unknown keys are rejected.
pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    config_from_value(read_config_value(path)?)
}

/// Config for a preset name or a JSON file, with `--seed` and `--set` applied.
pub fn config_for_target(target: &str, seed: Option<u64>, overrides: &[String]) -> Result<ExperimentConfig> {
    let path = Path::new(target);
    let mut value = if target.ends_with(".json") || path.is_file() {
        read_config_value(path)?
    } else {
        serde_json::to_value(Preset::from_name(target)?.default_config())?
    };
    if let Some(seed) = seed {
        apply_override(&mut value, &format!("seed={seed}"))?;
    }
    for o in overrides {
        apply_override(&mut value, o)?;
    }
    config_from_value(value)
}
