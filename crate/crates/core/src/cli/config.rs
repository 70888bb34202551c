//! Command configs: JSON files, named presets and `--set key=value` overrides.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::Path;

use num_complex::Complex64;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use super::CliError;
use crate::exponent::Method;
use crate::io;
use crate::lattice2d::{initial_wavepacket, Drive2D, ScenarioConfig, ScenarioId};
use crate::model::DEFAULT_LEAK_THRESHOLD;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CommandKind {
    Spectrum,
    Bloch,
    Exponent,
    Sim2d,
    Sweep,
}

impl CommandKind {
    pub fn name(&self) -> &'static str {
        match self {
            CommandKind::Spectrum => "spectrum",
            CommandKind::Bloch => "bloch",
            CommandKind::Exponent => "exponent",
            CommandKind::Sim2d => "sim2d",
            CommandKind::Sweep => "sweep",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumConfig {
    #[serde(rename = "N", default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(rename = "N_list", default, skip_serializing_if = "Option::is_none")]
    pub n_list: Option<Vec<usize>>,
    #[serde(with = "io::complex")]
    pub kappa0: Complex64,
    pub omega0: f64,
    #[serde(default)]
    pub omega: f64,
    /// Time at which `κ(t)` is evaluated.
    #[serde(default)]
    pub t: f64,
    /// Central levels checked for the ladder; `N/5` rounded to odd when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ladder_window: Option<usize>,
}

impl SpectrumConfig {
    pub fn sizes(&self) -> Result<Vec<usize>, CliError> {
        match (&self.n, &self.n_list) {
            (Some(n), None) => Ok(vec![*n]),
            (None, Some(list)) if !list.is_empty() => Ok(list.clone()),
            (None, Some(_)) => Err(CliError::Validation("N_list: must not be empty".into())),
            (Some(_), Some(_)) => Err(CliError::Validation("give either N or N_list, not both".into())),
            (None, None) => Err(CliError::Validation("missing field `N` (or `N_list`)".into())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Engine {
    Analytic,
    Numeric,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlochConfig {
    #[serde(with = "io::complex")]
    pub kappa0: Complex64,
    #[serde(default)]
    pub omega: f64,
    pub omega0: f64,
    /// Initially occupied site.
    #[serde(default)]
    pub initial: i64,
    pub t_final: f64,
    /// Integrator step; `2π/(1000 ω0)` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    pub engine: Engine,
    /// Output times (inclusive grid for the analytic engine, approximate for the numeric one).
    #[serde(default = "default_samples")]
    pub samples: usize,
    /// Sites kept on each side of `initial`; derived from the spreading bound when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub half_width: Option<i64>,
    #[serde(default = "default_taylor_tol")]
    pub taylor_tol: f64,
    #[serde(default = "default_leak")]
    pub leak_threshold: f64,
    /// Also write complex amplitudes as paired `re_n, im_n` columns.
    #[serde(default)]
    pub amplitudes: bool,
}

fn default_samples() -> usize {
    201
}
fn default_taylor_tol() -> f64 {
    1e-13
}
fn default_leak() -> f64 {
    DEFAULT_LEAK_THRESHOLD
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExponentConfig {
    #[serde(with = "io::complex")]
    pub kappa0: Complex64,
    pub t_window: (f64, f64),
    #[serde(default)]
    pub method: MethodChoice,
    #[serde(default = "default_exponent_samples")]
    pub samples: usize,
}

fn default_exponent_samples() -> usize {
    91
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodChoice {
    #[default]
    Auto,
    Wavefront,
    Fwhm,
}

impl MethodChoice {
    pub fn resolve(&self, kappa0: Complex64) -> Method {
        match self {
            MethodChoice::Auto => Method::auto(kappa0),
            MethodChoice::Wavefront => Method::Wavefront,
            MethodChoice::Fwhm => Method::Fwhm,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScenarioSel {
    One(ScenarioId),
    Many(Vec<ScenarioId>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sim2dConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<ScenarioSel>,
    /// Explicit drive in units of J, instead of a named scenario.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<Drive2D>,
    /// `[columns along m, rows along n]`.
    #[serde(default = "default_size")]
    pub size: (usize, usize),
    #[serde(default = "default_snapshots")]
    pub snapshot_times: Vec<f64>,
    #[serde(default = "default_tau")]
    pub tau: f64,
    #[serde(default = "default_j")]
    pub j: f64,
    #[serde(default = "default_offset")]
    pub launch_offset: i64,
    #[serde(default = "default_stop")]
    pub stop_fraction: f64,
    #[serde(default = "default_krylov_tol")]
    pub krylov_tol: f64,
    #[serde(default = "default_width_fit")]
    pub width_fit: (f64, f64),
}

fn default_size() -> (usize, usize) {
    let d = ScenarioConfig::default();
    (d.m_sites, d.n_sites)
}
fn default_snapshots() -> Vec<f64> {
    ScenarioConfig::default().snapshot_times
}
fn default_tau() -> f64 {
    ScenarioConfig::default().tau
}
fn default_j() -> f64 {
    ScenarioConfig::default().j
}
fn default_offset() -> i64 {
    ScenarioConfig::default().launch_offset
}
fn default_stop() -> f64 {
    ScenarioConfig::default().stop_fraction
}
fn default_krylov_tol() -> f64 {
    ScenarioConfig::default().krylov_tol
}
fn default_width_fit() -> (f64, f64) {
    ScenarioConfig::default().width_fit
}

impl Sim2dConfig {
    pub fn scenario_config(&self) -> ScenarioConfig {
        ScenarioConfig {
            j: self.j,
            n_sites: self.size.1,
            m_sites: self.size.0,
            launch_offset: self.launch_offset,
            snapshot_times: self.snapshot_times.clone(),
            tau: self.tau,
            stop_fraction: self.stop_fraction,
            krylov_tol: self.krylov_tol,
            width_fit: self.width_fit,
        }
    }

    /// `(label, drive)` pairs to run.
    pub fn drives(&self) -> Result<Vec<(String, Drive2D)>, CliError> {
        match (&self.scenario, &self.params) {
            (Some(_), Some(_)) => Err(CliError::Validation("give either scenario or params, not both".into())),
            (None, None) => Err(CliError::Validation("missing field `scenario` (or `params`)".into())),
            (None, Some(d)) => Ok(vec![("custom".to_string(), *d)]),
            (Some(ScenarioSel::One(id)), None) => Ok(vec![(id.name().to_string(), id.drive())]),
            (Some(ScenarioSel::Many(ids)), None) => {
                if ids.is_empty() {
                    return Err(CliError::Validation("scenario: list must not be empty".into()));
                }
                Ok(ids.iter().map(|id| (id.name().to_string(), id.drive())).collect())
            }
        }
    }

    /// Checks drives, lattice and launch margins before any output is written.
    pub fn preflight(&self) -> Result<(), CliError> {
        let sc = self.scenario_config();
        for (_, drive) in self.drives()? {
            let params = sc.lattice(&drive)?;
            initial_wavepacket(drive.packet, 0, &params)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub command: CommandKind,
    /// Preset applied under `base` (bloch only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(default)]
    pub base: Value,
    /// Dot-path → values; one or two entries, grid is their Cartesian product in key order.
    pub sweep: BTreeMap<String, Vec<Value>>,
}

impl SweepConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        if self.command == CommandKind::Sweep {
            return Err(CliError::Validation("command: sweeps cannot be nested".into()));
        }
        if self.sweep.is_empty() || self.sweep.len() > 2 {
            return Err(CliError::Validation(format!("sweep: expected one or two swept parameters, got {}", self.sweep.len())));
        }
        for (k, v) in &self.sweep {
            if v.is_empty() {
                return Err(CliError::Validation(format!("sweep.{k}: empty value list")));
            }
        }
        Ok(())
    }

    /// Grid points as `(path, value)` assignments, first key varying slowest.
    pub fn grid(&self) -> Vec<Vec<(String, Value)>> {
        let mut points: Vec<Vec<(String, Value)>> = vec![vec![]];
        for (key, values) in &self.sweep {
            points = points
                .into_iter()
                .flat_map(|p| {
                    values.iter().map(move |v| {
                        let mut q = p.clone();
                        q.push((key.clone(), v.clone()));
                        q
                    })
                })
                .collect();
        }
        points
    }
}

/// Names of the built-in presets.
pub fn preset_names() -> Vec<String> {
    let mut names = Vec::new();
    for fig in ["fig2", "fig3"] {
        for row in ["a", "b", "c"] {
            for col in 1..=3 {
                names.push(format!("{fig}-{row}{col}"));
            }
        }
    }
    names
}

fn kappa_json(k: Complex64) -> Value {
    json!({ "re": k.re, "im": k.im })
}

/// Bloch configs behind the presets: `fig2-*` static or off-resonant, `fig3-*` resonant.
///
/// `fig2-<r><c>`: ω0 = 1, rows a/b/c are ω = 0, 0.01, 0.1 and columns 1/2/3
/// are κ0 = 1, i, e^{iπ/4}; ten Bloch periods (the ω = 0.1 recurrence).
/// `fig3-<r><c>`: resonance ω = ω0 = 1, rows a/b/c are κ0 = 1, i, e^{iπ/4};
/// column 1 is the full trajectory to 9 periods, 2 the profiles at 0, 3T, 6T,
/// 9T and 3 a dense `P(t)` record.
pub fn preset(name: &str) -> Option<Value> {
    let kappas = [Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0), Complex64::from_polar(1.0, PI / 4.0)];
    let (fig, panel) = name.split_once('-')?;
    let mut chars = panel.chars();
    let row = "abc".find(chars.next()?)?;
    let col = chars.next()?.to_digit(10)? as usize;
    if chars.next().is_some() || !(1..=3).contains(&col) {
        return None;
    }
    match fig {
        "fig2" => {
            let omega = [0.0, 0.01, 0.1][row];
            Some(json!({
                "kappa0": kappa_json(kappas[col - 1]),
                "omega": omega,
                "omega0": 1.0,
                "t_final": 20.0 * PI,
                "engine": if omega == 0.0 { "analytic" } else { "numeric" },
                "samples": 401,
            }))
        }
        "fig3" => {
            let samples = [181, 4, 901][col - 1];
            Some(json!({
                "kappa0": kappa_json(kappas[row]),
                "omega": 1.0,
                "omega0": 1.0,
                "t_final": 18.0 * PI,
                "engine": "numeric",
                "samples": samples,
            }))
        }
        _ => None,
    }
}

/// Parses the right-hand side of `--set`: JSON if it parses, a bare string
/// otherwise (complex fields also accept strings such as `1+i`).
pub fn parse_set_value(raw: &str) -> Value {
    serde_json::from_str::<Value>(raw).unwrap_or_else(|_| Value::String(raw.to_string()))
}

/// Assigns `value` at a dot-separated path, creating objects as needed.
/// Numeric segments index into existing arrays.
pub fn set_path(root: &mut Value, path: &str, value: Value) -> Result<(), CliError> {
    if path.is_empty() {
        return Err(CliError::Validation("--set: empty key".into()));
    }
    let segments: Vec<&str> = path.split('.').collect();
    set_segments(root, &segments, value, path)
}

fn set_segments(cur: &mut Value, segments: &[&str], value: Value, path: &str) -> Result<(), CliError> {
    let Some((seg, rest)) = segments.split_first() else {
        *cur = value;
        return Ok(());
    };
    if let Value::Array(arr) = cur {
        let len = arr.len();
        let slot = seg
            .parse::<usize>()
            .ok()
            .and_then(|k| arr.get_mut(k))
            .ok_or_else(|| CliError::Validation(format!("--set {path}: '{seg}' is not an index below {len}")))?;
        return set_segments(slot, rest, value, path);
    }
    if !cur.is_object() {
        // a plain number being refined into {re, im}
        *cur = match (&*cur, *seg) {
            (Value::Number(n), "re" | "im") => json!({ "re": n.as_f64().unwrap_or(0.0), "im": 0.0 }),
            _ => Value::Object(Map::new()),
        };
    }
    let obj = cur.as_object_mut().expect("object ensured above");
    let slot = obj.entry(seg.to_string()).or_insert(Value::Null);
    if rest.is_empty() {
        *slot = value;
        Ok(())
    } else {
        set_segments(slot, rest, value, path)
    }
}

/// Recursive merge of `over` into `base` (objects merge, everything else replaces).
pub fn merge(base: &mut Value, over: Value) {
    match (base, over) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

/// Typed deserialization with the failing field path in the error.
pub fn from_value<T: DeserializeOwned>(v: &Value) -> Result<T, CliError> {
    serde_path_to_error::deserialize(v).map_err(|e| {
        let path = e.path().to_string();
        if path == "." {
            CliError::Validation(e.inner().to_string())
        } else {
            CliError::Validation(format!("{path}: {}", e.inner()))
        }
    })
}

/// Reads a config file. A run manifest is accepted too: its `parameters`
/// block is returned after checking the command matches.
pub fn load_config_file(path: &Path, command: CommandKind) -> Result<Value, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Validation(format!("cannot read config {}: {e}", path.display())))?;
    let v: Value = serde_json::from_str(&text).map_err(|e| CliError::Validation(format!("{}: invalid JSON: {e}", path.display())))?;
    if let (Some(cmd), Some(params)) = (v.get("command"), v.get("parameters")) {
        if v.get("outputs").is_some() {
            if cmd.as_str() != Some(command.name()) {
                return Err(CliError::Validation(format!(
                    "manifest {} was written by `{}`, not `{}`",
                    path.display(),
                    cmd,
                    command.name()
                )));
            }
            return Ok(params.clone());
        }
    }
    Ok(v)
}

/// Preset, then config file, then `--set` overrides, in that order.
pub fn resolve_value(
    command: CommandKind,
    preset_name: Option<&str>,
    file: Option<&Path>,
    sets: &[String],
) -> Result<Value, CliError> {
    let mut v = Value::Object(Map::new());
    if let Some(name) = preset_name {
        if command != CommandKind::Bloch {
            return Err(CliError::Validation(format!("presets apply to `bloch` only, not `{}`", command.name())));
        }
        let p = preset(name).ok_or_else(|| {
            CliError::Validation(format!("unknown preset '{name}'; known: {}", preset_names().join(", ")))
        })?;
        merge(&mut v, p);
    }
    if let Some(path) = file {
        merge(&mut v, load_config_file(path, command)?);
    }
    for s in sets {
        let (k, raw) = s
            .split_once('=')
            .ok_or_else(|| CliError::Validation(format!("--set expects key=value, got '{s}'")))?;
        set_path(&mut v, k.trim(), parse_set_value(raw.trim()))?;
    }
    Ok(v)
}
