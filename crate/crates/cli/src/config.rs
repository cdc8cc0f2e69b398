//! Flat `key = value` scenario files.
//!
//! Lines are `key = value`; blank lines and lines starting with `#` are
//! skipped. Keys are dotted (`ulm.k_x_p`). Every key is optional and overlays
//! [`ScenarioConfig::default`]; unknown or repeated keys are errors. See the
//! README for the full key list.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use onco_core::disturbance::DisturbanceProfile;
use onco_core::mfc::{EstimatorSignal, Quadrature};
use onco_core::scenario::{ControllerMode, Goal, ScenarioConfig};
use onco_core::{PatientParams, PatientState};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("duplicate key `{0}`")]
    Duplicate(String),
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("key `{key}`: {message}")]
    Value { key: String, message: String },
    #[error("invalid scenario: {0}")]
    Invalid(#[from] onco_core::Error),
}

type Result<T> = std::result::Result<T, ConfigError>;

fn value_err(key: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Value {
        key: key.to_string(),
        message: message.into(),
    }
}

/// Key/value pairs still waiting to be consumed.
struct Entries(BTreeMap<String, String>);

impl Entries {
    fn take(&mut self, key: &str) -> Option<String> {
        self.0.remove(key)
    }

    fn take_f64(&mut self, key: &str) -> Result<Option<f64>> {
        self.take(key).map(|v| parse_f64(key, &v)).transpose()
    }

    fn f64_into(&mut self, key: &str, slot: &mut f64) -> Result<()> {
        if let Some(v) = self.take_f64(key)? {
            *slot = v;
        }
        Ok(())
    }

    fn required_f64(&mut self, key: &str) -> Result<f64> {
        self.take_f64(key)?.ok_or_else(|| value_err(key, "missing"))
    }

    fn take_list(&mut self, key: &str) -> Result<Vec<f64>> {
        let raw = self.take(key).ok_or_else(|| value_err(key, "missing"))?;
        if raw.trim().is_empty() {
            return Ok(Vec::new());
        }
        raw.split(',').map(|s| parse_f64(key, s.trim())).collect()
    }

    fn has_prefix(&self, prefix: &str) -> bool {
        self.0.keys().any(|k| k.starts_with(prefix))
    }
}

fn parse_f64(key: &str, raw: &str) -> Result<f64> {
    let v: f64 = raw
        .parse()
        .map_err(|_| value_err(key, format!("not a number: `{raw}`")))?;
    if !v.is_finite() {
        return Err(value_err(key, "must be finite"));
    }
    Ok(v)
}

fn split_lines(text: &str) -> Result<Entries> {
    let mut map = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
            line: i + 1,
            message: "expected `key = value`".to_string(),
        })?;
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() {
            return Err(ConfigError::Syntax {
                line: i + 1,
                message: "empty key".to_string(),
            });
        }
        if map.insert(k.to_string(), v.to_string()).is_some() {
            return Err(ConfigError::Duplicate(k.to_string()));
        }
    }
    Ok(Entries(map))
}

fn parse_profile(
    e: &mut Entries,
    section: &str,
    current: DisturbanceProfile,
) -> Result<DisturbanceProfile> {
    let kind_key = format!("{section}.kind");
    let Some(kind) = e.take(&kind_key) else {
        if e.has_prefix(&format!("{section}.")) {
            return Err(value_err(&kind_key, "missing"));
        }
        return Ok(current);
    };
    let key = |field: &str| format!("{section}.{field}");
    Ok(match kind.as_str() {
        "constant" => DisturbanceProfile::Constant(e.required_f64(&key("value"))?),
        "piecewise-constant" => DisturbanceProfile::PiecewiseConstant {
            levels: e.take_list(&key("levels"))?,
            switch_times: e.take_list(&key("switch_times"))?,
        },
        "sinusoidal" => DisturbanceProfile::Sinusoidal {
            mean: e.required_f64(&key("mean"))?,
            amplitude: e.required_f64(&key("amplitude"))?,
            period: e.required_f64(&key("period"))?,
            phase: e.take_f64(&key("phase"))?.unwrap_or(0.0),
            lower: e.take_f64(&key("lower"))?.unwrap_or(0.0),
            upper: e.take_f64(&key("upper"))?.unwrap_or(1.0),
        },
        "sampled" => DisturbanceProfile::Sampled {
            dt: e.required_f64(&key("dt"))?,
            values: e.take_list(&key("values"))?,
        },
        other => return Err(value_err(&kind_key, format!("unknown kind `{other}`"))),
    })
}

fn parse_bool(key: &str, raw: &str) -> Result<bool> {
    match raw {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(value_err(
            key,
            format!("expected true or false, got `{raw}`"),
        )),
    }
}

/// Parses and validates a scenario file.
pub fn parse(text: &str) -> Result<ScenarioConfig> {
    let mut e = split_lines(text)?;
    let mut cfg = ScenarioConfig::default();

    if let Some(v) = e.take("name") {
        cfg.name = v;
    }
    if let Some(v) = e.take("params.preset") {
        cfg.params = PatientParams::preset(&v)?;
        cfg.params_preset = v;
    }
    let p = &mut cfg.params;
    for (k, slot) in [
        ("params.mu_c", &mut p.mu_c),
        ("params.mu_i", &mut p.mu_i),
        ("params.alpha", &mut p.alpha),
        ("params.beta", &mut p.beta),
        ("params.gamma", &mut p.gamma),
        ("params.delta", &mut p.delta),
        ("params.eta_x_nom", &mut p.eta_x_nom),
        ("params.eta_y_nom", &mut p.eta_y_nom),
        ("params.x_inf", &mut p.x_inf),
    ] {
        e.f64_into(k, slot)?;
    }
    e.f64_into("initial.x", &mut cfg.initial.x)?;
    e.f64_into("initial.y", &mut cfg.initial.y)?;
    e.f64_into("duration", &mut cfg.duration)?;
    let dt_given = e.take_f64("dt")?;
    if let Some(dt) = dt_given {
        cfg.dt = dt;
    }
    if let Some(v) = e.take("controller") {
        cfg.controller_mode = ControllerMode::from_name(&v)
            .ok_or_else(|| value_err("controller", format!("unknown mode `{v}`")))?;
    }

    match e.take("reference.goal").as_deref() {
        None | Some("benign") => {
            if e.has_prefix("reference.goal_") {
                return Err(value_err(
                    "reference.goal",
                    "goal_x/goal_y need `reference.goal = state`",
                ));
            }
        }
        Some("state") => {
            let x = e.required_f64("reference.goal_x")?;
            let y = e.required_f64("reference.goal_y")?;
            cfg.reference.goal = Goal::State(PatientState::new(x, y));
        }
        Some(other) => {
            return Err(value_err(
                "reference.goal",
                format!("unknown goal `{other}`"),
            ))
        }
    }
    e.f64_into("reference.ramp_time", &mut cfg.reference.ramp_time)?;

    let u = &mut cfg.ulm;
    // Windows follow dt unless given explicitly.
    if dt_given.is_some() {
        u.tau_x = 20.0 * cfg.dt;
        u.tau_y = 20.0 * cfg.dt;
    }
    for (k, slot) in [
        ("ulm.alpha_x", &mut u.alpha_x),
        ("ulm.alpha_y", &mut u.alpha_y),
        ("ulm.k_x_p", &mut u.k_x_p),
        ("ulm.k_y_p", &mut u.k_y_p),
        ("ulm.tau_x", &mut u.tau_x),
        ("ulm.tau_y", &mut u.tau_y),
    ] {
        e.f64_into(k, slot)?;
    }
    if let Some(v) = e.take("ulm.quadrature") {
        u.quadrature = Quadrature::from_name(&v)
            .ok_or_else(|| value_err("ulm.quadrature", format!("unknown rule `{v}`")))?;
    }
    if let Some(v) = e.take("ulm.signal") {
        u.signal = EstimatorSignal::from_name(&v)
            .ok_or_else(|| value_err("ulm.signal", format!("unknown signal `{v}`")))?;
    }

    cfg.eta_x_true = parse_profile(&mut e, "eta_x_true", cfg.eta_x_true)?;
    cfg.eta_y_true = parse_profile(&mut e, "eta_y_true", cfg.eta_y_true)?;
    e.f64_into("eta_x_assumed", &mut cfg.eta_x_assumed)?;
    e.f64_into("eta_y_assumed", &mut cfg.eta_y_assumed)?;
    if let Some(v) = e.take("force_zero_u") {
        cfg.force_zero_u = parse_bool("force_zero_u", &v)?;
    }
    if let Some(v) = e.take("seed") {
        cfg.seed = v
            .parse()
            .map_err(|_| value_err("seed", format!("not an unsigned integer: `{v}`")))?;
    }

    if let Some(k) = e.0.keys().next() {
        return Err(ConfigError::UnknownKey(k.clone()));
    }
    cfg.validate()?;
    Ok(cfg)
}

fn list(values: &[f64]) -> String {
    values
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(", ")
}

fn write_profile(out: &mut String, section: &str, p: &DisturbanceProfile) {
    match p {
        DisturbanceProfile::Constant(v) => {
            let _ = writeln!(out, "{section}.kind = constant\n{section}.value = {v}");
        }
        DisturbanceProfile::PiecewiseConstant {
            levels,
            switch_times,
        } => {
            let _ = writeln!(out, "{section}.kind = piecewise-constant");
            let _ = writeln!(out, "{section}.levels = {}", list(levels));
            let _ = writeln!(out, "{section}.switch_times = {}", list(switch_times));
        }
        DisturbanceProfile::Sinusoidal {
            mean,
            amplitude,
            period,
            phase,
            lower,
            upper,
        } => {
            let _ = writeln!(out, "{section}.kind = sinusoidal");
            for (k, v) in [
                ("mean", mean),
                ("amplitude", amplitude),
                ("period", period),
                ("phase", phase),
                ("lower", lower),
                ("upper", upper),
            ] {
                let _ = writeln!(out, "{section}.{k} = {v}");
            }
        }
        DisturbanceProfile::Sampled { dt, values } => {
            let _ = writeln!(out, "{section}.kind = sampled\n{section}.dt = {dt}");
            let _ = writeln!(out, "{section}.values = {}", list(values));
        }
    }
}

/// Canonical text form. Every key is written, floats in shortest
/// round-trip notation, so `parse(&serialize(c)) == c`.
pub fn serialize(cfg: &ScenarioConfig) -> String {
    let mut s = String::new();
    let p = &cfg.params;
    let u = &cfg.ulm;
    let _ = writeln!(s, "name = {}", cfg.name);
    let _ = writeln!(s, "params.preset = {}", cfg.params_preset);
    for (k, v) in [
        ("mu_c", p.mu_c),
        ("mu_i", p.mu_i),
        ("alpha", p.alpha),
        ("beta", p.beta),
        ("gamma", p.gamma),
        ("delta", p.delta),
        ("eta_x_nom", p.eta_x_nom),
        ("eta_y_nom", p.eta_y_nom),
        ("x_inf", p.x_inf),
    ] {
        let _ = writeln!(s, "params.{k} = {v}");
    }
    let _ = writeln!(
        s,
        "initial.x = {}\ninitial.y = {}",
        cfg.initial.x, cfg.initial.y
    );
    let _ = writeln!(s, "duration = {}\ndt = {}", cfg.duration, cfg.dt);
    let _ = writeln!(s, "controller = {}", cfg.controller_mode.name());
    match cfg.reference.goal {
        Goal::Benign => {
            let _ = writeln!(s, "reference.goal = benign");
        }
        Goal::State(g) => {
            let _ = writeln!(
                s,
                "reference.goal = state\nreference.goal_x = {}\nreference.goal_y = {}",
                g.x, g.y
            );
        }
    }
    let _ = writeln!(s, "reference.ramp_time = {}", cfg.reference.ramp_time);
    for (k, v) in [
        ("alpha_x", u.alpha_x),
        ("alpha_y", u.alpha_y),
        ("k_x_p", u.k_x_p),
        ("k_y_p", u.k_y_p),
        ("tau_x", u.tau_x),
        ("tau_y", u.tau_y),
    ] {
        let _ = writeln!(s, "ulm.{k} = {v}");
    }
    let _ = writeln!(
        s,
        "ulm.quadrature = {}\nulm.signal = {}",
        u.quadrature.name(),
        u.signal.name()
    );
    write_profile(&mut s, "eta_x_true", &cfg.eta_x_true);
    write_profile(&mut s, "eta_y_true", &cfg.eta_y_true);
    let _ = writeln!(
        s,
        "eta_x_assumed = {}\neta_y_assumed = {}",
        cfg.eta_x_assumed, cfg.eta_y_assumed
    );
    let _ = writeln!(
        s,
        "force_zero_u = {}\nseed = {}",
        cfg.force_zero_u, cfg.seed
    );
    s
}

/// SHA-256 of the canonical form, hex encoded.
pub fn config_hash(cfg: &ScenarioConfig) -> String {
    hex::encode(Sha256::digest(serialize(cfg).as_bytes()))
}
