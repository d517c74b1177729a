//! Scenario configuration: one TOML table per module, unknown keys rejected.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::costfield::CostFieldParams;
use crate::error::{Error, Result};
use crate::mac::MacParams;
use crate::phys::RadioParams;
use crate::policies::{EnergyParams, GrabParams, Protocol, UGrabParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SinkPlacement {
    Corner,
    Center,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FailureSide {
    /// A relay that fails never received the packet.
    Rx,
    /// A relay that fails received the packet but cannot send it.
    Tx,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioParams {
    /// Total nodes, sink included.
    pub node_count: usize,
    pub width: f64,
    pub height: f64,
    pub sink: SinkPlacement,
    /// Reject placements with two nodes closer than this (0 disables).
    pub min_separation: f64,
    pub messages_min: u32,
    pub messages_max: u32,
    pub data_phase_ms: f64,
    /// Extra simulated time after the last injection.
    pub drain_ms: f64,
    pub p_f: f64,
    pub failure_side: FailureSide,
    pub protocol: Protocol,
    pub replications: u32,
    pub base_seed: u64,
}

impl Default for ScenarioParams {
    fn default() -> Self {
        ScenarioParams {
            node_count: 200,
            width: 250.0,
            height: 250.0,
            sink: SinkPlacement::Corner,
            min_separation: 0.0,
            messages_min: 25,
            messages_max: 35,
            data_phase_ms: 30_000.0,
            drain_ms: 5_000.0,
            p_f: 0.0,
            failure_side: FailureSide::Rx,
            protocol: Protocol::Bgb,
            replications: 30,
            base_seed: 1,
        }
    }
}

impl ScenarioParams {
    fn validate(&self) -> std::result::Result<(), String> {
        if self.node_count < 2 {
            return Err("node_count must be >= 2".into());
        }
        if !(self.width > 0.0 && self.height > 0.0) {
            return Err("width and height must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.p_f) {
            return Err("p_f must be in [0, 1]".into());
        }
        if self.replications < 1 {
            return Err("replications must be >= 1".into());
        }
        if self.messages_min > self.messages_max {
            return Err("messages_min must not exceed messages_max".into());
        }
        if !(self.data_phase_ms > 0.0 && self.drain_ms >= 0.0) {
            return Err("data_phase_ms must be positive and drain_ms non-negative".into());
        }
        if !(self.min_separation >= 0.0) {
            return Err("min_separation must be >= 0".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PGrabParams {
    /// Spreading factor `K` of the interference-avoidance curve.
    pub k: f64,
}

impl Default for PGrabParams {
    fn default() -> Self {
        PGrabParams { k: 2.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub scenario: ScenarioParams,
    pub radio: RadioParams,
    pub mac: MacParams,
    pub costfield: CostFieldParams,
    pub grab: GrabParams,
    pub pgrab: PGrabParams,
    pub ugrab: UGrabParams,
    pub energy: EnergyParams,
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| {
            let msg = e.message().to_string();
            Error::config(offending_key(&msg).unwrap_or_else(|| "<file>".into()), msg)
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| Error::ConfigFile { path: path.display().to_string(), source })?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config always serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let checks: [(&str, std::result::Result<(), String>); 8] = [
            ("scenario", self.scenario.validate()),
            ("radio", self.radio.validate()),
            ("mac", self.mac.validate()),
            ("costfield", self.costfield.validate()),
            ("grab", self.grab.validate()),
            ("pgrab", if self.pgrab.k >= 1.0 { Ok(()) } else { Err("k must be >= 1".into()) }),
            ("ugrab", self.ugrab.validate()),
            ("energy", self.energy.validate()),
        ];
        for (section, r) in checks {
            r.map_err(|msg| Error::config(section, msg))?;
        }
        Ok(())
    }

    /// Resolve `key` to `section.field`. A bare field name is accepted when
    /// exactly one section has it. Matching ignores ASCII case.
    pub fn resolve_key(&self, key: &str) -> Result<(String, String)> {
        let table = self.as_table();
        let key_lc = key.to_ascii_lowercase();
        if let Some((sec, field)) = key_lc.split_once('.') {
            let found = table
                .get(sec)
                .and_then(|v| v.as_table())
                .map(|t| t.contains_key(field))
                .unwrap_or(false);
            return if found {
                Ok((sec.to_string(), field.to_string()))
            } else {
                Err(Error::config(key, "unknown config key"))
            };
        }
        let hits: Vec<&String> = table
            .iter()
            .filter(|(_, v)| v.as_table().map(|t| t.contains_key(&key_lc)).unwrap_or(false))
            .map(|(s, _)| s)
            .collect();
        match hits.as_slice() {
            [one] => Ok(((*one).clone(), key_lc)),
            [] => Err(Error::config(key, "unknown config key")),
            _ => Err(Error::config(key, "ambiguous key; qualify it as section.key")),
        }
    }

    /// Apply one `key=value` override and re-validate.
    pub fn apply_override(&mut self, key: &str, value: &str) -> Result<()> {
        let mut next = self.clone();
        next.set_unchecked(key, value)?;
        next.validate()?;
        *self = next;
        Ok(())
    }

    fn set_unchecked(&mut self, key: &str, value: &str) -> Result<()> {
        let (sec, field) = self.resolve_key(key)?;
        let mut table = self.as_table();
        let section = table
            .get_mut(&sec)
            .and_then(|v| v.as_table_mut())
            .expect("resolved section exists");
        let current = section.get(&field).cloned();
        section.insert(field.clone(), parse_value(value, current.as_ref()));
        let updated: ScenarioConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| Error::config(key, e.message().to_string()))?;
        *self = updated;
        Ok(())
    }

    /// Apply `key=value` strings in order, validating once at the end.
    pub fn apply_overrides<S: AsRef<str>>(&mut self, pairs: &[S]) -> Result<()> {
        let mut next = self.clone();
        for p in pairs {
            let (k, v) = split_assignment(p.as_ref())?;
            next.set_unchecked(k, v)?;
        }
        next.validate()?;
        *self = next;
        Ok(())
    }

    /// Current value of a key, rendered the way an override would spell it.
    pub fn get(&self, key: &str) -> Result<String> {
        let (sec, field) = self.resolve_key(key)?;
        let table = self.as_table();
        let v = &table[&sec].as_table().expect("section")[&field];
        Ok(render_value(v))
    }

    fn as_table(&self) -> toml::Table {
        match toml::Value::try_from(self).expect("config always serializes") {
            toml::Value::Table(t) => t,
            _ => unreachable!("config serializes to a table"),
        }
    }
}

impl fmt::Display for ScenarioConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_toml_string())
    }
}

pub fn split_assignment(s: &str) -> Result<(&str, &str)> {
    match s.split_once('=') {
        Some((k, v)) if !k.trim().is_empty() => Ok((k.trim(), v.trim())),
        _ => Err(Error::config(s, "expected key=value")),
    }
}

fn parse_value(raw: &str, current: Option<&toml::Value>) -> toml::Value {
    let parsed = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"));
    match (current, parsed) {
        (Some(toml::Value::String(_)), Some(toml::Value::String(s))) => toml::Value::String(s),
        (Some(toml::Value::String(_)), _) => toml::Value::String(raw.to_string()),
        (Some(toml::Value::Float(_)), Some(toml::Value::Integer(i))) => toml::Value::Float(i as f64),
        (_, Some(v)) => v,
        (_, None) => toml::Value::String(raw.to_string()),
    }
}

fn render_value(v: &toml::Value) -> String {
    match v {
        toml::Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn offending_key(msg: &str) -> Option<String> {
    let start = msg.find('`')? + 1;
    let end = start + msg[start..].find('`')?;
    Some(msg[start..end].to_string())
}
