use std::collections::BTreeSet;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use thiserror::Error;

use crate::controller::{CadenceConfig, SpeedConfig};
use crate::harness::{Scenario, ScenarioError, DEFAULT_ACCELERATION};
use crate::pipeline::backend::{BackendConfigError, BackendDescriptor};
use crate::pipeline::{ModeDescriptions, Pipeline, SystemPrompt};
use crate::world::{FloorPlan, WallClock};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Syntax {
        path: PathBuf,
        #[source]
        source: toml::de::Error,
    },
    #[error("invalid configuration:\n  {}", .0.join("\n  "))]
    Invalid(Vec<String>),
}

/// Validated service configuration. Relative paths are resolved against the
/// config file's directory.
#[derive(Debug, Clone)]
pub struct GatewayConfig {
    pub listen: SocketAddr,
    pub log_path: PathBuf,
    /// None means the bundled living room
    pub floorplan: Option<PathBuf>,
    /// bundled name or resolved path
    pub scenario: Option<String>,
    /// start clock and seed for runs without a scenario
    pub wall_clock_start: WallClock,
    pub seed: u64,
    pub clock_acceleration: f64,
    pub backend: BackendDescriptor,
    pub cadence: CadenceConfig,
    pub speeds: SpeedConfig,
    pub mode_descriptions: ModeDescriptions,
}

impl Default for GatewayConfig {
    fn default() -> Self {
        Self {
            listen: "127.0.0.1:8080".parse().expect("literal address"),
            log_path: PathBuf::from("valuevac-log.jsonl"),
            floorplan: None,
            scenario: None,
            wall_clock_start: WallClock::new(9, 0).expect("literal clock"),
            seed: 0,
            clock_acceleration: DEFAULT_ACCELERATION,
            backend: BackendDescriptor::default(),
            cadence: CadenceConfig::default(),
            speeds: SpeedConfig::default(),
            mode_descriptions: ModeDescriptions::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: GatewayConfig,
    /// unknown keys, ignored
    pub warnings: Vec<String>,
}

const TOP_KEYS: &[&str] = &[
    "listen",
    "log_path",
    "floorplan",
    "scenario",
    "wall_clock_start",
    "seed",
    "clock_acceleration",
    "backend",
    "cadence",
    "speeds",
    "prompt",
];
const BACKEND_KEYS: &[&str] = &["kind", "endpoint", "model", "timeout_secs", "max_retries", "credential_env"];

fn keys_of<T: serde::Serialize>(value: &T) -> BTreeSet<String> {
    match toml::Value::try_from(value) {
        Ok(toml::Value::Table(t)) => t.keys().cloned().collect(),
        _ => BTreeSet::new(),
    }
}

/// Removes keys not in `known` from `table`, recording a warning for each.
fn strip_unknown(table: &mut toml::Table, known: &BTreeSet<String>, prefix: &str, warnings: &mut Vec<String>) {
    let unknown: Vec<String> = table.keys().filter(|k| !known.contains(*k)).cloned().collect();
    for key in unknown {
        table.remove(&key);
        warnings.push(format!("unknown key `{prefix}{key}` ignored"));
    }
}

fn section<T: DeserializeOwned + Default>(
    table: &mut toml::Table,
    name: &str,
    known: &BTreeSet<String>,
    warnings: &mut Vec<String>,
    violations: &mut Vec<String>,
) -> T {
    match table.remove(name) {
        None => T::default(),
        Some(toml::Value::Table(mut t)) => {
            strip_unknown(&mut t, known, &format!("{name}."), warnings);
            toml::Value::Table(t).try_into().unwrap_or_else(|e: toml::de::Error| {
                violations.push(format!("{name}: {}", e.message()));
                T::default()
            })
        }
        Some(_) => {
            violations.push(format!("{name}: must be a table"));
            T::default()
        }
    }
}

fn take<T: DeserializeOwned>(table: &mut toml::Table, key: &str, violations: &mut Vec<String>) -> Option<T> {
    let value = table.remove(key)?;
    match value.try_into() {
        Ok(v) => Some(v),
        Err(e) => {
            violations.push(format!("{key}: {}", e.message()));
            None
        }
    }
}

pub fn load_config(path: &Path) -> Result<LoadedConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let base = path.parent().unwrap_or(Path::new("."));
    parse_config(&text, base).map_err(|e| match e {
        ParseFailure::Syntax(source) => ConfigError::Syntax {
            path: path.to_path_buf(),
            source,
        },
        ParseFailure::Invalid(v) => ConfigError::Invalid(v),
    })
}

enum ParseFailure {
    Syntax(toml::de::Error),
    Invalid(Vec<String>),
}

impl From<ParseFailure> for ConfigError {
    fn from(e: ParseFailure) -> Self {
        match e {
            ParseFailure::Syntax(source) => ConfigError::Syntax {
                path: PathBuf::from("<config>"),
                source,
            },
            ParseFailure::Invalid(v) => ConfigError::Invalid(v),
        }
    }
}

/// Parses and validates config text; `base` anchors relative paths.
pub fn parse_config_str(text: &str, base: &Path) -> Result<LoadedConfig, ConfigError> {
    Ok(parse_config(text, base)?)
}

fn parse_config(text: &str, base: &Path) -> Result<LoadedConfig, ParseFailure> {
    let mut table: toml::Table = text.parse().map_err(ParseFailure::Syntax)?;
    let mut warnings = Vec::new();
    let mut violations = Vec::new();
    strip_unknown(
        &mut table,
        &TOP_KEYS.iter().map(|k| k.to_string()).collect(),
        "",
        &mut warnings,
    );

    let defaults = GatewayConfig::default();
    let backend: BackendDescriptor = section(
        &mut table,
        "backend",
        &BACKEND_KEYS.iter().map(|k| k.to_string()).collect(),
        &mut warnings,
        &mut violations,
    );
    let cadence: CadenceConfig = section(
        &mut table,
        "cadence",
        &keys_of(&CadenceConfig::default()),
        &mut warnings,
        &mut violations,
    );
    let speeds: SpeedConfig = section(&mut table, "speeds", &keys_of(&SpeedConfig::default()), &mut warnings, &mut violations);

    let mut mode_descriptions = ModeDescriptions::default();
    if let Some(prompt) = table.remove("prompt") {
        match prompt {
            toml::Value::Table(mut p) => {
                strip_unknown(&mut p, &["modes".to_string()].into(), "prompt.", &mut warnings);
                if let Some(modes) = p.remove("modes") {
                    match modes.try_into::<ModeDescriptions>() {
                        Ok(m) => mode_descriptions = m,
                        Err(e) => violations.push(format!("prompt.modes: {}", e.message())),
                    }
                }
            }
            _ => violations.push("prompt: must be a table".into()),
        }
    }

    let listen = match take::<String>(&mut table, "listen", &mut violations) {
        None => defaults.listen,
        Some(s) => s.parse().unwrap_or_else(|_| {
            violations.push(format!("listen: `{s}` is not a host:port socket address"));
            defaults.listen
        }),
    };
    let resolve = |p: String| -> PathBuf {
        let p = PathBuf::from(p);
        if p.is_absolute() {
            p
        } else {
            base.join(p)
        }
    };
    let log_path = take::<String>(&mut table, "log_path", &mut violations).map(resolve).unwrap_or_else(|| base.join(&defaults.log_path));
    let floorplan = take::<String>(&mut table, "floorplan", &mut violations).and_then(|f| {
        if f == "living_room" {
            None
        } else {
            Some(resolve(f))
        }
    });
    let scenario = take::<String>(&mut table, "scenario", &mut violations).map(|s| {
        if crate::harness::bundled_names().any(|n| n == s) {
            s
        } else {
            resolve(s).display().to_string()
        }
    });
    let wall_clock_start = take::<WallClock>(&mut table, "wall_clock_start", &mut violations).unwrap_or(defaults.wall_clock_start);
    let seed = take::<u64>(&mut table, "seed", &mut violations).unwrap_or(defaults.seed);
    let clock_acceleration =
        take::<f64>(&mut table, "clock_acceleration", &mut violations).unwrap_or(defaults.clock_acceleration);

    let config = GatewayConfig {
        listen,
        log_path,
        floorplan,
        scenario,
        wall_clock_start,
        seed,
        clock_acceleration,
        backend,
        cadence,
        speeds,
        mode_descriptions,
    };
    violations.extend(config.violations());
    if violations.is_empty() {
        Ok(LoadedConfig { config, warnings })
    } else {
        Err(ParseFailure::Invalid(violations))
    }
}

impl GatewayConfig {
    /// Every semantic problem, including unreadable paths and a missing
    /// credential.
    pub fn violations(&self) -> Vec<String> {
        let mut v: Vec<String> = Vec::new();
        v.extend(self.cadence.violations().iter().map(ToString::to_string));
        v.extend(self.speeds.violations().iter().map(ToString::to_string));
        v.extend(self.backend.violations().iter().map(ToString::to_string));
        if let Err(e @ BackendConfigError::MissingCredential(_)) = self.backend.credential() {
            v.push(e.to_string());
        }
        if !(self.clock_acceleration > 0.0 && self.clock_acceleration.is_finite()) {
            v.push(format!("clock_acceleration: must be > 0, got {}", self.clock_acceleration));
        }
        if let Err(e) = SystemPrompt::new(&self.mode_descriptions) {
            v.push(format!("prompt.modes: {e}"));
        }
        if let Some(dir) = self.log_path.parent().filter(|d| !d.as_os_str().is_empty()) {
            if !dir.is_dir() {
                v.push(format!("log_path: directory {} does not exist", dir.display()));
            }
        }
        if let Some(path) = &self.floorplan {
            if let Err(e) = FloorPlan::load(path) {
                v.push(format!("floorplan: {e}"));
            }
        }
        if let Some(s) = &self.scenario {
            if let Err(e) = Scenario::resolve(s) {
                v.push(format!("scenario: {e}"));
            }
        }
        v
    }

    /// The configured scenario, or an empty one on the configured floorplan.
    pub fn scenario(&self) -> Result<Scenario, ScenarioError> {
        if let Some(s) = &self.scenario {
            return Scenario::resolve(s);
        }
        let floorplan = match &self.floorplan {
            Some(path) => FloorPlan::load(path).map_err(|source| ScenarioError::Floorplan {
                origin: "config".into(),
                floorplan: path.display().to_string(),
                source,
            })?,
            None => FloorPlan::from_json(crate::harness::LIVING_ROOM).expect("bundled floorplan is valid"),
        };
        Ok(Scenario::empty("interactive", floorplan, self.wall_clock_start, self.seed))
    }

    pub fn pipeline(&self) -> Result<Pipeline, String> {
        let backend = self.backend.build().map_err(|e| e.to_string())?;
        let prompt = SystemPrompt::new(&self.mode_descriptions).map_err(|e| e.to_string())?;
        Ok(Pipeline::new(backend, prompt, &self.backend.model, self.backend.max_retries))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<LoadedConfig, ConfigError> {
        parse_config_str(text, Path::new("."))
    }

    #[test]
    fn minimal_file_gets_defaults() {
        let c = parse("[backend]\nkind = \"mock\"\n").unwrap();
        assert!(c.warnings.is_empty());
        assert_eq!(c.config.cadence.sweep_frames, 10);
        assert_eq!(c.config.cadence.sweep_interval, 1.0);
        assert_eq!(c.config.cadence.sweep_span, 180.0);
        assert_eq!(c.config.cadence.burst_frames, 3);
        assert_eq!(c.config.cadence.burst_interval, 0.5);
        assert_eq!(c.config.clock_acceleration, 20.0);
    }

    #[test]
    fn unknown_keys_warn() {
        let c = parse("colour = 1\n[cadence]\nsweep_frames = 12\nbogus = true\n").unwrap();
        assert_eq!(c.config.cadence.sweep_frames, 12);
        assert_eq!(c.warnings.len(), 2);
        assert!(c.warnings[1].contains("cadence.bogus"));
    }

    #[test]
    fn all_violations_reported_together() {
        let err = parse("listen = \"nowhere\"\nclock_acceleration = 0\n[speeds]\ncruise = 0.05\n").unwrap_err();
        let ConfigError::Invalid(v) = err else { panic!("{err}") };
        assert_eq!(v.len(), 3, "{v:?}");
        assert!(v.iter().any(|m| m.contains("speeds.cruise")));
    }

    #[test]
    fn remote_needs_credential_in_env() {
        let err = parse(
            "[backend]\nkind = \"remote\"\nendpoint = \"http://x/v1/chat/completions\"\ncredential_env = \"VALUEVAC_TEST_UNSET_KEY\"\n",
        )
        .unwrap_err();
        assert!(err.to_string().contains("VALUEVAC_TEST_UNSET_KEY"));
    }

    #[test]
    fn type_errors_name_the_field() {
        let err = parse("seed = \"x\"\n[cadence]\nsweep_frames = \"ten\"\n").unwrap_err();
        let ConfigError::Invalid(v) = err else { panic!() };
        assert_eq!(v.len(), 2, "{v:?}");
    }
}
