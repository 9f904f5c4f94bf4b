//! Experiment configuration: a TOML file with fixed sections, merged over
//! defaults and then over `--key value` command-line overrides.
//!
//! ```toml
//! [map]
//! k = 10.0
//!
//! [leak]
//! center = 0.2
//! width = 0.2
//!
//! [classical]
//! grid_q = 500
//! grid_p = 500
//! ftle_iterations = 10
//! t_max = 1000
//! histogram_bins = 100
//! cutoff_tolerance = 0.1
//! exclude_non_escaping_ftle = false
//! write_field_csv = false
//! random_ics = 0
//! random_ic_iterations = 100000
//!
//! [quantum]
//! n = 512
//! husimi_q = 1000
//! husimi_p = 1000
//! top_states = 20
//! dwell_bin = 0.08
//! exclude_zero_modes = false
//! write_schur_vectors = false
//!
//! [scan]
//! positions = 50
//! convergence_dims = []
//!
//! [run]
//! seed = 0
//! output_dir = "output"
//! ```
//!
//! Every key name is unique across sections, so overrides may be written
//! either as `--leak.center 0.5` or as `--center 0.5`.

use std::path::Path;

use leakmap::ensemble::PhaseSpaceGrid;
use leakmap::quantum::{QuantumParams, QuantumScanOptions};
use leakmap::{Leak, MapParams};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::CliError;

/// Quantum dimensions above this are accepted but far beyond desk scale.
pub const DESK_SCALE_MAX_N: usize = 2048;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MapSection {
    /// Kick strength `K`.
    pub k: f64,
}

impl Default for MapSection {
    fn default() -> Self {
        Self { k: 10.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LeakSection {
    pub center: f64,
    pub width: f64,
}

impl Default for LeakSection {
    fn default() -> Self {
        Self {
            center: 0.2,
            width: 0.2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassicalSection {
    pub grid_q: usize,
    pub grid_p: usize,
    /// Iterations of the closed-map FTLE field.
    pub ftle_iterations: usize,
    pub t_max: u32,
    pub histogram_bins: usize,
    /// Relative tolerance of the short-dwell cutoff.
    pub cutoff_tolerance: f64,
    pub exclude_non_escaping_ftle: bool,
    pub write_field_csv: bool,
    /// Random initial conditions for the grand-mean FTLE of `ftle-field`.
    pub random_ics: usize,
    pub random_ic_iterations: usize,
}

impl Default for ClassicalSection {
    fn default() -> Self {
        Self {
            grid_q: 500,
            grid_p: 500,
            ftle_iterations: 10,
            t_max: 1000,
            histogram_bins: 100,
            cutoff_tolerance: 0.1,
            exclude_non_escaping_ftle: false,
            write_field_csv: false,
            random_ics: 0,
            random_ic_iterations: 100_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuantumSection {
    /// Hilbert-space dimension `N`.
    pub n: usize,
    pub husimi_q: usize,
    pub husimi_p: usize,
    /// Schur states averaged into the mean Husimi distribution.
    pub top_states: usize,
    /// Dwell-time bin width `ΔT` of the entropy averages.
    pub dwell_bin: f64,
    pub exclude_zero_modes: bool,
    pub write_schur_vectors: bool,
}

impl Default for QuantumSection {
    fn default() -> Self {
        Self {
            n: 512,
            husimi_q: 1000,
            husimi_p: 1000,
            top_states: 20,
            dwell_bin: 0.08,
            exclude_zero_modes: false,
            write_schur_vectors: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScanSection {
    /// Leak centers `i / positions`, `i = 0..positions`.
    pub positions: usize,
    /// Extra dimensions for the nested `⟨T⟩` convergence check of `scan`.
    pub convergence_dims: Vec<usize>,
}

impl Default for ScanSection {
    fn default() -> Self {
        Self {
            positions: 50,
            convergence_dims: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    /// Only the random-IC mode draws random numbers; grid runs ignore it.
    pub seed: u64,
    pub output_dir: String,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            seed: 0,
            output_dir: "output".into(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub map: MapSection,
    pub leak: LeakSection,
    pub classical: ClassicalSection,
    pub quantum: QuantumSection,
    pub scan: ScanSection,
    pub run: RunSection,
}

/// Independent random streams derived from the run seed.
#[derive(Clone, Copy, Debug)]
pub enum Stream {
    RandomInitialConditions = 1,
}

impl Config {
    /// Parses TOML text, applies overrides and validates. All problems are
    /// collected into a single error.
    pub fn from_toml_with_overrides(text: &str, overrides: &[(String, String)]) -> Result<Self, CliError> {
        let raw: Table = text
            .parse()
            .map_err(|e: toml::de::Error| CliError::Config(vec![format!("TOML syntax: {}", e.message())]))?;
        let schema = schema();
        let mut errors = Vec::new();
        let mut merged = schema.clone();
        for (section, body) in raw {
            let Some(known) = schema.get(&section).and_then(Value::as_table) else {
                errors.push(format!("unknown section [{section}]"));
                continue;
            };
            let Value::Table(body) = body else {
                errors.push(format!("`{section}` must be a section"));
                continue;
            };
            for (key, value) in body {
                match known.get(&key) {
                    None => errors.push(format!("unknown key {section}.{key}")),
                    Some(default) => match coerce(default, value) {
                        Ok(v) => set(&mut merged, &section, &key, v),
                        Err(e) => errors.push(format!("{section}.{key}: {e}")),
                    },
                }
            }
        }
        for (path, text) in overrides {
            match resolve_key(&schema, path) {
                Err(e) => errors.push(e),
                Ok((section, key)) => {
                    let default = &schema[section.as_str()][key.as_str()];
                    match parse_override(default, text) {
                        Ok(v) => set(&mut merged, &section, &key, v),
                        Err(e) => errors.push(format!("--{path}: {e}")),
                    }
                }
            }
        }
        if !errors.is_empty() {
            return Err(CliError::Config(errors));
        }
        let config: Config = Value::Table(merged)
            .try_into()
            .map_err(|e: toml::de::Error| CliError::Config(vec![e.message().to_string()]))?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        Self::from_toml_with_overrides(text, &[])
    }

    pub fn load(path: Option<&Path>, overrides: &[(String, String)]) -> Result<Self, CliError> {
        let text = match path {
            Some(p) => std::fs::read_to_string(p)
                .map_err(|e| CliError::Config(vec![format!("cannot read {}: {e}", p.display())]))?,
            None => String::new(),
        };
        Self::from_toml_with_overrides(&text, overrides)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes to TOML")
    }

    /// Lists every constraint violation.
    pub fn validate(&self) -> Result<(), CliError> {
        let mut errors = Vec::new();
        let mut check = |ok: bool, msg: String| {
            if !ok {
                errors.push(msg);
            }
        };
        let c = &self.classical;
        let q = &self.quantum;
        check(self.map.k.is_finite(), format!("map.k must be finite, got {}", self.map.k));
        if let Err(e) = Leak::new(self.leak.center, self.leak.width) {
            check(false, format!("leak: {e}"));
        }
        check(c.grid_q >= 2, format!("classical.grid_q must be at least 2, got {}", c.grid_q));
        check(c.grid_p >= 2, format!("classical.grid_p must be at least 2, got {}", c.grid_p));
        check(c.ftle_iterations >= 1, "classical.ftle_iterations must be positive".into());
        check(c.t_max >= 1, "classical.t_max must be positive".into());
        check(c.histogram_bins >= 1, "classical.histogram_bins must be positive".into());
        check(
            c.cutoff_tolerance > 0.0 && c.cutoff_tolerance.is_finite(),
            format!("classical.cutoff_tolerance must be positive, got {}", c.cutoff_tolerance),
        );
        check(c.random_ic_iterations >= 1, "classical.random_ic_iterations must be positive".into());
        check(q.n >= 2, format!("quantum.n must be at least 2, got {}", q.n));
        check(q.husimi_q >= 1, "quantum.husimi_q must be positive".into());
        check(q.husimi_p >= 1, "quantum.husimi_p must be positive".into());
        check(
            (1..=q.n).contains(&q.top_states),
            format!("quantum.top_states must lie in 1..={}, got {}", q.n, q.top_states),
        );
        check(
            q.dwell_bin > 0.0 && q.dwell_bin.is_finite(),
            format!("quantum.dwell_bin must be positive, got {}", q.dwell_bin),
        );
        check(self.scan.positions >= 1, "scan.positions must be positive".into());
        for &d in &self.scan.convergence_dims {
            check(d >= 2, format!("scan.convergence_dims entries must be at least 2, got {d}"));
        }
        check(self.run.seed <= i64::MAX as u64, "run.seed must fit in a signed 64-bit integer".into());
        check(!self.run.output_dir.is_empty(), "run.output_dir must not be empty".into());
        if errors.is_empty() {
            Ok(())
        } else {
            Err(CliError::Config(errors))
        }
    }

    pub fn map_params(&self) -> leakmap::Result<MapParams> {
        MapParams::new(self.map.k)
    }

    pub fn leak(&self) -> leakmap::Result<Leak> {
        Leak::new(self.leak.center, self.leak.width)
    }

    pub fn grid(&self) -> leakmap::Result<PhaseSpaceGrid> {
        PhaseSpaceGrid::new(self.classical.grid_q, self.classical.grid_p)
    }

    pub fn quantum_params(&self) -> leakmap::Result<QuantumParams> {
        QuantumParams::new(self.quantum.n, self.map.k)
    }

    pub fn quantum_scan_options(&self) -> QuantumScanOptions {
        QuantumScanOptions {
            exclude_zero_modes: self.quantum.exclude_zero_modes,
        }
    }

    pub fn rng(&self, stream: Stream) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.run.seed);
        rng.set_stream(stream as u64);
        rng
    }
}

fn schema() -> Table {
    Table::try_from(Config::default()).expect("defaults serialize to a table")
}

fn set(table: &mut Table, section: &str, key: &str, value: Value) {
    if let Some(Value::Table(t)) = table.get_mut(section) {
        t.insert(key.to_string(), value);
    }
}

fn type_name(v: &Value) -> &'static str {
    v.type_str()
}

/// Checks `value` against the type of the default, widening integers to
/// floats where a float is expected.
fn coerce(default: &Value, value: Value) -> Result<Value, String> {
    match (default, value) {
        (Value::Float(_), Value::Integer(i)) => Ok(Value::Float(i as f64)),
        (Value::Integer(_), Value::Integer(i)) if i < 0 => Err(format!("must be non-negative, got {i}")),
        (Value::Array(_), Value::Array(items)) => items
            .into_iter()
            .map(|item| coerce(&Value::Integer(0), item))
            .collect::<Result<Vec<_>, _>>()
            .map(Value::Array),
        (d, v) if std::mem::discriminant(d) == std::mem::discriminant(&v) => Ok(v),
        (d, v) => Err(format!("expected {}, got {}", type_name(d), type_name(&v))),
    }
}

fn parse_override(default: &Value, text: &str) -> Result<Value, String> {
    let value = match default {
        Value::String(_) => Value::String(text.to_string()),
        _ => {
            let doc: Table = format!("v = {text}")
                .parse()
                .map_err(|_| format!("cannot parse `{text}` as {}", type_name(default)))?;
            doc["v"].clone()
        }
    };
    coerce(default, value)
}

/// Maps `section.key` or a bare unique `key` onto its section.
fn resolve_key(schema: &Table, path: &str) -> Result<(String, String), String> {
    if let Some((section, key)) = path.split_once('.') {
        return match schema.get(section).and_then(Value::as_table) {
            Some(t) if t.contains_key(key) => Ok((section.to_string(), key.to_string())),
            _ => Err(format!("unknown key {path}")),
        };
    }
    let owners: Vec<&String> = schema
        .iter()
        .filter(|(_, t)| t.as_table().is_some_and(|t| t.contains_key(path)))
        .map(|(s, _)| s)
        .collect();
    match owners.as_slice() {
        [section] => Ok(((*section).clone(), path.to_string())),
        [] => Err(format!("unknown key {path}")),
        _ => Err(format!("ambiguous key {path}")),
    }
}

/// Splits trailing arguments into `(key, value)` pairs. Accepts
/// `--key value` and `--key=value`.
pub fn parse_override_args(args: &[String]) -> Result<Vec<(String, String)>, CliError> {
    let mut pairs = Vec::new();
    let mut errors = Vec::new();
    let mut iter = args.iter();
    while let Some(arg) = iter.next() {
        let Some(body) = arg.strip_prefix("--") else {
            errors.push(format!("unexpected argument `{arg}`, expected --key value"));
            continue;
        };
        if let Some((k, v)) = body.split_once('=') {
            pairs.push((k.to_string(), v.to_string()));
        } else if let Some(v) = iter.next() {
            pairs.push((body.to_string(), v.clone()));
        } else {
            errors.push(format!("missing value for --{body}"));
        }
    }
    if errors.is_empty() {
        Ok(pairs)
    } else {
        Err(CliError::Config(errors))
    }
}
