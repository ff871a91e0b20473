//! Flat `key = value` run configuration with dotted sections.
//!
//! Every key has a type and a default. Files may set any subset; unknown
//! keys, duplicates and malformed values are rejected with the line number.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::ser::{Serialize, SerializeMap, Serializer};

#[derive(Debug, Clone, Copy, PartialEq)]
enum Kind {
    Float,
    Int,
    Bool,
    Text,
    /// Comma-separated floats; may be empty.
    Floats,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Float(f64),
    Int(usize),
    Bool(bool),
    Text(String),
    Floats(Vec<f64>),
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Float(x) => write!(f, "{x:?}"),
            Value::Int(n) => write!(f, "{n}"),
            Value::Bool(b) => write!(f, "{b}"),
            Value::Text(s) => f.write_str(s),
            Value::Floats(v) => {
                let parts: Vec<String> = v.iter().map(|x| format!("{x:?}")).collect();
                f.write_str(&parts.join(","))
            }
        }
    }
}

impl Serialize for Value {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Value::Float(x) => s.serialize_f64(*x),
            Value::Int(n) => s.serialize_u64(*n as u64),
            Value::Bool(b) => s.serialize_bool(*b),
            Value::Text(t) => s.serialize_str(t),
            Value::Floats(v) => v.serialize(s),
        }
    }
}

const SCHEMA: &[(&str, Kind, &str)] = &[
    ("potential.kind", Kind::Text, "constant"),
    ("potential.dim", Kind::Int, "3"),
    ("potential.c", Kind::Float, "0"),
    ("potential.alpha1", Kind::Float, "0"),
    ("potential.alpha2", Kind::Float, "0"),
    ("potential.alpha3", Kind::Float, "0"),
    ("potential.alpha4", Kind::Float, "0"),
    ("potential.mu", Kind::Float, "0"),
    ("potential.table", Kind::Text, ""),
    ("pair.delta", Kind::Float, "0"),
    ("pair.a_amp", Kind::Float, "0"),
    ("pair.plateau", Kind::Float, "1"),
    ("pair.support", Kind::Float, "2"),
    ("solver.epsilon0", Kind::Float, "1e-6"),
    ("solver.rel_tol", Kind::Float, "1e-10"),
    ("solver.abs_tol", Kind::Float, "1e-12"),
    ("solver.r_max", Kind::Float, "20"),
    ("solver.grow_factor", Kind::Float, "10"),
    ("solver.floor_u", Kind::Float, "1e-300"),
    ("solver.picard_iterations", Kind::Int, "2"),
    ("task.beta_lo", Kind::Float, "0.5"),
    ("task.beta_hi", Kind::Float, "50"),
    ("task.samples", Kind::Int, "64"),
    ("task.tol", Kind::Float, "1e-12"),
    ("task.profile_points", Kind::Int, "2001"),
    ("task.cells", Kind::Int, "320"),
    ("task.scaling_shift", Kind::Float, "-0.8"),
    ("task.mesh_points", Kind::Int, "4000"),
    ("task.large_beta", Kind::Floats, ""),
    ("task.r_box", Kind::Float, "12"),
    ("task.spectrum_cells", Kind::Int, "400"),
    ("task.levels", Kind::Int, "3"),
    ("task.count", Kind::Int, "4"),
    ("task.shift", Kind::Float, "0"),
    ("task.tol_zero", Kind::Float, "1e-2"),
    ("task.alpha", Kind::Float, "0"),
    ("task.sigmas", Kind::Floats, "0.5,0.25,0.1,0.05"),
    ("task.max_final", Kind::Float, "inf"),
    ("task.v2_r_min", Kind::Float, "1e-4"),
    ("task.v2_r_max", Kind::Float, "1e4"),
    ("task.v2_points", Kind::Int, "512"),
    ("output.dir", Kind::Text, "."),
    ("output.deterministic", Kind::Bool, "true"),
];

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(n) => write!(f, "line {n}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

fn parse_value(kind: Kind, raw: &str) -> Result<Value, String> {
    let float = |s: &str| -> Result<f64, String> {
        let x: f64 = s.trim().parse().map_err(|_| format!("invalid number '{}'", s.trim()))?;
        if x.is_nan() {
            return Err("NaN is not a valid value".into());
        }
        Ok(x)
    };
    match kind {
        Kind::Float => float(raw).map(Value::Float),
        Kind::Int => raw
            .parse()
            .map(Value::Int)
            .map_err(|_| format!("invalid non-negative integer '{raw}'")),
        Kind::Bool => match raw {
            "true" => Ok(Value::Bool(true)),
            "false" => Ok(Value::Bool(false)),
            _ => Err(format!("expected true or false, got '{raw}'")),
        },
        Kind::Text => Ok(Value::Text(raw.to_string())),
        Kind::Floats if raw.is_empty() => Ok(Value::Floats(Vec::new())),
        Kind::Floats => raw.split(',').map(float).collect::<Result<_, _>>().map(Value::Floats),
    }
}

/// The fully resolved configuration: every schema key with its value.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    values: BTreeMap<&'static str, Value>,
    /// Directory of the config file, against which relative paths resolve.
    base: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        let values = SCHEMA
            .iter()
            .map(|&(key, kind, default)| (key, parse_value(kind, default).expect("valid default")))
            .collect();
        Self {
            values,
            base: PathBuf::from("."),
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut config = Self::default();
        let mut seen: BTreeMap<&'static str, usize> = BTreeMap::new();
        for (index, line) in text.lines().enumerate() {
            let lineno = index + 1;
            let err = |message: String| ConfigError {
                line: Some(lineno),
                message,
            };
            let line = match line.find('#') {
                Some(p) => &line[..p],
                None => line,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let (key, raw) = line
                .split_once('=')
                .ok_or_else(|| err(format!("expected 'key = value', got '{line}'")))?;
            let (key, raw) = (key.trim(), raw.trim());
            let &(name, kind, _) = SCHEMA
                .iter()
                .find(|(k, _, _)| *k == key)
                .ok_or_else(|| err(format!("unknown key '{key}'")))?;
            if let Some(first) = seen.insert(name, lineno) {
                return Err(err(format!("duplicate key '{key}' (first set on line {first})")));
            }
            let value = parse_value(kind, raw).map_err(|m| err(format!("{key}: {m}")))?;
            config.values.insert(name, value);
        }
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError {
            line: None,
            message: format!("cannot read {}: {e}", path.display()),
        })?;
        let mut config = Self::parse(&text)?;
        config.base = path.parent().map_or_else(|| PathBuf::from("."), Path::to_path_buf);
        Ok(config)
    }

    pub fn set_text(&mut self, key: &'static str, value: &str) {
        self.values.insert(key, Value::Text(value.to_string()));
    }

    fn get(&self, key: &str) -> &Value {
        self.values
            .get(key)
            .unwrap_or_else(|| panic!("'{key}' is not a configuration key"))
    }

    pub fn float(&self, key: &str) -> f64 {
        match self.get(key) {
            Value::Float(x) => *x,
            other => panic!("'{key}' is not a float: {other:?}"),
        }
    }

    pub fn int(&self, key: &str) -> usize {
        match self.get(key) {
            Value::Int(n) => *n,
            other => panic!("'{key}' is not an integer: {other:?}"),
        }
    }

    pub fn flag(&self, key: &str) -> bool {
        match self.get(key) {
            Value::Bool(b) => *b,
            other => panic!("'{key}' is not a bool: {other:?}"),
        }
    }

    pub fn text(&self, key: &str) -> &str {
        match self.get(key) {
            Value::Text(s) => s,
            other => panic!("'{key}' is not text: {other:?}"),
        }
    }

    pub fn floats(&self, key: &str) -> &[f64] {
        match self.get(key) {
            Value::Floats(v) => v,
            other => panic!("'{key}' is not a list: {other:?}"),
        }
    }

    /// A path value, relative to the config file's directory.
    pub fn path(&self, key: &str) -> PathBuf {
        self.base.join(self.text(key))
    }

    /// Renders the configuration back to the file format.
    pub fn to_text(&self) -> String {
        self.values.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}

impl Serialize for RunConfig {
    /// Non-finite floats (only `task.max_final = inf`) are written as strings
    /// so the record stays finite.
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut map = s.serialize_map(Some(self.values.len()))?;
        for (k, v) in &self.values {
            match v {
                Value::Float(x) if !x.is_finite() => map.serialize_entry(k, &v.to_string())?,
                _ => map.serialize_entry(k, v)?,
            }
        }
        map.end()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_cover_every_key() {
        let c = RunConfig::default();
        assert_eq!(c.values.len(), SCHEMA.len());
        assert_eq!(c.float("solver.r_max"), 20.0);
        assert_eq!(c.floats("task.sigmas"), &[0.5, 0.25, 0.1, 0.05]);
        assert!(c.floats("task.large_beta").is_empty());
        assert!(c.float("task.max_final").is_infinite());
    }

    #[test]
    fn parses_sections_and_comments() {
        let c = RunConfig::parse(
            "# inverted oscillator\npotential.kind = inverted_harmonic\n\npotential.mu = 0.1875  # 3/16\nsolver.r_max=40\n",
        )
        .unwrap();
        assert_eq!(c.text("potential.kind"), "inverted_harmonic");
        assert_eq!(c.float("potential.mu"), 0.1875);
        assert_eq!(c.float("solver.r_max"), 40.0);
        assert_eq!(c.int("potential.dim"), 3);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let e = RunConfig::parse("potential.dim = 3\n\nsolver.rmax = 4\n").unwrap_err();
        assert_eq!(e.line, Some(3));
        assert!(e.message.contains("unknown key"));
        let e = RunConfig::parse("potential.dim = three\n").unwrap_err();
        assert_eq!(e.line, Some(1));
        let e = RunConfig::parse("solver.r_max = 4\nsolver.r_max = 5\n").unwrap_err();
        assert_eq!(e.line, Some(2));
        let e = RunConfig::parse("just text\n").unwrap_err();
        assert_eq!(e.line, Some(1));
        let e = RunConfig::parse("solver.r_max = nan\n").unwrap_err();
        assert_eq!(e.line, Some(1));
    }

    #[test]
    fn round_trips_through_text() {
        let c = RunConfig::parse("task.sigmas = 0.4, 0.2\ntask.large_beta = 1e3,1e4\n").unwrap();
        let d = RunConfig::parse(&c.to_text()).unwrap();
        assert_eq!(c.values, d.values);
    }
}
