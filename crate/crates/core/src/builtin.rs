//! Built-in component kinds: identifiers, port schemas, and typed configs.
//!
//! Port schemas are part of the document vocabulary (a `.wf` file fixes
//! them), so they live here; firing behavior lives in the builtins crate.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::ids::PortName;
use crate::port::{PortMode, PortSpec};
use crate::value::{DataType, DataValue};

/// Stable identifiers of the pre-defined components.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BuiltinKind {
    ValueSource,
    Script,
    Switch,
    XmlExtract,
    Sweep,
    Merger,
    Converger,
    Optimizer,
}

impl BuiltinKind {
    pub const ALL: [BuiltinKind; 8] = [
        BuiltinKind::ValueSource,
        BuiltinKind::Script,
        BuiltinKind::Switch,
        BuiltinKind::XmlExtract,
        BuiltinKind::Sweep,
        BuiltinKind::Merger,
        BuiltinKind::Converger,
        BuiltinKind::Optimizer,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            BuiltinKind::ValueSource => "value_source",
            BuiltinKind::Script => "script",
            BuiltinKind::Switch => "switch",
            BuiltinKind::XmlExtract => "xml_extract",
            BuiltinKind::Sweep => "sweep",
            BuiltinKind::Merger => "merger",
            BuiltinKind::Converger => "converger",
            BuiltinKind::Optimizer => "optimizer",
        }
    }

    /// Loop drivers are the only components allowed to close a cycle.
    pub fn is_loop_driver(&self) -> bool {
        matches!(self, BuiltinKind::Converger | BuiltinKind::Optimizer)
    }
}

impl fmt::Display for BuiltinKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("unknown builtin kind {0:?}")]
pub struct UnknownBuiltin(pub String);

impl FromStr for BuiltinKind {
    type Err = UnknownBuiltin;
    fn from_str(s: &str) -> Result<Self, UnknownBuiltin> {
        BuiltinKind::ALL
            .iter()
            .copied()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| UnknownBuiltin(s.to_string()))
    }
}

/// A config problem that makes a builtin component unusable.
#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("config key {key:?}: {problem}")]
    Key { key: String, problem: String },
    #[error("missing config key {0:?}")]
    Missing(String),
    #[error("config declares no valid port name in key {0:?}")]
    BadPortName(String),
    #[error("duplicate port {0} declared by config")]
    DuplicatePort(PortName),
    #[error("{0}")]
    Other(String),
}

fn key_err(key: &str, problem: impl Into<String>) -> ConfigError {
    ConfigError::Key { key: key.to_string(), problem: problem.into() }
}

pub type Config = BTreeMap<String, DataValue>;

fn text_value<'a>(config: &'a Config, key: &str) -> Result<&'a str, ConfigError> {
    match config.get(key) {
        Some(DataValue::ShortText(s)) => Ok(s),
        Some(v) => Err(key_err(key, format!("expected short_text, got {}", v.datatype()))),
        None => Err(ConfigError::Missing(key.to_string())),
    }
}

fn float_value(config: &Config, key: &str) -> Result<f64, ConfigError> {
    match config.get(key) {
        Some(DataValue::Float(v)) => Ok(*v),
        Some(v) => Err(key_err(key, format!("expected float, got {}", v.datatype()))),
        None => Err(ConfigError::Missing(key.to_string())),
    }
}

fn int_value(config: &Config, key: &str) -> Result<i64, ConfigError> {
    match config.get(key) {
        Some(DataValue::Integer(v)) => Ok(*v),
        Some(v) => Err(key_err(key, format!("expected integer, got {}", v.datatype()))),
        None => Err(ConfigError::Missing(key.to_string())),
    }
}

fn datatype_value(config: &Config, key: &str) -> Result<DataType, ConfigError> {
    text_value(config, key)?.parse().map_err(|e| key_err(key, format!("{e}")))
}

fn port_from_key(key: &str, prefix: &str) -> Result<PortName, ConfigError> {
    key.strip_prefix(prefix)
        .expect("caller checked prefix")
        .parse()
        .map_err(|_| ConfigError::BadPortName(key.to_string()))
}

/// Declared ports with the `in:`/`out:` config convention, where each such
/// key holds the port's datatype name as short_text.
fn declared_ports(
    config: &Config,
    prefix: &str,
    build: impl Fn(PortName, DataType) -> PortSpec,
) -> Result<Vec<PortSpec>, ConfigError> {
    let mut out = Vec::new();
    for (key, value) in config {
        if !key.starts_with(prefix) {
            continue;
        }
        let name = port_from_key(key, prefix)?;
        let datatype = match value {
            DataValue::ShortText(s) => {
                s.parse::<DataType>().map_err(|e| key_err(key, format!("{e}")))?
            }
            other => {
                return Err(key_err(key, format!("expected short_text datatype name, got {}", other.datatype())))
            }
        };
        out.push(build(name, datatype));
    }
    Ok(out)
}

/// Derives the port list of a builtin component from its config.
///
/// Fixed-schema kinds ignore unrelated config keys here; full config
/// validation happens in [`validate_config`].
pub fn derive_ports(kind: BuiltinKind, config: &Config) -> Result<Vec<PortSpec>, ConfigError> {
    let input = |n: &str, t: DataType, required: bool| {
        PortSpec::input(n.parse().expect("static name"), t, PortMode::Consumed, required)
    };
    let output = |n: &str, t: DataType| PortSpec::output(n.parse().expect("static name"), t);

    let mut ports = match kind {
        BuiltinKind::ValueSource => {
            let mut ports = Vec::new();
            for (key, value) in config {
                let name: PortName =
                    key.parse().map_err(|_| ConfigError::BadPortName(key.clone()))?;
                ports.push(PortSpec::output(name, value.datatype()));
            }
            ports
        }
        BuiltinKind::Script => {
            let mut ports = declared_ports(config, "in:", |name, t| {
                PortSpec::input(name, t, PortMode::Consumed, true)
            })?;
            ports.extend(declared_ports(config, "out:", PortSpec::output)?);
            ports
        }
        BuiltinKind::Switch => {
            let datatype = datatype_value(config, "datatype")?;
            vec![
                input("value", datatype, true),
                output("true", datatype),
                output("false", datatype),
            ]
        }
        BuiltinKind::XmlExtract => {
            let mut ports = vec![input("file", DataType::File, true)];
            ports.extend(declared_ports(config, "out:", PortSpec::output)?);
            ports
        }
        BuiltinKind::Sweep => vec![output("value", DataType::Float), output("count", DataType::Integer)],
        BuiltinKind::Merger => {
            let datatype = datatype_value(config, "datatype")?;
            let k = match config.get("inputs") {
                Some(DataValue::Integer(k)) => *k,
                Some(v) => {
                    return Err(key_err("inputs", format!("expected integer, got {}", v.datatype())))
                }
                None => 2,
            };
            if !(1..=16).contains(&k) {
                return Err(key_err("inputs", "must be between 1 and 16"));
            }
            let mut ports: Vec<PortSpec> = (1..=k)
                .map(|i| {
                    PortSpec::input(
                        format!("in{i}").parse().expect("static name"),
                        datatype,
                        PortMode::Consumed,
                        false,
                    )
                })
                .collect();
            ports.push(output("out", datatype));
            ports
        }
        BuiltinKind::Converger => vec![
            input("x", DataType::Float, true),
            output("loop", DataType::Float),
            output("final", DataType::Float),
            output("converged", DataType::Boolean),
        ],
        BuiltinKind::Optimizer => vec![
            input("objective", DataType::Float, false),
            output("candidate", DataType::FloatList),
            output("optimum", DataType::FloatList),
            output("optimumValue", DataType::Float),
        ],
    };

    ports.sort_by(|a, b| (a.direction as u8, &a.name).cmp(&(b.direction as u8, &b.name)));
    let mut seen: Option<&PortSpec> = None;
    for p in &ports {
        if let Some(prev) = seen {
            if prev.name == p.name && prev.direction == p.direction {
                return Err(ConfigError::DuplicatePort(p.name.clone()));
            }
        }
        seen = Some(p);
    }
    Ok(ports)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SwitchOperator {
    Less,
    LessEq,
    Equal,
    GreaterEq,
    Greater,
}

impl SwitchOperator {
    pub fn as_str(&self) -> &'static str {
        match self {
            SwitchOperator::Less => "<",
            SwitchOperator::LessEq => "<=",
            SwitchOperator::Equal => "=",
            SwitchOperator::GreaterEq => ">=",
            SwitchOperator::Greater => ">",
        }
    }
}

impl FromStr for SwitchOperator {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match s {
            "<" => SwitchOperator::Less,
            "<=" => SwitchOperator::LessEq,
            "=" => SwitchOperator::Equal,
            ">=" => SwitchOperator::GreaterEq,
            ">" => SwitchOperator::Greater,
            _ => return Err(format!("unknown operator {s:?}: expected <, <=, =, >= or >")),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SwitchConfig {
    pub datatype: DataType,
    pub operator: SwitchOperator,
    pub threshold: DataValue,
}

impl SwitchConfig {
    pub fn from_config(config: &Config) -> Result<Self, ConfigError> {
        let datatype = datatype_value(config, "datatype")?;
        let operator: SwitchOperator =
            text_value(config, "operator")?.parse().map_err(|e| key_err("operator", e))?;
        let threshold =
            config.get("threshold").cloned().ok_or(ConfigError::Missing("threshold".into()))?;
        if threshold.datatype() != datatype {
            return Err(key_err(
                "threshold",
                format!("expected {}, got {}", datatype, threshold.datatype()),
            ));
        }
        let ordered = matches!(datatype, DataType::Integer | DataType::Float);
        let comparable = ordered || matches!(datatype, DataType::Boolean | DataType::ShortText);
        if operator != SwitchOperator::Equal && !ordered {
            return Err(key_err("operator", format!("{} requires integer or float ports", operator.as_str())));
        }
        if !comparable {
            return Err(key_err("datatype", format!("{datatype} values are not comparable")));
        }
        Ok(SwitchConfig { datatype, operator, threshold })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub from: f64,
    pub to: f64,
    pub steps: i64,
}

impl SweepConfig {
    pub fn from_config(config: &Config) -> Result<Self, ConfigError> {
        Ok(SweepConfig {
            from: float_value(config, "from")?,
            to: float_value(config, "to")?,
            steps: int_value(config, "steps")?,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergerConfig {
    pub eps_abs: f64,
    pub eps_rel: f64,
    pub max_iterations: u64,
}

impl ConvergerConfig {
    pub fn from_config(config: &Config) -> Result<Self, ConfigError> {
        let eps_abs = float_value(config, "epsAbs")?;
        if eps_abs <= 0.0 {
            return Err(key_err("epsAbs", "must be > 0"));
        }
        let eps_rel = match config.get("epsRel") {
            None => 0.0,
            Some(_) => {
                let v = float_value(config, "epsRel")?;
                if v < 0.0 {
                    return Err(key_err("epsRel", "must be >= 0"));
                }
                v
            }
        };
        let max_iterations = match config.get("maxIterations") {
            None => 100,
            Some(_) => {
                let v = int_value(config, "maxIterations")?;
                if v < 1 {
                    return Err(key_err("maxIterations", "must be >= 1"));
                }
                v as u64
            }
        };
        Ok(ConvergerConfig { eps_abs, eps_rel, max_iterations })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerConfig {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub start: Option<Vec<f64>>,
    pub f_tol: f64,
    pub x_tol: f64,
    pub max_evaluations: u64,
}

impl OptimizerConfig {
    pub fn from_config(config: &Config) -> Result<Self, ConfigError> {
        let list = |key: &str| -> Result<Vec<f64>, ConfigError> {
            match config.get(key) {
                Some(DataValue::FloatList(v)) => Ok(v.clone()),
                Some(v) => Err(key_err(key, format!("expected float_list, got {}", v.datatype()))),
                None => Err(ConfigError::Missing(key.to_string())),
            }
        };
        let lower = list("lower")?;
        let upper = list("upper")?;
        if lower.is_empty() || lower.len() != upper.len() {
            return Err(ConfigError::Other(format!(
                "bounds dimension mismatch: lower has {}, upper has {}",
                lower.len(),
                upper.len()
            )));
        }
        for (i, (lo, hi)) in lower.iter().zip(&upper).enumerate() {
            if lo >= hi {
                return Err(ConfigError::Other(format!(
                    "bounds[{i}]: lower {lo} must be < upper {hi}"
                )));
            }
        }
        let start = match config.get("start") {
            None => None,
            Some(_) => {
                let s = list("start")?;
                if s.len() != lower.len() {
                    return Err(ConfigError::Other(format!(
                        "start dimension {} does not match bounds dimension {}",
                        s.len(),
                        lower.len()
                    )));
                }
                Some(s)
            }
        };
        let pos_float = |key: &str, default: f64| -> Result<f64, ConfigError> {
            match config.get(key) {
                None => Ok(default),
                Some(_) => {
                    let v = float_value(config, key)?;
                    if v <= 0.0 {
                        return Err(key_err(key, "must be > 0"));
                    }
                    Ok(v)
                }
            }
        };
        let f_tol = pos_float("fTol", 1e-8)?;
        let x_tol = pos_float("xTol", 1e-6)?;
        let max_evaluations = match config.get("maxEvaluations") {
            None => 1000,
            Some(_) => {
                let v = int_value(config, "maxEvaluations")?;
                if v < 1 {
                    return Err(key_err("maxEvaluations", "must be >= 1"));
                }
                v as u64
            }
        };
        Ok(OptimizerConfig { lower, upper, start, f_tol, x_tol, max_evaluations })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct XmlExtractConfig {
    /// Element path per output port, e.g. `wing/span` or `wing@id`.
    pub paths: BTreeMap<PortName, String>,
}

impl XmlExtractConfig {
    pub fn from_config(config: &Config) -> Result<Self, ConfigError> {
        let mut paths = BTreeMap::new();
        let mut outs = Vec::new();
        for key in config.keys() {
            if key.starts_with("out:") {
                outs.push(port_from_key(key, "out:")?);
            }
        }
        for (key, value) in config {
            if let Some(_name) = key.strip_prefix("path:") {
                let port = port_from_key(key, "path:")?;
                let path = match value {
                    DataValue::ShortText(s) if !s.is_empty() => s.clone(),
                    _ => return Err(key_err(key, "expected non-empty short_text path")),
                };
                paths.insert(port, path);
            }
        }
        for port in &outs {
            if !paths.contains_key(port) {
                return Err(ConfigError::Missing(format!("path:{port}")));
            }
        }
        Ok(XmlExtractConfig { paths })
    }
}

/// Full semantic check of a builtin config, beyond what ports need.
pub fn validate_config(kind: BuiltinKind, config: &Config) -> Result<(), ConfigError> {
    match kind {
        BuiltinKind::ValueSource => Ok(()),
        BuiltinKind::Script => {
            text_value(config, "script")?;
            Ok(())
        }
        BuiltinKind::Switch => SwitchConfig::from_config(config).map(|_| ()),
        BuiltinKind::XmlExtract => XmlExtractConfig::from_config(config).map(|_| ()),
        BuiltinKind::Sweep => {
            let c = SweepConfig::from_config(config)?;
            if c.steps < 1 {
                return Err(key_err("steps", "must be >= 1"));
            }
            Ok(())
        }
        BuiltinKind::Merger => Ok(()),
        BuiltinKind::Converger => ConvergerConfig::from_config(config).map(|_| ()),
        BuiltinKind::Optimizer => OptimizerConfig::from_config(config).map(|_| ()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::port::PortDirection;

    fn cfg(pairs: &[(&str, DataValue)]) -> Config {
        pairs.iter().map(|(k, v)| (k.to_string(), v.clone())).collect()
    }

    #[test]
    fn value_source_ports_follow_config() {
        let config = cfg(&[("x", DataValue::Float(0.0)), ("flag", DataValue::Boolean(true))]);
        let ports = derive_ports(BuiltinKind::ValueSource, &config).unwrap();
        assert_eq!(ports.len(), 2);
        assert!(ports.iter().all(|p| p.direction == PortDirection::Output));
        let x = ports.iter().find(|p| p.name.as_str() == "x").unwrap();
        assert_eq!(x.datatype, DataType::Float);
    }

    #[test]
    fn script_ports_from_in_out_keys() {
        let config = cfg(&[
            ("script", DataValue::short_text("pass").unwrap()),
            ("in:shape", DataValue::short_text("float").unwrap()),
            ("out:lift", DataValue::short_text("float").unwrap()),
        ]);
        let ports = derive_ports(BuiltinKind::Script, &config).unwrap();
        assert_eq!(ports.len(), 2);
        let lift = ports.iter().find(|p| p.name.as_str() == "lift").unwrap();
        assert_eq!(lift.direction, PortDirection::Output);
    }

    #[test]
    fn converger_ports_fixed() {
        let ports = derive_ports(BuiltinKind::Converger, &Config::new()).unwrap();
        let names: Vec<&str> = ports.iter().map(|p| p.name.as_str()).collect();
        assert_eq!(names, vec!["x", "converged", "final", "loop"]);
    }

    #[test]
    fn merger_count_and_optionality() {
        let config = cfg(&[
            ("datatype", DataValue::short_text("integer").unwrap()),
            ("inputs", DataValue::Integer(3)),
        ]);
        let ports = derive_ports(BuiltinKind::Merger, &config).unwrap();
        let inputs: Vec<_> = ports.iter().filter(|p| p.is_input()).collect();
        assert_eq!(inputs.len(), 3);
        assert!(inputs.iter().all(|p| !p.is_required()));
    }

    #[test]
    fn switch_config_checks() {
        let good = cfg(&[
            ("datatype", DataValue::short_text("float").unwrap()),
            ("operator", DataValue::short_text("<").unwrap()),
            ("threshold", DataValue::Float(10.0)),
        ]);
        assert!(SwitchConfig::from_config(&good).is_ok());

        let bad_type = cfg(&[
            ("datatype", DataValue::short_text("short_text").unwrap()),
            ("operator", DataValue::short_text("<").unwrap()),
            ("threshold", DataValue::short_text("a").unwrap()),
        ]);
        assert!(SwitchConfig::from_config(&bad_type).is_err());

        let eq_text = cfg(&[
            ("datatype", DataValue::short_text("short_text").unwrap()),
            ("operator", DataValue::short_text("=").unwrap()),
            ("threshold", DataValue::short_text("a").unwrap()),
        ]);
        assert!(SwitchConfig::from_config(&eq_text).is_ok());
    }

    #[test]
    fn optimizer_config_bounds() {
        let good = cfg(&[
            ("lower", DataValue::float_list(vec![-10.0]).unwrap()),
            ("upper", DataValue::float_list(vec![10.0]).unwrap()),
        ]);
        let c = OptimizerConfig::from_config(&good).unwrap();
        assert_eq!(c.f_tol, 1e-8);
        let flipped = cfg(&[
            ("lower", DataValue::float_list(vec![10.0]).unwrap()),
            ("upper", DataValue::float_list(vec![-10.0]).unwrap()),
        ]);
        assert!(OptimizerConfig::from_config(&flipped).is_err());
    }
}
