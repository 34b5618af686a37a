//! Tool manifests: the declarative wrapper around an external executable.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use flowmesh_core::{PortDirection, PortName, PortSpec, VersionChannel};

pub const DEFAULT_TIMEOUT_SECONDS: u64 = 3600;

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("manifest syntax error at line {line}, column {column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("manifest schema error at {path}: {message}")]
    Schema { path: String, message: String },
    #[error("command references undeclared input port in {0:?}")]
    InvalidPlaceholder(String),
}

fn schema(path: impl Into<String>, message: impl Into<String>) -> ManifestError {
    ManifestError::Schema { path: path.into(), message: message.into() }
}

/// Declarative wrapper for an external tool.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ToolManifest {
    pub tool_id: String,
    pub display_name: String,
    pub channel: VersionChannel,
    pub ports: Vec<PortSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pre_script: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub post_script: Option<String>,
    /// Argument vector; placeholders `${run_dir}` and `${input:NAME}`.
    pub command: Vec<String>,
    #[serde(default = "default_timeout")]
    pub timeout_seconds: u64,
    #[serde(default = "default_exit_codes")]
    pub expected_exit_codes: BTreeSet<i32>,
}

fn default_timeout() -> u64 {
    DEFAULT_TIMEOUT_SECONDS
}

fn default_exit_codes() -> BTreeSet<i32> {
    BTreeSet::from([0])
}

impl ToolManifest {
    pub fn inputs(&self) -> impl Iterator<Item = &PortSpec> {
        self.ports.iter().filter(|p| p.is_input())
    }

    pub fn outputs(&self) -> impl Iterator<Item = &PortSpec> {
        self.ports.iter().filter(|p| !p.is_input())
    }

    pub fn validate(&self) -> Result<(), ManifestError> {
        if !is_tool_id(&self.tool_id) {
            return Err(schema("toolId", "must match [a-z0-9_-]+ (max 128 chars)"));
        }
        if self.command.is_empty() {
            return Err(schema("command", "must not be empty"));
        }
        if self.timeout_seconds == 0 {
            return Err(schema("timeoutSeconds", "must be a positive integer"));
        }
        let mut seen: BTreeSet<(PortDirection, &PortName)> = BTreeSet::new();
        for (i, port) in self.ports.iter().enumerate() {
            port.check().map_err(|e| schema(format!("ports[{i}]"), e.to_string()))?;
            if !seen.insert((port.direction, &port.name)) {
                return Err(schema(
                    format!("ports[{i}].name"),
                    format!("duplicate {} port {:?}", direction_name(port.direction), port.name),
                ));
            }
        }
        let inputs: BTreeSet<&str> = self.inputs().map(|p| p.name.as_str()).collect();
        for arg in &self.command {
            for placeholder in placeholders(arg) {
                match placeholder {
                    Placeholder::RunDir => {}
                    Placeholder::Input(name) => {
                        if !inputs.contains(name) {
                            return Err(ManifestError::InvalidPlaceholder(arg.clone()));
                        }
                    }
                    Placeholder::Unknown => {
                        return Err(ManifestError::InvalidPlaceholder(arg.clone()))
                    }
                }
            }
        }
        Ok(())
    }
}

fn direction_name(d: PortDirection) -> &'static str {
    match d {
        PortDirection::Input => "input",
        PortDirection::Output => "output",
    }
}

fn is_tool_id(s: &str) -> bool {
    !s.is_empty()
        && s.len() <= 128
        && s.bytes().all(|b| matches!(b, b'a'..=b'z' | b'0'..=b'9' | b'_' | b'-'))
}

pub(crate) enum Placeholder<'a> {
    RunDir,
    Input(&'a str),
    Unknown,
}

/// Yields every `${...}` occurrence in an argument.
pub(crate) fn placeholders(arg: &str) -> impl Iterator<Item = Placeholder<'_>> {
    let mut rest = arg;
    std::iter::from_fn(move || {
        let start = rest.find("${")?;
        let after = &rest[start + 2..];
        let end = match after.find('}') {
            Some(e) => e,
            None => {
                rest = "";
                return Some(Placeholder::Unknown);
            }
        };
        let body = &after[..end];
        rest = &after[end + 1..];
        Some(match body {
            "run_dir" => Placeholder::RunDir,
            _ => match body.strip_prefix("input:") {
                Some(name) => Placeholder::Input(name),
                None => Placeholder::Unknown,
            },
        })
    })
}

/// Parses and validates a manifest document.
pub fn load_manifest(text: &str) -> Result<ToolManifest, ManifestError> {
    let manifest: ToolManifest = serde_json::from_str(text).map_err(|e| {
        if e.is_syntax() || e.is_eof() {
            ManifestError::Syntax { line: e.line(), column: e.column(), message: e.to_string() }
        } else {
            ManifestError::Schema { path: format!("line {}", e.line()), message: e.to_string() }
        }
    })?;
    manifest.validate()?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fig2_manifest() -> String {
        // One engine-supplied input, two declared outputs, both scripts.
        r#"{
            "toolId": "adder",
            "displayName": "Adder",
            "channel": "stable",
            "ports": [
                {"name": "a", "datatype": "float", "direction": "input"},
                {"name": "b", "datatype": "float", "direction": "input"},
                {"name": "sum", "datatype": "float", "direction": "output"},
                {"name": "diff", "datatype": "float", "direction": "output"},
                {"name": "prod", "datatype": "float", "direction": "output"}
            ],
            "preScript": "print('pre')",
            "postScript": "print('post')",
            "command": ["python3", "-c", "pass"]
        }"#
        .to_string()
    }

    #[test]
    fn loads_fig2_shape() {
        let m = load_manifest(&fig2_manifest()).unwrap();
        assert_eq!(m.inputs().count(), 2);
        assert_eq!(m.outputs().count(), 3);
        assert!(m.pre_script.is_some());
        assert_eq!(m.timeout_seconds, DEFAULT_TIMEOUT_SECONDS);
        assert_eq!(m.expected_exit_codes, BTreeSet::from([0]));
    }

    #[test]
    fn scriptless_manifest() {
        let text = r#"{
            "toolId": "echo",
            "displayName": "Echo",
            "channel": "stable",
            "ports": [],
            "command": ["echo"]
        }"#;
        let m = load_manifest(text).unwrap();
        assert!(m.pre_script.is_none());
        assert!(m.post_script.is_none());
    }

    #[test]
    fn undeclared_placeholder_rejected() {
        let text = fig2_manifest().replace(
            r#""command": ["python3", "-c", "pass"]"#,
            r#""command": ["python3", "${input:missing}"]"#,
        );
        assert!(matches!(load_manifest(&text), Err(ManifestError::InvalidPlaceholder(_))));
    }

    #[test]
    fn run_dir_placeholder_allowed() {
        let text = fig2_manifest().replace(
            r#""command": ["python3", "-c", "pass"]"#,
            r#""command": ["python3", "${run_dir}/x", "${input:a}"]"#,
        );
        assert!(load_manifest(&text).is_ok());
    }

    #[test]
    fn empty_command_rejected() {
        let text = fig2_manifest().replace(
            r#""command": ["python3", "-c", "pass"]"#,
            r#""command": []"#,
        );
        assert!(matches!(load_manifest(&text), Err(ManifestError::Schema { .. })));
    }

    #[test]
    fn duplicate_port_rejected() {
        let text = fig2_manifest().replace(
            r#"{"name": "b", "datatype": "float", "direction": "input"},"#,
            r#"{"name": "a", "datatype": "float", "direction": "input"},"#,
        );
        assert!(matches!(load_manifest(&text), Err(ManifestError::Schema { .. })));
    }

    #[test]
    fn syntax_error_position() {
        assert!(matches!(load_manifest("{"), Err(ManifestError::Syntax { .. })));
    }
}
