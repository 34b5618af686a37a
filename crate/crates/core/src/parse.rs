//! Parsing of `.wf` workflow documents.
//!
//! The document format is UTF-8 JSON; see `docs/workflow-format.md` for
//! the full schema. Parsing checks structure and document-local
//! references; semantic validation against a catalog is a separate step
//! ([`crate::validate::validate_workflow`]).

use std::collections::{BTreeMap, BTreeSet};

use serde_json::Value;
use thiserror::Error;

use crate::builtin::{derive_ports, BuiltinKind};
use crate::ids::ComponentId;
use crate::port::{PortDirection, PortSpec};
use crate::value::DataValue;
use crate::workflow::{
    ComponentInstance, ComponentKind, Connection, Endpoint, WorkflowDefinition,
};

#[derive(Debug, Error)]
pub enum ParseError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("schema error at {path}: {message}")]
    Schema { path: String, message: String },
}

impl ParseError {
    fn schema(path: impl Into<String>, message: impl Into<String>) -> Self {
        ParseError::Schema { path: path.into(), message: message.into() }
    }

    /// The JSON path of a schema error, if any.
    pub fn path(&self) -> Option<&str> {
        match self {
            ParseError::Schema { path, .. } => Some(path),
            ParseError::Syntax { .. } => None,
        }
    }
}

/// Parses a workflow document into a [`WorkflowDefinition`].
pub fn parse_workflow(text: &str) -> Result<WorkflowDefinition, ParseError> {
    let doc: Value = serde_json::from_str(text).map_err(|e| ParseError::Syntax {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let root = as_object(&doc, "$")?;
    reject_unknown_keys(root, "$", &["name", "components", "connections"])?;

    let name = match root.get("name") {
        Some(Value::String(s)) => s.clone(),
        Some(_) => return Err(ParseError::schema("$.name", "expected a string")),
        None => return Err(ParseError::schema("$.name", "missing required field")),
    };

    let components = parse_components(root)?;
    let connections = parse_connections(root)?;

    let wf = WorkflowDefinition { name, components, connections };
    check_local_references(&wf)?;
    Ok(wf)
}

fn as_object<'a>(
    v: &'a Value,
    path: &str,
) -> Result<&'a serde_json::Map<String, Value>, ParseError> {
    v.as_object().ok_or_else(|| ParseError::schema(path, "expected an object"))
}

fn as_array<'a>(v: &'a Value, path: &str) -> Result<&'a Vec<Value>, ParseError> {
    v.as_array().ok_or_else(|| ParseError::schema(path, "expected an array"))
}

fn reject_unknown_keys(
    obj: &serde_json::Map<String, Value>,
    path: &str,
    allowed: &[&str],
) -> Result<(), ParseError> {
    for key in obj.keys() {
        if !allowed.contains(&key.as_str()) {
            return Err(ParseError::schema(format!("{path}.{key}"), "unknown field"));
        }
    }
    Ok(())
}

fn parse_components(
    root: &serde_json::Map<String, Value>,
) -> Result<Vec<ComponentInstance>, ParseError> {
    let raw = match root.get("components") {
        Some(v) => as_array(v, "$.components")?,
        None => return Err(ParseError::schema("$.components", "missing required field")),
    };
    let mut out = Vec::with_capacity(raw.len());
    for (i, item) in raw.iter().enumerate() {
        let path = format!("$.components[{i}]");
        let obj = as_object(item, &path)?;
        reject_unknown_keys(obj, &path, &["id", "kind", "builtin", "tool", "channel", "host", "config"])?;

        let id: ComponentId = match obj.get("id") {
            Some(Value::String(s)) => {
                s.parse().map_err(|e| ParseError::schema(format!("{path}.id"), format!("{e}")))?
            }
            Some(_) => return Err(ParseError::schema(format!("{path}.id"), "expected a string")),
            None => return Err(ParseError::schema(format!("{path}.id"), "missing required field")),
        };

        let kind_str = match obj.get("kind") {
            Some(Value::String(s)) => s.as_str(),
            Some(_) => return Err(ParseError::schema(format!("{path}.kind"), "expected a string")),
            None => return Err(ParseError::schema(format!("{path}.kind"), "missing required field")),
        };

        let kind = match kind_str {
            "builtin" => {
                for forbidden in ["tool", "channel", "host"] {
                    if obj.contains_key(forbidden) {
                        return Err(ParseError::schema(
                            format!("{path}.{forbidden}"),
                            "not allowed on builtin components",
                        ));
                    }
                }
                let builtin: BuiltinKind = match obj.get("builtin") {
                    Some(Value::String(s)) => s
                        .parse()
                        .map_err(|e| ParseError::schema(format!("{path}.builtin"), format!("{e}")))?,
                    Some(_) => {
                        return Err(ParseError::schema(format!("{path}.builtin"), "expected a string"))
                    }
                    None => {
                        return Err(ParseError::schema(format!("{path}.builtin"), "missing required field"))
                    }
                };
                ComponentKind::BuiltIn(builtin)
            }
            "tool" => {
                if obj.contains_key("builtin") {
                    return Err(ParseError::schema(
                        format!("{path}.builtin"),
                        "not allowed on tool components",
                    ));
                }
                let tool = match obj.get("tool") {
                    Some(Value::String(s)) if is_tool_id(s) => s.clone(),
                    Some(Value::String(s)) => {
                        return Err(ParseError::schema(
                            format!("{path}.tool"),
                            format!("invalid tool id {s:?}: must match [a-z0-9_-]+"),
                        ))
                    }
                    Some(_) => {
                        return Err(ParseError::schema(format!("{path}.tool"), "expected a string"))
                    }
                    None => {
                        return Err(ParseError::schema(format!("{path}.tool"), "missing required field"))
                    }
                };
                let channel = match obj.get("channel") {
                    None => crate::workflow::VersionChannel::Stable,
                    Some(Value::String(s)) => s
                        .parse()
                        .map_err(|e| ParseError::schema(format!("{path}.channel"), e))?,
                    Some(_) => {
                        return Err(ParseError::schema(format!("{path}.channel"), "expected a string"))
                    }
                };
                let host = match obj.get("host") {
                    None => None,
                    Some(Value::String(s)) => Some(
                        s.parse()
                            .map_err(|e| ParseError::schema(format!("{path}.host"), format!("{e}")))?,
                    ),
                    Some(_) => {
                        return Err(ParseError::schema(format!("{path}.host"), "expected a string"))
                    }
                };
                ComponentKind::IntegratedTool { tool, channel, host }
            }
            other => {
                return Err(ParseError::schema(
                    format!("{path}.kind"),
                    format!("unknown kind {other:?}: expected \"builtin\" or \"tool\""),
                ))
            }
        };

        let config = parse_config(obj.get("config"), &format!("{path}.config"))?;
        out.push(ComponentInstance { id, kind, config });
    }
    Ok(out)
}

fn is_tool_id(s: &str) -> bool {
    !s.is_empty()
        && s.len() <= 128
        && s.bytes().all(|b| matches!(b, b'a'..=b'z' | b'0'..=b'9' | b'_' | b'-'))
}

fn parse_config(
    raw: Option<&Value>,
    path: &str,
) -> Result<BTreeMap<String, DataValue>, ParseError> {
    let obj = match raw {
        None => return Ok(BTreeMap::new()),
        Some(v) => as_object(v, path)?,
    };
    let mut out = BTreeMap::new();
    for (key, value) in obj {
        let entry_path = format!("{path}.{key}");
        let parsed: DataValue = serde_json::from_value(value.clone())
            .map_err(|e| ParseError::schema(&entry_path, e.to_string()))?;
        out.insert(key.clone(), parsed);
    }
    Ok(out)
}

fn parse_connections(
    root: &serde_json::Map<String, Value>,
) -> Result<Vec<Connection>, ParseError> {
    let raw = match root.get("connections") {
        Some(v) => as_array(v, "$.connections")?,
        None => return Err(ParseError::schema("$.connections", "missing required field")),
    };
    let mut out = Vec::with_capacity(raw.len());
    for (i, item) in raw.iter().enumerate() {
        let path = format!("$.connections[{i}]");
        let obj = as_object(item, &path)?;
        reject_unknown_keys(obj, &path, &["from", "to"])?;
        let endpoint = |key: &str| -> Result<Endpoint, ParseError> {
            match obj.get(key) {
                Some(Value::String(s)) => {
                    s.parse().map_err(|e| ParseError::schema(format!("{path}.{key}"), e))
                }
                Some(_) => Err(ParseError::schema(format!("{path}.{key}"), "expected a string")),
                None => Err(ParseError::schema(format!("{path}.{key}"), "missing required field")),
            }
        };
        out.push(Connection { from: endpoint("from")?, to: endpoint("to")? });
    }
    Ok(out)
}

/// Document-local reference checks: unique ids, endpoints name existing
/// components, and for builtins (whose ports the document itself fixes)
/// existing ports in the right direction.
fn check_local_references(wf: &WorkflowDefinition) -> Result<(), ParseError> {
    let mut seen = BTreeSet::new();
    for (i, c) in wf.components.iter().enumerate() {
        if !seen.insert(&c.id) {
            return Err(ParseError::schema(
                format!("$.components[{i}].id"),
                format!("duplicate component id {:?}", c.id.as_str()),
            ));
        }
    }

    // Best effort only: a config too broken to derive ports from is
    // reported by validation, not here.
    let mut builtin_ports: BTreeMap<&ComponentId, Vec<PortSpec>> = BTreeMap::new();
    for c in &wf.components {
        if let ComponentKind::BuiltIn(kind) = &c.kind {
            if let Ok(ports) = derive_ports(*kind, &c.config) {
                builtin_ports.insert(&c.id, ports);
            }
        }
    }

    for (i, conn) in wf.connections.iter().enumerate() {
        for (key, endpoint, direction) in [
            ("from", &conn.from, PortDirection::Output),
            ("to", &conn.to, PortDirection::Input),
        ] {
            let path = format!("$.connections[{i}].{key}");
            if wf.component(&endpoint.component).is_none() {
                return Err(ParseError::schema(
                    path,
                    format!("unknown component {:?}", endpoint.component.as_str()),
                ));
            }
            if let Some(ports) = builtin_ports.get(&endpoint.component) {
                let found = ports
                    .iter()
                    .any(|p| p.name == endpoint.port && p.direction == direction);
                if !found {
                    return Err(ParseError::schema(
                        path,
                        format!(
                            "component {:?} has no {} port {:?}",
                            endpoint.component.as_str(),
                            match direction {
                                PortDirection::Input => "input",
                                PortDirection::Output => "output",
                            },
                            endpoint.port.as_str()
                        ),
                    ));
                }
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "name": "minimal",
        "components": [
            {"id": "src", "kind": "builtin", "builtin": "value_source",
             "config": {"x": {"type": "float", "value": 3.0}}},
            {"id": "calc", "kind": "builtin", "builtin": "script",
             "config": {"script": {"type": "short_text", "value": "pass"},
                        "in:x": {"type": "short_text", "value": "float"},
                        "out:y": {"type": "short_text", "value": "float"}}}
        ],
        "connections": [
            {"from": "src.x", "to": "calc.x"}
        ]
    }"#;

    #[test]
    fn minimal_two_component_document() {
        let wf = parse_workflow(MINIMAL).unwrap();
        assert_eq!(wf.components.len(), 2);
        assert_eq!(wf.connections.len(), 1);
        assert_eq!(wf.name, "minimal");
    }

    #[test]
    fn empty_workflow_is_valid() {
        let wf = parse_workflow(r#"{"name":"empty","components":[],"connections":[]}"#).unwrap();
        assert!(wf.components.is_empty());
        assert!(wf.connections.is_empty());
    }

    #[test]
    fn unknown_port_reported_at_connection_path() {
        let doc = MINIMAL.replace(r#""to": "calc.x""#, r#""to": "calc.liftt""#);
        let err = parse_workflow(&doc).unwrap_err();
        assert_eq!(err.path(), Some("$.connections[0].to"));
    }

    #[test]
    fn malformed_json_reports_position() {
        let err = parse_workflow("{\"name\": ").unwrap_err();
        match err {
            ParseError::Syntax { line, .. } => assert_eq!(line, 1),
            other => panic!("expected syntax error, got {other:?}"),
        }
    }

    #[test]
    fn duplicate_id_rejected() {
        let doc = r#"{"name":"d","components":[
            {"id":"a","kind":"builtin","builtin":"sweep",
             "config":{"from":{"type":"float","value":0.0},"to":{"type":"float","value":1.0},"steps":{"type":"integer","value":2}}},
            {"id":"a","kind":"builtin","builtin":"sweep",
             "config":{"from":{"type":"float","value":0.0},"to":{"type":"float","value":1.0},"steps":{"type":"integer","value":2}}}
        ],"connections":[]}"#;
        let err = parse_workflow(doc).unwrap_err();
        assert_eq!(err.path(), Some("$.components[1].id"));
    }

    #[test]
    fn unknown_fields_rejected() {
        let err =
            parse_workflow(r#"{"name":"x","components":[],"connections":[],"extra":1}"#).unwrap_err();
        assert_eq!(err.path(), Some("$.extra"));
    }

    #[test]
    fn tool_component_fields() {
        let doc = r#"{"name":"t","components":[
            {"id":"lift","kind":"tool","tool":"wing-lift","channel":"development"}
        ],"connections":[]}"#;
        let wf = parse_workflow(doc).unwrap();
        match &wf.components[0].kind {
            ComponentKind::IntegratedTool { tool, channel, host } => {
                assert_eq!(tool, "wing-lift");
                assert_eq!(*channel, crate::workflow::VersionChannel::Development);
                assert!(host.is_none());
            }
            other => panic!("expected tool, got {other:?}"),
        }
    }
}
