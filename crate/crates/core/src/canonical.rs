//! Canonical serialization of workflow definitions.
//!
//! The output is deterministic: object keys sorted, components sorted by
//! id, connections sorted by (from, to), compact JSON plus one trailing
//! newline. Snapshots, digests and exports all rely on byte stability.

use serde_json::{json, Map, Value};

use crate::value::DataValue;
use crate::workflow::{ComponentInstance, ComponentKind, WorkflowDefinition};

/// Serializes a definition to its canonical document form.
///
/// `parse_workflow(canonical_serialize(wf))` is structurally identical to
/// `wf` for every valid definition.
pub fn canonical_serialize(wf: &WorkflowDefinition) -> String {
    // serde_json maps are BTreeMap-backed, so every object below comes
    // out with sorted keys.
    let mut components: Vec<&ComponentInstance> = wf.components.iter().collect();
    components.sort_by(|a, b| a.id.cmp(&b.id));
    let components: Vec<Value> = components.into_iter().map(component_value).collect();

    let mut connections = wf.connections.clone();
    connections.sort();
    let connections: Vec<Value> = connections
        .iter()
        .map(|c| json!({ "from": c.from.to_string(), "to": c.to.to_string() }))
        .collect();

    let doc = json!({
        "name": wf.name,
        "components": components,
        "connections": connections,
    });
    let mut text = serde_json::to_string(&doc).expect("workflow serialization cannot fail");
    text.push('\n');
    text
}

fn component_value(c: &ComponentInstance) -> Value {
    let mut obj = Map::new();
    obj.insert("id".into(), Value::String(c.id.to_string()));
    match &c.kind {
        ComponentKind::BuiltIn(kind) => {
            obj.insert("kind".into(), Value::String("builtin".into()));
            obj.insert("builtin".into(), Value::String(kind.to_string()));
        }
        ComponentKind::IntegratedTool { tool, channel, host } => {
            obj.insert("kind".into(), Value::String("tool".into()));
            obj.insert("tool".into(), Value::String(tool.clone()));
            obj.insert("channel".into(), Value::String(channel.to_string()));
            if let Some(host) = host {
                obj.insert("host".into(), Value::String(host.to_string()));
            }
        }
    }
    if !c.config.is_empty() {
        let config: Map<String, Value> = c
            .config
            .iter()
            .map(|(k, v)| (k.clone(), value_to_json(v)))
            .collect();
        obj.insert("config".into(), Value::Object(config));
    }
    Value::Object(obj)
}

fn value_to_json(v: &DataValue) -> Value {
    serde_json::to_value(v.clone()).expect("value serialization cannot fail")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse::parse_workflow;
    use crate::value::DataValue;
    use crate::workflow::{ComponentInstance, ComponentKind, Connection};
    use std::collections::BTreeMap;

    fn source(id: &str, value: f64) -> ComponentInstance {
        let mut config = BTreeMap::new();
        config.insert("x".to_string(), DataValue::float(value).unwrap());
        ComponentInstance {
            id: id.parse().unwrap(),
            kind: ComponentKind::BuiltIn(crate::builtin::BuiltinKind::ValueSource),
            config,
        }
    }

    #[test]
    fn empty_workflow_canonical_bytes() {
        let wf = WorkflowDefinition {
            name: "empty".into(),
            components: vec![],
            connections: vec![],
        };
        assert_eq!(
            canonical_serialize(&wf),
            "{\"components\":[],\"connections\":[],\"name\":\"empty\"}\n"
        );
    }

    #[test]
    fn component_order_does_not_matter() {
        let a = WorkflowDefinition {
            name: "w".into(),
            components: vec![source("a", 1.0), source("b", 2.0)],
            connections: vec![],
        };
        let b = WorkflowDefinition {
            name: "w".into(),
            components: vec![source("b", 2.0), source("a", 1.0)],
            connections: vec![],
        };
        assert_eq!(canonical_serialize(&a), canonical_serialize(&b));
    }

    #[test]
    fn round_trip_identity() {
        let wf = WorkflowDefinition {
            name: "w".into(),
            components: vec![source("a", 1.0)],
            connections: vec![],
        };
        let parsed = parse_workflow(&canonical_serialize(&wf)).unwrap();
        assert_eq!(parsed, wf);
    }

    #[test]
    fn connections_sorted() {
        let conn = |f: &str, t: &str| Connection { from: f.parse().unwrap(), to: t.parse().unwrap() };
        let wf = WorkflowDefinition {
            name: "w".into(),
            components: vec![],
            connections: vec![conn("b.x", "c.y"), conn("a.x", "c.z")],
        };
        let text = canonical_serialize(&wf);
        let a = text.find("a.x").unwrap();
        let b = text.find("b.x").unwrap();
        assert!(a < b);
    }
}
