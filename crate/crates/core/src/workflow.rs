//! The workflow graph: components wired by typed connections.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::builtin::BuiltinKind;
use crate::ids::{ComponentId, NodeId, PortName};
use crate::value::DataValue;

/// Which installed variant of a tool a component refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VersionChannel {
    Stable,
    Development,
}

impl VersionChannel {
    pub fn as_str(&self) -> &'static str {
        match self {
            VersionChannel::Stable => "stable",
            VersionChannel::Development => "development",
        }
    }
}

impl fmt::Display for VersionChannel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for VersionChannel {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "stable" => Ok(VersionChannel::Stable),
            "development" => Ok(VersionChannel::Development),
            _ => Err(format!("unknown channel {s:?}: expected stable or development")),
        }
    }
}

/// What a component instance executes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ComponentKind {
    BuiltIn(BuiltinKind),
    IntegratedTool {
        tool: String,
        channel: VersionChannel,
        /// Explicit host pin; without it the tool must resolve uniquely.
        host: Option<NodeId>,
    },
}

/// One node of the workflow graph.
///
/// Ports are not stored here: built-in ports derive from `kind` and
/// `config`, tool ports come from the manifest via the catalog. See
/// [`crate::validate::ResolvedComponent`].
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentInstance {
    pub id: ComponentId,
    pub kind: ComponentKind,
    pub config: BTreeMap<String, DataValue>,
}

/// One endpoint of a connection, written `component.port` in documents.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Endpoint {
    pub component: ComponentId,
    pub port: PortName,
}

impl fmt::Display for Endpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.component, self.port)
    }
}

impl FromStr for Endpoint {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let (comp, port) = s
            .split_once('.')
            .ok_or_else(|| format!("endpoint {s:?} must be written component.port"))?;
        Ok(Endpoint {
            component: comp.parse().map_err(|e| format!("{e}"))?,
            port: port.parse().map_err(|e| format!("{e}"))?,
        })
    }
}

/// Directed edge from an output port to an input port.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Connection {
    pub from: Endpoint,
    pub to: Endpoint,
}

/// The executable graph: components plus typed connections.
#[derive(Debug, Clone, PartialEq)]
pub struct WorkflowDefinition {
    pub name: String,
    pub components: Vec<ComponentInstance>,
    pub connections: Vec<Connection>,
}

impl WorkflowDefinition {
    pub fn component(&self, id: &ComponentId) -> Option<&ComponentInstance> {
        self.components.iter().find(|c| &c.id == id)
    }

    /// Connections arriving at the given component, in declaration order.
    pub fn incoming<'a>(&'a self, id: &'a ComponentId) -> impl Iterator<Item = &'a Connection> + 'a {
        self.connections.iter().filter(move |c| &c.to.component == id)
    }

    /// Connections leaving the given output port, in declaration order.
    pub fn outgoing<'a>(&'a self, from: &'a Endpoint) -> impl Iterator<Item = &'a Connection> + 'a {
        self.connections.iter().filter(move |c| &c.from == from)
    }
}

// Serde for ComponentInstance/WorkflowDefinition lives in `parse` and
// `canonical`: documents get path-precise errors and a canonical form
// that plain derive cannot provide.

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn endpoint_syntax() {
        let e: Endpoint = "comp.port".parse().unwrap();
        assert_eq!(e.component.as_str(), "comp");
        assert_eq!(e.port.as_str(), "port");
        assert!("noport".parse::<Endpoint>().is_err());
        assert!("a.b.c".parse::<Endpoint>().is_err());
    }
}
