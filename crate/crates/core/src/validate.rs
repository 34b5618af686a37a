//! Semantic validation of workflow definitions against a component catalog.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::builtin::{derive_ports, validate_config, BuiltinKind};
use crate::ids::{ComponentId, NodeId, PortName};
use crate::port::{PortDirection, PortSpec};
use crate::workflow::{ComponentKind, Endpoint, VersionChannel, WorkflowDefinition};

/// Where a tool lookup landed.
#[derive(Debug, Clone)]
pub enum ToolResolution {
    Local { ports: Vec<PortSpec> },
    Remote { host: NodeId, ports: Vec<PortSpec> },
    NotFound,
    /// The tool exists but not in the requested channel.
    ChannelNotFound,
    /// Multiple hosts publish the tool and no host pin was given.
    Ambiguous(Vec<NodeId>),
}

/// The components reachable from a node: built-ins plus installed and
/// published tools.
pub trait ComponentCatalog {
    fn resolve_tool(
        &self,
        tool: &str,
        channel: VersionChannel,
        host: Option<&NodeId>,
    ) -> ToolResolution;
}

/// Catalog with no tools at all; validates builtin-only workflows.
pub struct EmptyCatalog;

impl ComponentCatalog for EmptyCatalog {
    fn resolve_tool(&self, _: &str, _: VersionChannel, _: Option<&NodeId>) -> ToolResolution {
        ToolResolution::NotFound
    }
}

/// One rule violation found by validation. Violations are data, not
/// failures: the report lists all of them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum Violation {
    DuplicateId { component: ComponentId },
    DanglingEndpoint { connection: usize, endpoint: String, problem: String },
    TypeMismatch { connection: usize, from: String, from_type: String, to: String, to_type: String },
    MultipleWriters { endpoint: String },
    UnguardedCycle { components: Vec<ComponentId> },
    UnknownTool { component: ComponentId, tool: String },
    UnknownChannel { component: ComponentId, tool: String, channel: String },
    AmbiguousTool { component: ComponentId, tool: String, hosts: Vec<String> },
    BadConfig { component: ComponentId, problem: String },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::DuplicateId { component } => write!(f, "duplicate component id {component}"),
            Violation::DanglingEndpoint { connection, endpoint, problem } => {
                write!(f, "connection {connection}: endpoint {endpoint}: {problem}")
            }
            Violation::TypeMismatch { connection, from, from_type, to, to_type } => write!(
                f,
                "connection {connection}: {from} ({from_type}) cannot feed {to} ({to_type})"
            ),
            Violation::MultipleWriters { endpoint } => {
                write!(f, "input {endpoint} has more than one incoming connection")
            }
            Violation::UnguardedCycle { components } => {
                let ids: Vec<&str> = components.iter().map(|c| c.as_str()).collect();
                write!(f, "cycle without converger/optimizer through [{}]", ids.join(", "))
            }
            Violation::UnknownTool { component, tool } => {
                write!(f, "component {component}: tool {tool:?} not in catalog")
            }
            Violation::UnknownChannel { component, tool, channel } => {
                write!(f, "component {component}: tool {tool:?} has no {channel} channel")
            }
            Violation::AmbiguousTool { component, tool, hosts } => write!(
                f,
                "component {component}: tool {tool:?} published by several hosts ({}), pin one",
                hosts.join(", ")
            ),
            Violation::BadConfig { component, problem } => {
                write!(f, "component {component}: {problem}")
            }
        }
    }
}

/// Result of validation. Empty report means the workflow is executable.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return write!(f, "ok");
        }
        for v in &self.violations {
            writeln!(f, "{v}")?;
        }
        Ok(())
    }
}

/// What a component resolved to, ready for dispatch.
#[derive(Debug, Clone, PartialEq)]
pub enum ComponentBinding {
    Builtin(BuiltinKind),
    LocalTool { tool: String, channel: VersionChannel },
    RemoteTool { tool: String, channel: VersionChannel, host: NodeId },
}

/// A component with its resolved port list and execution binding.
#[derive(Debug, Clone)]
pub struct ResolvedComponent {
    pub ports: Vec<PortSpec>,
    pub binding: ComponentBinding,
}

impl ResolvedComponent {
    pub fn port(&self, name: &PortName, direction: PortDirection) -> Option<&PortSpec> {
        self.ports.iter().find(|p| &p.name == name && p.direction == direction)
    }

    pub fn inputs(&self) -> impl Iterator<Item = &PortSpec> {
        self.ports.iter().filter(|p| p.is_input())
    }

    pub fn outputs(&self) -> impl Iterator<Item = &PortSpec> {
        self.ports.iter().filter(|p| !p.is_input())
    }
}

/// A definition that passed validation, with every component resolved.
#[derive(Debug, Clone)]
pub struct ValidatedWorkflow {
    pub definition: WorkflowDefinition,
    pub resolved: BTreeMap<ComponentId, ResolvedComponent>,
}

/// Outcome of [`validate_workflow`]: the report plus, when it is empty,
/// the resolved workflow.
#[derive(Debug)]
pub struct ValidationOutcome {
    pub report: ValidationReport,
    pub validated: Option<ValidatedWorkflow>,
}

/// Checks a definition against the catalog and resolves it for execution.
pub fn validate_workflow(
    wf: &WorkflowDefinition,
    catalog: &dyn ComponentCatalog,
) -> ValidationOutcome {
    let mut violations = Vec::new();

    let mut seen = BTreeSet::new();
    for c in &wf.components {
        if !seen.insert(&c.id) {
            violations.push(Violation::DuplicateId { component: c.id.clone() });
        }
    }

    // Resolve every component to ports + binding.
    let mut resolved: BTreeMap<ComponentId, ResolvedComponent> = BTreeMap::new();
    for c in &wf.components {
        match &c.kind {
            ComponentKind::BuiltIn(kind) => {
                match derive_ports(*kind, &c.config) {
                    Ok(ports) => {
                        resolved.insert(
                            c.id.clone(),
                            ResolvedComponent { ports, binding: ComponentBinding::Builtin(*kind) },
                        );
                    }
                    Err(e) => violations.push(Violation::BadConfig {
                        component: c.id.clone(),
                        problem: e.to_string(),
                    }),
                }
                if let Err(e) = validate_config(*kind, &c.config) {
                    let problem = e.to_string();
                    let dup = violations.iter().any(|v| {
                        matches!(v, Violation::BadConfig { component, problem: p }
                            if component == &c.id && p == &problem)
                    });
                    if !dup {
                        violations.push(Violation::BadConfig { component: c.id.clone(), problem });
                    }
                }
            }
            ComponentKind::IntegratedTool { tool, channel, host } => {
                match catalog.resolve_tool(tool, *channel, host.as_ref()) {
                    ToolResolution::Local { ports } => {
                        resolved.insert(
                            c.id.clone(),
                            ResolvedComponent {
                                ports,
                                binding: ComponentBinding::LocalTool {
                                    tool: tool.clone(),
                                    channel: *channel,
                                },
                            },
                        );
                    }
                    ToolResolution::Remote { host, ports } => {
                        resolved.insert(
                            c.id.clone(),
                            ResolvedComponent {
                                ports,
                                binding: ComponentBinding::RemoteTool {
                                    tool: tool.clone(),
                                    channel: *channel,
                                    host,
                                },
                            },
                        );
                    }
                    ToolResolution::NotFound => violations.push(Violation::UnknownTool {
                        component: c.id.clone(),
                        tool: tool.clone(),
                    }),
                    ToolResolution::ChannelNotFound => violations.push(Violation::UnknownChannel {
                        component: c.id.clone(),
                        tool: tool.clone(),
                        channel: channel.to_string(),
                    }),
                    ToolResolution::Ambiguous(hosts) => violations.push(Violation::AmbiguousTool {
                        component: c.id.clone(),
                        tool: tool.clone(),
                        hosts: hosts.iter().map(|h| h.to_string()).collect(),
                    }),
                }
            }
        }
    }

    // Connection endpoints, type identity, single writer per input.
    let mut writers: BTreeMap<&Endpoint, usize> = BTreeMap::new();
    for (i, conn) in wf.connections.iter().enumerate() {
        let from_port = endpoint_port(wf, &resolved, &conn.from, PortDirection::Output, i, &mut violations);
        let to_port = endpoint_port(wf, &resolved, &conn.to, PortDirection::Input, i, &mut violations);
        if let (Some(from), Some(to)) = (from_port, to_port) {
            if from.datatype != to.datatype {
                violations.push(Violation::TypeMismatch {
                    connection: i,
                    from: conn.from.to_string(),
                    from_type: from.datatype.to_string(),
                    to: conn.to.to_string(),
                    to_type: to.datatype.to_string(),
                });
            }
        }
        *writers.entry(&conn.to).or_insert(0) += 1;
    }
    for (endpoint, count) in writers {
        if count > 1 {
            violations.push(Violation::MultipleWriters { endpoint: endpoint.to_string() });
        }
    }

    // Every cycle must pass through a loop driver: the subgraph without
    // converger/optimizer components has to be acyclic.
    for cycle in unguarded_cycles(wf) {
        violations.push(Violation::UnguardedCycle { components: cycle });
    }

    let validated = if violations.is_empty() {
        Some(ValidatedWorkflow { definition: wf.clone(), resolved })
    } else {
        None
    };
    ValidationOutcome { report: ValidationReport { violations }, validated }
}

fn endpoint_port<'a>(
    wf: &WorkflowDefinition,
    resolved: &'a BTreeMap<ComponentId, ResolvedComponent>,
    endpoint: &Endpoint,
    direction: PortDirection,
    connection: usize,
    violations: &mut Vec<Violation>,
) -> Option<&'a PortSpec> {
    if wf.component(&endpoint.component).is_none() {
        violations.push(Violation::DanglingEndpoint {
            connection,
            endpoint: endpoint.to_string(),
            problem: "unknown component".into(),
        });
        return None;
    }
    // Component known but unresolvable: already reported above.
    let comp = resolved.get(&endpoint.component)?;
    match comp.port(&endpoint.port, direction) {
        Some(port) => Some(port),
        None => {
            violations.push(Violation::DanglingEndpoint {
                connection,
                endpoint: endpoint.to_string(),
                problem: format!(
                    "no {} port with this name",
                    match direction {
                        PortDirection::Input => "input",
                        PortDirection::Output => "output",
                    }
                ),
            });
            None
        }
    }
}

/// Strongly connected components of the graph without loop drivers;
/// any SCC with a cycle is an unguarded cycle.
fn unguarded_cycles(wf: &WorkflowDefinition) -> Vec<Vec<ComponentId>> {
    let driver: BTreeSet<&ComponentId> = wf
        .components
        .iter()
        .filter(|c| matches!(&c.kind, ComponentKind::BuiltIn(k) if k.is_loop_driver()))
        .map(|c| &c.id)
        .collect();

    let nodes: Vec<&ComponentId> =
        wf.components.iter().map(|c| &c.id).filter(|id| !driver.contains(id)).collect();
    let index: BTreeMap<&ComponentId, usize> =
        nodes.iter().enumerate().map(|(i, id)| (*id, i)).collect();

    let mut edges: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); nodes.len()];
    let mut indegree = vec![0usize; nodes.len()];
    for conn in &wf.connections {
        if let (Some(&a), Some(&b)) = (index.get(&conn.from.component), index.get(&conn.to.component))
        {
            if a != b && edges[a].insert(b) {
                indegree[b] += 1;
            }
            if a == b && edges[a].insert(b) {
                indegree[b] += 1; // self loop
            }
        }
    }

    // Kahn's algorithm; whatever survives sits on a cycle.
    let mut queue: VecDeque<usize> =
        (0..nodes.len()).filter(|&i| indegree[i] == 0).collect();
    let mut removed = vec![false; nodes.len()];
    while let Some(i) = queue.pop_front() {
        removed[i] = true;
        for &j in &edges[i] {
            indegree[j] -= 1;
            if indegree[j] == 0 {
                queue.push_back(j);
            }
        }
    }
    // Also peel nodes with no remaining outgoing edges (reverse pass).
    loop {
        let mut changed = false;
        for i in 0..nodes.len() {
            if removed[i] {
                continue;
            }
            if edges[i].iter().all(|&j| removed[j]) {
                removed[i] = true;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }

    let residual: Vec<ComponentId> = (0..nodes.len())
        .filter(|&i| !removed[i])
        .map(|i| nodes[i].clone())
        .collect();
    if residual.is_empty() {
        Vec::new()
    } else {
        vec![residual]
    }
}
