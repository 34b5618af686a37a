//! Record types persisted for every run and firing.

use std::collections::BTreeMap;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use flowmesh_core::{ComponentId, ContentHash, DataToken, NodeId, PortName, RunId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Preparing,
    Running,
    Finished,
    Failed,
    Cancelled,
}

impl RunStatus {
    pub fn is_terminal(&self) -> bool {
        matches!(self, RunStatus::Finished | RunStatus::Failed | RunStatus::Cancelled)
    }
}

/// Whether this node controls the run or only hosts firings for it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunRole {
    Controller,
    Host,
}

/// Header of one run: the snapshot and the parties involved.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkflowRunRecord {
    pub run_id: RunId,
    /// Canonical serialization of the executed definition.
    pub workflow: String,
    pub submitter_node: NodeId,
    pub controller_node: NodeId,
    pub started_at: DateTime<Utc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ended_at: Option<DateTime<Utc>>,
    pub status: RunStatus,
}

/// Reference to a stored blob with its size.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlobRef {
    pub hash: ContentHash,
    pub size: u64,
}

/// Exit information of one firing.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExitInfo {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exit_code: Option<i32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl ExitInfo {
    pub fn success(exit_code: Option<i32>) -> Self {
        ExitInfo { exit_code, error: None }
    }

    pub fn failure(exit_code: Option<i32>, error: impl Into<String>) -> Self {
        ExitInfo { exit_code, error: Some(error.into()) }
    }
}

/// One firing of one component: consumed inputs, produced outputs,
/// console streams and timing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentRunRecord {
    pub run_id: RunId,
    pub component_id: ComponentId,
    pub firing_index: u64,
    pub host_node: NodeId,
    pub inputs: BTreeMap<PortName, DataToken>,
    pub outputs: BTreeMap<PortName, Vec<DataToken>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stdout: Option<BlobRef>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stderr: Option<BlobRef>,
    pub exit: ExitInfo,
    pub started_at: DateTime<Utc>,
    pub ended_at: DateTime<Utc>,
}

impl ComponentRunRecord {
    /// Every token this firing produced, with port, in declaration order
    /// of the record's map.
    pub fn produced(&self) -> impl Iterator<Item = (&PortName, &DataToken)> {
        self.outputs.iter().flat_map(|(p, ts)| ts.iter().map(move |t| (p, t)))
    }
}
