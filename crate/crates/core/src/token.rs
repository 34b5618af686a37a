//! Tokens: values in flight, with provenance metadata.

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::ids::{ComponentId, PortName};
use crate::value::DataValue;

/// One typed value traveling along one connection.
///
/// `sequence` is per (source component, source port) within one run,
/// starting at 0 and strictly increasing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataToken {
    pub value: DataValue,
    pub source_component: ComponentId,
    pub source_port: PortName,
    pub sequence: u64,
    pub emitted_at: DateTime<Utc>,
}

impl DataToken {
    /// Provenance key identifying this token within a run.
    pub fn origin(&self) -> (ComponentId, PortName, u64) {
        (self.source_component.clone(), self.source_port.clone(), self.sequence)
    }
}
