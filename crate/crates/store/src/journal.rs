//! Append-only line-delimited JSON journal, one per run.
//!
//! Every append is flushed and synced before it returns; the engine
//! emits its `FiringFinished` event only after the append returned, so a
//! record observed through an event is always on disk.
//!
//! Token values whose JSON form exceeds 4 KiB are spilled to the blob
//! store and the journal line keeps a `{"type":"spilled",...}` stub.

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use flowmesh_core::{
    BlobError, BlobRead, BlobWrite, ComponentId, ContentHash, DataToken, DataType, DataValue,
    NodeId, PortName, RunId,
};

use crate::records::{BlobRef, ComponentRunRecord, ExitInfo, RunStatus, WorkflowRunRecord};

/// Values whose serialized form stays at or below this stay inline.
pub const INLINE_VALUE_MAX_BYTES: usize = 4096;

#[derive(Debug, Error)]
pub enum JournalError {
    #[error("run {0} is closed")]
    RunClosed(RunId),
    #[error("journal i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("journal encode: {0}")]
    Encode(#[from] serde_json::Error),
    #[error("journal blob: {0}")]
    Blob(#[from] BlobError),
}

/// A token value as stored in the journal: inline or spilled to a blob.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StoredValue {
    Inline(DataValue),
    Spilled(SpilledValue),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpilledValue {
    /// Always the string `"spilled"`; keeps the tag space of inline
    /// values free.
    #[serde(rename = "type")]
    pub tag: SpilledTag,
    pub datatype: DataType,
    pub hash: ContentHash,
    pub size: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpilledTag {
    Spilled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredToken {
    pub value: StoredValue,
    pub source_component: ComponentId,
    pub source_port: PortName,
    pub sequence: u64,
    pub emitted_at: DateTime<Utc>,
}

/// The journal form of [`ComponentRunRecord`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredComponentRun {
    pub run_id: RunId,
    pub component_id: ComponentId,
    pub firing_index: u64,
    pub host_node: NodeId,
    pub inputs: BTreeMap<PortName, StoredToken>,
    pub outputs: BTreeMap<PortName, Vec<StoredToken>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stdout: Option<BlobRef>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stderr: Option<BlobRef>,
    pub exit: ExitInfo,
    pub started_at: DateTime<Utc>,
    pub ended_at: DateTime<Utc>,
}

fn store_token(token: &DataToken, blobs: &dyn BlobWrite) -> Result<StoredToken, JournalError> {
    let encoded = serde_json::to_vec(&token.value)?;
    let value = if encoded.len() > INLINE_VALUE_MAX_BYTES {
        let hash = blobs.put_blob(&encoded)?;
        StoredValue::Spilled(SpilledValue {
            tag: SpilledTag::Spilled,
            datatype: token.value.datatype(),
            hash,
            size: encoded.len() as u64,
        })
    } else {
        StoredValue::Inline(token.value.clone())
    };
    Ok(StoredToken {
        value,
        source_component: token.source_component.clone(),
        source_port: token.source_port.clone(),
        sequence: token.sequence,
        emitted_at: token.emitted_at,
    })
}

fn resolve_token(token: &StoredToken, blobs: &dyn BlobRead) -> Result<DataToken, JournalError> {
    let value = match &token.value {
        StoredValue::Inline(v) => v.clone(),
        StoredValue::Spilled(s) => serde_json::from_slice(&blobs.blob_bytes(&s.hash)?)?,
    };
    Ok(DataToken {
        value,
        source_component: token.source_component.clone(),
        source_port: token.source_port.clone(),
        sequence: token.sequence,
        emitted_at: token.emitted_at,
    })
}

impl StoredComponentRun {
    pub fn from_record(
        record: &ComponentRunRecord,
        blobs: &dyn BlobWrite,
    ) -> Result<Self, JournalError> {
        let mut inputs = BTreeMap::new();
        for (port, token) in &record.inputs {
            inputs.insert(port.clone(), store_token(token, blobs)?);
        }
        let mut outputs = BTreeMap::new();
        for (port, tokens) in &record.outputs {
            let stored: Result<Vec<_>, _> = tokens.iter().map(|t| store_token(t, blobs)).collect();
            outputs.insert(port.clone(), stored?);
        }
        Ok(StoredComponentRun {
            run_id: record.run_id,
            component_id: record.component_id.clone(),
            firing_index: record.firing_index,
            host_node: record.host_node,
            inputs,
            outputs,
            stdout: record.stdout,
            stderr: record.stderr,
            exit: record.exit.clone(),
            started_at: record.started_at,
            ended_at: record.ended_at,
        })
    }

    pub fn resolve(&self, blobs: &dyn BlobRead) -> Result<ComponentRunRecord, JournalError> {
        let mut inputs = BTreeMap::new();
        for (port, token) in &self.inputs {
            inputs.insert(port.clone(), resolve_token(token, blobs)?);
        }
        let mut outputs = BTreeMap::new();
        for (port, tokens) in &self.outputs {
            let resolved: Result<Vec<_>, _> =
                tokens.iter().map(|t| resolve_token(t, blobs)).collect();
            outputs.insert(port.clone(), resolved?);
        }
        Ok(ComponentRunRecord {
            run_id: self.run_id,
            component_id: self.component_id.clone(),
            firing_index: self.firing_index,
            host_node: self.host_node,
            inputs,
            outputs,
            stdout: self.stdout,
            stderr: self.stderr,
            exit: self.exit.clone(),
            started_at: self.started_at,
            ended_at: self.ended_at,
        })
    }
}

/// One line of a run journal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
pub enum JournalEntry {
    /// First line of a controller-side journal.
    RunStarted(WorkflowRunRecord),
    /// First line of a host-side journal: this node only executes
    /// firings delegated by `controller`.
    RunHosted { run_id: RunId, controller: NodeId },
    ComponentRun(StoredComponentRun),
    RunClosed { status: RunStatus, ended_at: DateTime<Utc>, stranded_tokens: u64 },
}

/// Writer handle for one run's journal. There is exactly one writer per
/// run; readers open the file independently and see committed prefixes.
pub struct RunJournal {
    run_id: RunId,
    file: File,
    closed: bool,
}

impl RunJournal {
    pub(crate) fn create(
        path: &Path,
        run_id: RunId,
        first: &JournalEntry,
    ) -> Result<Self, JournalError> {
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        let file = OpenOptions::new().create_new(true).append(true).open(path)?;
        let mut journal = RunJournal { run_id, file, closed: false };
        journal.append(first)?;
        Ok(journal)
    }

    pub fn run_id(&self) -> RunId {
        self.run_id
    }

    /// Appends one entry durably: the call returns only after the bytes
    /// reached the OS and were synced.
    pub fn append(&mut self, entry: &JournalEntry) -> Result<(), JournalError> {
        if self.closed {
            return Err(JournalError::RunClosed(self.run_id));
        }
        let mut line = serde_json::to_string(entry)?;
        line.push('\n');
        self.file.write_all(line.as_bytes())?;
        self.file.sync_data()?;
        if matches!(entry, JournalEntry::RunClosed { .. }) {
            self.closed = true;
        }
        Ok(())
    }

    pub fn append_component_run(
        &mut self,
        record: &ComponentRunRecord,
        blobs: &dyn BlobWrite,
    ) -> Result<(), JournalError> {
        let stored = StoredComponentRun::from_record(record, blobs)?;
        self.append(&JournalEntry::ComponentRun(stored))
    }

    pub fn close(
        &mut self,
        status: RunStatus,
        ended_at: DateTime<Utc>,
        stranded_tokens: u64,
    ) -> Result<(), JournalError> {
        self.append(&JournalEntry::RunClosed { status, ended_at, stranded_tokens })
    }

    pub fn is_closed(&self) -> bool {
        self.closed
    }
}

/// Reads all committed entries of a journal file. A torn trailing line
/// (crash during append) is ignored: it never committed.
pub fn read_journal(path: &Path) -> Result<Vec<JournalEntry>, JournalError> {
    let file = File::open(path)?;
    let reader = BufReader::new(file);
    let mut entries = Vec::new();
    let mut lines = reader.lines().peekable();
    while let Some(line) = lines.next() {
        let line = line?;
        match serde_json::from_str::<JournalEntry>(&line) {
            Ok(entry) => entries.push(entry),
            Err(_) if lines.peek().is_none() => break,
            Err(e) => return Err(e.into()),
        }
    }
    Ok(entries)
}
