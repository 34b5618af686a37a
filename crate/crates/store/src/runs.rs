//! The run store: journals plus blobs under one profile directory.

use std::fs;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use flowmesh_core::{BlobError, ComponentId, NodeId, RunId};

use crate::blob::FsBlobStore;
use crate::journal::{read_journal, JournalEntry, JournalError, RunJournal};
use crate::records::{ComponentRunRecord, RunRole, RunStatus, WorkflowRunRecord};

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("unknown run {0}")]
    UnknownRun(RunId),
    #[error("run {0} already exists")]
    RunExists(RunId),
    #[error(transparent)]
    Journal(#[from] JournalError),
    #[error(transparent)]
    Blob(#[from] BlobError),
    #[error("store i/o: {0}")]
    Io(#[from] std::io::Error),
}

/// Queryable summary of one run as recorded locally.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub run_id: RunId,
    pub role: RunRole,
    pub status: RunStatus,
    pub submitter_node: Option<NodeId>,
    pub controller_node: NodeId,
    pub started_at: DateTime<Utc>,
    pub ended_at: Option<DateTime<Utc>>,
    pub firings: u64,
    pub stranded_tokens: u64,
}

/// Persistent run data of one profile: `runs/<runId>/journal.jsonl`
/// plus the shared blob store.
pub struct RunStore {
    root: PathBuf,
    blobs: FsBlobStore,
}

impl RunStore {
    pub fn open(profile_root: &Path) -> std::io::Result<Self> {
        let root = profile_root.join("runs");
        fs::create_dir_all(&root)?;
        let blobs = FsBlobStore::open(profile_root)?;
        Ok(RunStore { root, blobs })
    }

    pub fn blobs(&self) -> &FsBlobStore {
        &self.blobs
    }

    pub fn journal_path(&self, run_id: &RunId) -> PathBuf {
        self.root.join(run_id.to_hex()).join("journal.jsonl")
    }

    /// Opens the journal for a run this node controls.
    pub fn begin_run(&self, header: WorkflowRunRecord) -> Result<RunJournal, StoreError> {
        let run_id = header.run_id;
        let path = self.journal_path(&run_id);
        if path.exists() {
            return Err(StoreError::RunExists(run_id));
        }
        Ok(RunJournal::create(&path, run_id, &JournalEntry::RunStarted(header))?)
    }

    /// Opens the journal for a run another node controls but this node
    /// executes firings for.
    pub fn begin_hosted(&self, run_id: RunId, controller: NodeId) -> Result<RunJournal, StoreError> {
        let path = self.journal_path(&run_id);
        if path.exists() {
            return Err(StoreError::RunExists(run_id));
        }
        Ok(RunJournal::create(&path, run_id, &JournalEntry::RunHosted { run_id, controller })?)
    }

    fn entries(&self, run_id: &RunId) -> Result<Vec<JournalEntry>, StoreError> {
        let path = self.journal_path(run_id);
        if !path.is_file() {
            return Err(StoreError::UnknownRun(*run_id));
        }
        Ok(read_journal(&path)?)
    }

    /// All locally recorded runs, controller- and host-side.
    pub fn query_runs(&self) -> Result<Vec<RunSummary>, StoreError> {
        let mut out = Vec::new();
        let mut dirs: Vec<PathBuf> = Vec::new();
        for entry in fs::read_dir(&self.root)? {
            let entry = entry?;
            if entry.file_type()?.is_dir() {
                dirs.push(entry.path());
            }
        }
        dirs.sort();
        for dir in dirs {
            let Some(name) = dir.file_name().and_then(|n| n.to_str()) else { continue };
            let Ok(run_id) = name.parse::<RunId>() else { continue };
            if let Ok(summary) = self.run_summary(&run_id) {
                out.push(summary);
            }
        }
        Ok(out)
    }

    pub fn run_summary(&self, run_id: &RunId) -> Result<RunSummary, StoreError> {
        let entries = self.entries(run_id)?;
        let mut summary = match entries.first() {
            Some(JournalEntry::RunStarted(header)) => RunSummary {
                run_id: *run_id,
                role: RunRole::Controller,
                status: header.status,
                submitter_node: Some(header.submitter_node),
                controller_node: header.controller_node,
                started_at: header.started_at,
                ended_at: header.ended_at,
                firings: 0,
                stranded_tokens: 0,
            },
            Some(JournalEntry::RunHosted { controller, .. }) => RunSummary {
                run_id: *run_id,
                role: RunRole::Host,
                status: RunStatus::Running,
                submitter_node: None,
                controller_node: *controller,
                started_at: Utc::now(),
                ended_at: None,
                firings: 0,
                stranded_tokens: 0,
            },
            _ => return Err(StoreError::UnknownRun(*run_id)),
        };
        for entry in &entries {
            match entry {
                JournalEntry::ComponentRun(r) => {
                    summary.firings += 1;
                    if summary.role == RunRole::Host && summary.firings == 1 {
                        summary.started_at = r.started_at;
                    }
                }
                JournalEntry::RunClosed { status, ended_at, stranded_tokens } => {
                    summary.status = *status;
                    summary.ended_at = Some(*ended_at);
                    summary.stranded_tokens = *stranded_tokens;
                }
                _ => {}
            }
        }
        Ok(summary)
    }

    /// Header of a controller-side run, with status updated from the
    /// close line when present.
    pub fn run_header(&self, run_id: &RunId) -> Result<WorkflowRunRecord, StoreError> {
        let entries = self.entries(run_id)?;
        let mut header = match entries.first() {
            Some(JournalEntry::RunStarted(h)) => h.clone(),
            _ => return Err(StoreError::UnknownRun(*run_id)),
        };
        for entry in &entries {
            if let JournalEntry::RunClosed { status, ended_at, .. } = entry {
                header.status = *status;
                header.ended_at = Some(*ended_at);
            }
        }
        Ok(header)
    }

    /// Committed firing records, optionally filtered by component, in
    /// journal order.
    pub fn component_runs(
        &self,
        run_id: &RunId,
        component: Option<&ComponentId>,
    ) -> Result<Vec<ComponentRunRecord>, StoreError> {
        let mut out = Vec::new();
        for entry in self.entries(run_id)? {
            if let JournalEntry::ComponentRun(stored) = entry {
                if component.is_none_or(|c| c == &stored.component_id) {
                    out.push(stored.resolve(&self.blobs)?);
                }
            }
        }
        Ok(out)
    }

    /// Marks runs left open by a crash as failed. Returns the runs fixed.
    pub fn recover_dangling(&self) -> Result<Vec<RunId>, StoreError> {
        let mut fixed = Vec::new();
        for summary in self.query_runs()? {
            if summary.status.is_terminal() {
                continue;
            }
            let path = self.journal_path(&summary.run_id);
            let entry = JournalEntry::RunClosed {
                status: RunStatus::Failed,
                ended_at: Utc::now(),
                stranded_tokens: 0,
            };
            let mut line = serde_json::to_string(&entry).expect("entry encodes");
            line.push('\n');
            use std::io::Write;
            let mut file = fs::OpenOptions::new().append(true).open(&path)?;
            file.write_all(line.as_bytes())?;
            file.sync_data()?;
            fixed.push(summary.run_id);
        }
        Ok(fixed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;
    use flowmesh_core::{DataToken, DataValue};
    use std::collections::BTreeMap;

    fn node(n: u8) -> NodeId {
        NodeId::from_bytes([n; 16])
    }

    fn ts(s: i64) -> DateTime<Utc> {
        Utc.timestamp_opt(s, 0).unwrap()
    }

    fn header(run_id: RunId) -> WorkflowRunRecord {
        WorkflowRunRecord {
            run_id,
            workflow: "{}\n".into(),
            submitter_node: node(1),
            controller_node: node(2),
            started_at: ts(100),
            ended_at: None,
            status: RunStatus::Running,
        }
    }

    fn record(run_id: RunId, component: &str, firing_index: u64) -> ComponentRunRecord {
        let token = DataToken {
            value: DataValue::Float(1.5),
            source_component: component.parse().unwrap(),
            source_port: "out".parse().unwrap(),
            sequence: firing_index,
            emitted_at: ts(101),
        };
        ComponentRunRecord {
            run_id,
            component_id: component.parse().unwrap(),
            firing_index,
            host_node: node(2),
            inputs: BTreeMap::new(),
            outputs: BTreeMap::from([("out".parse().unwrap(), vec![token])]),
            stdout: None,
            stderr: None,
            exit: Default::default(),
            started_at: ts(100),
            ended_at: ts(102),
        }
    }

    #[test]
    fn journal_round_trip_and_close() {
        let dir = tempfile::tempdir().unwrap();
        let store = RunStore::open(dir.path()).unwrap();
        let run_id = RunId::from_bytes([7; 16]);
        let mut journal = store.begin_run(header(run_id)).unwrap();
        for i in 0..3 {
            journal.append_component_run(&record(run_id, "conv", i), store.blobs()).unwrap();
        }
        journal.close(RunStatus::Finished, ts(200), 0).unwrap();

        let records = store.component_runs(&run_id, None).unwrap();
        assert_eq!(records.len(), 3);
        let indices: Vec<u64> = records.iter().map(|r| r.firing_index).collect();
        assert_eq!(indices, vec![0, 1, 2]);

        let summary = store.run_summary(&run_id).unwrap();
        assert_eq!(summary.status, RunStatus::Finished);
        assert_eq!(summary.firings, 3);
    }

    #[test]
    fn append_after_close_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let store = RunStore::open(dir.path()).unwrap();
        let run_id = RunId::from_bytes([8; 16]);
        let mut journal = store.begin_run(header(run_id)).unwrap();
        journal.close(RunStatus::Finished, ts(200), 0).unwrap();
        let err = journal.append_component_run(&record(run_id, "c", 0), store.blobs());
        assert!(matches!(err, Err(JournalError::RunClosed(_))));
    }

    #[test]
    fn empty_outputs_record_kept() {
        let dir = tempfile::tempdir().unwrap();
        let store = RunStore::open(dir.path()).unwrap();
        let run_id = RunId::from_bytes([9; 16]);
        let mut journal = store.begin_run(header(run_id)).unwrap();
        let mut rec = record(run_id, "c", 0);
        rec.outputs.clear();
        journal.append_component_run(&rec, store.blobs()).unwrap();
        let records = store.component_runs(&run_id, None).unwrap();
        assert!(records[0].outputs.is_empty());
    }

    #[test]
    fn large_value_spilled_and_resolved() {
        let dir = tempfile::tempdir().unwrap();
        let store = RunStore::open(dir.path()).unwrap();
        let run_id = RunId::from_bytes([10; 16]);
        let mut journal = store.begin_run(header(run_id)).unwrap();
        let big = "x".repeat(10_000);
        let mut rec = record(run_id, "c", 0);
        rec.outputs.get_mut(&"out".parse().unwrap()).unwrap()[0].value =
            DataValue::short_text(big.clone()).unwrap();
        journal.append_component_run(&rec, store.blobs()).unwrap();

        let line = std::fs::read_to_string(store.journal_path(&run_id)).unwrap();
        assert!(line.contains("spilled"), "large value must not be inline");

        let records = store.component_runs(&run_id, None).unwrap();
        match &records[0].outputs[&"out".parse().unwrap()][0].value {
            DataValue::ShortText(s) => assert_eq!(s, &big),
            other => panic!("unexpected value {other:?}"),
        }
    }

    #[test]
    fn torn_trailing_line_ignored() {
        let dir = tempfile::tempdir().unwrap();
        let store = RunStore::open(dir.path()).unwrap();
        let run_id = RunId::from_bytes([11; 16]);
        let mut journal = store.begin_run(header(run_id)).unwrap();
        journal.append_component_run(&record(run_id, "c", 0), store.blobs()).unwrap();
        drop(journal);
        use std::io::Write;
        let mut f = fs::OpenOptions::new()
            .append(true)
            .open(store.journal_path(&run_id))
            .unwrap();
        f.write_all(b"{\"record\":\"component_run\",\"trunc").unwrap();
        drop(f);
        let records = store.component_runs(&run_id, None).unwrap();
        assert_eq!(records.len(), 1);
    }

    #[test]
    fn recover_dangling_marks_failed() {
        let dir = tempfile::tempdir().unwrap();
        let store = RunStore::open(dir.path()).unwrap();
        let run_id = RunId::from_bytes([12; 16]);
        let journal = store.begin_run(header(run_id)).unwrap();
        drop(journal); // crash: no close line
        let fixed = store.recover_dangling().unwrap();
        assert_eq!(fixed, vec![run_id]);
        assert_eq!(store.run_summary(&run_id).unwrap().status, RunStatus::Failed);
    }
}
