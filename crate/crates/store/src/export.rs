//! Deterministic on-disk export of a recorded run.
//!
//! Layout: `<dest>/<runId>/<componentId>/<firingIndex>/{inputs/,
//! outputs/, stdout.txt, stderr.txt, meta.json}` plus `workflow.wf` and
//! `run.json` at the top. Re-exporting a finished run is byte-identical.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;

use flowmesh_core::{BlobRead, DataToken, DataValue, RunId};

use crate::journal::JournalEntry;
use crate::records::{BlobRef, ComponentRunRecord};
use crate::runs::{RunStore, StoreError};

impl RunStore {
    /// Writes the run's full provenance tree under `dest/<runId>`.
    ///
    /// Works on running runs too: the export then covers the committed
    /// prefix.
    pub fn export_run(&self, run_id: &RunId, dest: &Path) -> Result<PathBuf, StoreError> {
        let entries = {
            let path = self.journal_path(run_id);
            if !path.is_file() {
                return Err(StoreError::UnknownRun(*run_id));
            }
            crate::journal::read_journal(&path)?
        };

        let root = dest.join(run_id.to_hex());
        fs::create_dir_all(&root)?;

        let mut run_meta = serde_json::Map::new();
        run_meta.insert("run_id".into(), Value::String(run_id.to_hex()));
        for entry in &entries {
            match entry {
                JournalEntry::RunStarted(header) => {
                    write_text(&root.join("workflow.wf"), &header.workflow)?;
                    run_meta.insert("role".into(), Value::String("controller".into()));
                    merge_json(&mut run_meta, header)?;
                }
                JournalEntry::RunHosted { controller, .. } => {
                    run_meta.insert("role".into(), Value::String("host".into()));
                    run_meta
                        .insert("controller_node".into(), Value::String(controller.to_hex()));
                }
                JournalEntry::ComponentRun(stored) => {
                    let record = stored.resolve(self.blobs())?;
                    self.export_firing(&root, &record)?;
                }
                JournalEntry::RunClosed { status, ended_at, stranded_tokens } => {
                    run_meta.insert("status".into(), serde_json::to_value(status).unwrap());
                    run_meta.insert("ended_at".into(), serde_json::to_value(ended_at).unwrap());
                    run_meta.insert(
                        "stranded_tokens".into(),
                        Value::Number((*stranded_tokens).into()),
                    );
                }
            }
        }
        write_json(&root.join("run.json"), &Value::Object(run_meta))?;
        Ok(root)
    }

    fn export_firing(&self, root: &Path, record: &ComponentRunRecord) -> Result<(), StoreError> {
        let dir = root
            .join(record.component_id.as_str())
            .join(record.firing_index.to_string());
        let inputs_dir = dir.join("inputs");
        let outputs_dir = dir.join("outputs");
        fs::create_dir_all(&inputs_dir)?;
        fs::create_dir_all(&outputs_dir)?;

        for (port, token) in &record.inputs {
            let path = inputs_dir.join(format!("{port}.json"));
            write_json(&path, &serde_json::to_value(token).unwrap())?;
            self.materialize(&inputs_dir.join(port.as_str()), token)?;
        }
        for (port, tokens) in &record.outputs {
            for (i, token) in tokens.iter().enumerate() {
                let path = outputs_dir.join(format!("{port}.{i}.json"));
                write_json(&path, &serde_json::to_value(token).unwrap())?;
                self.materialize(&outputs_dir.join(format!("{port}.{i}")), token)?;
            }
        }

        write_console(&dir.join("stdout.txt"), record.stdout.as_ref(), self.blobs())?;
        write_console(&dir.join("stderr.txt"), record.stderr.as_ref(), self.blobs())?;

        let meta = serde_json::json!({
            "component_id": record.component_id,
            "firing_index": record.firing_index,
            "host_node": record.host_node,
            "started_at": record.started_at,
            "ended_at": record.ended_at,
            "exit": record.exit,
            "stdout": record.stdout,
            "stderr": record.stderr,
        });
        write_json(&dir.join("meta.json"), &meta)?;
        Ok(())
    }

    /// Writes file and directory values as real files next to the token
    /// metadata.
    fn materialize(&self, dest: &Path, token: &DataToken) -> Result<(), StoreError> {
        match &token.value {
            DataValue::File(f) => {
                fs::create_dir_all(dest)?;
                fs::write(dest.join(&f.name), self.blobs().blob_bytes(&f.hash)?)?;
            }
            DataValue::Directory(d) => {
                fs::create_dir_all(dest)?;
                for entry in &d.entries {
                    let path = dest.join(&entry.path);
                    if let Some(parent) = path.parent() {
                        fs::create_dir_all(parent)?;
                    }
                    fs::write(path, self.blobs().blob_bytes(&entry.hash)?)?;
                }
            }
            _ => {}
        }
        Ok(())
    }
}

fn merge_json<T: Serialize>(
    target: &mut serde_json::Map<String, Value>,
    value: &T,
) -> Result<(), StoreError> {
    if let Value::Object(map) = serde_json::to_value(value).expect("record encodes") {
        for (k, v) in map {
            target.insert(k, v);
        }
    }
    Ok(())
}

fn write_text(path: &Path, text: &str) -> std::io::Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(text.as_bytes())?;
    if !text.ends_with('\n') {
        f.write_all(b"\n")?;
    }
    Ok(())
}

fn write_json(path: &Path, value: &Value) -> std::io::Result<()> {
    // serde_json maps are sorted, so this is canonical.
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)
}

fn write_console(
    path: &Path,
    blob: Option<&BlobRef>,
    blobs: &crate::blob::FsBlobStore,
) -> Result<(), StoreError> {
    let data = match blob {
        Some(b) => blobs.blob_bytes(&b.hash)?,
        None => Vec::new(),
    };
    fs::write(path, data)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::records::{RunStatus, WorkflowRunRecord};
    use chrono::{TimeZone, Utc};
    use flowmesh_core::{BlobWrite, FileRef, NodeId, PortName};
    use std::collections::BTreeMap;

    fn sample_store(dir: &Path) -> (RunStore, RunId) {
        let store = RunStore::open(dir).unwrap();
        let run_id = RunId::from_bytes([3; 16]);
        let ts = |s: i64| Utc.timestamp_opt(s, 0).unwrap();
        let mut journal = store
            .begin_run(WorkflowRunRecord {
                run_id,
                workflow: "{\"components\":[],\"connections\":[],\"name\":\"w\"}\n".into(),
                submitter_node: NodeId::from_bytes([1; 16]),
                controller_node: NodeId::from_bytes([2; 16]),
                started_at: ts(10),
                ended_at: None,
                status: RunStatus::Running,
            })
            .unwrap();

        let file_hash = store.blobs().put_blob(b"<xml/>").unwrap();
        let token = DataToken {
            value: DataValue::File(FileRef { hash: file_hash, name: "c.xml".into(), size: 6 }),
            source_component: "src".parse().unwrap(),
            source_port: "out".parse().unwrap(),
            sequence: 0,
            emitted_at: ts(11),
        };
        for i in 0..3u64 {
            let record = ComponentRunRecord {
                run_id,
                component_id: "src".parse().unwrap(),
                firing_index: i,
                host_node: NodeId::from_bytes([2; 16]),
                inputs: BTreeMap::new(),
                outputs: BTreeMap::from([(
                    "out".parse::<PortName>().unwrap(),
                    vec![token.clone()],
                )]),
                stdout: None,
                stderr: None,
                exit: Default::default(),
                started_at: ts(11),
                ended_at: ts(12),
            };
            journal.append_component_run(&record, store.blobs()).unwrap();
        }
        journal.close(RunStatus::Finished, ts(20), 0).unwrap();
        (store, run_id)
    }

    #[test]
    fn export_tree_shape() {
        let dir = tempfile::tempdir().unwrap();
        let (store, run_id) = sample_store(dir.path());
        let dest = dir.path().join("export");
        let root = store.export_run(&run_id, &dest).unwrap();

        assert!(root.join("workflow.wf").is_file());
        assert!(root.join("run.json").is_file());
        for i in 0..3 {
            let firing = root.join("src").join(i.to_string());
            assert!(firing.join("meta.json").is_file());
            assert!(firing.join("stdout.txt").is_file());
            assert!(firing.join("outputs/out.0.json").is_file());
            assert_eq!(
                fs::read(firing.join("outputs/out.0/c.xml")).unwrap(),
                b"<xml/>"
            );
        }
    }

    #[test]
    fn re_export_is_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let (store, run_id) = sample_store(dir.path());
        let dest_a = dir.path().join("a");
        let dest_b = dir.path().join("b");
        store.export_run(&run_id, &dest_a).unwrap();
        store.export_run(&run_id, &dest_b).unwrap();

        let mut files_a = collect(&dest_a);
        let mut files_b = collect(&dest_b);
        files_a.sort();
        files_b.sort();
        assert_eq!(files_a.len(), files_b.len());
        for (a, b) in files_a.iter().zip(&files_b) {
            assert_eq!(a.strip_prefix(&dest_a).unwrap(), b.strip_prefix(&dest_b).unwrap());
            assert_eq!(fs::read(a).unwrap(), fs::read(b).unwrap(), "{a:?}");
        }
    }

    #[test]
    fn export_unknown_run() {
        let dir = tempfile::tempdir().unwrap();
        let store = RunStore::open(dir.path()).unwrap();
        let missing = RunId::from_bytes([9; 16]);
        assert!(matches!(
            store.export_run(&missing, dir.path()),
            Err(StoreError::UnknownRun(_))
        ));
    }

    #[test]
    fn export_empty_run_has_only_top_level_files() {
        let dir = tempfile::tempdir().unwrap();
        let store = RunStore::open(dir.path()).unwrap();
        let run_id = RunId::from_bytes([4; 16]);
        let ts = Utc.timestamp_opt(5, 0).unwrap();
        let mut journal = store
            .begin_run(WorkflowRunRecord {
                run_id,
                workflow: "{}\n".into(),
                submitter_node: NodeId::from_bytes([1; 16]),
                controller_node: NodeId::from_bytes([2; 16]),
                started_at: ts,
                ended_at: None,
                status: RunStatus::Running,
            })
            .unwrap();
        journal.close(RunStatus::Finished, ts, 0).unwrap();
        let root = store.export_run(&run_id, &dir.path().join("out")).unwrap();
        let names: Vec<String> = fs::read_dir(&root)
            .unwrap()
            .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
            .collect();
        let mut names = names;
        names.sort();
        assert_eq!(names, vec!["run.json", "workflow.wf"]);
    }

    fn collect(root: &Path) -> Vec<PathBuf> {
        let mut out = Vec::new();
        let mut stack = vec![root.to_path_buf()];
        while let Some(dir) = stack.pop() {
            for entry in fs::read_dir(&dir).unwrap() {
                let entry = entry.unwrap();
                let path = entry.path();
                if path.is_dir() {
                    stack.push(path);
                } else {
                    out.push(path);
                }
            }
        }
        out
    }
}
