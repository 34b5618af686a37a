//! Exchange files between the engine and tool processes.
//!
//! `inputs.json` / `tool_inputs.json` / `outputs.json` live in the run
//! directory. Scalars appear as `{"type": ..., "value": ...}`; file and
//! directory values appear as `{"type":"file","path":...}` entries whose
//! paths are relative to the run directory.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Component, Path, PathBuf};

use serde_json::{json, Map, Value};
use thiserror::Error;

use flowmesh_core::{
    BlobError, BlobRead, BlobWrite, DataType, DataValue, DirEntry, DirectoryRef, FileRef, PortName,
};

#[derive(Debug, Error)]
pub enum ExchangeError {
    #[error("staging i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("blob: {0}")]
    Blob(#[from] BlobError),
    #[error("outputs.json is not valid JSON: {0}")]
    BadOutputsJson(String),
    #[error("output {port}: {problem}")]
    BadOutput { port: PortName, problem: String },
    #[error("output path {0:?} escapes the run directory")]
    PathEscapes(String),
}

/// Writes the content of file/directory inputs under
/// `run_dir/inputs/<port>/` and returns the exchange document value per
/// port.
pub fn stage_inputs(
    run_dir: &Path,
    inputs: &BTreeMap<PortName, DataValue>,
    blobs: &dyn BlobRead,
) -> Result<Value, ExchangeError> {
    let inputs_dir = run_dir.join("inputs");
    fs::create_dir_all(&inputs_dir)?;
    let mut doc = Map::new();
    for (port, value) in inputs {
        doc.insert(port.to_string(), stage_value(run_dir, port, value, blobs)?);
    }
    Ok(Value::Object(doc))
}

fn stage_value(
    run_dir: &Path,
    port: &PortName,
    value: &DataValue,
    blobs: &dyn BlobRead,
) -> Result<Value, ExchangeError> {
    match value {
        DataValue::File(f) => {
            let rel = format!("inputs/{port}/{}", f.name);
            let path = run_dir.join(&rel);
            fs::create_dir_all(path.parent().expect("staged file has parent"))?;
            fs::write(&path, blobs.blob_bytes(&f.hash)?)?;
            Ok(json!({ "type": "file", "path": rel }))
        }
        DataValue::Directory(d) => {
            let rel = format!("inputs/{port}");
            let root = run_dir.join(&rel);
            fs::create_dir_all(&root)?;
            for entry in &d.entries {
                let path = root.join(&entry.path);
                if let Some(parent) = path.parent() {
                    fs::create_dir_all(parent)?;
                }
                fs::write(path, blobs.blob_bytes(&entry.hash)?)?;
            }
            Ok(json!({ "type": "directory", "path": rel }))
        }
        scalar => Ok(serde_json::to_value(scalar.clone()).expect("value encodes")),
    }
}

/// The command-line text standing in for a staged input value.
pub fn placeholder_text(port: &PortName, value: &DataValue) -> String {
    match value {
        DataValue::Boolean(b) => b.to_string(),
        DataValue::Integer(i) => i.to_string(),
        DataValue::Float(f) => f.to_string(),
        DataValue::ShortText(s) => s.clone(),
        DataValue::FloatList(v) => serde_json::to_string(v).expect("list encodes"),
        DataValue::File(f) => format!("inputs/{port}/{}", f.name),
        DataValue::Directory(_) => format!("inputs/{port}"),
    }
}

/// Reads `outputs.json`, checks it against the declared output ports and
/// ingests produced files into the blob store. Undeclared keys are
/// discarded.
pub fn harvest_outputs(
    run_dir: &Path,
    declared: &[(PortName, DataType)],
    blobs: &dyn BlobWrite,
) -> Result<BTreeMap<PortName, DataValue>, ExchangeError> {
    let mut out = BTreeMap::new();
    if declared.is_empty() {
        return Ok(out);
    }
    let path = run_dir.join("outputs.json");
    let text = fs::read_to_string(&path)
        .map_err(|_| ExchangeError::BadOutputsJson("file missing or unreadable".into()))?;
    let doc: Value =
        serde_json::from_str(&text).map_err(|e| ExchangeError::BadOutputsJson(e.to_string()))?;
    let doc = doc
        .as_object()
        .ok_or_else(|| ExchangeError::BadOutputsJson("top level must be an object".into()))?;

    for (port, datatype) in declared {
        let raw = doc.get(port.as_str()).ok_or_else(|| ExchangeError::BadOutput {
            port: port.clone(),
            problem: "missing from outputs.json".into(),
        })?;
        let value = harvest_value(run_dir, port, raw, *datatype, blobs)?;
        if value.datatype() != *datatype {
            return Err(ExchangeError::BadOutput {
                port: port.clone(),
                problem: format!("expected {}, got {}", datatype, value.datatype()),
            });
        }
        out.insert(port.clone(), value);
    }
    Ok(out)
}

fn harvest_value(
    run_dir: &Path,
    port: &PortName,
    raw: &Value,
    datatype: DataType,
    blobs: &dyn BlobWrite,
) -> Result<DataValue, ExchangeError> {
    let kind = raw.get("type").and_then(Value::as_str).unwrap_or_default();
    match (kind, datatype) {
        ("file", DataType::File) => {
            let rel = path_field(port, raw)?;
            let full = resolve_in_run_dir(run_dir, &rel)?;
            let data = fs::read(&full).map_err(|e| ExchangeError::BadOutput {
                port: port.clone(),
                problem: format!("cannot read produced file {rel:?}: {e}"),
            })?;
            let hash = blobs.put_blob(&data)?;
            let name = full
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_else(|| "file".into());
            Ok(DataValue::File(FileRef { hash, name, size: data.len() as u64 }))
        }
        ("directory", DataType::Directory) => {
            let rel = path_field(port, raw)?;
            let root = resolve_in_run_dir(run_dir, &rel)?;
            let mut entries = Vec::new();
            collect_dir(&root, &root, blobs, &mut entries).map_err(|e| {
                ExchangeError::BadOutput {
                    port: port.clone(),
                    problem: format!("cannot read produced directory {rel:?}: {e}"),
                }
            })?;
            entries.sort_by(|a, b| a.path.cmp(&b.path));
            Ok(DataValue::Directory(DirectoryRef { entries }))
        }
        _ => serde_json::from_value(raw.clone()).map_err(|e| ExchangeError::BadOutput {
            port: port.clone(),
            problem: e.to_string(),
        }),
    }
}

fn path_field(port: &PortName, raw: &Value) -> Result<String, ExchangeError> {
    raw.get("path")
        .and_then(Value::as_str)
        .map(str::to_string)
        .ok_or_else(|| ExchangeError::BadOutput {
            port: port.clone(),
            problem: "file/directory output needs a \"path\" field".into(),
        })
}

fn resolve_in_run_dir(run_dir: &Path, rel: &str) -> Result<PathBuf, ExchangeError> {
    let path = Path::new(rel);
    let clean = !path.is_absolute()
        && path.components().all(|c| matches!(c, Component::Normal(_)));
    if !clean {
        return Err(ExchangeError::PathEscapes(rel.to_string()));
    }
    Ok(run_dir.join(path))
}

fn collect_dir(
    root: &Path,
    dir: &Path,
    blobs: &dyn BlobWrite,
    out: &mut Vec<DirEntry>,
) -> Result<(), ExchangeError> {
    let mut children: Vec<PathBuf> = fs::read_dir(dir)?.map(|e| e.map(|e| e.path())).collect::<Result<_, _>>()?;
    children.sort();
    for child in children {
        if child.is_dir() {
            collect_dir(root, &child, blobs, out)?;
        } else {
            let data = fs::read(&child)?;
            let hash = blobs.put_blob(&data)?;
            let rel = child
                .strip_prefix(root)
                .expect("child under root")
                .to_string_lossy()
                .replace('\\', "/");
            out.push(DirEntry { path: rel, hash, size: data.len() as u64 });
        }
    }
    Ok(())
}
