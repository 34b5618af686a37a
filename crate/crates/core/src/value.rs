//! Native datatypes: the typed values that flow along connections.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hash::ContentHash;

/// Maximum byte length of a `ShortText` value.
pub const SHORT_TEXT_MAX_BYTES: usize = 64 * 1024;
/// Maximum number of entries in a `FloatList`.
pub const FLOAT_LIST_MAX_LEN: usize = 1 << 16;

/// The tag of a [`DataValue`]; ports are typed with one of these.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataType {
    Boolean,
    Integer,
    Float,
    ShortText,
    FloatList,
    File,
    Directory,
}

impl DataType {
    pub fn as_str(&self) -> &'static str {
        match self {
            DataType::Boolean => "boolean",
            DataType::Integer => "integer",
            DataType::Float => "float",
            DataType::ShortText => "short_text",
            DataType::FloatList => "float_list",
            DataType::File => "file",
            DataType::Directory => "directory",
        }
    }
}

impl fmt::Display for DataType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("unknown datatype {0:?}")]
pub struct UnknownDataType(pub String);

impl FromStr for DataType {
    type Err = UnknownDataType;
    fn from_str(s: &str) -> Result<Self, UnknownDataType> {
        Ok(match s {
            "boolean" => DataType::Boolean,
            "integer" => DataType::Integer,
            "float" => DataType::Float,
            "short_text" => DataType::ShortText,
            "float_list" => DataType::FloatList,
            "file" => DataType::File,
            "directory" => DataType::Directory,
            _ => return Err(UnknownDataType(s.to_string())),
        })
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ValueError {
    #[error("float value must be finite, got {0}")]
    NonFiniteFloat(f64),
    #[error("float_list entry {index} must be finite, got {value}")]
    NonFiniteListEntry { index: usize, value: f64 },
    #[error("short_text exceeds {SHORT_TEXT_MAX_BYTES} bytes ({0} bytes)")]
    TextTooLong(usize),
    #[error("float_list exceeds {FLOAT_LIST_MAX_LEN} entries ({0} entries)")]
    ListTooLong(usize),
    #[error("directory entry path {0:?} must be a clean relative path")]
    BadEntryPath(String),
    #[error("directory entries must be ordered by path without duplicates (at {0:?})")]
    UnorderedEntries(String),
}

/// Reference to one file blob: content hash plus the original filename and size.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileRef {
    pub hash: ContentHash,
    pub name: String,
    pub size: u64,
}

/// One file inside a [`DirectoryRef`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DirEntry {
    pub path: String,
    pub hash: ContentHash,
    pub size: u64,
}

/// Reference to a directory tree: ordered list of relative paths with blob hashes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DirectoryRef {
    pub entries: Vec<DirEntry>,
}

/// A typed datum. NaN and infinities are rejected at every construction
/// and decode boundary, so no token ever carries a non-finite float.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ValueRepr", into = "ValueRepr")]
pub enum DataValue {
    Boolean(bool),
    Integer(i64),
    Float(f64),
    ShortText(String),
    FloatList(Vec<f64>),
    File(FileRef),
    Directory(DirectoryRef),
}

impl DataValue {
    pub fn float(v: f64) -> Result<Self, ValueError> {
        if !v.is_finite() {
            return Err(ValueError::NonFiniteFloat(v));
        }
        Ok(DataValue::Float(v))
    }

    pub fn short_text(s: impl Into<String>) -> Result<Self, ValueError> {
        let s = s.into();
        if s.len() > SHORT_TEXT_MAX_BYTES {
            return Err(ValueError::TextTooLong(s.len()));
        }
        Ok(DataValue::ShortText(s))
    }

    pub fn float_list(v: Vec<f64>) -> Result<Self, ValueError> {
        if v.len() > FLOAT_LIST_MAX_LEN {
            return Err(ValueError::ListTooLong(v.len()));
        }
        for (index, &value) in v.iter().enumerate() {
            if !value.is_finite() {
                return Err(ValueError::NonFiniteListEntry { index, value });
            }
        }
        Ok(DataValue::FloatList(v))
    }

    pub fn datatype(&self) -> DataType {
        match self {
            DataValue::Boolean(_) => DataType::Boolean,
            DataValue::Integer(_) => DataType::Integer,
            DataValue::Float(_) => DataType::Float,
            DataValue::ShortText(_) => DataType::ShortText,
            DataValue::FloatList(_) => DataType::FloatList,
            DataValue::File(_) => DataType::File,
            DataValue::Directory(_) => DataType::Directory,
        }
    }

    /// Checks the construction invariants; used at decode boundaries.
    pub fn validate(&self) -> Result<(), ValueError> {
        match self {
            DataValue::Float(v) if !v.is_finite() => Err(ValueError::NonFiniteFloat(*v)),
            DataValue::ShortText(s) if s.len() > SHORT_TEXT_MAX_BYTES => {
                Err(ValueError::TextTooLong(s.len()))
            }
            DataValue::FloatList(v) => {
                if v.len() > FLOAT_LIST_MAX_LEN {
                    return Err(ValueError::ListTooLong(v.len()));
                }
                for (index, &value) in v.iter().enumerate() {
                    if !value.is_finite() {
                        return Err(ValueError::NonFiniteListEntry { index, value });
                    }
                }
                Ok(())
            }
            DataValue::Directory(d) => validate_entries(&d.entries),
            _ => Ok(()),
        }
    }

    /// Content hashes referenced by this value, in entry order.
    pub fn referenced_blobs(&self) -> Vec<ContentHash> {
        match self {
            DataValue::File(f) => vec![f.hash],
            DataValue::Directory(d) => d.entries.iter().map(|e| e.hash).collect(),
            _ => Vec::new(),
        }
    }
}

fn validate_entries(entries: &[DirEntry]) -> Result<(), ValueError> {
    for pair in entries.windows(2) {
        if pair[0].path >= pair[1].path {
            return Err(ValueError::UnorderedEntries(pair[1].path.clone()));
        }
    }
    for e in entries {
        let clean = !e.path.is_empty()
            && !e.path.starts_with('/')
            && !e.path.ends_with('/')
            && e.path.split('/').all(|seg| !seg.is_empty() && seg != "." && seg != "..");
        if !clean {
            return Err(ValueError::BadEntryPath(e.path.clone()));
        }
    }
    Ok(())
}

/// Wire/document representation: `{"type": ..., ...}`.
#[derive(Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum ValueRepr {
    Boolean { value: bool },
    Integer { value: i64 },
    Float { value: f64 },
    ShortText { value: String },
    FloatList { value: Vec<f64> },
    File { hash: ContentHash, name: String, size: u64 },
    Directory { entries: Vec<DirEntry> },
}

impl TryFrom<ValueRepr> for DataValue {
    type Error = ValueError;
    fn try_from(r: ValueRepr) -> Result<Self, ValueError> {
        let v = match r {
            ValueRepr::Boolean { value } => DataValue::Boolean(value),
            ValueRepr::Integer { value } => DataValue::Integer(value),
            ValueRepr::Float { value } => DataValue::Float(value),
            ValueRepr::ShortText { value } => DataValue::ShortText(value),
            ValueRepr::FloatList { value } => DataValue::FloatList(value),
            ValueRepr::File { hash, name, size } => DataValue::File(FileRef { hash, name, size }),
            ValueRepr::Directory { entries } => DataValue::Directory(DirectoryRef { entries }),
        };
        v.validate()?;
        Ok(v)
    }
}

impl From<DataValue> for ValueRepr {
    fn from(v: DataValue) -> ValueRepr {
        match v {
            DataValue::Boolean(value) => ValueRepr::Boolean { value },
            DataValue::Integer(value) => ValueRepr::Integer { value },
            DataValue::Float(value) => ValueRepr::Float { value },
            DataValue::ShortText(value) => ValueRepr::ShortText { value },
            DataValue::FloatList(value) => ValueRepr::FloatList { value },
            DataValue::File(f) => ValueRepr::File { hash: f.hash, name: f.name, size: f.size },
            DataValue::Directory(d) => ValueRepr::Directory { entries: d.entries },
        }
    }
}
