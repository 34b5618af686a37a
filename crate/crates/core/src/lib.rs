//! Workflow graph model and native datatype system.
//!
//! This crate is the shared vocabulary of the engine: typed values and
//! tokens, port and component definitions, the `.wf` document format,
//! semantic validation against a component catalog, and the canonical
//! serialization used for snapshots and digests.

pub mod builtin;
pub mod canonical;
pub mod hash;
pub mod ids;
pub mod parse;
pub mod port;
pub mod token;
pub mod validate;
pub mod value;
pub mod workflow;

pub use builtin::BuiltinKind;
pub use hash::{sha256, BlobError, BlobRead, BlobWrite, ContentHash};
pub use ids::{CallId, ComponentId, NodeId, PortName, RunId};
pub use parse::{parse_workflow, ParseError};
pub use port::{PortDirection, PortMode, PortSpec};
pub use token::DataToken;
pub use validate::{
    validate_workflow, ComponentBinding, ComponentCatalog, ResolvedComponent, ToolResolution,
    ValidatedWorkflow, ValidationReport, Violation,
};
pub use value::{DataType, DataValue, DirEntry, DirectoryRef, FileRef, ValueError};
pub use workflow::{
    ComponentInstance, ComponentKind, Connection, Endpoint, VersionChannel, WorkflowDefinition,
};
