//! Run data management: every workflow run is persisted as an
//! append-only journal plus a content-addressed blob store, queryable
//! during and after execution and exportable to a deterministic tree.

pub mod blob;
pub mod export;
pub mod journal;
pub mod records;
pub mod runs;

pub use blob::FsBlobStore;
pub use journal::{JournalEntry, RunJournal};
pub use records::{BlobRef, ComponentRunRecord, ExitInfo, RunRole, RunStatus, WorkflowRunRecord};
pub use runs::{RunStore, RunSummary, StoreError};
