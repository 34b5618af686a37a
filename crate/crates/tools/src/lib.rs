//! Tool integration: wrapping an external executable as a workflow
//! component. A manifest declares ports, scripts and the command; the
//! runner stages inputs into a fresh run directory, executes the
//! pre-script → command → post-script pipeline and harvests `outputs.json`.

pub mod exchange;
pub mod manifest;
pub mod process;
pub mod resolve;
pub mod runner;

pub use manifest::{load_manifest, ManifestError, ToolManifest};
pub use process::CancelToken;
pub use resolve::{ResolveError, ToolLibrary};
pub use runner::{
    execute_tool_run, run_script, ConsoleSink, ConsoleStream, RunEnv, ToolRunContext, ToolRunError,
};
