//! The pre-defined components: value sources, script execution, flow
//! control, XML extraction, parametric sweep, and the two loop drivers
//! (convergence check and derivative-free optimizer).
//!
//! All kinds except `script` fire in-process through
//! [`BuiltinInstance`]; `script` runs through the tool pipeline on the
//! firing pool (see [`script`]).

pub mod converger;
pub mod error;
pub mod extract;
pub mod instance;
pub mod optimizer;
pub mod script;
pub mod xml;

pub use converger::Converger;
pub use error::BuiltinError;
pub use instance::{instantiate, is_inline, BuiltinInstance, Emission, FireContext};
pub use optimizer::Optimizer;
pub use script::{script_job, ScriptJob};
