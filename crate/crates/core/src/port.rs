//! Port specifications for components.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ids::PortName;
use crate::value::DataType;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PortDirection {
    Input,
    Output,
}

/// How an input port treats arriving tokens.
///
/// `Consumed` ports queue tokens and one is dequeued per firing;
/// `Constant` ports keep the latest value and it is read non-destructively.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PortMode {
    Consumed,
    Constant,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PortSpecError {
    #[error("output port {0} must not declare mode or required")]
    OutputWithInputFields(PortName),
}

/// Declaration of one port. `mode` and `required` apply to inputs only.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PortSpec {
    pub name: PortName,
    pub datatype: DataType,
    pub direction: PortDirection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<PortMode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub required: Option<bool>,
}

impl PortSpec {
    pub fn input(name: PortName, datatype: DataType, mode: PortMode, required: bool) -> Self {
        PortSpec {
            name,
            datatype,
            direction: PortDirection::Input,
            mode: Some(mode),
            required: Some(required),
        }
    }

    pub fn output(name: PortName, datatype: DataType) -> Self {
        PortSpec { name, datatype, direction: PortDirection::Output, mode: None, required: None }
    }

    pub fn is_input(&self) -> bool {
        self.direction == PortDirection::Input
    }

    /// Effective mode; inputs default to `Consumed`.
    pub fn effective_mode(&self) -> PortMode {
        self.mode.unwrap_or(PortMode::Consumed)
    }

    /// Effective required flag; inputs default to required.
    pub fn is_required(&self) -> bool {
        self.required.unwrap_or(true)
    }

    pub fn check(&self) -> Result<(), PortSpecError> {
        if self.direction == PortDirection::Output && (self.mode.is_some() || self.required.is_some())
        {
            return Err(PortSpecError::OutputWithInputFields(self.name.clone()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn output_rejects_input_fields() {
        let mut p = PortSpec::output("lift".parse().unwrap(), DataType::Float);
        assert!(p.check().is_ok());
        p.required = Some(true);
        assert!(p.check().is_err());
    }

    #[test]
    fn input_defaults() {
        let text = r#"{"name":"x","datatype":"float","direction":"input"}"#;
        let p: PortSpec = serde_json::from_str(text).unwrap();
        assert_eq!(p.effective_mode(), PortMode::Consumed);
        assert!(p.is_required());
    }
}
