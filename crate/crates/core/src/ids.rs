//! Identifier newtypes shared across the engine.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum IdError {
    #[error("invalid identifier {0:?}: must match [a-zA-Z_][a-zA-Z0-9_]* and be at most 128 chars")]
    BadIdentifier(String),
    #[error("invalid hex id {0:?}: expected 32 lowercase hex chars")]
    BadHexId(String),
}

fn check_identifier(s: &str) -> Result<(), IdError> {
    let mut chars = s.chars();
    let ok = match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {
            chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
        }
        _ => false,
    };
    if ok && s.len() <= 128 {
        Ok(())
    } else {
        Err(IdError::BadIdentifier(s.to_string()))
    }
}

macro_rules! identifier_newtype {
    ($(#[$doc:meta])* $name:ident) => {
        $(#[$doc])*
        #[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub struct $name(String);

        impl $name {
            pub fn new(s: impl Into<String>) -> Result<Self, IdError> {
                let s = s.into();
                check_identifier(&s)?;
                Ok(Self(s))
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl FromStr for $name {
            type Err = IdError;
            fn from_str(s: &str) -> Result<Self, IdError> {
                Self::new(s)
            }
        }

        impl Serialize for $name {
            fn serialize<S: Serializer>(&self, ser: S) -> Result<S::Ok, S::Error> {
                ser.serialize_str(&self.0)
            }
        }

        impl<'de> Deserialize<'de> for $name {
            fn deserialize<D: Deserializer<'de>>(de: D) -> Result<Self, D::Error> {
                let s = String::deserialize(de)?;
                Self::new(s).map_err(serde::de::Error::custom)
            }
        }
    };
}

identifier_newtype!(
    /// Unique name of a component instance within one workflow.
    ComponentId
);
identifier_newtype!(
    /// Name of an input or output port on a component.
    PortName
);

macro_rules! hex16_newtype {
    ($(#[$doc:meta])* $name:ident) => {
        $(#[$doc])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub struct $name([u8; 16]);

        impl $name {
            pub fn from_bytes(bytes: [u8; 16]) -> Self {
                Self(bytes)
            }

            /// Fresh random id from the given RNG.
            pub fn generate(rng: &mut impl rand::Rng) -> Self {
                let mut bytes = [0u8; 16];
                rng.fill(&mut bytes);
                Self(bytes)
            }

            pub fn as_bytes(&self) -> &[u8; 16] {
                &self.0
            }

            pub fn to_hex(&self) -> String {
                hex::encode(self.0)
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.to_hex())
            }
        }

        impl FromStr for $name {
            type Err = IdError;
            fn from_str(s: &str) -> Result<Self, IdError> {
                if s.len() != 32 || !s.bytes().all(|b| matches!(b, b'0'..=b'9' | b'a'..=b'f')) {
                    return Err(IdError::BadHexId(s.to_string()));
                }
                let mut bytes = [0u8; 16];
                hex::decode_to_slice(s, &mut bytes).map_err(|_| IdError::BadHexId(s.to_string()))?;
                Ok(Self(bytes))
            }
        }

        impl Serialize for $name {
            fn serialize<S: Serializer>(&self, ser: S) -> Result<S::Ok, S::Error> {
                ser.serialize_str(&self.to_hex())
            }
        }

        impl<'de> Deserialize<'de> for $name {
            fn deserialize<D: Deserializer<'de>>(de: D) -> Result<Self, D::Error> {
                let s = String::deserialize(de)?;
                s.parse().map_err(serde::de::Error::custom)
            }
        }
    };
}

hex16_newtype!(
    /// Stable address of a node, generated once at profile creation.
    NodeId
);
hex16_newtype!(
    /// Identifier of one workflow run.
    RunId
);
hex16_newtype!(
    /// Identifier of one remote invocation, unique per origin.
    CallId
);

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identifier_rules() {
        assert!(ComponentId::new("lift_tool").is_ok());
        assert!(ComponentId::new("_x9").is_ok());
        assert!(ComponentId::new("9x").is_err());
        assert!(ComponentId::new("a.b").is_err());
        assert!(ComponentId::new("").is_err());
        assert!(PortName::new("x".repeat(129)).is_err());
    }

    #[test]
    fn hex_id_round_trip() {
        let id = NodeId::from_bytes([0xab; 16]);
        assert_eq!(id.to_hex().len(), 32);
        assert_eq!(id.to_hex().parse::<NodeId>().unwrap(), id);
        assert!("ABCD".parse::<NodeId>().is_err());
        assert!("zz".repeat(16).parse::<NodeId>().is_err());
    }
}
