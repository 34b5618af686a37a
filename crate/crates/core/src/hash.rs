//! Content hashing and the blob store access traits.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};
use thiserror::Error;

/// SHA-256 digest of blob content, the key of the content-addressed store.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ContentHash([u8; 32]);

impl ContentHash {
    pub fn from_bytes(bytes: [u8; 32]) -> Self {
        Self(bytes)
    }

    pub fn as_bytes(&self) -> &[u8; 32] {
        &self.0
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }
}

/// Hash of a byte string.
pub fn sha256(data: &[u8]) -> ContentHash {
    let mut h = Sha256::new();
    h.update(data);
    ContentHash(h.finalize().into())
}

impl fmt::Display for ContentHash {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("invalid content hash {0:?}: expected 64 lowercase hex chars")]
pub struct BadContentHash(String);

impl FromStr for ContentHash {
    type Err = BadContentHash;
    fn from_str(s: &str) -> Result<Self, BadContentHash> {
        if s.len() != 64 || !s.bytes().all(|b| matches!(b, b'0'..=b'9' | b'a'..=b'f')) {
            return Err(BadContentHash(s.to_string()));
        }
        let mut bytes = [0u8; 32];
        hex::decode_to_slice(s, &mut bytes).map_err(|_| BadContentHash(s.to_string()))?;
        Ok(Self(bytes))
    }
}

impl Serialize for ContentHash {
    fn serialize<S: Serializer>(&self, ser: S) -> Result<S::Ok, S::Error> {
        ser.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for ContentHash {
    fn deserialize<D: Deserializer<'de>>(de: D) -> Result<Self, D::Error> {
        let s = String::deserialize(de)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Error)]
pub enum BlobError {
    #[error("blob {0} not found")]
    NotFound(ContentHash),
    #[error("blob content hashes to {actual}, expected {expected}")]
    HashMismatch {
        expected: ContentHash,
        actual: ContentHash,
    },
    #[error("blob store i/o: {0}")]
    Io(#[from] std::io::Error),
}

/// Read side of a content-addressed blob store.
pub trait BlobRead {
    fn has_blob(&self, hash: &ContentHash) -> bool;
    fn blob_bytes(&self, hash: &ContentHash) -> Result<Vec<u8>, BlobError>;
}

/// Write side of a content-addressed blob store. Identical content is
/// stored once; the returned hash is always the content's SHA-256.
pub trait BlobWrite {
    fn put_blob(&self, data: &[u8]) -> Result<ContentHash, BlobError>;
}
