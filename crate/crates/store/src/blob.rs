//! Content-addressed blob store on the filesystem.
//!
//! Layout is `blobs/<first two hex chars>/<full hash>`. The store is
//! append-only; identical content is stored once. Writes go through a
//! temp file and an atomic rename, so concurrent writers of the same
//! hash are harmless.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use flowmesh_core::{sha256, BlobError, BlobRead, BlobWrite, ContentHash};

#[derive(Debug, Clone)]
pub struct FsBlobStore {
    root: PathBuf,
}

impl FsBlobStore {
    /// Opens (and creates if needed) the store under `root/blobs`.
    pub fn open(root: &Path) -> std::io::Result<Self> {
        let root = root.join("blobs");
        fs::create_dir_all(&root)?;
        Ok(Self { root })
    }

    pub fn path_of(&self, hash: &ContentHash) -> PathBuf {
        let hex = hash.to_hex();
        self.root.join(&hex[..2]).join(hex)
    }

    /// Ingests a file from disk, returning its hash and size.
    pub fn put_file(&self, path: &Path) -> Result<(ContentHash, u64), BlobError> {
        let data = fs::read(path)?;
        let size = data.len() as u64;
        let hash = self.put_blob(&data)?;
        Ok((hash, size))
    }

    /// Verifies that `data` hashes to `expected` before admitting it.
    pub fn put_blob_verified(
        &self,
        data: &[u8],
        expected: &ContentHash,
    ) -> Result<ContentHash, BlobError> {
        let actual = sha256(data);
        if &actual != expected {
            return Err(BlobError::HashMismatch { expected: *expected, actual });
        }
        self.put_blob(data)
    }

    pub fn blob_size(&self, hash: &ContentHash) -> Result<u64, BlobError> {
        let meta = fs::metadata(self.path_of(hash)).map_err(|_| BlobError::NotFound(*hash))?;
        Ok(meta.len())
    }
}

impl BlobRead for FsBlobStore {
    fn has_blob(&self, hash: &ContentHash) -> bool {
        self.path_of(hash).is_file()
    }

    fn blob_bytes(&self, hash: &ContentHash) -> Result<Vec<u8>, BlobError> {
        match fs::read(self.path_of(hash)) {
            Ok(data) => Ok(data),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Err(BlobError::NotFound(*hash)),
            Err(e) => Err(e.into()),
        }
    }
}

impl BlobWrite for FsBlobStore {
    fn put_blob(&self, data: &[u8]) -> Result<ContentHash, BlobError> {
        let hash = sha256(data);
        let path = self.path_of(&hash);
        if path.is_file() {
            return Ok(hash);
        }
        let dir = path.parent().expect("blob path has parent");
        fs::create_dir_all(dir)?;
        let tmp = dir.join(format!(".tmp-{}-{}", std::process::id(), hash.to_hex()));
        {
            let mut f = fs::File::create(&tmp)?;
            f.write_all(data)?;
            f.sync_data()?;
        }
        fs::rename(&tmp, &path)?;
        Ok(hash)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_dedup() {
        let dir = tempfile::tempdir().unwrap();
        let store = FsBlobStore::open(dir.path()).unwrap();
        let h1 = store.put_blob(b"hello").unwrap();
        let h2 = store.put_blob(b"hello").unwrap();
        assert_eq!(h1, h2);
        assert_eq!(store.blob_bytes(&h1).unwrap(), b"hello");
        assert!(store.has_blob(&h1));
        assert_eq!(store.blob_size(&h1).unwrap(), 5);
    }

    #[test]
    fn missing_blob_reported() {
        let dir = tempfile::tempdir().unwrap();
        let store = FsBlobStore::open(dir.path()).unwrap();
        let missing = sha256(b"never stored");
        assert!(!store.has_blob(&missing));
        assert!(matches!(store.blob_bytes(&missing), Err(BlobError::NotFound(_))));
    }

    #[test]
    fn verified_put_rejects_wrong_hash() {
        let dir = tempfile::tempdir().unwrap();
        let store = FsBlobStore::open(dir.path()).unwrap();
        let wrong = sha256(b"other");
        assert!(matches!(
            store.put_blob_verified(b"content", &wrong),
            Err(BlobError::HashMismatch { .. })
        ));
        assert!(!store.has_blob(&sha256(b"content")));
    }
}
