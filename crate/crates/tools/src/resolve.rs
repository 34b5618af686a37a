//! Resolution of installed tools by id and version channel.
//!
//! Manifests live at `<profile>/tools/<toolId>/<channel>/manifest.json`
//! and are re-read from disk at every resolution, so a firing always
//! executes the most recently deployed version.

use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use flowmesh_core::VersionChannel;

use crate::manifest::{load_manifest, ManifestError, ToolManifest};

#[derive(Debug, Error)]
pub enum ResolveError {
    #[error("tool {0:?} is not installed")]
    ToolNotFound(String),
    #[error("tool {tool:?} has no {channel} channel installed")]
    ChannelNotFound { tool: String, channel: VersionChannel },
    #[error("manifest for {tool:?}/{channel}: {source}")]
    BadManifest { tool: String, channel: VersionChannel, source: ManifestError },
    #[error("tool library i/o: {0}")]
    Io(#[from] std::io::Error),
}

/// The installed tools of one profile.
#[derive(Debug, Clone)]
pub struct ToolLibrary {
    root: PathBuf,
}

impl ToolLibrary {
    pub fn open(profile_root: &Path) -> std::io::Result<Self> {
        let root = profile_root.join("tools");
        fs::create_dir_all(&root)?;
        Ok(ToolLibrary { root })
    }

    pub fn manifest_path(&self, tool: &str, channel: VersionChannel) -> PathBuf {
        self.root.join(tool).join(channel.as_str()).join("manifest.json")
    }

    /// Installs (or replaces) a manifest under the channel directory.
    /// With `channel_override` the manifest's own channel field is
    /// rewritten to match.
    pub fn install(
        &self,
        text: &str,
        channel_override: Option<VersionChannel>,
    ) -> Result<ToolManifest, ResolveError> {
        let mut manifest = load_manifest(text).map_err(|e| ResolveError::BadManifest {
            tool: "<new>".into(),
            channel: channel_override.unwrap_or(VersionChannel::Stable),
            source: e,
        })?;
        if let Some(channel) = channel_override {
            manifest.channel = channel;
        }
        let path = self.manifest_path(&manifest.tool_id, manifest.channel);
        fs::create_dir_all(path.parent().expect("manifest path has parent"))?;
        fs::write(&path, serde_json::to_string_pretty(&manifest).expect("manifest encodes"))?;
        Ok(manifest)
    }

    /// Returns the manifest currently installed for (tool, channel),
    /// re-read from disk.
    pub fn resolve(&self, tool: &str, channel: VersionChannel) -> Result<ToolManifest, ResolveError> {
        let tool_dir = self.root.join(tool);
        if !tool_dir.is_dir() {
            return Err(ResolveError::ToolNotFound(tool.to_string()));
        }
        let path = self.manifest_path(tool, channel);
        if !path.is_file() {
            return Err(ResolveError::ChannelNotFound { tool: tool.to_string(), channel });
        }
        let text = fs::read_to_string(&path)?;
        let mut manifest = load_manifest(&text).map_err(|e| ResolveError::BadManifest {
            tool: tool.to_string(),
            channel,
            source: e,
        })?;
        // Directory location is authoritative.
        manifest.channel = channel;
        Ok(manifest)
    }

    /// All installed (tool, channel) pairs with their manifests, sorted.
    pub fn list(&self) -> Result<Vec<ToolManifest>, ResolveError> {
        let mut out = Vec::new();
        let mut tools: Vec<PathBuf> = Vec::new();
        for entry in fs::read_dir(&self.root)? {
            let entry = entry?;
            if entry.file_type()?.is_dir() {
                tools.push(entry.path());
            }
        }
        tools.sort();
        for tool_dir in tools {
            let Some(tool) = tool_dir.file_name().and_then(|n| n.to_str()).map(str::to_string)
            else {
                continue;
            };
            for channel in [VersionChannel::Stable, VersionChannel::Development] {
                match self.resolve(&tool, channel) {
                    Ok(manifest) => out.push(manifest),
                    Err(ResolveError::ChannelNotFound { .. }) => {}
                    Err(ResolveError::ToolNotFound(_)) => {}
                    Err(e) => return Err(e),
                }
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn manifest_text(tool: &str, channel: &str, display: &str) -> String {
        format!(
            r#"{{"toolId":"{tool}","displayName":"{display}","channel":"{channel}",
                "ports":[],"command":["true"]}}"#
        )
    }

    #[test]
    fn resolve_matrix() {
        let dir = tempfile::tempdir().unwrap();
        let lib = ToolLibrary::open(dir.path()).unwrap();
        lib.install(&manifest_text("lift", "stable", "Lift"), None).unwrap();
        lib.install(&manifest_text("lift", "development", "Lift Dev"), None).unwrap();
        lib.install(&manifest_text("drag", "stable", "Drag"), None).unwrap();

        // both channels installed, development requested
        let dev = lib.resolve("lift", VersionChannel::Development).unwrap();
        assert_eq!(dev.display_name, "Lift Dev");
        // only stable installed, stable requested
        assert!(lib.resolve("drag", VersionChannel::Stable).is_ok());
        // only stable installed, development requested
        assert!(matches!(
            lib.resolve("drag", VersionChannel::Development),
            Err(ResolveError::ChannelNotFound { .. })
        ));
        // nothing installed
        assert!(matches!(
            lib.resolve("ghost", VersionChannel::Stable),
            Err(ResolveError::ToolNotFound(_))
        ));
    }

    #[test]
    fn resolution_rereads_from_disk() {
        let dir = tempfile::tempdir().unwrap();
        let lib = ToolLibrary::open(dir.path()).unwrap();
        lib.install(&manifest_text("lift", "development", "v1"), None).unwrap();
        assert_eq!(lib.resolve("lift", VersionChannel::Development).unwrap().display_name, "v1");
        lib.install(&manifest_text("lift", "development", "v2"), None).unwrap();
        assert_eq!(lib.resolve("lift", VersionChannel::Development).unwrap().display_name, "v2");
    }

    #[test]
    fn channel_override_rewrites_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let lib = ToolLibrary::open(dir.path()).unwrap();
        lib.install(&manifest_text("lift", "stable", "Lift"), Some(VersionChannel::Development))
            .unwrap();
        assert!(lib.resolve("lift", VersionChannel::Stable).is_err());
        let dev = lib.resolve("lift", VersionChannel::Development).unwrap();
        assert_eq!(dev.channel, VersionChannel::Development);
    }

    #[test]
    fn list_is_sorted() {
        let dir = tempfile::tempdir().unwrap();
        let lib = ToolLibrary::open(dir.path()).unwrap();
        lib.install(&manifest_text("zeta", "stable", "Z"), None).unwrap();
        lib.install(&manifest_text("alpha", "stable", "A"), None).unwrap();
        let names: Vec<String> = lib.list().unwrap().into_iter().map(|m| m.tool_id).collect();
        assert_eq!(names, vec!["alpha", "zeta"]);
    }
}
