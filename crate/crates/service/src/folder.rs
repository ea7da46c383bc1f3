//! Watch-folder scanning for `open next`.
//!
//! A manifest is any file named `manifest.json` or `*.manifest.json` up to
//! two directory levels below the watch folder, so both flat folders and
//! one-directory-per-case layouts work.

use std::path::{Path, PathBuf};
use std::time::SystemTime;

use serde::{Deserialize, Serialize};
use walkdir::WalkDir;

use crate::error::{Result, ServiceError};

/// Position in the arrival order: modification time, then path for ties.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FolderCursor {
    pub modified: SystemTime,
    pub path: PathBuf,
}

fn is_manifest(path: &Path) -> bool {
    path.file_name()
        .and_then(|n| n.to_str())
        .is_some_and(|n| n == "manifest.json" || n.ends_with(".manifest.json"))
}

/// All manifests under `folder`, oldest first.
pub fn scan_manifests(folder: &Path) -> Result<Vec<FolderCursor>> {
    let folder_err = |reason: String| ServiceError::Folder {
        path: folder.to_owned(),
        reason,
    };
    if !folder.is_dir() {
        return Err(folder_err("not a directory".into()));
    }
    let mut found = Vec::new();
    for entry in WalkDir::new(folder).max_depth(3) {
        let entry = entry.map_err(|e| folder_err(e.to_string()))?;
        if entry.file_type().is_file() && is_manifest(entry.path()) {
            let modified = entry
                .metadata()
                .map_err(|e| folder_err(e.to_string()))?
                .modified()
                .map_err(|e| folder_err(e.to_string()))?;
            found.push(FolderCursor {
                modified,
                path: entry.into_path(),
            });
        }
    }
    found.sort();
    Ok(found)
}

/// Newest manifest when nothing has been opened yet, otherwise the oldest
/// one that arrived after `cursor`.
pub fn next_manifest(folder: &Path, cursor: Option<&FolderCursor>) -> Result<Option<FolderCursor>> {
    let all = scan_manifests(folder)?;
    Ok(match cursor {
        None => all.into_iter().last(),
        Some(c) => all.into_iter().find(|m| m > c),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs::{self, File};
    use std::time::Duration;

    fn touch(path: &Path, secs: u64) {
        fs::create_dir_all(path.parent().unwrap()).unwrap();
        let f = File::create(path).unwrap();
        f.set_modified(SystemTime::UNIX_EPOCH + Duration::from_secs(secs)).unwrap();
    }

    #[test]
    fn first_call_opens_newest_then_follows_arrivals() {
        let dir = tempfile::tempdir().unwrap();
        touch(&dir.path().join("a/manifest.json"), 100);
        touch(&dir.path().join("b/manifest.json"), 300);
        touch(&dir.path().join("c.manifest.json"), 200);
        touch(&dir.path().join("b/truth.json"), 900);

        let first = next_manifest(dir.path(), None).unwrap().unwrap();
        assert!(first.path.ends_with("b/manifest.json"));
        assert!(next_manifest(dir.path(), Some(&first)).unwrap().is_none());

        touch(&dir.path().join("d/manifest.json"), 400);
        let next = next_manifest(dir.path(), Some(&first)).unwrap().unwrap();
        assert!(next.path.ends_with("d/manifest.json"));
    }

    #[test]
    fn missing_folder_is_an_error() {
        assert!(matches!(
            next_manifest(Path::new("/definitely/not/here"), None),
            Err(ServiceError::Folder { .. })
        ));
    }
}
