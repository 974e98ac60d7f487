use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{CliError, Result};

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

fn staging_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".partial");
    path.with_file_name(name)
}

/// Writes every file or none of them.
///
/// Contents are staged next to their targets and renamed into place once
/// all staging writes succeed; on failure staged and already-renamed files
/// are removed.
pub fn write_all(files: &[(PathBuf, String)]) -> Result<()> {
    let mut staged = Vec::with_capacity(files.len());
    for (path, content) in files {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            if let Err(e) = fs::create_dir_all(dir) {
                cleanup(&staged);
                return Err(CliError::io(dir, e));
            }
        }
        let tmp = staging_path(path);
        if let Err(e) = fs::write(&tmp, content) {
            let _ = fs::remove_file(&tmp);
            cleanup(&staged);
            return Err(CliError::io(path, e));
        }
        staged.push(tmp);
    }
    let mut placed: Vec<PathBuf> = Vec::with_capacity(files.len());
    for ((path, _), tmp) in files.iter().zip(&staged) {
        if let Err(e) = fs::rename(tmp, path) {
            cleanup(&staged);
            cleanup(&placed);
            return Err(CliError::io(path, e));
        }
        placed.push(path.clone());
    }
    Ok(())
}

fn cleanup(paths: &[PathBuf]) {
    for p in paths {
        let _ = fs::remove_file(p);
    }
}

pub fn write_one(path: &Path, content: String) -> Result<()> {
    write_all(&[(path.to_path_buf(), content)])
}
