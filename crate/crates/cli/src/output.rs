use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::CliError;

pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| CliError::write(parent, e))?;
    }
    fs::write(path, text).map_err(|e| CliError::write(path, e))
}

pub fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Runtime(e.to_string()))?;
    write_text(path, &(text + "\n"))
}

/// `base` if it does not exist yet, otherwise the first free `base-N`.
/// The directory is created before returning.
pub fn fresh_dir(base: &Path) -> Result<PathBuf, CliError> {
    let mut candidate = base.to_path_buf();
    let mut k = 1;
    while candidate.exists() {
        let name = format!(
            "{}-{k}",
            base.file_name()
                .map_or("run".into(), |n| n.to_string_lossy())
        );
        candidate = base.with_file_name(name);
        k += 1;
    }
    fs::create_dir_all(&candidate).map_err(|e| CliError::write(&candidate, e))?;
    Ok(candidate)
}
