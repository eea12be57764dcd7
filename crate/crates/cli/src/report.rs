//! In-memory report bundle committed atomically: files are written into a
//! sibling `.partial` directory which is renamed into place only when every
//! file is on disk.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::CliError;

#[derive(Debug, Default)]
pub struct Bundle {
    files: BTreeMap<String, Vec<u8>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FileEntry {
    pub name: String,
    pub bytes: usize,
}

impl Bundle {
    pub fn add_text(&mut self, name: impl Into<String>, text: String) {
        self.files.insert(name.into(), text.into_bytes());
    }

    pub fn add_json<T: Serialize>(&mut self, name: impl Into<String>, value: &T) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.add_text(name, text);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&[u8]> {
        self.files.get(name).map(Vec::as_slice)
    }

    pub fn entries(&self) -> Vec<FileEntry> {
        self.files.iter().map(|(n, b)| FileEntry { name: n.clone(), bytes: b.len() }).collect()
    }

    /// Write every file into `dir`, creating it if needed and leaving other
    /// files there untouched.
    pub fn write_into(&self, dir: &Path) -> Result<(), CliError> {
        std::fs::create_dir_all(dir)?;
        for (name, bytes) in &self.files {
            std::fs::write(dir.join(name), bytes)?;
        }
        Ok(())
    }

    /// Write every file into `dir`. With `replace`, an existing `dir` is
    /// swapped out; otherwise an existing non-empty `dir` is an error.
    pub fn commit(&self, dir: &Path, replace: bool) -> Result<(), CliError> {
        if dir.exists() && !replace && std::fs::read_dir(dir)?.next().is_some() {
            return Err(CliError::Config(format!(
                "report directory {} exists and is not empty; pass --force to replace it",
                dir.display()
            )));
        }
        let partial = sibling(dir, ".partial");
        if partial.exists() {
            std::fs::remove_dir_all(&partial)?;
        }
        let result = (|| -> std::io::Result<()> {
            std::fs::create_dir_all(&partial)?;
            for (name, bytes) in &self.files {
                std::fs::write(partial.join(name), bytes)?;
            }
            if dir.exists() {
                std::fs::remove_dir_all(dir)?;
            }
            std::fs::rename(&partial, dir)
        })();
        if let Err(e) = result {
            let _ = std::fs::remove_dir_all(&partial);
            return Err(e.into());
        }
        Ok(())
    }
}

fn sibling(dir: &Path, suffix: &str) -> PathBuf {
    let mut name = dir.file_name().map(|n| n.to_os_string()).unwrap_or_else(|| "report".into());
    name.push(suffix);
    dir.with_file_name(name)
}
