use std::fmt;
use std::fs;
use std::path::Path;

use anyhow::Context;
use cif_simul::simul::Corpus;

/// Bad flags or unusable input; exits with status 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

/// Marks any error as caused by the input named `what`.
pub trait InputContext<T> {
    fn input(self, what: &Path) -> anyhow::Result<T>;
}

impl<T, E: fmt::Display> InputContext<T> for Result<T, E> {
    fn input(self, what: &Path) -> anyhow::Result<T> {
        self.map_err(|e| UsageError(format!("{}: {e}", what.display())).into())
    }
}

pub fn read_text(path: &Path) -> anyhow::Result<String> {
    fs::read_to_string(path).input(path)
}

pub fn load_corpus(path: &Path) -> anyhow::Result<Corpus> {
    Corpus::from_manifest_json(&read_text(path)?).input(path)
}

pub fn write_text(path: &Path, text: &str) -> anyhow::Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// Files in `dir` whose names end with `suffix`, sorted by name.
pub fn list_files(dir: &Path, suffix: &str) -> anyhow::Result<Vec<std::path::PathBuf>> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).input(dir)? {
        let path = entry.input(dir)?.path();
        if path.is_file()
            && path
                .file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.ends_with(suffix))
        {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}

/// `path` with its extension replaced.
pub fn sibling(path: &Path, ext: &str) -> std::path::PathBuf {
    path.with_extension(ext)
}
