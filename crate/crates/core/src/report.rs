//! Report documents and how they are written.
//!
//! Reports go through `serde_json::Value`, whose maps are ordered, so keys
//! come out sorted regardless of struct field order. Nothing time- or
//! machine-dependent is included, and files are replaced atomically.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::gateway::ModelSettings;
use crate::model::{CodeAssessment, Language, OptimizationRun};

/// Output of a ten-dimension evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub id: String,
    pub language: Language,
    pub model: ModelSettings,
    pub self_consistency: u32,
    pub assessment: CodeAssessment,
}

/// Output of the single-prompt baseline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineReport {
    pub id: String,
    pub language: Language,
    pub model: ModelSettings,
    pub score: i8,
    pub insight: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub id: String,
    pub model: ModelSettings,
    /// Set when the loop stopped early on an error; the run is then partial.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aborted: Option<String>,
    pub run: OptimizationRun,
}

/// Sorted-key, pretty-printed JSON with a trailing newline.
pub fn to_canonical_json<T: Serialize>(value: &T) -> serde_json::Result<String> {
    let value = serde_json::to_value(value)?;
    let mut text = serde_json::to_string_pretty(&value)?;
    text.push('\n');
    Ok(text)
}

/// Writes through a temporary file in the same directory, then renames.
pub fn write_atomic(path: &Path, contents: &[u8]) -> std::io::Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> std::io::Result<()> {
    let text = to_canonical_json(value).map_err(std::io::Error::other)?;
    write_atomic(path, text.as_bytes())
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> std::io::Result<T> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text)
        .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, format!("{}: {e}", path.display())))
}

/// File-name stem for an id: path separators become `__`, other unsafe characters `_`.
pub fn report_stem(id: &str) -> String {
    let mut out = String::with_capacity(id.len());
    for c in id.chars() {
        match c {
            '/' | '\\' => out.push_str("__"),
            c if c.is_ascii_alphanumeric() || matches!(c, '.' | '-' | '_') => out.push(c),
            _ => out.push('_'),
        }
    }
    if out.is_empty() || out.starts_with('.') {
        out.insert(0, '_');
    }
    out
}
