//! The statement catalog: ten dimensions, five statements each.
//!
//! The catalog is data. The default one ships embedded; a custom catalog may
//! reword statements but must keep the ten canonical dimensions and the
//! five-statement shape. Documents are TOML (or JSON, by extension) mapping a
//! dimension id to its array of statements.

use std::fmt;
use std::path::Path;

use serde::de::{MapAccess, Visitor};
use serde::{Deserialize, Deserializer};

use crate::model::{QualityDimension, DIMENSION_IDS, STATEMENTS_PER_DIMENSION};

const DEFAULT_CATALOG: &str = include_str!("../catalog/default.toml");

#[derive(Debug, thiserror::Error)]
pub enum CatalogError {
    #[error("catalog is missing dimension `{0}`")]
    MissingDimension(String),
    #[error("dimension `{0}` appears more than once")]
    DuplicateDimension(String),
    #[error("unknown dimension `{0}`")]
    UnknownDimension(String),
    #[error("dimension `{dimension}` has {actual} statements, expected {STATEMENTS_PER_DIMENSION}")]
    Shape { dimension: String, actual: usize },
    #[error("malformed catalog document: {0}")]
    Parse(String),
    #[error("cannot read catalog {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StatementCatalog {
    dimensions: Vec<QualityDimension>,
}

/// Map entries in document order, duplicates preserved.
struct RawCatalog(Vec<(String, Vec<String>)>);

impl<'de> Deserialize<'de> for RawCatalog {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct RawVisitor;

        impl<'de> Visitor<'de> for RawVisitor {
            type Value = RawCatalog;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a map of dimension id to statement array")
            }

            fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> Result<RawCatalog, A::Error> {
                let mut entries = Vec::new();
                while let Some((key, value)) = map.next_entry::<String, Vec<String>>()? {
                    entries.push((key, value));
                }
                Ok(RawCatalog(entries))
            }
        }

        deserializer.deserialize_map(RawVisitor)
    }
}

impl StatementCatalog {
    /// The embedded default catalog.
    pub fn builtin() -> Self {
        Self::from_toml_str(DEFAULT_CATALOG).expect("embedded catalog is valid")
    }

    pub fn from_toml_str(text: &str) -> Result<Self, CatalogError> {
        let raw: RawCatalog = toml::from_str(text).map_err(|e| match duplicate_key(text, &e) {
            Some(key) => CatalogError::DuplicateDimension(key),
            None => CatalogError::Parse(e.to_string()),
        })?;
        Self::from_entries(raw.0)
    }

    pub fn from_json_str(text: &str) -> Result<Self, CatalogError> {
        let raw: RawCatalog = serde_json::from_str(text).map_err(|e| CatalogError::Parse(e.to_string()))?;
        Self::from_entries(raw.0)
    }

    /// Loads a catalog file; `.json` files are parsed as JSON, anything else as TOML.
    pub fn load(path: &Path) -> Result<Self, CatalogError> {
        let text = std::fs::read_to_string(path).map_err(|source| CatalogError::Io {
            path: path.display().to_string(),
            source,
        })?;
        match path.extension().and_then(|e| e.to_str()) {
            Some("json") => Self::from_json_str(&text),
            _ => Self::from_toml_str(&text),
        }
    }

    fn from_entries(entries: Vec<(String, Vec<String>)>) -> Result<Self, CatalogError> {
        let mut slots: Vec<Option<Vec<String>>> = vec![None; DIMENSION_IDS.len()];
        for (id, statements) in entries {
            let pos = DIMENSION_IDS
                .iter()
                .position(|known| *known == id)
                .ok_or_else(|| CatalogError::UnknownDimension(id.clone()))?;
            if slots[pos].is_some() {
                return Err(CatalogError::DuplicateDimension(id));
            }
            if statements.len() != STATEMENTS_PER_DIMENSION {
                return Err(CatalogError::Shape {
                    dimension: id,
                    actual: statements.len(),
                });
            }
            slots[pos] = Some(statements);
        }
        let dimensions = slots
            .into_iter()
            .zip(DIMENSION_IDS)
            .map(|(slot, id)| {
                let statements = slot.ok_or_else(|| CatalogError::MissingDimension(id.to_string()))?;
                Ok(QualityDimension {
                    id: id.to_string(),
                    statements,
                })
            })
            .collect::<Result<Vec<_>, CatalogError>>()?;
        Ok(Self { dimensions })
    }

    /// Dimensions in canonical order.
    pub fn dimensions(&self) -> &[QualityDimension] {
        &self.dimensions
    }

    pub fn dimension(&self, id: &str) -> Option<&QualityDimension> {
        self.dimensions.iter().find(|d| d.id == id)
    }

    pub fn statement_count(&self) -> usize {
        self.dimensions.iter().map(|d| d.statements.len()).sum()
    }
}

impl Default for StatementCatalog {
    fn default() -> Self {
        Self::builtin()
    }
}

/// The toml parser reports duplicates without naming them; the span points at the key.
fn duplicate_key(text: &str, error: &toml::de::Error) -> Option<String> {
    if !error.message().contains("duplicate key") {
        return None;
    }
    let start = error.span()?.start;
    let key: String = text
        .get(start..)?
        .chars()
        .take_while(|c| c.is_alphanumeric() || *c == '_' || *c == '-')
        .collect();
    (!key.is_empty()).then_some(key)
}
