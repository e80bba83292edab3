//! Corpus manifests and batch runs.
//!
//! A manifest is a TOML file with one `[[entry]]` table per code example:
//!
//! ```toml
//! [[entry]]
//! id = "mbpp/601"
//! path = "mbpp/601.py"
//! language = "python"
//! test_command = "python3 {root}/mbpp/601_test.py {code}"
//! source = "mbpp"
//! ```
//!
//! Paths are relative to the manifest's directory, which is also what
//! `{root}` stands for in test commands. A batch writes one report per entry
//! plus `index.json`; a failing entry is recorded and the batch continues.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::VersionScores;
use crate::evaluator::Evaluator;
use crate::model::{CodeUnit, Language, OptimizerConfig};
use crate::optimizer::{OptimizeError, Optimizer};
use crate::proxy::ProxyRunner;
use crate::report::{self, BaselineReport, EvaluationReport, RunReport};
use crate::validation::Validator;

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("cannot read manifest {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid manifest {path}: {message}")]
    Invalid { path: String, message: String },
    #[error("duplicate entry id `{0}`")]
    DuplicateId(String),
    #[error("entries `{0}` and `{1}` map to the same report name")]
    ReportNameClash(String, String),
    #[error("entry `{id}`: file {path} not found")]
    MissingFile { id: String, path: String },
    #[error("entry `{id}`: unsupported language `{language}`")]
    UnknownLanguage { id: String, language: String },
    #[error("cannot write to {path}: {source}")]
    Output {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub id: String,
    pub path: PathBuf,
    pub language: String,
    #[serde(default)]
    pub test_command: Option<String>,
    #[serde(default)]
    pub source: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawManifest {
    #[serde(default)]
    entry: Vec<ManifestEntry>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusManifest {
    pub root: PathBuf,
    pub entries: Vec<ManifestEntry>,
}

pub fn load_manifest(path: &Path) -> Result<CorpusManifest, CorpusError> {
    let text = std::fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let raw: RawManifest = toml::from_str(&text).map_err(|e| CorpusError::Invalid {
        path: path.display().to_string(),
        message: e.message().to_string(),
    })?;
    let root = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let root = root.canonicalize().unwrap_or(root);

    let mut ids = HashSet::new();
    let mut stems: Vec<(String, String)> = Vec::new();
    for e in &raw.entry {
        if !ids.insert(e.id.as_str()) {
            return Err(CorpusError::DuplicateId(e.id.clone()));
        }
        let stem = report::report_stem(&e.id);
        if let Some((other, _)) = stems.iter().find(|(_, s)| *s == stem) {
            return Err(CorpusError::ReportNameClash(other.clone(), e.id.clone()));
        }
        stems.push((e.id.clone(), stem));
        if let Language::Other(tag) = Language::from_tag(&e.language) {
            return Err(CorpusError::UnknownLanguage {
                id: e.id.clone(),
                language: tag,
            });
        }
        if !root.join(&e.path).is_file() {
            return Err(CorpusError::MissingFile {
                id: e.id.clone(),
                path: e.path.display().to_string(),
            });
        }
    }
    Ok(CorpusManifest {
        root,
        entries: raw.entry,
    })
}

impl CorpusManifest {
    /// Reads an entry's source. `{root}` in its test command is left for the validator.
    pub fn load_unit(&self, entry: &ManifestEntry) -> Result<CodeUnit, String> {
        let source = std::fs::read_to_string(self.root.join(&entry.path))
            .map_err(|e| format!("reading {}: {e}", entry.path.display()))?;
        let mut unit =
            CodeUnit::new(entry.id.clone(), Language::from_tag(&entry.language), source).map_err(|e| e.to_string())?;
        if let Some(cmd) = &entry.test_command {
            unit = unit.with_test_command(cmd.clone());
        }
        if let Some(src) = &entry.source {
            unit = unit.with_provenance(src.clone());
        }
        Ok(unit)
    }

    pub fn count_by_language(&self) -> (usize, usize) {
        let python = self
            .entries
            .iter()
            .filter(|e| Language::from_tag(&e.language) == Language::Python)
            .count();
        (python, self.entries.len() - python)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BatchMode {
    Evaluate,
    Optimize,
    Proxy,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchOptions {
    pub mode: BatchMode,
    pub workers: usize,
    /// Also run the single-prompt baseline (on every accepted version in optimize mode).
    pub with_baseline: bool,
    /// Also compute proxy scores for every accepted version in optimize mode.
    pub with_proxy: bool,
}

impl BatchOptions {
    pub fn new(mode: BatchMode) -> Self {
        Self {
            mode,
            workers: 1,
            with_baseline: false,
            with_proxy: false,
        }
    }
}

/// What a batch needs besides the manifest.
pub struct BatchContext<'a> {
    pub evaluator: &'a Evaluator<'a>,
    pub validator: &'a Validator,
    pub optimizer: OptimizerConfig,
    pub proxy: &'a ProxyRunner,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntryStatus {
    pub id: String,
    pub ok: bool,
    /// Files written for this entry, relative to the output directory.
    pub files: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchSummary {
    pub mode: BatchMode,
    pub total: usize,
    pub succeeded: usize,
    pub failed: usize,
    pub entries: Vec<EntryStatus>,
}

struct EntryOutput {
    files: Vec<String>,
    error: Option<String>,
}

impl EntryOutput {
    fn write<T: Serialize>(&mut self, dir: &Path, name: String, value: &T) -> Result<(), String> {
        report::write_json(&dir.join(&name), value).map_err(|e| format!("writing {name}: {e}"))?;
        self.files.push(name);
        Ok(())
    }

    fn write_text(&mut self, dir: &Path, name: String, text: &str) -> Result<(), String> {
        report::write_atomic(&dir.join(&name), text.as_bytes()).map_err(|e| format!("writing {name}: {e}"))?;
        self.files.push(name);
        Ok(())
    }
}

fn run_entry(
    manifest: &CorpusManifest,
    entry: &ManifestEntry,
    options: &BatchOptions,
    ctx: &BatchContext<'_>,
    out_dir: &Path,
) -> EntryOutput {
    let mut out = EntryOutput {
        files: Vec::new(),
        error: None,
    };
    if let Err(e) = process_entry(manifest, entry, options, ctx, out_dir, &mut out) {
        out.error = Some(e);
    }
    out
}

fn process_entry(
    manifest: &CorpusManifest,
    entry: &ManifestEntry,
    options: &BatchOptions,
    ctx: &BatchContext<'_>,
    out_dir: &Path,
    out: &mut EntryOutput,
) -> Result<(), String> {
    let unit = manifest.load_unit(entry)?;
    let stem = report::report_stem(&entry.id);
    let model = ctx.evaluator.settings().clone();
    match options.mode {
        BatchMode::Evaluate => {
            let assessment = ctx.evaluator.evaluate(&unit).map_err(|e| e.to_string())?;
            let report = EvaluationReport {
                id: unit.id.clone(),
                language: unit.language.clone(),
                model: model.clone(),
                self_consistency: ctx.evaluator.self_consistency(),
                assessment,
            };
            out.write(out_dir, format!("{stem}.eval.json"), &report)?;
            if options.with_baseline {
                let reply = ctx.evaluator.evaluate_baseline(&unit).map_err(|e| e.to_string())?;
                let report = BaselineReport {
                    id: unit.id.clone(),
                    language: unit.language.clone(),
                    model,
                    score: reply.score,
                    insight: reply.insight,
                };
                out.write(out_dir, format!("{stem}.baseline.json"), &report)?;
            }
        }
        BatchMode::Proxy => {
            if unit.language != Language::Python {
                return Err(format!("proxy metrics apply to Python only, got `{}`", unit.language));
            }
            let report = ctx
                .proxy
                .proxy_overall(&manifest.root.join(&entry.path))
                .map_err(|e| e.to_string())?;
            out.write(out_dir, format!("{stem}.proxy.json"), &report)?;
        }
        BatchMode::Optimize => {
            let validator = ctx.validator.clone().with_root(&manifest.root);
            let optimizer =
                Optimizer::new(ctx.evaluator, &validator, ctx.optimizer.clone()).map_err(|e| e.to_string())?;
            let (run, aborted) = match optimizer.optimize(&unit) {
                Ok(run) => (run, None),
                Err(OptimizeError::Aborted {
                    partial,
                    cause,
                    attempt,
                }) => (*partial, Some(format!("aborted at attempt {attempt}: {cause}"))),
                Err(e) => return Err(e.to_string()),
            };
            let report = RunReport {
                id: unit.id.clone(),
                model,
                aborted: aborted.clone(),
                run,
            };
            if let Some(reason) = aborted {
                out.write(out_dir, format!("{stem}.run.partial.json"), &report)?;
                return Err(reason);
            }
            out.write(out_dir, format!("{stem}.run.json"), &report)?;
            out.write_text(
                out_dir,
                format!("{stem}.improved.{}", unit.language.extension()),
                &report.run.final_code.source,
            )?;
            let versions: Vec<&str> = std::iter::once(report.run.initial_code.source.as_str())
                .chain(report.run.accepted().filter_map(|a| a.candidate_code.as_deref()))
                .collect();
            if options.with_baseline {
                let scores = versions
                    .iter()
                    .map(|src| {
                        ctx.evaluator
                            .evaluate_baseline(&unit.with_source(*src))
                            .map(|r| f64::from(r.score))
                            .map_err(|e| e.to_string())
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                let doc = VersionScores {
                    metric: "baseline".into(),
                    scores,
                };
                out.write(out_dir, format!("{stem}.baseline-trajectory.json"), &doc)?;
            }
            if options.with_proxy && unit.language == Language::Python {
                let scores = versions
                    .iter()
                    .map(|src| {
                        ctx.proxy
                            .proxy_source(src)
                            .map(|r| r.overall)
                            .map_err(|e| e.to_string())
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                let doc = VersionScores {
                    metric: "proxy".into(),
                    scores,
                };
                out.write(out_dir, format!("{stem}.proxy-trajectory.json"), &doc)?;
            }
        }
    }
    Ok(())
}

/// Processes every entry, writing reports and `index.json` into `out_dir`.
pub fn run_batch(
    manifest: &CorpusManifest,
    options: &BatchOptions,
    ctx: &BatchContext<'_>,
    out_dir: &Path,
) -> Result<BatchSummary, CorpusError> {
    std::fs::create_dir_all(out_dir).map_err(|source| CorpusError::Output {
        path: out_dir.display().to_string(),
        source,
    })?;
    let work = |i: usize| run_entry(manifest, &manifest.entries[i], options, ctx, out_dir);
    let n = manifest.entries.len();
    let outputs: Vec<EntryOutput> = if options.workers > 1 && n > 1 {
        match rayon::ThreadPoolBuilder::new().num_threads(options.workers).build() {
            Ok(pool) => pool.install(|| (0..n).into_par_iter().map(work).collect()),
            Err(_) => (0..n).map(work).collect(),
        }
    } else {
        (0..n).map(work).collect()
    };

    let entries: Vec<EntryStatus> = manifest
        .entries
        .iter()
        .zip(outputs)
        .map(|(e, o)| EntryStatus {
            id: e.id.clone(),
            ok: o.error.is_none(),
            files: o.files,
            error: o.error,
        })
        .collect();
    let succeeded = entries.iter().filter(|e| e.ok).count();
    let summary = BatchSummary {
        mode: options.mode,
        total: entries.len(),
        succeeded,
        failed: entries.len() - succeeded,
        entries,
    };
    let index = out_dir.join("index.json");
    report::write_json(&index, &summary).map_err(|source| CorpusError::Output {
        path: index.display().to_string(),
        source,
    })?;
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn manifest(dir: &Path, body: &str) -> PathBuf {
        let p = dir.join("corpus.toml");
        std::fs::write(&p, body).unwrap();
        p
    }

    #[test]
    fn loads_and_validates_entries() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("a.py"), "x = 1\n").unwrap();
        std::fs::write(dir.path().join("b.js"), "let x = 1;\n").unwrap();
        let entries = "[[entry]]\nid = \"a\"\npath = \"a.py\"\nlanguage = \"python\"\n[[entry]]\nid = \"b/1\"\npath = \"b.js\"\nlanguage = \"javascript\"\n";
        let m = load_manifest(&manifest(dir.path(), entries)).unwrap();
        assert_eq!(m.count_by_language(), (1, 1));
        assert_eq!(m.load_unit(&m.entries[1]).unwrap().language, Language::JavaScript);

        let dup = format!("{entries}[[entry]]\nid = \"a\"\npath = \"a.py\"\nlanguage = \"python\"\n");
        assert!(matches!(load_manifest(&manifest(dir.path(), &dup)), Err(CorpusError::DuplicateId(id)) if id == "a"));

        let missing = "[[entry]]\nid = \"m\"\npath = \"nope.py\"\nlanguage = \"python\"\n";
        assert!(
            matches!(load_manifest(&manifest(dir.path(), missing)), Err(CorpusError::MissingFile { id, .. }) if id == "m")
        );

        let rust = "[[entry]]\nid = \"r\"\npath = \"a.py\"\nlanguage = \"rust\"\n";
        assert!(matches!(
            load_manifest(&manifest(dir.path(), rust)),
            Err(CorpusError::UnknownLanguage { .. })
        ));

        let clash = "[[entry]]\nid = \"x/y\"\npath = \"a.py\"\nlanguage = \"py\"\n[[entry]]\nid = \"x__y\"\npath = \"a.py\"\nlanguage = \"py\"\n";
        assert!(matches!(
            load_manifest(&manifest(dir.path(), clash)),
            Err(CorpusError::ReportNameClash(..))
        ));
    }
}
