//! Candidate validation: syntax gating and optional test execution.
//!
//! Every check runs as a subprocess in its own temporary directory with a
//! wall-clock timeout and an environment reduced to `PATH` plus an explicit
//! whitelist. Temporary paths are scrubbed from captured stderr so results
//! do not depend on where the directory happened to be created.

use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::{Command, ExitStatus, Stdio};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use wait_timeout::ChildExt;

use crate::model::{CodeUnit, Language};

/// Captured stderr is truncated to this many bytes.
pub const STDERR_LIMIT: usize = 4096;

const SHELL_NOT_FOUND: i32 = 127;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationResult {
    pub syntax_ok: bool,
    /// Present only when a test command ran.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tests_ok: Option<bool>,
    pub stderr_excerpt: String,
    /// Wall-clock seconds. Kept out of reports so replayed runs stay byte-identical.
    #[serde(skip)]
    pub duration_secs: f64,
}

impl ValidationResult {
    pub fn passed(&self) -> bool {
        self.syntax_ok && self.tests_ok.unwrap_or(true)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ValidationError {
    #[error("required tool `{0}` is not available")]
    ToolUnavailable(String),
    #[error("no validator for language `{0}`")]
    Unsupported(String),
    #[error("validation i/o failure: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ValidationConfig {
    pub python: String,
    pub node: String,
    pub syntax_timeout_secs: f64,
    pub test_timeout_secs: f64,
    /// Environment variables passed through besides `PATH`.
    pub env_whitelist: Vec<String>,
}

impl Default for ValidationConfig {
    fn default() -> Self {
        Self {
            python: "python3".to_string(),
            node: "node".to_string(),
            syntax_timeout_secs: 30.0,
            test_timeout_secs: 60.0,
            env_whitelist: Vec::new(),
        }
    }
}

struct ProcessOutcome {
    status: Option<ExitStatus>,
    stderr: String,
    timed_out: bool,
    duration: Duration,
}

fn read_pipe<R: Read + Send + 'static>(pipe: Option<R>) -> std::thread::JoinHandle<Vec<u8>> {
    std::thread::spawn(move || {
        let mut buf = Vec::new();
        if let Some(mut p) = pipe {
            let _ = p.read_to_end(&mut buf);
        }
        buf
    })
}

#[cfg(unix)]
fn isolate_group(cmd: &mut Command) {
    use std::os::unix::process::CommandExt;
    cmd.process_group(0);
}

#[cfg(not(unix))]
fn isolate_group(_cmd: &mut Command) {}

#[cfg(unix)]
fn kill_group(child: &mut std::process::Child) {
    // SAFETY: kill(2) with a negative pid signals the process group we created.
    unsafe {
        libc::kill(-(child.id() as i32), libc::SIGKILL);
    }
    let _ = child.kill();
}

#[cfg(not(unix))]
fn kill_group(child: &mut std::process::Child) {
    let _ = child.kill();
}

fn truncate(mut text: String, limit: usize) -> String {
    if text.len() > limit {
        let mut end = limit;
        while !text.is_char_boundary(end) {
            end -= 1;
        }
        text.truncate(end);
    }
    text
}

fn scrub(text: &str, dir: &Path) -> String {
    let mut out = text.to_string();
    let mut variants = vec![dir.display().to_string()];
    if let Ok(canon) = dir.canonicalize() {
        variants.push(canon.display().to_string());
    }
    variants.sort_by_key(|v| std::cmp::Reverse(v.len()));
    for v in variants {
        out = out.replace(&v, ".");
    }
    out
}

#[derive(Debug, Clone, Default)]
pub struct Validator {
    config: ValidationConfig,
    root: Option<PathBuf>,
}

impl Validator {
    pub fn new(config: ValidationConfig) -> Self {
        Self { config, root: None }
    }

    /// Directory substituted for `{root}` in test commands and scrubbed back
    /// out of captured stderr.
    pub fn with_root(mut self, root: impl Into<PathBuf>) -> Self {
        self.root = Some(root.into());
        self
    }

    pub fn config(&self) -> &ValidationConfig {
        &self.config
    }

    fn run(
        &self,
        program: &str,
        args: &[&str],
        dir: &Path,
        timeout: Duration,
    ) -> Result<ProcessOutcome, ValidationError> {
        let mut cmd = Command::new(program);
        cmd.args(args)
            .current_dir(dir)
            .env_clear()
            .env("PYTHONDONTWRITEBYTECODE", "1")
            .stdin(Stdio::null())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped());
        if let Some(path) = std::env::var_os("PATH") {
            cmd.env("PATH", path);
        }
        for key in &self.config.env_whitelist {
            if let Some(v) = std::env::var_os(key) {
                cmd.env(key, v);
            }
        }
        isolate_group(&mut cmd);

        let started = Instant::now();
        let mut child = cmd.spawn().map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound | std::io::ErrorKind::PermissionDenied => {
                ValidationError::ToolUnavailable(program.to_string())
            }
            _ => ValidationError::Io(e),
        })?;
        let out = read_pipe(child.stdout.take());
        let err = read_pipe(child.stderr.take());
        let (status, timed_out) = match child.wait_timeout(timeout)? {
            Some(status) => (Some(status), false),
            None => {
                kill_group(&mut child);
                let _ = child.wait();
                (None, true)
            }
        };
        let _ = out.join();
        let stderr = String::from_utf8_lossy(&err.join().unwrap_or_default()).into_owned();
        Ok(ProcessOutcome {
            status,
            stderr,
            timed_out,
            duration: started.elapsed(),
        })
    }

    fn materialize(&self, code: &str, language: &Language) -> Result<(tempfile::TempDir, PathBuf), ValidationError> {
        let dir = tempfile::Builder::new().prefix("quest-validate-").tempdir()?;
        let ext = match language {
            Language::JavaScript if looks_like_module(code) => "mjs",
            other => other.extension(),
        };
        let file = dir.path().join(format!("candidate.{ext}"));
        std::fs::write(&file, code)?;
        Ok((dir, file))
    }

    fn excerpt(&self, outcome: &ProcessOutcome, dir: &Path, timeout: Duration) -> String {
        let mut text = scrub(&outcome.stderr, dir);
        if let Some(root) = &self.root {
            text = text.replace(&root.display().to_string(), "{root}");
        }
        if outcome.timed_out {
            if !text.is_empty() && !text.ends_with('\n') {
                text.push('\n');
            }
            text.push_str(&format!("[timed out after {:.1}s]", timeout.as_secs_f64()));
        }
        truncate(text, STDERR_LIMIT)
    }

    /// Compile-only check with the platform interpreter.
    pub fn check_syntax(&self, code: &str, language: &Language) -> Result<ValidationResult, ValidationError> {
        let program = match language {
            Language::Python => &self.config.python,
            Language::JavaScript => &self.config.node,
            Language::Other(tag) => return Err(ValidationError::Unsupported(tag.clone())),
        };
        let (dir, file) = self.materialize(code, language)?;
        let name = file.file_name().and_then(|n| n.to_str()).unwrap_or("candidate");
        let args: Vec<&str> = match language {
            Language::Python => vec!["-m", "py_compile", name],
            _ => vec!["--check", name],
        };
        let timeout = Duration::from_secs_f64(self.config.syntax_timeout_secs);
        let outcome = self.run(program, &args, dir.path(), timeout)?;
        Ok(ValidationResult {
            syntax_ok: !outcome.timed_out && outcome.status.is_some_and(|s| s.success()),
            tests_ok: None,
            stderr_excerpt: self.excerpt(&outcome, dir.path(), timeout),
            duration_secs: outcome.duration.as_secs_f64(),
        })
    }

    /// Runs `test_command` through `sh -c` with `{code}` replaced by the path
    /// of the materialized candidate, `{dir}` by its directory, and `{root}` by
    /// the configured root (the working directory when unset).
    pub fn run_tests(
        &self,
        code: &str,
        test_command: &str,
        language: &Language,
    ) -> Result<ValidationResult, ValidationError> {
        let (dir, file) = self.materialize(code, language)?;
        let root = match &self.root {
            Some(r) => r.clone(),
            None => std::env::current_dir()?,
        };
        let root = root.display().to_string();
        let command = test_command
            .replace("{root}", &root)
            .replace("{code}", &file.display().to_string())
            .replace("{dir}", &dir.path().display().to_string());
        let timeout = Duration::from_secs_f64(self.config.test_timeout_secs);
        let outcome = self.run("sh", &["-c", &command], dir.path(), timeout)?;
        if outcome.status.and_then(|s| s.code()) == Some(SHELL_NOT_FOUND) {
            let tool = test_command.split_whitespace().next().unwrap_or("sh");
            return Err(ValidationError::ToolUnavailable(tool.to_string()));
        }
        Ok(ValidationResult {
            syntax_ok: true,
            tests_ok: Some(!outcome.timed_out && outcome.status.is_some_and(|s| s.success())),
            stderr_excerpt: self.excerpt(&outcome, dir.path(), timeout),
            duration_secs: outcome.duration.as_secs_f64(),
        })
    }

    /// Syntax check, then tests when requested and the unit has a command.
    pub fn validate(&self, unit: &CodeUnit, run_tests: bool) -> Result<ValidationResult, ValidationError> {
        let syntax = self.check_syntax(&unit.source, &unit.language)?;
        if !syntax.syntax_ok {
            return Ok(syntax);
        }
        match (&unit.test_command, run_tests) {
            (Some(cmd), true) => {
                let tests = self.run_tests(&unit.source, cmd, &unit.language)?;
                Ok(ValidationResult {
                    duration_secs: syntax.duration_secs + tests.duration_secs,
                    ..tests
                })
            }
            _ => Ok(syntax),
        }
    }
}

fn looks_like_module(code: &str) -> bool {
    code.lines().any(|l| {
        let t = l.trim_start();
        (t.starts_with("import ") && (t.contains(" from ") || t.contains('"') || t.contains('\'')))
            || t.starts_with("export ")
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn have(tool: &str) -> bool {
        Command::new(tool).arg("--version").output().is_ok()
    }

    #[test]
    fn python_syntax() {
        if !have("python3") {
            eprintln!("SKIP python_syntax: python3 not on PATH");
            return;
        }
        let v = Validator::default();
        assert!(
            v.check_syntax("def f():\n  return 1", &Language::Python)
                .unwrap()
                .syntax_ok
        );
        let bad = v.check_syntax("def f(:", &Language::Python).unwrap();
        assert!(!bad.syntax_ok);
        assert!(bad.stderr_excerpt.contains("candidate.py"));
        assert!(!bad.stderr_excerpt.contains("quest-validate-"));
    }

    #[test]
    fn javascript_syntax() {
        if !have("node") {
            eprintln!("SKIP javascript_syntax: node not on PATH");
            return;
        }
        let v = Validator::default();
        assert!(
            v.check_syntax("const x = 1;\nfunction f() { return x; }", &Language::JavaScript)
                .unwrap()
                .syntax_ok
        );
        assert!(
            v.check_syntax("import fs from 'fs';\nexport const y = 2;", &Language::JavaScript)
                .unwrap()
                .syntax_ok
        );
        let bad = v.check_syntax("function f( {", &Language::JavaScript).unwrap();
        assert!(!bad.syntax_ok);
        assert!(!bad.stderr_excerpt.contains("quest-validate-"));
    }

    #[test]
    fn missing_runtime_is_tool_unavailable() {
        let v = Validator::new(ValidationConfig {
            python: "quest-no-such-python".into(),
            ..Default::default()
        });
        assert!(matches!(
            v.check_syntax("x = 1", &Language::Python),
            Err(ValidationError::ToolUnavailable(t)) if t == "quest-no-such-python"
        ));
    }

    #[test]
    fn other_languages_are_unsupported() {
        assert!(matches!(
            Validator::default().check_syntax("fn main() {}", &Language::Other("rs".into())),
            Err(ValidationError::Unsupported(_))
        ));
    }

    #[test]
    fn missing_test_tool_is_tool_unavailable() {
        let r = Validator::default().run_tests("x", "quest-no-such-runner {code}", &Language::Python);
        assert!(matches!(r, Err(ValidationError::ToolUnavailable(t)) if t == "quest-no-such-runner"));
    }

    #[test]
    fn environment_is_restricted() {
        std::env::set_var("QUEST_VALIDATION_LEAK_PROBE", "visible");
        let v = Validator::default();
        let r = v
            .run_tests("", "test -z \"$QUEST_VALIDATION_LEAK_PROBE\"", &Language::Python)
            .unwrap();
        assert_eq!(r.tests_ok, Some(true));
        let v = Validator::new(ValidationConfig {
            env_whitelist: vec!["QUEST_VALIDATION_LEAK_PROBE".into()],
            ..Default::default()
        });
        let r = v
            .run_tests("", "test \"$QUEST_VALIDATION_LEAK_PROBE\" = visible", &Language::Python)
            .unwrap();
        assert_eq!(r.tests_ok, Some(true));
    }

    #[test]
    fn temp_dirs_are_removed() {
        let r = Validator::default()
            .run_tests("x", "echo {dir} >&2; exit 1", &Language::Python)
            .unwrap();
        assert_eq!(r.tests_ok, Some(false));
        // the directory name was scrubbed, so recover it from a fresh run instead
        let marker = std::env::temp_dir().join("quest-validate-probe");
        let _ = std::fs::remove_file(&marker);
        let cmd = format!("echo {{dir}} > {}", marker.display());
        Validator::default().run_tests("x", &cmd, &Language::Python).unwrap();
        let dir = std::fs::read_to_string(&marker).unwrap();
        std::fs::remove_file(&marker).unwrap();
        assert!(!Path::new(dir.trim()).exists());
    }

    #[test]
    fn stderr_is_truncated() {
        let r = Validator::default()
            .run_tests(
                "",
                "head -c 10000 /dev/zero | tr '\\0' 'e' >&2; exit 3",
                &Language::Python,
            )
            .unwrap();
        assert_eq!(r.stderr_excerpt.len(), STDERR_LIMIT);
        assert_eq!(r.tests_ok, Some(false));
    }
}
