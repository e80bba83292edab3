//! Rule-based proxy quality scores for Python files.
//!
//! Three external analyzers each yield a 0..10 score: pylint's rating, the
//! radon maintainability index divided by ten, and a severity-weighted bandit
//! penalty. The proxy overall is their mean. The output parsers are plain
//! functions so they can be checked against captured tool output.

use std::collections::BTreeMap;
use std::path::Path;
use std::process::Command;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::model::Language;

pub const MAX_PROXY: f64 = 10.0;

/// Bandit penalty per issue, by severity.
pub const BANDIT_WEIGHTS: [(&str, f64); 3] = [("Low", 1.0), ("Medium", 3.0), ("High", 5.0)];

const EXCERPT_LIMIT: usize = 400;

/// Bundled pylint extensions, leaving out the complexity checker.
pub const DEFAULT_PYLINT_PLUGINS: &[&str] = &[
    "pylint.extensions.bad_builtin",
    "pylint.extensions.broad_try_clause",
    "pylint.extensions.check_elif",
    "pylint.extensions.code_style",
    "pylint.extensions.comparison_placement",
    "pylint.extensions.confusing_elif",
    "pylint.extensions.consider_refactoring_into_while_condition",
    "pylint.extensions.consider_ternary_expression",
    "pylint.extensions.dict_init_mutate",
    "pylint.extensions.docparams",
    "pylint.extensions.docstyle",
    "pylint.extensions.dunder",
    "pylint.extensions.empty_comment",
    "pylint.extensions.eq_without_hash",
    "pylint.extensions.for_any_all",
    "pylint.extensions.magic_value",
    "pylint.extensions.no_self_use",
    "pylint.extensions.overlapping_exceptions",
    "pylint.extensions.private_import",
    "pylint.extensions.redefined_loop_name",
    "pylint.extensions.redefined_variable_type",
    "pylint.extensions.set_membership",
    "pylint.extensions.typing",
    "pylint.extensions.while_used",
];

#[derive(Debug, thiserror::Error)]
pub enum ProxyError {
    #[error("required tool `{0}` is not available")]
    ToolUnavailable(String),
    #[error("cannot parse {tool} output: {excerpt}")]
    Parse { tool: String, excerpt: String },
    #[error("proxy metrics apply to Python only, got `{0}`")]
    Unsupported(String),
    #[error("{tool} version `{found}` does not match pinned `{pinned}`")]
    VersionMismatch {
        tool: String,
        found: String,
        pinned: String,
    },
    #[error("running {tool}: {source}")]
    Io {
        tool: String,
        #[source]
        source: std::io::Error,
    },
}

fn parse_error(tool: &str, output: &str) -> ProxyError {
    let mut end = output.len().min(EXCERPT_LIMIT);
    while !output.is_char_boundary(end) {
        end -= 1;
    }
    ProxyError::Parse {
        tool: tool.to_string(),
        excerpt: output[..end].to_string(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProxyReport {
    pub pylint: f64,
    pub radon_mi: f64,
    pub bandit: f64,
    pub overall: f64,
    /// First line of each tool's `--version` output.
    #[serde(default)]
    pub tool_versions: BTreeMap<String, String>,
}

impl ProxyReport {
    pub fn from_scores(pylint: f64, radon_mi: f64, bandit: f64) -> Self {
        Self {
            pylint,
            radon_mi,
            bandit,
            overall: (pylint + radon_mi + bandit) / 3.0,
            tool_versions: BTreeMap::new(),
        }
    }
}

/// Tool names and pins. A pinned version must prefix-match the reported one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProxyConfig {
    pub pylint: String,
    pub radon: String,
    pub bandit: String,
    pub pylint_plugins: Vec<String>,
    pub pinned_versions: BTreeMap<String, String>,
}

impl Default for ProxyConfig {
    fn default() -> Self {
        Self {
            pylint: "pylint".to_string(),
            radon: "radon".to_string(),
            bandit: "bandit".to_string(),
            pylint_plugins: DEFAULT_PYLINT_PLUGINS.iter().map(|s| s.to_string()).collect(),
            pinned_versions: BTreeMap::new(),
        }
    }
}

/// Extracts the trailing rating line, clamped to 0..10.
pub fn parse_pylint_output(stdout: &str) -> Result<f64, ProxyError> {
    static RATED: OnceLock<Regex> = OnceLock::new();
    let re = RATED.get_or_init(|| Regex::new(r"rated at (-?\d+(?:\.\d+)?)/10").expect("valid regex"));
    let value = re
        .captures_iter(stdout)
        .last()
        .and_then(|c| c[1].parse::<f64>().ok())
        .ok_or_else(|| parse_error("pylint", stdout))?;
    Ok(value.clamp(0.0, MAX_PROXY))
}

/// Finds `<file> - <rank> (<mi>)` for the requested file and scales MI to 0..10.
pub fn parse_radon_mi_output(stdout: &str, file: &str) -> Result<f64, ProxyError> {
    static LINE: OnceLock<Regex> = OnceLock::new();
    let re = LINE.get_or_init(|| Regex::new(r"^(.*) - [A-F] \((-?\d+(?:\.\d+)?)\)\s*$").expect("valid regex"));
    stdout
        .lines()
        .filter_map(|l| re.captures(l))
        .find(|c| &c[1] == file)
        .and_then(|c| c[2].parse::<f64>().ok())
        .map(|mi| (mi / 10.0).clamp(0.0, MAX_PROXY))
        .ok_or_else(|| parse_error("radon", stdout))
}

/// Severity counts from the "Total issues (by severity)" block.
pub fn parse_bandit_severities(stdout: &str) -> Result<BTreeMap<String, u32>, ProxyError> {
    let start = stdout
        .find("Total issues (by severity):")
        .ok_or_else(|| parse_error("bandit", stdout))?;
    let mut counts = BTreeMap::new();
    for line in stdout[start..].lines().skip(1) {
        let Some((name, value)) = line.trim().split_once(':') else {
            break;
        };
        let Ok(n) = value.trim().parse::<u32>() else { break };
        counts.insert(name.trim().to_string(), n);
    }
    if BANDIT_WEIGHTS.iter().any(|(sev, _)| !counts.contains_key(*sev)) {
        return Err(parse_error("bandit", stdout));
    }
    Ok(counts)
}

/// `clamp(10 - (low + 3 medium + 5 high), 0, 10)`.
pub fn bandit_heuristic(low: u32, medium: u32, high: u32) -> f64 {
    let penalty = BANDIT_WEIGHTS[0].1 * f64::from(low)
        + BANDIT_WEIGHTS[1].1 * f64::from(medium)
        + BANDIT_WEIGHTS[2].1 * f64::from(high);
    (MAX_PROXY - penalty).clamp(0.0, MAX_PROXY)
}

pub fn parse_bandit_output(stdout: &str) -> Result<f64, ProxyError> {
    let counts = parse_bandit_severities(stdout)?;
    Ok(bandit_heuristic(counts["Low"], counts["Medium"], counts["High"]))
}

#[derive(Debug, Clone, Default)]
pub struct ProxyRunner {
    config: ProxyConfig,
}

impl ProxyRunner {
    pub fn new(config: ProxyConfig) -> Self {
        Self { config }
    }

    pub fn config(&self) -> &ProxyConfig {
        &self.config
    }

    fn output(&self, program: &str, args: &[&str], cwd: Option<&Path>) -> Result<String, ProxyError> {
        let mut cmd = Command::new(program);
        cmd.args(args);
        if let Some(dir) = cwd {
            cmd.current_dir(dir);
        }
        match cmd.output() {
            Ok(out) => Ok(String::from_utf8_lossy(&out.stdout).into_owned()),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Err(ProxyError::ToolUnavailable(program.to_string())),
            Err(source) => Err(ProxyError::Io {
                tool: program.to_string(),
                source,
            }),
        }
    }

    fn check_python(path: &Path) -> Result<(), ProxyError> {
        match Language::from_extension(path.extension().and_then(|e| e.to_str()).unwrap_or("")) {
            Language::Python => Ok(()),
            other => Err(ProxyError::Unsupported(other.tag().to_string())),
        }
    }

    /// Splits the path so tools see a bare file name; keeps output free of directories.
    fn locate(path: &Path) -> (Option<&Path>, String) {
        let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
        let name = path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        (dir, name)
    }

    pub fn pylint_score(&self, path: &Path) -> Result<f64, ProxyError> {
        Self::check_python(path)?;
        let (dir, name) = Self::locate(path);
        let plugins = format!("--load-plugins={}", self.config.pylint_plugins.join(","));
        let mut args = vec!["--persistent=n", "--score=y"];
        if !self.config.pylint_plugins.is_empty() {
            args.push(&plugins);
        }
        args.push(&name);
        parse_pylint_output(&self.output(&self.config.pylint, &args, dir)?)
    }

    pub fn radon_mi_score(&self, path: &Path) -> Result<f64, ProxyError> {
        Self::check_python(path)?;
        let (dir, name) = Self::locate(path);
        parse_radon_mi_output(&self.output(&self.config.radon, &["mi", "-s", &name], dir)?, &name)
    }

    pub fn bandit_score(&self, path: &Path) -> Result<f64, ProxyError> {
        Self::check_python(path)?;
        let (dir, name) = Self::locate(path);
        parse_bandit_output(&self.output(&self.config.bandit, &[&name], dir)?)
    }

    /// First line of `<tool> --version`, checked against any pin.
    pub fn tool_version(&self, tool: &str) -> Result<String, ProxyError> {
        let program = match tool {
            "pylint" => &self.config.pylint,
            "radon" => &self.config.radon,
            "bandit" => &self.config.bandit,
            other => other,
        };
        let out = self.output(program, &["--version"], None)?;
        let found = out.lines().next().unwrap_or("").trim().to_string();
        if let Some(pinned) = self.config.pinned_versions.get(tool) {
            let matches =
                found.starts_with(pinned.as_str()) || found.split_whitespace().any(|w| w.starts_with(pinned.as_str()));
            if !matches {
                return Err(ProxyError::VersionMismatch {
                    tool: tool.to_string(),
                    found,
                    pinned: pinned.clone(),
                });
            }
        }
        Ok(found)
    }

    pub fn proxy_overall(&self, path: &Path) -> Result<ProxyReport, ProxyError> {
        Self::check_python(path)?;
        let mut report = ProxyReport::from_scores(
            self.pylint_score(path)?,
            self.radon_mi_score(path)?,
            self.bandit_score(path)?,
        );
        for tool in ["pylint", "radon", "bandit"] {
            report.tool_versions.insert(tool.to_string(), self.tool_version(tool)?);
        }
        Ok(report)
    }

    /// Scores source text by writing it to a scratch `.py` file.
    pub fn proxy_source(&self, source: &str) -> Result<ProxyReport, ProxyError> {
        let dir = tempfile::Builder::new()
            .prefix("quest-proxy-")
            .tempdir()
            .map_err(|source| ProxyError::Io {
                tool: "tempdir".into(),
                source,
            })?;
        let path = dir.path().join("candidate.py");
        std::fs::write(&path, source).map_err(|source| ProxyError::Io {
            tool: "tempdir".into(),
            source,
        })?;
        self.proxy_overall(&path)
    }
}
