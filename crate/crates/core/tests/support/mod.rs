//! Shared fixtures for integration tests.
//!
//! The shipped transcripts were recorded by running the real pipelines
//! against [`ScriptedModel`], a stand-in that answers each prompt from a
//! table keyed by code version and dimension. `record_all` regenerates them.
#![allow(dead_code)]

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use quest_core::catalog::StatementCatalog;
use quest_core::corpus::{self, BatchContext, BatchMode, BatchOptions};
use quest_core::evaluator::Evaluator;
use quest_core::gateway::{ChatBackend, ChatRequest, GatewayError, RecordBackend};
use quest_core::model::{CodeUnit, Language, OptimizerConfig, DIMENSION_IDS};
use quest_core::optimizer::Optimizer;
use quest_core::proxy::ProxyRunner;
use quest_core::validation::Validator;
use serde::Deserialize;

pub fn crate_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

pub fn fixtures() -> PathBuf {
    crate_dir().join("fixtures")
}

pub fn code_dir() -> PathBuf {
    fixtures().join("code")
}

pub fn transcript(name: &str) -> PathBuf {
    fixtures().join("transcripts").join(name)
}

pub fn read(rel: &str) -> String {
    std::fs::read_to_string(fixtures().join(rel)).unwrap_or_else(|e| panic!("{rel}: {e}"))
}

pub fn unit(id: &str, rel: &str) -> CodeUnit {
    let lang = Language::from_extension(Path::new(rel).extension().unwrap().to_str().unwrap());
    CodeUnit::new(id, lang, read(&format!("code/{rel}"))).unwrap()
}

pub fn unit_601() -> CodeUnit {
    unit("mbpp/601", "mbpp/601.py")
}

pub fn unit_927() -> CodeUnit {
    unit("mbpp/927", "mbpp/927.py").with_test_command("python3 {root}/mbpp/927_test.py {code}")
}

pub fn unit_path_traversal() -> CodeUnit {
    unit("security/path_traversal", "security/path_traversal.js")
}

/// Verdicts summing to `total`: that many +1 (or -1), the rest not applicable.
pub fn verdicts_for(total: i32) -> Vec<i32> {
    let sign = total.signum();
    (0..5).map(|i| if i < total.abs() { sign } else { 0 }).collect()
}

#[derive(Debug, Clone)]
pub struct VersionScript {
    pub source: String,
    pub dimensions: HashMap<String, (Vec<i32>, String)>,
    pub summary: String,
    pub baseline: Option<(i32, String)>,
    /// Replies for a dimension that override the scripted verdicts, by parse attempt.
    pub malformed: HashMap<String, Vec<String>>,
}

impl VersionScript {
    pub fn total(&self) -> i32 {
        self.dimensions.values().map(|(v, _)| v.iter().sum::<i32>()).sum()
    }
}

#[derive(Debug, Clone, Default)]
pub struct ScriptedModel {
    pub versions: Vec<VersionScript>,
    /// Improvement replies by attempt index.
    pub improvements: HashMap<u64, String>,
}

fn dimension_of(user: &str) -> Option<&str> {
    let start = user.find("from a ")? + "from a ".len();
    let end = user[start..].find(" perspective")? + start;
    Some(&user[start..end])
}

impl ScriptedModel {
    fn version_for_code(&self, user: &str) -> Option<&VersionScript> {
        self.versions
            .iter()
            .filter(|v| user.contains(&format!("```\n{}\n", v.source.trim_end())))
            .max_by_key(|v| v.source.len())
    }

    fn answer(&self, req: &ChatRequest) -> Result<String, GatewayError> {
        let user = &req.user;
        let scripted = |msg: String| GatewayError::Scripted(msg);
        if user.starts_with("### INSIGHTS:") {
            let v = self
                .versions
                .iter()
                .find(|v| {
                    v.dimensions
                        .values()
                        .any(|(_, insight)| user.contains(insight.as_str()))
                })
                .ok_or_else(|| scripted("summary for unknown insights".into()))?;
            return Ok(v.summary.clone());
        }
        if user.contains("```improved_code") {
            return self
                .improvements
                .get(&req.attempt_nonce)
                .cloned()
                .ok_or_else(|| scripted(format!("no improvement for attempt {}", req.attempt_nonce)));
        }
        let version = self
            .version_for_code(user)
            .ok_or_else(|| scripted("unknown code".into()))?;
        if let Some(dim) = dimension_of(user) {
            if let Some(replies) = version.malformed.get(dim) {
                return Ok(replies[req.attempt_nonce as usize % replies.len()].clone());
            }
            let (verdicts, insight) = &version.dimensions[dim];
            return Ok(format!(
                "The statements were checked one at a time against the code.\n```json\n{}\n```",
                serde_json::json!({"insight": insight, "scores": verdicts})
            ));
        }
        if user.contains("scale from -5 to 5") {
            let (score, insight) = version.baseline.clone().ok_or_else(|| scripted("no baseline".into()))?;
            return Ok(format!(
                "```json\n{}\n```",
                serde_json::json!({"insight": insight, "score": score})
            ));
        }
        Err(scripted("unrecognised prompt".into()))
    }
}

impl ChatBackend for ScriptedModel {
    fn complete(&self, request: &ChatRequest) -> Result<String, GatewayError> {
        self.answer(request)
    }
}

#[derive(Deserialize)]
struct ScenarioDoc {
    code: String,
    dimensions: Vec<ScenarioDim>,
    summary: String,
    baseline: ScenarioBaseline,
}

#[derive(Deserialize)]
struct ScenarioDim {
    dimension: String,
    verdicts: Vec<i32>,
    insight: String,
}

#[derive(Deserialize)]
struct ScenarioBaseline {
    score: i32,
    insight: String,
}

pub fn version_601() -> VersionScript {
    let doc: ScenarioDoc = serde_json::from_str(&read("scenarios/mbpp_601.json")).unwrap();
    VersionScript {
        source: read(&doc.code),
        dimensions: doc
            .dimensions
            .into_iter()
            .map(|d| (d.dimension, (d.verdicts, d.insight)))
            .collect(),
        summary: doc.summary,
        baseline: Some((doc.baseline.score, doc.baseline.insight)),
        malformed: HashMap::new(),
    }
}

/// The 601 scenario with three unusable Security replies.
pub fn version_601_malformed() -> VersionScript {
    let mut v = version_601();
    v.malformed.insert(
        "Security".into(),
        vec![
            "I could not decide on these statements.".into(),
            "{\"insight\": \"too short\", \"scores\": [1, -1, 0, 1]}".into(),
            "{\"insight\": \"out of range\", \"scores\": [1, 2, 0, -1, 1]}".into(),
        ],
    );
    v
}

fn phrase(dim: &str, total: i32) -> String {
    let level = match total {
        t if t >= 4 => "strong",
        t if t >= 1 => "adequate",
        0 => "mixed",
        t if t >= -2 => "weak",
        _ => "poor",
    };
    let detail = match dim {
        "Readability" => "naming, layout and comments",
        "Maintainability" => "structure and ease of change",
        "Testability" => "isolation and determinism of the functions",
        "Efficiency" => "algorithmic cost and allocation",
        "Robustness" => "input validation and error handling",
        "Security" => "handling of untrusted input and secrets",
        "Documentation" => "docstrings and explanatory comments",
        "Modularity" => "separation into focused units",
        "Scalability" => "behaviour as inputs and load grow",
        _ => "dependence on platform-specific features",
    };
    format!("{dim} is {level} ({total:+}) with respect to {detail}.")
}

fn scripted_version(
    source: String,
    tag: &str,
    totals: [i32; 10],
    summary: &str,
    baseline: Option<i32>,
) -> VersionScript {
    VersionScript {
        dimensions: DIMENSION_IDS
            .iter()
            .zip(totals)
            .map(|(d, t)| (d.to_string(), (verdicts_for(t), format!("[{tag}] {}", phrase(d, t)))))
            .collect(),
        source,
        summary: summary.to_string(),
        baseline: baseline.map(|s| (s, format!("[{tag}] Single-score view of the code."))),
        malformed: HashMap::new(),
    }
}

pub const TOTALS_927: [(&str, [i32; 10]); 5] = [
    ("927.py", [2, 2, 2, 1, -3, 0, -4, 1, -2, 5]),
    ("927.v1.py", [4, 4, 4, 2, 3, 1, 4, 3, -3, 4]),
    ("927.v3.py", [4, 4, 4, 4, 3, 1, 5, 4, -2, 4]),
    ("927.v4.py", [4, 4, 4, 4, 3, 1, 5, 4, -3, 4]),
    ("927.v5.py", [5, 4, 4, 4, 3, 2, 5, 4, -1, 4]),
];

pub fn versions_927() -> Vec<VersionScript> {
    let summaries = [
        "A short recursive height function that is readable and portable but undocumented, unvalidated, and not built for deep trees.",
        "Documented and validated, with a memoised helper and inline tests; memoising on node objects is an odd choice and deep trees remain a concern.",
        "Keys the memo on node identity and explains each step; documentation and robustness are good, scalability is still limited by recursion depth.",
        "Stores an id on every node to key the memo; otherwise the same as before, and the per-node field adds cost without a gain.",
        "Documents side effects of both functions and keeps the identity-keyed memo; clear, tested and portable, with recursion depth the remaining limit.",
    ];
    TOTALS_927
        .iter()
        .zip(summaries)
        .enumerate()
        .map(|(i, ((file, totals), summary))| {
            scripted_version(
                read(&format!("code/mbpp/{file}")),
                &format!("927 v{i}"),
                *totals,
                summary,
                Some(1 + i as i32 / 2),
            )
        })
        .collect()
}

pub fn improvement_reply(code: &str, points: &[&str]) -> String {
    let explanations: Vec<String> = points.iter().map(|p| format!("Done: {}.", p.to_lowercase())).collect();
    format!(
        "{}\n\n```improved_code\n{}\n```\n",
        serde_json::json!({"improvement_points": points, "explanation_report": explanations}),
        code
    )
}

pub fn model_927() -> ScriptedModel {
    let mut improvements = HashMap::new();
    improvements.insert(
        1,
        improvement_reply(
            &read("code/mbpp/927.v1.py"),
            &["Add docstrings", "Validate the input type", "Add unit tests"],
        ),
    );
    improvements.insert(
        2,
        improvement_reply(&read("code/mbpp/927.broken.py"), &["Tighten the signature"]),
    );
    improvements.insert(
        3,
        improvement_reply(
            &read("code/mbpp/927.v3.py"),
            &["Key the memo on node identity", "Comment the recursion"],
        ),
    );
    improvements.insert(
        4,
        improvement_reply(&read("code/mbpp/927.v4.py"), &["Store an identifier on each node"]),
    );
    improvements.insert(
        5,
        improvement_reply(&read("code/mbpp/927.v5.py"), &["Document side effects"]),
    );
    ScriptedModel {
        versions: versions_927(),
        improvements,
    }
}

pub fn version_path_traversal() -> VersionScript {
    scripted_version(
        read("code/security/path_traversal.js"),
        "path traversal",
        [3, 2, 1, 2, -2, -4, -4, 1, 0, 3],
        "A compact static file handler that joins an unchecked query parameter onto the serving root, so a request can read files outside it; errors leak internal messages and nothing is documented.",
        Some(2),
    )
}

/// Scores every version the batch fixture touches.
pub fn model_batch() -> ScriptedModel {
    let mut versions = vec![version_601(), version_path_traversal()];
    versions.push(versions_927().remove(0));
    ScriptedModel {
        versions,
        improvements: HashMap::new(),
    }
}

pub fn optimizer_config_927() -> OptimizerConfig {
    OptimizerConfig {
        max_iterations: 5,
        target_score: 5.0,
        self_consistency_k: 1,
        run_tests: true,
    }
}

pub fn validator() -> Validator {
    Validator::default().with_root(code_dir())
}

fn fresh(path: &Path) {
    let _ = std::fs::remove_file(path);
}

/// Records every shipped transcript into `dir`.
pub fn record_all(dir: &Path) {
    std::fs::create_dir_all(dir).unwrap();
    let catalog = StatementCatalog::builtin();

    let path = dir.join("evaluate_601.jsonl");
    fresh(&path);
    {
        let model = ScriptedModel {
            versions: vec![version_601()],
            ..Default::default()
        };
        let rec = RecordBackend::create(model, &path).unwrap();
        let ev = Evaluator::new(&rec, &catalog);
        ev.evaluate(&unit_601()).unwrap();
        ev.evaluate_baseline(&unit_601()).unwrap();
    }

    let path = dir.join("malformed_601.jsonl");
    fresh(&path);
    {
        let model = ScriptedModel {
            versions: vec![version_601_malformed()],
            ..Default::default()
        };
        let rec = RecordBackend::create(model, &path).unwrap();
        assert!(Evaluator::new(&rec, &catalog).evaluate(&unit_601()).is_err());
    }

    let path = dir.join("optimize_927.jsonl");
    fresh(&path);
    {
        let rec = RecordBackend::create(model_927(), &path).unwrap();
        let ev = Evaluator::new(&rec, &catalog);
        let validator = validator();
        Optimizer::new(&ev, &validator, optimizer_config_927())
            .unwrap()
            .optimize(&unit_927())
            .unwrap();
    }

    let path = dir.join("batch_evaluate.jsonl");
    fresh(&path);
    {
        let rec = RecordBackend::create(model_batch(), &path).unwrap();
        let ev = Evaluator::new(&rec, &catalog);
        let validator = Validator::default();
        let proxy = ProxyRunner::default();
        let ctx = BatchContext {
            evaluator: &ev,
            validator: &validator,
            optimizer: OptimizerConfig::default(),
            proxy: &proxy,
        };
        let manifest = corpus::load_manifest(&code_dir().join("corpus.toml")).unwrap();
        let out = tempfile::tempdir().unwrap();
        let options = BatchOptions {
            with_baseline: true,
            ..BatchOptions::new(BatchMode::Evaluate)
        };
        let summary = corpus::run_batch(&manifest, &options, &ctx, out.path()).unwrap();
        assert_eq!(summary.failed, 0, "{summary:?}");
    }
}

/// `(digest, response)` pairs of a transcript, sorted, ignoring timestamps.
pub fn exchange_set(path: &Path) -> Vec<(String, String)> {
    let mut v: Vec<_> = quest_core::gateway::load_transcript(path)
        .unwrap()
        .into_iter()
        .map(|e| (e.request_digest, e.response_text))
        .collect();
    v.sort();
    v
}
