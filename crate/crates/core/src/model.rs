//! Domain vocabulary and the scoring calculus.
//!
//! A statement verdict maps to `+1 / -1 / 0`, five verdicts sum to a
//! dimension score in `[-5, 5]`, and ten dimension scores average into the
//! code-level score. Everything here is an immutable value type.

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::validation::ValidationResult;

/// Number of statements probing each dimension.
pub const STATEMENTS_PER_DIMENSION: usize = 5;

/// Number of quality dimensions in a complete assessment.
pub const DIMENSION_COUNT: usize = 10;

/// Upper end of the dimension and overall score scale.
pub const MAX_SCORE: f64 = 5.0;

/// The ten canonical dimension ids, in reporting order.
pub const DIMENSION_IDS: [&str; DIMENSION_COUNT] = [
    "Readability",
    "Maintainability",
    "Testability",
    "Efficiency",
    "Robustness",
    "Security",
    "Documentation",
    "Modularity",
    "Scalability",
    "Portability",
];

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ScoreError {
    #[error("expected {expected} {what}, got {actual}")]
    Arity {
        what: &'static str,
        expected: usize,
        actual: usize,
    },
    #[error("score {0} is outside [-5, 5]")]
    OutOfRange(f64),
}

/// One dimension and the five statements used to probe it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QualityDimension {
    pub id: String,
    pub statements: Vec<String>,
}

impl QualityDimension {
    pub fn new(id: impl Into<String>, statements: Vec<String>) -> Result<Self, ScoreError> {
        if statements.len() != STATEMENTS_PER_DIMENSION {
            return Err(ScoreError::Arity {
                what: "statements",
                expected: STATEMENTS_PER_DIMENSION,
                actual: statements.len(),
            });
        }
        Ok(Self {
            id: id.into(),
            statements,
        })
    }
}

/// The model's answer to a single statement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StatementVerdict {
    True,
    False,
    NotApplicable,
}

impl StatementVerdict {
    pub const ALL: [StatementVerdict; 3] = [Self::True, Self::False, Self::NotApplicable];

    pub fn value(self) -> i32 {
        verdict_value(self)
    }

    /// Inverse of [`verdict_value`]; `None` for anything outside `{-1, 0, 1}`.
    pub fn from_value(value: i64) -> Option<Self> {
        match value {
            1 => Some(Self::True),
            -1 => Some(Self::False),
            0 => Some(Self::NotApplicable),
            _ => None,
        }
    }
}

impl Serialize for StatementVerdict {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_i32(self.value())
    }
}

impl<'de> Deserialize<'de> for StatementVerdict {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = i64::deserialize(deserializer)?;
        Self::from_value(raw).ok_or_else(|| serde::de::Error::custom(format!("verdict {raw} not in {{-1, 0, 1}}")))
    }
}

pub fn verdict_value(verdict: StatementVerdict) -> i32 {
    match verdict {
        StatementVerdict::True => 1,
        StatementVerdict::False => -1,
        StatementVerdict::NotApplicable => 0,
    }
}

/// Sum of five verdict values, in `[-5, 5]`.
pub fn dimension_score(verdicts: &[StatementVerdict]) -> Result<i32, ScoreError> {
    if verdicts.len() != STATEMENTS_PER_DIMENSION {
        return Err(ScoreError::Arity {
            what: "verdicts",
            expected: STATEMENTS_PER_DIMENSION,
            actual: verdicts.len(),
        });
    }
    Ok(verdicts.iter().map(|v| v.value()).sum())
}

/// Unweighted mean of the ten dimension scores, at full precision.
pub fn overall_score(dimension_scores: &[f64]) -> Result<f64, ScoreError> {
    if dimension_scores.len() != DIMENSION_COUNT {
        return Err(ScoreError::Arity {
            what: "dimension scores",
            expected: DIMENSION_COUNT,
            actual: dimension_scores.len(),
        });
    }
    if let Some(bad) = dimension_scores.iter().find(|s| !(-MAX_SCORE..=MAX_SCORE).contains(*s)) {
        return Err(ScoreError::OutOfRange(*bad));
    }
    Ok(dimension_scores.iter().sum::<f64>() / DIMENSION_COUNT as f64)
}

/// Renders a score the way reports display it: one decimal, no negative zero.
pub fn display_score(score: f64) -> String {
    let rounded = (score * 10.0).round() / 10.0;
    if rounded == 0.0 {
        "0.0".to_string()
    } else {
        format!("{rounded:.1}")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimensionAssessment {
    pub dimension: String,
    pub score: f64,
    pub insight: String,
    /// One verdict vector per self-consistency sample.
    pub samples: Vec<Vec<StatementVerdict>>,
}

impl DimensionAssessment {
    /// Builds the assessment, deriving the score as the mean per-sample sum.
    pub fn from_samples(
        dimension: impl Into<String>,
        samples: Vec<Vec<StatementVerdict>>,
        insight: impl Into<String>,
    ) -> Result<Self, ScoreError> {
        if samples.is_empty() {
            return Err(ScoreError::Arity {
                what: "samples (at least)",
                expected: 1,
                actual: 0,
            });
        }
        let mut total = 0i64;
        for sample in &samples {
            total += i64::from(dimension_score(sample)?);
        }
        Ok(Self {
            dimension: dimension.into(),
            score: total as f64 / samples.len() as f64,
            insight: insight.into(),
            samples,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodeAssessment {
    pub dimensions: Vec<DimensionAssessment>,
    pub overall_score: f64,
    pub summary: String,
}

impl CodeAssessment {
    pub fn new(dimensions: Vec<DimensionAssessment>, summary: impl Into<String>) -> Result<Self, ScoreError> {
        let scores: Vec<f64> = dimensions.iter().map(|d| d.score).collect();
        let overall_score = overall_score(&scores)?;
        Ok(Self {
            dimensions,
            overall_score,
            summary: summary.into(),
        })
    }

    pub fn dimension(&self, id: &str) -> Option<&DimensionAssessment> {
        self.dimensions.iter().find(|d| d.dimension == id)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Language {
    Python,
    JavaScript,
    Other(String),
}

impl Language {
    pub fn from_extension(ext: &str) -> Self {
        match ext.to_ascii_lowercase().as_str() {
            "py" => Self::Python,
            "js" | "mjs" | "cjs" => Self::JavaScript,
            other => Self::Other(other.to_string()),
        }
    }

    pub fn from_tag(tag: &str) -> Self {
        match tag.to_ascii_lowercase().as_str() {
            "python" | "py" => Self::Python,
            "javascript" | "js" => Self::JavaScript,
            other => Self::Other(other.to_string()),
        }
    }

    pub fn tag(&self) -> &str {
        match self {
            Self::Python => "python",
            Self::JavaScript => "javascript",
            Self::Other(tag) => tag,
        }
    }

    pub fn extension(&self) -> &str {
        match self {
            Self::Python => "py",
            Self::JavaScript => "js",
            Self::Other(tag) => tag,
        }
    }
}

impl fmt::Display for Language {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl Serialize for Language {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.tag())
    }
}

impl<'de> Deserialize<'de> for Language {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let tag = String::deserialize(deserializer)?;
        Ok(Self::from_tag(&tag))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("code unit `{0}` has empty source")]
pub struct EmptySource(pub String);

/// A piece of source code under evaluation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodeUnit {
    pub id: String,
    pub language: Language,
    pub source: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test_command: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<String>,
}

impl CodeUnit {
    pub fn new(id: impl Into<String>, language: Language, source: impl Into<String>) -> Result<Self, EmptySource> {
        let id = id.into();
        let source = source.into();
        if source.is_empty() {
            return Err(EmptySource(id));
        }
        Ok(Self {
            id,
            language,
            source,
            test_command: None,
            provenance: None,
        })
    }

    pub fn with_test_command(mut self, command: impl Into<String>) -> Self {
        self.test_command = Some(command.into());
        self
    }

    pub fn with_provenance(mut self, provenance: impl Into<String>) -> Self {
        self.provenance = Some(provenance.into());
        self
    }

    /// Same identity, new source text.
    pub fn with_source(&self, source: impl Into<String>) -> Self {
        Self {
            source: source.into(),
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub max_iterations: u32,
    pub target_score: f64,
    pub self_consistency_k: u32,
    pub run_tests: bool,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            max_iterations: 5,
            target_score: MAX_SCORE,
            self_consistency_k: 1,
            run_tests: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("max_iterations must be at least 1")]
    ZeroIterations,
    #[error("self_consistency_k must be at least 1")]
    ZeroSelfConsistency,
    #[error("target_score {0} is outside [-5, 5]")]
    TargetOutOfRange(f64),
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.max_iterations == 0 {
            return Err(ConfigError::ZeroIterations);
        }
        if self.self_consistency_k == 0 {
            return Err(ConfigError::ZeroSelfConsistency);
        }
        if !(-MAX_SCORE..=MAX_SCORE).contains(&self.target_score) {
            return Err(ConfigError::TargetOutOfRange(self.target_score));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttemptStatus {
    Accepted,
    RejectedValidation,
    RejectedScore,
    RejectedParse,
}

/// One improvement cycle. Rejected cycles still count toward the budget.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationOutcome {
    pub index: u32,
    pub status: AttemptStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub candidate_code: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub assessment: Option<CodeAssessment>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub validation: Option<ValidationResult>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub improvement_points: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub explanation_report: Option<Vec<String>>,
    /// Why a reply could not be parsed, for `RejectedParse`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl IterationOutcome {
    pub fn overall_score(&self) -> Option<f64> {
        self.assessment.as_ref().map(|a| a.overall_score)
    }
}

/// Full audit trail of an improvement loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationRun {
    pub initial_code: CodeUnit,
    pub initial_assessment: CodeAssessment,
    pub attempts: Vec<IterationOutcome>,
    pub final_code: CodeUnit,
    pub final_assessment: CodeAssessment,
    pub config_snapshot: OptimizerConfig,
}

impl OptimizationRun {
    pub fn accepted(&self) -> impl Iterator<Item = &IterationOutcome> {
        self.attempts.iter().filter(|a| a.status == AttemptStatus::Accepted)
    }

    /// Overall scores of the initial code followed by every accepted version.
    pub fn accepted_trajectory(&self) -> Vec<f64> {
        std::iter::once(self.initial_assessment.overall_score)
            .chain(self.accepted().filter_map(|a| a.overall_score()))
            .collect()
    }
}
