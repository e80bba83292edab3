//! Ten-dimension code evaluation and the single-prompt baseline.
//!
//! Each dimension is a separate query. With self-consistency `k > 1` the
//! dimension is sampled `k` times, the score is the mean of the per-sample
//! sums, and the sample insights are merged by a summary query. The ten
//! dimension insights are then summarised into a code-level summary.

use rayon::prelude::*;

use crate::catalog::StatementCatalog;
use crate::gateway::{ChatBackend, GatewayError, ModelSettings};
use crate::model::{CodeAssessment, CodeUnit, DimensionAssessment, QualityDimension, ScoreError, StatementVerdict};
use crate::prompts::{self, BaselineReply, ParseError, PromptError};

/// Tries per sample before a malformed reply makes the dimension unavailable.
pub const PARSE_ATTEMPTS: u32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("dimension `{dimension}` unavailable: {attempts} malformed replies, last: {last}")]
    DimensionUnavailable {
        dimension: String,
        attempts: u32,
        last: ParseError,
    },
    #[error("baseline evaluation unavailable: {attempts} malformed replies, last: {last}")]
    BaselineUnavailable { attempts: u32, last: ParseError },
    #[error("model call failed ({context}): {source}")]
    Gateway {
        context: String,
        #[source]
        source: GatewayError,
    },
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Score(#[from] ScoreError),
    #[error("self-consistency k must be at least 1")]
    ZeroSamples,
}

impl EvalError {
    fn gateway(context: impl Into<String>) -> impl FnOnce(GatewayError) -> Self {
        let context = context.into();
        move |source| Self::Gateway { context, source }
    }
}

struct Sample {
    verdicts: Vec<StatementVerdict>,
    insight: String,
}

#[derive(Clone)]
pub struct Evaluator<'a> {
    backend: &'a dyn ChatBackend,
    catalog: &'a StatementCatalog,
    settings: ModelSettings,
    self_consistency: u32,
    parallelism: usize,
}

impl<'a> Evaluator<'a> {
    pub fn new(backend: &'a dyn ChatBackend, catalog: &'a StatementCatalog) -> Self {
        Self {
            backend,
            catalog,
            settings: ModelSettings::default(),
            self_consistency: 1,
            parallelism: 1,
        }
    }

    pub fn with_settings(mut self, settings: ModelSettings) -> Self {
        self.settings = settings;
        self
    }

    pub fn with_self_consistency(mut self, k: u32) -> Self {
        self.self_consistency = k;
        self
    }

    pub fn with_parallelism(mut self, workers: usize) -> Self {
        self.parallelism = workers.max(1);
        self
    }

    pub fn catalog(&self) -> &StatementCatalog {
        self.catalog
    }

    pub fn backend(&self) -> &'a dyn ChatBackend {
        self.backend
    }

    pub fn self_consistency(&self) -> u32 {
        self.self_consistency
    }

    pub fn settings(&self) -> &ModelSettings {
        &self.settings
    }

    /// Runs `f` over `0..n` on the configured number of workers, results in index order.
    fn fan_out<T: Send>(&self, n: usize, f: impl Fn(usize) -> T + Send + Sync) -> Vec<T> {
        if self.parallelism <= 1 || n <= 1 {
            return (0..n).map(f).collect();
        }
        match rayon::ThreadPoolBuilder::new().num_threads(self.parallelism).build() {
            Ok(pool) => pool.install(|| (0..n).into_par_iter().map(&f).collect()),
            Err(_) => (0..n).map(f).collect(),
        }
    }

    fn sample(&self, code: &CodeUnit, dimension: &QualityDimension, index: u32) -> Result<Sample, EvalError> {
        let prompt = prompts::render_dimension_prompt(&code.source, dimension)?;
        let mut last = ParseError::NoJson;
        for attempt in 0..PARSE_ATTEMPTS {
            let nonce = u64::from(index * PARSE_ATTEMPTS + attempt);
            let request = self.settings.request(&prompt.system, &prompt.user, nonce);
            let raw = self
                .backend
                .complete(&request)
                .map_err(EvalError::gateway(format!("dimension {}", dimension.id)))?;
            match prompts::parse_evaluation_reply(&raw) {
                Ok(reply) => {
                    let verdicts = reply
                        .scores
                        .iter()
                        .map(|&v| StatementVerdict::from_value(i64::from(v)).expect("parser bounds verdicts"))
                        .collect();
                    return Ok(Sample {
                        verdicts,
                        insight: reply.insight,
                    });
                }
                Err(e) => last = e,
            }
        }
        Err(EvalError::DimensionUnavailable {
            dimension: dimension.id.clone(),
            attempts: PARSE_ATTEMPTS,
            last,
        })
    }

    fn summarize(&self, items: &[(String, String)], context: &str) -> Result<String, EvalError> {
        let prompt = prompts::render_summary_prompt(items)?;
        let request = self.settings.request(&prompt.system, &prompt.user, 0);
        let text = self
            .backend
            .complete(&request)
            .map_err(EvalError::gateway(context.to_string()))?;
        Ok(text.trim().to_string())
    }

    fn assemble(&self, dimension: &QualityDimension, samples: Vec<Sample>) -> Result<DimensionAssessment, EvalError> {
        let insight = if samples.len() == 1 {
            samples[0].insight.clone()
        } else {
            let items: Vec<(String, String)> = samples
                .iter()
                .enumerate()
                .map(|(i, s)| (format!("Retry {}", i + 1), s.insight.clone()))
                .collect();
            self.summarize(&items, &format!("{} retry summary", dimension.id))?
        };
        let verdicts = samples.into_iter().map(|s| s.verdicts).collect();
        Ok(DimensionAssessment::from_samples(
            dimension.id.clone(),
            verdicts,
            insight,
        )?)
    }

    pub fn evaluate_dimension(
        &self,
        code: &CodeUnit,
        dimension: &QualityDimension,
    ) -> Result<DimensionAssessment, EvalError> {
        if self.self_consistency == 0 {
            return Err(EvalError::ZeroSamples);
        }
        let samples = self
            .fan_out(self.self_consistency as usize, |i| {
                self.sample(code, dimension, i as u32)
            })
            .into_iter()
            .collect::<Result<Vec<_>, _>>()?;
        self.assemble(dimension, samples)
    }

    /// Full assessment. Any unavailable dimension aborts the whole evaluation.
    pub fn evaluate(&self, code: &CodeUnit) -> Result<CodeAssessment, EvalError> {
        if self.self_consistency == 0 {
            return Err(EvalError::ZeroSamples);
        }
        let dims = self.catalog.dimensions();
        let k = self.self_consistency as usize;
        let mut raw = self
            .fan_out(dims.len() * k, |i| self.sample(code, &dims[i / k], (i % k) as u32))
            .into_iter();

        let mut grouped = Vec::with_capacity(dims.len());
        for _ in dims {
            let samples = raw.by_ref().take(k).collect::<Result<Vec<_>, _>>()?;
            grouped.push(samples);
        }
        let mut grouped: Vec<Option<Vec<Sample>>> = grouped.into_iter().map(Some).collect();
        let cells: Vec<std::sync::Mutex<Option<Vec<Sample>>>> =
            grouped.iter_mut().map(|g| std::sync::Mutex::new(g.take())).collect();
        let dimensions = self
            .fan_out(dims.len(), |i| {
                let samples = cells[i]
                    .lock()
                    .unwrap_or_else(|p| p.into_inner())
                    .take()
                    .unwrap_or_default();
                self.assemble(&dims[i], samples)
            })
            .into_iter()
            .collect::<Result<Vec<_>, _>>()?;

        let items: Vec<(String, String)> = dimensions
            .iter()
            .map(|d| (d.dimension.clone(), d.insight.clone()))
            .collect();
        let summary = self.summarize(&items, "code-level summary")?;
        Ok(CodeAssessment::new(dimensions, summary)?)
    }

    /// Single-prompt, single-score comparator.
    pub fn evaluate_baseline(&self, code: &CodeUnit) -> Result<BaselineReply, EvalError> {
        let prompt = prompts::render_baseline_prompt(&code.source);
        let mut last = ParseError::NoJson;
        for attempt in 0..PARSE_ATTEMPTS {
            let request = self.settings.request(&prompt.system, &prompt.user, u64::from(attempt));
            let raw = self
                .backend
                .complete(&request)
                .map_err(EvalError::gateway("baseline"))?;
            match prompts::parse_baseline_reply(&raw) {
                Ok(reply) => return Ok(reply),
                Err(e) => last = e,
            }
        }
        Err(EvalError::BaselineUnavailable {
            attempts: PARSE_ATTEMPTS,
            last,
        })
    }
}

/// Expected number of completions for one full evaluation with no parse retries.
pub fn expected_completions(k: u32) -> u32 {
    10 * k + if k > 1 { 10 } else { 0 } + 1
}
