//! Score-gated improvement loop.
//!
//! Each attempt asks the model to rewrite the last accepted version using its
//! assessment as feedback. A candidate must parse, pass validation, and score
//! strictly higher than the current version to be accepted. Rejected attempts
//! still consume the iteration budget and are kept in the run record.

use crate::evaluator::{EvalError, Evaluator};
use crate::gateway::GatewayError;
use crate::model::{
    AttemptStatus, CodeAssessment, CodeUnit, ConfigError, IterationOutcome, OptimizationRun, OptimizerConfig,
};
use crate::prompts::{self, PromptError};
use crate::validation::{ValidationError, Validator};

/// What stopped a loop after the initial evaluation succeeded.
#[derive(Debug, thiserror::Error)]
pub enum AbortCause {
    #[error("evaluation failed: {0}")]
    Evaluation(#[from] EvalError),
    #[error("improvement request failed: {0}")]
    Gateway(#[from] GatewayError),
    #[error("validation could not run: {0}")]
    Validation(#[from] ValidationError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
}

#[derive(Debug, thiserror::Error)]
pub enum OptimizeError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("initial evaluation failed: {0}")]
    InitialEvaluation(#[source] EvalError),
    /// The run up to the failing attempt is preserved in `partial`.
    #[error("optimization aborted at attempt {attempt}: {cause}")]
    Aborted {
        attempt: u32,
        partial: Box<OptimizationRun>,
        #[source]
        cause: AbortCause,
    },
}

pub struct Optimizer<'a> {
    evaluator: Evaluator<'a>,
    validator: &'a Validator,
    config: OptimizerConfig,
}

impl<'a> Optimizer<'a> {
    /// The evaluator's self-consistency is taken from `config`.
    pub fn new(
        evaluator: &Evaluator<'a>,
        validator: &'a Validator,
        config: OptimizerConfig,
    ) -> Result<Self, OptimizeError> {
        config.validate()?;
        Ok(Self {
            evaluator: evaluator.clone().with_self_consistency(config.self_consistency_k),
            validator,
            config,
        })
    }

    pub fn config(&self) -> &OptimizerConfig {
        &self.config
    }

    pub fn optimize(&self, code: &CodeUnit) -> Result<OptimizationRun, OptimizeError> {
        let initial = self
            .evaluator
            .evaluate(code)
            .map_err(OptimizeError::InitialEvaluation)?;
        self.optimize_from(code, initial)
    }

    /// Runs the loop from an already computed assessment of `code`.
    pub fn optimize_from(&self, code: &CodeUnit, initial: CodeAssessment) -> Result<OptimizationRun, OptimizeError> {
        let mut run = OptimizationRun {
            initial_code: code.clone(),
            initial_assessment: initial.clone(),
            attempts: Vec::new(),
            final_code: code.clone(),
            final_assessment: initial,
            config_snapshot: self.config.clone(),
        };
        let mut index = 0;
        while index < self.config.max_iterations && run.final_assessment.overall_score < self.config.target_score {
            index += 1;
            match self.attempt(index, &run.final_code, &run.final_assessment) {
                Ok(outcome) => {
                    if outcome.status == AttemptStatus::Accepted {
                        run.final_code = run
                            .final_code
                            .with_source(outcome.candidate_code.clone().unwrap_or_default());
                        run.final_assessment = outcome.assessment.clone().expect("accepted attempts are assessed");
                    }
                    run.attempts.push(outcome);
                }
                Err(cause) => {
                    return Err(OptimizeError::Aborted {
                        attempt: index,
                        partial: Box::new(run),
                        cause,
                    })
                }
            }
        }
        Ok(run)
    }

    fn attempt(
        &self,
        index: u32,
        current: &CodeUnit,
        assessment: &CodeAssessment,
    ) -> Result<IterationOutcome, AbortCause> {
        let mut outcome = IterationOutcome {
            index,
            status: AttemptStatus::RejectedParse,
            candidate_code: None,
            assessment: None,
            validation: None,
            improvement_points: None,
            explanation_report: None,
            note: None,
        };

        let prompt = prompts::render_improvement_prompt(&current.source, assessment)?;
        let request = self
            .evaluator
            .settings()
            .request(&prompt.system, &prompt.user, u64::from(index));
        let raw = self.evaluator.backend().complete(&request)?;
        let reply = match prompts::parse_improvement_reply(&raw) {
            Ok(reply) => reply,
            Err(e) => {
                outcome.note = Some(e.to_string());
                return Ok(outcome);
            }
        };
        outcome.candidate_code = Some(reply.improved_code.clone());
        outcome.improvement_points = Some(reply.improvement_points);
        outcome.explanation_report = Some(reply.explanation_report);

        let candidate = current.with_source(reply.improved_code);
        let validation = self.validator.validate(&candidate, self.config.run_tests)?;
        let passed = validation.passed();
        outcome.validation = Some(validation);
        if !passed {
            outcome.status = AttemptStatus::RejectedValidation;
            return Ok(outcome);
        }

        let scored = self.evaluator.evaluate(&candidate)?;
        outcome.status = if scored.overall_score > assessment.overall_score {
            AttemptStatus::Accepted
        } else {
            AttemptStatus::RejectedScore
        };
        outcome.assessment = Some(scored);
        Ok(outcome)
    }
}
