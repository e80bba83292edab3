//! Evaluator and optimizer driven by the shipped transcripts.

mod support;

use std::sync::Mutex;

use quest_core::catalog::StatementCatalog;
use quest_core::evaluator::{EvalError, Evaluator};
use quest_core::gateway::{ChatBackend, ChatRequest, GatewayError, ModelSettings, ReplayBackend};
use quest_core::model::{AttemptStatus, DIMENSION_IDS};
use quest_core::optimizer::{AbortCause, OptimizeError, Optimizer};
use quest_core::prompts::ParseError;
use quest_core::report::{to_canonical_json, BaselineReport, EvaluationReport};
use support::*;

fn replay(name: &str) -> ReplayBackend {
    ReplayBackend::load(&transcript(name)).unwrap()
}

/// Replays while keeping every request it was asked.
struct Capture {
    inner: ReplayBackend,
    seen: Mutex<Vec<ChatRequest>>,
}

impl ChatBackend for Capture {
    fn complete(&self, request: &ChatRequest) -> Result<String, GatewayError> {
        self.seen.lock().unwrap().push(request.clone());
        self.inner.complete(request)
    }
}

fn evaluation_json(backend: &ReplayBackend, workers: usize) -> (String, String) {
    let catalog = StatementCatalog::builtin();
    let ev = Evaluator::new(backend, &catalog).with_parallelism(workers);
    let code = unit_601();
    let assessment = ev.evaluate(&code).unwrap();
    let baseline = ev.evaluate_baseline(&code).unwrap();
    let eval = EvaluationReport {
        id: code.id.clone(),
        language: code.language.clone(),
        model: ModelSettings::default(),
        self_consistency: 1,
        assessment,
    };
    let base = BaselineReport {
        id: code.id.clone(),
        language: code.language.clone(),
        model: ModelSettings::default(),
        score: baseline.score,
        insight: baseline.insight,
    };
    (to_canonical_json(&eval).unwrap(), to_canonical_json(&base).unwrap())
}

#[test]
fn evaluation_of_601_replays_to_minus_1_3() {
    let backend = replay("evaluate_601.jsonl");
    let catalog = StatementCatalog::builtin();
    let ev = Evaluator::new(&backend, &catalog);
    let a = ev.evaluate(&unit_601()).unwrap();
    let sum: f64 = a.dimensions.iter().map(|d| d.score).sum();
    assert_eq!(sum, -13.0);
    assert_eq!(a.overall_score, -1.3);
    assert_eq!(
        a.dimensions.iter().map(|d| d.dimension.as_str()).collect::<Vec<_>>(),
        DIMENSION_IDS.to_vec()
    );
    assert_eq!(a.dimension("Documentation").unwrap().score, -5.0);
    assert_eq!(a.dimension("Portability").unwrap().score, 5.0);
    assert!(!a.summary.is_empty());
    assert_eq!(ev.evaluate_baseline(&unit_601()).unwrap().score, 2);
}

#[test]
fn repeated_and_parallel_replays_are_byte_identical() {
    let backend = replay("evaluate_601.jsonl");
    let first = evaluation_json(&backend, 1);
    for workers in [1, 1, 4] {
        assert_eq!(evaluation_json(&backend, workers), first);
    }
}

#[test]
fn unusable_security_replies_abort_the_assessment() {
    let backend = replay("malformed_601.jsonl");
    let catalog = StatementCatalog::builtin();
    match Evaluator::new(&backend, &catalog).evaluate(&unit_601()) {
        Err(EvalError::DimensionUnavailable {
            dimension,
            attempts,
            last,
        }) => {
            assert_eq!(dimension, "Security");
            assert_eq!(attempts, 3);
            assert!(matches!(last, ParseError::OutOfRange(_)), "{last:?}");
        }
        other => panic!("expected an unavailable dimension, got {other:?}"),
    }
}

#[test]
fn unrecorded_request_is_a_transcript_gap() {
    let backend = replay("evaluate_601.jsonl");
    let catalog = StatementCatalog::builtin();
    let err = Evaluator::new(&backend, &catalog)
        .evaluate(&unit_path_traversal())
        .unwrap_err();
    assert!(err.to_string().contains("transcript gap"), "{err}");
}

#[test]
fn optimizer_replay_keeps_its_invariants() {
    let started = std::time::Instant::now();
    let backend = Capture {
        inner: replay("optimize_927.jsonl"),
        seen: Mutex::new(Vec::new()),
    };
    let catalog = StatementCatalog::builtin();
    let ev = Evaluator::new(&backend, &catalog);
    let validator = validator();
    let run = Optimizer::new(&ev, &validator, optimizer_config_927())
        .unwrap()
        .optimize(&unit_927())
        .unwrap();

    let statuses: Vec<_> = run.attempts.iter().map(|a| a.status).collect();
    assert_eq!(
        statuses,
        [
            AttemptStatus::Accepted,
            AttemptStatus::RejectedValidation,
            AttemptStatus::Accepted,
            AttemptStatus::RejectedScore,
            AttemptStatus::Accepted
        ]
    );
    assert_eq!(
        run.attempts.iter().map(|a| a.index).collect::<Vec<_>>(),
        [1, 2, 3, 4, 5]
    );

    let trajectory = run.accepted_trajectory();
    assert_eq!(trajectory, [0.4, 2.6, 3.1, 3.4]);
    assert!(trajectory.windows(2).all(|w| w[1] > w[0]));
    assert!(run.final_assessment.overall_score >= run.initial_assessment.overall_score);
    assert_eq!(run.final_code.source.trim_end(), read("code/mbpp/927.v5.py").trim_end());
    assert_eq!(run.attempts[3].overall_score(), Some(3.0));
    assert!(!run.attempts[1].validation.as_ref().unwrap().syntax_ok);

    // Each improvement prompt is built from the latest accepted version only.
    let improvement_prompts: Vec<ChatRequest> = backend
        .seen
        .lock()
        .unwrap()
        .iter()
        .filter(|r| r.user.contains("### Quality Dimensions Feedback:"))
        .cloned()
        .collect();
    assert_eq!(improvement_prompts.len(), 5);
    let base_for_attempt = ["927.py", "927.v1.py", "927.v1.py", "927.v3.py", "927.v3.py"];
    for (req, file) in improvement_prompts.iter().zip(base_for_attempt) {
        let code = read(&format!("code/mbpp/{file}"));
        assert!(
            req.user.contains(code.trim_end()),
            "attempt {} should start from {file}",
            req.attempt_nonce
        );
        for rejected in ["927.broken.py", "927.v4.py"] {
            assert!(!req.user.contains(read(&format!("code/mbpp/{rejected}")).trim_end()));
        }
    }
    assert!(started.elapsed().as_secs_f64() < 5.0);
}

#[test]
fn transcript_gap_mid_run_keeps_the_partial_run() {
    // Drop attempt 3's improvement reply so the loop fails there.
    let exchanges: Vec<_> = quest_core::gateway::load_transcript(&transcript("optimize_927.jsonl"))
        .unwrap()
        .into_iter()
        .filter(|e| !(e.request.attempt_nonce == 3 && e.request.user.contains("```improved_code")))
        .collect();
    let backend = ReplayBackend::from_exchanges(exchanges);
    let catalog = StatementCatalog::builtin();
    let ev = Evaluator::new(&backend, &catalog);
    let validator = validator();
    match Optimizer::new(&ev, &validator, optimizer_config_927())
        .unwrap()
        .optimize(&unit_927())
    {
        Err(OptimizeError::Aborted {
            attempt,
            partial,
            cause,
        }) => {
            assert_eq!(attempt, 3);
            assert!(matches!(cause, AbortCause::Gateway(GatewayError::TranscriptGap { .. })));
            assert_eq!(partial.attempts.len(), 2);
            assert_eq!(partial.accepted_trajectory(), [0.4, 2.6]);
        }
        other => panic!("expected an abort, got {other:?}"),
    }
}

#[test]
fn target_already_met_needs_no_attempts() {
    let backend = replay("optimize_927.jsonl");
    let catalog = StatementCatalog::builtin();
    let ev = Evaluator::new(&backend, &catalog);
    let validator = validator();
    let mut config = optimizer_config_927();
    config.target_score = 0.4;
    let run = Optimizer::new(&ev, &validator, config)
        .unwrap()
        .optimize(&unit_927())
        .unwrap();
    assert!(run.attempts.is_empty());
    assert_eq!(run.final_assessment, run.initial_assessment);
}
