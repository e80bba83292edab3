//! The score-gated improvement loop on a recorded run: every candidate is
//! syntax-checked, tested, and re-scored before it may replace the current code.

use std::path::Path;

use quest_core::catalog::StatementCatalog;
use quest_core::evaluator::Evaluator;
use quest_core::gateway::ReplayBackend;
use quest_core::model::{display_score, CodeUnit, Language, OptimizerConfig};
use quest_core::optimizer::Optimizer;
use quest_core::validation::Validator;

fn main() -> anyhow::Result<()> {
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let backend = ReplayBackend::load(&fixtures.join("transcripts/optimize_927.jsonl"))?;
    let catalog = StatementCatalog::builtin();
    let evaluator = Evaluator::new(&backend, &catalog);
    let validator = Validator::default().with_root(fixtures.join("code"));

    let source = std::fs::read_to_string(fixtures.join("code/mbpp/927.py"))?;
    let unit = CodeUnit::new("mbpp/927", Language::Python, source)?
        .with_test_command("python3 {root}/mbpp/927_test.py {code}");
    let config = OptimizerConfig {
        max_iterations: 5,
        target_score: 5.0,
        ..OptimizerConfig::default()
    };

    let run = Optimizer::new(&evaluator, &validator, config)?.optimize(&unit)?;
    println!("initial: {}", display_score(run.initial_assessment.overall_score));
    for a in &run.attempts {
        let score = a.overall_score().map(display_score).unwrap_or_else(|| "-".into());
        println!("attempt {}: {:?} {score}", a.index, a.status);
    }
    println!("final:   {}", display_score(run.final_assessment.overall_score));
    println!("accepted trajectory: {:?}", run.accepted_trajectory());
    Ok(())
}
