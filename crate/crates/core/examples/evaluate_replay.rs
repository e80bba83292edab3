//! Ten-dimension evaluation and the single-score baseline, answered from a
//! recorded transcript so no model endpoint is needed.

use std::path::Path;

use quest_core::catalog::StatementCatalog;
use quest_core::evaluator::Evaluator;
use quest_core::gateway::ReplayBackend;
use quest_core::model::{display_score, CodeUnit, Language};

fn main() -> anyhow::Result<()> {
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let backend = ReplayBackend::load(&fixtures.join("transcripts/evaluate_601.jsonl"))?;
    let catalog = StatementCatalog::builtin();
    let evaluator = Evaluator::new(&backend, &catalog).with_parallelism(4);

    let source = std::fs::read_to_string(fixtures.join("code/mbpp/601.py"))?;
    let unit = CodeUnit::new("mbpp/601", Language::Python, source)?;

    let assessment = evaluator.evaluate(&unit)?;
    for d in &assessment.dimensions {
        println!("{:<16} {:>5}  {}", d.dimension, display_score(d.score), d.insight);
    }
    println!(
        "\noverall: {}\n{}",
        display_score(assessment.overall_score),
        assessment.summary
    );

    let baseline = evaluator.evaluate_baseline(&unit)?;
    println!("\nbaseline: {}  {}", baseline.score, baseline.insight);
    Ok(())
}
