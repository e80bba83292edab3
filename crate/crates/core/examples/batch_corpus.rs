//! Evaluating every entry of a corpus manifest into a report directory,
//! answered from a recorded transcript.

use std::path::Path;

use quest_core::catalog::StatementCatalog;
use quest_core::corpus::{self, BatchContext, BatchMode, BatchOptions};
use quest_core::evaluator::Evaluator;
use quest_core::gateway::ReplayBackend;
use quest_core::model::OptimizerConfig;
use quest_core::proxy::ProxyRunner;
use quest_core::validation::Validator;

fn main() -> anyhow::Result<()> {
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let manifest = corpus::load_manifest(&fixtures.join("code/corpus.toml"))?;
    let (python, javascript) = manifest.count_by_language();
    println!(
        "{} entries ({python} Python, {javascript} JavaScript)",
        manifest.entries.len()
    );

    let backend = ReplayBackend::load(&fixtures.join("transcripts/batch_evaluate.jsonl"))?;
    let catalog = StatementCatalog::builtin();
    let evaluator = Evaluator::new(&backend, &catalog);
    let validator = Validator::default();
    let proxy = ProxyRunner::default();
    let ctx = BatchContext {
        evaluator: &evaluator,
        validator: &validator,
        optimizer: OptimizerConfig::default(),
        proxy: &proxy,
    };
    let options = BatchOptions {
        workers: 3,
        with_baseline: true,
        ..BatchOptions::new(BatchMode::Evaluate)
    };

    let out = tempfile::tempdir()?;
    let summary = corpus::run_batch(&manifest, &options, &ctx, out.path())?;
    for e in &summary.entries {
        println!("{:<26} ok={:<5} {}", e.id, e.ok, e.files.join(", "));
    }
    println!("{} of {} succeeded", summary.succeeded, summary.total);
    Ok(())
}
