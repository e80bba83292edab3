//! Prints the prompts sent for a source file: one dimension's statements
//! and the baseline request. Usage: `render_prompts [FILE] [DIMENSION]`.

use std::path::PathBuf;

use anyhow::Context;
use quest_core::catalog::StatementCatalog;
use quest_core::prompts::{render_baseline_prompt, render_dimension_prompt};

fn main() -> anyhow::Result<()> {
    let mut args = std::env::args().skip(1);
    let file = args
        .next()
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/code/mbpp/601.py"));
    let dimension = args.next().unwrap_or_else(|| "Robustness".to_string());

    let code = std::fs::read_to_string(&file).with_context(|| format!("reading {}", file.display()))?;
    let catalog = StatementCatalog::builtin();
    let dim = catalog
        .dimension(&dimension)
        .with_context(|| format!("unknown dimension {dimension}"))?;

    println!("===== {dimension} =====\n{}", render_dimension_prompt(&code, dim)?.user);
    println!("\n===== baseline =====\n{}", render_baseline_prompt(&code).user);
    Ok(())
}
