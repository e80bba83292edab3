//! Gating candidates before they are scored: syntax checks for Python and
//! JavaScript, an assert script, and a runaway command cut off by its timeout.

use std::path::Path;

use quest_core::model::Language;
use quest_core::validation::{ValidationConfig, Validator};

fn main() -> anyhow::Result<()> {
    let code = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/code");
    let read = |rel: &str| std::fs::read_to_string(code.join(rel));
    let validator = Validator::default().with_root(&code);

    for (rel, lang) in [
        ("mbpp/927.v1.py", Language::Python),
        ("mbpp/927.broken.py", Language::Python),
        ("security/path_traversal.js", Language::JavaScript),
        ("security/path_traversal.broken.js", Language::JavaScript),
    ] {
        let r = validator.check_syntax(&read(rel)?, &lang)?;
        let first = r.stderr_excerpt.lines().find(|l| l.contains("Error")).unwrap_or("");
        println!("syntax {:<36} ok={:<5} {first}", rel, r.syntax_ok);
    }

    let tests = "python3 {root}/mbpp/601_test.py {code}";
    for rel in ["mbpp/601.py", "mbpp/601.mutant.py"] {
        let r = validator.run_tests(&read(rel)?, tests, &Language::Python)?;
        println!("tests  {:<36} ok={:?}", rel, r.tests_ok);
    }

    let impatient = Validator::new(ValidationConfig {
        test_timeout_secs: 0.5,
        ..ValidationConfig::default()
    });
    let r = impatient.run_tests("", "sleep 10", &Language::Python)?;
    println!("tests  {:<36} ok={:?} {}", "sleep 10", r.tests_ok, r.stderr_excerpt);
    Ok(())
}
