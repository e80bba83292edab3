//! Rule-based proxy scores. Parses captured tool output, then runs pylint,
//! radon and bandit on a file when they are installed.
//! Usage: `proxy_metrics [FILE.py]`.

use std::path::{Path, PathBuf};

use quest_core::proxy::{parse_bandit_output, parse_pylint_output, parse_radon_mi_output, ProxyRunner};

fn main() -> anyhow::Result<()> {
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let out = |name: &str| std::fs::read_to_string(fixtures.join("tool_output").join(name));

    println!("captured pylint:  {}", parse_pylint_output(&out("pylint_750.txt")?)?);
    println!(
        "captured radon:   {}",
        parse_radon_mi_output(&out("radon_872.txt")?, "clean.py")?
    );
    println!("captured bandit:  {}", parse_bandit_output(&out("bandit_issues.txt")?)?);

    let file = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| fixtures.join("code/mbpp/927.v5.py"));
    match ProxyRunner::default().proxy_overall(&file) {
        Ok(report) => println!("\n{}", quest_core::report::to_canonical_json(&report)?),
        Err(e) => println!("\nlive run skipped: {e}"),
    }
    Ok(())
}
