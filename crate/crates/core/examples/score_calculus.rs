//! Verdicts to dimension scores to an overall score, including
//! self-consistency averaging over several samples.

use quest_core::model::{display_score, CodeAssessment, DimensionAssessment, StatementVerdict, DIMENSION_IDS};

fn main() -> anyhow::Result<()> {
    use StatementVerdict::{False as F, NotApplicable as N, True as T};

    // One sample per dimension except Efficiency, which has three.
    let single = [
        vec![T, F, T, F, F],
        vec![T, F, T, F, N],
        vec![T, T, F, N, N],
        vec![],
        vec![F, F, F, F, N],
        vec![N, N, F, F, N],
        vec![F, F, F, F, F],
        vec![F, T, F, F, N],
        vec![F, F, F, N, N],
        vec![T, T, T, T, T],
    ];
    let efficiency = vec![vec![F, F, N, N, N], vec![F, T, F, F, N], vec![F, N, N, N, N]];

    let mut dimensions = Vec::new();
    for (id, verdicts) in DIMENSION_IDS.iter().zip(single) {
        let samples = if verdicts.is_empty() {
            efficiency.clone()
        } else {
            vec![verdicts]
        };
        dimensions.push(DimensionAssessment::from_samples(*id, samples, "")?);
    }
    let assessment = CodeAssessment::new(dimensions, "")?;
    for d in &assessment.dimensions {
        println!(
            "{:<16} {:>6}  ({} sample(s))",
            d.dimension,
            display_score(d.score),
            d.samples.len()
        );
    }
    println!(
        "overall: {} (exact {})",
        display_score(assessment.overall_score),
        assessment.overall_score
    );
    Ok(())
}
