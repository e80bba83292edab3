//! Improvement and agreement statistics over optimization runs.
//!
//! Relative percentage improvement, per-iteration score deltas, Pearson and
//! Spearman correlation with t-approximation p-values, and run summaries.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;

use crate::model::{OptimizationRun, MAX_SCORE};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AnalysisError {
    #[error("need at least {needed} values, got {got}")]
    Arity { needed: usize, got: usize },
    #[error("series lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("a series has zero variance")]
    DegenerateVariance,
    #[error("no runs to summarize")]
    Empty,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rpi {
    pub percent: f64,
    /// The initial score was already the maximum, so there was nothing to gain.
    pub no_headroom: bool,
}

/// `100 (final - initial) / (5 - initial)`; zero with a flag when `initial` is 5.
pub fn rpi(s_initial: f64, s_final: f64) -> Rpi {
    let headroom = MAX_SCORE - s_initial;
    if headroom <= 0.0 {
        return Rpi {
            percent: 0.0,
            no_headroom: true,
        };
    }
    Rpi {
        percent: 100.0 * (s_final - s_initial) / headroom,
        no_headroom: false,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaSeries {
    pub label: String,
    pub deltas: Vec<f64>,
}

pub fn delta_series(scores: &[f64], label: impl Into<String>) -> Result<DeltaSeries, AnalysisError> {
    if scores.len() < 2 {
        return Err(AnalysisError::Arity {
            needed: 2,
            got: scores.len(),
        });
    }
    Ok(DeltaSeries {
        label: label.into(),
        deltas: scores.windows(2).map(|w| w[1] - w[0]).collect(),
    })
}

fn check_pair(x: &[f64], y: &[f64], needed: usize) -> Result<(), AnalysisError> {
    if x.len() != y.len() {
        return Err(AnalysisError::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < needed {
        return Err(AnalysisError::Arity { needed, got: x.len() });
    }
    Ok(())
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Product-moment correlation, computed on centered values.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64, AnalysisError> {
    check_pair(x, y, 3)?;
    let (mx, my) = (mean(x), mean(y));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(AnalysisError::DegenerateVariance);
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// 1-based ranks; tied values share the average of the positions they span.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = rank;
        }
        i = j + 1;
    }
    ranks
}

pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64, AnalysisError> {
    check_pair(x, y, 3)?;
    pearson(&average_ranks(x), &average_ranks(y))
}

/// Two-sided p-value for a correlation of `r` over `n` pairs, from the
/// Student t distribution with `n - 2` degrees of freedom.
///
/// With `t² = r² df / (1 - r²)` the incomplete-beta argument `df / (df + t²)`
/// reduces to `1 - r²`, which stays finite at `|r| = 1`.
pub fn correlation_p_value(r: f64, n: usize) -> Result<f64, AnalysisError> {
    if n < 4 {
        return Err(AnalysisError::Arity { needed: 4, got: n });
    }
    let x = (1.0 - r * r).clamp(0.0, 1.0);
    if x == 0.0 {
        return Ok(0.0);
    }
    let df = (n - 2) as f64;
    Ok(beta_reg(df / 2.0, 0.5, x).clamp(0.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationResult {
    pub r_pearson: f64,
    pub r_spearman: f64,
    pub p_pearson: f64,
    pub p_spearman: f64,
    pub n: usize,
}

pub fn correlation_report(a: &DeltaSeries, b: &DeltaSeries) -> Result<CorrelationResult, AnalysisError> {
    check_pair(&a.deltas, &b.deltas, 4)?;
    let n = a.deltas.len();
    let r_pearson = pearson(&a.deltas, &b.deltas)?;
    let r_spearman = spearman(&a.deltas, &b.deltas)?;
    Ok(CorrelationResult {
        r_pearson,
        r_spearman,
        p_pearson: correlation_p_value(r_pearson, n)?,
        p_spearman: correlation_p_value(r_spearman, n)?,
        n,
    })
}

/// Location and spread of a sample. Spread fields need at least two values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub n: usize,
    pub mean: f64,
    pub median: f64,
    /// Sample standard deviation (n - 1 denominator).
    pub std_dev: Option<f64>,
    /// Standard error of the mean.
    pub std_err: Option<f64>,
}

impl Stats {
    pub fn of(values: &[f64]) -> Result<Self, AnalysisError> {
        if values.is_empty() {
            return Err(AnalysisError::Empty);
        }
        let n = values.len();
        let m = mean(values);
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let median = if n % 2 == 1 {
            sorted[n / 2]
        } else {
            (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
        };
        let std_dev = (n > 1).then(|| (values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt());
        Ok(Self {
            n,
            mean: m,
            median,
            std_dev,
            std_err: std_dev.map(|s| s / (n as f64).sqrt()),
        })
    }
}

/// Accepted score gains at one attempt index, across runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationGains {
    pub iteration: u32,
    pub gains: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub runs: usize,
    pub rpi_percent: Stats,
    pub absolute_improvement: Stats,
    pub no_headroom_runs: usize,
    pub per_iteration: Vec<IterationGains>,
}

pub fn summarize_runs(runs: &[OptimizationRun]) -> Result<RunSummary, AnalysisError> {
    if runs.is_empty() {
        return Err(AnalysisError::Empty);
    }
    let mut rpis = Vec::with_capacity(runs.len());
    let mut improvements = Vec::with_capacity(runs.len());
    let mut no_headroom_runs = 0;
    let mut per_iteration: BTreeMap<u32, Vec<f64>> = BTreeMap::new();
    for run in runs {
        let initial = run.initial_assessment.overall_score;
        let last = run.final_assessment.overall_score;
        let r = rpi(initial, last);
        no_headroom_runs += usize::from(r.no_headroom);
        rpis.push(r.percent);
        improvements.push(last - initial);
        let mut previous = initial;
        for attempt in run.accepted() {
            if let Some(score) = attempt.overall_score() {
                per_iteration.entry(attempt.index).or_default().push(score - previous);
                previous = score;
            }
        }
    }
    Ok(RunSummary {
        runs: runs.len(),
        rpi_percent: Stats::of(&rpis)?,
        absolute_improvement: Stats::of(&improvements)?,
        no_headroom_runs,
        per_iteration: per_iteration
            .into_iter()
            .map(|(iteration, gains)| IterationGains { iteration, gains })
            .collect(),
    })
}

/// Scores from another metric for the same sequence of accepted versions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VersionScores {
    pub metric: String,
    pub scores: Vec<f64>,
}

/// One row of the per-iteration delta table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaRow {
    pub example_id: String,
    /// Position of the later version in the accepted sequence (1 = first accepted).
    pub iteration: usize,
    pub delta_codequest: f64,
    pub delta_baseline: Option<f64>,
    pub delta_proxy: Option<f64>,
}

/// Rows for one run. Companion scores are used only when they cover every version.
pub fn delta_rows(
    example_id: &str,
    run: &OptimizationRun,
    baseline: Option<&VersionScores>,
    proxy: Option<&VersionScores>,
) -> Vec<DeltaRow> {
    let trajectory = run.accepted_trajectory();
    let Ok(main) = delta_series(&trajectory, "codequest") else {
        return Vec::new();
    };
    let companion = |v: Option<&VersionScores>, label: &str| {
        v.filter(|v| v.scores.len() == trajectory.len())
            .and_then(|v| delta_series(&v.scores, label).ok())
    };
    let baseline = companion(baseline, "baseline");
    let proxy = companion(proxy, "proxy");
    main.deltas
        .iter()
        .enumerate()
        .map(|(i, d)| DeltaRow {
            example_id: example_id.to_string(),
            iteration: i + 1,
            delta_codequest: *d,
            delta_baseline: baseline.as_ref().map(|s| s.deltas[i]),
            delta_proxy: proxy.as_ref().map(|s| s.deltas[i]),
        })
        .collect()
}

fn csv_field(text: &str) -> String {
    if text.contains([',', '"', '\n']) {
        format!("\"{}\"", text.replace('"', "\"\""))
    } else {
        text.to_string()
    }
}

pub fn render_delta_csv(rows: &[DeltaRow]) -> String {
    let mut out = String::from("example_id,iteration,delta_codequest,delta_baseline,delta_proxy\n");
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            csv_field(&r.example_id),
            r.iteration,
            r.delta_codequest,
            opt(r.delta_baseline),
            opt(r.delta_proxy)
        );
    }
    out
}

/// Pooled correlation of the main deltas against one companion column.
pub fn pooled_correlation(
    rows: &[DeltaRow],
    pick: impl Fn(&DeltaRow) -> Option<f64>,
) -> Result<CorrelationResult, AnalysisError> {
    let (main, other): (Vec<f64>, Vec<f64>) = rows
        .iter()
        .filter_map(|r| pick(r).map(|o| (r.delta_codequest, o)))
        .unzip();
    correlation_report(
        &DeltaSeries {
            label: "codequest".into(),
            deltas: main,
        },
        &DeltaSeries {
            label: "other".into(),
            deltas: other,
        },
    )
}
