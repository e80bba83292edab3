//! Relative improvement, per-iteration deltas, and how well two metrics'
//! deltas agree, on a small made-up set of runs.

use quest_core::analysis::{correlation_report, delta_series, rpi, DeltaSeries, Stats};

fn main() -> anyhow::Result<()> {
    // Accepted-version scores per run, from two different metrics.
    let runs = [
        (vec![0.4, 2.6, 3.1, 3.4], vec![1.0, 3.0, 3.0, 4.0]),
        (vec![-1.3, 0.9, 2.2], vec![2.0, 2.0, 3.0]),
        (vec![1.5, 2.0, 3.6, 4.1], vec![2.0, 3.0, 4.0, 3.0]),
    ];

    let mut rpis = Vec::new();
    let (mut main, mut other) = (Vec::new(), Vec::new());
    for (scores, companion) in &runs {
        let r = rpi(scores[0], scores[scores.len() - 1]);
        println!("{:?} -> RPI {:.1}%", scores, r.percent);
        rpis.push(r.percent);
        main.extend(delta_series(scores, "main")?.deltas);
        other.extend(delta_series(companion, "other")?.deltas);
    }
    let stats = Stats::of(&rpis)?;
    println!(
        "mean RPI {:.1}% (sd {:.1}), median {:.1}%",
        stats.mean,
        stats.std_dev.unwrap_or(0.0),
        stats.median
    );

    let main = DeltaSeries {
        label: "main".into(),
        deltas: main,
    };
    let other = DeltaSeries {
        label: "other".into(),
        deltas: other,
    };
    let c = correlation_report(&main, &other)?;
    println!(
        "n={} pearson {:.3} (p {:.3}), spearman {:.3} (p {:.3})",
        c.n, c.r_pearson, c.p_pearson, c.r_spearman, c.p_spearman
    );
    Ok(())
}
