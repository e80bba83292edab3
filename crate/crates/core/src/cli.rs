//! The `quest` command line.
//!
//! Exit codes: 0 on success, 1 when a batch finished with failed entries,
//! 2 when a command could not complete.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use crate::analysis::{self, DeltaRow, VersionScores};
use crate::catalog::StatementCatalog;
use crate::config::QuestConfig;
use crate::corpus::{self, BatchContext, BatchMode, BatchOptions};
use crate::evaluator::Evaluator;
use crate::gateway::{open_backend, BackendConfig, ChatBackend};
use crate::model::{display_score, AttemptStatus, CodeUnit, Language, OptimizationRun};
use crate::optimizer::{OptimizeError, Optimizer};
use crate::proxy::ProxyRunner;
use crate::report::{self, BaselineReport, EvaluationReport, RunReport};
use crate::validation::Validator;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BackendKind {
    /// Live chat-completions endpoint.
    Http,
    /// Live endpoint, appending every exchange to the transcript.
    Record,
    /// Answer from the transcript only; no network.
    Replay,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Evaluate,
    Optimize,
    Proxy,
}

impl From<ModeArg> for BatchMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Evaluate => BatchMode::Evaluate,
            ModeArg::Optimize => BatchMode::Optimize,
            ModeArg::Proxy => BatchMode::Proxy,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "quest",
    version,
    about = "Evaluate and iteratively improve code quality with a language model"
)]
pub struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value = "http")]
    pub backend: BackendKind,
    /// Transcript for the record and replay backends.
    #[arg(long, global = true)]
    pub transcript: Option<PathBuf>,
    /// Concurrent model calls per evaluation.
    #[arg(long, global = true, value_parser = clap::value_parser!(u64).range(1..))]
    pub parallelism: Option<u64>,
    /// Samples per dimension.
    #[arg(long, global = true, value_parser = clap::value_parser!(u32).range(1..))]
    pub self_consistency: Option<u32>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Score a file over the ten quality dimensions.
    Evaluate {
        file: PathBuf,
        /// Use the single-prompt baseline instead.
        #[arg(long)]
        baseline: bool,
        /// Report path (default: `<file>.eval.json` or `<file>.baseline.json`).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Iteratively improve a file.
    Optimize {
        file: PathBuf,
        #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
        max_iters: Option<u32>,
        #[arg(long, allow_hyphen_values = true)]
        target_score: Option<f64>,
        /// Test command; `{code}` is replaced by the candidate's path.
        #[arg(long)]
        tests: Option<String>,
        /// Skip test execution even when a test command is set.
        #[arg(long)]
        no_tests: bool,
    },
    /// Proxy scores (pylint, radon MI, bandit) for a Python file.
    Proxy {
        file: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a mode over every entry of a corpus manifest.
    Batch {
        manifest: PathBuf,
        #[arg(long, value_enum)]
        mode: ModeArg,
        #[arg(long)]
        out: PathBuf,
        /// Entries processed concurrently.
        #[arg(long, default_value_t = 1)]
        workers: usize,
        #[arg(long)]
        with_baseline: bool,
        #[arg(long)]
        with_proxy: bool,
    },
    /// Deltas, correlations and summary statistics over run reports.
    Analyze {
        runs_dir: PathBuf,
        /// Output directory (default: the runs directory).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Parses `std::env::args` and runs; returns the process exit code.
pub fn main() -> i32 {
    run_from(std::env::args_os())
}

pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            2
        }
    }
}

fn load_config(cli: &Cli) -> Result<QuestConfig> {
    let mut config = match &cli.config {
        Some(path) => QuestConfig::load(path)?,
        None => QuestConfig::default(),
    };
    if let Some(p) = cli.parallelism {
        config.evaluator.parallelism = p as usize;
    }
    if let Some(k) = cli.self_consistency {
        config.evaluator.self_consistency = k;
    }
    Ok(config)
}

fn backend(cli: &Cli, config: &QuestConfig) -> Result<Box<dyn ChatBackend>> {
    let need_transcript = || {
        cli.transcript
            .clone()
            .with_context(|| format!("--backend {:?} needs --transcript", cli.backend).to_lowercase())
    };
    let spec = match cli.backend {
        BackendKind::Http => BackendConfig::Http(config.model.http()),
        BackendKind::Record => BackendConfig::Record {
            http: config.model.http(),
            transcript: need_transcript()?,
        },
        BackendKind::Replay => BackendConfig::Replay {
            transcript: need_transcript()?,
        },
    };
    Ok(open_backend(&spec)?)
}

fn catalog(config: &QuestConfig) -> Result<StatementCatalog> {
    Ok(match &config.evaluator.catalog {
        Some(path) => StatementCatalog::load(path)?,
        None => StatementCatalog::builtin(),
    })
}

fn read_unit(file: &Path) -> Result<CodeUnit> {
    let source = std::fs::read_to_string(file).with_context(|| format!("reading {}", file.display()))?;
    let ext = file.extension().and_then(|e| e.to_str()).unwrap_or("");
    let id = file
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    Ok(CodeUnit::new(id, Language::from_extension(ext), source)?)
}

fn sibling(file: &Path, suffix: &str) -> PathBuf {
    let mut name = file.as_os_str().to_owned();
    name.push(suffix);
    PathBuf::from(name)
}

pub fn run(cli: &Cli) -> Result<i32> {
    let config = load_config(cli)?;
    match &cli.command {
        Command::Evaluate { file, baseline, out } => {
            let unit = read_unit(file)?;
            let backend = backend(cli, &config)?;
            let catalog = catalog(&config)?;
            let evaluator = evaluator(&*backend, &catalog, &config);
            cmd_evaluate(&evaluator, &unit, file, *baseline, out.as_deref())
        }
        Command::Optimize {
            file,
            max_iters,
            target_score,
            tests,
            no_tests,
        } => {
            let mut unit = read_unit(file)?;
            if let Some(cmd) = tests {
                unit = unit.with_test_command(cmd.clone());
            }
            let mut opt = config.optimizer_config();
            if let Some(n) = max_iters {
                opt.max_iterations = *n;
            }
            if let Some(t) = target_score {
                opt.target_score = *t;
            }
            if *no_tests {
                opt.run_tests = false;
            }
            opt.validate()?;
            let backend = backend(cli, &config)?;
            let catalog = catalog(&config)?;
            let evaluator = evaluator(&*backend, &catalog, &config);
            let validator = Validator::new(config.validation.clone());
            let optimizer = Optimizer::new(&evaluator, &validator, opt)?;
            cmd_optimize(&optimizer, &evaluator, &unit, file)
        }
        Command::Proxy { file, out } => {
            let report = ProxyRunner::new(config.proxy.clone()).proxy_overall(file)?;
            let text = report::to_canonical_json(&report)?;
            if let Some(out) = out {
                report::write_atomic(out, text.as_bytes())?;
            }
            print!("{text}");
            Ok(0)
        }
        Command::Batch {
            manifest,
            mode,
            out,
            workers,
            with_baseline,
            with_proxy,
        } => {
            let manifest = corpus::load_manifest(manifest)?;
            let mode = BatchMode::from(*mode);
            let backend: Box<dyn ChatBackend> = match mode {
                BatchMode::Proxy => Box::new(crate::gateway::ReplayBackend::default()),
                _ => backend(cli, &config)?,
            };
            let catalog = catalog(&config)?;
            let evaluator = evaluator(&*backend, &catalog, &config);
            let validator = Validator::new(config.validation.clone());
            let proxy = ProxyRunner::new(config.proxy.clone());
            let ctx = BatchContext {
                evaluator: &evaluator,
                validator: &validator,
                optimizer: config.optimizer_config(),
                proxy: &proxy,
            };
            let options = BatchOptions {
                mode,
                workers: (*workers).max(1),
                with_baseline: *with_baseline,
                with_proxy: *with_proxy,
            };
            let summary = corpus::run_batch(&manifest, &options, &ctx, out)?;
            for e in &summary.entries {
                match &e.error {
                    None => println!("ok     {}", e.id),
                    Some(err) => println!("FAILED {}: {err}", e.id),
                }
            }
            println!("{} of {} entries succeeded", summary.succeeded, summary.total);
            Ok(if summary.failed == 0 { 0 } else { 1 })
        }
        Command::Analyze { runs_dir, out } => cmd_analyze(runs_dir, out.as_deref().unwrap_or(runs_dir)),
    }
}

fn evaluator<'a>(backend: &'a dyn ChatBackend, catalog: &'a StatementCatalog, config: &QuestConfig) -> Evaluator<'a> {
    Evaluator::new(backend, catalog)
        .with_settings(config.model.settings())
        .with_self_consistency(config.evaluator.self_consistency)
        .with_parallelism(config.evaluator.parallelism)
}

fn cmd_evaluate(
    evaluator: &Evaluator<'_>,
    unit: &CodeUnit,
    file: &Path,
    baseline: bool,
    out: Option<&Path>,
) -> Result<i32> {
    if baseline {
        let reply = evaluator.evaluate_baseline(unit)?;
        let report = BaselineReport {
            id: unit.id.clone(),
            language: unit.language.clone(),
            model: evaluator.settings().clone(),
            score: reply.score,
            insight: reply.insight,
        };
        let path = out
            .map(Path::to_path_buf)
            .unwrap_or_else(|| sibling(file, ".baseline.json"));
        report::write_json(&path, &report)?;
        println!("baseline score: {}", report.score);
        return Ok(0);
    }
    let assessment = evaluator.evaluate(unit)?;
    for d in &assessment.dimensions {
        println!("{:<16} {:>5}", d.dimension, display_score(d.score));
    }
    println!("overall: {}", display_score(assessment.overall_score));
    let report = EvaluationReport {
        id: unit.id.clone(),
        language: unit.language.clone(),
        model: evaluator.settings().clone(),
        self_consistency: evaluator.self_consistency(),
        assessment,
    };
    let path = out
        .map(Path::to_path_buf)
        .unwrap_or_else(|| sibling(file, ".eval.json"));
    report::write_json(&path, &report)?;
    Ok(0)
}

fn print_run(run: &OptimizationRun) {
    println!("{:<5} {:<20} {:>6}", "iter", "status", "score");
    println!(
        "{:<5} {:<20} {:>6}",
        0,
        "initial",
        display_score(run.initial_assessment.overall_score)
    );
    for a in &run.attempts {
        let status = match a.status {
            AttemptStatus::Accepted => "accepted",
            AttemptStatus::RejectedValidation => "rejected_validation",
            AttemptStatus::RejectedScore => "rejected_score",
            AttemptStatus::RejectedParse => "rejected_parse",
        };
        let score = a.overall_score().map(display_score).unwrap_or_else(|| "-".into());
        println!("{:<5} {:<20} {:>6}", a.index, status, score);
    }
    println!("final: {}", display_score(run.final_assessment.overall_score));
}

fn improved_path(file: &Path) -> PathBuf {
    let stem = file
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let name = match file.extension() {
        Some(ext) => format!("{stem}.improved.{}", ext.to_string_lossy()),
        None => format!("{stem}.improved"),
    };
    file.with_file_name(name)
}

fn cmd_optimize(optimizer: &Optimizer<'_>, evaluator: &Evaluator<'_>, unit: &CodeUnit, file: &Path) -> Result<i32> {
    let report_path = sibling(file, ".run.json");
    let model = evaluator.settings().clone();
    match optimizer.optimize(unit) {
        Ok(run) => {
            print_run(&run);
            report::write_atomic(&improved_path(file), run.final_code.source.as_bytes())?;
            let report = RunReport {
                id: unit.id.clone(),
                model,
                aborted: None,
                run,
            };
            report::write_json(&report_path, &report)?;
            Ok(0)
        }
        Err(OptimizeError::Aborted {
            attempt,
            partial,
            cause,
        }) => {
            print_run(&partial);
            let reason = format!("aborted at attempt {attempt}: {cause}");
            let report = RunReport {
                id: unit.id.clone(),
                model,
                aborted: Some(reason.clone()),
                run: *partial,
            };
            report::write_json(&report_path, &report)?;
            bail!("{reason} (partial run written to {})", report_path.display())
        }
        Err(e) => Err(e.into()),
    }
}

/// A run report with its optional baseline and proxy trajectories.
type RunWithCompanions = (RunReport, Option<VersionScores>, Option<VersionScores>);

/// Run reports in `dir`, sorted by file name, with their companion trajectories.
fn collect_runs(dir: &Path) -> Result<Vec<RunWithCompanions>> {
    let mut names: Vec<String> = std::fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .filter_map(|e| e.ok())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .filter(|n| n.ends_with(".run.json"))
        .collect();
    names.sort();
    let mut runs = Vec::new();
    for name in names {
        let stem = &name[..name.len() - ".run.json".len()];
        let report: RunReport = report::read_json(&dir.join(&name))?;
        let companion = |suffix: &str| -> Result<Option<VersionScores>> {
            let p = dir.join(format!("{stem}.{suffix}"));
            Ok(if p.is_file() {
                Some(report::read_json(&p)?)
            } else {
                None
            })
        };
        runs.push((
            report,
            companion("baseline-trajectory.json")?,
            companion("proxy-trajectory.json")?,
        ));
    }
    Ok(runs)
}

fn cmd_analyze(runs_dir: &Path, out: &Path) -> Result<i32> {
    let runs = collect_runs(runs_dir)?;
    if runs.is_empty() {
        bail!("no runs in {}", runs_dir.display());
    }
    let rows: Vec<DeltaRow> = runs
        .iter()
        .flat_map(|(r, b, p)| analysis::delta_rows(&r.id, &r.run, b.as_ref(), p.as_ref()))
        .collect();
    let plain: Vec<OptimizationRun> = runs.iter().map(|(r, _, _)| r.run.clone()).collect();
    let summary = analysis::summarize_runs(&plain)?;

    let mut correlations = serde_json::Map::new();
    for (name, pick) in [
        (
            "codequest_vs_baseline",
            (|r: &DeltaRow| r.delta_baseline) as fn(&DeltaRow) -> Option<f64>,
        ),
        ("codequest_vs_proxy", |r: &DeltaRow| r.delta_proxy),
    ] {
        let value = match analysis::pooled_correlation(&rows, pick) {
            Ok(c) => {
                println!(
                    "{name}: n={} r_p={:.3} (p={:.3}) r_s={:.3} (p={:.3})",
                    c.n, c.r_pearson, c.p_pearson, c.r_spearman, c.p_spearman
                );
                serde_json::to_value(c)?
            }
            Err(e) => {
                println!("{name}: unavailable ({e})");
                serde_json::json!({ "unavailable": e.to_string() })
            }
        };
        correlations.insert(name.to_string(), value);
    }

    std::fs::create_dir_all(out)?;
    report::write_atomic(&out.join("deltas.csv"), analysis::render_delta_csv(&rows).as_bytes())?;
    report::write_json(&out.join("correlations.json"), &correlations)?;
    report::write_json(&out.join("summary.json"), &summary)?;
    println!(
        "runs: {}  mean RPI: {:.1}%  median RPI: {:.1}%  mean improvement: {:.2}",
        summary.runs, summary.rpi_percent.mean, summary.rpi_percent.median, summary.absolute_improvement.mean
    );
    Ok(0)
}
