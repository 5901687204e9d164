use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use serde::Deserialize;

use dpoad::bench::{
    emit_results, run_experiment, summarize, write_results, CsvSchema, DatasetSource,
    ExperimentConfig, Format, SyntheticSpec,
};
use dpoad::protocol::{LearningSource, Mechanism, NoiseSpace, ScoreSensitivity};
use dpoad::sampler::CandidateMode;
use dpoad::Error;

/// Benchmark Laplace, Pain-Free and DPOAD releases on a KS anomaly detector.
#[derive(Debug, Parser)]
#[command(name = "dpoad", version)]
struct Cli {
    /// JSON file with default values for any of the options below.
    #[arg(long)]
    config: Option<PathBuf>,
    /// laplace, painfree, dpoad or all (comma separated).
    #[arg(long)]
    mechanism: Option<String>,
    /// Comma-separated privacy budgets.
    #[arg(long)]
    epsilon: Option<String>,
    /// Comma-separated confidence levels.
    #[arg(long)]
    gamma: Option<String>,
    /// Comma-separated detection thresholds.
    #[arg(long)]
    threshold: Option<String>,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    seeds: Option<usize>,
    #[arg(long)]
    first_seed: Option<u64>,
    /// CSV dataset; the synthetic benchmark is used when absent.
    #[arg(long, conflicts_with = "synthetic")]
    dataset: Option<PathBuf>,
    /// Use the synthetic Poisson benchmark.
    #[arg(long)]
    synthetic: bool,
    #[arg(long)]
    bins: Option<usize>,
    #[arg(long)]
    c_max: Option<u64>,
    /// Time windows per scored unit.
    #[arg(long)]
    unit_len: Option<usize>,
    /// score or count.
    #[arg(long)]
    noise_space: Option<String>,
    /// sampled or lipschitz.
    #[arg(long)]
    score_sensitivity: Option<String>,
    /// histogram or counts.
    #[arg(long)]
    learn_from: Option<String>,
    /// Budget share of learning-phase frequency histograms.
    #[arg(long)]
    histogram_share: Option<f64>,
    /// difference or value.
    #[arg(long)]
    candidates: Option<String>,
    #[arg(long)]
    header: bool,
    #[arg(long)]
    label_column: Option<usize>,
    #[arg(long)]
    window_column: Option<usize>,
    #[arg(long)]
    rows_per_window: Option<usize>,
    #[arg(long)]
    records_per_iteration: Option<usize>,
    /// Result file; results go to stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// csv or json.
    #[arg(long)]
    format: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    mechanism: Option<String>,
    epsilon: Option<Vec<f64>>,
    gamma: Option<Vec<f64>>,
    threshold: Option<Vec<f64>>,
    iterations: Option<usize>,
    seeds: Option<usize>,
    first_seed: Option<u64>,
    dataset: Option<PathBuf>,
    bins: Option<usize>,
    c_max: Option<u64>,
    unit_len: Option<usize>,
    noise_space: Option<String>,
    score_sensitivity: Option<String>,
    learn_from: Option<String>,
    histogram_share: Option<f64>,
    candidates: Option<String>,
    header: Option<bool>,
    label_column: Option<usize>,
    window_column: Option<usize>,
    rows_per_window: Option<usize>,
    records_per_iteration: Option<usize>,
    out: Option<PathBuf>,
    format: Option<String>,
}

fn list(s: &str) -> Result<Vec<f64>, Error> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| Error::InvalidArgument(format!("'{t}' is not a number")))
        })
        .collect()
}

fn mechanisms(s: &str) -> Result<Vec<Mechanism>, Error> {
    if s.eq_ignore_ascii_case("all") {
        return Ok(Mechanism::ALL.to_vec());
    }
    s.split(',').map(|t| t.trim().parse()).collect()
}

fn build(cli: Cli) -> Result<(ExperimentConfig, Option<PathBuf>, Format), Error> {
    let file: FileConfig = match &cli.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Error::Io(format!("{}: {e}", p.display())))?;
            serde_json::from_str(&text).map_err(|e| Error::Parse {
                row: e.line(),
                column: e.column(),
                message: e.to_string(),
            })?
        }
        None => FileConfig::default(),
    };
    let mut cfg = ExperimentConfig::default();

    if let Some(m) = cli.mechanism.or(file.mechanism) {
        cfg.mechanisms = mechanisms(&m)?;
    }
    if let Some(v) = cli.epsilon.map(|s| list(&s)).transpose()?.or(file.epsilon) {
        cfg.epsilons = v;
    }
    if let Some(v) = cli.gamma.map(|s| list(&s)).transpose()?.or(file.gamma) {
        cfg.gammas = v;
    }
    if let Some(v) = cli.threshold.map(|s| list(&s)).transpose()?.or(file.threshold) {
        cfg.thresholds = v;
    }
    if let Some(v) = cli.iterations.or(file.iterations) {
        cfg.iterations = v;
    }
    if let Some(v) = cli.seeds.or(file.seeds) {
        cfg.seeds = v;
    }
    if let Some(v) = cli.first_seed.or(file.first_seed) {
        cfg.first_seed = v;
    }
    if let Some(v) = cli.c_max.or(file.c_max) {
        cfg.c_max = v;
    }
    if let Some(v) = cli.unit_len.or(file.unit_len) {
        cfg.unit_len = v;
    }
    if let Some(v) = cli.noise_space.or(file.noise_space) {
        cfg.noise_space = match v.as_str() {
            "score" => NoiseSpace::Score,
            "count" => NoiseSpace::Count,
            other => return Err(Error::InvalidArgument(format!("unknown noise space '{other}'"))),
        };
    }
    if let Some(v) = cli.score_sensitivity.or(file.score_sensitivity) {
        cfg.score_sensitivity = match v.as_str() {
            "sampled" => ScoreSensitivity::Sampled,
            "lipschitz" => ScoreSensitivity::Lipschitz,
            other => return Err(Error::InvalidArgument(format!("unknown score sensitivity '{other}'"))),
        };
    }
    if let Some(v) = cli.learn_from.or(file.learn_from) {
        cfg.learning_source = match v.as_str() {
            "histogram" => LearningSource::FrequencyHistogram,
            "counts" => LearningSource::NoisyCounts,
            other => return Err(Error::InvalidArgument(format!("unknown learning source '{other}'"))),
        };
    }
    if let Some(v) = cli.histogram_share.or(file.histogram_share) {
        cfg.histogram_share = v;
    }
    if let Some(v) = cli.candidates.or(file.candidates) {
        cfg.candidate_mode = match v.as_str() {
            "difference" => CandidateMode::NeighborDifference,
            "value" => CandidateMode::DirectValue,
            other => return Err(Error::InvalidArgument(format!("unknown candidate mode '{other}'"))),
        };
    }
    let dataset = if cli.synthetic { None } else { cli.dataset.or(file.dataset) };
    match dataset {
        Some(path) => {
            cfg.dataset = DatasetSource::Csv {
                path,
                schema: CsvSchema {
                    has_header: cli.header || file.header.unwrap_or(false),
                    label_column: cli.label_column.or(file.label_column),
                    window_column: cli.window_column.or(file.window_column),
                    rows_per_window: cli.rows_per_window.or(file.rows_per_window).unwrap_or(1),
                },
                records_per_iteration: cli
                    .records_per_iteration
                    .or(file.records_per_iteration)
                    .unwrap_or(1000),
            };
            cfg.bins = cli.bins.or(file.bins).unwrap_or(cfg.bins);
        }
        None => {
            let mut spec = SyntheticSpec::default();
            if let Some(b) = cli.bins.or(file.bins) {
                let (lo, hi) = (spec.rates[0], spec.rates[spec.rates.len() - 1]);
                spec.rates = (0..b)
                    .map(|i| if b == 1 { lo } else { lo + (hi - lo) * i as f64 / (b - 1) as f64 })
                    .collect();
            }
            cfg.bins = spec.bins();
            cfg.dataset = DatasetSource::Synthetic(spec);
        }
    }
    let format = cli
        .format
        .or(file.format)
        .map(|f| f.parse())
        .transpose()?
        .unwrap_or(Format::Csv);
    Ok((cfg, cli.out.or(file.out), format))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let run = || -> Result<(), Error> {
        let (cfg, out, format) = build(cli)?;
        let rows = run_experiment(&cfg)?;
        match out {
            Some(path) => emit_results(&rows, format, &path)?,
            None => write_results(&rows, format, std::io::stdout().lock())?,
        }
        let last = cfg.iterations;
        eprintln!("mechanism  epsilon  gamma  threshold  iteration  median_precision  median_recall");
        for s in summarize(&rows).iter().filter(|s| s.iteration == last) {
            eprintln!(
                "{:<9}  {:>7}  {:>5}  {:>9}  {:>9}  {:>16.4}  {:>13.4}",
                s.mechanism, s.epsilon, s.gamma, s.threshold, s.iteration, s.median_precision, s.median_recall
            );
        }
        Ok(())
    };
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
