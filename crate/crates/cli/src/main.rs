//! `ssaam`: runs the pipeline stages from the command line.
//!
//! Every stage writes under `$SSAAM_OUT/<stage>/` (default `out/`) along
//! with a `manifest.json`. Exit status is 0 on success, 2 when the inputs
//! or configuration are at fault and 1 for anything else.

mod config;
mod manifest;

use clap::{Parser, Subcommand};
use serde::Serialize;
use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use ssaam_core::backtest::{
    report_grid, resolve_schedules, run_grid, Decision, Outcome, RebalanceSchedule, SolverAllocator,
};
use ssaam_core::causal::{leading_effect, var_lingam, INDEX_VAR, PORTFOLIO_VAR};
use ssaam_core::cpd::{date_regimes, detect_regimes, write_regimes};
use ssaam_core::data::{
    align_by_date, build_equal_weight_portfolio, load_price_table, load_score_table, load_series, write_series,
    Date, PriceTable, Series,
};
use ssaam_core::sentiment::{build_polarity_index, Aggregation, PolarityIndex};
use ssaam_core::synth::{synthetic_market, MarketConfig};
use ssaam_core::{Error, Result};

use config::{DataSource, IndexSource, RunConfig};
use manifest::RunManifest;

#[derive(Parser)]
#[command(name = "ssaam", version, about = "Sentiment-driven asset allocation pipeline")]
struct Cli {
    /// Seed for every random draw (synthetic data, ICA restarts).
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic price table and score file.
    Synth {
        #[arg(long, default_value_t = MarketConfig::default().n_assets)]
        assets: usize,
        #[arg(long, default_value_t = MarketConfig::default().n_days)]
        days: usize,
        #[arg(long, default_value_t = MarketConfig::default().sentences_per_day)]
        sentences: usize,
    },
    /// Build the daily polarity index from sentence scores.
    Polarity {
        scores: PathBuf,
        #[arg(long, default_value = "sum")]
        agg: Aggregation,
        /// Index CSV path (default `<out>/polarity/index.csv`).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check whether the index leads the equal-weight portfolio.
    Causal {
        #[arg(long)]
        prices: PathBuf,
        #[arg(long)]
        index: PathBuf,
        #[arg(long, default_value_t = ssaam_core::causal::DEFAULT_LAG)]
        lag: usize,
        #[arg(long, default_value_t = ssaam_core::causal::DEFAULT_THRESHOLD)]
        threshold: f64,
    },
    /// Segment the index into trend-labelled regimes.
    Cpd {
        #[arg(long)]
        index: PathBuf,
        #[arg(long)]
        regimes: usize,
        #[arg(long, default_value_t = ssaam_core::cpd::DEFAULT_MIN_SIZE)]
        min_size: usize,
        /// Regimes CSV path (default `<out>/cpd/regimes.csv`).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Backtest the strategy grid described by a JSON run file.
    Backtest {
        config: PathBuf,
        /// Print the resolved rebalance schedules and stop.
        #[arg(long)]
        dry_run: bool,
        /// Worker threads for the grid (default: one per core).
        #[arg(long)]
        jobs: Option<usize>,
        /// Re-segment the index at each periodic date from data known then.
        #[arg(long)]
        walk_forward: bool,
    },
}

fn out_root() -> PathBuf {
    std::env::var_os("SSAAM_OUT").map_or_else(|| PathBuf::from("out"), PathBuf::from)
}

fn stage_dir(stage: &str) -> Result<PathBuf> {
    let dir = out_root().join(stage);
    fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

/// Writes to stdout; a reader that hung up early (`| head`) is not an error.
fn emit(text: &str) -> Result<()> {
    match std::io::stdout().lock().write_all(text.as_bytes()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn params_bytes<T: Serialize>(params: &T) -> Vec<u8> {
    serde_json::to_vec(params).expect("plain parameters serialize")
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| Error::Malformed(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

fn cmd_synth(seed: u64, assets: usize, days: usize, sentences: usize) -> Result<()> {
    if assets == 0 || days < 2 || sentences == 0 {
        return Err(Error::Config("synth needs assets >= 1, days >= 2, sentences >= 1".into()));
    }
    let cfg = MarketConfig {
        n_assets: assets,
        n_days: days,
        sentences_per_day: sentences,
        seed,
    };
    let market = synthetic_market(&cfg);
    let dir = stage_dir("synth")?;
    let mut m = RunManifest::new("synth", seed, &params_bytes(&(assets, days, sentences)));
    let prices = dir.join("prices.csv");
    market.prices.write_csv(create(&prices)?)?;
    m.output(&prices);
    let scores = dir.join("scores.csv");
    market.scores.write_csv(create(&scores)?)?;
    m.output(&scores);
    m.write(&dir)?;
    emit(&format!(
        "synth: {} assets x {} days, {} scores -> {}\n",
        assets,
        days,
        market.scores.len(),
        dir.display()
    ))?;
    Ok(())
}

fn cmd_polarity(seed: u64, scores: &Path, agg: Aggregation, out: Option<PathBuf>) -> Result<()> {
    let table = load_score_table(scores)?;
    let index = build_polarity_index(&table, agg)?;
    let dir = stage_dir("polarity")?;
    let path = out.unwrap_or_else(|| dir.join("index.csv"));
    write_series(&index.to_series(), "index", create(&path)?)?;

    let mut m = RunManifest::new("polarity", seed, &params_bytes(&agg));
    m.input(scores)?;
    m.output(&path);
    m.write(&dir)?;

    let lo = index.values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = index.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    emit(&format!(
        "polarity: {} scores over {} days ({:?}), index in [{lo}, {hi}] -> {}\n",
        table.len(),
        index.len(),
        agg,
        path.display()
    ))?;
    Ok(())
}

fn cmd_causal(seed: u64, prices_path: &Path, index_path: &Path, lag: usize, threshold: f64) -> Result<()> {
    if !(threshold >= 0.0) {
        return Err(Error::Config("threshold must be non-negative".into()));
    }
    let (prices, _) = load_price_table(prices_path)?;
    let index = PolarityIndex::from_series(load_series(index_path)?, Aggregation::Sum);
    let portfolio = build_equal_weight_portfolio(&prices)?;
    let panel = align_by_date(&index, &portfolio)?;
    let graph = var_lingam(&panel, lag, threshold, seed)?;
    let report = leading_effect(&graph, INDEX_VAR, PORTFOLIO_VAR)?;

    let dir = stage_dir("causal")?;
    let mut m = RunManifest::new("causal", seed, &params_bytes(&(lag, threshold)));
    m.input(prices_path)?;
    m.input(index_path)?;
    let graph_path = dir.join("graph.json");
    fs::write(&graph_path, to_json(&graph)?)?;
    m.output(&graph_path);
    let report_path = dir.join("lead.txt");
    let text = report.render();
    fs::write(&report_path, &text)?;
    m.output(&report_path);
    m.write(&dir)?;
    emit(&text)?;
    Ok(())
}

fn cmd_cpd(seed: u64, index_path: &Path, n_regimes: usize, min_size: usize, out: Option<PathBuf>) -> Result<()> {
    let index = load_series(index_path)?;
    let (bkps, regimes) = detect_regimes(&index.values, n_regimes, min_size)?;
    let dated = date_regimes(&index.dates, &regimes)?;
    let dir = stage_dir("cpd")?;
    let path = out.unwrap_or_else(|| dir.join("regimes.csv"));
    write_regimes(&dated, create(&path)?)?;

    let mut m = RunManifest::new("cpd", seed, &params_bytes(&(n_regimes, min_size)));
    m.input(index_path)?;
    m.output(&path);
    m.write(&dir)?;

    if bkps.zero_gain {
        eprintln!("warning: some breakpoints were placed with zero gain");
    }
    let mut text = format!("cpd: {} breakpoints, {} regimes -> {}\n", bkps.indexes.len(), dated.len(), path.display());
    for r in &dated {
        text.push_str(&format!("{}  {}  {}\n", r.start, r.end, r.trend));
    }
    emit(&text)?;
    Ok(())
}

#[derive(Serialize)]
struct RunDiagnostics<'a> {
    strategy: String,
    final_value: f64,
    bought: f64,
    sold: f64,
    distributions: f64,
    schedule: &'a RebalanceSchedule,
    decisions: &'a [Decision],
}

fn load_inputs(cfg: &RunConfig, base: &Path, seed: u64, m: &mut RunManifest) -> Result<(PriceTable, Series)> {
    match cfg.source(base, seed)? {
        DataSource::Synthetic(mc) => {
            let market = synthetic_market(&mc);
            let index = build_polarity_index(&market.scores, cfg.aggregation)?;
            Ok((market.prices, index.to_series()))
        }
        DataSource::Files { prices, index } => {
            let (table, stats) = load_price_table(&prices)?;
            m.input(&prices)?;
            if stats.dropped > 0 {
                eprintln!("warning: dropped {} unparseable price rows", stats.dropped);
            }
            let series = match index {
                IndexSource::Scores(p) => {
                    let s = build_polarity_index(&load_score_table(&p)?, cfg.aggregation)?.to_series();
                    m.input(&p)?;
                    s
                }
                IndexSource::Index(p) => {
                    let s = load_series(&p)?;
                    m.input(&p)?;
                    s
                }
            };
            Ok((table, series))
        }
    }
}

/// `date,<label>...` with a blank where a curve has no value.
fn curves_csv(labels: &[String], curves: &[(&[Date], &[f64])]) -> String {
    let mut by_date: BTreeMap<Date, Vec<Option<f64>>> = BTreeMap::new();
    for (k, (dates, values)) in curves.iter().enumerate() {
        for (d, v) in dates.iter().zip(values.iter()) {
            by_date.entry(*d).or_insert_with(|| vec![None; curves.len()])[k] = Some(*v);
        }
    }
    let mut s = String::from("date");
    for l in labels {
        s.push(',');
        s.push_str(l);
    }
    s.push('\n');
    for (d, row) in by_date {
        s.push_str(&d.to_string());
        for v in row {
            s.push(',');
            if let Some(v) = v {
                s.push_str(&v.to_string());
            }
        }
        s.push('\n');
    }
    s
}

fn cmd_backtest(seed: u64, config_path: &Path, dry_run: bool, jobs: Option<usize>, walk_forward: bool) -> Result<()> {
    if !config_path.exists() {
        return Err(Error::MissingFile(config_path.to_path_buf()));
    }
    let raw = fs::read(config_path)?;
    let text = std::str::from_utf8(&raw).map_err(|_| Error::Config("run config is not UTF-8".into()))?;
    let cfg = RunConfig::parse(text)?;
    let seed = cfg.seed.unwrap_or(seed);
    let mut grid = cfg.grid()?;
    grid.walk_forward |= walk_forward;
    if jobs == Some(0) {
        return Err(Error::Config("--jobs must be positive".into()));
    }
    if let Some(n) = jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::SolverFailure(format!("thread pool: {e}")))?;
    }

    let mut m = RunManifest::new("backtest", seed, &raw);
    let base = config_path.parent().unwrap_or(Path::new("."));
    let (prices, index) = load_inputs(&cfg, base, seed, &mut m)?;

    if dry_run {
        for (c, schedule) in resolve_schedules(&prices, &index, &grid)? {
            emit(&format!("== {} ({} rebalances)\n{}", c.label(), schedule.len(), schedule.render()))?;
        }
        return Ok(());
    }

    let allocator = SolverAllocator { backend: cfg.backend() };
    let runs = run_grid(&prices, &index, &grid, &allocator)?;
    let reports: Vec<_> = runs.iter().map(|r| r.report).collect();
    let table = report_grid(&reports)?;

    let dir = stage_dir("backtest")?;
    let mut diagnostics = Vec::with_capacity(runs.len());
    let mut labels = Vec::with_capacity(runs.len());
    let mut kept = 0;
    for r in &runs {
        let label = r.run.config.label();
        let run_dir = dir.join("runs").join(&label);
        let equity = run_dir.join("equity.csv");
        r.run.curve.write_csv(create(&equity)?)?;
        m.output(&equity);
        let weights = run_dir.join("weights.csv");
        r.run.write_weights(create(&weights)?)?;
        m.output(&weights);
        kept += r
            .run
            .decisions
            .iter()
            .filter(|d| matches!(d.outcome, Outcome::Kept { .. }))
            .count();
        diagnostics.push(RunDiagnostics {
            strategy: label.clone(),
            final_value: r.run.curve.final_value(),
            bought: r.run.curve.bought,
            sold: r.run.curve.sold,
            distributions: r.run.curve.distributions,
            schedule: &r.schedule,
            decisions: &r.run.decisions,
        });
        labels.push(label);
    }
    let curves: Vec<(&[Date], &[f64])> = runs
        .iter()
        .map(|r| (r.run.curve.dates.as_slice(), r.run.curve.values.as_slice()))
        .collect();
    let files = [
        ("curves.csv", curves_csv(&labels, &curves)),
        ("report.txt", table.text.clone()),
        ("report.csv", table.csv.clone()),
        ("diagnostics.json", to_json(&diagnostics)?),
    ];
    for (name, body) in &files {
        let path = dir.join(name);
        fs::write(&path, body)?;
        m.output(&path);
    }
    m.write(&dir)?;

    emit(&table.text)?;
    if kept > 0 {
        eprintln!("warning: {kept} rebalances kept the previous weights; see diagnostics.json");
    }
    emit(&format!("backtest: {} runs -> {}\n", runs.len(), dir.display()))?;
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth { assets, days, sentences } => cmd_synth(cli.seed, assets, days, sentences),
        Command::Polarity { scores, agg, out } => cmd_polarity(cli.seed, &scores, agg, out),
        Command::Causal {
            prices,
            index,
            lag,
            threshold,
        } => cmd_causal(cli.seed, &prices, &index, lag, threshold),
        Command::Cpd {
            index,
            regimes,
            min_size,
            out,
        } => cmd_cpd(cli.seed, &index, regimes, min_size, out),
        Command::Backtest {
            config,
            dry_run,
            jobs,
            walk_forward,
        } => cmd_backtest(cli.seed, &config, dry_run, jobs, walk_forward),
    }
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "error".into()),
        )
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_input_error() { 2 } else { 1 })
        }
    }
}
