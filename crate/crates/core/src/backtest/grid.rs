use rayon::prelude::*;
use serde::Serialize;
use std::collections::BTreeMap;
use tracing::info;

use super::{
    build_schedule, run_backtest, Allocator, BacktestRun, BacktestSettings, PerfReport, RebalanceSchedule,
    ScheduleEntry, Source, StrategyConfig, StrategyKind, DEFAULT_ALPHA,
};
use crate::cpd::{date_regimes, detect_regimes, DatedRegime, DEFAULT_MIN_SIZE};
use crate::data::{Date, PriceTable, Series};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridConfig {
    pub strategies: Vec<StrategyKind>,
    pub periods: Vec<usize>,
    pub regimes: Vec<usize>,
    pub alpha: f64,
    pub mu_target: Option<f64>,
    pub evar_cap: Option<f64>,
    pub settings: BacktestSettings,
    /// Re-detect regimes at each periodic date from the index up to that
    /// date instead of segmenting the whole index once.
    pub walk_forward: bool,
    pub min_size: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            strategies: StrategyKind::ALL.to_vec(),
            periods: vec![30, 90, 180],
            regimes: vec![5, 10],
            alpha: DEFAULT_ALPHA,
            mu_target: None,
            evar_cap: None,
            settings: BacktestSettings::default(),
            walk_forward: false,
            min_size: DEFAULT_MIN_SIZE,
        }
    }
}

impl GridConfig {
    /// Every configuration, change-point strategies first, in table order.
    pub fn configs(&self) -> Result<Vec<StrategyConfig>> {
        let mut kinds = self.strategies.clone();
        kinds.sort();
        kinds.dedup();
        let mut out = Vec::new();
        let mut push = |kind, period_days, n_regimes| -> Result<()> {
            let cfg = StrategyConfig {
                kind,
                period_days,
                n_regimes,
                alpha: self.alpha,
                mu_target: self.mu_target,
                evar_cap: self.evar_cap,
            };
            cfg.validate()?;
            out.push(cfg);
            Ok(())
        };
        for &p in &self.periods {
            for &r in &self.regimes {
                for &k in kinds.iter().filter(|k| k.uses_regimes()) {
                    push(k, p, Some(r))?;
                }
            }
        }
        for &p in &self.periods {
            for &k in kinds.iter().filter(|k| !k.uses_regimes()) {
                push(k, p, None)?;
            }
        }
        if out.is_empty() {
            return Err(Error::Config("empty strategy grid".into()));
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridRun {
    pub schedule: RebalanceSchedule,
    pub run: BacktestRun,
    pub report: PerfReport,
}

/// Final regime of the segmentation of `index` up to `date`.
fn latest_regime(index: &Series, date: Date, n_regimes: usize, min_size: usize) -> Option<DatedRegime> {
    let end = index.dates.partition_point(|d| *d <= date);
    let (_, regimes) = detect_regimes(&index.values[..end], n_regimes, min_size).ok()?;
    let dated = date_regimes(&index.dates[..end], &regimes).ok()?;
    dated.last().copied()
}

/// Periodic dates only; a periodic date becomes a change point when the
/// regime containing it, as segmented from the index known at that date,
/// began after the previous periodic date.
fn walk_forward_schedule(
    dates: &[Date],
    period_days: usize,
    index: &Series,
    n_regimes: usize,
    min_size: usize,
) -> Result<RebalanceSchedule> {
    let periodic = build_schedule(dates, period_days, &[])?;
    let mut entries: Vec<ScheduleEntry> = Vec::with_capacity(periodic.len());
    let mut prev: Option<Date> = None;
    for e in periodic.entries {
        let mut entry = e;
        if let (Some(p), Some(r)) = (prev, latest_regime(index, e.date, n_regimes, min_size)) {
            if r.start > p {
                entry.source = Source::ChangePoint;
                entry.trend = Some(r.trend);
            }
        }
        prev = Some(e.date);
        entries.push(entry);
    }
    Ok(RebalanceSchedule { entries })
}

/// Every configuration of the grid with its rebalance schedule, in
/// [`GridConfig::configs`] order. Nothing is solved.
pub fn resolve_schedules(
    prices: &PriceTable,
    index: &Series,
    grid: &GridConfig,
) -> Result<Vec<(StrategyConfig, RebalanceSchedule)>> {
    let configs = grid.configs()?;
    let lookback = grid.settings.lookback;
    if prices.n_dates() <= lookback {
        return Err(Error::InsufficientHistory {
            lookback,
            available: prices.n_dates().saturating_sub(1),
        });
    }
    let tradable = &prices.dates()[lookback..];

    let mut regimes: BTreeMap<usize, Vec<DatedRegime>> = BTreeMap::new();
    if !grid.walk_forward {
        for c in &configs {
            if let Some(r) = c.n_regimes {
                if let std::collections::btree_map::Entry::Vacant(slot) = regimes.entry(r) {
                    let (_, found) = detect_regimes(&index.values, r, grid.min_size)?;
                    slot.insert(date_regimes(&index.dates, &found)?);
                }
            }
        }
    }

    configs
        .par_iter()
        .map(|cfg| {
            let schedule = match cfg.n_regimes {
                Some(r) if grid.walk_forward => {
                    walk_forward_schedule(tradable, cfg.period_days, index, r, grid.min_size)?
                }
                Some(r) => build_schedule(tradable, cfg.period_days, &regimes[&r])?,
                None => build_schedule(tradable, cfg.period_days, &[])?,
            };
            Ok((*cfg, schedule))
        })
        .collect()
}

/// Runs every configuration of the grid, in parallel, returning results
/// in [`GridConfig::configs`] order.
pub fn run_grid(
    prices: &PriceTable,
    index: &Series,
    grid: &GridConfig,
    allocator: &dyn Allocator,
) -> Result<Vec<GridRun>> {
    resolve_schedules(prices, index, grid)?
        .into_par_iter()
        .map(|(cfg, schedule)| {
            let run = run_backtest(prices, &schedule, &cfg, &grid.settings, allocator)?;
            let report = PerfReport::from_curve(cfg, &run.curve);
            info!(strategy = %cfg.label(), tr = report.tr_pct, mdd = report.mdd_pct, "backtest done");
            Ok(GridRun { schedule, run, report })
        })
        .collect()
}
