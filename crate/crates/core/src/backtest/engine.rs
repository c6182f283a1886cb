use nalgebra::DMatrix;
use serde::Serialize;
use std::io::Write;
use tracing::warn;

use super::{select_optimizer, Mode, RebalanceSchedule, Source, StrategyConfig, DEFAULT_LOOKBACK};
use crate::cpd::Trend;
use crate::data::{Date, PriceTable};
use crate::error::{Error, Result};
use crate::optim::{self, Backend, PortfolioSolution, Program, ReturnsMatrix, SolveStatus};

/// Turns a mode and an estimation window into weights.
pub trait Allocator: Sync {
    fn allocate(&self, mode: Mode, window: &ReturnsMatrix, cfg: &StrategyConfig) -> Result<PortfolioSolution>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SolverAllocator {
    pub backend: Backend,
}

impl Allocator for SolverAllocator {
    fn allocate(&self, mode: Mode, r: &ReturnsMatrix, cfg: &StrategyConfig) -> Result<PortfolioSolution> {
        let means = r.means();
        let mu = cfg
            .mu_target
            .unwrap_or_else(|| means.iter().sum::<f64>() / means.len() as f64);
        let solve = |p| optim::solve(p, r, cfg.alpha, self.backend);
        match mode {
            Mode::MinEvarTarget => solve(Program::MinEvar { mu_target: Some(mu) }),
            Mode::MinEvarFree => solve(Program::MinEvar { mu_target: None }),
            Mode::MaxReturnEvar => {
                let cap = match cfg.evar_cap {
                    Some(c) => c,
                    None => {
                        let m = solve(Program::MinEvar { mu_target: None })?.objective;
                        m + 0.5 * m.abs()
                    }
                };
                solve(Program::MaxReturnEvar { evar_cap: cap })
            }
            Mode::MinCvar => solve(Program::MinCvar { mu_target: Some(mu) }),
            Mode::MinVariance => solve(Program::MinVariance { mu_target: Some(mu) }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BacktestSettings {
    pub initial_capital: f64,
    /// Trading days of returns used to estimate each allocation.
    pub lookback: usize,
}

impl Default for BacktestSettings {
    fn default() -> Self {
        BacktestSettings {
            initial_capital: 1.0,
            lookback: DEFAULT_LOOKBACK,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trade {
    pub date: Date,
    pub old_weights: Vec<f64>,
    pub new_weights: Vec<f64>,
    pub pre_value: f64,
    pub post_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquityCurve {
    pub dates: Vec<Date>,
    pub values: Vec<f64>,
    pub initial_capital: f64,
    /// Cumulative purchases, including the initial allocation.
    pub bought: f64,
    pub sold: f64,
    pub distributions: f64,
    pub trades: Vec<Trade>,
}

impl EquityCurve {
    /// A curve with only the initial purchase, for metrics on plain series.
    pub fn from_values(dates: Vec<Date>, values: Vec<f64>) -> Result<Self> {
        if values.is_empty() || dates.len() != values.len() {
            return Err(Error::Dimension("curve needs matching, non-empty dates and values".into()));
        }
        if values.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::NonFinite("curve values"));
        }
        Ok(EquityCurve {
            dates,
            initial_capital: values[0],
            bought: values[0],
            values,
            sold: 0.0,
            distributions: 0.0,
            trades: Vec::new(),
        })
    }

    pub fn final_value(&self) -> f64 {
        *self.values.last().expect("non-empty curve")
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["date", "value"])?;
        for (d, v) in self.dates.iter().zip(&self.values) {
            w.write_record([d.to_string(), v.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// (valuation + distributions + sold − bought) / initial × 100.
pub fn total_return(curve: &EquityCurve) -> f64 {
    (curve.final_value() + curve.distributions + curve.sold - curve.bought) / curve.initial_capital * 100.0
}

/// Worst decline from a running peak, in percent (≤ 0).
pub fn max_drawdown(curve: &EquityCurve) -> f64 {
    let mut peak = f64::NEG_INFINITY;
    let mut worst: f64 = 0.0;
    for &v in &curve.values {
        peak = peak.max(v);
        worst = worst.min((v - peak) / peak * 100.0);
    }
    worst
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum Outcome {
    Rebalanced,
    /// Not a rebalance date for this strategy.
    Skipped,
    /// The solve failed; previous weights were kept.
    Kept { reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Decision {
    pub date: Date,
    pub source: Source,
    pub trend: Option<Trend>,
    pub mode: Option<Mode>,
    #[serde(flatten)]
    pub outcome: Outcome,
    pub weights: Vec<f64>,
    pub objective: Option<f64>,
    pub status: Option<SolveStatus>,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BacktestRun {
    pub config: StrategyConfig,
    pub tickers: Vec<String>,
    pub curve: EquityCurve,
    pub decisions: Vec<Decision>,
}

impl BacktestRun {
    /// `date,ticker,weight` for every executed rebalance.
    pub fn write_weights<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["date", "ticker", "weight"])?;
        for d in self.decisions.iter().filter(|d| d.outcome == Outcome::Rebalanced) {
            for (t, x) in self.tickers.iter().zip(&d.weights) {
                w.write_record([d.date.to_string(), t.clone(), x.to_string()])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Simple returns over the `lookback` days ending at row `t`.
fn window(prices: &PriceTable, t: usize, lookback: usize) -> Result<ReturnsMatrix> {
    let start = t - lookback;
    let n = prices.n_assets();
    ReturnsMatrix::new(DMatrix::from_fn(lookback, n, |k, i| {
        prices.price(start + k + 1, i) / prices.price(start + k, i) - 1.0
    }))
}

fn valuation(prices: &PriceTable, t: usize, holdings: &[f64]) -> f64 {
    holdings.iter().enumerate().map(|(i, h)| h * prices.price(t, i)).sum()
}

/// Holds equal weights from the first schedule date, then trades to the
/// allocator's weights at each entry the strategy acts on. Each decision
/// only sees prices up to its own date.
pub fn run_backtest(
    prices: &PriceTable,
    schedule: &RebalanceSchedule,
    cfg: &StrategyConfig,
    settings: &BacktestSettings,
    allocator: &dyn Allocator,
) -> Result<BacktestRun> {
    cfg.validate()?;
    if !(settings.initial_capital.is_finite() && settings.initial_capital > 0.0) {
        return Err(Error::Config("initial capital must be positive".into()));
    }
    if settings.lookback < 2 {
        return Err(Error::Config("lookback must be at least 2 days".into()));
    }
    let first_entry = schedule.entries.first().ok_or(Error::EmptyCalendar)?;
    let dates = prices.dates();
    let locate = |d: Date| {
        dates
            .binary_search(&d)
            .map_err(|_| Error::Config(format!("schedule date {d} is not a trading date")))
    };
    let start = locate(first_entry.date)?;
    if start < settings.lookback {
        return Err(Error::InsufficientHistory {
            lookback: settings.lookback,
            available: start,
        });
    }
    let mut at = vec![None; dates.len()];
    for e in &schedule.entries {
        let t = locate(e.date)?;
        if t < start {
            return Err(Error::Config("schedule is not sorted".into()));
        }
        at[t] = Some(*e);
    }

    let n = prices.n_assets();
    let cap = settings.initial_capital;
    let mut holdings: Vec<f64> = (0..n).map(|i| cap / n as f64 / prices.price(start, i)).collect();
    let mut curve = EquityCurve {
        dates: Vec::with_capacity(dates.len() - start),
        values: Vec::with_capacity(dates.len() - start),
        initial_capital: cap,
        bought: cap,
        sold: 0.0,
        distributions: 0.0,
        trades: Vec::new(),
    };
    let mut decisions = Vec::new();

    for t in start..dates.len() {
        let mut value = valuation(prices, t, &holdings);
        if let Some(entry) = at[t] {
            let current: Vec<f64> = (0..n).map(|i| holdings[i] * prices.price(t, i) / value).collect();
            let mode = select_optimizer(cfg.kind, &entry);
            let mut decision = Decision {
                date: entry.date,
                source: entry.source,
                trend: entry.trend,
                mode,
                outcome: Outcome::Skipped,
                weights: current.clone(),
                objective: None,
                status: None,
                iterations: 0,
            };
            if let Some(mode) = mode {
                let solved = window(prices, t, settings.lookback).and_then(|r| allocator.allocate(mode, &r, cfg));
                match solved {
                    Ok(sol) => {
                        let target: Vec<f64> = holdings_for(&sol.weights, value, prices, t);
                        for i in 0..n {
                            let delta = (target[i] - holdings[i]) * prices.price(t, i);
                            if delta > 0.0 {
                                curve.bought += delta;
                            } else {
                                curve.sold -= delta;
                            }
                        }
                        holdings = target;
                        let post = valuation(prices, t, &holdings);
                        curve.trades.push(Trade {
                            date: entry.date,
                            old_weights: current,
                            new_weights: sol.weights.clone(),
                            pre_value: value,
                            post_value: post,
                        });
                        value = post;
                        decision.outcome = Outcome::Rebalanced;
                        decision.weights = sol.weights;
                        decision.objective = Some(sol.objective);
                        decision.status = Some(sol.status);
                        decision.iterations = sol.iterations;
                    }
                    Err(e @ (Error::Infeasible(_) | Error::SolverFailure(_) | Error::NoConvergence(..))) => {
                        warn!(date = %entry.date, strategy = %cfg.label(), error = %e, "keeping previous weights");
                        decision.outcome = Outcome::Kept { reason: e.to_string() };
                    }
                    Err(e) => return Err(e),
                }
            }
            decisions.push(decision);
        }
        curve.dates.push(dates[t]);
        curve.values.push(value);
    }

    Ok(BacktestRun {
        config: *cfg,
        tickers: prices.tickers().to_vec(),
        curve,
        decisions,
    })
}

fn holdings_for(weights: &[f64], value: f64, prices: &PriceTable, t: usize) -> Vec<f64> {
    weights
        .iter()
        .enumerate()
        .map(|(i, w)| w * value / prices.price(t, i))
        .collect()
}
