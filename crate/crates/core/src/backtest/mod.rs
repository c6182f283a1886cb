//! Rebalance schedules, strategy dispatch, the valuation engine and the
//! performance tables.

mod engine;
mod grid;
mod report;

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::cpd::{DatedRegime, Trend};
use crate::data::Date;
use crate::error::{Error, Result};

pub use engine::{
    max_drawdown, run_backtest, total_return, Allocator, BacktestRun, BacktestSettings, Decision,
    EquityCurve, Outcome, SolverAllocator, Trade,
};
pub use grid::{resolve_schedules, run_grid, GridConfig, GridRun};
pub use report::{report_grid, GridReport, PerfReport};

pub const DEFAULT_LOOKBACK: usize = 252;
pub const DEFAULT_ALPHA: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Periodic,
    ChangePoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScheduleEntry {
    pub date: Date,
    pub source: Source,
    /// Trend of the regime starting here; only for change points.
    pub trend: Option<Trend>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RebalanceSchedule {
    pub entries: Vec<ScheduleEntry>,
}

impl RebalanceSchedule {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn render(&self) -> String {
        let mut s = String::from("date        source        trend\n");
        for e in &self.entries {
            let src = match e.source {
                Source::Periodic => "periodic",
                Source::ChangePoint => "change-point",
            };
            let trend = e.trend.map_or("-".to_string(), |t| t.to_string());
            s.push_str(&format!("{}  {src:<12}  {trend}\n", e.date));
        }
        s
    }
}

/// Every `period_days`-th date of `dates` (starting with the first) merged
/// with the first date on or after each regime start. Regimes starting
/// outside `dates` are dropped; a change point landing on a periodic date
/// replaces it.
pub fn build_schedule(dates: &[Date], period_days: usize, regimes: &[DatedRegime]) -> Result<RebalanceSchedule> {
    if dates.is_empty() {
        return Err(Error::EmptyCalendar);
    }
    if period_days == 0 {
        return Err(Error::Config("rebalance period must be positive".into()));
    }
    let mut slots: Vec<Option<ScheduleEntry>> = vec![None; dates.len()];
    for k in (0..dates.len()).step_by(period_days) {
        slots[k] = Some(ScheduleEntry {
            date: dates[k],
            source: Source::Periodic,
            trend: None,
        });
    }
    let first = dates[0];
    let last = *dates.last().expect("non-empty");
    for r in regimes {
        if r.start < first || r.start > last {
            continue;
        }
        let k = dates.partition_point(|d| *d < r.start);
        slots[k] = Some(ScheduleEntry {
            date: dates[k],
            source: Source::ChangePoint,
            trend: Some(r.trend),
        });
    }
    Ok(RebalanceSchedule {
        entries: slots.into_iter().flatten().collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum StrategyKind {
    #[serde(rename = "CPD-EVaR++")]
    CpdEvarPlusPlus,
    #[serde(rename = "CPD-EVaR+")]
    CpdEvarPlus,
    #[serde(rename = "EVaR")]
    Evar,
    #[serde(rename = "CVaR")]
    Cvar,
    #[serde(rename = "MV")]
    Mv,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 5] = [
        StrategyKind::CpdEvarPlusPlus,
        StrategyKind::CpdEvarPlus,
        StrategyKind::Evar,
        StrategyKind::Cvar,
        StrategyKind::Mv,
    ];

    pub fn uses_regimes(self) -> bool {
        matches!(self, StrategyKind::CpdEvarPlusPlus | StrategyKind::CpdEvarPlus)
    }

    pub fn name(self) -> &'static str {
        match self {
            StrategyKind::CpdEvarPlusPlus => "CPD-EVaR++",
            StrategyKind::CpdEvarPlus => "CPD-EVaR+",
            StrategyKind::Evar => "EVaR",
            StrategyKind::Cvar => "CVaR",
            StrategyKind::Mv => "MV",
        }
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StrategyKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        StrategyKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::Config(format!("unknown strategy {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StrategyConfig {
    pub kind: StrategyKind,
    pub period_days: usize,
    pub n_regimes: Option<usize>,
    pub alpha: f64,
    /// Return floor; defaults per window to the mean of the asset means.
    pub mu_target: Option<f64>,
    /// EVaR budget for the max-return program; defaults per window to the
    /// minimum EVaR plus half its magnitude.
    pub evar_cap: Option<f64>,
}

impl StrategyConfig {
    pub fn new(kind: StrategyKind, period_days: usize, n_regimes: Option<usize>) -> Result<Self> {
        let cfg = StrategyConfig {
            kind,
            period_days,
            n_regimes,
            alpha: DEFAULT_ALPHA,
            mu_target: None,
            evar_cap: None,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.kind.uses_regimes() != self.n_regimes.is_some() {
            return Err(Error::Config(format!(
                "{}: a regime count is required for change-point strategies and only for them",
                self.kind
            )));
        }
        if self.n_regimes == Some(0) {
            return Err(Error::Config("regime count must be positive".into()));
        }
        if self.period_days == 0 {
            return Err(Error::Config("rebalance period must be positive".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidAlpha(self.alpha));
        }
        Ok(())
    }

    pub fn label(&self) -> String {
        match self.n_regimes {
            Some(r) => format!("{}_p{}_r{}", self.kind, self.period_days, r),
            None => format!("{}_p{}", self.kind, self.period_days),
        }
    }
}

/// Which program a schedule entry calls for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Minimum EVaR subject to the return floor.
    MinEvarTarget,
    /// Minimum EVaR with no return constraint.
    MinEvarFree,
    MaxReturnEvar,
    MinCvar,
    MinVariance,
}

/// `None` means the entry is not a rebalance for this strategy.
pub fn select_optimizer(kind: StrategyKind, entry: &ScheduleEntry) -> Option<Mode> {
    use StrategyKind::*;
    match (kind, entry.source, entry.trend) {
        (CpdEvarPlusPlus, Source::ChangePoint, Some(Trend::Down)) => Some(Mode::MaxReturnEvar),
        (CpdEvarPlus, Source::ChangePoint, Some(Trend::Down)) => Some(Mode::MinEvarFree),
        (CpdEvarPlusPlus | CpdEvarPlus, _, _) => Some(Mode::MinEvarTarget),
        (_, Source::ChangePoint, _) => None,
        (Evar, Source::Periodic, _) => Some(Mode::MinEvarTarget),
        (Cvar, Source::Periodic, _) => Some(Mode::MinCvar),
        (Mv, Source::Periodic, _) => Some(Mode::MinVariance),
    }
}
