use serde::Serialize;
use std::fmt::Write as _;

use super::{max_drawdown, total_return, EquityCurve, StrategyConfig, StrategyKind};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PerfReport {
    pub strategy: StrategyConfig,
    pub tr_pct: f64,
    /// Signed, ≤ 0; tables show the magnitude.
    pub mdd_pct: f64,
}

impl PerfReport {
    pub fn from_curve(strategy: StrategyConfig, curve: &EquityCurve) -> Self {
        PerfReport {
            strategy,
            tr_pct: total_return(curve),
            mdd_pct: max_drawdown(curve),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GridReport {
    pub text: String,
    pub csv: String,
}

fn order(k: StrategyKind) -> usize {
    StrategyKind::ALL.iter().position(|x| *x == k).expect("listed")
}

fn fmt4(v: f64) -> String {
    // Avoid printing "-0.0000".
    let s = format!("{v:.4}");
    if s == "-0.0000" {
        "0.0000".into()
    } else {
        s
    }
}

struct Table<'a> {
    title: &'a str,
    with_regime: bool,
    rows: Vec<&'a PerfReport>,
}

impl Table<'_> {
    fn best(&self) -> (f64, f64) {
        let tr = self.rows.iter().map(|r| r.tr_pct).fold(f64::NEG_INFINITY, f64::max);
        let mdd = self.rows.iter().map(|r| r.mdd_pct).fold(f64::NEG_INFINITY, f64::max);
        (tr, mdd)
    }

    fn render(&self, text: &mut String, csv: &mut String, tag: &str) {
        let (best_tr, best_mdd) = self.best();
        let _ = writeln!(text, "{}", self.title);
        if self.with_regime {
            let _ = writeln!(text, "{:<10} {:<7} {:<11} {:>13} {:>13}", "Rebalance", "Regime", "Algorithm", "TR [%]", "MDD [%]");
        } else {
            let _ = writeln!(text, "{:<10} {:<11} {:>13} {:>13}", "Rebalance", "Algorithm", "TR [%]", "MDD [%]");
        }
        for r in &self.rows {
            let s = &r.strategy;
            let is_tr = r.tr_pct == best_tr;
            let is_mdd = r.mdd_pct == best_mdd;
            let tr = format!("{}{}", fmt4(r.tr_pct), if is_tr { "*" } else { " " });
            let mdd = format!("{}{}", fmt4(r.mdd_pct.abs()), if is_mdd { "*" } else { " " });
            let regime = s.n_regimes.map(|n| n.to_string()).unwrap_or_default();
            if self.with_regime {
                let _ = writeln!(text, "{:<10} {:<7} {:<11} {:>13} {:>13}", s.period_days, regime, s.kind.name(), tr, mdd);
            } else {
                let _ = writeln!(text, "{:<10} {:<11} {:>13} {:>13}", s.period_days, s.kind.name(), tr, mdd);
            }
            let _ = writeln!(
                csv,
                "{tag},{},{regime},{},{},{},{},{}",
                s.period_days,
                s.kind.name(),
                fmt4(r.tr_pct),
                fmt4(r.mdd_pct.abs()),
                is_tr,
                is_mdd
            );
        }
        text.push_str("* best in table\n");
    }
}

/// Change-point strategies grouped by period then regime count, followed
/// by the comparison strategies grouped by period. TR and MDD to four
/// decimals, MDD as a magnitude, best values starred.
pub fn report_grid(results: &[PerfReport]) -> Result<GridReport> {
    if results.is_empty() {
        return Err(Error::Config("nothing to report".into()));
    }
    let mut cpd: Vec<&PerfReport> = results.iter().filter(|r| r.strategy.kind.uses_regimes()).collect();
    let mut cmp: Vec<&PerfReport> = results.iter().filter(|r| !r.strategy.kind.uses_regimes()).collect();
    cpd.sort_by_key(|r| (r.strategy.period_days, r.strategy.n_regimes, order(r.strategy.kind)));
    cmp.sort_by_key(|r| (r.strategy.period_days, order(r.strategy.kind)));

    let mut text = String::new();
    let mut csv = String::from("table,rebalance,regime,algorithm,tr_pct,mdd_pct,best_tr,best_mdd\n");
    let tables = [
        Table { title: "Change-point strategies", with_regime: true, rows: cpd },
        Table { title: "Comparison strategies", with_regime: false, rows: cmp },
    ];
    let mut first = true;
    for (t, tag) in tables.iter().zip(["cpd", "comparison"]) {
        if t.rows.is_empty() {
            continue;
        }
        if !first {
            text.push('\n');
        }
        first = false;
        t.render(&mut text, &mut csv, tag);
    }
    Ok(GridReport { text, csv })
}
