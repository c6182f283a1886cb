use serde::Deserialize;
use std::path::{Path, PathBuf};

use ssaam_core::backtest::{BacktestSettings, GridConfig, StrategyKind, DEFAULT_ALPHA, DEFAULT_LOOKBACK};
use ssaam_core::cpd::DEFAULT_MIN_SIZE;
use ssaam_core::optim::Backend;
use ssaam_core::sentiment::Aggregation;
use ssaam_core::synth::MarketConfig;
use ssaam_core::{Error, Result};

/// Generated inputs in place of price and score files.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    #[serde(default = "default_assets")]
    pub assets: usize,
    #[serde(default = "default_days")]
    pub days: usize,
    #[serde(default = "default_sentences")]
    pub sentences_per_day: usize,
}

fn default_assets() -> usize {
    MarketConfig::default().n_assets
}
fn default_days() -> usize {
    MarketConfig::default().n_days
}
fn default_sentences() -> usize {
    MarketConfig::default().sentences_per_day
}
fn default_strategies() -> Vec<String> {
    StrategyKind::ALL.iter().map(|k| k.name().to_string()).collect()
}
fn default_periods() -> Vec<usize> {
    vec![30, 90, 180]
}
fn default_regimes() -> Vec<usize> {
    vec![5, 10]
}
fn default_alpha() -> f64 {
    DEFAULT_ALPHA
}
fn default_lookback() -> usize {
    DEFAULT_LOOKBACK
}
fn default_capital() -> f64 {
    1.0
}
fn default_min_size() -> usize {
    DEFAULT_MIN_SIZE
}

#[derive(Debug, Clone, Copy, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendName {
    #[default]
    Conic,
    FirstOrder,
}

/// Backtest run file. Relative paths resolve against the file's directory.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub prices: Option<PathBuf>,
    /// Score CSV; the index is built from it with `aggregation`.
    pub scores: Option<PathBuf>,
    /// A ready-made polarity index CSV, instead of `scores`.
    pub index: Option<PathBuf>,
    pub synthetic: Option<SyntheticSpec>,
    #[serde(default)]
    pub aggregation: Aggregation,
    #[serde(default = "default_strategies")]
    pub strategies: Vec<String>,
    #[serde(default = "default_periods")]
    pub periods: Vec<usize>,
    #[serde(default = "default_regimes")]
    pub regimes: Vec<usize>,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    pub mu_target: Option<f64>,
    pub evar_cap: Option<f64>,
    #[serde(default = "default_lookback")]
    pub lookback: usize,
    #[serde(default = "default_capital")]
    pub initial_capital: f64,
    #[serde(default = "default_min_size")]
    pub min_size: usize,
    #[serde(default)]
    pub walk_forward: bool,
    pub seed: Option<u64>,
    #[serde(default)]
    pub backend: BackendName,
}

pub enum DataSource {
    Synthetic(MarketConfig),
    Files {
        prices: PathBuf,
        index: IndexSource,
    },
}

pub enum IndexSource {
    Scores(PathBuf),
    Index(PathBuf),
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("run config: {e}")))
    }

    pub fn backend(&self) -> Backend {
        match self.backend {
            BackendName::Conic => Backend::Conic,
            BackendName::FirstOrder => Backend::FirstOrder,
        }
    }

    pub fn grid(&self) -> Result<GridConfig> {
        let strategies = self
            .strategies
            .iter()
            .map(|s| s.parse::<StrategyKind>())
            .collect::<Result<Vec<_>>>()?;
        if matches!(self.backend, BackendName::FirstOrder)
            && strategies.iter().any(|k| matches!(k, StrategyKind::Cvar | StrategyKind::Mv))
        {
            return Err(Error::Config("the first_order backend solves only the EVaR programs".into()));
        }
        if self.lookback < 2 {
            return Err(Error::Config("lookback must be at least 2".into()));
        }
        if !(self.initial_capital > 0.0 && self.initial_capital.is_finite()) {
            return Err(Error::Config("initial capital must be positive".into()));
        }
        if self.min_size == 0 {
            return Err(Error::Config("min_size must be positive".into()));
        }
        let grid = GridConfig {
            strategies,
            periods: self.periods.clone(),
            regimes: self.regimes.clone(),
            alpha: self.alpha,
            mu_target: self.mu_target,
            evar_cap: self.evar_cap,
            settings: BacktestSettings {
                initial_capital: self.initial_capital,
                lookback: self.lookback,
            },
            walk_forward: self.walk_forward,
            min_size: self.min_size,
        };
        grid.configs()?;
        Ok(grid)
    }

    pub fn source(&self, base: &Path, seed: u64) -> Result<DataSource> {
        let resolve = |p: &PathBuf| if p.is_absolute() { p.clone() } else { base.join(p) };
        match (&self.synthetic, &self.prices, &self.scores, &self.index) {
            (Some(s), None, None, None) => Ok(DataSource::Synthetic(MarketConfig {
                n_assets: s.assets,
                n_days: s.days,
                sentences_per_day: s.sentences_per_day,
                seed,
            })),
            (None, Some(p), Some(s), None) => Ok(DataSource::Files {
                prices: resolve(p),
                index: IndexSource::Scores(resolve(s)),
            }),
            (None, Some(p), None, Some(i)) => Ok(DataSource::Files {
                prices: resolve(p),
                index: IndexSource::Index(resolve(i)),
            }),
            _ => Err(Error::Config(
                "give either `synthetic`, or `prices` with exactly one of `scores` and `index`".into(),
            )),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_give_full_grid() {
        let c = RunConfig::parse(r#"{"synthetic": {}}"#).unwrap();
        assert_eq!(c.grid().unwrap().configs().unwrap().len(), 21);
        assert!(matches!(c.source(Path::new("."), 0).unwrap(), DataSource::Synthetic(_)));
    }

    #[test]
    fn unknown_fields_and_strategies_are_config_errors() {
        assert!(matches!(RunConfig::parse(r#"{"synthetic": {}, "typo": 1}"#), Err(Error::Config(_))));
        let c = RunConfig::parse(r#"{"synthetic": {}, "strategies": ["EVaR", "Kelly"]}"#).unwrap();
        assert!(matches!(c.grid(), Err(Error::Config(_))));
    }

    #[test]
    fn first_order_backend_only_for_evar() {
        let c = RunConfig::parse(r#"{"synthetic": {}, "backend": "first_order"}"#).unwrap();
        assert!(matches!(c.grid(), Err(Error::Config(_))));
        let c = RunConfig::parse(r#"{"synthetic": {}, "backend": "first_order", "strategies": ["EVaR"]}"#).unwrap();
        assert!(c.grid().is_ok());
    }

    #[test]
    fn paths_resolve_against_config_dir() {
        let c = RunConfig::parse(r#"{"prices": "p.csv", "index": "/abs/i.csv"}"#).unwrap();
        match c.source(Path::new("/cfg"), 0).unwrap() {
            DataSource::Files { prices, index: IndexSource::Index(i) } => {
                assert_eq!(prices, Path::new("/cfg/p.csv"));
                assert_eq!(i, Path::new("/abs/i.csv"));
            }
            _ => panic!("wrong source"),
        }
    }

    #[test]
    fn ambiguous_sources_rejected() {
        let c = RunConfig::parse(r#"{"prices": "p.csv", "index": "i.csv", "scores": "s.csv"}"#).unwrap();
        assert!(c.source(Path::new("."), 0).is_err());
        let c = RunConfig::parse(r#"{}"#).unwrap();
        assert!(c.source(Path::new("."), 0).is_err());
    }
}
