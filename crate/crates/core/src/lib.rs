//! Sentiment-driven asset allocation.
//!
//! The pipeline runs in four stages, each in its own module:
//!
//! 1. [`sentiment`]: quartile-threshold sentence scores into {-1, 0, +1}
//!    labels and aggregate them into a daily polarity index.
//! 2. [`causal`]: VAR-LiNGAM over the index and an equal-weight portfolio,
//!    to check that the index leads the portfolio.
//! 3. [`cpd`]: binary segmentation of the index into trend-labelled regimes.
//! 4. [`optim`] and [`backtest`]: EVaR allocation switched by regime,
//!    backtested against CVaR and mean-variance baselines.
//!
//! [`data`] holds the file formats and calendar alignment shared by all
//! stages; [`synth`] generates seeded synthetic inputs.

pub mod backtest;
pub mod causal;
pub mod cpd;
pub mod data;
pub mod error;
pub mod optim;
pub mod sentiment;
pub mod synth;

pub use error::{Error, Result};
