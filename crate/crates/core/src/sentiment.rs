//! Quartile thresholding of sentence scores into {-1, 0, +1} labels and the
//! daily polarity index built from them.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::data::{Date, ScoreTable, Series};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quartiles {
    pub q1: f64,
    pub q3: f64,
}

/// Linear-interpolation quantile at `p` on an ascending sample: the value at
/// 1-based position `1 + (n - 1) p`.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    let frac = h - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

pub fn compute_quartiles(scores: &[f64]) -> Result<Quartiles> {
    if scores.len() < 4 {
        return Err(Error::TooFewScores(scores.len()));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::NonFinite("scores"));
    }
    let mut sorted = scores.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(Quartiles {
        q1: quantile_sorted(&sorted, 0.25),
        q3: quantile_sorted(&sorted, 0.75),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PolarityLabel {
    Negative,
    Neutral,
    Positive,
}

impl PolarityLabel {
    pub fn value(self) -> i8 {
        match self {
            PolarityLabel::Negative => -1,
            PolarityLabel::Neutral => 0,
            PolarityLabel::Positive => 1,
        }
    }
}

impl fmt::Display for PolarityLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.value())
    }
}

/// Both quartiles are inclusive bounds of the neutral band.
pub fn classify_polarity(pll: f64, q: Quartiles) -> PolarityLabel {
    if pll > q.q3 {
        PolarityLabel::Positive
    } else if pll < q.q1 {
        PolarityLabel::Negative
    } else {
        PolarityLabel::Neutral
    }
}

/// How labels of one day collapse into the index value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregation {
    #[default]
    Sum,
    Mean,
}

impl std::str::FromStr for Aggregation {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sum" => Ok(Aggregation::Sum),
            "mean" => Ok(Aggregation::Mean),
            other => Err(Error::Config(format!("unknown aggregation {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolarityIndex {
    pub dates: Vec<Date>,
    pub values: Vec<f64>,
    pub aggregation: Aggregation,
}

impl PolarityIndex {
    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    pub fn to_series(&self) -> Series {
        Series {
            dates: self.dates.clone(),
            values: self.values.clone(),
        }
    }

    pub fn from_series(series: Series, aggregation: Aggregation) -> Self {
        PolarityIndex {
            dates: series.dates,
            values: series.values,
            aggregation,
        }
    }
}

/// Labels every sentence against quartiles of the whole table, then sums
/// (or averages) the labels per date.
pub fn build_polarity_index(scores: &ScoreTable, aggregation: Aggregation) -> Result<PolarityIndex> {
    let plls: Vec<f64> = scores.rows.iter().map(|r| r.pll).collect();
    let q = compute_quartiles(&plls)?;
    let mut per_day: BTreeMap<Date, (i64, usize)> = BTreeMap::new();
    for row in &scores.rows {
        let e = per_day.entry(row.date).or_default();
        e.0 += classify_polarity(row.pll, q).value() as i64;
        e.1 += 1;
    }
    let (dates, values) = per_day
        .into_iter()
        .map(|(d, (sum, n))| {
            let v = match aggregation {
                Aggregation::Sum => sum as f64,
                Aggregation::Mean => sum as f64 / n as f64,
            };
            (d, v)
        })
        .unzip();
    Ok(PolarityIndex {
        dates,
        values,
        aggregation,
    })
}
