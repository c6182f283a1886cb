//! Greedy binary segmentation with a fixed breakpoint budget, and the
//! up/down labelling of the resulting regimes.

use serde::{Deserialize, Serialize};
use std::fmt;

use crate::data::Date;
use crate::error::{Error, Result};
use std::io::Write;
use std::path::Path;

pub const DEFAULT_MIN_SIZE: usize = 2;

#[derive(Debug, Clone, PartialEq)]
pub struct Signal {
    values: Vec<f64>,
    /// Prefix sums of values and squares, after subtracting the global mean
    /// to limit cancellation.
    prefix: Vec<f64>,
    prefix_sq: Vec<f64>,
}

impl Signal {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 || values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidSignal);
        }
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        let mut prefix = Vec::with_capacity(values.len() + 1);
        let mut prefix_sq = Vec::with_capacity(values.len() + 1);
        prefix.push(0.0);
        prefix_sq.push(0.0);
        let (mut s, mut sq) = (0.0, 0.0);
        for v in &values {
            let c = v - mean;
            s += c;
            sq += c * c;
            prefix.push(s);
            prefix_sq.push(sq);
        }
        Ok(Signal {
            values,
            prefix,
            prefix_sq,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Segment cost `c(y_{a,b})` over samples `a..b`.
pub trait Cost {
    fn cost(&self, signal: &Signal, a: usize, b: usize) -> f64;
}

/// Sum of squared deviations from the segment mean.
#[derive(Debug, Clone, Copy, Default)]
pub struct L2;

impl Cost for L2 {
    fn cost(&self, signal: &Signal, a: usize, b: usize) -> f64 {
        let n = (b - a) as f64;
        let s = signal.prefix[b] - signal.prefix[a];
        let sq = signal.prefix_sq[b] - signal.prefix_sq[a];
        (sq - s * s / n).max(0.0)
    }
}

/// Checked l2 cost of `[a, b)`.
pub fn cost_l2(signal: &Signal, a: usize, b: usize) -> Result<f64> {
    if a >= b || b > signal.len() {
        return Err(Error::EmptyRange(a, b));
    }
    Ok(L2.cost(signal, a, b))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Breakpoints {
    /// Strictly increasing split indexes in `(0, S)`.
    pub indexes: Vec<usize>,
    /// Samples in the signal; the terminal breakpoint.
    pub len: usize,
    /// Set when some split was accepted with zero gain.
    pub zero_gain: bool,
    /// Split indexes in the order they were found.
    pub sequence: Vec<usize>,
}

impl Breakpoints {
    /// Indexes with the terminal `S` appended.
    pub fn with_terminal(&self) -> Vec<usize> {
        let mut v = self.indexes.clone();
        v.push(self.len);
        v
    }
}

/// Best split of `[a, b)` as `(split, summed cost)`; `None` when no split
/// leaves both sides with `min_size` samples. Ties go to the smaller index.
fn best_split<C: Cost>(signal: &Signal, cost: &C, a: usize, b: usize, min_size: usize) -> Option<(usize, f64)> {
    if b - a < 2 * min_size {
        return None;
    }
    let mut best: Option<(usize, f64)> = None;
    for s in a + min_size..=b - min_size {
        let c = cost.cost(signal, a, s) + cost.cost(signal, s, b);
        if best.map_or(true, |(_, bc)| c < bc) {
            best = Some((s, c));
        }
    }
    best
}

/// Binary segmentation until `n_bkps` breakpoints are placed.
pub fn binseg<C: Cost>(signal: &Signal, n_bkps: usize, cost: &C, min_size: usize) -> Result<Breakpoints> {
    let s_len = signal.len();
    let infeasible = || Error::InfeasibleBreakpoints {
        requested: n_bkps,
        samples: s_len,
        min_size,
    };
    if min_size == 0 || n_bkps + 1 > s_len / min_size {
        return Err(infeasible());
    }

    let mut bkps: Vec<usize> = Vec::with_capacity(n_bkps);
    let mut sequence = Vec::with_capacity(n_bkps);
    let mut zero_gain = false;
    // Cache of (gain, split) per segment start, keyed by segment bounds.
    let mut cache: std::collections::HashMap<(usize, usize), Option<(f64, usize)>> = Default::default();
    while bkps.len() < n_bkps {
        let mut bounds = vec![0];
        bounds.extend(&bkps);
        bounds.push(s_len);
        let mut chosen: Option<(f64, usize)> = None;
        for w in bounds.windows(2) {
            let (a, b) = (w[0], w[1]);
            let entry = *cache.entry((a, b)).or_insert_with(|| {
                best_split(signal, cost, a, b, min_size).map(|(s, c)| (cost.cost(signal, a, b) - c, s))
            });
            if let Some((gain, s)) = entry {
                if chosen.map_or(true, |(g, _)| gain > g) {
                    chosen = Some((gain, s));
                }
            }
        }
        let (gain, s) = chosen.ok_or_else(infeasible)?;
        if gain <= 0.0 {
            zero_gain = true;
        }
        let pos = bkps.partition_point(|&x| x < s);
        bkps.insert(pos, s);
        sequence.push(s);
    }
    if zero_gain {
        tracing::warn!("binary segmentation accepted a split with zero gain");
    }
    Ok(Breakpoints {
        indexes: bkps,
        len: s_len,
        zero_gain,
        sequence,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Trend {
    Up,
    Down,
}

impl fmt::Display for Trend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Trend::Up => "up",
            Trend::Down => "down",
        })
    }
}

impl std::str::FromStr for Trend {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "up" => Ok(Trend::Up),
            "down" => Ok(Trend::Down),
            other => Err(Error::Malformed(format!("unknown trend {other:?}"))),
        }
    }
}

/// Half-open sample range `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Regime {
    pub start: usize,
    pub end: usize,
    pub trend: Trend,
}

/// Sign of the least-squares slope of value on sample index; a flat
/// regime counts as up.
pub fn classify_trend(signal: &Signal, start: usize, end: usize) -> Result<Trend> {
    if end > signal.len() || start >= end {
        return Err(Error::EmptyRange(start, end));
    }
    let n = end - start;
    if n < 2 {
        return Err(Error::RegimeTooShort(n));
    }
    let ys = &signal.values[start..end];
    let x_mean = (n - 1) as f64 / 2.0;
    let y_mean = ys.iter().sum::<f64>() / n as f64;
    let cov: f64 = ys
        .iter()
        .enumerate()
        .map(|(i, y)| (i as f64 - x_mean) * (y - y_mean))
        .sum();
    Ok(if cov >= 0.0 { Trend::Up } else { Trend::Down })
}

/// Tile the signal into `n_regimes` regimes at the given breakpoints.
pub fn regimes_from_breakpoints(signal: &Signal, bkps: &Breakpoints, n_regimes: usize) -> Result<Vec<Regime>> {
    if bkps.indexes.len() + 1 != n_regimes {
        return Err(Error::Config(format!(
            "{n_regimes} regimes need {} breakpoints, got {}",
            n_regimes.saturating_sub(1),
            bkps.indexes.len()
        )));
    }
    if bkps.len != signal.len() {
        return Err(Error::Dimension("breakpoints were computed on another signal".into()));
    }
    let mut out = Vec::with_capacity(n_regimes);
    let mut start = 0;
    for end in bkps.with_terminal() {
        out.push(Regime {
            start,
            end,
            trend: classify_trend(signal, start, end)?,
        });
        start = end;
    }
    Ok(out)
}

/// Binary segmentation into `n_regimes` l2 regimes with trend labels.
pub fn detect_regimes(values: &[f64], n_regimes: usize, min_size: usize) -> Result<(Breakpoints, Vec<Regime>)> {
    if n_regimes == 0 {
        return Err(Error::Config("at least one regime is required".into()));
    }
    let signal = Signal::new(values.to_vec())?;
    let bkps = binseg(&signal, n_regimes - 1, &L2, min_size)?;
    let regimes = regimes_from_breakpoints(&signal, &bkps, n_regimes)?;
    Ok((bkps, regimes))
}

/// A regime on the calendar of the segmented series; `end` is the last
/// date inside the regime.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatedRegime {
    pub start: Date,
    pub end: Date,
    pub trend: Trend,
}

pub fn date_regimes(dates: &[Date], regimes: &[Regime]) -> Result<Vec<DatedRegime>> {
    regimes
        .iter()
        .map(|r| {
            if r.start >= r.end || r.end > dates.len() {
                return Err(Error::EmptyRange(r.start, r.end));
            }
            Ok(DatedRegime {
                start: dates[r.start],
                end: dates[r.end - 1],
                trend: r.trend,
            })
        })
        .collect()
}

pub fn write_regimes<W: Write>(regimes: &[DatedRegime], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["start_date", "end_date", "trend"])?;
    for r in regimes {
        w.write_record([r.start.to_string(), r.end.to_string(), r.trend.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads `start_date,end_date,trend` rows, sorted by start.
pub fn load_regimes(path: &Path) -> Result<Vec<DatedRegime>> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
    let header: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    if header != ["start_date", "end_date", "trend"] {
        return Err(Error::Malformed(format!(
            "{}: expected header start_date,end_date,trend",
            path.display()
        )));
    }
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        if rec.len() != 3 {
            return Err(Error::Malformed(format!("{}: expected 3 columns", path.display())));
        }
        let r = DatedRegime {
            start: rec[0].parse()?,
            end: rec[1].parse()?,
            trend: rec[2].parse()?,
        };
        if r.end < r.start {
            return Err(Error::Malformed(format!("regime ends before it starts: {}", r.start)));
        }
        out.push(r);
    }
    if out.is_empty() {
        return Err(Error::NoRows(path.display().to_string()));
    }
    out.sort_by_key(|r| r.start);
    Ok(out)
}
