//! Price and score ingestion, calendar alignment and the equal-weight
//! reference portfolio.
//!
//! Dates are daily. They are parsed from `YYYY-MM-DD` and stored as day
//! ordinals so that joins and ordering are integer comparisons.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};
use tracing::info;

use crate::error::{Error, Result};
use crate::sentiment::PolarityIndex;

/// Calendar day, stored as days since 0001-01-01 (proleptic Gregorian).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Date(i32);

impl Date {
    pub fn from_ordinal(days: i32) -> Self {
        Date(days)
    }

    pub fn ordinal(self) -> i32 {
        self.0
    }

    pub fn from_ymd(year: i32, month: u32, day: u32) -> Option<Self> {
        NaiveDate::from_ymd_opt(year, month, day).map(|d| Date(d.num_days_from_ce()))
    }

    fn naive(self) -> NaiveDate {
        NaiveDate::from_num_days_from_ce_opt(self.0).expect("ordinal within chrono range")
    }

    /// The next calendar day.
    pub fn succ(self) -> Self {
        Date(self.0 + 1)
    }
}

impl FromStr for Date {
    type Err = Error;

    /// Strict ISO-8601 calendar date; anything with a time component is
    /// rejected.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        NaiveDate::parse_from_str(s, "%Y-%m-%d")
            .ok()
            .filter(|_| s.len() == 10)
            .map(|d| Date(d.num_days_from_ce()))
            .ok_or_else(|| Error::Malformed(format!("not a YYYY-MM-DD date: {s:?}")))
    }
}

impl fmt::Display for Date {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.naive().format("%Y-%m-%d"))
    }
}

impl TryFrom<String> for Date {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Date> for String {
    fn from(d: Date) -> String {
        d.to_string()
    }
}

/// A dated real-valued series.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Series {
    pub dates: Vec<Date>,
    pub values: Vec<f64>,
}

impl Series {
    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }
}

/// Adjusted close prices, one row per trading date.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceTable {
    dates: Vec<Date>,
    tickers: Vec<String>,
    /// Row-major, `dates.len() × tickers.len()`.
    values: Vec<f64>,
}

/// Bookkeeping from a tolerant load.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LoadStats {
    pub kept: usize,
    pub dropped: usize,
}

impl PriceTable {
    /// Build a table from rows. Rows are sorted by date; every price must
    /// be finite and positive.
    pub fn new(dates: Vec<Date>, tickers: Vec<String>, rows: Vec<Vec<f64>>) -> Result<Self> {
        if dates.len() != rows.len() {
            return Err(Error::Dimension(format!(
                "{} dates but {} rows",
                dates.len(),
                rows.len()
            )));
        }
        if tickers.is_empty() {
            return Err(Error::Malformed("price table has no tickers".into()));
        }
        let mut paired: Vec<(Date, Vec<f64>)> = dates.into_iter().zip(rows).collect();
        paired.sort_by_key(|(d, _)| *d);
        for w in paired.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(Error::DuplicateDate(w[0].0.to_string()));
            }
        }
        let mut values = Vec::with_capacity(paired.len() * tickers.len());
        let mut out_dates = Vec::with_capacity(paired.len());
        for (d, row) in paired {
            if row.len() != tickers.len() {
                return Err(Error::Dimension(format!(
                    "row {d} has {} prices for {} tickers",
                    row.len(),
                    tickers.len()
                )));
            }
            if row.iter().any(|p| !p.is_finite() || *p <= 0.0) {
                return Err(Error::Malformed(format!("row {d} has a non-positive price")));
            }
            values.extend(row);
            out_dates.push(d);
        }
        Ok(PriceTable {
            dates: out_dates,
            tickers,
            values,
        })
    }

    pub fn dates(&self) -> &[Date] {
        &self.dates
    }

    pub fn tickers(&self) -> &[String] {
        &self.tickers
    }

    pub fn n_dates(&self) -> usize {
        self.dates.len()
    }

    pub fn n_assets(&self) -> usize {
        self.tickers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    pub fn row(&self, t: usize) -> &[f64] {
        let n = self.tickers.len();
        &self.values[t * n..(t + 1) * n]
    }

    pub fn price(&self, t: usize, asset: usize) -> f64 {
        self.values[t * self.tickers.len() + asset]
    }

    /// Rows `[start, end)` as a new table.
    pub fn slice(&self, start: usize, end: usize) -> PriceTable {
        let n = self.tickers.len();
        PriceTable {
            dates: self.dates[start..end].to_vec(),
            tickers: self.tickers.clone(),
            values: self.values[start * n..end * n].to_vec(),
        }
    }

    /// Write the canonical CSV form (`date,<ticker>,...`).
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["date".to_string()];
        header.extend(self.tickers.iter().cloned());
        w.write_record(&header)?;
        for (t, d) in self.dates.iter().enumerate() {
            let mut rec = vec![d.to_string()];
            rec.extend(self.row(t).iter().map(|p| p.to_string()));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn parse_price_cell(cell: &str) -> Option<f64> {
    let v: f64 = cell.trim().parse().ok()?;
    (v.is_finite() && v > 0.0).then_some(v)
}

/// Load a price CSV. Rows with a blank, non-numeric or non-positive cell
/// (or an unparseable date) are dropped and counted.
pub fn load_price_table(path: &Path) -> Result<(PriceTable, LoadStats)> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_path(path)?;
    let header = rdr.headers()?.clone();
    if header.len() < 2 || !header[0].trim().eq_ignore_ascii_case("date") {
        return Err(Error::Malformed(format!(
            "{}: header must be date,<ticker>,...",
            path.display()
        )));
    }
    let tickers: Vec<String> = header.iter().skip(1).map(|s| s.trim().to_string()).collect();

    let mut stats = LoadStats::default();
    let mut seen = HashSet::new();
    let mut dates = Vec::new();
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let date = rec.get(0).and_then(|s| s.parse::<Date>().ok());
        if let Some(d) = date {
            if !seen.insert(d) {
                return Err(Error::DuplicateDate(d.to_string()));
            }
        }
        let prices: Option<Vec<f64>> = if rec.len() == tickers.len() + 1 {
            rec.iter().skip(1).map(parse_price_cell).collect()
        } else {
            None
        };
        match (date, prices) {
            (Some(d), Some(p)) => {
                dates.push(d);
                rows.push(p);
                stats.kept += 1;
            }
            _ => stats.dropped += 1,
        }
    }
    if dates.is_empty() {
        return Err(Error::NoRows(path.display().to_string()));
    }
    if stats.dropped > 0 {
        info!(path = %path.display(), dropped = stats.dropped, "dropped incomplete price rows");
    }
    Ok((PriceTable::new(dates, tickers, rows)?, stats))
}

/// One scored sentence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub date: Date,
    pub sentence_id: String,
    pub pll: f64,
}

/// Per-sentence pseudo-log-likelihood scores.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ScoreTable {
    pub rows: Vec<ScoreRow>,
}

impl ScoreTable {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["date", "sentence_id", "pll"])?;
        for r in &self.rows {
            w.write_record([r.date.to_string(), r.sentence_id.clone(), r.pll.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Load a `date,sentence_id,pll` CSV. Unlike prices, a bad score row is an
/// error: every row must carry a date and a finite score.
pub fn load_score_table(path: &Path) -> Result<ScoreTable> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
    let header = rdr.headers()?.clone();
    let cols: Vec<&str> = header.iter().map(str::trim).collect();
    if cols.is_empty() {
        // An empty file is an empty table; too few scores is for the caller to judge.
        return Ok(ScoreTable { rows: Vec::new() });
    }
    if cols != ["date", "sentence_id", "pll"] {
        return Err(Error::Malformed(format!(
            "{}: header must be date,sentence_id,pll",
            path.display()
        )));
    }
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let date: Date = rec[0].parse()?;
        let pll: f64 = rec[2]
            .trim()
            .parse()
            .map_err(|_| Error::Malformed(format!("row {}: bad pll {:?}", i + 1, &rec[2])))?;
        if !pll.is_finite() {
            return Err(Error::NonFinite("pll"));
        }
        rows.push(ScoreRow {
            date,
            sentence_id: rec[1].trim().to_string(),
            pll,
        });
    }
    Ok(ScoreTable { rows })
}

/// Load a two-column `date,<name>` series (e.g. the polarity index CSV).
pub fn load_series(path: &Path) -> Result<Series> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
    let mut by_date = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec?;
        if rec.len() != 2 {
            return Err(Error::Malformed(format!("{}: expected 2 columns", path.display())));
        }
        let d: Date = rec[0].parse()?;
        let v: f64 = rec[1]
            .trim()
            .parse()
            .map_err(|_| Error::Malformed(format!("bad value {:?}", &rec[1])))?;
        if !v.is_finite() {
            return Err(Error::NonFinite("series value"));
        }
        if by_date.insert(d, v).is_some() {
            return Err(Error::DuplicateDate(d.to_string()));
        }
    }
    if by_date.is_empty() {
        return Err(Error::NoRows(path.display().to_string()));
    }
    let (dates, values) = by_date.into_iter().unzip();
    Ok(Series { dates, values })
}

pub fn write_series<W: Write>(series: &Series, value_header: &str, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["date", value_header])?;
    for (d, v) in series.dates.iter().zip(&series.values) {
        w.write_record([d.to_string(), v.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Portfolio level per date: one unit of every stock, i.e. the plain sum
/// of adjusted closes.
pub fn build_equal_weight_portfolio(prices: &PriceTable) -> Result<Series> {
    if prices.is_empty() {
        return Err(Error::EmptyTable);
    }
    let values = (0..prices.n_dates())
        .map(|t| prices.row(t).iter().sum())
        .collect();
    Ok(Series {
        dates: prices.dates().to_vec(),
        values,
    })
}

/// Polarity index and portfolio restricted to their common dates.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignedPanel {
    pub dates: Vec<Date>,
    pub index: Vec<f64>,
    pub portfolio: Vec<f64>,
}

impl AlignedPanel {
    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    pub fn index_series(&self) -> Series {
        Series {
            dates: self.dates.clone(),
            values: self.index.clone(),
        }
    }
}

/// Inner join on date. Both inputs are assumed sorted, as every loader in
/// this module produces them.
pub fn align_by_date(index: &PolarityIndex, portfolio: &Series) -> Result<AlignedPanel> {
    let (mut i, mut j) = (0, 0);
    let mut panel = AlignedPanel {
        dates: Vec::new(),
        index: Vec::new(),
        portfolio: Vec::new(),
    };
    while i < index.dates.len() && j < portfolio.dates.len() {
        match index.dates[i].cmp(&portfolio.dates[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                panel.dates.push(index.dates[i]);
                panel.index.push(index.values[i]);
                panel.portfolio.push(portfolio.values[j]);
                i += 1;
                j += 1;
            }
        }
    }
    if panel.is_empty() {
        return Err(Error::EmptyIntersection);
    }
    Ok(panel)
}
