//! Seeded synthetic data: VAR-LiNGAM systems with Laplace noise and a
//! small market (prices plus a scored news corpus) whose sentiment leads
//! returns.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::data::{Date, PriceTable, ScoreRow, ScoreTable};

/// Laplace(0, scale) by inversion.
pub fn laplace<R: Rng + ?Sized>(rng: &mut R, scale: f64) -> f64 {
    let u: f64 = rng.gen_range(-0.5..0.5);
    -scale * u.signum() * (1.0 - 2.0 * u.abs()).ln()
}

/// `x(t) = B_0 x(t) + B_1 x(t-1) + e(t)` with independent Laplace `e`.
#[derive(Debug, Clone, PartialEq)]
pub struct LingamSystem {
    pub b0: DMatrix<f64>,
    pub b1: DMatrix<f64>,
    pub noise_scale: Vec<f64>,
}

/// `n × d` sample after a burn-in of 200 steps.
pub fn simulate_var_lingam(sys: &LingamSystem, n: usize, seed: u64) -> DMatrix<f64> {
    let d = sys.b0.nrows();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let inv = (DMatrix::identity(d, d) - &sys.b0)
        .try_inverse()
        .expect("I - B_0 invertible for an acyclic B_0");
    let burn = 200;
    let mut x = DVector::zeros(d);
    let mut out = DMatrix::zeros(n, d);
    for t in 0..n + burn {
        let e = DVector::from_iterator(d, sys.noise_scale.iter().map(|&s| laplace(&mut rng, s)));
        x = &inv * (&sys.b1 * &x + e);
        if t >= burn {
            out.set_row(t - burn, &x.transpose());
        }
    }
    out
}

/// Weekdays starting at `start` (inclusive).
pub fn business_days(start: Date, n: usize) -> Vec<Date> {
    let mut out = Vec::with_capacity(n);
    let mut d = start;
    while out.len() < n {
        // 0001-01-01 is a Monday, so ordinal 1 is Monday.
        let weekday = (d.ordinal() - 1).rem_euclid(7);
        if weekday < 5 {
            out.push(d);
        }
        d = d.succ();
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarketConfig {
    pub n_assets: usize,
    pub n_days: usize,
    pub sentences_per_day: usize,
    pub seed: u64,
}

impl Default for MarketConfig {
    fn default() -> Self {
        MarketConfig {
            n_assets: 10,
            n_days: 1250,
            sentences_per_day: 8,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticMarket {
    pub prices: PriceTable,
    pub scores: ScoreTable,
    /// Latent daily sentiment on calendar days, for diagnostics.
    pub sentiment: Vec<(Date, f64)>,
}

/// Prices for `n_assets` on `n_days` business days from 2015-01-02 and a
/// news corpus on every calendar day of the same span. A latent sentiment
/// process switches between bullish and bearish regimes; headline scores
/// rise with it and next-day asset drifts follow it.
pub fn synthetic_market(cfg: &MarketConfig) -> SyntheticMarket {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let start = Date::from_ymd(2015, 1, 2).expect("valid date");
    let trading = business_days(start, cfg.n_days);
    let last = *trading.last().expect("n_days > 0");
    let n_cal = (last.ordinal() - start.ordinal() + 1) as usize;

    // Regime-switching mood on calendar days.
    let mut sentiment = Vec::with_capacity(n_cal);
    let mut mood = 1.0;
    let mut remaining: i64 = rng.gen_range(90..260);
    let mut s = 0.0;
    for k in 0..n_cal {
        if remaining == 0 {
            mood = -mood * rng.gen_range(0.6..1.4);
            remaining = rng.gen_range(90..260);
        }
        remaining -= 1;
        let eps: f64 = StandardNormal.sample(&mut rng);
        s = 0.85 * s + 0.15 * mood + 0.25 * eps;
        sentiment.push((Date::from_ordinal(start.ordinal() + k as i32), s));
    }

    let headline_noise = Normal::new(0.0, 6.0).expect("positive sd");
    let mut rows = Vec::with_capacity(n_cal * cfg.sentences_per_day);
    for (date, s) in &sentiment {
        for j in 0..cfg.sentences_per_day {
            let pll = -45.0 + 6.0 * s + headline_noise.sample(&mut rng);
            rows.push(ScoreRow {
                date: *date,
                sentence_id: format!("{date}-{j:02}"),
                pll,
            });
        }
    }

    let n = cfg.n_assets;
    let drift: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0002..0.0012)).collect();
    let beta: Vec<f64> = (0..n).map(|_| rng.gen_range(0.5..1.5)).collect();
    let vol: Vec<f64> = (0..n).map(|_| rng.gen_range(0.008..0.02)).collect();
    let mut level: Vec<f64> = (0..n).map(|_| rng.gen_range(20.0..400.0)).collect();
    let sentiment_on = |d: Date| sentiment[(d.ordinal() - start.ordinal()) as usize].1;

    let mut price_rows = Vec::with_capacity(cfg.n_days);
    for t in 0..trading.len() {
        if t > 0 {
            let lead = sentiment_on(trading[t - 1]);
            let market: f64 = StandardNormal.sample(&mut rng);
            for i in 0..n {
                let idio: f64 = StandardNormal.sample(&mut rng);
                let r = drift[i] + 0.002 * beta[i] * lead + beta[i] * 0.009 * market + vol[i] * idio;
                level[i] *= (1.0 + r).max(0.05);
            }
        }
        price_rows.push(level.iter().map(|p| (p * 1e4).round() / 1e4).collect());
    }
    let tickers = (0..n).map(|i| format!("A{i:02}")).collect();
    let prices = PriceTable::new(trading, tickers, price_rows).expect("positive prices");
    SyntheticMarket {
        prices,
        scores: ScoreTable { rows },
        sentiment,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn laplace_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let xs: Vec<f64> = (0..200_000).map(|_| laplace(&mut rng, 2.0)).collect();
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / xs.len() as f64;
        assert!(mean.abs() < 0.03);
        // Var = 2 b²
        assert!((var - 8.0).abs() < 0.15, "{var}");
    }

    #[test]
    fn business_days_skip_weekends() {
        let start = Date::from_ymd(2015, 1, 2).unwrap(); // Friday
        let d = business_days(start, 3);
        assert_eq!(
            d.iter().map(|x| x.to_string()).collect::<Vec<_>>(),
            ["2015-01-02", "2015-01-05", "2015-01-06"]
        );
    }

    #[test]
    fn market_shape_and_determinism() {
        let cfg = MarketConfig {
            n_days: 300,
            ..MarketConfig::default()
        };
        let a = synthetic_market(&cfg);
        let b = synthetic_market(&cfg);
        assert_eq!(a.prices, b.prices);
        assert_eq!(a.scores, b.scores);
        assert_eq!(a.prices.n_assets(), 10);
        assert_eq!(a.prices.n_dates(), 300);
    }
}
