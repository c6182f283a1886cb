//! Empirical VaR, CVaR and EVaR of a loss sample.
//!
//! All three treat the sample as an equiprobable discrete distribution, so
//! `VaR ≤ CVaR ≤ EVaR` holds exactly, up to rounding.

use crate::error::{Error, Result};

fn check(losses: &[f64], alpha: f64) -> Result<()> {
    if losses.is_empty() {
        return Err(Error::InvalidReturns("empty loss sample".into()));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidAlpha(alpha));
    }
    if losses.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("losses"));
    }
    Ok(())
}

fn sorted_desc(losses: &[f64]) -> Vec<f64> {
    let mut v = losses.to_vec();
    v.sort_by(|a, b| b.total_cmp(a));
    v
}

/// Smallest `c` with `P(X > c) ≤ alpha`.
pub fn value_at_risk(losses: &[f64], alpha: f64) -> Result<f64> {
    check(losses, alpha)?;
    let v = sorted_desc(losses);
    let k = (v.len() as f64 * alpha).floor() as usize;
    Ok(v[k.min(v.len() - 1)])
}

/// Mean of the worst `alpha` fraction of outcomes (fractional atom
/// included), which is the minimum of the Rockafellar-Uryasev function
/// `c + E[(X - c)+] / alpha`.
pub fn conditional_value_at_risk(losses: &[f64], alpha: f64) -> Result<f64> {
    check(losses, alpha)?;
    let v = sorted_desc(losses);
    let tail = v.len() as f64 * alpha;
    let k = tail.floor() as usize;
    let head: f64 = v[..k].iter().sum();
    let frac = tail - k as f64;
    let partial = if k < v.len() { frac * v[k] } else { 0.0 };
    Ok((head + partial) / tail)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evar {
    pub value: f64,
    /// Minimizing `z`; `0.0` when the infimum is only approached as
    /// `z → 0`, in which case `value` is the largest loss.
    pub z: f64,
}

/// `f(z) = z ln((1/(T α)) Σ exp(x_j / z))` and its first two derivatives,
/// evaluated with the largest loss factored out.
struct Objective<'a> {
    x: &'a [f64],
    max: f64,
    log_t_alpha: f64,
}

#[derive(Clone, Copy)]
struct Eval {
    f: f64,
    g: f64,
    h: f64,
    /// `Σ exp((x_j - max) / z)`.
    p_sum: f64,
}

impl Objective<'_> {
    fn eval(&self, z: f64) -> Eval {
        let mut s = 0.0;
        let mut sx = 0.0;
        let mut sxx = 0.0;
        for &x in self.x {
            let e = ((x - self.max) / z).exp();
            let d = x - self.max;
            s += e;
            sx += e * d;
            sxx += e * d * d;
        }
        let mean_d = sx / s;
        let var = (sxx / s - mean_d * mean_d).max(0.0);
        let ln_s = s.ln();
        Eval {
            f: self.max + z * (ln_s - self.log_t_alpha),
            g: -mean_d / z + ln_s - self.log_t_alpha,
            h: var / (z * z * z),
            p_sum: s,
        }
    }
}

/// Entropic value at risk of an equiprobable loss sample: the minimum over
/// `z > 0` of `z ln(M(1/z) / alpha)` with `M` the empirical moment
/// generating function.
pub fn evar_scalar(losses: &[f64], alpha: f64) -> Result<Evar> {
    evar_scalar_hint(losses, alpha, None)
}

/// As [`evar_scalar`], starting the search near `hint`.
pub fn evar_scalar_hint(losses: &[f64], alpha: f64, hint: Option<f64>) -> Result<Evar> {
    check(losses, alpha)?;
    let t = losses.len() as f64;
    let max = losses.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = losses.iter().copied().fold(f64::INFINITY, f64::min);
    let at_max = losses.iter().filter(|&&x| x == max).count() as f64;
    // The atom at the maximum already carries probability ≥ alpha, so the
    // derivative is nonnegative everywhere and the infimum sits at z → 0.
    if at_max >= alpha * t {
        return Ok(Evar { value: max, z: 0.0 });
    }
    let obj = Objective {
        x: losses,
        max,
        log_t_alpha: (t * alpha).ln(),
    };
    let spread = max - min;
    let start = hint.filter(|h| h.is_finite() && *h > 0.0).unwrap_or(spread);

    // Bracket the root of the (increasing) derivative around the start.
    let first = obj.eval(start);
    if first.g == 0.0 {
        return Ok(Evar { value: first.f, z: start });
    }
    let (mut lo, mut hi) = (start, start);
    let mut guard = 0;
    if first.g > 0.0 {
        loop {
            lo /= 4.0;
            guard += 1;
            if guard > 2000 || lo <= f64::MIN_POSITIVE {
                // Numerically indistinguishable from the z → 0 limit.
                return Ok(Evar { value: max, z: 0.0 });
            }
            let e = obj.eval(lo);
            if e.p_sum.is_nan() {
                return Err(Error::NoConvergence("EVaR bracket", guard));
            }
            if e.g < 0.0 {
                break;
            }
        }
    } else {
        loop {
            hi *= 4.0;
            guard += 1;
            if guard > 2000 || !hi.is_finite() {
                return Err(Error::NoConvergence("EVaR bracket", guard));
            }
            if obj.eval(hi).g > 0.0 {
                break;
            }
        }
    }

    // Safeguarded Newton on the derivative, from the start point.
    let mut z = start;
    let mut e = first;
    let (mut best_f, mut best_z) = (e.f, z);
    for _ in 0..300 {
        let newton = if e.h > 0.0 { z - e.g / e.h } else { f64::NAN };
        let next = if newton.is_finite() && newton > lo && newton < hi {
            newton
        } else if hi / lo > 4.0 {
            (lo * hi).sqrt()
        } else {
            0.5 * (lo + hi)
        };
        let step = (next - z).abs();
        z = next;
        e = obj.eval(z);
        if e.f < best_f {
            best_f = e.f;
            best_z = z;
        }
        if e.g > 0.0 {
            hi = z;
        } else {
            lo = z;
        }
        if e.g == 0.0 || step <= 1e-14 * z || hi - lo <= 1e-15 * hi {
            break;
        }
    }
    Ok(Evar {
        value: best_f,
        z: best_z,
    })
}

/// EVaR of portfolio losses `-r w` and its gradient in `w`.
pub(crate) fn portfolio_evar_grad(
    returns: &nalgebra::DMatrix<f64>,
    w: &[f64],
    alpha: f64,
    hint: Option<f64>,
) -> Result<(Evar, Vec<f64>)> {
    let losses = portfolio_losses(returns, w);
    let ev = evar_scalar_hint(&losses, alpha, hint)?;
    let max = losses.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = if ev.z > 0.0 {
        losses.iter().map(|&x| ((x - max) / ev.z).exp()).collect()
    } else {
        losses.iter().map(|&x| if x == max { 1.0 } else { 0.0 }).collect()
    };
    let total: f64 = weights.iter().sum();
    let n = returns.ncols();
    let mut grad = vec![0.0; n];
    for (j, pj) in weights.iter().enumerate() {
        if *pj == 0.0 {
            continue;
        }
        for (i, g) in grad.iter_mut().enumerate() {
            *g -= pj / total * returns[(j, i)];
        }
    }
    Ok((ev, grad))
}

/// Losses `-r_j · w` per observation.
pub fn portfolio_losses(returns: &nalgebra::DMatrix<f64>, w: &[f64]) -> Vec<f64> {
    (0..returns.nrows())
        .map(|j| -(0..returns.ncols()).map(|i| returns[(j, i)] * w[i]).sum::<f64>())
        .collect()
}
