//! Accelerated projected gradient for the EVaR programs.
//!
//! Slower and less accurate than the cone solver, but shares nothing with
//! it beyond the scalar EVaR evaluation, so agreement between the two is a
//! meaningful check.

use nalgebra::DMatrix;

use super::risk::portfolio_evar_grad;
use super::{evar_solution, ReturnsMatrix, PortfolioSolution, SolveStatus};
use crate::error::{Error, Result};

const MAX_ITER: usize = 20_000;

/// Euclidean projection onto the probability simplex.
pub fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (k, x) in u.iter().enumerate() {
        cum += x;
        let t = (cum - 1.0) / (k + 1) as f64;
        if x - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|x| (x - theta).max(0.0)).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Projection onto `{w ∈ simplex : mu · w ≥ m}` by bisection on the
/// multiplier of the return constraint.
pub fn project_with_floor(v: &[f64], mu: &[f64], floor: Option<f64>) -> Vec<f64> {
    let base = project_simplex(v);
    let Some(m) = floor else { return base };
    if dot(mu, &base) >= m {
        return base;
    }
    let at = |lambda: f64| {
        let shifted: Vec<f64> = v.iter().zip(mu).map(|(x, u)| x + lambda * u).collect();
        project_simplex(&shifted)
    };
    let mut hi = 1.0;
    while dot(mu, &at(hi)) < m && hi < 1e30 {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if dot(mu, &at(mid)) >= m {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    at(hi)
}

struct Run {
    w: Vec<f64>,
    z: f64,
    iterations: usize,
    converged: bool,
}

/// FISTA with backtracking and function-value restarts on scaled returns.
fn fista(r: &DMatrix<f64>, mu: &[f64], floor: Option<f64>, alpha: f64, start: Vec<f64>) -> Result<Run> {
    let n = r.ncols();
    let mut x = project_with_floor(&start, mu, floor);
    let (mut fx_ev, _) = portfolio_evar_grad(r, &x, alpha, None)?;
    let mut y = x.clone();
    let mut t: f64 = 1.0;
    let mut lip = 1.0;
    let mut z_hint = Some(fx_ev.z).filter(|z| *z > 0.0);
    let mut stall = 0;
    for it in 1..=MAX_ITER {
        let (fy, gy) = portfolio_evar_grad(r, &y, alpha, z_hint)?;
        let (x_new, f_new) = loop {
            let step: Vec<f64> = (0..n).map(|i| y[i] - gy[i] / lip).collect();
            let cand = project_with_floor(&step, mu, floor);
            let (fc, _) = portfolio_evar_grad(r, &cand, alpha, z_hint)?;
            let d: Vec<f64> = (0..n).map(|i| cand[i] - y[i]).collect();
            let model = fy.value + dot(&gy, &d) + 0.5 * lip * dot(&d, &d);
            if fc.value <= model + 1e-15 * (1.0 + fy.value.abs()) || lip > 1e15 {
                break (cand, fc);
            }
            lip *= 2.0;
        };
        if f_new.z > 0.0 {
            z_hint = Some(f_new.z);
        }
        let moved = x_new.iter().zip(&x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let t_new = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        if f_new.value > fx_ev.value {
            // Restart momentum from the last iterate.
            t = 1.0;
            y = x.clone();
        } else {
            let beta = (t - 1.0) / t_new;
            y = (0..n).map(|i| x_new[i] + beta * (x_new[i] - x[i])).collect();
            t = t_new;
            x = x_new;
            fx_ev = f_new;
        }
        lip *= 0.9;
        stall = if moved < 1e-11 { stall + 1 } else { 0 };
        if stall >= 20 {
            return Ok(Run { w: x, z: fx_ev.z, iterations: it, converged: true });
        }
    }
    Ok(Run { w: x, z: fx_ev.z, iterations: MAX_ITER, converged: false })
}

fn scaled(r: &ReturnsMatrix) -> (DMatrix<f64>, Vec<f64>, f64) {
    let s = super::scale_of(r);
    let m = r.matrix() * s;
    let mu = r.means().iter().map(|v| v * s).collect();
    (m, mu, s)
}

fn status(converged: bool) -> SolveStatus {
    if converged {
        SolveStatus::Optimal
    } else {
        SolveStatus::MaxIterations
    }
}

pub fn min_evar(r: &ReturnsMatrix, alpha: f64, mu_target: Option<f64>) -> Result<PortfolioSolution> {
    let best = r.means().iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if let Some(m) = mu_target {
        if !m.is_finite() {
            return Err(Error::NonFinite("mu_target"));
        }
        if m > best + 1e-12 * (1.0 + best.abs()) {
            return Err(Error::Infeasible(format!(
                "return target {m} exceeds the largest asset mean {best}"
            )));
        }
    }
    let (m, mu, s) = scaled(r);
    let n = r.n_assets();
    let run = fista(&m, &mu, mu_target.map(|v| v * s), alpha, vec![1.0 / n as f64; n])?;
    evar_solution(r, alpha, run.w, Some(run.z / s).filter(|z| *z > 0.0), status(run.converged), run.iterations)
}

/// Bisection on the return floor: the smallest EVaR attainable at floor
/// `m` is nondecreasing in `m`, so the largest `m` meeting the cap is the
/// maximum return.
pub fn max_return_evar(r: &ReturnsMatrix, alpha: f64, evar_cap: f64) -> Result<PortfolioSolution> {
    if evar_cap.is_nan() {
        return Err(Error::NonFinite("evar_cap"));
    }
    let (m, mu, s) = scaled(r);
    let n = r.n_assets();
    let cap = evar_cap * s;
    let mut iterations = 0;
    let mut converged = true;
    let lo_run = fista(&m, &mu, None, alpha, vec![1.0 / n as f64; n])?;
    iterations += lo_run.iterations;
    let lo_val = portfolio_evar_grad(&m, &lo_run.w, alpha, None)?.0.value;
    if lo_val > cap + 1e-9 * (1.0 + cap.abs()) {
        return Err(Error::Infeasible(format!(
            "EVaR cap {evar_cap} below the minimum attainable {}",
            lo_val / s
        )));
    }
    let top = mu.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let top_run = fista(&m, &mu, Some(top), alpha, lo_run.w.clone())?;
    iterations += top_run.iterations;
    let finish = |w: Vec<f64>, iterations, converged| -> Result<PortfolioSolution> {
        let mut out = evar_solution(r, alpha, w, None, status(converged), iterations)?;
        out.objective = out.mean_return;
        Ok(out)
    };
    if portfolio_evar_grad(&m, &top_run.w, alpha, None)?.0.value <= cap {
        return finish(top_run.w, iterations, top_run.converged);
    }
    let mut lo = dot(&mu, &lo_run.w);
    let mut hi = top;
    let mut best = lo_run.w;
    for _ in 0..60 {
        if hi - lo <= 1e-12 * (1.0 + hi.abs()) {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let run = fista(&m, &mu, Some(mid), alpha, best.clone())?;
        iterations += run.iterations;
        converged &= run.converged;
        if portfolio_evar_grad(&m, &run.w, alpha, None)?.0.value <= cap {
            lo = mid;
            best = run.w;
        } else {
            hi = mid;
        }
    }
    finish(best, iterations, converged)
}
