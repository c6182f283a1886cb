//! Long-only portfolio programs over a window of asset returns: minimum
//! EVaR (optionally with a return floor), maximum return under an EVaR cap,
//! and the minimum-CVaR and minimum-variance baselines.
//!
//! Every program is expressed as a conic problem and handed to a
//! [`ConicSolver`]; the EVaR programs can also be solved by an independent
//! projected-gradient method ([`Backend::FirstOrder`]) used to cross-check
//! the cone solver.

pub mod conic;
pub mod first_order;
pub mod risk;

use nalgebra::DMatrix;
use serde::Serialize;
use tracing::warn;

use crate::error::{Error, Result};
pub use conic::{Clarabel, Cone, ConicProblem, ConicSolution, ConicSolver, ConicStatus};
pub use risk::{conditional_value_at_risk, evar_scalar, portfolio_losses, value_at_risk, Evar};

/// `T × N` simple returns, one row per period.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnsMatrix {
    data: DMatrix<f64>,
}

impl ReturnsMatrix {
    pub fn new(data: DMatrix<f64>) -> Result<Self> {
        if data.nrows() < 2 || data.ncols() == 0 {
            return Err(Error::InvalidReturns(format!(
                "need at least 2 periods and 1 asset, got {}x{}",
                data.nrows(),
                data.ncols()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("returns"));
        }
        Ok(ReturnsMatrix { data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidReturns("ragged rows".into()));
        }
        Self::new(DMatrix::from_fn(rows.len(), n, |t, i| rows[t][i]))
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn n_periods(&self) -> usize {
        self.data.nrows()
    }

    pub fn n_assets(&self) -> usize {
        self.data.ncols()
    }

    pub fn means(&self) -> Vec<f64> {
        (0..self.n_assets()).map(|i| self.data.column(i).mean()).collect()
    }

    /// Sample covariance with the `T - 1` denominator.
    pub fn covariance(&self) -> DMatrix<f64> {
        let t = self.n_periods() as f64;
        let mut c = self.data.clone();
        for (i, m) in self.means().into_iter().enumerate() {
            c.column_mut(i).add_scalar_mut(-m);
        }
        c.transpose() * &c / (t - 1.0)
    }

    pub fn losses(&self, w: &[f64]) -> Vec<f64> {
        portfolio_losses(&self.data, w)
    }

    pub fn mean_return(&self, w: &[f64]) -> f64 {
        self.means().iter().zip(w).map(|(m, x)| m * x).sum()
    }

    fn select(&self, cols: &[usize]) -> ReturnsMatrix {
        ReturnsMatrix {
            data: self.data.select_columns(cols),
        }
    }

    fn rms(&self) -> f64 {
        (self.data.iter().map(|v| v * v).sum::<f64>() / self.data.len() as f64).sqrt()
    }
}

/// The dual variables of the exponential-cone form at the returned weights:
/// `q = z ln Σ exp(L_j / z)`, `u_j = z exp((L_j - q) / z)`, so `Σ u = z`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvarCertificate {
    pub q: f64,
    pub z: f64,
    pub u: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    /// Iteration limit hit; weights are feasible but may be suboptimal.
    MaxIterations,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PortfolioSolution {
    pub weights: Vec<f64>,
    /// Value of the program's risk measure at `weights` (EVaR, CVaR or
    /// variance), except for the max-return program where it is the mean.
    pub objective: f64,
    pub mean_return: f64,
    pub status: SolveStatus,
    pub iterations: usize,
    pub certificate: Option<EvarCertificate>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Program {
    MinEvar { mu_target: Option<f64> },
    MaxReturnEvar { evar_cap: f64 },
    MinCvar { mu_target: Option<f64> },
    MinVariance { mu_target: Option<f64> },
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Backend {
    #[default]
    Conic,
    /// Projected gradient; EVaR programs only.
    FirstOrder,
}

pub fn solve(program: Program, r: &ReturnsMatrix, alpha: f64, backend: Backend) -> Result<PortfolioSolution> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidAlpha(alpha));
    }
    match backend {
        Backend::Conic => {
            let solver = Clarabel::default();
            match program {
                Program::MinEvar { mu_target } => min_evar(r, alpha, mu_target, &solver),
                Program::MaxReturnEvar { evar_cap } => max_return_evar(r, alpha, evar_cap, &solver),
                Program::MinCvar { mu_target } => min_cvar(r, alpha, mu_target, &solver),
                Program::MinVariance { mu_target } => min_variance(r, mu_target, &solver),
            }
        }
        Backend::FirstOrder => match program {
            Program::MinEvar { mu_target } => first_order::min_evar(r, alpha, mu_target),
            Program::MaxReturnEvar { evar_cap } => first_order::max_return_evar(r, alpha, evar_cap),
            _ => Err(Error::Config(
                "the first-order backend only solves EVaR programs".into(),
            )),
        },
    }
}

fn check_target(r: &ReturnsMatrix, mu_target: Option<f64>) -> Result<Option<Vec<usize>>> {
    let Some(m) = mu_target else { return Ok(None) };
    if !m.is_finite() {
        return Err(Error::NonFinite("mu_target"));
    }
    let means = r.means();
    let best = means.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let tol = 1e-12 * (1.0 + best.abs());
    if m > best + tol {
        return Err(Error::Infeasible(format!(
            "return target {m} exceeds the largest asset mean {best}"
        )));
    }
    // Target at the largest mean: only the top assets remain, and the cone
    // solver has no interior to work with, so solve on them directly.
    if m >= best - tol {
        let top = (0..means.len()).filter(|&i| means[i] >= best - tol).collect();
        return Ok(Some(top));
    }
    Ok(None)
}

fn expand(n: usize, cols: &[usize], w: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; n];
    for (&c, &x) in cols.iter().zip(w) {
        out[c] = x;
    }
    out
}

/// Clips to the simplex; solver output is off by its tolerance.
pub(crate) fn clip_weights(w: &[f64]) -> Result<Vec<f64>> {
    let mut out: Vec<f64> = w.iter().map(|x| if x.is_finite() { x.max(0.0) } else { f64::NAN }).collect();
    let s: f64 = out.iter().sum();
    if !(s > 0.0) || !s.is_finite() {
        return Err(Error::SolverFailure("solver returned unusable weights".into()));
    }
    out.iter_mut().for_each(|x| *x /= s);
    Ok(out)
}

/// Evaluates EVaR at `w` and rebuilds a consistent certificate.
pub(crate) fn evar_solution(
    r: &ReturnsMatrix,
    alpha: f64,
    w: Vec<f64>,
    z_hint: Option<f64>,
    status: SolveStatus,
    iterations: usize,
) -> Result<PortfolioSolution> {
    let losses = r.losses(&w);
    let ev = risk::evar_scalar_hint(&losses, alpha, z_hint)?;
    let max = losses.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let z = if ev.z > 0.0 { ev.z } else { 1e-12 * (1.0 + max.abs()) };
    let sum: f64 = losses.iter().map(|l| ((l - max) / z).exp()).sum();
    let q = max + z * sum.ln();
    let u = losses.iter().map(|l| z * ((l - q) / z).exp()).collect();
    Ok(PortfolioSolution {
        mean_return: r.mean_return(&w),
        weights: w,
        objective: ev.value,
        status,
        iterations,
        certificate: Some(EvarCertificate { q, z, u }),
    })
}

fn status_of(s: &ConicSolution) -> Result<SolveStatus> {
    match s.status {
        ConicStatus::Solved | ConicStatus::AlmostSolved => Ok(SolveStatus::Optimal),
        ConicStatus::MaxIterations => Ok(SolveStatus::MaxIterations),
        ConicStatus::PrimalInfeasible => Err(Error::Infeasible("cone solver certified infeasibility".into())),
        other => Err(Error::SolverFailure(format!("cone solver stopped with {other:?}"))),
    }
}

/// Column layout `[w (N), q, z, u (T)]`, returns pre-scaled by `scale`.
/// Adds simplex, return floor and the exponential cones; the caller adds
/// its own objective and any extra nonnegative row before the cones are
/// closed, so it receives the problem with the nonnegative rows still open.
struct EvarLayout {
    n: usize,
    t: usize,
}

impl EvarLayout {
    fn q(&self) -> usize {
        self.n
    }
    fn z(&self) -> usize {
        self.n + 1
    }
    fn u(&self, j: usize) -> usize {
        self.n + 2 + j
    }
    fn width(&self) -> usize {
        self.n + 2 + self.t
    }

    fn build(&self, r: &DMatrix<f64>, floor: Option<(Vec<f64>, f64)>, extra: &[(Vec<(usize, f64)>, f64)]) -> ConicProblem {
        let mut pr = ConicProblem::new(self.width());
        let ones: Vec<(usize, f64)> = (0..self.n).map(|i| (i, 1.0)).collect();
        pr.row(&ones, 1.0);
        pr.cones.push(Cone::Zero(1));
        let start = pr.m();
        if let Some((mu, m)) = floor {
            let coefs: Vec<(usize, f64)> = mu.iter().enumerate().map(|(i, v)| (i, -v)).collect();
            pr.row(&coefs, -m);
        }
        for i in 0..self.n {
            pr.row(&[(i, -1.0)], 0.0);
        }
        let mut budget = vec![(self.z(), -1.0)];
        budget.extend((0..self.t).map(|j| (self.u(j), 1.0)));
        pr.row(&budget, 0.0);
        for (coefs, b) in extra {
            pr.row(coefs, *b);
        }
        pr.cones.push(Cone::Nonnegative(pr.m() - start));
        // (-r_j w - q, z, u_j) ∈ K_exp
        for j in 0..self.t {
            let mut first: Vec<(usize, f64)> = (0..self.n).map(|i| (i, r[(j, i)])).collect();
            first.push((self.q(), 1.0));
            pr.row(&first, 0.0);
            pr.row(&[(self.z(), -1.0)], 0.0);
            pr.row(&[(self.u(j), -1.0)], 0.0);
            pr.cones.push(Cone::Exponential);
        }
        pr
    }
}

fn scale_of(r: &ReturnsMatrix) -> f64 {
    let rms = r.rms();
    if rms > 0.0 { 1.0 / rms } else { 1.0 }
}

/// Minimum EVaR over long-only weights, with `mean_return ≥ mu_target` when
/// a target is given.
pub fn min_evar(
    r: &ReturnsMatrix,
    alpha: f64,
    mu_target: Option<f64>,
    solver: &dyn ConicSolver,
) -> Result<PortfolioSolution> {
    if let Some(top) = check_target(r, mu_target)? {
        let sub = min_evar(&r.select(&top), alpha, None, solver)?;
        let w = expand(r.n_assets(), &top, &sub.weights);
        return evar_solution(r, alpha, w, None, sub.status, sub.iterations);
    }
    let s = scale_of(r);
    let rs = r.matrix() * s;
    let lay = EvarLayout { n: r.n_assets(), t: r.n_periods() };
    let floor = mu_target.map(|m| (r.means().iter().map(|v| v * s).collect(), m * s));
    let mut pr = lay.build(&rs, floor, &[]);
    pr.c[lay.q()] = 1.0;
    pr.c[lay.z()] = -(r.n_periods() as f64 * alpha).ln();
    let sol = solver.solve(&pr)?;
    let status = status_of(&sol)?;
    let w = clip_weights(&sol.x[..lay.n])?;
    let z_hint = Some(sol.x[lay.z()] / s);
    let out = evar_solution(r, alpha, w, z_hint, status, sol.iterations)?;
    if let Some(m) = mu_target {
        if out.mean_return < m - 1e-6 {
            return Err(Error::SolverFailure(format!(
                "return floor violated: {} < {m}",
                out.mean_return
            )));
        }
    }
    Ok(out)
}

/// Maximum mean return subject to `EVaR ≤ evar_cap`.
pub fn max_return_evar(
    r: &ReturnsMatrix,
    alpha: f64,
    evar_cap: f64,
    solver: &dyn ConicSolver,
) -> Result<PortfolioSolution> {
    if evar_cap.is_nan() {
        return Err(Error::NonFinite("evar_cap"));
    }
    let means = r.means();
    if evar_cap == f64::INFINITY {
        let best = means.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let top: Vec<usize> = (0..means.len()).filter(|&i| means[i] == best).collect();
        let w = expand(r.n_assets(), &top, &vec![1.0 / top.len() as f64; top.len()]);
        return Ok(finish_max_return(r, alpha, w, SolveStatus::Optimal, 0)?.0);
    }
    let s = scale_of(r);
    let rs = r.matrix() * s;
    let lay = EvarLayout { n: r.n_assets(), t: r.n_periods() };
    let log_ta = (r.n_periods() as f64 * alpha).ln();
    // cap - q + z ln(Tα) ≥ 0
    let cap_row = (vec![(lay.q(), 1.0), (lay.z(), -log_ta)], evar_cap * s);
    let mut pr = lay.build(&rs, None, &[cap_row]);
    for (i, m) in means.iter().enumerate() {
        pr.c[i] = -m * s;
    }
    let sol = solver.solve(&pr)?;
    match status_of(&sol) {
        Ok(status) => {
            let w = clip_weights(&sol.x[..lay.n])?;
            let (out, evar) = finish_max_return(r, alpha, w, status, sol.iterations)?;
            if evar > evar_cap + 1e-6 * (1.0 + evar_cap.abs()) {
                warn!(evar, cap = evar_cap, "EVaR cap exceeded after polishing");
            }
            Ok(out)
        }
        Err(e) => {
            // A cap equal to the minimum EVaR leaves a single feasible
            // point and no interior; settle it against the minimizer.
            let floor = min_evar(r, alpha, None, solver)?;
            if floor.objective <= evar_cap + 1e-9 * (1.0 + evar_cap.abs()) {
                let iterations = floor.iterations;
                Ok(finish_max_return(r, alpha, floor.weights, SolveStatus::Optimal, iterations)?.0)
            } else if matches!(e, Error::Infeasible(_)) {
                Err(Error::Infeasible(format!(
                    "EVaR cap {evar_cap} below the minimum attainable {}",
                    floor.objective
                )))
            } else {
                Err(e)
            }
        }
    }
}

fn finish_max_return(
    r: &ReturnsMatrix,
    alpha: f64,
    w: Vec<f64>,
    status: SolveStatus,
    iterations: usize,
) -> Result<(PortfolioSolution, f64)> {
    let mut out = evar_solution(r, alpha, w, None, status, iterations)?;
    let evar = out.objective;
    out.objective = out.mean_return;
    Ok((out, evar))
}

/// Minimum CVaR as the Rockafellar-Uryasev linear program.
pub fn min_cvar(
    r: &ReturnsMatrix,
    alpha: f64,
    mu_target: Option<f64>,
    solver: &dyn ConicSolver,
) -> Result<PortfolioSolution> {
    let finish = |w: Vec<f64>, status, iterations| -> Result<PortfolioSolution> {
        let objective = conditional_value_at_risk(&r.losses(&w), alpha)?;
        Ok(PortfolioSolution {
            mean_return: r.mean_return(&w),
            weights: w,
            objective,
            status,
            iterations,
            certificate: None,
        })
    };
    if let Some(top) = check_target(r, mu_target)? {
        let sub = min_cvar(&r.select(&top), alpha, None, solver)?;
        return finish(expand(r.n_assets(), &top, &sub.weights), sub.status, sub.iterations);
    }
    let (n, t) = (r.n_assets(), r.n_periods());
    let s = scale_of(r);
    let rs = r.matrix() * s;
    // [w (N), c, e (T)]: min c + Σ e / (Tα), e_j ≥ -r_j w - c, e ≥ 0
    let c_col = n;
    let e_col = |j: usize| n + 1 + j;
    let mut pr = ConicProblem::new(n + 1 + t);
    pr.c[c_col] = 1.0;
    for j in 0..t {
        pr.c[e_col(j)] = 1.0 / (t as f64 * alpha);
    }
    let ones: Vec<(usize, f64)> = (0..n).map(|i| (i, 1.0)).collect();
    pr.row(&ones, 1.0);
    pr.cones.push(Cone::Zero(1));
    let start = pr.m();
    if let Some(m) = mu_target {
        let coefs: Vec<(usize, f64)> = r.means().iter().enumerate().map(|(i, v)| (i, -v * s)).collect();
        pr.row(&coefs, -m * s);
    }
    for i in 0..n {
        pr.row(&[(i, -1.0)], 0.0);
    }
    for j in 0..t {
        pr.row(&[(e_col(j), -1.0)], 0.0);
        let mut coefs: Vec<(usize, f64)> = (0..n).map(|i| (i, -rs[(j, i)])).collect();
        coefs.push((c_col, -1.0));
        coefs.push((e_col(j), -1.0));
        pr.row(&coefs, 0.0);
    }
    pr.cones.push(Cone::Nonnegative(pr.m() - start));
    let sol = solver.solve(&pr)?;
    let status = status_of(&sol)?;
    finish(clip_weights(&sol.x[..n])?, status, sol.iterations)
}

/// Minimum sample variance.
pub fn min_variance(
    r: &ReturnsMatrix,
    mu_target: Option<f64>,
    solver: &dyn ConicSolver,
) -> Result<PortfolioSolution> {
    let cov = r.covariance();
    let finish = |w: Vec<f64>, status, iterations| -> Result<PortfolioSolution> {
        let x = nalgebra::DVector::from_column_slice(&w);
        let objective = (x.transpose() * &cov * &x)[(0, 0)];
        Ok(PortfolioSolution {
            mean_return: r.mean_return(&w),
            weights: w,
            objective,
            status,
            iterations,
            certificate: None,
        })
    };
    if let Some(top) = check_target(r, mu_target)? {
        let sub = min_variance(&r.select(&top), None, solver)?;
        return finish(expand(r.n_assets(), &top, &sub.weights), sub.status, sub.iterations);
    }
    let n = r.n_assets();
    let s = scale_of(r);
    let mut pr = ConicProblem::new(n);
    // ½ wᵀ (2 s² Σ) w
    for j in 0..n {
        for i in 0..=j {
            pr.p.push(i, j, 2.0 * s * s * cov[(i, j)]);
        }
    }
    let ones: Vec<(usize, f64)> = (0..n).map(|i| (i, 1.0)).collect();
    pr.row(&ones, 1.0);
    pr.cones.push(Cone::Zero(1));
    let start = pr.m();
    if let Some(m) = mu_target {
        let coefs: Vec<(usize, f64)> = r.means().iter().enumerate().map(|(i, v)| (i, -v * s)).collect();
        pr.row(&coefs, -m * s);
    }
    for i in 0..n {
        pr.row(&[(i, -1.0)], 0.0);
    }
    pr.cones.push(Cone::Nonnegative(pr.m() - start));
    let sol = solver.solve(&pr)?;
    let status = status_of(&sol)?;
    finish(clip_weights(&sol.x)?, status, sol.iterations)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn random_returns(t: usize, n: usize, seed: u64) -> ReturnsMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let drift: Vec<f64> = (0..n).map(|i| 0.001 * i as f64).collect();
        let vol: Vec<f64> = (0..n).map(|i| 0.01 + 0.005 * i as f64).collect();
        let rows: Vec<Vec<f64>> = (0..t)
            .map(|_| {
                let common: f64 = StandardNormal.sample(&mut rng);
                (0..n)
                    .map(|i| {
                        let e: f64 = StandardNormal.sample(&mut rng);
                        drift[i] + vol[i] * (0.4 * common + e)
                    })
                    .collect()
            })
            .collect();
        ReturnsMatrix::from_rows(&rows).unwrap()
    }

    /// Brute force over `w = (k/K, 1 - k/K)`.
    fn two_asset_grid(r: &ReturnsMatrix, alpha: f64, k: usize) -> Vec<(f64, f64, f64)> {
        (0..=k)
            .map(|i| {
                let a = i as f64 / k as f64;
                let w = [a, 1.0 - a];
                (a, evar_scalar(&r.losses(&w), alpha).unwrap().value, r.mean_return(&w))
            })
            .collect()
    }

    #[test]
    fn min_evar_two_assets_matches_grid() {
        let r = random_returns(120, 2, 7);
        let s = min_evar(&r, 0.05, None, &Clarabel::default()).unwrap();
        let grid = two_asset_grid(&r, 0.05, 10_000);
        let best = grid.iter().map(|g| g.1).fold(f64::INFINITY, f64::min);
        assert!(s.objective <= best + 1e-9, "{} vs grid {best}", s.objective);
        assert!(s.objective >= best - 1e-5);
    }

    #[test]
    fn max_return_two_assets_matches_grid() {
        let r = random_returns(120, 2, 8);
        let floor = min_evar(&r, 0.05, None, &Clarabel::default()).unwrap();
        let cap = floor.objective * 1.2 + 0.001;
        let s = max_return_evar(&r, 0.05, cap, &Clarabel::default()).unwrap();
        let grid = two_asset_grid(&r, 0.05, 10_000);
        let best = grid
            .iter()
            .filter(|g| g.1 <= cap)
            .map(|g| g.2)
            .fold(f64::NEG_INFINITY, f64::max);
        assert!(s.objective >= best - 1e-9);
        assert!(s.objective <= best + 1e-5);
        assert!(evar_scalar(&r.losses(&s.weights), 0.05).unwrap().value <= cap + 1e-6);
    }

    #[test]
    fn certificate_is_consistent() {
        let r = random_returns(200, 4, 2);
        let alpha = 0.05;
        let mu = r.means().iter().sum::<f64>() / 4.0;
        let s = min_evar(&r, alpha, Some(mu), &Clarabel::default()).unwrap();
        let c = s.certificate.as_ref().unwrap();
        assert!(c.z > 0.0);
        assert!((c.u.iter().sum::<f64>() - c.z).abs() < 1e-9 * c.z);
        let bound = c.q + c.z * (1.0 / (200.0 * alpha)).ln();
        assert!((bound - s.objective).abs() < 1e-5);
        let w_sum: f64 = s.weights.iter().sum();
        assert!((w_sum - 1.0).abs() < 1e-9 && s.weights.iter().all(|w| *w >= 0.0));
        assert!(s.mean_return >= mu - 1e-6);
    }

    #[test]
    fn target_above_best_mean_is_infeasible() {
        let r = random_returns(60, 3, 1);
        let best = r.means().iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let e = min_evar(&r, 0.05, Some(best + 1e-3), &Clarabel::default());
        assert!(matches!(e, Err(Error::Infeasible(_))));
    }

    #[test]
    fn target_at_best_mean_picks_that_asset() {
        let r = random_returns(60, 3, 1);
        let means = r.means();
        let (arg, best) = means
            .iter()
            .copied()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |a, (i, m)| if m > a.1 { (i, m) } else { a });
        let s = min_evar(&r, 0.05, Some(best), &Clarabel::default()).unwrap();
        assert!((s.weights[arg] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cap_below_minimum_is_infeasible() {
        let r = random_returns(80, 3, 3);
        let floor = min_evar(&r, 0.05, None, &Clarabel::default()).unwrap();
        let e = max_return_evar(&r, 0.05, floor.objective - 1e-3, &Clarabel::default());
        assert!(matches!(e, Err(Error::Infeasible(_))), "{e:?}");
    }

    #[test]
    fn cap_at_minimum_returns_minimizer() {
        let r = random_returns(80, 3, 3);
        let floor = min_evar(&r, 0.05, None, &Clarabel::default()).unwrap();
        let s = max_return_evar(&r, 0.05, floor.objective, &Clarabel::default()).unwrap();
        for (a, b) in s.weights.iter().zip(&floor.weights) {
            assert!((a - b).abs() < 1e-3, "{:?} vs {:?}", s.weights, floor.weights);
        }
    }

    #[test]
    fn infinite_cap_returns_best_asset() {
        let r = random_returns(80, 3, 5);
        let s = max_return_evar(&r, 0.05, f64::INFINITY, &Clarabel::default()).unwrap();
        let best = r.means().iter().copied().fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(s.objective, best);
    }

    #[test]
    fn min_variance_closed_form() {
        // Zero sample correlation by construction; variance of asset 2 is
        // four times that of asset 1, so w ∝ (1/v1, 1/v2) = (0.8, 0.2).
        let a = [1.0, -1.0, 1.0, -1.0];
        let b = [2.0, 2.0, -2.0, -2.0];
        let rows: Vec<Vec<f64>> = (0..4).map(|t| vec![0.01 * a[t], 0.01 * b[t]]).collect();
        let r = ReturnsMatrix::from_rows(&rows).unwrap();
        let s = min_variance(&r, None, &Clarabel::default()).unwrap();
        assert!((s.weights[0] - 0.8).abs() < 1e-6, "{:?}", s.weights);
        let equal: Vec<Vec<f64>> = (0..4).map(|t| vec![0.01 * a[t], 0.005 * b[t]]).collect();
        let s = min_variance(&ReturnsMatrix::from_rows(&equal).unwrap(), None, &Clarabel::default()).unwrap();
        assert!((s.weights[0] - 0.5).abs() < 1e-6);
    }

    #[test]
    fn min_variance_two_assets_general() {
        let r = random_returns(150, 2, 9);
        let c = r.covariance();
        let w1 = ((c[(1, 1)] - c[(0, 1)]) / (c[(0, 0)] + c[(1, 1)] - 2.0 * c[(0, 1)])).clamp(0.0, 1.0);
        let s = min_variance(&r, None, &Clarabel::default()).unwrap();
        assert!((s.weights[0] - w1).abs() < 1e-6);
    }

    #[test]
    fn min_cvar_matches_grid() {
        let r = random_returns(100, 2, 11);
        let s = min_cvar(&r, 0.05, None, &Clarabel::default()).unwrap();
        let best = (0..=10_000)
            .map(|i| {
                let a = i as f64 / 10_000.0;
                conditional_value_at_risk(&r.losses(&[a, 1.0 - a]), 0.05).unwrap()
            })
            .fold(f64::INFINITY, f64::min);
        assert!(s.objective <= best + 1e-9);
        assert!(s.objective >= best - 1e-5);
    }

    #[test]
    fn first_order_agrees_with_cone_solver() {
        let r = random_returns(100, 3, 12);
        let mu = r.means().iter().sum::<f64>() / 3.0;
        for target in [None, Some(mu)] {
            let a = solve(Program::MinEvar { mu_target: target }, &r, 0.05, Backend::Conic).unwrap();
            let b = solve(Program::MinEvar { mu_target: target }, &r, 0.05, Backend::FirstOrder).unwrap();
            assert!((a.objective - b.objective).abs() < 1e-6, "{} {}", a.objective, b.objective);
        }
        let cap = solve(Program::MinEvar { mu_target: None }, &r, 0.05, Backend::Conic).unwrap().objective * 1.5;
        let a = solve(Program::MaxReturnEvar { evar_cap: cap }, &r, 0.05, Backend::Conic).unwrap();
        let b = solve(Program::MaxReturnEvar { evar_cap: cap }, &r, 0.05, Backend::FirstOrder).unwrap();
        assert!((a.objective - b.objective).abs() < 1e-6, "{} {}", a.objective, b.objective);
    }

    #[test]
    fn first_order_rejects_baselines() {
        let r = random_returns(30, 2, 0);
        assert!(solve(Program::MinVariance { mu_target: None }, &r, 0.05, Backend::FirstOrder).is_err());
    }

    #[test]
    fn objective_ordering_across_programs() {
        // At their own optima: min CVaR ≤ CVaR(min-EVaR weights) ≤ min EVaR.
        let r = random_returns(150, 4, 13);
        let e = min_evar(&r, 0.05, None, &Clarabel::default()).unwrap();
        let c = min_cvar(&r, 0.05, None, &Clarabel::default()).unwrap();
        let c_at_e = conditional_value_at_risk(&r.losses(&e.weights), 0.05).unwrap();
        assert!(c.objective <= c_at_e + 1e-7);
        assert!(c_at_e <= e.objective + 1e-9);
    }

    #[test]
    fn min_evar_convex_in_target() {
        let r = random_returns(120, 3, 14);
        let means = r.means();
        let lo = means.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = means.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let h = |m: f64| min_evar(&r, 0.05, Some(m), &Clarabel::default()).unwrap().objective;
        let (a, b) = (lo + 0.2 * (hi - lo), lo + 0.9 * (hi - lo));
        let mid = h(0.5 * (a + b));
        assert!(mid <= 0.5 * (h(a) + h(b)) + 1e-7);
        assert!(h(a) <= h(b) + 1e-7);
    }
}
