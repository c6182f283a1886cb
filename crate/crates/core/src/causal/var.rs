//! Reduced-form vector autoregression by ordinary least squares.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Smallest singular value, relative to the largest, accepted in the design
/// matrix.
const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct VarFit {
    pub lag: usize,
    /// `coeff[k - 1]` is the d×d matrix multiplying `x(t - k)`.
    pub coeff: Vec<DMatrix<f64>>,
    /// OLS standard errors laid out like `coeff`.
    pub stderr: Vec<DMatrix<f64>>,
    pub intercept: DVector<f64>,
    /// `(T - lag) × d`, column-centred.
    pub residuals: DMatrix<f64>,
}

/// Fit `x(t) = c + Σ_k M_k x(t-k) + e(t)` on a `T × d` data matrix (one row
/// per time step).
pub fn fit_var(data: &DMatrix<f64>, lag: usize) -> Result<VarFit> {
    if lag == 0 {
        return Err(Error::InvalidLag);
    }
    let (t_len, d) = data.shape();
    if d == 0 {
        return Err(Error::Dimension("no variables".into()));
    }
    let needed = lag * d + d + 2;
    if t_len < needed {
        return Err(Error::InsufficientSamples {
            needed,
            got: t_len,
        });
    }
    if data.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("VAR input"));
    }

    let n = t_len - lag;
    let p = 1 + lag * d;
    let mut x = DMatrix::<f64>::zeros(n, p);
    let mut y = DMatrix::<f64>::zeros(n, d);
    for row in 0..n {
        let t = row + lag;
        x[(row, 0)] = 1.0;
        for k in 1..=lag {
            for j in 0..d {
                x[(row, 1 + (k - 1) * d + j)] = data[(t - k, j)];
            }
        }
        for j in 0..d {
            y[(row, j)] = data[(t, j)];
        }
    }

    let svd = x.clone().svd(true, true);
    let s_max = svd.singular_values.max();
    let s_min = svd.singular_values.min();
    if !(s_max > 0.0) || s_min <= RANK_TOL * s_max {
        return Err(Error::SingularRegressors);
    }
    let u = svd.u.as_ref().expect("u requested");
    let v_t = svd.v_t.as_ref().expect("v_t requested");
    let s_inv = DMatrix::from_diagonal(&svd.singular_values.map(|s| 1.0 / s));
    let beta = v_t.transpose() * &s_inv * (u.transpose() * &y);
    // (XᵀX)⁻¹ = V Σ⁻² Vᵀ
    let xtx_inv = v_t.transpose() * (&s_inv * &s_inv) * v_t;

    let mut residuals = &y - &x * &beta;
    for j in 0..d {
        let mean = residuals.column(j).mean();
        residuals.column_mut(j).add_scalar_mut(-mean);
    }

    let dof = (n - p).max(1) as f64;
    let sigma2: Vec<f64> = (0..d)
        .map(|j| residuals.column(j).norm_squared() / dof)
        .collect();

    let mut coeff = Vec::with_capacity(lag);
    let mut stderr = Vec::with_capacity(lag);
    for k in 1..=lag {
        let mut m = DMatrix::zeros(d, d);
        let mut se = DMatrix::zeros(d, d);
        for target in 0..d {
            for source in 0..d {
                let r = 1 + (k - 1) * d + source;
                m[(target, source)] = beta[(r, target)];
                se[(target, source)] = (sigma2[target] * xtx_inv[(r, r)]).max(0.0).sqrt();
            }
        }
        coeff.push(m);
        stderr.push(se);
    }
    let intercept = DVector::from_iterator(d, (0..d).map(|j| beta[(0, j)]));

    Ok(VarFit {
        lag,
        coeff,
        stderr,
        intercept,
        residuals,
    })
}
