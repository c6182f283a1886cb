//! VAR-LiNGAM: a least-squares VAR for the lagged structure, ICA-LiNGAM on
//! its residuals for the instantaneous structure.
//!
//! With `M_k` the reduced-form VAR coefficients and `B_0` the instantaneous
//! effects, the structural lagged effects are `B_k = (I - B_0) M_k`.

pub mod ica;
pub mod lingam;
pub mod var;

use std::fmt::Write as _;

use nalgebra::DMatrix;
use serde::ser::SerializeSeq;
use serde::{Serialize, Serializer};

use crate::data::AlignedPanel;
use crate::error::{Error, Result};

pub use ica::{fast_ica, FastIca, IcaFit};
pub use lingam::{causal_order, estimate_b0, hungarian};
pub use var::{fit_var, VarFit};

/// Lower limit on reported edge weights.
pub const DEFAULT_THRESHOLD: f64 = 0.05;
pub const DEFAULT_LAG: usize = 1;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CausalGraph {
    pub variables: Vec<String>,
    pub lag: usize,
    pub threshold: f64,
    /// Roots first.
    pub order: Vec<usize>,
    /// `b[0]` instantaneous, `b[k]` for `x(t - k)`. Entry `(i, j)` is the
    /// effect of variable `j` on variable `i`.
    #[serde(serialize_with = "serialize_matrices")]
    pub b: Vec<DMatrix<f64>>,
}

fn serialize_matrices<S: Serializer>(mats: &[DMatrix<f64>], s: S) -> std::result::Result<S::Ok, S::Error> {
    let mut seq = s.serialize_seq(Some(mats.len()))?;
    for m in mats {
        let rows: Vec<Vec<f64>> = m.row_iter().map(|r| r.iter().copied().collect()).collect();
        seq.serialize_element(&rows)?;
    }
    seq.end()
}

impl CausalGraph {
    pub fn variable(&self, name: &str) -> Result<usize> {
        self.variables
            .iter()
            .position(|v| v == name)
            .ok_or_else(|| Error::UnknownVariable(name.to_string()))
    }

    /// Surviving edges as `(source, lag, target, weight)`; lag 0 is
    /// instantaneous.
    pub fn edges(&self) -> Vec<Edge> {
        let mut out = Vec::new();
        for (lag, m) in self.b.iter().enumerate() {
            for target in 0..m.nrows() {
                for source in 0..m.ncols() {
                    let w = m[(target, source)];
                    if w != 0.0 && w.abs() >= self.threshold {
                        out.push(Edge {
                            source: self.variables[source].clone(),
                            lag,
                            target: self.variables[target].clone(),
                            weight: w,
                        });
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Edge {
    pub source: String,
    pub lag: usize,
    pub target: String,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LeadReport {
    pub source: String,
    pub target: String,
    pub threshold: f64,
    pub weight: f64,
    pub leads: bool,
    pub edges: Vec<Edge>,
}

impl LeadReport {
    /// Plain-text table of surviving edges followed by the verdict line.
    pub fn render(&self) -> String {
        let mut s = String::new();
        let rows: Vec<(String, String)> = self
            .edges
            .iter()
            .map(|e| {
                let src = if e.lag == 0 {
                    format!("{}(t)", e.source)
                } else {
                    format!("{}(t-{})", e.source, e.lag)
                };
                (format!("{src} --> {}(t)", e.target), format!("{:.2}", e.weight))
            })
            .collect();
        let width = rows.iter().map(|r| r.0.len()).max().unwrap_or(0).max("Direction".len());
        let _ = writeln!(s, "{:<width$}  Causal Graph Value", "Direction");
        let _ = writeln!(s, "{}", "-".repeat(width + 20));
        for (dir, val) in &rows {
            let _ = writeln!(s, "{dir:<width$}  {val}");
        }
        let _ = writeln!(s, "{}", "-".repeat(width + 20));
        let _ = writeln!(s, "threshold: {}", self.threshold);
        let _ = writeln!(
            s,
            "{}(t-1) --> {}(t): {:.4}",
            self.source, self.target, self.weight
        );
        let _ = writeln!(s, "leads: {}", self.leads);
        s
    }
}

/// Options for [`var_lingam`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VarLingam {
    pub lag: usize,
    pub threshold: f64,
    pub ica: FastIca,
}

impl Default for VarLingam {
    fn default() -> Self {
        VarLingam {
            lag: DEFAULT_LAG,
            threshold: DEFAULT_THRESHOLD,
            ica: FastIca::default(),
        }
    }
}

impl VarLingam {
    /// Fit on a `T × d` matrix whose columns are named by `variables`.
    pub fn fit(&self, data: &DMatrix<f64>, variables: &[String]) -> Result<CausalGraph> {
        if self.lag == 0 {
            return Err(Error::InvalidLag);
        }
        if self.threshold.is_nan() || self.threshold < 0.0 {
            return Err(Error::Config(format!("threshold must be nonnegative, got {}", self.threshold)));
        }
        if variables.len() != data.ncols() {
            return Err(Error::Dimension(format!(
                "{} names for {} columns",
                variables.len(),
                data.ncols()
            )));
        }
        let fit = fit_var(data, self.lag)?;
        let ica = self.ica.fit(&fit.residuals)?;
        let (b0, order) = estimate_b0(&ica.unmixing)?;
        let d = data.ncols();
        let i_minus_b0 = DMatrix::identity(d, d) - &b0;

        let mut b = Vec::with_capacity(self.lag + 1);
        b.push(b0);
        for m in &fit.coeff {
            b.push(&i_minus_b0 * m);
        }
        for m in &mut b {
            m.apply(|v| {
                if v.abs() < self.threshold {
                    *v = 0.0;
                }
            });
        }
        Ok(CausalGraph {
            variables: variables.to_vec(),
            lag: self.lag,
            threshold: self.threshold,
            order,
            b,
        })
    }
}

/// Variable names used for an [`AlignedPanel`].
pub const INDEX_VAR: &str = "Index";
pub const PORTFOLIO_VAR: &str = "Portfolio";

/// VAR-LiNGAM over `(index, portfolio)`.
pub fn var_lingam(panel: &AlignedPanel, lag: usize, threshold: f64, seed: u64) -> Result<CausalGraph> {
    let n = panel.len();
    let data = DMatrix::from_fn(n, 2, |t, j| if j == 0 { panel.index[t] } else { panel.portfolio[t] });
    VarLingam {
        lag,
        threshold,
        ica: FastIca::default().with_seed(seed),
    }
    .fit(&data, &[INDEX_VAR.to_string(), PORTFOLIO_VAR.to_string()])
}

/// Whether `source(t-1) -> target(t)` survives the graph's threshold.
pub fn leading_effect(graph: &CausalGraph, source: &str, target: &str) -> Result<LeadReport> {
    let s = graph.variable(source)?;
    let t = graph.variable(target)?;
    let weight = graph.b.get(1).map_or(0.0, |b1| b1[(t, s)]);
    Ok(LeadReport {
        source: source.to_string(),
        target: target.to_string(),
        threshold: graph.threshold,
        weight,
        leads: weight != 0.0 && weight.abs() >= graph.threshold,
        edges: graph.edges(),
    })
}


#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{simulate_var_lingam, LingamSystem};

    fn two_var_system() -> LingamSystem {
        LingamSystem {
            b0: DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.5, 0.0]),
            b1: DMatrix::from_row_slice(2, 2, &[0.3, 0.0, 0.2, 0.3]),
            noise_scale: vec![1.0, 1.0],
        }
    }

    fn names(d: usize) -> Vec<String> {
        (0..d).map(|i| format!("x{i}")).collect()
    }

    #[test]
    fn recovers_two_variable_system() {
        let sys = two_var_system();
        let data = simulate_var_lingam(&sys, 5000, 7);
        let g = VarLingam::default().fit(&data, &names(2)).unwrap();
        for (est, truth) in [(&g.b[0], &sys.b0), (&g.b[1], &sys.b1)] {
            for (e, t) in est.iter().zip(truth.iter()) {
                if *t != 0.0 {
                    assert!((e - t).abs() < 0.1, "est {est} truth {truth}");
                } else {
                    assert!(e.abs() < 0.05, "est {est} truth {truth}");
                }
            }
        }
    }

    #[test]
    fn infinite_threshold_prunes_everything() {
        let data = simulate_var_lingam(&two_var_system(), 2000, 1);
        let g = VarLingam {
            threshold: f64::INFINITY,
            ..VarLingam::default()
        }
        .fit(&data, &names(2))
        .unwrap();
        assert!(g.b.iter().all(|m| m.iter().all(|v| *v == 0.0)));
        assert!(g.edges().is_empty());
    }

    #[test]
    fn zero_lag_rejected() {
        let data = simulate_var_lingam(&two_var_system(), 200, 1);
        let r = VarLingam {
            lag: 0,
            ..VarLingam::default()
        }
        .fit(&data, &names(2));
        assert!(matches!(r, Err(Error::InvalidLag)));
    }

    fn graph_with_b1(weight: f64) -> CausalGraph {
        let mut b1 = DMatrix::zeros(2, 2);
        b1[(1, 0)] = weight;
        CausalGraph {
            variables: vec![INDEX_VAR.into(), PORTFOLIO_VAR.into()],
            lag: 1,
            threshold: 0.05,
            order: vec![0, 1],
            b: vec![DMatrix::zeros(2, 2), b1],
        }
    }

    #[test]
    fn lead_verdicts() {
        let r = leading_effect(&graph_with_b1(0.11), INDEX_VAR, PORTFOLIO_VAR).unwrap();
        assert!(r.leads);
        assert!(r.render().contains("leads: true"));
        assert!(!leading_effect(&graph_with_b1(0.04), INDEX_VAR, PORTFOLIO_VAR).unwrap().leads);
        assert!(!leading_effect(&graph_with_b1(0.0), INDEX_VAR, PORTFOLIO_VAR).unwrap().leads);
        assert!(matches!(
            leading_effect(&graph_with_b1(0.1), "Bonds", PORTFOLIO_VAR),
            Err(Error::UnknownVariable(_))
        ));
    }

    #[test]
    fn deterministic_pipeline() {
        let data = simulate_var_lingam(&two_var_system(), 1500, 3);
        let a = VarLingam::default().fit(&data, &names(2)).unwrap();
        let b = VarLingam::default().fit(&data, &names(2)).unwrap();
        assert_eq!(a, b);
        for (x, y) in a.b.iter().zip(&b.b) {
            assert!(x.iter().zip(y.iter()).all(|(p, q)| p.to_bits() == q.to_bits()));
        }
    }

    #[test]
    fn scale_equivariant_pattern() {
        let sys = two_var_system();
        let data = simulate_var_lingam(&sys, 5000, 12);
        let mut scaled = data.clone();
        scaled.column_mut(1).scale_mut(3.0);
        let a = VarLingam::default().fit(&data, &names(2)).unwrap();
        let b = VarLingam::default().fit(&scaled, &names(2)).unwrap();
        let pattern = |m: &DMatrix<f64>| m.map(|v| v != 0.0);
        assert_eq!(pattern(&a.b[0]), pattern(&b.b[0]));
    }

    #[test]
    fn structural_form_regenerates_series() {
        // x(t) = (I - B_0)^{-1} (B_1 x(t-1) + e(t)) with the true matrices.
        let sys = two_var_system();
        let data = simulate_var_lingam(&sys, 50, 4);
        let inv = (DMatrix::identity(2, 2) - &sys.b0).try_inverse().unwrap();
        for t in 1..50 {
            let x_t = data.row(t).transpose();
            let x_prev = data.row(t - 1).transpose();
            let e = (DMatrix::identity(2, 2) - &sys.b0) * &x_t - &sys.b1 * &x_prev;
            let regen = &inv * (&sys.b1 * &x_prev + e);
            assert!((regen - x_t).abs().max() < 1e-10);
        }
    }
}
