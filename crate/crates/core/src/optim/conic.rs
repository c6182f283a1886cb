//! Backend-neutral description of a conic program and the Clarabel
//! interior-point backend.
//!
//! Problems take the form
//!
//! ```text
//! minimize    ½ xᵀ P x + cᵀ x
//! subject to  A x + s = b,  s ∈ K
//! ```
//!
//! with `K` a product of zero, nonnegative and exponential cones. The
//! exponential cone is `{(x, y, z) : y exp(x / y) ≤ z, y > 0}`.

use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettings, DefaultSolver, IPSolver, SolverStatus, SupportedConeT,
};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cone {
    Zero(usize),
    Nonnegative(usize),
    /// One exponential cone; takes three consecutive rows.
    Exponential,
}

impl Cone {
    pub fn dim(&self) -> usize {
        match *self {
            Cone::Zero(n) | Cone::Nonnegative(n) => n,
            Cone::Exponential => 3,
        }
    }
}

/// Sparse matrix as `(row, col, value)` triplets.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Triplets {
    pub rows: Vec<usize>,
    pub cols: Vec<usize>,
    pub vals: Vec<f64>,
}

impl Triplets {
    pub fn push(&mut self, r: usize, c: usize, v: f64) {
        if v != 0.0 {
            self.rows.push(r);
            self.cols.push(c);
            self.vals.push(v);
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConicProblem {
    pub n: usize,
    /// Upper triangle of `P`; empty for linear objectives.
    pub p: Triplets,
    pub c: Vec<f64>,
    pub a: Triplets,
    pub b: Vec<f64>,
    pub cones: Vec<Cone>,
}

impl ConicProblem {
    pub fn new(n: usize) -> Self {
        ConicProblem {
            n,
            p: Triplets::default(),
            c: vec![0.0; n],
            a: Triplets::default(),
            b: Vec::new(),
            cones: Vec::new(),
        }
    }

    pub fn m(&self) -> usize {
        self.b.len()
    }

    /// Appends one constraint row `Σ coef x + s = b` and returns its index.
    /// Rows must be added in cone order.
    pub fn row(&mut self, coefs: &[(usize, f64)], b: f64) -> usize {
        let r = self.b.len();
        for &(c, v) in coefs {
            self.a.push(r, c, v);
        }
        self.b.push(b);
        r
    }

    fn validate(&self) -> Result<()> {
        let dims: usize = self.cones.iter().map(Cone::dim).sum();
        if dims != self.m() {
            return Err(Error::Dimension(format!(
                "cones cover {dims} rows, problem has {}",
                self.m()
            )));
        }
        if self.c.len() != self.n
            || self.a.cols.iter().chain(&self.p.cols).any(|&c| c >= self.n)
            || self.p.rows.iter().zip(&self.p.cols).any(|(r, c)| r > c)
        {
            return Err(Error::Dimension("conic problem shape".into()));
        }
        let finite = self.c.iter().chain(&self.b).chain(&self.a.vals).chain(&self.p.vals);
        if finite.into_iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("conic problem data"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConicStatus {
    Solved,
    AlmostSolved,
    PrimalInfeasible,
    DualInfeasible,
    MaxIterations,
    Failed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConicSolution {
    pub x: Vec<f64>,
    pub status: ConicStatus,
    pub objective: f64,
    pub iterations: usize,
}

pub trait ConicSolver: Send + Sync {
    fn solve(&self, problem: &ConicProblem) -> Result<ConicSolution>;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Clarabel {
    pub max_iter: u32,
}

impl Default for Clarabel {
    fn default() -> Self {
        Clarabel { max_iter: 10_000 }
    }
}

impl ConicSolver for Clarabel {
    fn solve(&self, pr: &ConicProblem) -> Result<ConicSolution> {
        pr.validate()?;
        let p = CscMatrix::new_from_triplets(pr.n, pr.n, pr.p.rows.clone(), pr.p.cols.clone(), pr.p.vals.clone());
        let a = CscMatrix::new_from_triplets(pr.m(), pr.n, pr.a.rows.clone(), pr.a.cols.clone(), pr.a.vals.clone());
        let cones: Vec<SupportedConeT<f64>> = pr
            .cones
            .iter()
            .map(|c| match *c {
                Cone::Zero(n) => SupportedConeT::ZeroConeT(n),
                Cone::Nonnegative(n) => SupportedConeT::NonnegativeConeT(n),
                Cone::Exponential => SupportedConeT::ExponentialConeT(),
            })
            .collect();
        let settings = DefaultSettings {
            verbose: false,
            max_iter: self.max_iter,
            ..DefaultSettings::default()
        };
        let mut solver = DefaultSolver::new(&p, &pr.c, &a, &pr.b, &cones, settings)
            .map_err(|e| Error::SolverFailure(format!("{e:?}")))?;
        solver.solve();
        let sol = &solver.solution;
        let status = match sol.status {
            SolverStatus::Solved => ConicStatus::Solved,
            SolverStatus::AlmostSolved => ConicStatus::AlmostSolved,
            SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => {
                ConicStatus::PrimalInfeasible
            }
            SolverStatus::DualInfeasible | SolverStatus::AlmostDualInfeasible => {
                ConicStatus::DualInfeasible
            }
            SolverStatus::MaxIterations | SolverStatus::MaxTime => ConicStatus::MaxIterations,
            _ => ConicStatus::Failed,
        };
        Ok(ConicSolution {
            x: sol.x.clone(),
            status,
            objective: sol.obj_val,
            iterations: sol.iterations as usize,
        })
    }
}
