//! FastICA with a `tanh` contrast, estimating one component at a time
//! (deflation) on symmetrically whitened data.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use tracing::debug;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FastIca {
    pub max_iter: usize,
    pub tol: f64,
    pub seed: u64,
}

impl Default for FastIca {
    fn default() -> Self {
        FastIca {
            max_iter: 1000,
            tol: 1e-6,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IcaFit {
    /// `s = W (x - mean)`; one row per recovered component.
    pub unmixing: DMatrix<f64>,
    pub mean: DVector<f64>,
    pub iterations: Vec<usize>,
}

impl FastIca {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// `data` is `T × d`, one observation per row.
    pub fn fit(&self, data: &DMatrix<f64>) -> Result<IcaFit> {
        let (n, d) = data.shape();
        if d < 2 {
            return Err(Error::Dimension("ICA needs at least 2 variables".into()));
        }
        if n <= d {
            return Err(Error::InsufficientSamples { needed: d + 1, got: n });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("ICA input"));
        }

        let mean = DVector::from_iterator(d, (0..d).map(|j| data.column(j).mean()));
        let mut centred = data.clone();
        for j in 0..d {
            centred.column_mut(j).add_scalar_mut(-mean[j]);
        }
        let cov = centred.transpose() * &centred / n as f64;
        let eig = SymmetricEigen::new(cov);
        let lmax = eig.eigenvalues.max();
        let lmin = eig.eigenvalues.min();
        if !(lmax > 0.0) || lmin <= 1e-12 * lmax {
            return Err(Error::RankDeficient);
        }
        // K = E Λ^{-1/2} Eᵀ
        let inv_sqrt = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| 1.0 / l.sqrt()));
        let whitening = &eig.eigenvectors * inv_sqrt * eig.eigenvectors.transpose();
        let z = &centred * &whitening;

        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut rows: Vec<DVector<f64>> = Vec::with_capacity(d);
        let mut iterations = Vec::with_capacity(d);
        for _ in 0..d {
            let mut w = DVector::from_fn(d, |_, _| StandardNormal.sample(&mut rng));
            deflate(&mut w, &rows);
            w.normalize_mut();

            let mut converged = None;
            for it in 1..=self.max_iter {
                let y = &z * &w;
                let g = y.map(f64::tanh);
                let g_prime_mean = g.iter().map(|v| 1.0 - v * v).sum::<f64>() / n as f64;
                let mut w_new = z.transpose() * &g / n as f64 - &w * g_prime_mean;
                deflate(&mut w_new, &rows);
                let norm = w_new.norm();
                if !(norm > 0.0) {
                    return Err(Error::NoConvergence("FastICA", it));
                }
                w_new /= norm;
                let lim = (1.0 - w_new.dot(&w).abs()).abs();
                w = w_new;
                if lim < self.tol {
                    converged = Some(it);
                    break;
                }
            }
            match converged {
                Some(it) => iterations.push(it),
                None => return Err(Error::NoConvergence("FastICA", self.max_iter)),
            }
            rows.push(w);
        }
        debug!(?iterations, "FastICA converged");

        let w_white = DMatrix::from_fn(d, d, |i, j| rows[i][j]);
        Ok(IcaFit {
            unmixing: w_white * whitening,
            mean,
            iterations,
        })
    }
}

/// Gram-Schmidt against the already extracted components.
fn deflate(w: &mut DVector<f64>, found: &[DVector<f64>]) {
    for prev in found {
        let proj = w.dot(prev);
        w.axpy(-proj, prev, 1.0);
    }
}

/// Convenience wrapper with default settings and the given seed.
pub fn fast_ica(residuals: &DMatrix<f64>, seed: u64) -> Result<DMatrix<f64>> {
    FastIca::default().with_seed(seed).fit(residuals).map(|f| f.unmixing)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::causal::testutil::{align_rows, laplace};

    fn mixture(a: &DMatrix<f64>, n: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = a.nrows();
        let s = DMatrix::from_fn(n, d, |_, _| laplace(&mut rng, 1.0 / 2f64.sqrt()));
        s * a.transpose()
    }

    #[test]
    fn recovers_inverse_mixing() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.6, 0.4, 1.0]);
        let x = mixture(&a, 5000, 11);
        let w = fast_ica(&x, 0).unwrap();
        let target = a.clone().try_inverse().unwrap();
        let aligned = align_rows(&w, &target);
        let err = (&aligned - &target).abs().max();
        assert!(err < 0.05, "max abs error {err}\n{aligned}\n{target}");
    }

    #[test]
    fn identity_mixing_gives_permuted_identity() {
        let x = mixture(&DMatrix::identity(2, 2), 5000, 3);
        let w = fast_ica(&x, 0).unwrap();
        let aligned = align_rows(&w, &DMatrix::identity(2, 2));
        assert!((&aligned - DMatrix::<f64>::identity(2, 2)).abs().max() < 0.05);
    }

    #[test]
    fn gaussian_sources_do_not_panic() {
        // Unidentifiable: either it settles somewhere or it reports
        // non-convergence, never anything else.
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = DMatrix::from_fn(2000, 2, |_, _| StandardNormal.sample(&mut rng));
        let ica = FastIca { max_iter: 200, ..FastIca::default() };
        match ica.fit(&x) {
            Ok(fit) => assert!(fit.unmixing.iter().all(|v| v.is_finite())),
            Err(e) => assert!(matches!(e, Error::NoConvergence(..)), "{e}"),
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.3, 0.0, 1.0]);
        let x = mixture(&a, 1000, 1);
        assert_eq!(fast_ica(&x, 4).unwrap(), fast_ica(&x, 4).unwrap());
    }

    #[test]
    fn rank_deficient_rejected() {
        let x = DMatrix::from_fn(100, 2, |i, _| (i as f64).sin());
        assert!(matches!(fast_ica(&x, 0), Err(Error::RankDeficient)));
    }
}
