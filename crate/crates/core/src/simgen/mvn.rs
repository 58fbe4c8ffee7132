//! Zero-mean multivariate normal with sds `sd` and a constant off-diagonal
//! covariance.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub(crate) enum CorrelatedNormal {
    Independent(Vec<f64>),
    /// Lower Cholesky factor of the covariance.
    Factor(DMatrix<f64>),
}

impl CorrelatedNormal {
    pub fn new(sd: &[f64], off_diagonal: f64) -> Result<Self> {
        if off_diagonal == 0.0 || sd.len() < 2 {
            return Ok(CorrelatedNormal::Independent(sd.to_vec()));
        }
        let p = sd.len();
        let cov = DMatrix::from_fn(
            p,
            p,
            |i, j| if i == j { sd[i] * sd[i] } else { off_diagonal },
        );
        match cov.clone().cholesky() {
            Some(chol) => Ok(CorrelatedNormal::Factor(chol.l())),
            None => {
                let smallest = SymmetricEigen::new(cov)
                    .eigenvalues
                    .iter()
                    .copied()
                    .fold(f64::INFINITY, f64::min);
                Err(Error::Configuration(format!(
                    "candidate covariance is not positive definite after adding {off_diagonal} \
                     off the diagonal (smallest eigenvalue {smallest:.6e})"
                )))
            }
        }
    }

    pub fn sample_into<R: Rng>(&self, rng: &mut R, out: &mut [f64]) {
        match self {
            CorrelatedNormal::Independent(sd) => {
                for (o, s) in out.iter_mut().zip(sd) {
                    *o = s * rng.sample::<f64, _>(StandardNormal);
                }
            }
            CorrelatedNormal::Factor(l) => {
                let z = DVector::from_fn(l.nrows(), |_, _| rng.sample::<f64, _>(StandardNormal));
                let x = l * z;
                out.copy_from_slice(x.as_slice());
            }
        }
    }
}
