//! Differentiable fitness oracles.
//!
//! An [`Oracle`] maps an `N × M` input (one-hot sequence or a relaxed PSSM)
//! to a fitness score together with its exact input gradient. Three analytic
//! oracles ship with the crate; each can be saved to and loaded from a JSON
//! weight file.

mod brute;
pub(crate) mod io;
mod mlp;
mod motif;
mod quadratic;

pub use brute::{brute_force_optimum, BruteForceResult, BRUTE_FORCE_CAP};
pub use io::{load_oracle, parse_oracle, save_oracle, write_oracle_json, AnyOracle};
pub use mlp::{DenseLayer, MlpOracle};
pub use motif::MotifOracle;
pub use quadratic::QuadraticOracle;

use crate::error::{Error, Result};
use crate::seq::{Matrix, OneHotSeq};

/// Sum of one tracked internal activation map and its input gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct Activation {
    pub name: String,
    pub value: f64,
    pub grad: Matrix,
}

/// Predicted mean and standard deviation with their input gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
    pub grad_mean: Matrix,
    pub grad_std: Matrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleEval {
    pub score: f64,
    pub grad: Matrix,
    pub activations: Vec<Activation>,
    pub mean_std: Option<MeanStd>,
}

impl OracleEval {
    pub fn activation(&self, name: &str) -> Option<&Activation> {
        self.activations.iter().find(|a| a.name == name)
    }
}

pub trait Oracle: Send + Sync {
    /// Expected input shape `(N, M)`.
    fn shape(&self) -> (usize, usize);

    fn evaluate(&self, x: &Matrix) -> Result<OracleEval>;

    fn score(&self, x: &Matrix) -> Result<f64> {
        Ok(self.evaluate(x)?.score)
    }

    /// Score of a discrete sequence given as symbol indices.
    fn score_indices(&self, indices: &[usize]) -> Result<f64> {
        let x = OneHotSeq::from_indices(indices, self.shape().1);
        self.score(&x)
    }

    fn check_input(&self, x: &Matrix) -> Result<()> {
        let shape = self.shape();
        if x.dim() != shape {
            return Err(Error::dims(format!("{shape:?}"), format!("{:?}", x.dim())));
        }
        Ok(())
    }
}

impl<T: Oracle + ?Sized> Oracle for &T {
    fn shape(&self) -> (usize, usize) {
        (**self).shape()
    }

    fn evaluate(&self, x: &Matrix) -> Result<OracleEval> {
        (**self).evaluate(x)
    }

    fn score(&self, x: &Matrix) -> Result<f64> {
        (**self).score(x)
    }

    fn score_indices(&self, indices: &[usize]) -> Result<f64> {
        (**self).score_indices(indices)
    }
}
