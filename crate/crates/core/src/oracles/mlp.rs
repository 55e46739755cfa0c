use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::rng::RngState;
use crate::seq::Matrix;

use super::{Activation, MeanStd, Oracle, OracleEval};

#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    /// `out × in`
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

impl DenseLayer {
    fn forward(&self, x: &Array1<f64>) -> Array1<f64> {
        self.weights.dot(x) + &self.bias
    }

    fn random(out: usize, inp: usize, rng: &mut RngState) -> Self {
        let scale = 1.0 / (inp as f64).sqrt();
        Self {
            weights: Array2::from_shape_simple_fn((out, inp), || scale * rng.normal()),
            bias: Array1::from_shape_simple_fn(out, || 0.1 * rng.normal()),
        }
    }

    fn check(&self, inp: usize, name: &str) -> Result<()> {
        if self.weights.ncols() != inp || self.bias.len() != self.weights.nrows() {
            return Err(Error::ShapeError {
                expected: format!("{name}: weights with {inp} columns and matching bias"),
                got: format!(
                    "{}x{} weights, {} bias",
                    self.weights.nrows(),
                    self.weights.ncols(),
                    self.bias.len()
                ),
            });
        }
        Ok(())
    }
}

/// `flatten(N × M) → tanh(H₁) → tanh(H₂) → linear(1)`.
///
/// The optional `log_std` head turns it into a mean/uncertainty model:
/// `std = exp(log_std · h₂ + b)`. Both hidden layers are tracked as
/// activations named `hidden1` and `hidden2`, each reported as `Σ|h|`.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpOracle {
    n: usize,
    m: usize,
    pub(crate) hidden1: DenseLayer,
    pub(crate) hidden2: DenseLayer,
    pub(crate) output: DenseLayer,
    pub(crate) log_std: Option<DenseLayer>,
}

pub const HIDDEN1: &str = "hidden1";
pub const HIDDEN2: &str = "hidden2";

struct Forward {
    x: Array1<f64>,
    h1: Array1<f64>,
    h2: Array1<f64>,
}

impl MlpOracle {
    pub fn new(
        n: usize,
        m: usize,
        hidden1: DenseLayer,
        hidden2: DenseLayer,
        output: DenseLayer,
        log_std: Option<DenseLayer>,
    ) -> Result<Self> {
        hidden1.check(n * m, HIDDEN1)?;
        hidden2.check(hidden1.weights.nrows(), HIDDEN2)?;
        output.check(hidden2.weights.nrows(), "output")?;
        if output.weights.nrows() != 1 {
            return Err(Error::ShapeError {
                expected: "single output unit".into(),
                got: output.weights.nrows().to_string(),
            });
        }
        if let Some(ls) = &log_std {
            ls.check(hidden2.weights.nrows(), "log_std")?;
            if ls.weights.nrows() != 1 {
                return Err(Error::ShapeError {
                    expected: "single log_std unit".into(),
                    got: ls.weights.nrows().to_string(),
                });
            }
        }
        Ok(Self {
            n,
            m,
            hidden1,
            hidden2,
            output,
            log_std,
        })
    }

    pub fn random(
        n: usize,
        m: usize,
        h1: usize,
        h2: usize,
        with_uncertainty: bool,
        rng: &mut RngState,
    ) -> Result<Self> {
        let hidden1 = DenseLayer::random(h1, n * m, rng);
        let hidden2 = DenseLayer::random(h2, h1, rng);
        let output = DenseLayer::random(1, h2, rng);
        let log_std = with_uncertainty.then(|| {
            let mut l = DenseLayer::random(1, h2, rng);
            l.weights *= 0.3;
            l.bias.fill(-0.5);
            l
        });
        Self::new(n, m, hidden1, hidden2, output, log_std)
    }

    /// Same architecture with every weight and bias set to zero.
    pub fn zeros(n: usize, m: usize, h1: usize, h2: usize) -> Self {
        let z = |o, i| DenseLayer {
            weights: Array2::zeros((o, i)),
            bias: Array1::zeros(o),
        };
        Self::new(n, m, z(h1, n * m), z(h2, h1), z(1, h2), None).expect("consistent shapes")
    }

    pub fn has_uncertainty(&self) -> bool {
        self.log_std.is_some()
    }

    fn forward(&self, x: &Matrix) -> Forward {
        let x = Array1::from_iter(x.iter().cloned());
        let h1 = self.hidden1.forward(&x).mapv(f64::tanh);
        let h2 = self.hidden2.forward(&h1).mapv(f64::tanh);
        Forward { x, h1, h2 }
    }

    /// Input gradient of any scalar whose gradient w.r.t. `h2` is `dh2`,
    /// plus an extra direct term on `h1`.
    fn backprop(&self, f: &Forward, dh2: &Array1<f64>, extra_dh1: Option<&Array1<f64>>) -> Matrix {
        let dz2 = dh2 * &f.h2.mapv(|h| 1.0 - h * h);
        let mut dh1 = self.hidden2.weights.t().dot(&dz2);
        if let Some(e) = extra_dh1 {
            dh1 += e;
        }
        let dz1 = dh1 * f.h1.mapv(|h| 1.0 - h * h);
        let dx = self.hidden1.weights.t().dot(&dz1);
        debug_assert_eq!(dx.len(), f.x.len());
        dx.into_shape_with_order((self.n, self.m)).expect("n*m inputs")
    }
}

impl Oracle for MlpOracle {
    fn shape(&self) -> (usize, usize) {
        (self.n, self.m)
    }

    fn evaluate(&self, x: &Matrix) -> Result<OracleEval> {
        self.check_input(x)?;
        let f = self.forward(x);
        let score = self.output.forward(&f.h2)[0];
        let w_out = self.output.weights.row(0).to_owned();
        let grad = self.backprop(&f, &w_out, None);

        let a1 = f.h1.mapv(f64::abs).sum();
        let a1_grad = self.backprop(&f, &Array1::zeros(f.h2.len()), Some(&f.h1.mapv(f64::signum_or_zero)));
        let a2 = f.h2.mapv(f64::abs).sum();
        let a2_grad = self.backprop(&f, &f.h2.mapv(f64::signum_or_zero), None);
        let activations = vec![
            Activation {
                name: HIDDEN1.into(),
                value: a1,
                grad: a1_grad,
            },
            Activation {
                name: HIDDEN2.into(),
                value: a2,
                grad: a2_grad,
            },
        ];

        let mean_std = self.log_std.as_ref().map(|head| {
            let std = head.forward(&f.h2)[0].exp();
            let w_ls = head.weights.row(0).to_owned();
            MeanStd {
                mean: score,
                std,
                grad_mean: grad.clone(),
                grad_std: self.backprop(&f, &w_ls, None) * std,
            }
        });

        Ok(OracleEval {
            score,
            grad,
            activations,
            mean_std,
        })
    }

    fn score(&self, x: &Matrix) -> Result<f64> {
        self.check_input(x)?;
        let f = self.forward(x);
        Ok(self.output.forward(&f.h2)[0])
    }
}

trait SignumOrZero {
    fn signum_or_zero(self) -> f64;
}

impl SignumOrZero for f64 {
    fn signum_or_zero(self) -> f64 {
        if self > 0.0 {
            1.0
        } else if self < 0.0 {
            -1.0
        } else {
            0.0
        }
    }
}
