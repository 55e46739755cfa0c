use crate::error::{Error, Result};
use crate::rng::RngState;
use crate::seq::Matrix;

use super::{Oracle, OracleEval};

/// Scores a sequence by scanning a single `L × M` motif weight matrix and
/// soft-max pooling the window scores:
///
/// `m_i = Σ_u Σ_j W[u, j] · x[i + u, j]`, `score = log Σ_i exp(m_i)`.
///
/// With `input_gain > 1` every input entry is first mapped through
/// `min(gain · x, 1)`. Discrete inputs are unchanged but relaxed inputs
/// saturate, which makes the oracle over-score soft PSSMs.
#[derive(Debug, Clone, PartialEq)]
pub struct MotifOracle {
    weights: Matrix,
    n: usize,
    input_gain: f64,
}

impl MotifOracle {
    pub fn new(weights: Matrix, n: usize) -> Result<Self> {
        Self::with_gain(weights, n, 1.0)
    }

    pub fn with_gain(weights: Matrix, n: usize, input_gain: f64) -> Result<Self> {
        let (l, m) = weights.dim();
        if l == 0 || l > n {
            return Err(Error::ShapeError {
                expected: format!("motif length in 1..={n}"),
                got: l.to_string(),
            });
        }
        if m < 2 {
            return Err(Error::ShapeError {
                expected: "at least 2 channels".into(),
                got: m.to_string(),
            });
        }
        if weights.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteInput("motif weights"));
        }
        if !(input_gain >= 1.0 && input_gain.is_finite()) {
            return Err(Error::ValidationError {
                field: "input_gain".into(),
                reason: "must be finite and >= 1".into(),
            });
        }
        Ok(Self {
            weights,
            n,
            input_gain,
        })
    }

    /// Motif weights drawn i.i.d. from a standard normal.
    pub fn random(n: usize, l: usize, m: usize, rng: &mut RngState) -> Result<Self> {
        let weights = Matrix::from_shape_simple_fn((l, m), || rng.normal());
        Self::new(weights, n)
    }

    pub fn weights(&self) -> &Matrix {
        &self.weights
    }

    pub fn motif_len(&self) -> usize {
        self.weights.nrows()
    }

    pub fn input_gain(&self) -> f64 {
        self.input_gain
    }

    /// Per-window motif scores `m_i`.
    pub fn window_scores(&self, x: &Matrix) -> Result<Vec<f64>> {
        self.check_input(x)?;
        let x = self.transform(x);
        Ok(self.windows(&x))
    }

    fn transform(&self, x: &Matrix) -> Matrix {
        if self.input_gain == 1.0 {
            x.clone()
        } else {
            x.mapv(|v| (self.input_gain * v).min(1.0))
        }
    }

    fn windows(&self, x: &Matrix) -> Vec<f64> {
        let l = self.motif_len();
        (0..=self.n - l)
            .map(|i| {
                let mut s = 0.0;
                for u in 0..l {
                    for (w, v) in self.weights.row(u).iter().zip(x.row(i + u)) {
                        s += w * v;
                    }
                }
                s
            })
            .collect()
    }
}

impl Oracle for MotifOracle {
    fn shape(&self) -> (usize, usize) {
        (self.n, self.weights.ncols())
    }

    fn evaluate(&self, x: &Matrix) -> Result<OracleEval> {
        self.check_input(x)?;
        let xt = self.transform(x);
        let m = self.windows(&xt);
        let max = m.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let z: f64 = m.iter().map(|v| (v - max).exp()).sum();
        let score = max + z.ln();

        let mut grad = Matrix::zeros(x.raw_dim());
        for (i, mi) in m.iter().enumerate() {
            let w = (mi - max).exp() / z;
            for u in 0..self.motif_len() {
                let mut row = grad.row_mut(i + u);
                row.scaled_add(w, &self.weights.row(u));
            }
        }
        if self.input_gain != 1.0 {
            // derivative of min(gain·x, 1)
            for (g, &v) in grad.iter_mut().zip(x.iter()) {
                *g *= if self.input_gain * v < 1.0 { self.input_gain } else { 0.0 };
            }
        }
        Ok(OracleEval {
            score,
            grad,
            activations: Vec::new(),
            mean_std: None,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seq::{one_hot_encode, Alphabet};
    use ndarray::array;

    fn favor_a() -> MotifOracle {
        MotifOracle::new(array![[1.0, 0.0, 0.0, 0.0]], 2).unwrap()
    }

    #[test]
    fn analytic_scores() {
        let dna = Alphabet::dna();
        let o = favor_a();
        let s = o.score(&one_hot_encode("AA", &dna).unwrap()).unwrap();
        assert!((s - (2.0 * std::f64::consts::E).ln()).abs() < 1e-12);
        assert!((s - 1.69315).abs() < 1e-5);
        let s = o.score(&one_hot_encode("AC", &dna).unwrap()).unwrap();
        assert!((s - (std::f64::consts::E + 1.0).ln()).abs() < 1e-12);
        assert!((s - 1.31326).abs() < 1e-5);
    }

    #[test]
    fn soft_pool_bounds() {
        let mut rng = RngState::new(5);
        let o = MotifOracle::random(30, 6, 4, &mut rng).unwrap();
        for _ in 0..20 {
            let idx: Vec<usize> = (0..30).map(|_| rng.index(4)).collect();
            let x = crate::seq::OneHotSeq::from_indices(&idx, 4);
            let s = o.score(&x).unwrap();
            let m = o.window_scores(&x).unwrap();
            let hard = m.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            assert!(s >= hard);
            assert!(s <= hard + ((30 - 6 + 1) as f64).ln() + 1e-12);
        }
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(matches!(
            MotifOracle::new(Matrix::zeros((3, 4)), 2),
            Err(Error::ShapeError { .. })
        ));
        let o = favor_a();
        assert!(matches!(
            o.evaluate(&Matrix::zeros((3, 4))),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn gain_saturates_relaxed_inputs_only() {
        let w = array![[1.0, 0.0, 0.0, 0.0], [0.0, 1.0, 0.0, 0.0]];
        let plain = MotifOracle::new(w.clone(), 4).unwrap();
        let sat = MotifOracle::with_gain(w, 4, 4.0).unwrap();
        let x = one_hot_encode("ACGT", &Alphabet::dna()).unwrap();
        assert_eq!(plain.score(&x).unwrap(), sat.score(&x).unwrap());
        let u = Matrix::from_elem((4, 4), 0.25);
        assert!(sat.score(&u).unwrap() > plain.score(&u).unwrap() + 1.0);
    }
}
