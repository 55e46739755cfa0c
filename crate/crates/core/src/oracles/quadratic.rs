use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::rng::RngState;
use crate::seq::Matrix;

use super::{Oracle, OracleEval};

/// `score = xᵀWx + bᵀx` over the row-major flattened input.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticOracle {
    w: Array2<f64>,
    b: Array1<f64>,
    n: usize,
    m: usize,
}

impl QuadraticOracle {
    pub fn new(w: Array2<f64>, b: Array1<f64>, n: usize, m: usize) -> Result<Self> {
        let d = n * m;
        if w.dim() != (d, d) || b.len() != d {
            return Err(Error::ShapeError {
                expected: format!("W {d}x{d}, b {d}"),
                got: format!("W {}x{}, b {}", w.nrows(), w.ncols(), b.len()),
            });
        }
        if w.iter().chain(b.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteInput("quadratic weights"));
        }
        for r in 0..d {
            for c in 0..r {
                if (w[[r, c]] - w[[c, r]]).abs() > 1e-12 {
                    return Err(Error::ShapeError {
                        expected: "symmetric W".into(),
                        got: format!("W[{r},{c}] != W[{c},{r}]"),
                    });
                }
            }
        }
        Ok(Self { w, b, n, m })
    }

    /// Symmetric `W` with `N(0, w_scale²)` entries and `b ~ N(0, 1)`.
    pub fn random(n: usize, m: usize, w_scale: f64, rng: &mut RngState) -> Result<Self> {
        let d = n * m;
        let mut w = Array2::zeros((d, d));
        for r in 0..d {
            for c in 0..=r {
                let v = w_scale * rng.normal();
                w[[r, c]] = v;
                w[[c, r]] = v;
            }
        }
        let b = Array1::from_shape_simple_fn(d, || rng.normal());
        Self::new(w, b, n, m)
    }

    pub fn w(&self) -> &Array2<f64> {
        &self.w
    }

    pub fn b(&self) -> &Array1<f64> {
        &self.b
    }

    fn flat(&self, x: &Matrix) -> Array1<f64> {
        Array1::from_iter(x.iter().cloned())
    }
}

impl Oracle for QuadraticOracle {
    fn shape(&self) -> (usize, usize) {
        (self.n, self.m)
    }

    fn evaluate(&self, x: &Matrix) -> Result<OracleEval> {
        self.check_input(x)?;
        let v = self.flat(x);
        let wx = self.w.dot(&v);
        let score = v.dot(&wx) + self.b.dot(&v);
        let g = wx * 2.0 + &self.b;
        let grad = g
            .into_shape_with_order((self.n, self.m))
            .expect("length n*m");
        Ok(OracleEval {
            score,
            grad,
            activations: Vec::new(),
            mean_std: None,
        })
    }

    fn score(&self, x: &Matrix) -> Result<f64> {
        self.check_input(x)?;
        let v = self.flat(x);
        Ok(v.dot(&self.w.dot(&v)) + self.b.dot(&v))
    }

    fn score_indices(&self, indices: &[usize]) -> Result<f64> {
        if indices.len() != self.n || indices.iter().any(|&j| j >= self.m) {
            return Err(Error::dims(
                format!("{} indices below {}", self.n, self.m),
                format!("{indices:?}"),
            ));
        }
        let flat: Vec<usize> = indices
            .iter()
            .enumerate()
            .map(|(i, &j)| i * self.m + j)
            .collect();
        let mut s = 0.0;
        for &r in &flat {
            s += self.b[r];
            for &c in &flat {
                s += self.w[[r, c]];
            }
        }
        Ok(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seq::{one_hot_encode, Alphabet};

    #[test]
    fn linear_case() {
        let (n, m) = (3, 4);
        let mut b = Array1::zeros(n * m);
        b[0] = 1.0;
        let o = QuadraticOracle::new(Array2::zeros((12, 12)), b.clone(), n, m).unwrap();
        let x = one_hot_encode("ACG", &Alphabet::dna()).unwrap();
        let e = o.evaluate(&x).unwrap();
        assert_eq!(e.score, 1.0);
        assert_eq!(e.grad, b.into_shape_with_order((3, 4)).unwrap());
    }

    #[test]
    fn naive_double_loop_agrees() {
        let mut rng = RngState::new(11);
        let o = QuadraticOracle::random(5, 4, 0.5, &mut rng).unwrap();
        for _ in 0..20 {
            let x = Matrix::from_shape_simple_fn((5, 4), || rng.uniform());
            let flat: Vec<f64> = x.iter().cloned().collect();
            let mut naive = 0.0;
            for r in 0..20 {
                naive += o.b()[r] * flat[r];
                for c in 0..20 {
                    naive += flat[r] * o.w()[[r, c]] * flat[c];
                }
            }
            assert!((o.score(&x).unwrap() - naive).abs() < 1e-10);
        }
        let idx = [0, 3, 2, 1, 1];
        let x = crate::seq::OneHotSeq::from_indices(&idx, 4);
        assert!((o.score(&x).unwrap() - o.score_indices(&idx).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn rejects_asymmetric() {
        let mut w = Array2::zeros((4, 4));
        w[[0, 1]] = 1.0;
        assert!(matches!(
            QuadraticOracle::new(w, Array1::zeros(4), 2, 2),
            Err(Error::ShapeError { .. })
        ));
    }
}
