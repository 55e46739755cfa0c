//! A toy differentiable structure predictor and the structure-matching
//! design task built on it.
//!
//! [`ToyStructurePredictor`] maps a (relaxed) sequence to four pairwise
//! distributions through a random linear map and a per-pair softmax. Weights
//! are tied across `(i, j)` and `(j, i)`, so predictions are symmetric.
//! Designing against a target predicted from a known sequence gives a task
//! with a known zero-loss optimum.

use std::fs;
use std::path::Path;

use ndarray::{s, Array1, Array2, Array3};

use crate::engine::{run_design, DesignResults, DesignSettings, ObjectiveStack, RunSettings};
use crate::error::{Error, Result};
use crate::objectives::structure::{smooth_structure_kl, structure_kl_grad, HeadGrads, DEFAULT_BINS};
use crate::objectives::StructureTensors;
use crate::oracles::{Oracle, OracleEval};
use crate::rng::RngState;
use crate::seq::{Matrix, OneHotSeq};

#[derive(Debug, Clone, PartialEq)]
pub struct ToyStructurePredictor {
    n: usize,
    m: usize,
    bins: [usize; 4],
    /// Per head: `P × B` biases, `P = N(N+1)/2` unordered pairs.
    bias: Vec<Array2<f64>>,
    /// Per head: `P × B × M` weights on the lower-index residue.
    u: Vec<Array3<f64>>,
    /// Per head: `P × B × M` weights on the higher-index residue.
    v: Vec<Array3<f64>>,
}

fn pair_index(n: usize, i: usize, j: usize) -> usize {
    let (a, b) = if i <= j { (i, j) } else { (j, i) };
    a * n - a * (a + 1) / 2 + b
}

impl ToyStructurePredictor {
    /// All weights and biases drawn from `N(0, weight_scale²)`.
    pub fn random(n: usize, m: usize, bins: [usize; 4], weight_scale: f64, rng: &mut RngState) -> Self {
        let pairs = n * (n + 1) / 2;
        let mut draw = |shape: (usize, usize, usize)| Array3::from_shape_simple_fn(shape, || weight_scale * rng.normal());
        let mut bias = Vec::new();
        let mut u = Vec::new();
        let mut v = Vec::new();
        for &b in &bins {
            bias.push(draw((pairs, b, 1)).into_shape_with_order((pairs, b)).expect("same size"));
            u.push(draw((pairs, b, m)));
            v.push(draw((pairs, b, m)));
        }
        Self { n, m, bins, bias, u, v }
    }

    pub fn zeros(n: usize, m: usize, bins: [usize; 4]) -> Self {
        let pairs = n * (n + 1) / 2;
        Self {
            n,
            m,
            bins,
            bias: bins.iter().map(|&b| Array2::zeros((pairs, b))).collect(),
            u: bins.iter().map(|&b| Array3::zeros((pairs, b, m))).collect(),
            v: bins.iter().map(|&b| Array3::zeros((pairs, b, m))).collect(),
        }
    }

    /// Default head sizes: 37 distance bins, 24 θ, 24 ω, 12 φ.
    pub fn random_default(n: usize, m: usize, weight_scale: f64, rng: &mut RngState) -> Self {
        Self::random(n, m, DEFAULT_BINS, weight_scale, rng)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn bins(&self) -> [usize; 4] {
        self.bins
    }

    fn check(&self, x: &Matrix) -> Result<()> {
        if x.dim() != (self.n, self.m) {
            return Err(Error::dims(
                format!("{}x{}", self.n, self.m),
                format!("{}x{}", x.nrows(), x.ncols()),
            ));
        }
        Ok(())
    }

    pub fn predict(&self, x: &Matrix) -> Result<StructureTensors> {
        self.check(x)?;
        let n = self.n;
        let heads: [Array3<f64>; 4] = std::array::from_fn(|h| {
            let mut out = Array3::zeros((n, n, self.bins[h]));
            for i in 0..n {
                for j in i..n {
                    let p = self.pair_probs(h, i, j, x);
                    out.slice_mut(s![i, j, ..]).assign(&p);
                    out.slice_mut(s![j, i, ..]).assign(&p);
                }
            }
            out
        });
        StructureTensors::from_heads(heads)
    }

    fn pair_probs(&self, h: usize, i: usize, j: usize, x: &Matrix) -> Array1<f64> {
        let p = pair_index(self.n, i, j);
        let mut logits = self.bias[h].row(p).to_owned();
        logits += &self.u[h].slice(s![p, .., ..]).dot(&x.row(i));
        logits += &self.v[h].slice(s![p, .., ..]).dot(&x.row(j));
        let max = logits.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        logits.mapv_inplace(|v| (v - max).exp());
        let sum = logits.sum();
        logits / sum
    }

    /// Gradient w.r.t. `x` of a loss whose gradient w.r.t. the predicted
    /// tensors is `upstream`.
    pub fn backward(&self, x: &Matrix, pred: &StructureTensors, upstream: &HeadGrads) -> Result<Matrix> {
        self.check(x)?;
        let n = self.n;
        let mut grad = Matrix::zeros((n, self.m));
        for h in 0..4 {
            let probs = pred.head(h);
            let up = &upstream[h];
            for i in 0..n {
                for j in i..n {
                    let p = probs.slice(s![i, j, ..]);
                    // both orientations share one set of logits
                    let mut g = up.slice(s![i, j, ..]).to_owned();
                    if i != j {
                        g += &up.slice(s![j, i, ..]);
                    }
                    let dot = g.dot(&p);
                    let g_logit = &p * &(g - dot);
                    let pi = pair_index(n, i, j);
                    let gi = self.u[h].slice(s![pi, .., ..]).t().dot(&g_logit);
                    let gj = self.v[h].slice(s![pi, .., ..]).t().dot(&g_logit);
                    let mut row = grad.row_mut(i);
                    row += &gi;
                    let mut row = grad.row_mut(j);
                    row += &gj;
                }
            }
        }
        Ok(grad)
    }
}

/// Structure matching as a fitness oracle: `score = −structure_kl(pred(x), target)`.
pub struct StructureOracle<'a> {
    pub predictor: &'a ToyStructurePredictor,
    pub target: &'a StructureTensors,
}

impl Oracle for StructureOracle<'_> {
    fn shape(&self) -> (usize, usize) {
        (self.predictor.n, self.predictor.m)
    }

    fn evaluate(&self, x: &Matrix) -> Result<OracleEval> {
        let pred = self.predictor.predict(x)?;
        let (kl, g) = structure_kl_grad(&pred, self.target)?;
        let grad = -self.predictor.backward(x, &pred, &g)?;
        Ok(OracleEval {
            score: 0.0 - kl,
            grad,
            activations: Vec::new(),
            mean_std: None,
        })
    }
}

/// A random sequence `x*` and the target predicted from it.
pub fn planted_target(predictor: &ToyStructurePredictor, rng: &mut RngState) -> Result<(Vec<usize>, StructureTensors)> {
    let seq: Vec<usize> = (0..predictor.n).map(|_| rng.index(predictor.m)).collect();
    let target = predictor.predict(&OneHotSeq::from_indices(&seq, predictor.m))?;
    Ok((seq, target))
}

/// Runs the design engine against a structure target. Each checkpoint
/// record carries `kl` and `smooth_kl` of the argmax-decoded sequence.
pub fn design_to_structure(
    predictor: &ToyStructurePredictor,
    target: &StructureTensors,
    settings: &DesignSettings,
    stack: &ObjectiveStack,
    run: &RunSettings,
) -> Result<DesignResults> {
    if target.n() != predictor.n || target.bins() != predictor.bins {
        return Err(Error::ConfigError {
            field: "target".into(),
            reason: format!(
                "target has N={} and bins {:?}, predictor expects N={} and bins {:?}",
                target.n(),
                target.bins(),
                predictor.n,
                predictor.bins
            ),
        });
    }
    let oracle = StructureOracle { predictor, target };
    let metrics = |seq: &[usize]| -> Result<Vec<(String, f64)>> {
        let pred = predictor.predict(&OneHotSeq::from_indices(seq, predictor.m))?;
        Ok(vec![
            ("kl".to_string(), crate::objectives::structure_kl(&pred, target)?),
            ("smooth_kl".to_string(), smooth_structure_kl(&pred, target)?),
        ])
    };
    run_design(&oracle, settings, stack, run, Some(&metrics))
}

const MAGIC: &[u8; 4] = b"STRT";
const VERSION: u32 = 1;

/// Serializes as `"STRT"`, version, `N`, four bin counts (all `u32`
/// little-endian), then the heads D, θ, ω, φ as row-major little-endian
/// `f64`.
pub fn structure_to_bytes(t: &StructureTensors) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(t.n() as u32).to_le_bytes());
    for b in t.bins() {
        out.extend_from_slice(&(b as u32).to_le_bytes());
    }
    for h in t.heads() {
        for v in h.iter() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn structure_from_bytes(bytes: &[u8]) -> Result<StructureTensors> {
    let err = |message: String| Error::ParseError {
        location: "structure file".into(),
        message,
    };
    if bytes.len() < 28 || &bytes[..4] != MAGIC {
        return Err(err("missing STRT header".into()));
    }
    let word = |k: usize| u32::from_le_bytes(bytes[4 * k..4 * k + 4].try_into().expect("4 bytes")) as usize;
    if word(1) != VERSION as usize {
        return Err(err(format!("unsupported version {}", word(1))));
    }
    let n = word(2);
    let bins = [word(3), word(4), word(5), word(6)];
    let expected = 28 + 8 * bins.iter().map(|b| n * n * b).sum::<usize>();
    if bytes.len() != expected {
        return Err(err(format!("expected {expected} bytes, found {}", bytes.len())));
    }
    let mut offset = 28;
    let heads = bins.map(|b| {
        let len = n * n * b;
        let data: Vec<f64> = bytes[offset..offset + 8 * len]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        offset += 8 * len;
        Array3::from_shape_vec((n, n, b), data).expect("length checked")
    });
    StructureTensors::from_heads(heads)
}

pub fn read_structure(path: impl AsRef<Path>) -> Result<StructureTensors> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    structure_from_bytes(&bytes)
}

pub fn write_structure(path: impl AsRef<Path>, t: &StructureTensors) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, structure_to_bytes(t)).map_err(|e| Error::io(path, e))
}
