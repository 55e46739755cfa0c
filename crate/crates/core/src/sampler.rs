//! Softmax relaxation, categorical and Gumbel sampling, and the
//! straight-through estimators that route gradients from discrete samples
//! back to logits.

use ndarray::{Array1, ArrayView1, Zip};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RngState;
use crate::seq::{check_distribution, check_finite, Matrix, OneHotSeq, ProbMatrix};

/// Uniform draws feeding the Gumbel transform are clamped into this margin.
const GUMBEL_U_CLAMP: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StEstimator {
    /// Gradient of the sample replaced by the softmax Jacobian.
    #[default]
    SoftmaxSt,
    /// Gradient of the sample taken as the identity.
    IdentitySt,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GumbelConfig {
    temperature: f64,
}

impl GumbelConfig {
    pub fn new(temperature: f64) -> Result<Self> {
        if !(temperature > 0.0 && temperature.is_finite()) {
            return Err(Error::ValidationError {
                field: "gumbel_tau".into(),
                reason: "must be > 0".into(),
            });
        }
        Ok(Self { temperature })
    }

    pub fn temperature(&self) -> f64 {
        self.temperature
    }
}

impl Default for GumbelConfig {
    fn default() -> Self {
        Self { temperature: 0.1 }
    }
}

/// Row-wise softmax with max subtraction.
pub fn softmax_rows(l: &Matrix) -> Result<ProbMatrix> {
    check_finite(l, "logits")?;
    let mut p = l.clone();
    for mut row in p.rows_mut() {
        let max = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row.mapv_inplace(|v| v / sum);
    }
    Ok(ProbMatrix::new_unchecked(p))
}

/// `J[j][k] = ∂σ_j/∂l_k = p_k (1{j=k} − p_j)`.
pub fn softmax_jacobian_row(p: ArrayView1<f64>) -> Result<Matrix> {
    check_distribution(p, 1e-6)?;
    let m = p.len();
    Ok(Matrix::from_shape_fn((m, m), |(j, k)| {
        p[k] * (if j == k { 1.0 } else { 0.0 } - p[j])
    }))
}

/// Draws one symbol per row by inverse CDF, scanning columns in index order.
pub fn sample_categorical(p: &ProbMatrix, rng: &mut RngState) -> OneHotSeq {
    let indices: Vec<usize> = p
        .rows()
        .into_iter()
        .map(|row| inverse_cdf(row, rng.uniform()))
        .collect();
    OneHotSeq::from_indices(&indices, p.ncols())
}

fn inverse_cdf(row: ArrayView1<f64>, u: f64) -> usize {
    let mut cum = 0.0;
    let mut last_positive = 0;
    for (j, &pj) in row.iter().enumerate() {
        if pj > 0.0 {
            last_positive = j;
        }
        cum += pj;
        if u < cum {
            return j;
        }
    }
    // rounding left the cumulative sum just under u
    last_positive
}

#[derive(Debug, Clone)]
pub struct GumbelSample {
    pub relaxed: ProbMatrix,
    pub hard: OneHotSeq,
}

/// Gumbel-softmax sample: `relaxed = softmax((l + g) / τ)`, `hard` its
/// row-wise argmax.
pub fn sample_gumbel(l: &Matrix, cfg: &GumbelConfig, rng: &mut RngState) -> Result<GumbelSample> {
    check_finite(l, "logits")?;
    let noise = Matrix::from_shape_simple_fn(l.raw_dim(), || {
        let u = rng.uniform().clamp(GUMBEL_U_CLAMP, 1.0 - GUMBEL_U_CLAMP);
        -(-u.ln()).ln()
    });
    gumbel_with_noise(l, &noise, cfg)
}

/// The deterministic half of [`sample_gumbel`] with the noise supplied.
pub fn gumbel_with_noise(l: &Matrix, noise: &Matrix, cfg: &GumbelConfig) -> Result<GumbelSample> {
    if l.dim() != noise.dim() {
        return Err(Error::dims(format!("{:?}", l.dim()), format!("{:?}", noise.dim())));
    }
    let perturbed = (l + noise) / cfg.temperature;
    let relaxed = softmax_rows(&perturbed)?;
    let indices: Vec<usize> = relaxed
        .rows()
        .into_iter()
        .map(crate::seq::argmax)
        .collect();
    let hard = OneHotSeq::from_indices(&indices, l.ncols());
    Ok(GumbelSample { relaxed, hard })
}

/// Contracts `upstream` (gradient w.r.t. the sample) into a gradient w.r.t.
/// the logits that produced `p`.
pub fn backprop_st(upstream: &Matrix, p: &ProbMatrix, est: StEstimator) -> Result<Matrix> {
    if upstream.dim() != p.dim() {
        return Err(Error::dims(format!("{:?}", p.dim()), format!("{:?}", upstream.dim())));
    }
    Ok(match est {
        StEstimator::IdentitySt => upstream.clone(),
        StEstimator::SoftmaxSt => softmax_vjp(upstream, p),
    })
}

/// Backward pass through the relaxed Gumbel sample, including the `1/τ`
/// from the temperature.
pub fn backprop_gumbel(upstream: &Matrix, relaxed: &ProbMatrix, cfg: &GumbelConfig) -> Result<Matrix> {
    let g = backprop_st(upstream, relaxed, StEstimator::SoftmaxSt)?;
    Ok(g / cfg.temperature)
}

/// `out_ik = p_ik (u_ik − Σ_j u_ij p_ij)`.
pub(crate) fn softmax_vjp(upstream: &Matrix, p: &Matrix) -> Matrix {
    let dots: Array1<f64> = (upstream * p).sum_axis(ndarray::Axis(1));
    let mut out = Matrix::zeros(p.raw_dim());
    for (i, mut row) in out.rows_mut().into_iter().enumerate() {
        Zip::from(&mut row)
            .and(p.row(i))
            .and(upstream.row(i))
            .for_each(|o, &pk, &uk| *o = pk * (uk - dots[i]));
    }
    out
}
