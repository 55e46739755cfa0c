//! Logit normalization with a learnable scale and offset.
//!
//! Instance mode standardizes each channel across positions and owns one
//! `(γ_j, β_j)` pair per channel. Layer mode standardizes all entries jointly
//! and shares a single `(γ, β)`. The scale acts as an inverse sampling
//! temperature: it grows when sampled symbols agree with the fitness gradient
//! and shrinks when they do not.

use ndarray::{Array1, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seq::Matrix;

/// Added to the variance before dividing.
pub const VARIANCE_EPS: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormMode {
    #[default]
    Instance,
    Layer,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Denominator {
    /// Divide by the standard deviation.
    #[default]
    Std,
    /// Divide by the variance.
    Variance,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GradMode {
    /// `∂/∂l = upstream · γ`: statistics are constants and the denominator
    /// is dropped.
    #[default]
    PaperLiteral,
    /// Statistics are constants, denominator kept.
    StopGradStats,
    /// Exact derivative including the mean and deviation terms.
    FullChain,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScaleOffset {
    pub gamma: Array1<f64>,
    pub beta: Array1<f64>,
}

impl ScaleOffset {
    pub fn new(mode: NormMode, m: usize, gamma: f64, beta: f64) -> Self {
        let len = match mode {
            NormMode::Instance => m,
            NormMode::Layer => 1,
        };
        Self {
            gamma: Array1::from_elem(len, gamma),
            beta: Array1::from_elem(len, beta),
        }
    }

    fn check(&self, mode: NormMode, m: usize) -> Result<()> {
        let expected = match mode {
            NormMode::Instance => m,
            NormMode::Layer => 1,
        };
        if self.gamma.len() != expected || self.beta.len() != expected {
            return Err(Error::dims(
                format!("scale/offset of length {expected}"),
                format!("{}/{}", self.gamma.len(), self.beta.len()),
            ));
        }
        if self.gamma.iter().chain(self.beta.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteInput("scale/offset"));
        }
        Ok(())
    }

    /// Parameter index for channel `j`.
    fn slot(&self, j: usize) -> usize {
        if self.gamma.len() == 1 {
            0
        } else {
            j
        }
    }
}

#[derive(Debug, Clone)]
pub struct NormCache {
    pub l_norm: Matrix,
    /// Per-channel (instance) or single (layer) mean.
    pub mean: Array1<f64>,
    /// Standard deviation `sqrt(var + eps)` matching `mean`.
    pub std: Array1<f64>,
    /// The value actually divided by: `std` or `std²`.
    pub denom: Array1<f64>,
    pub mode: NormMode,
    pub denominator: Denominator,
    pub grad_mode: GradMode,
}

impl NormCache {
    fn stat(&self, j: usize) -> usize {
        match self.mode {
            NormMode::Instance => j,
            NormMode::Layer => 0,
        }
    }
}

pub fn normalize(
    l: &Matrix,
    so: &ScaleOffset,
    mode: NormMode,
    denominator: Denominator,
    grad_mode: GradMode,
) -> Result<(Matrix, NormCache)> {
    let (n, m) = l.dim();
    if n < 2 {
        return Err(Error::DegenerateInput(format!(
            "normalization needs at least 2 positions, got {n}"
        )));
    }
    so.check(mode, m)?;

    let (mean, var) = match mode {
        NormMode::Instance => {
            let mean = l.mean_axis(Axis(0)).expect("n >= 2");
            let var = l.var_axis(Axis(0), 0.0);
            (mean, var)
        }
        NormMode::Layer => {
            let mean = l.mean().expect("n >= 2");
            let var = l.var(0.0);
            (Array1::from_elem(1, mean), Array1::from_elem(1, var))
        }
    };
    let std = var.mapv(|v| (v + VARIANCE_EPS).sqrt());
    let denom = match denominator {
        Denominator::Std => std.clone(),
        Denominator::Variance => var.mapv(|v| v + VARIANCE_EPS),
    };

    let stat = |j: usize| if mode == NormMode::Layer { 0 } else { j };
    let l_norm = Matrix::from_shape_fn((n, m), |(i, j)| (l[[i, j]] - mean[stat(j)]) / denom[stat(j)]);
    let l_scaled = Matrix::from_shape_fn((n, m), |(i, j)| {
        l_norm[[i, j]] * so.gamma[so.slot(j)] + so.beta[so.slot(j)]
    });
    Ok((
        l_scaled,
        NormCache {
            l_norm,
            mean,
            std,
            denom,
            mode,
            denominator,
            grad_mode,
        },
    ))
}

#[derive(Debug, Clone)]
pub struct NormGrads {
    pub logits: Matrix,
    pub gamma: Array1<f64>,
    pub beta: Array1<f64>,
}

/// Distributes the gradient w.r.t. the scaled logits onto `l`, `γ` and `β`.
pub fn backprop_normalize(upstream: &Matrix, cache: &NormCache, so: &ScaleOffset) -> Result<NormGrads> {
    if upstream.dim() != cache.l_norm.dim() {
        return Err(Error::dims(
            format!("{:?}", cache.l_norm.dim()),
            format!("{:?}", upstream.dim()),
        ));
    }
    let (n, m) = upstream.dim();
    so.check(cache.mode, m)?;

    let mut gamma = Array1::zeros(so.gamma.len());
    let mut beta = Array1::zeros(so.beta.len());
    for ((i, j), &u) in upstream.indexed_iter() {
        gamma[so.slot(j)] += u * cache.l_norm[[i, j]];
        beta[so.slot(j)] += u;
    }

    // gradient w.r.t. l_norm
    let g = Matrix::from_shape_fn((n, m), |(i, j)| upstream[[i, j]] * so.gamma[so.slot(j)]);

    let logits = match cache.grad_mode {
        GradMode::PaperLiteral => g,
        GradMode::StopGradStats => {
            Matrix::from_shape_fn((n, m), |(i, j)| g[[i, j]] / cache.denom[cache.stat(j)])
        }
        GradMode::FullChain => full_chain(&g, cache),
    };
    Ok(NormGrads {
        logits,
        gamma,
        beta,
    })
}

/// Exact backward pass of `y = (x − μ)/d` over each statistics group.
///
/// With `d = s = sqrt(v + eps)`: `dx = (g − mean(g) − y·mean(g·y)) / s`.
/// With `d = v + eps`: `dx = (g − mean(g)) / d − 2·y·mean(g·y)`.
fn full_chain(g: &Matrix, cache: &NormCache) -> Matrix {
    let (n, m) = g.dim();
    let y = &cache.l_norm;
    let groups = cache.mean.len();
    let mut count = vec![0.0; groups];
    let mut mean_g = vec![0.0; groups];
    let mut mean_gy = vec![0.0; groups];
    for ((i, j), &gv) in g.indexed_iter() {
        let s = cache.stat(j);
        count[s] += 1.0;
        mean_g[s] += gv;
        mean_gy[s] += gv * y[[i, j]];
    }
    for s in 0..groups {
        mean_g[s] /= count[s];
        mean_gy[s] /= count[s];
    }
    Matrix::from_shape_fn((n, m), |(i, j)| {
        let s = cache.stat(j);
        let d = cache.denom[s];
        match cache.denominator {
            Denominator::Std => (g[[i, j]] - mean_g[s] - y[[i, j]] * mean_gy[s]) / d,
            Denominator::Variance => (g[[i, j]] - mean_g[s]) / d - 2.0 * y[[i, j]] * mean_gy[s],
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn so(m: usize, g: f64, b: f64) -> ScaleOffset {
        ScaleOffset::new(NormMode::Instance, m, g, b)
    }

    #[test]
    fn channel_standardization() {
        let l = array![[1.0], [2.0], [3.0]];
        let (out, _) = normalize(&l, &so(1, 1.0, 0.0), NormMode::Instance, Denominator::Std, GradMode::PaperLiteral).unwrap();
        for (v, e) in out.iter().zip([-1.22474, 0.0, 1.22474]) {
            assert!((v - e).abs() < 1e-4);
        }
        let (out, _) = normalize(&l, &so(1, 2.0, 1.0), NormMode::Instance, Denominator::Std, GradMode::PaperLiteral).unwrap();
        for (v, e) in out.iter().zip([-1.44949, 1.0, 3.44949]) {
            assert!((v - e).abs() < 1e-4);
        }
    }

    #[test]
    fn variance_denominator() {
        // population variance 2/3; divide by it directly
        let l = array![[1.0], [2.0], [3.0]];
        let (out, _) = normalize(&l, &so(1, 1.0, 0.0), NormMode::Instance, Denominator::Variance, GradMode::PaperLiteral).unwrap();
        let d = 2.0 / 3.0 + VARIANCE_EPS;
        for (v, e) in out.iter().zip([-1.0 / d, 0.0, 1.0 / d]) {
            assert!((v - e).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_input_layer_mode() {
        let l = Matrix::from_elem((5, 4), 3.7);
        let so = ScaleOffset::new(NormMode::Layer, 4, 2.5, -0.3);
        let (out, _) = normalize(&l, &so, NormMode::Layer, Denominator::Std, GradMode::PaperLiteral).unwrap();
        assert!(out.iter().all(|&v| (v + 0.3).abs() < 1e-9));
    }

    #[test]
    fn degenerate_and_shape_errors() {
        let l = Matrix::zeros((1, 4));
        assert!(matches!(
            normalize(&l, &so(4, 1.0, 0.0), NormMode::Instance, Denominator::Std, GradMode::PaperLiteral),
            Err(Error::DegenerateInput(_))
        ));
        let l = Matrix::zeros((3, 4));
        assert!(matches!(
            normalize(&l, &so(3, 1.0, 0.0), NormMode::Instance, Denominator::Std, GradMode::PaperLiteral),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn constant_stats_backward() {
        let l = array![[0.3, 1.0, -2.0, 0.5], [1.0, 0.0, 0.0, 2.0]];
        let s = so(4, 2.0, 0.0);
        let (_, cache) = normalize(&l, &s, NormMode::Instance, Denominator::Std, GradMode::PaperLiteral).unwrap();
        let up = array![[1.0, -1.0, 0.0, 0.0], [0.0, 0.0, 0.0, 0.0]];
        let g = backprop_normalize(&up, &cache, &s).unwrap();
        assert_eq!(g.logits.row(0).to_vec(), vec![2.0, -2.0, 0.0, 0.0]);
    }

    #[test]
    fn gamma_beta_arithmetic() {
        // N=2 column: l_norm = [0.5, -0.5] requires a handcrafted cache
        let cache = NormCache {
            l_norm: array![[0.5], [-0.5]],
            mean: array![0.0],
            std: array![1.0],
            denom: array![1.0],
            mode: NormMode::Instance,
            denominator: Denominator::Std,
            grad_mode: GradMode::PaperLiteral,
        };
        let g = backprop_normalize(&array![[1.0], [1.0]], &cache, &so(1, 1.0, 0.0)).unwrap();
        assert_eq!(g.gamma[0], 0.0);
        assert_eq!(g.beta[0], 2.0);
    }

    #[test]
    fn layer_pools_scale_gradients() {
        let l = array![[0.3, 1.0], [1.0, 0.0], [-0.4, 0.2]];
        let s = ScaleOffset::new(NormMode::Layer, 2, 1.5, 0.0);
        let (_, cache) = normalize(&l, &s, NormMode::Layer, Denominator::Std, GradMode::PaperLiteral).unwrap();
        let up = array![[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]];
        let g = backprop_normalize(&up, &cache, &s).unwrap();
        assert_eq!(g.beta.len(), 1);
        assert_eq!(g.beta[0], 21.0);
        let expected: f64 = up.iter().zip(cache.l_norm.iter()).map(|(a, b)| a * b).sum();
        assert!((g.gamma[0] - expected).abs() < 1e-12);
    }

    #[test]
    fn stop_grad_divides_by_denominator() {
        let l = array![[1.0], [2.0], [3.0]];
        let s = so(1, 2.0, 0.0);
        let (_, cache) = normalize(&l, &s, NormMode::Instance, Denominator::Std, GradMode::StopGradStats).unwrap();
        let g = backprop_normalize(&array![[1.0], [0.0], [0.0]], &cache, &s).unwrap();
        assert!((g.logits[[0, 0]] - 2.0 / (2.0f64 / 3.0 + VARIANCE_EPS).sqrt()).abs() < 1e-12);
    }
}
