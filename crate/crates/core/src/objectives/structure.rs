//! KL losses between predicted and target residue-pair distributions.
//!
//! A [`StructureTensors`] holds four `N × N × B` heads (distance, θ, ω, φ).
//! Bin 0 of every head means "no contact"; the remaining `K = B − 1` bins are
//! ordered distance or angle bins.

use std::f64::consts::PI;

use ndarray::{Array3, ArrayView1};

use crate::error::{Error, Result};

/// Floor applied to every log argument.
pub const LOG_FLOOR: f64 = 1e-8;
/// Default bin counts for the distance, θ, ω and φ heads.
pub const DEFAULT_BINS: [usize; 4] = [37, 24, 24, 12];
pub const HEAD_NAMES: [&str; 4] = ["dist", "theta", "omega", "phi"];

/// How a head is collapsed in the smooth loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinTransform {
    /// Linear ramp over the ordered bins.
    Smooth,
    /// Periodic sin/cos weighting, so the first and last bins coincide.
    Circular,
}

pub const HEAD_TRANSFORMS: [BinTransform; 4] = [
    BinTransform::Smooth,
    BinTransform::Circular,
    BinTransform::Circular,
    BinTransform::Smooth,
];

#[derive(Debug, Clone, PartialEq)]
pub struct StructureTensors {
    heads: [Array3<f64>; 4],
}

impl StructureTensors {
    /// Validates that every head is `N × N × B` (`B ≥ 3`), non-negative and
    /// normalized over its last axis within `1e-6`.
    pub fn new(dist: Array3<f64>, theta: Array3<f64>, omega: Array3<f64>, phi: Array3<f64>) -> Result<Self> {
        Self::from_heads([dist, theta, omega, phi])
    }

    pub fn from_heads(heads: [Array3<f64>; 4]) -> Result<Self> {
        let n = heads[0].dim().0;
        for (h, name) in heads.iter().zip(HEAD_NAMES) {
            let (a, b, bins) = h.dim();
            if a != n || b != n {
                return Err(Error::dims(format!("{n}x{n}xB for head {name}"), format!("{a}x{b}x{bins}")));
            }
            if bins < 3 {
                return Err(Error::ShapeError {
                    expected: format!("at least 3 bins for head {name}"),
                    got: bins.to_string(),
                });
            }
            if h.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFiniteInput("structure tensor"));
            }
            for ((i, j), lane) in h.lanes(ndarray::Axis(2)).into_iter().enumerate().map(|(idx, l)| ((idx / n, idx % n), l)) {
                let sum = lane.sum();
                if lane.iter().any(|&v| v < 0.0) || (sum - 1.0).abs() > 1e-6 {
                    return Err(Error::InvalidDistribution(format!(
                        "head {name} at ({i}, {j}) sums to {sum}"
                    )));
                }
            }
        }
        Ok(Self { heads })
    }

    pub fn n(&self) -> usize {
        self.heads[0].dim().0
    }

    pub fn bins(&self) -> [usize; 4] {
        std::array::from_fn(|h| self.heads[h].dim().2)
    }

    pub fn heads(&self) -> &[Array3<f64>; 4] {
        &self.heads
    }

    pub fn head(&self, h: usize) -> &Array3<f64> {
        &self.heads[h]
    }

    pub fn into_heads(self) -> [Array3<f64>; 4] {
        self.heads
    }

    /// Uniform distributions with the given bin counts.
    pub fn uniform(n: usize, bins: [usize; 4]) -> Result<Self> {
        Self::from_heads(bins.map(|b| Array3::from_elem((n, n, b), 1.0 / b as f64)))
    }

    fn check_same_shape(&self, other: &Self) -> Result<()> {
        for h in 0..4 {
            if self.heads[h].dim() != other.heads[h].dim() {
                return Err(Error::dims(
                    format!("{:?} for head {}", other.heads[h].dim(), HEAD_NAMES[h]),
                    format!("{:?}", self.heads[h].dim()),
                ));
            }
        }
        Ok(())
    }
}

/// Gradient of a structure loss w.r.t. each predicted head.
pub type HeadGrads = [Array3<f64>; 4];

/// `Σ_heads (1/N²) Σ_ij Σ_k Y log(Y / max(X, 1e-8))`, pred `X`, target `Y`.
pub fn structure_kl(pred: &StructureTensors, target: &StructureTensors) -> Result<f64> {
    Ok(structure_kl_grad(pred, target)?.0)
}

/// [`structure_kl`] and its gradient w.r.t. `pred`.
pub fn structure_kl_grad(pred: &StructureTensors, target: &StructureTensors) -> Result<(f64, HeadGrads)> {
    pred.check_same_shape(target)?;
    let n = pred.n();
    let scale = 1.0 / (n * n) as f64;
    let mut total = 0.0;
    let grads = std::array::from_fn(|h| {
        let x = &pred.heads[h];
        let y = &target.heads[h];
        let mut g = Array3::zeros(x.dim());
        ndarray::Zip::from(&mut g).and(x).and(y).for_each(|g, &xv, &yv| {
            if yv > 0.0 {
                let xc = xv.max(LOG_FLOOR);
                total += scale * yv * (yv.max(LOG_FLOOR).ln() - xc.ln());
                if xv > LOG_FLOOR {
                    *g = -scale * yv / xv;
                }
            }
        });
        g
    });
    Ok((total, grads))
}

/// Bin weights for bins `1..=K` of a head with `K + 1` stored bins; index 0
/// of the returned vector (the no-contact bin) is 0.
pub fn transform_weights(transform: BinTransform, stored_bins: usize) -> Vec<f64> {
    let k_max = stored_bins - 1;
    let mut w = vec![0.0; stored_bins];
    for (k, wk) in w.iter_mut().enumerate().skip(1) {
        let t = (k - 1) as f64 / (k_max - 1) as f64;
        *wk = match transform {
            BinTransform::Smooth => t,
            BinTransform::Circular => {
                let (sin, cos) = sin_cos_pi(2.0 * t - 1.0);
                0.5 * (0.5 * sin + 0.5) + 0.5 * (0.5 * cos + 0.5)
            }
        };
    }
    w
}

/// `(sin πx, cos πx)` for `x ∈ [−1, 1]`, reflected through `π − π|x|` so
/// that `x = ±1` give exactly `(0, −1)`.
fn sin_cos_pi(x: f64) -> (f64, f64) {
    let r = PI * (1.0 - x.abs());
    (x.signum() * r.sin(), -r.cos())
}

/// Smooth or circular summary of one `(i, j)` slice, bin 0 excluded.
pub fn transform_slice(transform: BinTransform, slice: ArrayView1<f64>) -> f64 {
    let w = transform_weights(transform, slice.len());
    slice.iter().zip(&w).map(|(x, w)| x * w).sum()
}

/// `a · ln(a / b)` with both log arguments floored, `0` for `a = 0`, and its
/// derivative in `b`.
fn kl_term(a: f64, b: f64) -> (f64, f64) {
    if a <= 0.0 {
        return (0.0, 0.0);
    }
    let value = a * (a.max(LOG_FLOOR).ln() - b.max(LOG_FLOOR).ln());
    let slope = if b > LOG_FLOOR { -a / b } else { 0.0 };
    (value, slope)
}

/// Three-way KL over (transformed mass, no-contact mass, remainder) summed
/// over heads; distance and φ use [`BinTransform::Smooth`], θ and ω use
/// [`BinTransform::Circular`].
pub fn smooth_structure_kl(pred: &StructureTensors, target: &StructureTensors) -> Result<f64> {
    Ok(smooth_structure_kl_grad(pred, target)?.0)
}

pub fn smooth_structure_kl_grad(pred: &StructureTensors, target: &StructureTensors) -> Result<(f64, HeadGrads)> {
    pred.check_same_shape(target)?;
    let n = pred.n();
    let scale = 1.0 / (n * n) as f64;
    let mut total = 0.0;
    let mut grads: HeadGrads = std::array::from_fn(|h| Array3::zeros(pred.heads[h].dim()));
    for h in 0..4 {
        let x = &pred.heads[h];
        let y = &target.heads[h];
        let bins = x.dim().2;
        let w = transform_weights(HEAD_TRANSFORMS[h], bins);
        for i in 0..n {
            for j in 0..n {
                let xs = x.slice(ndarray::s![i, j, ..]);
                let ys = y.slice(ndarray::s![i, j, ..]);
                let s_x: f64 = xs.iter().zip(&w).map(|(a, b)| a * b).sum();
                let s_y: f64 = ys.iter().zip(&w).map(|(a, b)| a * b).sum();
                let rest_x = 1.0 - s_x - xs[0];
                let rest_y = 1.0 - s_y - ys[0];
                for (v, what) in [(s_x, "transform"), (s_y, "transform"), (rest_x, "remainder"), (rest_y, "remainder")] {
                    if v < -1e-6 {
                        return Err(Error::InvalidDistribution(format!(
                            "{what} mass {v} for head {} at ({i}, {j})",
                            HEAD_NAMES[h]
                        )));
                    }
                }
                let (v_s, d_s) = kl_term(s_y, s_x);
                let (v_0, d_0) = kl_term(ys[0], xs[0]);
                let (v_r, d_r) = kl_term(rest_y, rest_x);
                total += scale * (v_s + v_0 + v_r);
                let mut g = grads[h].slice_mut(ndarray::s![i, j, ..]);
                g[0] = scale * (d_0 - d_r);
                for k in 1..bins {
                    g[k] = scale * w[k] * (d_s - d_r);
                }
            }
        }
    }
    Ok((total, grads))
}
