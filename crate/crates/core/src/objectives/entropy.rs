use std::f64::consts::LN_2;

use crate::seq::{Matrix, ProbMatrix};

/// Probabilities below this are treated as this value in gradients.
const GRAD_FLOOR: f64 = 1e-12;

fn plogp_bits(p: f64) -> f64 {
    if p > 0.0 {
        p * p.log2()
    } else {
        0.0
    }
}

/// Mean per-position Shannon entropy in bits.
pub fn mean_entropy_bits(p: &Matrix) -> f64 {
    let n = p.nrows() as f64;
    -p.iter().map(|&v| plogp_bits(v)).sum::<f64>() / n
}

/// Mean per-position conservation `log2 M − H` in bits.
pub fn mean_conservation_bits(p: &Matrix) -> f64 {
    (p.ncols() as f64).log2() - mean_entropy_bits(p)
}

/// `λ · (1/N) Σ_i Σ_j −p_ij log2 p_ij` and its gradient w.r.t. `p`.
pub fn entropy_penalty(p: &ProbMatrix, weight: f64) -> (f64, Matrix) {
    entropy_penalty_raw(p, weight)
}

/// As [`entropy_penalty`] but without the distribution check, so it can be
/// probed off the simplex.
pub fn entropy_penalty_raw(p: &Matrix, weight: f64) -> (f64, Matrix) {
    let n = p.nrows() as f64;
    let value = weight * mean_entropy_bits(p);
    let grad = p.mapv(|v| -weight / n * (v.max(GRAD_FLOOR).ln() + 1.0) / LN_2);
    (value, grad)
}
