//! Losses and regularizers combined into a design objective.

mod entropy;
mod hinge;
mod markov;
pub mod structure;
mod survival;

pub use entropy::{entropy_penalty, entropy_penalty_raw, mean_conservation_bits, mean_entropy_bits};
pub use hinge::{
    activity_penalty, activity_terms, likelihood_margin, likelihood_margin_loss, ActivityConfig, ActivityTerm,
    MarginPenaltyConfig,
};
pub use markov::{markov_log10_likelihood, MarkovModel, PROB_FLOOR};
pub use structure::{smooth_structure_kl, structure_kl, StructureTensors};
pub use survival::{
    normal_sf, survival_objective, survival_objective_capped, SurvivalConfig, SurvivalEval, SF_UNDERFLOW,
    SURVIVAL_VALUE_CAP,
};

use crate::error::{Error, Result};
use crate::oracles::Oracle;
use crate::rng::RngState;
use crate::sampler::sample_categorical;
use crate::seq::{Matrix, ProbMatrix};

/// Number of independent restarts used for test losses.
pub const DEFAULT_K: usize = 10;
/// Samples drawn per restart for test losses.
pub const DEFAULT_S: usize = 10;

/// `−P(x)`.
pub fn train_loss<O: Oracle + ?Sized>(oracle: &O, x: &Matrix) -> Result<f64> {
    Ok(-oracle.score(x)?)
}

/// `−(1/(K·S)) Σ_k Σ_s P(δ^(s))` with `S` categorical samples from each of the
/// `K` distributions, drawn restart by restart.
pub fn test_loss<O: Oracle + ?Sized>(oracle: &O, probs: &[ProbMatrix], samples: usize, rng: &mut RngState) -> Result<f64> {
    if probs.is_empty() || samples == 0 {
        return Err(Error::ValidationError {
            field: "test_loss".into(),
            reason: "need K >= 1 and S >= 1".into(),
        });
    }
    let mut total = 0.0;
    for p in probs {
        total += sampled_scores(oracle, p, samples, rng)?.iter().map(|(s, _)| s).sum::<f64>();
    }
    Ok(-total / (probs.len() * samples) as f64)
}

/// Scores of `samples` sequences drawn from `p`, with their symbol indices.
pub fn sampled_scores<O: Oracle + ?Sized>(
    oracle: &O,
    p: &ProbMatrix,
    samples: usize,
    rng: &mut RngState,
) -> Result<Vec<(f64, Vec<usize>)>> {
    (0..samples)
        .map(|_| {
            let idx = sample_categorical(p, rng).indices();
            Ok((oracle.score_indices(&idx)?, idx))
        })
        .collect()
}
