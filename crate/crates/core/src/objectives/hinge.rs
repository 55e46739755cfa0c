use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarginPenaltyConfig {
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    #[serde(default)]
    pub rho: f64,
}

fn default_lambda() -> f64 {
    1.0
}

impl Default for MarginPenaltyConfig {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            rho: 0.0,
        }
    }
}

impl MarginPenaltyConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::ValidationError {
                field: "markov.lambda".into(),
                reason: "must be >= 0".into(),
            });
        }
        if !(self.rho >= 0.0 && self.rho.is_finite()) {
            return Err(Error::ValidationError {
                field: "markov.rho".into(),
                reason: "must be >= 0".into(),
            });
        }
        Ok(())
    }
}

/// `λ · max(p_ref − log10 p − ρ, 0)` and its derivative w.r.t. `log10 p`.
pub fn likelihood_margin(log10_p: f64, p_ref_log10: f64, cfg: &MarginPenaltyConfig) -> (f64, f64) {
    let gap = p_ref_log10 - log10_p - cfg.rho;
    if gap > 0.0 {
        (cfg.lambda * gap, -cfg.lambda)
    } else {
        (0.0, 0.0)
    }
}

pub fn likelihood_margin_loss(log10_p: f64, model: &super::MarkovModel, cfg: &MarginPenaltyConfig) -> f64 {
    likelihood_margin(log10_p, model.p_ref_log10(), cfg).0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActivityTerm {
    pub layer: String,
    pub cap: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ActivityConfig {
    pub terms: Vec<ActivityTerm>,
}

impl ActivityConfig {
    pub fn validate(&self) -> Result<()> {
        for (i, t) in self.terms.iter().enumerate() {
            if !(t.weight >= 0.0 && t.weight.is_finite()) {
                return Err(Error::ValidationError {
                    field: format!("activity[{i}].weight"),
                    reason: "must be >= 0".into(),
                });
            }
            if !t.cap.is_finite() {
                return Err(Error::ValidationError {
                    field: format!("activity[{i}].cap"),
                    reason: "must be finite".into(),
                });
            }
        }
        Ok(())
    }
}

/// Per configured term: its penalty and the derivative w.r.t. the layer's
/// activation sum.
pub fn activity_terms(activations: &[(&str, f64)], cfg: &ActivityConfig) -> Result<Vec<(f64, f64)>> {
    cfg.terms
        .iter()
        .map(|t| {
            let (_, value) = activations
                .iter()
                .find(|(name, _)| *name == t.layer)
                .ok_or_else(|| Error::UnknownLayer(t.layer.clone()))?;
            Ok(if *value > t.cap {
                (t.weight * (value - t.cap), t.weight)
            } else {
                (0.0, 0.0)
            })
        })
        .collect()
}

/// `Σ_k η_k · max(C_k − cap_k, 0)`.
pub fn activity_penalty(activations: &[(&str, f64)], cfg: &ActivityConfig) -> Result<f64> {
    Ok(activity_terms(activations, cfg)?.iter().fold(0.0, |acc, (v, _)| acc + v))
}
