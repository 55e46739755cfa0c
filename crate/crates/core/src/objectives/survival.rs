//! Maximizing the probability that a Gaussian fitness prediction exceeds a
//! training-set quantile.

use std::f64::consts::{LN_10, PI, SQRT_2};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Survival probabilities below this are reported as underflow.
pub const SF_UNDERFLOW: f64 = 1e-300;
/// The objective value reported on underflow, `−log10(SF_UNDERFLOW)`.
pub const SURVIVAL_VALUE_CAP: f64 = 300.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurvivalConfig {
    /// Fitness value at quantile `q` of the training data.
    pub q_threshold: f64,
    #[serde(default = "default_q")]
    pub q: f64,
}

fn default_q() -> f64 {
    0.95
}

impl SurvivalConfig {
    pub fn new(q_threshold: f64, q: f64) -> Result<Self> {
        let cfg = Self { q_threshold, q };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Threshold taken as the empirical `q`-quantile (linear interpolation)
    /// of `scores`.
    pub fn from_training_scores(scores: &[f64], q: f64) -> Result<Self> {
        if scores.is_empty() {
            return Err(Error::DegenerateInput("no training scores".into()));
        }
        let mut sorted = scores.to_vec();
        sorted.sort_by(f64::total_cmp);
        let pos = q * (sorted.len() - 1) as f64;
        let lo = pos.floor() as usize;
        let hi = pos.ceil() as usize;
        let t = sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64);
        Self::new(t, q)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.q > 0.0 && self.q < 1.0) {
            return Err(Error::ValidationError {
                field: "survival.q".into(),
                reason: "must lie in (0, 1)".into(),
            });
        }
        if !self.q_threshold.is_finite() {
            return Err(Error::ValidationError {
                field: "survival.q_threshold".into(),
                reason: "must be finite".into(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurvivalEval {
    pub value: f64,
    pub d_mean: f64,
    pub d_std: f64,
}

/// Standard normal survival function `P(Z > z)`.
pub fn normal_sf(z: f64) -> f64 {
    0.5 * libm::erfc(z / SQRT_2)
}

fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * PI).sqrt()
}

/// `−log10 P(Y > q_threshold)` for `Y ~ N(mean, std²)`, with partial
/// derivatives.
///
/// When the survival probability drops below [`SF_UNDERFLOW`] the error
/// [`Error::NumericUnderflow`] carries a capped value and gradients from the
/// asymptotic expansion of the normal tail, so callers can keep optimizing.
pub fn survival_objective(mean: f64, std: f64, cfg: &SurvivalConfig) -> Result<SurvivalEval> {
    if std.is_nan() || std <= 0.0 || !std.is_finite() || !mean.is_finite() {
        return Err(Error::ValidationError {
            field: "std".into(),
            reason: format!("need finite mean and std > 0, got ({mean}, {std})"),
        });
    }
    let z = (cfg.q_threshold - mean) / std;
    let sf = normal_sf(z);
    // d value / dz = hazard(z) / ln 10, dz/dμ = −1/σ, dz/dσ = −z/σ
    let partials = |hazard: f64| (-hazard / LN_10 / std, -hazard / LN_10 * z / std);
    if sf < SF_UNDERFLOW {
        let zi2 = 1.0 / (z * z);
        let series = 1.0 - zi2 + 3.0 * zi2 * zi2 - 15.0 * zi2 * zi2 * zi2;
        let hazard = z / series;
        let (d_mean, d_std) = partials(hazard);
        return Err(Error::NumericUnderflow {
            value: SURVIVAL_VALUE_CAP,
            d_mean,
            d_std,
        });
    }
    let (d_mean, d_std) = partials(normal_pdf(z) / sf);
    // near SF = 1 work with the lower tail to keep precision
    let value = if z < 0.0 {
        -(-normal_sf(-z)).ln_1p() / LN_10
    } else {
        -sf.log10()
    };
    Ok(SurvivalEval {
        value,
        d_mean,
        d_std,
    })
}

/// [`survival_objective`] with underflow folded into the capped result.
pub fn survival_objective_capped(mean: f64, std: f64, cfg: &SurvivalConfig) -> Result<SurvivalEval> {
    match survival_objective(mean, std, cfg) {
        Err(Error::NumericUnderflow { value, d_mean, d_std }) => Ok(SurvivalEval { value, d_mean, d_std }),
        other => other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(t: f64) -> SurvivalConfig {
        SurvivalConfig::new(t, 0.95).unwrap()
    }

    #[test]
    fn table_values() {
        let v = survival_objective(1.5, 0.7, &cfg(1.5)).unwrap();
        assert!((v.value - 2f64.log10()).abs() < 1e-12);
        assert!((v.value - std::f64::consts::LOG10_2).abs() < 1e-12);
        let v = survival_objective(1.5 - 0.7, 0.7, &cfg(1.5)).unwrap();
        assert!((normal_sf(1.0) - 0.158655).abs() < 1e-6);
        assert!((v.value - 0.79955).abs() < 1e-5);
        let v = survival_objective(1e3, 1.0, &cfg(0.0)).unwrap();
        assert!(v.value.abs() < 1e-12);
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let c = cfg(0.3);
        for &(mu, sd) in &[(0.0, 1.0), (-2.0, 0.5), (1.2, 2.0), (0.3, 0.1), (-5.0, 0.4)] {
            let v = survival_objective(mu, sd, &c).unwrap();
            let h = 1e-6;
            let fm = (survival_objective(mu + h, sd, &c).unwrap().value
                - survival_objective(mu - h, sd, &c).unwrap().value)
                / (2.0 * h);
            let fs = (survival_objective(mu, sd + h, &c).unwrap().value
                - survival_objective(mu, sd - h, &c).unwrap().value)
                / (2.0 * h);
            assert!((v.d_mean - fm).abs() <= 1e-6 * fm.abs().max(1.0), "{mu} {sd}");
            assert!((v.d_std - fs).abs() <= 1e-6 * fs.abs().max(1.0), "{mu} {sd}");
        }
    }

    #[test]
    fn monotone_in_mean() {
        let c = cfg(0.0);
        let mut prev = f64::INFINITY;
        for i in 0..200 {
            let mu = -10.0 + 0.1 * i as f64;
            let v = survival_objective(mu, 1.0, &c).unwrap().value;
            assert!(v < prev);
            prev = v;
        }
    }

    #[test]
    fn underflow_is_signalled_with_usable_gradient() {
        let err = survival_objective(-60.0, 1.0, &cfg(0.0)).unwrap_err();
        match err {
            Error::NumericUnderflow { value, d_mean, .. } => {
                assert_eq!(value, SURVIVAL_VALUE_CAP);
                // hazard ≈ z for large z
                assert!((d_mean * LN_10 + 60.0).abs() < 0.1);
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(survival_objective_capped(-60.0, 1.0, &cfg(0.0)).is_ok());
        assert!(survival_objective(0.0, 0.0, &cfg(0.0)).is_err());
    }

    #[test]
    fn quantile_threshold() {
        let scores: Vec<f64> = (0..=100).map(f64::from).collect();
        let c = SurvivalConfig::from_training_scores(&scores, 0.95).unwrap();
        assert!((c.q_threshold - 95.0).abs() < 1e-12);
        assert!(SurvivalConfig::new(0.0, 1.0).is_err());
    }
}
