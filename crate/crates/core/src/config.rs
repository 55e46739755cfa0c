//! Strict JSON run configuration.
//!
//! Unknown keys are rejected, defaults are filled in at parse time, and the
//! resolved configuration serializes back to an equal value.
//!
//! ```json
//! {
//!   "oracle": { "kind": "motif", "motif_len": 8, "seed": 1 },
//!   "method": "fast_seqprop",
//!   "n": 100,
//!   "iterations": 200,
//!   "seed": 7
//! }
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::engine::{
    AnnealConfig, DesignMethod, DesignSettings, Fitness, MarkovPenalty, NormSettings, ObjectiveStack, OptimizerConfig,
    RunSettings,
};
use crate::error::{Error, Result};
use crate::fasta;
use crate::format::to_json_string;
use crate::normalizer::{Denominator, GradMode, NormMode};
use crate::objectives::{ActivityConfig, MarginPenaltyConfig, MarkovModel, SurvivalConfig};
use crate::oracles::{load_oracle, AnyOracle, MlpOracle, MotifOracle, Oracle, QuadraticOracle};
use crate::rng::RngState;
use crate::sampler::{GumbelConfig, StEstimator};
use crate::seq::{Alphabet, AlphabetKind};

/// Where the fitness oracle comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum OracleSpec {
    /// A JSON weight file, relative paths resolved against the config file.
    File { path: String },
    /// Motif weights drawn from `N(0, scale²)`.
    Motif {
        motif_len: usize,
        seed: u64,
        #[serde(default = "one")]
        scale: f64,
    },
    Quadratic {
        seed: u64,
        #[serde(default = "one")]
        w_scale: f64,
    },
    Mlp {
        seed: u64,
        #[serde(default = "default_hidden")]
        hidden1: usize,
        #[serde(default = "default_hidden")]
        hidden2: usize,
        #[serde(default)]
        uncertainty: bool,
    },
}

fn one() -> f64 {
    1.0
}
fn default_hidden() -> usize {
    16
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NormConfig {
    /// Defaults to `layer` for protein and `instance` otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<NormMode>,
    #[serde(default)]
    pub denominator: Denominator,
    #[serde(default)]
    pub grad_mode: GradMode,
    #[serde(default = "one")]
    pub gamma_init: f64,
    #[serde(default)]
    pub beta_init: f64,
}

impl Default for NormConfig {
    fn default() -> Self {
        Self {
            mode: None,
            denominator: Denominator::Std,
            grad_mode: GradMode::PaperLiteral,
            gamma_init: 1.0,
            beta_init: 0.0,
        }
    }
}

/// A Markov prior either loaded from a fitted model or fitted on a corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarkovSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub corpus: Option<String>,
    #[serde(default = "default_order")]
    pub order: usize,
    #[serde(default = "one")]
    pub lambda: f64,
    #[serde(default)]
    pub rho: f64,
}

fn default_order() -> usize {
    2
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectivesConfig {
    #[serde(default)]
    pub entropy_weight: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub markov: Option<MarkovSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub survival: Option<SurvivalConfig>,
    #[serde(default, skip_serializing_if = "is_empty_activity")]
    pub activity: ActivityConfig,
}

fn is_empty_activity(a: &ActivityConfig) -> bool {
    a.terms.is_empty()
}

/// Toy structure predictor used by the `structure` command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StructureConfig {
    pub predictor_seed: u64,
    #[serde(default = "default_structure_scale")]
    pub weight_scale: f64,
}

pub fn default_structure_scale() -> f64 {
    1.0 / 3f64.sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignConfig {
    /// Required by `design` and `anneal`; the structure harness builds its
    /// own oracle.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle: Option<OracleSpec>,
    #[serde(default = "default_method")]
    pub method: DesignMethod,
    #[serde(default = "default_alphabet")]
    pub alphabet: String,
    #[serde(alias = "N")]
    pub n: usize,
    pub iterations: usize,
    /// Independent restarts `K`.
    #[serde(default = "default_k", alias = "K")]
    pub restarts: usize,
    /// Test samples `S` per restart.
    #[serde(default = "default_s", alias = "S")]
    pub test_samples: usize,
    #[serde(default = "one_usize")]
    pub s_avg: usize,
    #[serde(default = "default_eval_every")]
    pub eval_every: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    #[serde(default)]
    pub normalization: NormConfig,
    #[serde(default)]
    pub estimator: StEstimator,
    /// Gumbel-softmax temperature; filled with 0.1 for `gumbel_fast`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gumbel_temperature: Option<f64>,
    #[serde(default)]
    pub objectives: ObjectivesConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baseline: Option<AnnealConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub structure: Option<StructureConfig>,
    /// Write wall-clock milliseconds into trajectories (breaks byte-identical
    /// reruns).
    #[serde(default)]
    pub record_time: bool,
}

fn default_method() -> DesignMethod {
    DesignMethod::FastSeqProp
}
fn default_alphabet() -> String {
    "dna".into()
}
fn default_k() -> usize {
    crate::objectives::DEFAULT_K
}
fn default_s() -> usize {
    crate::objectives::DEFAULT_S
}
fn one_usize() -> usize {
    1
}
fn default_eval_every() -> usize {
    10
}

fn invalid(field: &str, reason: &str) -> Error {
    Error::ValidationError {
        field: field.into(),
        reason: reason.into(),
    }
}

/// Parses, fills defaults and validates a configuration document.
pub fn parse_config_str(text: &str) -> Result<DesignConfig> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let mut cfg: DesignConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        let message = inner.to_string();
        if let Some(rest) = message.strip_prefix("unknown field `") {
            let key = rest.split('`').next().unwrap_or_default();
            let full = if path == "." || path.is_empty() {
                key.to_string()
            } else if path.rsplit('.').next() == Some(key) {
                path
            } else {
                // tagged enums report the path of the enclosing object
                format!("{path}.{key}")
            };
            return Error::UnknownKey(full);
        }
        Error::ParseError {
            location: if inner.line() > 0 {
                format!("{path} (line {} column {})", inner.line(), inner.column())
            } else {
                path
            },
            message,
        }
    })?;
    cfg.resolve()?;
    Ok(cfg)
}

pub fn parse_config(path: impl AsRef<Path>) -> Result<DesignConfig> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config_str(&text)
}

impl DesignConfig {
    /// Fills context-dependent defaults and validates every field.
    pub fn resolve(&mut self) -> Result<()> {
        let alphabet = self.alphabet()?;
        if self.normalization.mode.is_none() {
            self.normalization.mode = Some(match alphabet.kind() {
                AlphabetKind::Protein => NormMode::Layer,
                _ => NormMode::Instance,
            });
        }
        if self.method == DesignMethod::GumbelFast && self.gumbel_temperature.is_none() {
            self.gumbel_temperature = Some(GumbelConfig::default().temperature());
        }
        self.validate()
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(invalid("n", "must be >= 1"));
        }
        if self.method.normalized() && self.n < 2 {
            return Err(invalid("n", "normalized methods need at least 2 positions"));
        }
        for (field, v) in [
            ("restarts", self.restarts),
            ("test_samples", self.test_samples),
            ("s_avg", self.s_avg),
            ("eval_every", self.eval_every),
        ] {
            if v == 0 {
                return Err(invalid(field, "must be >= 1"));
            }
        }
        self.optimizer.validate()?;
        if !(self.normalization.gamma_init.is_finite() && self.normalization.beta_init.is_finite()) {
            return Err(invalid("normalization.gamma_init", "must be finite"));
        }
        if let Some(t) = self.gumbel_temperature {
            GumbelConfig::new(t).map_err(|_| invalid("gumbel_temperature", "must be > 0"))?;
        }
        let obj = &self.objectives;
        if !(obj.entropy_weight >= 0.0 && obj.entropy_weight.is_finite()) {
            return Err(invalid("objectives.entropy_weight", "must be >= 0"));
        }
        if let Some(m) = &obj.markov {
            if m.model.is_some() == m.corpus.is_some() {
                return Err(invalid("objectives.markov", "set exactly one of model or corpus"));
            }
            MarginPenaltyConfig {
                lambda: m.lambda,
                rho: m.rho,
            }
            .validate()
            .map_err(|e| prefix_field(e, "objectives."))?;
        }
        if let Some(s) = &obj.survival {
            s.validate().map_err(|e| prefix_field(e, "objectives."))?;
        }
        obj.activity.validate().map_err(|e| prefix_field(e, "objectives."))?;
        if let Some(b) = &self.baseline {
            b.validate()?;
        }
        match self.oracle.as_ref() {
            None => {}
            Some(OracleSpec::Motif { motif_len, scale, .. }) => {
                if *motif_len == 0 || *motif_len > self.n {
                    return Err(invalid("oracle.motif_len", "must lie in 1..=n"));
                }
                if !(scale.is_finite() && *scale > 0.0) {
                    return Err(invalid("oracle.scale", "must be > 0"));
                }
            }
            Some(OracleSpec::Quadratic { w_scale, .. }) => {
                if !(w_scale.is_finite() && *w_scale >= 0.0) {
                    return Err(invalid("oracle.w_scale", "must be >= 0"));
                }
            }
            Some(OracleSpec::Mlp { hidden1, hidden2, .. }) => {
                if *hidden1 == 0 || *hidden2 == 0 {
                    return Err(invalid("oracle.hidden1", "hidden sizes must be >= 1"));
                }
            }
            Some(OracleSpec::File { .. }) => {}
        }
        if let Some(s) = &self.structure {
            if !(s.weight_scale.is_finite() && s.weight_scale >= 0.0) {
                return Err(invalid("structure.weight_scale", "must be >= 0"));
            }
        }
        Ok(())
    }

    pub fn alphabet(&self) -> Result<Alphabet> {
        Alphabet::from_name(&self.alphabet).map_err(|_| invalid("alphabet", "unknown alphabet"))
    }

    pub fn norm_settings(&self) -> NormSettings {
        NormSettings {
            mode: self.normalization.mode.unwrap_or_default(),
            denominator: self.normalization.denominator,
            grad_mode: self.normalization.grad_mode,
            gamma_init: self.normalization.gamma_init,
            beta_init: self.normalization.beta_init,
        }
    }

    pub fn design_settings(&self) -> Result<DesignSettings> {
        let gumbel = match self.gumbel_temperature {
            Some(t) => GumbelConfig::new(t)?,
            None => GumbelConfig::default(),
        };
        Ok(DesignSettings {
            method: self.method,
            s_avg: self.s_avg,
            estimator: self.estimator,
            gumbel,
            norm: self.norm_settings(),
            optimizer: self.optimizer,
        })
    }

    pub fn run_settings(&self) -> RunSettings {
        RunSettings {
            restarts: self.restarts,
            iterations: self.iterations,
            test_samples: self.test_samples,
            eval_every: self.eval_every,
            seed: self.seed,
            record_time: self.record_time,
        }
    }

    /// Builds the oracle; relative paths are resolved against `base_dir`.
    pub fn build_oracle(&self, base_dir: &Path) -> Result<AnyOracle> {
        let alphabet = self.alphabet()?;
        let m = alphabet.len();
        let n = self.n;
        let spec = self.oracle.as_ref().ok_or_else(|| Error::ConfigError {
            field: "oracle".into(),
            reason: "required for this command".into(),
        })?;
        let oracle: AnyOracle = match spec {
            OracleSpec::File { path } => {
                let (oracle, file_alphabet) = load_oracle(resolve_path(base_dir, path))?;
                if file_alphabet != alphabet {
                    return Err(Error::ConfigError {
                        field: "alphabet".into(),
                        reason: format!(
                            "config says {:?} but the oracle file uses {:?}",
                            self.alphabet,
                            file_alphabet.name()
                        ),
                    });
                }
                if oracle.shape().0 != n {
                    return Err(Error::ConfigError {
                        field: "n".into(),
                        reason: format!("oracle expects n = {}", oracle.shape().0),
                    });
                }
                oracle
            }
            OracleSpec::Motif { motif_len, seed, scale } => {
                let base = MotifOracle::random(n, *motif_len, m, &mut RngState::new(*seed))?;
                if *scale == 1.0 {
                    base.into()
                } else {
                    MotifOracle::new(base.weights() * *scale, n)?.into()
                }
            }
            OracleSpec::Quadratic { seed, w_scale } => {
                QuadraticOracle::random(n, m, *w_scale, &mut RngState::new(*seed))?.into()
            }
            OracleSpec::Mlp {
                seed,
                hidden1,
                hidden2,
                uncertainty,
            } => MlpOracle::random(n, m, *hidden1, *hidden2, *uncertainty, &mut RngState::new(*seed))?.into(),
        };
        Ok(oracle)
    }

    /// Objective stack with any Markov prior loaded or fitted.
    pub fn objective_stack(&self, base_dir: &Path) -> Result<ObjectiveStack> {
        let obj = &self.objectives;
        let markov = match &obj.markov {
            None => None,
            Some(spec) => {
                let model = match (&spec.model, &spec.corpus) {
                    (Some(path), _) => MarkovModel::load(resolve_path(base_dir, path))?,
                    (None, Some(path)) => {
                        let records = fasta::read(resolve_path(base_dir, path))?;
                        MarkovModel::fit(&records, spec.order, self.alphabet()?)?
                    }
                    (None, None) => unreachable!("validated"),
                };
                if model.alphabet() != &self.alphabet()? {
                    return Err(Error::ConfigError {
                        field: "objectives.markov".into(),
                        reason: "model alphabet differs from the design alphabet".into(),
                    });
                }
                Some(MarkovPenalty {
                    model,
                    margin: MarginPenaltyConfig {
                        lambda: spec.lambda,
                        rho: spec.rho,
                    },
                })
            }
        };
        Ok(ObjectiveStack {
            fitness: obj.survival.map_or(Fitness::Score, Fitness::Survival),
            entropy_weight: obj.entropy_weight,
            markov,
            activity: obj.activity.clone(),
        })
    }

    /// Pretty JSON with `%.17g` floats.
    pub fn to_json(&self) -> String {
        to_json_string(self)
    }
}

fn prefix_field(e: Error, prefix: &str) -> Error {
    match e {
        Error::ValidationError { field, reason } => Error::ValidationError {
            field: format!("{prefix}{field}"),
            reason,
        },
        other => other,
    }
}

pub fn resolve_path(base_dir: &Path, path: &str) -> PathBuf {
    let p = Path::new(path);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base_dir.join(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "oracle": {"kind": "motif", "motif_len": 4, "seed": 1},
        "method": "fast_seqprop",
        "n": 20,
        "iterations": 50,
        "seed": 3
    }"#;

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg = parse_config_str(MINIMAL).unwrap();
        assert_eq!(cfg.restarts, 10);
        assert_eq!(cfg.test_samples, 10);
        assert_eq!(cfg.s_avg, 1);
        assert_eq!(cfg.normalization.mode, Some(NormMode::Instance));
        assert_eq!(cfg.gumbel_temperature, None);
        assert_eq!(cfg.optimizer, OptimizerConfig::default());
    }

    #[test]
    fn gumbel_defaults_to_temperature_point_one() {
        let text = MINIMAL.replace("fast_seqprop", "gumbel_fast");
        assert_eq!(parse_config_str(&text).unwrap().gumbel_temperature, Some(0.1));
    }

    #[test]
    fn protein_defaults_to_layer_norm() {
        let text = MINIMAL.replace("\"n\": 20", "\"n\": 20, \"alphabet\": \"protein\"");
        assert_eq!(parse_config_str(&text).unwrap().normalization.mode, Some(NormMode::Layer));
    }

    #[test]
    fn negative_learning_rate() {
        let text = MINIMAL.replace("\"seed\": 3", "\"seed\": 3, \"optimizer\": {\"kind\": \"sgd\", \"lr\": -0.1}");
        match parse_config_str(&text).unwrap_err() {
            Error::ValidationError { field, reason } => {
                assert_eq!(field, "optimizer.lr");
                assert_eq!(reason, "must be > 0");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_keys_are_named() {
        let text = MINIMAL.replace("\"seed\": 3", "\"seed\": 3, \"iteratons\": 5");
        assert!(matches!(parse_config_str(&text), Err(Error::UnknownKey(k)) if k == "iteratons"));
        let text = MINIMAL.replace("\"seed\": 1}", "\"seed\": 1, \"colour\": 2}");
        assert!(matches!(parse_config_str(&text), Err(Error::UnknownKey(k)) if k == "oracle.colour"));
    }

    #[test]
    fn malformed_json_is_a_parse_error() {
        assert!(matches!(parse_config_str("{\"oracle\": "), Err(Error::ParseError { .. })));
        let text = MINIMAL.replace("fast_seqprop", "fastest");
        assert!(matches!(parse_config_str(&text), Err(Error::ParseError { .. })));
    }

    #[test]
    fn echo_round_trip() {
        let text = r#"{
            "oracle": {"kind": "mlp", "seed": 2, "uncertainty": true},
            "method": "gumbel_fast", "n": 12, "iterations": 10, "K": 3, "S": 4,
            "optimizer": {"kind": "adam", "lr": 0.0123456789012345},
            "objectives": {"entropy_weight": 0.1, "survival": {"q_threshold": 0.3},
                           "activity": [{"layer": "hidden1", "cap": 2.5, "weight": 0.1}]},
            "baseline": {"kind": "evolution"}
        }"#;
        let cfg = parse_config_str(text).unwrap();
        let echo = cfg.to_json();
        assert_eq!(parse_config_str(&echo).unwrap(), cfg);
        assert_eq!(parse_config_str(&echo).unwrap().to_json(), echo);
    }

    #[test]
    fn builds_seeded_oracles() {
        let cfg = parse_config_str(MINIMAL).unwrap();
        let a = cfg.build_oracle(Path::new(".")).unwrap();
        let b = cfg.build_oracle(Path::new(".")).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.shape(), (20, 4));
    }
}
