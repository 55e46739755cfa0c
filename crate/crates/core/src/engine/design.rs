use std::fmt;

use ndarray::Array1;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::normalizer::{backprop_normalize, normalize, Denominator, GradMode, NormCache, NormMode, ScaleOffset};
use crate::objectives::{
    activity_terms, entropy_penalty, likelihood_margin, markov_log10_likelihood, mean_entropy_bits,
    survival_objective_capped, ActivityConfig, MarginPenaltyConfig, MarkovModel, SurvivalConfig,
};
use crate::oracles::Oracle;
use crate::rng::RngState;
use crate::sampler::{
    backprop_gumbel, backprop_st, sample_categorical, sample_gumbel, softmax_rows, softmax_vjp, GumbelConfig,
    StEstimator,
};
use crate::seq::{argmax, Matrix, ProbMatrix};

use super::optimizer::{optimizer_update, OptimizerConfig, OptimizerState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DesignMethod {
    #[serde(rename = "pwm")]
    Pwm,
    #[serde(rename = "fast_pwm")]
    FastPwm,
    #[serde(rename = "seqprop")]
    SeqProp,
    #[serde(rename = "fast_seqprop")]
    FastSeqProp,
    #[serde(rename = "gumbel_fast")]
    GumbelFast,
}

impl DesignMethod {
    pub const ALL: [DesignMethod; 5] = [
        DesignMethod::Pwm,
        DesignMethod::FastPwm,
        DesignMethod::SeqProp,
        DesignMethod::FastSeqProp,
        DesignMethod::GumbelFast,
    ];

    /// Whether logits pass through the normalizer.
    pub fn normalized(self) -> bool {
        matches!(self, Self::FastPwm | Self::FastSeqProp | Self::GumbelFast)
    }

    /// Whether the oracle sees discrete samples rather than the softmax.
    pub fn sampled(self) -> bool {
        matches!(self, Self::SeqProp | Self::FastSeqProp | Self::GumbelFast)
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Pwm => "pwm",
            Self::FastPwm => "fast_pwm",
            Self::SeqProp => "seqprop",
            Self::FastSeqProp => "fast_seqprop",
            Self::GumbelFast => "gumbel_fast",
        }
    }
}

impl fmt::Display for DesignMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NormSettings {
    #[serde(default)]
    pub mode: NormMode,
    #[serde(default)]
    pub denominator: Denominator,
    #[serde(default)]
    pub grad_mode: GradMode,
    #[serde(default = "one")]
    pub gamma_init: f64,
    #[serde(default)]
    pub beta_init: f64,
}

fn one() -> f64 {
    1.0
}

impl Default for NormSettings {
    fn default() -> Self {
        Self {
            mode: NormMode::Instance,
            denominator: Denominator::Std,
            grad_mode: GradMode::PaperLiteral,
            gamma_init: 1.0,
            beta_init: 0.0,
        }
    }
}

/// Everything that controls a single design step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DesignSettings {
    pub method: DesignMethod,
    /// Samples averaged per gradient step (sampling methods only).
    pub s_avg: usize,
    pub estimator: StEstimator,
    pub gumbel: GumbelConfig,
    pub norm: NormSettings,
    pub optimizer: OptimizerConfig,
}

impl DesignSettings {
    pub fn new(method: DesignMethod) -> Self {
        Self {
            method,
            s_avg: 1,
            estimator: StEstimator::SoftmaxSt,
            gumbel: GumbelConfig::default(),
            norm: NormSettings::default(),
            optimizer: OptimizerConfig::default(),
        }
    }
}

/// The fitness term of the objective.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Fitness {
    /// Loss `−P(x)`.
    #[default]
    Score,
    /// Loss `−log10 P(Y > threshold)` under the oracle's predicted Gaussian.
    Survival(SurvivalConfig),
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarkovPenalty {
    pub model: MarkovModel,
    pub margin: MarginPenaltyConfig,
}

/// Fitness loss plus optional regularizers.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ObjectiveStack {
    pub fitness: Fitness,
    /// Weight of the mean-entropy penalty on `σ(l)`; 0 disables it.
    pub entropy_weight: f64,
    pub markov: Option<MarkovPenalty>,
    pub activity: ActivityConfig,
}

/// Loss of one oracle input and its gradient w.r.t. that input.
#[derive(Debug, Clone)]
pub struct InputLoss {
    pub score: f64,
    pub fitness: f64,
    pub markov: f64,
    pub activity: f64,
    pub grad: Matrix,
}

impl ObjectiveStack {
    /// Scores `x` and returns every input-side term. The entropy penalty
    /// lives on `σ(l)` and is handled separately.
    pub fn input_loss<O: Oracle + ?Sized>(&self, oracle: &O, x: &Matrix) -> Result<InputLoss> {
        let eval = oracle.evaluate(x)?;
        let (fitness, mut grad) = match self.fitness {
            Fitness::Score => (-eval.score, -&eval.grad),
            Fitness::Survival(cfg) => {
                let ms = eval.mean_std.as_ref().ok_or_else(|| Error::ConfigError {
                    field: "objectives.survival".into(),
                    reason: "oracle has no uncertainty head".into(),
                })?;
                let s = survival_objective_capped(ms.mean, ms.std, &cfg)?;
                (s.value, &ms.grad_mean * s.d_mean + &ms.grad_std * s.d_std)
            }
        };
        let mut markov = 0.0;
        if let Some(mp) = &self.markov {
            let (log10_p, g) = markov_log10_likelihood(&mp.model, x)?;
            let (value, slope) = likelihood_margin(log10_p, mp.model.p_ref_log10(), &mp.margin);
            markov = value;
            if slope != 0.0 {
                grad.scaled_add(slope, &g);
            }
        }
        let mut activity = 0.0;
        if !self.activity.terms.is_empty() {
            let named: Vec<(&str, f64)> = eval.activations.iter().map(|a| (a.name.as_str(), a.value)).collect();
            for (term, (value, slope)) in self.activity.terms.iter().zip(activity_terms(&named, &self.activity)?) {
                activity += value;
                if slope != 0.0 {
                    let act = eval.activation(&term.layer).expect("checked by activity_terms");
                    grad.scaled_add(slope, &act.grad);
                }
            }
        }
        Ok(InputLoss {
            score: eval.score,
            fitness,
            markov,
            activity,
            grad,
        })
    }

    /// Names of the penalty columns this stack reports, in order.
    pub fn penalty_names(&self) -> Vec<&'static str> {
        let mut names = Vec::new();
        if self.entropy_weight > 0.0 {
            names.push("entropy");
        }
        if self.markov.is_some() {
            names.push("markov");
        }
        if !self.activity.terms.is_empty() {
            names.push("activity");
        }
        names
    }
}

/// Raw logits and, for normalized methods, their learnable scale and offset.
#[derive(Debug, Clone, PartialEq)]
pub struct LogitState {
    pub logits: Matrix,
    pub scale_offset: Option<ScaleOffset>,
}

impl LogitState {
    /// `Uniform(−1, 1)` logits.
    pub fn random(n: usize, m: usize, method: DesignMethod, norm: &NormSettings, rng: &mut RngState) -> Self {
        let logits = Matrix::from_shape_simple_fn((n, m), || rng.uniform_range(-1.0, 1.0));
        Self::from_logits(logits, method, norm)
    }

    pub fn from_logits(logits: Matrix, method: DesignMethod, norm: &NormSettings) -> Self {
        let m = logits.ncols();
        let scale_offset = method
            .normalized()
            .then(|| ScaleOffset::new(norm.mode, m, norm.gamma_init, norm.beta_init));
        Self { logits, scale_offset }
    }

    /// Logits fed to the softmax, with the normalization cache if any.
    pub fn effective_logits(&self, norm: &NormSettings) -> Result<(Matrix, Option<NormCache>)> {
        match &self.scale_offset {
            None => Ok((self.logits.clone(), None)),
            Some(so) => {
                let (l, cache) = normalize(&self.logits, so, norm.mode, norm.denominator, norm.grad_mode)?;
                Ok((l, Some(cache)))
            }
        }
    }

    /// `σ(l)` of the effective logits.
    pub fn probs(&self, norm: &NormSettings) -> Result<ProbMatrix> {
        softmax_rows(&self.effective_logits(norm)?.0)
    }

    pub fn argmax_indices(&self, norm: &NormSettings) -> Result<Vec<usize>> {
        let (l, _) = self.effective_logits(norm)?;
        Ok(l.rows().into_iter().map(argmax).collect())
    }

    fn n_params(&self) -> usize {
        self.logits.len() + self.scale_offset.as_ref().map_or(0, |so| so.gamma.len() + so.beta.len())
    }

    fn flatten(&self) -> Vec<f64> {
        let mut out: Vec<f64> = self.logits.iter().copied().collect();
        if let Some(so) = &self.scale_offset {
            out.extend(so.gamma.iter());
            out.extend(so.beta.iter());
        }
        out
    }

    fn unflatten(&mut self, flat: &[f64]) {
        let nl = self.logits.len();
        for (dst, src) in self.logits.iter_mut().zip(&flat[..nl]) {
            *dst = *src;
        }
        if let Some(so) = &mut self.scale_offset {
            let ng = so.gamma.len();
            so.gamma = Array1::from(flat[nl..nl + ng].to_vec());
            so.beta = Array1::from(flat[nl + ng..].to_vec());
        }
    }
}

#[derive(Debug, Clone)]
pub struct DesignState {
    pub logits: LogitState,
    pub optimizer: OptimizerState,
    pub iteration: usize,
    /// Highest oracle score of any discrete sequence scored so far.
    pub best: Option<(f64, Vec<usize>)>,
    pub rng: RngState,
    pub oracle_calls: u64,
}

impl DesignState {
    pub fn new(logits: LogitState, optimizer: OptimizerConfig, rng: RngState) -> Self {
        let optimizer = OptimizerState::new(optimizer, logits.n_params());
        Self {
            logits,
            optimizer,
            iteration: 0,
            best: None,
            rng,
            oracle_calls: 0,
        }
    }

    /// Fresh random logits drawn from `rng`, which then drives sampling.
    pub fn random(n: usize, m: usize, settings: &DesignSettings, mut rng: RngState) -> Self {
        let logits = LogitState::random(n, m, settings.method, &settings.norm, &mut rng);
        Self::new(logits, settings.optimizer, rng)
    }

    pub fn observe(&mut self, score: f64, indices: &[usize]) {
        if self.best.as_ref().is_none_or(|(b, _)| score > *b) {
            self.best = Some((score, indices.to_vec()));
        }
    }
}

/// Losses of one forward pass, averaged over samples.
#[derive(Debug, Clone, PartialEq)]
pub struct StepReport {
    /// Fitness loss: `−P(x)`, or the survival loss when configured.
    pub train_loss: f64,
    pub entropy_bits: f64,
    /// `(name, value)` for each active penalty, see
    /// [`ObjectiveStack::penalty_names`].
    pub penalties: Vec<(&'static str, f64)>,
}

impl StepReport {
    pub fn penalty_total(&self) -> f64 {
        self.penalties.iter().fold(0.0, |acc, (_, v)| acc + v)
    }
}

/// Gradients w.r.t. the raw logits, γ and β.
#[derive(Debug, Clone)]
pub struct StepGrads {
    pub logits: Matrix,
    pub gamma: Option<Array1<f64>>,
    pub beta: Option<Array1<f64>>,
}

impl StepGrads {
    fn flatten(&self) -> Vec<f64> {
        let mut out: Vec<f64> = self.logits.iter().copied().collect();
        if let (Some(g), Some(b)) = (&self.gamma, &self.beta) {
            out.extend(g.iter());
            out.extend(b.iter());
        }
        out
    }
}

/// Forward and backward pass at the current parameters, without updating.
pub fn forward_backward<O: Oracle + ?Sized>(
    state: &mut DesignState,
    settings: &DesignSettings,
    oracle: &O,
    stack: &ObjectiveStack,
) -> Result<(StepReport, StepGrads)> {
    if settings.s_avg == 0 {
        return Err(Error::ValidationError {
            field: "s_avg".into(),
            reason: "must be >= 1".into(),
        });
    }
    let norm = &settings.norm;
    let (l_eff, cache) = state.logits.effective_logits(norm)?;
    let p = softmax_rows(&l_eff)?;

    let mut fitness = 0.0;
    let mut markov = 0.0;
    let mut activity = 0.0;
    let mut grad_l = Matrix::zeros(l_eff.dim());
    match settings.method {
        DesignMethod::Pwm | DesignMethod::FastPwm => {
            let loss = stack.input_loss(oracle, &p)?;
            state.oracle_calls += 1;
            fitness = loss.fitness;
            markov = loss.markov;
            activity = loss.activity;
            grad_l = softmax_vjp(&loss.grad, &p);
        }
        DesignMethod::SeqProp | DesignMethod::FastSeqProp | DesignMethod::GumbelFast => {
            let w = 1.0 / settings.s_avg as f64;
            for _ in 0..settings.s_avg {
                let (x, relaxed) = if settings.method == DesignMethod::GumbelFast {
                    let g = sample_gumbel(&l_eff, &settings.gumbel, &mut state.rng)?;
                    (g.hard, Some(g.relaxed))
                } else {
                    (sample_categorical(&p, &mut state.rng), None)
                };
                let loss = stack.input_loss(oracle, &x)?;
                state.oracle_calls += 1;
                state.observe(loss.score, &x.indices());
                fitness += w * loss.fitness;
                markov += w * loss.markov;
                activity += w * loss.activity;
                let g = match &relaxed {
                    Some(r) => backprop_gumbel(&loss.grad, r, &settings.gumbel)?,
                    None => backprop_st(&loss.grad, &p, settings.estimator)?,
                };
                grad_l.scaled_add(w, &g);
            }
        }
    }

    let mut penalties = Vec::new();
    if stack.entropy_weight > 0.0 {
        let (value, g) = entropy_penalty(&p, stack.entropy_weight);
        grad_l += &softmax_vjp(&g, &p);
        penalties.push(("entropy", value));
    }
    if stack.markov.is_some() {
        penalties.push(("markov", markov));
    }
    if !stack.activity.terms.is_empty() {
        penalties.push(("activity", activity));
    }

    let grads = match (&cache, &state.logits.scale_offset) {
        (Some(cache), Some(so)) => {
            let g = backprop_normalize(&grad_l, cache, so)?;
            StepGrads {
                logits: g.logits,
                gamma: Some(g.gamma),
                beta: Some(g.beta),
            }
        }
        _ => StepGrads {
            logits: grad_l,
            gamma: None,
            beta: None,
        },
    };
    let report = StepReport {
        train_loss: fitness,
        entropy_bits: mean_entropy_bits(&p),
        penalties,
    };
    Ok((report, grads))
}

/// Applies one optimizer update with precomputed gradients.
pub fn apply_grads(state: &mut DesignState, grads: &StepGrads) -> Result<()> {
    let mut params = state.logits.flatten();
    optimizer_update(&mut state.optimizer, &mut params, &grads.flatten())?;
    state.logits.unflatten(&params);
    state.iteration += 1;
    Ok(())
}

/// One forward/backward/update cycle.
pub fn design_step<O: Oracle + ?Sized>(
    state: &mut DesignState,
    settings: &DesignSettings,
    oracle: &O,
    stack: &ObjectiveStack,
) -> Result<StepReport> {
    let (report, grads) = forward_backward(state, settings, oracle, stack)?;
    apply_grads(state, &grads)?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracles::{MotifOracle, QuadraticOracle};
    use crate::testing::{finite_difference, max_relative_error};
    use ndarray::{array, Array2};

    fn linear_oracle(b: Array1<f64>, n: usize, m: usize) -> QuadraticOracle {
        QuadraticOracle::new(Array2::zeros((n * m, n * m)), b, n, m).unwrap()
    }

    #[test]
    fn pwm_sgd_step_matches_hand_calculation() {
        let b = array![1.0, -0.5, 0.25, 0.0, 0.3, 0.2, -1.0, 0.7];
        let oracle = linear_oracle(b.clone(), 2, 4);
        let l0 = array![[0.2, -0.1, 0.4, 0.0], [-0.3, 0.5, 0.1, -0.2]];
        let mut settings = DesignSettings::new(DesignMethod::Pwm);
        settings.optimizer = OptimizerConfig::sgd(0.1);
        let logits = LogitState::from_logits(l0.clone(), DesignMethod::Pwm, &settings.norm);
        let mut state = DesignState::new(logits, settings.optimizer, RngState::new(0));
        design_step(&mut state, &settings, &oracle, &ObjectiveStack::default()).unwrap();
        // dl = lr · J(σ(l)) b per row (the loss is −bᵀσ(l))
        let p = softmax_rows(&l0).unwrap();
        for i in 0..2 {
            let bi = b.slice(ndarray::s![i * 4..(i + 1) * 4]);
            let dot: f64 = bi.dot(&p.row(i));
            for k in 0..4 {
                let expected = l0[[i, k]] + 0.1 * p[[i, k]] * (bi[k] - dot);
                assert!((state.logits.logits[[i, k]] - expected).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn pwm_gradient_matches_finite_differences() {
        let mut rng = RngState::new(11);
        let oracle = MotifOracle::random(6, 3, 4, &mut rng).unwrap();
        for method in [DesignMethod::Pwm, DesignMethod::FastPwm] {
            let mut settings = DesignSettings::new(method);
            settings.norm.grad_mode = GradMode::FullChain;
            let stack = ObjectiveStack {
                entropy_weight: 0.3,
                ..Default::default()
            };
            let mut state = DesignState::random(6, 4, &settings, RngState::new(5));
            let (_, grads) = forward_backward(&mut state, &settings, &oracle, &stack).unwrap();
            let loss = |l: &Matrix| {
                let mut s = state.clone();
                s.logits.logits = l.clone();
                let (r, _) = forward_backward(&mut s, &settings, &oracle, &stack).unwrap();
                r.train_loss + r.penalty_total()
            };
            let fd = finite_difference(&state.logits.logits, 1e-6, loss);
            assert!(max_relative_error(&grads.logits, &fd, 1e-7) < 1e-5, "{method}");
        }
    }

    #[test]
    fn averaged_identical_samples_equal_single_sample() {
        // a saturated distribution always yields the same sample
        let oracle = MotifOracle::new(array![[1.0, 0.0, 0.0, 0.0], [0.0, 1.0, 0.0, 0.0]], 3).unwrap();
        let l = array![[60.0, 0.0, 0.0, 0.0], [0.0, 60.0, 0.0, 0.0], [0.0, 0.0, 60.0, 0.0]];
        let run = |s_avg| {
            let mut settings = DesignSettings::new(DesignMethod::FastSeqProp);
            settings.s_avg = s_avg;
            settings.norm.mode = NormMode::Layer;
            // normalization would undo the saturation without a large scale
            settings.norm.gamma_init = 100.0;
            let logits = LogitState::from_logits(l.clone(), settings.method, &settings.norm);
            let mut state = DesignState::new(logits, settings.optimizer, RngState::new(3));
            forward_backward(&mut state, &settings, &oracle, &ObjectiveStack::default()).unwrap().1
        };
        let one = run(1);
        let ten = run(10);
        assert!(max_relative_error(&one.logits, &ten.logits, 1e-300) < 1e-12);
    }

    #[test]
    fn fast_and_plain_differ_only_by_normalization() {
        let settings_fast = DesignSettings::new(DesignMethod::FastSeqProp);
        let settings_plain = DesignSettings::new(DesignMethod::SeqProp);
        let fast = DesignState::random(7, 4, &settings_fast, RngState::new(9));
        let plain = DesignState::random(7, 4, &settings_plain, RngState::new(9));
        assert_eq!(fast.logits.logits, plain.logits.logits);
        let (l_fast, _) = fast.logits.effective_logits(&settings_fast.norm).unwrap();
        let so = ScaleOffset::new(NormMode::Instance, 4, 1.0, 0.0);
        let (expected, _) = normalize(
            &plain.logits.logits,
            &so,
            NormMode::Instance,
            Denominator::Std,
            GradMode::PaperLiteral,
        )
        .unwrap();
        assert_eq!(l_fast, expected);
    }

    #[test]
    fn best_seen_is_monotone() {
        let mut rng = RngState::new(2);
        let oracle = MotifOracle::random(12, 4, 4, &mut rng).unwrap();
        let settings = DesignSettings::new(DesignMethod::SeqProp);
        let mut state = DesignState::random(12, 4, &settings, RngState::new(4));
        let mut prev = f64::NEG_INFINITY;
        for _ in 0..50 {
            design_step(&mut state, &settings, &oracle, &ObjectiveStack::default()).unwrap();
            let best = state.best.as_ref().unwrap().0;
            assert!(best >= prev);
            prev = best;
        }
        assert_eq!(state.oracle_calls, 50);
        assert_eq!(state.iteration, 50);
    }

    #[test]
    fn survival_requires_uncertainty_head() {
        let oracle = MotifOracle::new(array![[1.0, 0.0, 0.0, 0.0], [0.0, 1.0, 0.0, 0.0]], 3).unwrap();
        let stack = ObjectiveStack {
            fitness: Fitness::Survival(SurvivalConfig::new(1.0, 0.95).unwrap()),
            ..Default::default()
        };
        let settings = DesignSettings::new(DesignMethod::Pwm);
        let mut state = DesignState::random(3, 4, &settings, RngState::new(0));
        assert!(matches!(
            design_step(&mut state, &settings, &oracle, &stack),
            Err(Error::ConfigError { .. })
        ));
    }
}
