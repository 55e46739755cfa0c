//! Discrete baselines: simulated annealing and greedy evolution.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::oracles::Oracle;
use crate::rng::RngState;

use super::run::{FinalDesign, TrajectoryRecord};

/// `true` with probability `min(1, exp(−(current − candidate)/T))`.
/// Improvements are accepted without drawing.
pub fn metropolis_accept(current_score: f64, candidate_score: f64, temperature: f64, rng: &mut RngState) -> bool {
    if candidate_score >= current_score {
        return true;
    }
    rng.uniform() < (-(current_score - candidate_score) / temperature).exp()
}

/// Number of substitutions proposed per step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SubstitutionPolicy {
    Fixed(usize),
    /// One substitution, or two with probability 0.5.
    OneOrTwo,
}

impl SubstitutionPolicy {
    fn draw(&self, rng: &mut RngState) -> usize {
        match *self {
            Self::Fixed(s) => s,
            Self::OneOrTwo => {
                if rng.bernoulli(0.5) {
                    2
                } else {
                    1
                }
            }
        }
    }
}

/// `s` substitutions at distinct uniform positions, each to a different
/// symbol chosen uniformly.
pub fn mutate(seq: &[usize], substitutions: usize, m: usize, rng: &mut RngState) -> Vec<usize> {
    let mut out = seq.to_vec();
    let s = substitutions.min(seq.len());
    let mut positions: Vec<usize> = (0..seq.len()).collect();
    for t in 0..s {
        let j = t + rng.index(seq.len() - t);
        positions.swap(t, j);
        let pos = positions[t];
        let r = rng.index(m - 1);
        out[pos] = if r >= seq[pos] { r + 1 } else { r };
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnnealState {
    pub current: Vec<usize>,
    pub score: f64,
    pub temperature: f64,
    pub initial_temperature: f64,
    pub decay: f64,
    pub policy: SubstitutionPolicy,
}

impl AnnealState {
    pub fn new<O: Oracle + ?Sized>(oracle: &O, start: Vec<usize>, cfg: &AnnealConfig) -> Result<Self> {
        cfg.validate()?;
        let score = oracle.score_indices(&start)?;
        Ok(Self {
            current: start,
            score,
            temperature: cfg.initial_temperature,
            initial_temperature: cfg.initial_temperature,
            decay: cfg.decay,
            policy: SubstitutionPolicy::Fixed(cfg.substitutions),
        })
    }
}

/// Proposes, scores and maybe accepts one mutation, then cools. Returns
/// whether the proposal was accepted.
pub fn anneal_step<O: Oracle + ?Sized>(state: &mut AnnealState, oracle: &O, rng: &mut RngState) -> Result<bool> {
    let m = oracle.shape().1;
    let s = state.policy.draw(rng);
    let candidate = mutate(&state.current, s, m, rng);
    let score = oracle.score_indices(&candidate)?;
    let accepted = metropolis_accept(state.score, score, state.temperature, rng);
    if accepted {
        state.current = candidate;
        state.score = score;
    }
    state.temperature *= state.decay;
    Ok(accepted)
}

/// Greedy step: accept only strict improvements.
pub fn evolution_step<O: Oracle + ?Sized>(
    current: &mut Vec<usize>,
    score: &mut f64,
    oracle: &O,
    rng: &mut RngState,
) -> Result<bool> {
    let m = oracle.shape().1;
    let s = SubstitutionPolicy::OneOrTwo.draw(rng);
    let candidate = mutate(current, s, m, rng);
    let cand_score = oracle.score_indices(&candidate)?;
    if cand_score > *score {
        *current = candidate;
        *score = cand_score;
        Ok(true)
    } else {
        Ok(false)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineKind {
    Anneal,
    Evolution,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnnealConfig {
    #[serde(default = "default_kind")]
    pub kind: BaselineKind,
    #[serde(default = "default_t0")]
    pub initial_temperature: f64,
    #[serde(default = "default_decay")]
    pub decay: f64,
    #[serde(default = "default_subs")]
    pub substitutions: usize,
}

fn default_kind() -> BaselineKind {
    BaselineKind::Anneal
}
fn default_t0() -> f64 {
    0.1
}
fn default_decay() -> f64 {
    0.9995
}
fn default_subs() -> usize {
    1
}

impl Default for AnnealConfig {
    fn default() -> Self {
        Self {
            kind: default_kind(),
            initial_temperature: default_t0(),
            decay: default_decay(),
            substitutions: default_subs(),
        }
    }
}

impl AnnealConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, reason: &str| {
            Err(Error::ValidationError {
                field: format!("baseline.{field}"),
                reason: reason.into(),
            })
        };
        if !(self.initial_temperature > 0.0 && self.initial_temperature.is_finite()) {
            return bad("initial_temperature", "must be > 0");
        }
        if !(self.decay > 0.0 && self.decay <= 1.0) {
            return bad("decay", "must lie in (0, 1]");
        }
        if self.substitutions == 0 {
            return bad("substitutions", "must be >= 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct BaselineResults {
    pub trajectories: Vec<TrajectoryRecord>,
    pub finals: Vec<FinalDesign>,
}

/// Runs `restarts` independent baseline chains from uniform random
/// sequences. Records hold `train_loss = −current score` and
/// `test_loss = −best score so far`.
pub fn run_baseline<O: Oracle + ?Sized>(
    oracle: &O,
    cfg: &AnnealConfig,
    restarts: usize,
    steps: usize,
    eval_every: usize,
    seed: u64,
) -> Result<BaselineResults> {
    cfg.validate()?;
    if restarts == 0 || eval_every == 0 {
        return Err(Error::ConfigError {
            field: if restarts == 0 { "restarts" } else { "eval_every" }.into(),
            reason: "must be >= 1".into(),
        });
    }
    let master = RngState::new(seed);
    let (n, m) = oracle.shape();
    let chains: Vec<(Vec<TrajectoryRecord>, FinalDesign)> = (0..restarts)
        .into_par_iter()
        .map(|k| {
            let mut rng = master.substream(k as u64);
            let start: Vec<usize> = (0..n).map(|_| rng.index(m)).collect();
            let mut state = AnnealState::new(oracle, start, cfg)?;
            let mut calls = 1u64;
            let mut best = (state.score, state.current.clone());
            let mut records = Vec::new();
            for t in 0..=steps {
                if t > 0 {
                    match cfg.kind {
                        BaselineKind::Anneal => {
                            anneal_step(&mut state, oracle, &mut rng)?;
                        }
                        BaselineKind::Evolution => {
                            evolution_step(&mut state.current, &mut state.score, oracle, &mut rng)?;
                        }
                    }
                    calls += 1;
                    if state.score > best.0 {
                        best = (state.score, state.current.clone());
                    }
                }
                if t % eval_every == 0 || t == steps {
                    records.push(TrajectoryRecord {
                        iteration: t,
                        restart: k,
                        train_loss: -state.score,
                        test_loss: -best.0,
                        entropy_bits: 0.0,
                        penalties: Vec::new(),
                        penalty_total: 0.0,
                        oracle_calls: calls,
                        elapsed_ms: 0,
                        metrics: Vec::new(),
                    });
                }
            }
            Ok((
                records,
                FinalDesign {
                    restart: k,
                    indices: best.1,
                    score: best.0,
                },
            ))
        })
        .collect::<Result<_>>()?;
    let mut out = BaselineResults {
        trajectories: Vec::new(),
        finals: Vec::new(),
    };
    for (records, fin) in chains {
        out.trajectories.extend(records);
        out.finals.push(fin);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracles::{brute_force_optimum, MotifOracle, QuadraticOracle};
    use crate::seq::Alphabet;
    use ndarray::array;

    #[test]
    fn metropolis_rates() {
        let mut rng = RngState::new(17);
        assert!((0..1000).all(|_| metropolis_accept(1.0, 1.5, 0.1, &mut rng)));
        let trials = 100_000;
        let hits = (0..trials).filter(|_| metropolis_accept(1.0, 0.8, 0.1, &mut rng)).count();
        let rate = hits as f64 / trials as f64;
        assert!((rate - (-2f64).exp()).abs() < 0.005, "{rate}");
        let hot = (0..1000).filter(|_| metropolis_accept(1.0, 0.0, 1e12, &mut rng)).count();
        assert_eq!(hot, 1000);
    }

    #[test]
    fn mutation_changes_exactly_s_positions() {
        let mut rng = RngState::new(3);
        let seq: Vec<usize> = (0..20).map(|i| i % 4).collect();
        for s in 1..=4 {
            for _ in 0..100 {
                let out = mutate(&seq, s, 4, &mut rng);
                assert_eq!(out.iter().zip(&seq).filter(|(a, b)| a != b).count(), s);
                assert!(out.iter().all(|&v| v < 4));
            }
        }
    }

    #[test]
    fn hot_chain_is_a_random_walk() {
        let mut rng = RngState::new(5);
        let oracle = MotifOracle::random(10, 3, 4, &mut rng).unwrap();
        let cfg = AnnealConfig {
            initial_temperature: 1e12,
            decay: 1.0,
            ..Default::default()
        };
        let mut state = AnnealState::new(&oracle, vec![0; 10], &cfg).unwrap();
        let accepted = (0..2000).filter(|_| anneal_step(&mut state, &oracle, &mut rng).unwrap()).count();
        assert_eq!(accepted, 2000);
    }

    #[test]
    fn evolution_never_gets_worse() {
        let mut rng = RngState::new(8);
        let oracle = MotifOracle::random(15, 4, 4, &mut rng).unwrap();
        let mut seq = vec![0; 15];
        let mut score = oracle.score_indices(&seq).unwrap();
        for _ in 0..500 {
            let before = (seq.clone(), score);
            let accepted = evolution_step(&mut seq, &mut score, &oracle, &mut rng).unwrap();
            assert!(score >= before.1);
            if !accepted {
                assert_eq!((seq.clone(), score), before);
            }
        }
    }

    #[test]
    fn evolution_finds_a_one_substitution_optimum() {
        // optimum "AC" embedded once; start one substitution away
        let w = array![[5.0, 0.0, 0.0, 0.0], [0.0, 5.0, 0.0, 0.0]];
        let oracle = MotifOracle::new(w, 6).unwrap();
        for seed in 0..20 {
            let mut rng = RngState::new(seed);
            let mut seq = vec![0, 3, 2, 2, 3, 2];
            let mut score = oracle.score_indices(&seq).unwrap();
            let target = oracle.score_indices(&[0, 1, 2, 2, 3, 2]).unwrap();
            let hit = (0..1000).position(|_| {
                evolution_step(&mut seq, &mut score, &oracle, &mut rng).unwrap();
                score >= target
            });
            assert!(hit.is_some(), "seed {seed}");
        }
    }

    #[test]
    fn annealing_approaches_the_enumerated_optimum() {
        let mut rng = RngState::new(21);
        let oracle = QuadraticOracle::random(8, 4, 1.0, &mut rng).unwrap();
        let opt = brute_force_optimum(&oracle, &Alphabet::dna(), 8).unwrap();
        let res = run_baseline(&oracle, &AnnealConfig::default(), 1, 20_000, 1000, 4).unwrap();
        let best = res.finals[0].score;
        assert!(best >= opt.best_score - 0.05 * opt.best_score.abs(), "{best} vs {}", opt.best_score);
    }
}
