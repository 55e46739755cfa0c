use std::time::Instant;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::objectives::sampled_scores;
use crate::oracles::Oracle;
use crate::rng::RngState;
use crate::seq::{OneHotSeq, ProbMatrix};

use super::design::{apply_grads, forward_backward, DesignSettings, DesignState, ObjectiveStack};

/// Extra per-checkpoint metrics computed from the argmax-decoded sequence.
pub type MetricFn<'a> = dyn Fn(&[usize]) -> Result<Vec<(String, f64)>> + Sync + 'a;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunSettings {
    /// Independent restarts `K`.
    pub restarts: usize,
    pub iterations: usize,
    /// Samples `S` per restart for the test loss.
    pub test_samples: usize,
    pub eval_every: usize,
    pub seed: u64,
    /// Fill `elapsed_ms`; off by default so reruns are byte-identical.
    pub record_time: bool,
}

impl Default for RunSettings {
    fn default() -> Self {
        Self {
            restarts: crate::objectives::DEFAULT_K,
            iterations: 1000,
            test_samples: crate::objectives::DEFAULT_S,
            eval_every: 10,
            seed: 0,
            record_time: false,
        }
    }
}

impl RunSettings {
    fn validate(&self) -> Result<()> {
        for (field, v) in [
            ("restarts", self.restarts),
            ("test_samples", self.test_samples),
            ("eval_every", self.eval_every),
        ] {
            if v == 0 {
                return Err(Error::ConfigError {
                    field: field.into(),
                    reason: "must be >= 1".into(),
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub iteration: usize,
    pub restart: usize,
    pub train_loss: f64,
    /// `−(1/S) Σ_s P(δ^(s))` over this restart's samples.
    pub test_loss: f64,
    pub entropy_bits: f64,
    pub penalties: Vec<(&'static str, f64)>,
    pub penalty_total: f64,
    pub oracle_calls: u64,
    pub elapsed_ms: u64,
    pub metrics: Vec<(String, f64)>,
}

/// Best argmax-decoded sequence of one restart, ranked by the regularized
/// input loss (the plain oracle score when no regularizer is set). `score`
/// is the raw oracle score.
#[derive(Debug, Clone, PartialEq)]
pub struct FinalDesign {
    pub restart: usize,
    pub indices: Vec<usize>,
    pub score: f64,
}

#[derive(Debug, Clone)]
pub struct DesignResults {
    /// Ordered by restart, then iteration.
    pub trajectories: Vec<TrajectoryRecord>,
    pub finals: Vec<FinalDesign>,
    /// Final `σ(l)` per restart.
    pub logos: Vec<ProbMatrix>,
    /// Best score of any discrete sequence seen, per restart.
    pub best_seen: Vec<(f64, Vec<usize>)>,
}

impl DesignResults {
    pub fn records_of(&self, restart: usize) -> impl Iterator<Item = &TrajectoryRecord> {
        self.trajectories.iter().filter(move |r| r.restart == restart)
    }

    /// Median test loss across restarts at `iteration` (must be a recorded
    /// checkpoint).
    pub fn median_test_loss_at(&self, iteration: usize) -> Option<f64> {
        let mut v: Vec<f64> = self
            .trajectories
            .iter()
            .filter(|r| r.iteration == iteration)
            .map(|r| r.test_loss)
            .collect();
        median(&mut v)
    }

    pub fn final_median_test_loss(&self) -> Option<f64> {
        let last = self.trajectories.iter().map(|r| r.iteration).max()?;
        self.median_test_loss_at(last)
    }
}

pub fn median(v: &mut [f64]) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) })
}

struct RestartOutcome {
    records: Vec<TrajectoryRecord>,
    final_design: FinalDesign,
    logo: ProbMatrix,
    best_seen: (f64, Vec<usize>),
}

/// Runs `K` independent restarts in parallel on the current rayon pool.
///
/// Restart `k` draws from `RngState::new(seed).substream(k)`; within it,
/// stream 0 initializes logits and drives training samples and stream 1
/// draws test samples, so the evaluation cadence never perturbs training.
pub fn run_design<O: Oracle + ?Sized>(
    oracle: &O,
    settings: &DesignSettings,
    stack: &ObjectiveStack,
    run: &RunSettings,
    metrics: Option<&MetricFn<'_>>,
) -> Result<DesignResults> {
    run.validate()?;
    let master = RngState::new(run.seed);
    let outcomes: Vec<RestartOutcome> = (0..run.restarts)
        .into_par_iter()
        .map(|k| run_restart(oracle, settings, stack, run, metrics, k, master.substream(k as u64)))
        .collect::<Result<_>>()?;
    let mut results = DesignResults {
        trajectories: Vec::new(),
        finals: Vec::new(),
        logos: Vec::new(),
        best_seen: Vec::new(),
    };
    for o in outcomes {
        results.trajectories.extend(o.records);
        results.finals.push(o.final_design);
        results.logos.push(o.logo);
        results.best_seen.push(o.best_seen);
    }
    Ok(results)
}

fn run_restart<O: Oracle + ?Sized>(
    oracle: &O,
    settings: &DesignSettings,
    stack: &ObjectiveStack,
    run: &RunSettings,
    metrics: Option<&MetricFn<'_>>,
    restart: usize,
    rng: RngState,
) -> Result<RestartOutcome> {
    let start = Instant::now();
    let (n, m) = oracle.shape();
    let mut test_rng = rng.substream(1);
    let mut state = DesignState::random(n, m, settings, rng.substream(0));
    let mut records = Vec::new();
    // (regularized loss of the decode, design)
    let mut final_design: Option<(f64, FinalDesign)> = None;
    for t in 0..=run.iterations {
        let checkpoint = t % run.eval_every == 0 || t == run.iterations;
        let (report, grads) = forward_backward(&mut state, settings, oracle, stack)?;
        if checkpoint {
            let p = state.logits.probs(&settings.norm)?;
            let samples = sampled_scores(oracle, &p, run.test_samples, &mut test_rng)?;
            state.oracle_calls += samples.len() as u64;
            for (score, idx) in &samples {
                state.observe(*score, idx);
            }
            let test_loss = -samples.iter().map(|(s, _)| s).sum::<f64>() / samples.len() as f64;

            let decoded = state.logits.argmax_indices(&settings.norm)?;
            let eval = stack.input_loss(oracle, &OneHotSeq::from_indices(&decoded, m))?;
            let objective = eval.fitness + eval.markov + eval.activity;
            state.oracle_calls += 1;
            state.observe(eval.score, &decoded);
            if final_design.as_ref().is_none_or(|(best, _)| objective < *best) {
                final_design = Some((
                    objective,
                    FinalDesign {
                        restart,
                        indices: decoded.clone(),
                        score: eval.score,
                    },
                ));
            }
            let extra = match metrics {
                Some(f) => f(&decoded)?,
                None => Vec::new(),
            };
            records.push(TrajectoryRecord {
                iteration: t,
                restart,
                train_loss: report.train_loss,
                test_loss,
                entropy_bits: report.entropy_bits,
                penalty_total: report.penalty_total(),
                penalties: report.penalties,
                oracle_calls: state.oracle_calls,
                elapsed_ms: if run.record_time { start.elapsed().as_millis() as u64 } else { 0 },
                metrics: extra,
            });
        }
        if t < run.iterations {
            apply_grads(&mut state, &grads)?;
        }
    }
    let logo = state.logits.probs(&settings.norm)?;
    Ok(RestartOutcome {
        records,
        final_design: final_design.expect("at least one checkpoint").1,
        logo,
        best_seen: state.best.expect("at least one sequence scored"),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::DesignMethod;
    use crate::oracles::MotifOracle;

    fn setup() -> (MotifOracle, DesignSettings) {
        let mut rng = RngState::new(1);
        (
            MotifOracle::random(10, 3, 4, &mut rng).unwrap(),
            DesignSettings::new(DesignMethod::FastSeqProp),
        )
    }

    #[test]
    fn zero_iterations_decode_the_initialization() {
        let (oracle, settings) = setup();
        let run = RunSettings {
            restarts: 1,
            iterations: 0,
            ..Default::default()
        };
        let res = run_design(&oracle, &settings, &ObjectiveStack::default(), &run, None).unwrap();
        assert_eq!(res.trajectories.len(), 1);
        let init = DesignState::random(10, 4, &settings, RngState::new(0).substream(0).substream(0));
        let decoded = init.logits.argmax_indices(&settings.norm).unwrap();
        assert_eq!(res.finals[0].indices, decoded);
        assert_eq!(res.finals[0].score, oracle.score_indices(&decoded).unwrap());
    }

    #[test]
    fn deterministic_and_ordered() {
        let (oracle, settings) = setup();
        let run = RunSettings {
            restarts: 3,
            iterations: 25,
            eval_every: 10,
            ..Default::default()
        };
        let a = run_design(&oracle, &settings, &ObjectiveStack::default(), &run, None).unwrap();
        let b = run_design(&oracle, &settings, &ObjectiveStack::default(), &run, None).unwrap();
        assert_eq!(a.trajectories, b.trajectories);
        assert_eq!(a.finals, b.finals);
        let keys: Vec<(usize, usize)> = a.trajectories.iter().map(|r| (r.restart, r.iteration)).collect();
        let mut sorted = keys.clone();
        sorted.sort();
        assert_eq!(keys, sorted);
        assert_eq!(a.records_of(0).map(|r| r.iteration).collect::<Vec<_>>(), vec![0, 10, 20, 25]);
        for k in 0..3 {
            let calls: Vec<u64> = a.records_of(k).map(|r| r.oracle_calls).collect();
            assert!(calls.windows(2).all(|w| w[1] > w[0]));
        }
    }
}
