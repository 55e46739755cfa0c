//! Simulated annealing and greedy evolution on the motif oracle, next to
//! Fast SeqProp with the same oracle-call budget.
//!
//! cargo run --release --example anneal

use seqgrad::engine::{
    median, run_baseline, run_design, AnnealConfig, BaselineKind, DesignMethod, DesignSettings, ObjectiveStack,
    OptimizerConfig, RunSettings,
};
use seqgrad::oracles::MotifOracle;
use seqgrad::RngState;

fn main() -> seqgrad::Result<()> {
    let oracle = MotifOracle::random(100, 8, 4, &mut RngState::new(1))?;
    let steps = 5000;
    for kind in [BaselineKind::Anneal, BaselineKind::Evolution] {
        let cfg = AnnealConfig {
            kind,
            ..Default::default()
        };
        let res = run_baseline(&oracle, &cfg, 10, steps, 500, 7)?;
        let mut best: Vec<f64> = res.finals.iter().map(|f| f.score).collect();
        println!("{kind:?}: median best score after {steps} steps {:.3}", median(&mut best).unwrap_or(f64::NAN));
    }

    // one sample and one argmax decode per iteration plus test samples
    let mut settings = DesignSettings::new(DesignMethod::FastSeqProp);
    settings.optimizer = OptimizerConfig::adam(0.1);
    let run = RunSettings {
        restarts: 10,
        iterations: 1000,
        eval_every: 100,
        seed: 7,
        ..Default::default()
    };
    let res = run_design(&oracle, &settings, &ObjectiveStack::default(), &run, None)?;
    let mut best: Vec<f64> = res.finals.iter().map(|f| f.score).collect();
    let calls = res.trajectories.last().map_or(0, |r| r.oracle_calls);
    println!(
        "FastSeqProp: median best score {:.3} with {calls} oracle calls per restart",
        median(&mut best).unwrap_or(f64::NAN)
    );
    Ok(())
}
