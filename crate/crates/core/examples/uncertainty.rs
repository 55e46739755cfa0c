//! Designing against an oracle with an uncertainty head: maximize the
//! probability of exceeding a training-set quantile, and cap a hidden
//! layer's activity.
//!
//! cargo run --release --example uncertainty

use seqgrad::engine::{
    run_design, DesignMethod, DesignSettings, Fitness, ObjectiveStack, OptimizerConfig, RunSettings,
};
use seqgrad::objectives::{ActivityConfig, ActivityTerm, SurvivalConfig};
use seqgrad::{MlpOracle, OneHotSeq, Oracle, RngState};

fn main() -> seqgrad::Result<()> {
    let (n, m) = (30, 4);
    let oracle = MlpOracle::random(n, m, 16, 16, true, &mut RngState::new(5))?;

    // stand-in for training data: scores of random sequences
    let mut rng = RngState::new(6);
    let scores: Vec<f64> = (0..500)
        .map(|_| {
            let seq: Vec<usize> = (0..n).map(|_| rng.index(m)).collect();
            oracle.score_indices(&seq)
        })
        .collect::<seqgrad::Result<_>>()?;
    let survival = SurvivalConfig::from_training_scores(&scores, 0.95)?;
    println!("q95 of random sequences: {:.3}", survival.q_threshold);

    let mut settings = DesignSettings::new(DesignMethod::FastSeqProp);
    settings.optimizer = OptimizerConfig::adam(0.05);
    let run = RunSettings {
        restarts: 5,
        iterations: 500,
        eval_every: 100,
        seed: 1,
        ..Default::default()
    };
    let stacks = [
        ("score", ObjectiveStack::default()),
        (
            "survival",
            ObjectiveStack {
                fitness: Fitness::Survival(survival),
                ..Default::default()
            },
        ),
        (
            "survival + activity cap",
            ObjectiveStack {
                fitness: Fitness::Survival(survival),
                activity: ActivityConfig {
                    terms: vec![ActivityTerm {
                        layer: "hidden1".into(),
                        cap: 5.0,
                        weight: 0.5,
                    }],
                },
                ..Default::default()
            },
        ),
    ];
    for (name, stack) in stacks {
        let res = run_design(&oracle, &settings, &stack, &run, None)?;
        for f in res.finals.iter().take(2) {
            let eval = oracle.evaluate(&OneHotSeq::from_indices(&f.indices, m))?;
            let ms = eval.mean_std.as_ref().expect("uncertainty head");
            let act = eval.activation("hidden1").map_or(f64::NAN, |a| a.value);
            println!(
                "{name:<24} restart {}: mean {:.3} std {:.3} hidden1 activity {act:.2}",
                f.restart, ms.mean, ms.std
            );
        }
    }
    Ok(())
}
