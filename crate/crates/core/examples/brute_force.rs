//! Enumerate a small quadratic oracle and check that Fast SeqProp finds the
//! global optimum.
//!
//! cargo run --release --example brute_force

use seqgrad::engine::{run_design, DesignMethod, DesignSettings, ObjectiveStack, OptimizerConfig, RunSettings};
use seqgrad::oracles::{brute_force_optimum, QuadraticOracle};
use seqgrad::{decode, Alphabet, OneHotSeq, RngState};

fn main() -> seqgrad::Result<()> {
    let alphabet = Alphabet::dna();
    let oracle = QuadraticOracle::random(8, 4, 1.0, &mut RngState::new(3))?;
    let exact = brute_force_optimum(&oracle, &alphabet, 8)?;
    println!(
        "enumerated {} sequences: optimum {} scores {:.4}",
        exact.evaluated, exact.best_seq, exact.best_score
    );

    let mut settings = DesignSettings::new(DesignMethod::FastSeqProp);
    settings.optimizer = OptimizerConfig::adam(0.01);
    let run = RunSettings {
        restarts: 10,
        iterations: 2000,
        eval_every: 100,
        seed: 3,
        ..Default::default()
    };
    let res = run_design(&oracle, &settings, &ObjectiveStack::default(), &run, None)?;
    for f in &res.finals {
        let seq = decode(&OneHotSeq::from_indices(&f.indices, 4), &alphabet)?;
        println!(
            "restart {}: {seq} {:.4} ({:.1}% of optimum)",
            f.restart,
            f.score,
            100.0 * f.score / exact.best_score
        );
    }
    Ok(())
}
