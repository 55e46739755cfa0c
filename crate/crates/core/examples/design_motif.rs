//! Compare the four gradient methods on a seeded motif oracle.
//!
//! cargo run --release --example design_motif

use seqgrad::engine::{run_design, DesignMethod, DesignSettings, ObjectiveStack, OptimizerConfig, RunSettings};
use seqgrad::oracles::MotifOracle;
use seqgrad::{decode, Alphabet, OneHotSeq, RngState};

fn main() -> seqgrad::Result<()> {
    let oracle = MotifOracle::random(100, 8, 4, &mut RngState::new(1))?;
    let run = RunSettings {
        restarts: 10,
        iterations: 500,
        eval_every: 100,
        seed: 7,
        ..Default::default()
    };
    println!("{:<14} {:>8} {:>8} {:>8}", "method", "it 100", "it 500", "best");
    for method in [
        DesignMethod::Pwm,
        DesignMethod::SeqProp,
        DesignMethod::FastPwm,
        DesignMethod::FastSeqProp,
    ] {
        let mut settings = DesignSettings::new(method);
        settings.optimizer = OptimizerConfig::adam(0.1);
        let res = run_design(&oracle, &settings, &ObjectiveStack::default(), &run, None)?;
        let best = res.finals.iter().max_by(|a, b| a.score.total_cmp(&b.score)).expect("10 restarts");
        println!(
            "{:<14} {:>8.3} {:>8.3} {:>8.3}",
            method.name(),
            res.median_test_loss_at(100).unwrap_or(f64::NAN),
            res.final_median_test_loss().unwrap_or(f64::NAN),
            best.score
        );
        if method == DesignMethod::FastSeqProp {
            let seq = decode(&OneHotSeq::from_indices(&best.indices, 4), &Alphabet::dna())?;
            println!("\nbest fast_seqprop design:\n{seq}");
        }
    }
    Ok(())
}
