//! Entropy and Markov-likelihood regularizers on the motif benchmark.
//!
//! The Markov prior is fitted on a corpus sampled from a seeded random
//! chain; its `p_ref` is the corpus mean log10-likelihood.
//!
//! cargo run --release --example regularized_design

use seqgrad::engine::{
    median, run_design, DesignMethod, DesignSettings, MarkovPenalty, ObjectiveStack, OptimizerConfig, RunSettings,
};
use seqgrad::fasta::Record;
use seqgrad::objectives::{mean_conservation_bits, MarginPenaltyConfig, MarkovModel};
use seqgrad::oracles::MotifOracle;
use seqgrad::{Alphabet, RngState};

fn main() -> seqgrad::Result<()> {
    let oracle = MotifOracle::random(100, 8, 4, &mut RngState::new(1))?;
    let run = RunSettings {
        restarts: 10,
        iterations: 1000,
        eval_every: 100,
        seed: 7,
        ..Default::default()
    };

    println!("entropy penalty, PWM");
    for weight in [0.0, 0.1, 1.0] {
        let mut settings = DesignSettings::new(DesignMethod::Pwm);
        settings.optimizer = OptimizerConfig::adam(0.1);
        let stack = ObjectiveStack {
            entropy_weight: weight,
            ..Default::default()
        };
        let res = run_design(&oracle, &settings, &stack, &run, None)?;
        let cons = res.logos.iter().map(|p| mean_conservation_bits(p)).sum::<f64>() / res.logos.len() as f64;
        println!(
            "  weight {weight:<4} conservation {cons:.3} bits, test loss {:.3}",
            res.final_median_test_loss().unwrap_or(f64::NAN)
        );
    }

    let alphabet = Alphabet::dna();
    let mut rng = RngState::new(2024);
    let chain = MarkovModel::random(2, alphabet.clone(), 1.0, &mut rng)?;
    let corpus: Vec<Record> = (0..200)
        .map(|i| Record {
            header: format!("natural_{i}"),
            sequence: chain.sample_indices(100, &mut rng).iter().map(|&j| alphabet.symbol(j)).collect(),
        })
        .collect();
    let model = MarkovModel::fit(&corpus, 2, alphabet)?;
    println!("\nMarkov margin, Fast SeqProp (p_ref = {:.2})", model.p_ref_log10());
    for lambda in [0.0, 1.0] {
        let mut settings = DesignSettings::new(DesignMethod::FastSeqProp);
        settings.optimizer = OptimizerConfig::adam(0.1);
        let stack = ObjectiveStack {
            markov: Some(MarkovPenalty {
                model: model.clone(),
                margin: MarginPenaltyConfig { lambda, rho: 0.0 },
            }),
            ..Default::default()
        };
        let res = run_design(&oracle, &settings, &stack, &run, None)?;
        let mut ll: Vec<f64> = res.finals.iter().map(|f| model.log10_likelihood_indices(&f.indices)).collect();
        println!(
            "  lambda {lambda}: median design log10-likelihood {:.2}, test loss {:.3}",
            median(&mut ll).unwrap_or(f64::NAN),
            res.final_median_test_loss().unwrap_or(f64::NAN)
        );
    }
    Ok(())
}
