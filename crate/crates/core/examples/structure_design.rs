//! Recover a planted protein sequence from its predicted structure.
//!
//! A seeded toy predictor maps a sequence to distance and angle
//! distributions; the target is the prediction for a random sequence, so
//! the optimum has KL 0. The target is also written in the binary format
//! read by `seqgrad structure`.
//!
//! cargo run --release --example structure_design [target.strt]

use seqgrad::config::default_structure_scale;
use seqgrad::engine::{DesignMethod, DesignSettings, ObjectiveStack, OptimizerConfig, RunSettings};
use seqgrad::normalizer::NormMode;
use seqgrad::structure::{design_to_structure, planted_target, write_structure, ToyStructurePredictor};
use seqgrad::{Alphabet, RngState};

fn main() -> seqgrad::Result<()> {
    let alphabet = Alphabet::protein();
    let predictor = ToyStructurePredictor::random_default(12, alphabet.len(), default_structure_scale(), &mut RngState::new(100));
    let (planted, target) = planted_target(&predictor, &mut RngState::new(101))?;
    if let Some(path) = std::env::args().nth(1) {
        write_structure(&path, &target)?;
        println!("wrote target to {path}");
    }
    let planted: String = planted.iter().map(|&i| alphabet.symbol(i)).collect();
    println!("planted sequence {planted}");

    let run = RunSettings {
        restarts: 1,
        iterations: 1000,
        eval_every: 100,
        seed: 0,
        ..Default::default()
    };
    for method in [DesignMethod::SeqProp, DesignMethod::FastSeqProp] {
        let mut settings = DesignSettings::new(method);
        settings.optimizer = OptimizerConfig::adam(0.01);
        settings.norm.mode = NormMode::Layer;
        let res = design_to_structure(&predictor, &target, &settings, &ObjectiveStack::default(), &run)?;
        println!("{method}");
        for r in &res.trajectories {
            let kl = r.metrics.iter().find(|(n, _)| n == "kl").map_or(f64::NAN, |m| m.1);
            println!("  iteration {:>4}: test KL {:.4}, argmax KL {kl:.4}", r.iteration, r.test_loss);
        }
        let best: String = res.finals[0].indices.iter().map(|&i| alphabet.symbol(i)).collect();
        println!("  design {best}");
    }
    Ok(())
}
