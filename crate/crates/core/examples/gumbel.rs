//! Gumbel-softmax sampling: straight-through hard samples at τ = 0.1, and
//! a design run with the Gumbel variant.
//!
//! cargo run --release --example gumbel

use seqgrad::engine::{run_design, DesignMethod, DesignSettings, ObjectiveStack, OptimizerConfig, RunSettings};
use seqgrad::oracles::MotifOracle;
use seqgrad::sampler::{sample_gumbel, softmax_rows, GumbelConfig};
use seqgrad::{Matrix, RngState};

fn main() -> seqgrad::Result<()> {
    let logits = Matrix::from_shape_vec((1, 4), vec![1.0, 0.5, 0.0, -1.0]).expect("1x4");
    let p = softmax_rows(&logits)?;
    let cfg = GumbelConfig::default();
    let mut rng = RngState::new(11);
    let draws = 100_000;
    let mut counts = [0usize; 4];
    for _ in 0..draws {
        let s = sample_gumbel(&logits, &cfg, &mut rng)?;
        counts[s.hard.indices()[0]] += 1;
    }
    println!("symbol  softmax  gumbel-hard frequency");
    for j in 0..4 {
        println!("{j:>6}  {:.4}   {:.4}", p[[0, j]], counts[j] as f64 / draws as f64);
    }

    let oracle = MotifOracle::random(100, 8, 4, &mut RngState::new(1))?;
    let run = RunSettings {
        restarts: 5,
        iterations: 500,
        eval_every: 100,
        seed: 7,
        ..Default::default()
    };
    for method in [DesignMethod::FastSeqProp, DesignMethod::GumbelFast] {
        let mut settings = DesignSettings::new(method);
        settings.optimizer = OptimizerConfig::adam(0.1);
        let res = run_design(&oracle, &settings, &ObjectiveStack::default(), &run, None)?;
        println!("{method}: final median test loss {:.3}", res.final_median_test_loss().unwrap_or(f64::NAN));
    }
    Ok(())
}
