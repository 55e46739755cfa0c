//! Straight-through estimators and logit normalization, step by step.
//!
//! cargo run --release --example st_estimators

use seqgrad::engine::{run_design, DesignMethod, DesignSettings, ObjectiveStack, OptimizerConfig, RunSettings};
use seqgrad::normalizer::{normalize, Denominator, GradMode, NormMode, ScaleOffset};
use seqgrad::oracles::MotifOracle;
use seqgrad::sampler::{backprop_st, softmax_rows, StEstimator};
use seqgrad::testing::random_matrix;
use seqgrad::RngState;

fn main() -> seqgrad::Result<()> {
    let mut rng = RngState::new(2);
    let logits = random_matrix(&mut rng, 50, 4, -3.0, 3.0);
    let so = ScaleOffset::new(NormMode::Instance, 4, 1.0, 0.0);
    let (normed, _) = normalize(&logits, &so, NormMode::Instance, Denominator::Std, GradMode::PaperLiteral)?;
    println!("instance-normalized channel means {:.2e}", normed.mean_axis(ndarray::Axis(0)).expect("50 rows"));
    println!("instance-normalized channel variances {:.6}", normed.var_axis(ndarray::Axis(0), 0.0));

    let p = softmax_rows(&logits.slice(ndarray::s![..2, ..]).to_owned())?;
    let upstream = random_matrix(&mut rng, 2, 4, -1.0, 1.0);
    println!("\nupstream gradient\n{upstream:.3}");
    println!("softmax ST\n{:.3}", backprop_st(&upstream, &p, StEstimator::SoftmaxSt)?);
    println!("identity ST\n{:.3}", backprop_st(&upstream, &p, StEstimator::IdentitySt)?);

    let oracle = MotifOracle::random(100, 8, 4, &mut RngState::new(1))?;
    let run = RunSettings {
        restarts: 10,
        iterations: 1000,
        eval_every: 100,
        seed: 7,
        ..Default::default()
    };
    for estimator in [StEstimator::SoftmaxSt, StEstimator::IdentitySt] {
        let mut settings = DesignSettings::new(DesignMethod::FastSeqProp);
        settings.optimizer = OptimizerConfig::adam(0.1);
        settings.estimator = estimator;
        let res = run_design(&oracle, &settings, &ObjectiveStack::default(), &run, None)?;
        println!("{estimator:?}: final median test loss {:.3}", res.final_median_test_loss().unwrap_or(f64::NAN));
    }
    Ok(())
}
