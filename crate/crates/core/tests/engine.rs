use proptest::prelude::*;
use seqgrad::engine::{
    design_step, run_design, DesignMethod, DesignSettings, DesignState, ObjectiveStack, OptimizerConfig, RunSettings,
};
use seqgrad::oracles::{MlpOracle, MotifOracle, QuadraticOracle};
use seqgrad::RngState;

fn small_run(seed: u64) -> RunSettings {
    RunSettings {
        restarts: 3,
        iterations: 40,
        test_samples: 4,
        eval_every: 10,
        seed,
        record_time: false,
    }
}

#[test]
fn results_do_not_depend_on_the_thread_count() {
    let oracle = MotifOracle::random(30, 5, 4, &mut RngState::new(2)).unwrap();
    let settings = DesignSettings::new(DesignMethod::FastSeqProp);
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| run_design(&oracle, &settings, &ObjectiveStack::default(), &small_run(4), None).unwrap())
    };
    let (one, four) = (run(1), run(4));
    assert_eq!(one.trajectories, four.trajectories);
    assert_eq!(one.finals, four.finals);
    assert_eq!(one.logos, four.logos);
}

#[test]
fn zero_iterations_records_one_row_per_restart() {
    let oracle = QuadraticOracle::random(6, 4, 1.0, &mut RngState::new(1)).unwrap();
    let run = RunSettings {
        iterations: 0,
        ..small_run(1)
    };
    let res = run_design(&oracle, &DesignSettings::new(DesignMethod::Pwm), &ObjectiveStack::default(), &run, None)
        .unwrap();
    assert_eq!(res.trajectories.len(), 3);
    assert!(res.trajectories.iter().all(|r| r.iteration == 0));
}

#[test]
fn oracle_calls_strictly_increase_within_a_restart() {
    let oracle = MlpOracle::random(10, 4, 6, 6, false, &mut RngState::new(3)).unwrap();
    for method in DesignMethod::ALL {
        let res = run_design(&oracle, &DesignSettings::new(method), &ObjectiveStack::default(), &small_run(2), None)
            .unwrap();
        for k in 0..3 {
            let calls: Vec<u64> = res.records_of(k).map(|r| r.oracle_calls).collect();
            assert!(calls.windows(2).all(|w| w[1] > w[0]), "{method}");
        }
    }
}

#[test]
fn logos_are_row_stochastic() {
    let oracle = MotifOracle::random(20, 4, 4, &mut RngState::new(6)).unwrap();
    for method in DesignMethod::ALL {
        let res = run_design(&oracle, &DesignSettings::new(method), &ObjectiveStack::default(), &small_run(3), None)
            .unwrap();
        for logo in &res.logos {
            assert!(logo.rows().into_iter().all(|r| (r.sum() - 1.0).abs() < 1e-9));
        }
    }
}

#[test]
fn gradient_design_improves_on_random_sequences() {
    let oracle = MotifOracle::random(50, 6, 4, &mut RngState::new(8)).unwrap();
    for method in DesignMethod::ALL {
        let mut settings = DesignSettings::new(method);
        settings.optimizer = OptimizerConfig::adam(0.1);
        let run = RunSettings {
            iterations: 300,
            eval_every: 100,
            ..small_run(5)
        };
        let res = run_design(&oracle, &settings, &ObjectiveStack::default(), &run, None).unwrap();
        let first = res.median_test_loss_at(0).unwrap();
        let last = res.final_median_test_loss().unwrap();
        assert!(last < first - 1.0, "{method}: {first} -> {last}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn best_seen_never_decreases(seed: u64, method_index in 0usize..5, s_avg in 1usize..3) {
        let oracle = QuadraticOracle::random(6, 4, 1.0, &mut RngState::new(seed)).unwrap();
        let mut settings = DesignSettings::new(DesignMethod::ALL[method_index]);
        settings.s_avg = s_avg;
        settings.optimizer = OptimizerConfig::adam(0.05);
        let mut state = DesignState::random(6, 4, &settings, RngState::new(seed.wrapping_add(1)));
        let mut best = f64::NEG_INFINITY;
        for _ in 0..30 {
            design_step(&mut state, &settings, &oracle, &ObjectiveStack::default()).unwrap();
            if let Some((score, _)) = &state.best {
                prop_assert!(*score >= best);
                best = *score;
            }
        }
    }
}
