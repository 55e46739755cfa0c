//! Design loops, optimizers and discrete baselines.

mod anneal;
mod design;
mod optimizer;
mod run;

pub use anneal::{
    anneal_step, evolution_step, metropolis_accept, mutate, run_baseline, AnnealConfig, AnnealState, BaselineKind,
    BaselineResults, SubstitutionPolicy,
};
pub use design::{
    apply_grads, design_step, forward_backward, DesignMethod, DesignSettings, DesignState, Fitness, InputLoss,
    LogitState, MarkovPenalty, NormSettings, ObjectiveStack, StepGrads, StepReport,
};
pub use optimizer::{optimizer_update, OptimizerConfig, OptimizerState};
pub use run::{median, run_design, DesignResults, FinalDesign, MetricFn, RunSettings, TrajectoryRecord};
