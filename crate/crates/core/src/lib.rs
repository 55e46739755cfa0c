//! Gradient-based design of discrete biological sequences.
//!
//! A design run optimizes an `N × M` logit matrix so that sequences sampled
//! from its softmax score highly under a differentiable fitness [`Oracle`].
//! Four gradient methods are available ([`DesignMethod`]):
//!
//! - `Pwm`: feed the softmax relaxation straight into the oracle,
//! - `SeqProp`: feed sampled one-hot sequences, backpropagate with a
//!   straight-through estimator,
//! - `FastPwm` / `FastSeqProp`: the same with the logits normalized across
//!   positions and re-scaled by a learnable per-channel scale and offset,
//!
//! plus a Gumbel-softmax variant and two discrete baselines (simulated
//! annealing and greedy evolution).
//!
//! The crate ships analytic oracles ([`MotifOracle`], [`QuadraticOracle`],
//! [`MlpOracle`]) whose gradients are exact, a brute-force optimum finder for
//! small search spaces, regularizers (entropy, likelihood margin, uncertainty
//! survival, activity caps) and a toy contact-map predictor for
//! structure-matching design.



pub mod cli;
pub mod config;
pub mod engine;
pub mod error;
pub mod fasta;
pub mod format;
pub mod normalizer;
pub mod objectives;
pub mod oracles;
pub mod output;

pub mod rng;
pub mod sampler;
pub mod seq;
pub mod structure;

#[doc(hidden)]
pub mod testing;


pub use engine::{DesignMethod, DesignState, TrajectoryRecord};
pub use error::{Error, Result};
pub use oracles::{MlpOracle, MotifOracle, Oracle, OracleEval, QuadraticOracle};
pub use rng::RngState;
pub use seq::{decode, one_hot_encode, Alphabet, Matrix, OneHotSeq, ProbMatrix};
