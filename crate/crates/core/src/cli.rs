//! Subcommand implementations behind the `seqgrad` binary.

use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::{default_structure_scale, parse_config, DesignConfig};
use crate::engine::{run_baseline, run_design};
use crate::error::Error;
use crate::format::to_json_string;
use crate::oracles::{brute_force_optimum, load_oracle};
use crate::output::{write_outputs, RunArtifacts};
use crate::rng::RngState;
use crate::structure::{design_to_structure, read_structure, ToyStructurePredictor};

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

/// Worker-count cap read from the environment.
pub const THREADS_ENV: &str = "SEQGRAD_THREADS";

/// An error tagged with the exit code it maps to.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub error: Error,
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        self.error.fmt(f)
    }
}

impl std::error::Error for CliError {}

impl CliError {
    /// Anything that fails while reading inputs is a configuration error.
    fn loading(error: Error) -> Self {
        Self {
            code: EXIT_CONFIG,
            error,
        }
    }

    fn running(error: Error) -> Self {
        let code = if error.is_config_error() { EXIT_CONFIG } else { EXIT_RUNTIME };
        Self { code, error }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// Parses `SEQGRAD_THREADS`; `None` when unset.
pub fn threads_from_env() -> CliResult<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(Some(n)),
            _ => Err(CliError::loading(Error::ConfigError {
                field: THREADS_ENV.into(),
                reason: format!("expected a positive integer, got {v:?}"),
            })),
        },
    }
}

fn load(path: &Path) -> CliResult<(DesignConfig, PathBuf)> {
    let cfg = parse_config(path).map_err(CliError::loading)?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok((cfg, base))
}

/// `seqgrad design`: gradient design, writing the full output set.
pub fn design(config: &Path, out: &Path, seed: Option<u64>) -> CliResult<()> {
    let (mut cfg, base) = load(config)?;
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    let alphabet = cfg.alphabet().map_err(CliError::loading)?;
    let oracle = cfg.build_oracle(&base).map_err(CliError::loading)?;
    let stack = cfg.objective_stack(&base).map_err(CliError::loading)?;
    let settings = cfg.design_settings().map_err(CliError::loading)?;
    let results = run_design(&oracle, &settings, &stack, &cfg.run_settings(), None).map_err(CliError::running)?;
    let echo = cfg.to_json();
    write_outputs(
        out,
        &RunArtifacts {
            trajectories: &results.trajectories,
            finals: &results.finals,
            logos: &results.logos,
            alphabet: &alphabet,
            config_echo: &echo,
        },
    )
    .map_err(CliError::running)
}

/// `seqgrad anneal`: the discrete baseline named by `baseline.kind`, run
/// for `iterations` steps per restart.
pub fn anneal(config: &Path, out: &Path) -> CliResult<()> {
    let (mut cfg, base) = load(config)?;
    let baseline = *cfg.baseline.get_or_insert_with(Default::default);
    let alphabet = cfg.alphabet().map_err(CliError::loading)?;
    let oracle = cfg.build_oracle(&base).map_err(CliError::loading)?;
    let results = run_baseline(&oracle, &baseline, cfg.restarts, cfg.iterations, cfg.eval_every, cfg.seed)
        .map_err(CliError::running)?;
    let echo = cfg.to_json();
    write_outputs(
        out,
        &RunArtifacts {
            trajectories: &results.trajectories,
            finals: &results.finals,
            logos: &[],
            alphabet: &alphabet,
            config_echo: &echo,
        },
    )
    .map_err(CliError::running)
}

/// `seqgrad structure`: design against a binary structure target using the
/// toy predictor seeded by `structure.predictor_seed`.
pub fn structure(target: &Path, config: &Path, out: &Path) -> CliResult<()> {
    let (cfg, base) = load(config)?;
    let target = read_structure(target).map_err(CliError::loading)?;
    let alphabet = cfg.alphabet().map_err(CliError::loading)?;
    let (seed, scale) = cfg
        .structure
        .as_ref()
        .map_or((0, default_structure_scale()), |s| (s.predictor_seed, s.weight_scale));
    if cfg.n != target.n() {
        return Err(CliError::loading(Error::ConfigError {
            field: "n".into(),
            reason: format!("target has N = {}", target.n()),
        }));
    }
    let predictor = ToyStructurePredictor::random(
        target.n(),
        alphabet.len(),
        target.bins(),
        scale,
        &mut RngState::new(seed),
    );
    let stack = cfg.objective_stack(&base).map_err(CliError::loading)?;
    let settings = cfg.design_settings().map_err(CliError::loading)?;
    let results =
        design_to_structure(&predictor, &target, &settings, &stack, &cfg.run_settings()).map_err(CliError::running)?;
    let echo = cfg.to_json();
    write_outputs(
        out,
        &RunArtifacts {
            trajectories: &results.trajectories,
            finals: &results.finals,
            logos: &results.logos,
            alphabet: &alphabet,
            config_echo: &echo,
        },
    )
    .map_err(CliError::running)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnumerateReport {
    pub best_sequence: String,
    pub best_score: f64,
    pub evaluated: u64,
}

/// `seqgrad enumerate`: exhaustive optimum of a small oracle, as JSON.
pub fn enumerate(oracle: &Path, n: usize) -> CliResult<String> {
    let (oracle, alphabet) = load_oracle(oracle).map_err(CliError::loading)?;
    let best = brute_force_optimum(&oracle, &alphabet, n).map_err(CliError::running)?;
    Ok(to_json_string(&EnumerateReport {
        best_sequence: best.best_seq,
        best_score: best.best_score,
        evaluated: best.evaluated,
    }))
}
