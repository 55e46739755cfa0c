//! Drive a run from a JSON config and write the standard output files,
//! as `seqgrad design` does.
//!
//! cargo run --release --example config_run -- configs/entropy_motif.json out/

use std::path::Path;

use seqgrad::config::parse_config;
use seqgrad::engine::run_design;
use seqgrad::output::{write_outputs, RunArtifacts};

fn main() -> seqgrad::Result<()> {
    let mut args = std::env::args().skip(1);
    let config = args.next().unwrap_or_else(|| "configs/entropy_motif.json".into());
    let out = args.next().unwrap_or_else(|| "out".into());
    let cfg = parse_config(&config)?;
    let base = Path::new(&config).parent().unwrap_or(Path::new("."));
    let oracle = cfg.build_oracle(base)?;
    let results = run_design(
        &oracle,
        &cfg.design_settings()?,
        &cfg.objective_stack(base)?,
        &cfg.run_settings(),
        None,
    )?;
    write_outputs(
        Path::new(&out),
        &RunArtifacts {
            trajectories: &results.trajectories,
            finals: &results.finals,
            logos: &results.logos,
            alphabet: &cfg.alphabet()?,
            config_echo: &cfg.to_json(),
        },
    )?;
    println!(
        "{} restarts, final median test loss {:.4}; outputs in {out}",
        results.finals.len(),
        results.final_median_test_loss().unwrap_or(f64::NAN)
    );
    Ok(())
}
