//! Files written by a run: trajectories, final designs, logos and the
//! resolved configuration.

use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::engine::{FinalDesign, TrajectoryRecord};
use crate::error::{Error, Result};
use crate::fasta::{self, Record};
use crate::format::{fmt_g, to_json_string};
use crate::seq::{Alphabet, ProbMatrix};

pub const TRAJECTORY_HEADER: &str =
    "iteration,restart,train_loss,test_loss,entropy_bits,penalty_total,oracle_calls,elapsed_ms";

/// Everything a run writes to its output directory.
#[derive(Debug, Clone, Copy)]
pub struct RunArtifacts<'a> {
    pub trajectories: &'a [TrajectoryRecord],
    pub finals: &'a [FinalDesign],
    pub logos: &'a [ProbMatrix],
    pub alphabet: &'a Alphabet,
    /// Pretty JSON of the resolved configuration.
    pub config_echo: &'a str,
}

/// CSV with [`TRAJECTORY_HEADER`], floats as `%.10g`, rows in the given
/// (restart, iteration) order.
pub fn trajectory_csv(records: &[TrajectoryRecord]) -> String {
    let mut out = String::with_capacity(64 * (records.len() + 1));
    out.push_str(TRAJECTORY_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.iteration,
            r.restart,
            fmt_g(r.train_loss, 10),
            fmt_g(r.test_loss, 10),
            fmt_g(r.entropy_bits, 10),
            fmt_g(r.penalty_total, 10),
            r.oracle_calls,
            r.elapsed_ms
        ));
    }
    out
}

/// Per-term penalties and extra metrics, or `None` when no record has any.
pub fn metrics_csv(records: &[TrajectoryRecord]) -> Option<String> {
    let first = records.first()?;
    let names: Vec<String> = first
        .penalties
        .iter()
        .map(|(n, _)| format!("penalty_{n}"))
        .chain(first.metrics.iter().map(|(n, _)| n.clone()))
        .collect();
    if names.is_empty() {
        return None;
    }
    let mut out = format!("iteration,restart,{}\n", names.join(","));
    for r in records {
        let values: Vec<String> = r
            .penalties
            .iter()
            .map(|(_, v)| *v)
            .chain(r.metrics.iter().map(|(_, v)| *v))
            .map(|v| fmt_g(v, 10))
            .collect();
        out.push_str(&format!("{},{},{}\n", r.iteration, r.restart, values.join(",")));
    }
    Some(out)
}

/// One record per restart, headed `design_{k}|score={%.6g}`.
pub fn designs_fasta(finals: &[FinalDesign], alphabet: &Alphabet) -> String {
    let records: Vec<Record> = finals
        .iter()
        .map(|f| Record {
            header: format!("design_{}|score={}", f.restart, fmt_g(f.score, 6)),
            sequence: f.indices.iter().map(|&i| alphabet.symbol(i)).collect(),
        })
        .collect();
    fasta::write(&records)
}

#[derive(Serialize)]
struct Logos {
    alphabet: String,
    /// `[restart][position][symbol]`
    probabilities: Vec<Vec<Vec<f64>>>,
}

pub fn logos_json(logos: &[ProbMatrix], alphabet: &Alphabet) -> String {
    let doc = Logos {
        alphabet: alphabet.symbols().iter().collect(),
        probabilities: logos
            .iter()
            .map(|p| p.rows().into_iter().map(|row| row.to_vec()).collect())
            .collect(),
    };
    to_json_string(&doc)
}

/// Writes `trajectory.csv`, `designs.fasta`, `config_echo.json`, and
/// `logos.json` / `metrics.csv` when there is something to put in them.
pub fn write_outputs(dir: &Path, artifacts: &RunArtifacts<'_>) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let write = |name: &str, contents: &str| {
        let path = dir.join(name);
        fs::write(&path, contents).map_err(|e| Error::io(path, e))
    };
    write("trajectory.csv", &trajectory_csv(artifacts.trajectories))?;
    write("designs.fasta", &designs_fasta(artifacts.finals, artifacts.alphabet))?;
    write("config_echo.json", artifacts.config_echo)?;
    if !artifacts.logos.is_empty() {
        write("logos.json", &logos_json(artifacts.logos, artifacts.alphabet))?;
    }
    if let Some(csv) = metrics_csv(artifacts.trajectories) {
        write("metrics.csv", &csv)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(restart: usize, iteration: usize) -> TrajectoryRecord {
        TrajectoryRecord {
            iteration,
            restart,
            train_loss: -1.0 / 3.0,
            test_loss: 2.5e-7,
            entropy_bits: 1.0,
            penalties: vec![("entropy", 0.125)],
            penalty_total: 0.125,
            oracle_calls: 12,
            elapsed_ms: 0,
            metrics: vec![("kl".into(), 0.5)],
        }
    }

    #[test]
    fn trajectory_format() {
        let csv = trajectory_csv(&[record(0, 0), record(0, 10)]);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], TRAJECTORY_HEADER);
        assert_eq!(lines[1], "0,0,-0.3333333333,2.5e-07,1,0.125,12,0");
        assert_eq!(lines.len(), 3);
    }

    #[test]
    fn metrics_columns() {
        let csv = metrics_csv(&[record(1, 0)]).unwrap();
        assert_eq!(csv, "iteration,restart,penalty_entropy,kl\n0,1,0.125,0.5\n");
        let mut bare = record(0, 0);
        bare.penalties.clear();
        bare.metrics.clear();
        assert!(metrics_csv(&[bare]).is_none());
    }

    #[test]
    fn fasta_headers() {
        let finals = [FinalDesign {
            restart: 3,
            indices: vec![0, 1, 2, 3],
            score: 12.3456789,
        }];
        assert_eq!(designs_fasta(&finals, &Alphabet::dna()), ">design_3|score=12.3457\nACGT\n");
    }

    #[test]
    fn logos_round_trip() {
        let text = logos_json(&[ProbMatrix::uniform(2, 4)], &Alphabet::dna());
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["alphabet"], "ACGT");
        assert_eq!(v["probabilities"][0][1][3], 0.25);
    }

    #[test]
    fn unwritable_directory() {
        let dir = tempfile::tempdir().unwrap();
        let blocker = dir.path().join("file");
        fs::write(&blocker, "x").unwrap();
        let artifacts = RunArtifacts {
            trajectories: &[],
            finals: &[],
            logos: &[],
            alphabet: &Alphabet::dna(),
            config_echo: "{}",
        };
        assert!(matches!(
            write_outputs(&blocker.join("out"), &artifacts),
            Err(Error::IoError { .. })
        ));
    }
}
