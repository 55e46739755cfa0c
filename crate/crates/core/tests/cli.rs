use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use seqgrad::oracles::{save_oracle, AnyOracle, QuadraticOracle};
use seqgrad::output::TRAJECTORY_HEADER;
use seqgrad::structure::{planted_target, write_structure, ToyStructurePredictor};
use seqgrad::{Alphabet, RngState};

fn seqgrad(args: &[&str], threads: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_seqgrad"));
    cmd.args(args).env_remove("SEQGRAD_THREADS");
    if let Some(t) = threads {
        cmd.env("SEQGRAD_THREADS", t);
    }
    cmd.output().expect("binary runs")
}

fn write(path: &Path, text: &str) {
    fs::write(path, text).unwrap();
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const DESIGN: &str = r#"{
    "oracle": {"kind": "motif", "motif_len": 5, "seed": 3},
    "method": "fast_seqprop", "n": 30, "iterations": 50, "K": 3, "S": 4, "eval_every": 10, "seed": 1,
    "optimizer": {"kind": "adam", "lr": 0.1}
}"#;

#[test]
fn design_writes_all_outputs_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("c.json");
    write(&config, DESIGN);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert_eq!(seqgrad(&["design", "--config", s(&config), "--out", s(&a)], Some("1")).status.code(), Some(0));
    assert_eq!(seqgrad(&["design", "--config", s(&config), "--out", s(&b)], Some("3")).status.code(), Some(0));
    for file in ["trajectory.csv", "designs.fasta", "logos.json", "config_echo.json"] {
        assert_eq!(fs::read(a.join(file)).unwrap(), fs::read(b.join(file)).unwrap(), "{file}");
    }
    let csv = fs::read_to_string(a.join("trajectory.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some(TRAJECTORY_HEADER));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 3 * 6);
    assert!(rows.iter().all(|r| r.len() == 8));
    let order: Vec<(usize, usize)> = rows.iter().map(|r| (r[1].parse().unwrap(), r[0].parse().unwrap())).collect();
    let mut sorted = order.clone();
    sorted.sort();
    assert_eq!(order, sorted);
    let fasta = fs::read_to_string(a.join("designs.fasta")).unwrap();
    assert!(fasta.starts_with(">design_0|score="));
    assert_eq!(fasta.lines().count(), 6);
}

#[test]
fn seed_flag_overrides_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("c.json");
    write(&config, DESIGN);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    seqgrad(&["design", "--config", s(&config), "--out", s(&a), "--seed", "99"], None);
    seqgrad(&["design", "--config", s(&config), "--out", s(&b)], None);
    let echo = fs::read_to_string(a.join("config_echo.json")).unwrap();
    assert!(echo.contains("\"seed\": 99"));
    assert_ne!(fs::read(a.join("trajectory.csv")).unwrap(), fs::read(b.join("trajectory.csv")).unwrap());
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    for (name, text) in [
        ("unknown_key.json", DESIGN.replace("\"seed\": 1", "\"seed\": 1, \"colour\": 1")),
        ("bad_lr.json", DESIGN.replace("\"lr\": 0.1", "\"lr\": -0.1")),
        ("syntax.json", "{ \"oracle\": ".to_string()),
        ("bad_method.json", DESIGN.replace("fast_seqprop", "fastest")),
    ] {
        let config = dir.path().join(name);
        write(&config, &text);
        let res = seqgrad(&["design", "--config", s(&config), "--out", s(&out)], None);
        assert_eq!(res.status.code(), Some(2), "{name}");
        assert!(!res.stderr.is_empty());
    }
    let missing = dir.path().join("missing.json");
    assert_eq!(seqgrad(&["design", "--config", s(&missing), "--out", s(&out)], None).status.code(), Some(2));
    let config = dir.path().join("ok.json");
    write(&config, DESIGN);
    let res = seqgrad(&["design", "--config", s(&config), "--out", s(&out)], Some("0"));
    assert_eq!(res.status.code(), Some(2));
    assert_eq!(seqgrad(&["design"], None).status.code(), Some(2));
}

#[test]
fn runtime_errors_exit_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("c.json");
    write(&config, DESIGN);
    let blocker = dir.path().join("file");
    write(&blocker, "x");
    let res = seqgrad(&["design", "--config", s(&config), "--out", s(&blocker.join("out"))], None);
    assert_eq!(res.status.code(), Some(3));

    let oracle: AnyOracle = QuadraticOracle::random(20, 4, 1.0, &mut RngState::new(0)).unwrap().into();
    let path = dir.path().join("big.json");
    save_oracle(&oracle, &Alphabet::dna(), &path).unwrap();
    assert_eq!(seqgrad(&["enumerate", "--oracle", s(&path), "--n", "20"], None).status.code(), Some(3));
}

#[test]
fn enumerate_prints_the_exact_optimum() {
    let dir = tempfile::tempdir().unwrap();
    let q = QuadraticOracle::random(5, 4, 1.0, &mut RngState::new(4)).unwrap();
    let expected = seqgrad::oracles::brute_force_optimum(&q, &Alphabet::dna(), 5).unwrap();
    let path = dir.path().join("q.json");
    save_oracle(&q.into(), &Alphabet::dna(), &path).unwrap();
    let res = seqgrad(&["enumerate", "--oracle", s(&path), "--n", "5"], None);
    assert_eq!(res.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&res.stdout).unwrap();
    assert_eq!(v["best_sequence"], expected.best_seq.as_str());
    assert_eq!(v["best_score"].as_f64().unwrap(), expected.best_score);
    assert_eq!(v["evaluated"], 1024);
}

#[test]
fn anneal_and_evolution_commands() {
    let dir = tempfile::tempdir().unwrap();
    for kind in ["anneal", "evolution"] {
        let config = dir.path().join(format!("{kind}.json"));
        let text = DESIGN.replace("\"iterations\": 50", "\"iterations\": 300")
            .replace("\"seed\": 1,", &format!("\"seed\": 1, \"baseline\": {{\"kind\": \"{kind}\"}},"));
        write(&config, &text);
        let out = dir.path().join(kind);
        assert_eq!(seqgrad(&["anneal", "--config", s(&config), "--out", s(&out)], None).status.code(), Some(0));
        let csv = fs::read_to_string(out.join("trajectory.csv")).unwrap();
        assert_eq!(csv.lines().count(), 1 + 3 * 31);
        assert!(out.join("designs.fasta").exists());
    }
}

#[test]
fn structure_command_recovers_a_planted_target() {
    let dir = tempfile::tempdir().unwrap();
    let target_path = dir.path().join("t.strt");
    // the CLI rebuilds the predictor from its seed
    let mut seeded = RngState::new(77);
    let predictor =
        ToyStructurePredictor::random_default(8, 20, seqgrad::config::default_structure_scale(), &mut seeded);
    let (_, target) = planted_target(&predictor, &mut seeded).unwrap();
    write_structure(&target_path, &target).unwrap();
    let config = dir.path().join("s.json");
    write(
        &config,
        r#"{"alphabet": "protein", "n": 8, "iterations": 400, "restarts": 1, "eval_every": 100,
            "optimizer": {"kind": "adam", "lr": 0.01}, "structure": {"predictor_seed": 77}}"#,
    );
    let out = dir.path().join("out");
    let res = seqgrad(&["structure", "--target", s(&target_path), "--config", s(&config), "--out", s(&out)], None);
    assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stderr));
    let metrics = fs::read_to_string(out.join("metrics.csv")).unwrap();
    assert!(metrics.starts_with("iteration,restart,kl,smooth_kl"));
    let fasta = fs::read_to_string(out.join("designs.fasta")).unwrap();
    assert!(fasta.lines().next().unwrap().starts_with(">design_0|score="));

    write(&config, r#"{"alphabet": "protein", "n": 9, "iterations": 1}"#);
    let res = seqgrad(&["structure", "--target", s(&target_path), "--config", s(&config), "--out", s(&out)], None);
    assert_eq!(res.status.code(), Some(2));
}

#[test]
fn relative_paths_resolve_against_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let q: AnyOracle = QuadraticOracle::random(6, 4, 1.0, &mut RngState::new(2)).unwrap().into();
    fs::create_dir(dir.path().join("models")).unwrap();
    save_oracle(&q, &Alphabet::dna(), dir.path().join("models/q.json")).unwrap();
    write(&dir.path().join("corpus.fa"), ">a\nACGTACGTAC\n>b\nTTGACCATGA\n");
    let config = dir.path().join("c.json");
    write(
        &config,
        r#"{"oracle": {"kind": "file", "path": "models/q.json"}, "n": 6, "iterations": 20, "K": 2,
            "objectives": {"markov": {"corpus": "corpus.fa", "order": 1, "lambda": 0.5}}}"#,
    );
    let out = dir.path().join("out");
    let res = seqgrad(&["design", "--config", s(&config), "--out", s(&out)], None);
    assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stderr));
    let metrics = fs::read_to_string(out.join("metrics.csv")).unwrap();
    assert!(metrics.starts_with("iteration,restart,penalty_markov"));
}
