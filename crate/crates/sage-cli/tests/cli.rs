//! Binary-level contracts: exit codes, output files, and the columns the
//! CSV artifacts promise. Everything drives the `sage` binary the way a
//! user would.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use sage_core::config::ModelConfig;

fn sage(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sage"))
        .args(args)
        .output()
        .expect("binary must run")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("no exit code")
}

fn tiny_config(dir: &Path) -> String {
    let config = ModelConfig {
        l_layers: 1,
        d_model: 8,
        n_heads: 2,
        d_ff: 16,
        vocab_nl: 8,
        vocab_code: 8,
        k_landmark: 4,
        local_window: 8,
        max_seq_len: 16,
        ..ModelConfig::default()
    };
    let path = dir.join("tiny.cfg");
    config.save(&path).unwrap();
    path.to_str().unwrap().to_string()
}

fn write_corpus(dir: &Path) -> String {
    let path = dir.join("corpus.txt");
    fs::write(&path, "0 1 2 3 | 1 2\n4 5 6 | 7 0\n2 2 | 3 3\n").unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn missing_corpus_is_a_usage_error() {
    let base = tempfile::tempdir().unwrap();
    let out = base.path().join("out");
    let run = sage(&[
        "train",
        "/nonexistent/corpus.txt",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&run), 2, "stderr: {}", String::from_utf8_lossy(&run.stderr));
    assert!(String::from_utf8_lossy(&run.stderr).contains("corpus"));
}

#[test]
fn rank_with_zero_candidates_is_a_usage_error() {
    let base = tempfile::tempdir().unwrap();
    let run = sage(&[
        "rank",
        "nope.ckpt",
        "nope.txt",
        "--k",
        "0",
        "--out",
        base.path().join("out").to_str().unwrap(),
    ]);
    assert_eq!(code(&run), 2);
}

#[test]
fn malformed_scenario_is_a_usage_error() {
    let base = tempfile::tempdir().unwrap();
    let scenario = base.path().join("bad.scenario");
    fs::write(&scenario, "eps=0.1\nwhat even is this line\n").unwrap();
    let run = sage(&[
        "reliability",
        "--config",
        scenario.to_str().unwrap(),
        "--trials",
        "2000",
        "--out",
        base.path().join("out").to_str().unwrap(),
    ]);
    assert_eq!(code(&run), 2, "stderr: {}", String::from_utf8_lossy(&run.stderr));

    fs::write(&scenario, "eps=0.1\nepz=0.2\n").unwrap();
    let run = sage(&[
        "reliability",
        "--config",
        scenario.to_str().unwrap(),
        "--trials",
        "2000",
        "--out",
        base.path().join("out").to_str().unwrap(),
    ]);
    assert_eq!(code(&run), 2, "unknown keys must not silently default");
}

#[test]
fn too_few_trials_is_a_usage_error() {
    let base = tempfile::tempdir().unwrap();
    let run = sage(&[
        "reliability",
        "--trials",
        "500",
        "--out",
        base.path().join("out").to_str().unwrap(),
    ]);
    assert_eq!(code(&run), 2);
}

#[test]
fn unknown_subcommand_is_a_usage_error() {
    let run = sage(&["frobnicate"]);
    assert_eq!(code(&run), 2);
}

#[test]
fn error_free_scenario_yields_flat_curves() {
    let base = tempfile::tempdir().unwrap();
    let scenario = base.path().join("perfect.scenario");
    fs::write(&scenario, "eps = 0\nn_steps = 12\n").unwrap();
    let out = base.path().join("out");
    let run = sage(&[
        "reliability",
        "--config",
        scenario.to_str().unwrap(),
        "--trials",
        "2000",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&run), 0, "stderr: {}", String::from_utf8_lossy(&run.stderr));

    let csv = fs::read_to_string(out.join("curves.csv")).unwrap();
    let mut rows = csv.lines();
    assert_eq!(rows.next(), Some("n,standard,retry,hybrid"));
    let mut n_rows = 0;
    for row in rows {
        let cells: Vec<&str> = row.split(',').collect();
        assert_eq!(cells.len(), 4);
        for cell in &cells[1..] {
            assert_eq!(cell.parse::<f64>().unwrap(), 1.0, "row {row}");
        }
        n_rows += 1;
    }
    assert_eq!(n_rows, 13, "one row per horizon 0..=n_steps");
    assert!(out.join("manifest.json").exists());
    assert!(out.join("report.json").exists());
}

#[test]
fn single_step_training_writes_a_single_loss_row() {
    let base = tempfile::tempdir().unwrap();
    let config = tiny_config(base.path());
    let corpus = write_corpus(base.path());
    let out = base.path().join("out");
    let run = sage(&[
        "train",
        &corpus,
        "--config",
        &config,
        "--trials",
        "1",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&run), 0, "stderr: {}", String::from_utf8_lossy(&run.stderr));
    let csv = fs::read_to_string(out.join("loss.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "step,loss_total,loss_fwd,loss_inv");
    assert_eq!(lines.len(), 2, "header plus exactly one step:\n{csv}");
    assert!(out.join("model.ckpt").exists());
}

#[test]
fn checkpoints_depend_on_the_seed_and_nothing_else() {
    let base = tempfile::tempdir().unwrap();
    let config = tiny_config(base.path());
    let corpus = write_corpus(base.path());
    let run_into = |dir: &str, seed: &str| {
        let out = base.path().join(dir);
        let run = sage(&[
            "train",
            &corpus,
            "--config",
            &config,
            "--trials",
            "3",
            "--seed",
            seed,
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(code(&run), 0, "stderr: {}", String::from_utf8_lossy(&run.stderr));
        fs::read(out.join("model.ckpt")).unwrap()
    };
    let a = run_into("a", "7");
    let b = run_into("b", "7");
    let c = run_into("c", "8");
    assert_eq!(a, b, "same seed, same checkpoint, regardless of directory");
    assert_ne!(a, c, "a different seed must actually change the weights");
}

#[test]
fn rank_at_lambda_zero_agrees_with_the_likelihood_winner() {
    let base = tempfile::tempdir().unwrap();
    let config = tiny_config(base.path());
    let corpus = write_corpus(base.path());
    let train_out = base.path().join("train");
    let run = sage(&[
        "train",
        &corpus,
        "--config",
        &config,
        "--trials",
        "20",
        "--out",
        train_out.to_str().unwrap(),
    ]);
    assert_eq!(code(&run), 0, "stderr: {}", String::from_utf8_lossy(&run.stderr));

    let prompts = base.path().join("prompts.txt");
    fs::write(&prompts, "0 1 2\n3 4 -> 5\n6 7 0 -> 1\n").unwrap();
    let rank_out = base.path().join("rank");
    let run = sage(&[
        "rank",
        train_out.join("model.ckpt").to_str().unwrap(),
        prompts.to_str().unwrap(),
        "--config",
        &config,
        "--k",
        "4",
        "--lambda",
        "0",
        "--out",
        rank_out.to_str().unwrap(),
    ]);
    assert_eq!(code(&run), 0, "stderr: {}", String::from_utf8_lossy(&run.stderr));

    let csv = fs::read_to_string(rank_out.join("rank.csv")).unwrap();
    let mut rows = csv.lines();
    let header = rows.next().unwrap();
    assert_eq!(
        header,
        "prompt,candidate,tokens,logp,ics,energy,energy_winner,logp_winner"
    );
    let mut data_rows = 0;
    for row in rows {
        let cells: Vec<&str> = row.split(',').collect();
        assert_eq!(cells.len(), 8, "row {row}");
        assert_eq!(
            cells[6], cells[7],
            "lambda 0 must make the energy winner the likelihood winner: {row}"
        );
        data_rows += 1;
    }
    assert_eq!(data_rows, 3 * 4, "three prompts, four candidates each");
    assert!(rank_out.join("rank_report.json").exists(), "keyed prompts were given");
}
