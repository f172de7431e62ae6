//! End-to-end behaviour of the `pseudopar` binary.

use std::path::Path;
use std::process::{Command, Output};

use pseudopar::{EmbeddingFile, GoldPairSet};

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pseudopar"))
        .args(args)
        .current_dir(dir)
        .output()
        .unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Three sentences per side; source i matches target (i + 1) % 3.
fn fixture(dir: &Path) {
    std::fs::write(dir.join("src.txt"), "ein Hund\neine Katze\nein Vogel\n").unwrap();
    std::fs::write(dir.join("tgt.txt"), "a bird\na dog\na cat\n").unwrap();
    let src = vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0];
    let tgt = vec![0.1, 0.0, 1.0, 1.0, 0.1, 0.0, 0.0, 1.0, 0.1];
    EmbeddingFile::per_sentence(3, src).unwrap().write(dir.join("src.emb")).unwrap();
    EmbeddingFile::per_sentence(3, tgt).unwrap().write(dir.join("tgt.emb")).unwrap();
    let gold = GoldPairSet::new(vec![(0, 1), (1, 2), (2, 0)]).unwrap();
    std::fs::write(dir.join("gold.tsv"), gold.to_tsv()).unwrap();
    std::fs::write(
        dir.join("mine.conf"),
        "src_corpus = src.txt\ntgt_corpus = tgt.txt\nsrc_emb = src.emb\ntgt_emb = tgt.emb\nthreshold = 100\n",
    )
    .unwrap();
}

#[test]
fn mine_writes_sentence_pairs() {
    let dir = tempfile::tempdir().unwrap();
    fixture(dir.path());
    let out = run(dir.path(), &["mine", "--config", "mine.conf", "--k", "1", "--threshold", "0.5", "--out", "m.tsv"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let mined = std::fs::read_to_string(dir.path().join("m.tsv")).unwrap();
    let pairs: Vec<(&str, &str)> = mined
        .lines()
        .map(|l| {
            let c: Vec<&str> = l.split('\t').collect();
            (c[1], c[2])
        })
        .collect();
    assert_eq!(pairs.len(), 3);
    assert!(pairs.contains(&("ein Hund", "a dog")));
    assert!(pairs.contains(&("eine Katze", "a cat")));
    assert!(pairs.contains(&("ein Vogel", "a bird")));
    assert!(stderr(&out).starts_with("mined 3 pairs"));
}

#[test]
fn config_threshold_applies_when_no_flag_overrides_it() {
    let dir = tempfile::tempdir().unwrap();
    fixture(dir.path());
    let out = run(dir.path(), &["mine", "--config", "mine.conf", "--out", "m.tsv"]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(std::fs::read_to_string(dir.path().join("m.tsv")).unwrap(), "");
    assert!(stderr(&out).starts_with("mined 0 pairs"));
}

#[test]
fn calibrated_mining_recovers_gold() {
    let dir = tempfile::tempdir().unwrap();
    fixture(dir.path());
    let out = run(
        dir.path(),
        &["mine", "--config", "mine.conf", "--threshold", "calibrate", "--gold", "gold.tsv", "--k", "1", "--pairs-out", "ids.tsv"],
    );
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stderr(&out).contains("calibrated P=100.00 R=100.00 F1=100.00"), "{}", stderr(&out));
    let eval = run(dir.path(), &["psm-eval", "--pred", "ids.tsv", "--gold", "gold.tsv"]);
    assert_eq!(String::from_utf8_lossy(&eval.stdout), "P=100.00 R=100.00 F1=100.00\n");
}

#[test]
fn calibrate_reports_grid() {
    let dir = tempfile::tempdir().unwrap();
    fixture(dir.path());
    let out = run(
        dir.path(),
        &["calibrate", "--config", "mine.conf", "--gold", "gold.tsv", "--grid", "list:0.5,1.0,5"],
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let report = String::from_utf8_lossy(&out.stdout).into_owned();
    let lines: Vec<&str> = report.lines().collect();
    assert_eq!(lines[0], "threshold\tprecision\trecall\tf1");
    assert_eq!(lines.len(), 5);
    assert!(lines[4].starts_with("BEST\t"));
}

#[test]
fn knn_dump_lists_neighbours() {
    let dir = tempfile::tempdir().unwrap();
    fixture(dir.path());
    let out = run(dir.path(), &["knn-dump", "--config", "mine.conf", "--k", "1"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let dump = String::from_utf8_lossy(&out.stdout).into_owned();
    let first: Vec<&str> = dump.lines().next().unwrap().split('\t').collect();
    assert_eq!(first[..2], ["0", "1"]);
}

#[test]
fn errors_are_one_categorised_line() {
    let dir = tempfile::tempdir().unwrap();
    fixture(dir.path());
    let cases: [(&[&str], &str); 5] = [
        (&["mine", "--config", "mine.conf", "--src-emb", "missing.emb"], "io"),
        (&["mine", "--config", "mine.conf", "--threshold", "calibrate"], "config"),
        (&["mine", "--config", "mine.conf", "--tgt-emb", "src.txt"], "format"),
        (&["schedule-run", "--switch", "later"], "schedule"),
        (&["mine", "--no-such-flag"], "usage"),
    ];
    for (args, category) in cases {
        let out = run(dir.path(), args);
        assert!(!out.status.success(), "{args:?}");
        let err = stderr(&out);
        assert_eq!(err.lines().count(), 1, "{err}");
        assert!(err.starts_with(&format!("error\t{category}\t")), "{args:?}: {err}");
    }
}

#[test]
fn schedule_run_writes_trace() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        dir.path(),
        &["schedule-run", "--mode", "IBT", "--vocab", "10", "--sentences", "50", "--pp-size", "10", "--max-steps", "20", "--eval-every", "5", "--trace-out", "t.tsv"],
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let trace = std::fs::read_to_string(dir.path().join("t.tsv")).unwrap();
    assert_eq!(
        trace,
        "step\tmode\tbleu_fwd\tbleu_bwd\n0\tIBT\t0.00\t0.00\n5\tIBT\t0.00\t0.00\n10\tIBT\t0.00\t0.00\n15\tIBT\t0.00\t0.00\n20\tIBT\t0.00\t0.00\n"
    );
}

#[test]
fn plant_writes_task_files() {
    let dir = tempfile::tempdir().unwrap();
    fixture(dir.path());
    std::fs::write(dir.path().join("par.tsv"), "gold one\tone gold\ngold two\ttwo gold\n").unwrap();
    let out = run(
        dir.path(),
        &["plant", "--src-corpus", "src.txt", "--tgt-corpus", "tgt.txt", "--parallel", "par.tsv", "--sample-size", "2", "--out-dir", "task"],
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let src = std::fs::read_to_string(dir.path().join("task/src.txt")).unwrap();
    let tgt = std::fs::read_to_string(dir.path().join("task/tgt.txt")).unwrap();
    let gold = GoldPairSet::parse_tsv(&std::fs::read_to_string(dir.path().join("task/gold.tsv")).unwrap()).unwrap();
    let src: Vec<&str> = src.lines().collect();
    let tgt: Vec<&str> = tgt.lines().collect();
    assert_eq!((src.len(), tgt.len(), gold.len()), (4, 4, 2));
    for &(s, t) in gold.pairs() {
        let s = src[s as usize];
        let t = tgt[t as usize];
        assert!((s, t) == ("gold one", "one gold") || (s, t) == ("gold two", "two gold"));
    }
}
