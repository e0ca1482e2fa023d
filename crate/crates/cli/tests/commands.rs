//! The `persuasion` binary end to end.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use persuasion_core::synthetic::{pattern_corpus, unlabeled, PatternSpec};
use persuasion_core::{Label, LabeledCorpus, Snippet};

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_persuasion"))
        .args(args)
        .env("RUST_LOG", "info")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write_corpus(dir: &Path, name: &str, corpus: &LabeledCorpus) -> PathBuf {
    let path = dir.join(name);
    corpus.write(&path).unwrap();
    path
}

fn labeled(rows: &[(&str, Label)]) -> LabeledCorpus {
    LabeledCorpus::new(
        rows.iter()
            .map(|(id, l)| Snippet::new(*id, &format!("text of {id}"), Some(*l), None).unwrap())
            .collect(),
    )
    .unwrap()
}

fn counts_corpus(n_true: usize, n_false: usize) -> LabeledCorpus {
    let snippets = (0..n_true + n_false)
        .map(|i| {
            let label = if i < n_true {
                Label::True
            } else {
                Label::False
            };
            Snippet::new(format!("s{i}"), "tok1 tok2", Some(label), None).unwrap()
        })
        .collect();
    LabeledCorpus::new(snippets).unwrap()
}

/// Trains a one-epoch tiny checkpoint and returns its directory.
fn tiny_checkpoint(dir: &Path) -> PathBuf {
    let train = write_corpus(
        dir,
        "train.jsonl",
        &pattern_corpus(&PatternSpec::new(10, 10, 1)),
    );
    let run = dir.join("run");
    let o = bin(&[
        "train",
        s(&train),
        s(&run),
        "--checkpoint",
        "tiny-random",
        "--max-epochs",
        "1",
        "--max-length",
        "32",
        "--quiet",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    run.join("best")
}

#[test]
fn train_writes_run_directory() {
    let dir = tempfile::tempdir().unwrap();
    let train = write_corpus(
        dir.path(),
        "t.jsonl",
        &pattern_corpus(&PatternSpec::new(12, 8, 2)),
    );
    let run = dir.path().join("run");
    let o = bin(&[
        "train",
        s(&train),
        s(&run),
        "--checkpoint",
        "tiny-random",
        "--max-epochs",
        "3",
        "--learning-rate",
        "0.001",
        "--max-length",
        "32",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).starts_with("dev micro-F1: "));
    let log = fs::read_to_string(run.join("metrics.tsv")).unwrap();
    assert!((1..=3).contains(&log.lines().count()));
    for f in ["config.txt", "report.json", "best/metadata.json"] {
        assert!(run.join(f).exists(), "{f}");
    }
}

#[test]
fn disabling_class_weights_logs_unit_weights() {
    let dir = tempfile::tempdir().unwrap();
    let train = write_corpus(
        dir.path(),
        "t.jsonl",
        &pattern_corpus(&PatternSpec::new(18, 2, 3)),
    );
    let run = dir.path().join("run");
    let o = bin(&[
        "train",
        s(&train),
        s(&run),
        "--checkpoint",
        "tiny-random",
        "--max-epochs",
        "1",
        "--use-class-weights=false",
        "--max-length",
        "32",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(
        stderr(&o).contains("class weights (true / false): 1 / 1"),
        "{}",
        stderr(&o)
    );
}

#[test]
fn flag_overriding_config_file_is_noticed() {
    let dir = tempfile::tempdir().unwrap();
    let train = write_corpus(
        dir.path(),
        "t.jsonl",
        &pattern_corpus(&PatternSpec::new(6, 6, 4)),
    );
    let config = dir.path().join("run.conf");
    fs::write(
        &config,
        "# smoke\nmax_epochs = 1\nseed = 3\nmax_length = 32\n",
    )
    .unwrap();
    let run = dir.path().join("run");
    let o = bin(&[
        "--config",
        s(&config),
        "--seed",
        "5",
        "train",
        s(&train),
        s(&run),
        "--checkpoint",
        "tiny-random",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stderr(&o).contains("--seed = 5 overrides config file value 3"));
    let resolved = fs::read_to_string(run.join("config.txt")).unwrap();
    assert!(resolved.contains("seed = 5") && resolved.contains("max_epochs = 1"));
}

#[test]
fn missing_train_file_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.jsonl");
    let o = bin(&[
        "train",
        s(&missing),
        s(&dir.path().join("run")),
        "--checkpoint",
        "tiny-random",
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("nope.jsonl"));
}

#[test]
fn predict_keeps_input_order_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let ckpt = tiny_checkpoint(dir.path());
    let test_set = unlabeled(&pattern_corpus(&PatternSpec::new(400, 103, 11)));
    let input = write_corpus(dir.path(), "test.jsonl", &test_set);
    let (a, b) = (dir.path().join("a.tsv"), dir.path().join("b.tsv"));
    for out in [&a, &b] {
        let o = bin(&["predict", s(&ckpt), s(&input), s(out)]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let text = fs::read_to_string(&a).unwrap();
    assert_eq!(text, fs::read_to_string(&b).unwrap());
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "id\tlabel");
    assert_eq!(lines.len(), 504);
    for (line, snippet) in lines[1..].iter().zip(test_set.snippets()) {
        let (id, label) = line.split_once('\t').unwrap();
        assert_eq!(id, snippet.id);
        assert!(label == "true" || label == "false");
    }
}

#[test]
fn predict_rejects_empty_text_with_line_number() {
    let dir = tempfile::tempdir().unwrap();
    let ckpt = tiny_checkpoint(dir.path());
    let input = dir.path().join("bad.jsonl");
    fs::write(
        &input,
        "{\"id\":\"a\",\"text\":\"tok1\"}\n{\"id\":\"b\",\"text\":\"  \"}\n",
    )
    .unwrap();
    let o = bin(&["predict", s(&ckpt), s(&input), s(&dir.path().join("p.tsv"))]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("line 2"), "{}", stderr(&o));
}

#[test]
fn predict_rejects_foreign_label_encoding() {
    let dir = tempfile::tempdir().unwrap();
    let ckpt = tiny_checkpoint(dir.path());
    let meta_path = ckpt.join("metadata.json");
    let meta = fs::read_to_string(&meta_path).unwrap();
    fs::write(&meta_path, meta.replace("false=0,true=1", "true=0,false=1")).unwrap();
    let input = write_corpus(dir.path(), "in.jsonl", &labeled(&[("a", Label::True)]));
    let o = bin(&["predict", s(&ckpt), s(&input), s(&dir.path().join("p.tsv"))]);
    assert!(!o.status.success());
}

#[test]
fn score_reports_both_f1_variants() {
    let dir = tempfile::tempdir().unwrap();
    let gold = write_corpus(
        dir.path(),
        "gold.jsonl",
        &labeled(&[("1", Label::True), ("2", Label::True), ("3", Label::False)]),
    );
    let pred = dir.path().join("pred.tsv");
    fs::write(&pred, "id\tlabel\n3\tfalse\n1\ttrue\n2\tfalse\n").unwrap();
    let o = bin(&["score", s(&pred), s(&gold)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("micro-F1 (both classes): 0.6667"), "{out}");
    assert!(out.contains("binary F1 (positive = true): 0.6667"), "{out}");
    assert!(out.contains("macro-F1: 0.6667"), "{out}");
    assert!(out.contains("true\t1\t1\nfalse\t0\t1\n"), "{out}");

    let sorted = dir.path().join("sorted.tsv");
    fs::write(&sorted, "id\tlabel\n1\ttrue\n2\tfalse\n3\tfalse\n").unwrap();
    assert_eq!(stdout(&bin(&["score", s(&sorted), s(&gold)])), out);

    let self_score = bin(&["score", s(&pred), s(&pred)]);
    assert!(stdout(&self_score).contains("micro-F1 (both classes): 1.0000"));
}

#[test]
fn score_lists_id_mismatches() {
    let dir = tempfile::tempdir().unwrap();
    let gold = write_corpus(
        dir.path(),
        "g.jsonl",
        &labeled(&[("1", Label::True), ("2", Label::False)]),
    );
    let pred = dir.path().join("p.tsv");
    fs::write(&pred, "id\tlabel\n1\ttrue\n9\tfalse\n").unwrap();
    let o = bin(&["score", s(&pred), s(&gold)]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(
        err.contains("missing predictions: 2") && err.contains("ids not in gold: 9"),
        "{err}"
    );

    fs::write(&pred, "id\tlabel\n1\ttrue\n1\tfalse\n").unwrap();
    assert_eq!(bin(&["score", s(&pred), s(&gold)]).status.code(), Some(1));
}

#[test]
fn inspect_reports() {
    let dir = tempfile::tempdir().unwrap();
    let official = write_corpus(dir.path(), "o.jsonl", &counts_corpus(1918, 509));
    let out = stdout(&bin(&["inspect", s(&official)]));
    assert!(
        out.starts_with("2427 snippets; true: 1918 (79.0%); false: 509 (21.0%)\n"),
        "{out}"
    );
    assert!(
        out.contains("class weights (true / false): 0.6327 / 2.3841"),
        "{out}"
    );

    let balanced = write_corpus(dir.path(), "b.jsonl", &counts_corpus(2, 2));
    let out = stdout(&bin(&["inspect", s(&balanced)]));
    assert!(
        out.contains("class weights (true / false): 1.0000 / 1.0000"),
        "{out}"
    );
    assert!(
        out.contains("p50 4 / p90 4 / p95 4 / p99 4 / max 4"),
        "{out}"
    );

    let bare = write_corpus(dir.path(), "u.jsonl", &unlabeled(&counts_corpus(2, 1)));
    let out = stdout(&bin(&["inspect", s(&bare)]));
    assert!(out.contains("no labels present"), "{out}");
}

#[test]
fn baseline_predicts_majority() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_corpus(dir.path(), "in.jsonl", &unlabeled(&counts_corpus(2, 1)));
    let out = dir.path().join("p.tsv");

    let official = write_corpus(dir.path(), "o.jsonl", &counts_corpus(1918, 509));
    assert!(bin(&["baseline", s(&official), s(&input), s(&out)])
        .status
        .success());
    assert_eq!(
        fs::read_to_string(&out).unwrap(),
        "id\tlabel\ns0\ttrue\ns1\ttrue\ns2\ttrue\n"
    );

    let tied = write_corpus(dir.path(), "t.jsonl", &counts_corpus(3, 3));
    assert!(bin(&["baseline", s(&tied), s(&input), s(&out)])
        .status
        .success());
    assert!(fs::read_to_string(&out).unwrap().ends_with("s2\tfalse\n"));

    let empty = dir.path().join("empty.jsonl");
    fs::write(&empty, "").unwrap();
    let o = bin(&["baseline", s(&official), s(&empty), s(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(fs::read_to_string(&out).unwrap(), "id\tlabel\n");
}

#[test]
fn unknown_checkpoint_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let train = write_corpus(dir.path(), "t.jsonl", &counts_corpus(4, 4));
    let o = Command::new(env!("CARGO_BIN_EXE_persuasion"))
        .args([
            "train",
            s(&train),
            s(&dir.path().join("run")),
            "--checkpoint",
            "no-such-model",
        ])
        .env("PERSUASION_CHECKPOINT_CACHE", dir.path())
        .output()
        .unwrap();
    assert!(!o.status.success());
    assert!(stderr(&o).contains("no-such-model"));
}
