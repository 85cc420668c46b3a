mod common;

use common::{p, prepare, run, run_ok};
use hcoal_core::{parse_corpus, EvalReport, RankedList, SelectionSet, Strategy};

#[test]
fn pipeline_commands_chain() {
    let dir = tempfile::tempdir().unwrap();
    let (ai, rank) = prepare(dir.path(), 40, "confidence");
    let ranked: RankedList = serde_json::from_str(&std::fs::read_to_string(&rank).unwrap()).unwrap();
    assert_eq!(ranked.strategy, Strategy::Confidence);
    assert_eq!(ranked.len(), 40);

    let sel = dir.path().join("sel.json");
    run_ok(&["select", "--rank", p(&rank), "--budget", "0.1", "--out", p(&sel)]);
    let selection: SelectionSet = serde_json::from_str(&std::fs::read_to_string(&sel).unwrap()).unwrap();
    assert_eq!(selection.ids.len(), 4);

    let mixed = dir.path().join("mixed.conll");
    run_ok(&["correct", "--in", p(&ai), "--select", p(&sel), "--oracle", "--out", p(&mixed)]);
    let corpus = parse_corpus(&std::fs::read_to_string(&mixed).unwrap(), true).unwrap();
    for id in &selection.ids {
        assert!(corpus.example(*id).unwrap().ai_matches_gold());
    }

    let report = dir.path().join("report.json");
    let out = run_ok(&["eval", "--in", p(&mixed), "--report", p(&report)]);
    assert!(String::from_utf8_lossy(&out.stdout).contains("micro F1"));
    let before_path = dir.path().join("before.json");
    run_ok(&["eval", "--in", p(&ai), "--report", p(&before_path)]);
    let after: EvalReport = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    let before: EvalReport = serde_json::from_str(&std::fs::read_to_string(&before_path).unwrap()).unwrap();
    assert!(after.micro_f1 >= before.micro_f1);
}

#[test]
fn rank_strategies_and_counting_switch() {
    let dir = tempfile::tempdir().unwrap();
    let (ai, _) = prepare(dir.path(), 20, "length");
    for strategy in ["random", "length", "entity", "confidence"] {
        let out = dir.path().join(format!("{strategy}.json"));
        run_ok(&["rank", "--in", p(&ai), "--strategy", strategy, "--seed", "3", "--out", p(&out)]);
    }
    let out = dir.path().join("tokens.json");
    run_ok(&["rank", "--in", p(&ai), "--strategy", "entity", "--entity-counting", "tokens", "--out", p(&out)]);
    let r: RankedList = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert!(r.entries.windows(2).all(|w| w[0].score >= w[1].score));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    // usage errors
    assert_eq!(run(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(run(&["rank", "--in", "x"]).status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));

    let (ai, rank) = prepare(dir.path(), 10, "confidence");
    let sel = dir.path().join("sel.json");
    assert_eq!(
        run(&["select", "--rank", p(&rank), "--budget", "1.5", "--out", p(&sel)]).status.code(),
        Some(1)
    );
    // correct needs exactly one of --oracle / --corrections
    assert_eq!(
        run(&["correct", "--in", p(&ai), "--select", p(&sel), "--out", "x"]).status.code(),
        Some(1)
    );

    // data errors
    let bad = dir.path().join("bad.conll");
    std::fs::write(&bad, "fever 1.7 B-PROBLEM\n").unwrap();
    let out = run(&["rank", "--in", p(&bad), "--strategy", "length", "--out", p(&sel)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 1"));
    assert_eq!(
        run(&["eval", "--in", p(&dir.path().join("missing.conll"))]).status.code(),
        Some(2)
    );
    let no_gold = dir.path().join("nogold.conll");
    std::fs::write(&no_gold, "fever 0.5 B-PROBLEM\n").unwrap();
    assert_eq!(run(&["eval", "--in", p(&no_gold)]).status.code(), Some(2));

    // config errors
    let cfg = dir.path().join("exp.json");
    std::fs::write(&cfg, r#"{"budgets": []}"#).unwrap();
    assert_eq!(
        run(&["experiment", "--config", p(&cfg), "--out", p(dir.path())]).status.code(),
        Some(1)
    );
    std::fs::write(&cfg, "{not json").unwrap();
    assert_eq!(
        run(&["experiment", "--config", p(&cfg), "--out", p(dir.path())]).status.code(),
        Some(1)
    );
}

#[test]
fn experiment_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.json");
    std::fs::write(
        &cfg,
        r#"{"input": {"synthetic": {"spec": {"n_examples": 80, "min_len": 5, "max_len": 15,
              "entity_types": ["A", "B"], "entities_per_example": 1.5, "vocab_size": 100}, "seed": 2}},
            "strategies": ["random", "confidence"], "budgets": [0.1, 0.5], "seeds": [1, 2]}"#,
    )
    .unwrap();
    let out_dir = dir.path().join("out");
    let out = run_ok(&["experiment", "--config", p(&cfg), "--out", p(&out_dir)]);
    assert_eq!(String::from_utf8_lossy(&out.stdout).lines().count(), 3);
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("report.json")).unwrap()).unwrap();
    assert_eq!(json["cells"].as_array().unwrap().len(), 8);
    assert!(json["meta"]["timestamp"].is_string());
    let csv = std::fs::read_to_string(out_dir.join("report.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 8 + 2 + 1);
    assert!(out_dir.join("report.md").exists());
}
