//! End-to-end checks of every subcommand against the file formats the
//! binary documents, including the exit-code contract and agreement with
//! the library when both compute the same thing.

mod common;

use std::fs;

use common::*;
use tableqa::ensemble::{combine, extract_features, load_scorecards, CombinerModel};
use tableqa::essential::{
    binary_metrics, essentiality_profile, load_et_tsv, mean_average_precision, pr_auc,
    run_cascade, score_dataset, PmiMode, PmiScorer, PropScorer,
};
use tableqa::kb::load_corpus;
use tableqa::reason::ReasonOptions;

const TRIVIAL_TABLES: &str = "* Animal foods\nanimal\tfood\nbear\tberries\nrabbit\tcarrots\n";
const TRIVIAL_QUESTION: &str =
    r#"{"id":"q1","text":"which food does a bear eat","options":["berries","rocks"],"gold":0}"#;

#[test]
fn trivial_question_scores_one() {
    let dir = tempfile::tempdir().unwrap();
    let tp = dir.path().join("tables.txt");
    let qp = dir.path().join("questions.jsonl");
    write(&tp, TRIVIAL_TABLES);
    write(&qp, &format!("{TRIVIAL_QUESTION}\n"));
    let out = run_ok(bin().arg("solve").arg("--tables").arg(&tp).arg("--questions").arg(&qp));
    let lines = stdout_lines(&out);
    assert_eq!(lines.len(), 1);
    assert_eq!(lines[0]["answer"], 0);
    assert_eq!(lines[0]["answer_text"], "berries");
    let summary = String::from_utf8_lossy(&out.stderr);
    assert!(summary.contains("mean eval_score 1.0000"), "summary: {summary}");
}

#[test]
fn missing_tables_path_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let qp = dir.path().join("questions.jsonl");
    write(&qp, &format!("{TRIVIAL_QUESTION}\n"));
    let out = bin()
        .arg("solve")
        .arg("--tables")
        .arg(dir.path().join("absent.txt"))
        .arg("--questions")
        .arg(&qp)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing input file"));
}

#[test]
fn solve_mps_missing_file_exits_two() {
    let out = bin().arg("solve-mps").arg("/no/such/file.mps").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn xi_without_corpus_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let tp = dir.path().join("tables.txt");
    let qp = dir.path().join("questions.jsonl");
    write(&tp, TRIVIAL_TABLES);
    write(&qp, &format!("{TRIVIAL_QUESTION}\n"));
    let out = bin()
        .args(["solve", "--xi", "0.5", "--tables"])
        .arg(&tp)
        .arg("--questions")
        .arg(&qp)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("corpus"));
}

#[test]
fn workers_zero_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let tp = dir.path().join("tables.txt");
    let qp = dir.path().join("questions.jsonl");
    write(&tp, TRIVIAL_TABLES);
    write(&qp, &format!("{TRIVIAL_QUESTION}\n"));
    let out = bin()
        .args(["solve", "--workers", "0", "--tables"])
        .arg(&tp)
        .arg("--questions")
        .arg(&qp)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn invalid_config_exits_one_with_message() {
    let dir = tempfile::tempdir().unwrap();
    let tp = dir.path().join("tables.txt");
    let qp = dir.path().join("questions.jsonl");
    let cp = dir.path().join("engine.toml");
    write(&tp, TRIVIAL_TABLES);
    write(&qp, &format!("{TRIVIAL_QUESTION}\n"));
    write(&cp, "[cascade]\nthresholds = [0.8, 0.4]\n");
    let out = bin()
        .arg("solve")
        .arg("--tables")
        .arg(&tp)
        .arg("--questions")
        .arg(&qp)
        .arg("--config")
        .arg(&cp)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
}

#[test]
fn solve_writes_sorted_jsonl_to_out() {
    let dir = tempfile::tempdir().unwrap();
    let (_, questions) = suite_fixture(dir.path(), 41, 3);
    let op = dir.path().join("results.jsonl");
    run_ok(bin()
        .arg("solve")
        .arg("--tables")
        .arg(dir.path().join("tables.txt"))
        .arg("--questions")
        .arg(dir.path().join("questions.jsonl"))
        .arg("--out")
        .arg(&op));
    let text = fs::read_to_string(&op).unwrap();
    let ids: Vec<String> = text
        .lines()
        .map(|l| serde_json::from_str::<serde_json::Value>(l).unwrap()["question_id"]
            .as_str()
            .unwrap()
            .to_string())
        .collect();
    let mut sorted = ids.clone();
    sorted.sort();
    assert_eq!(ids, sorted);
    assert_eq!(ids.len(), questions.len());
}

#[test]
fn eval_lines_score_the_gold_answers() {
    let dir = tempfile::tempdir().unwrap();
    suite_fixture(dir.path(), 42, 3);
    let out = run_ok(bin()
        .arg("eval")
        .arg("--tables")
        .arg(dir.path().join("tables.txt"))
        .arg("--questions")
        .arg(dir.path().join("questions.jsonl")));
    for line in stdout_lines(&out) {
        assert_eq!(line["answer"], line["gold"], "line: {line}");
        assert_eq!(line["eval_score"], 1.0);
    }
}

#[test]
fn export_writes_one_mps_file_per_question() {
    let dir = tempfile::tempdir().unwrap();
    let (_, questions) = suite_fixture(dir.path(), 43, 3);
    let mps_dir = dir.path().join("programs");
    let out = run_ok(bin()
        .arg("export-ilp")
        .arg("--tables")
        .arg(dir.path().join("tables.txt"))
        .arg("--questions")
        .arg(dir.path().join("questions.jsonl"))
        .arg("--out")
        .arg(&mps_dir));
    for q in &questions {
        assert!(mps_dir.join(format!("{}.mps", q.id)).is_file());
    }
    assert_eq!(stdout_lines(&out).len(), questions.len());

    // A solved export stays parseable end to end.
    let first = mps_dir.join(format!("{}.mps", questions[0].id));
    let solved = run_ok(bin().arg("solve-mps").arg(&first));
    assert_eq!(stdout_lines(&solved)[0]["status"], "optimal");
}

#[test]
fn export_of_empty_question_set_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let tp = dir.path().join("tables.txt");
    let qp = dir.path().join("questions.jsonl");
    write(&tp, TRIVIAL_TABLES);
    write(&qp, "");
    let mps_dir = dir.path().join("programs");
    run_ok(bin()
        .arg("export-ilp")
        .arg("--tables")
        .arg(&tp)
        .arg("--questions")
        .arg(&qp)
        .arg("--out")
        .arg(&mps_dir));
    assert_eq!(fs::read_dir(&mps_dir).unwrap().count(), 0);
}

const ET_TSV: &str = "\
q1\twhich food does a bear eat\tberries|rocks\tbear\t1
q1\twhich food does a bear eat\tberries|rocks\teat\t0.8
q1\twhich food does a bear eat\tberries|rocks\tfood\t0.2
q2\twhat do rabbits like\tcarrots|stones\trabbits\t1
q2\twhat do rabbits like\tcarrots|stones\tlike\t0
";

#[test]
fn et_score_metrics_match_the_library() {
    let dir = tempfile::tempdir().unwrap();
    let ep = dir.path().join("et.tsv");
    let op = dir.path().join("terms.jsonl");
    write(&ep, ET_TSV);
    let out = run_ok(bin()
        .arg("et-score")
        .arg("--questions")
        .arg(&ep)
        .arg("--out")
        .arg(&op));
    let metrics = &stdout_lines(&out)[0];

    let data = load_et_tsv(&ep).unwrap();
    let scorer = PropScorer::fit(&data, true, 0);
    let scored = score_dataset(&scorer, &data);
    let flat: Vec<(f64, bool)> = scored.iter().flatten().copied().collect();
    let bm = binary_metrics(&flat, 0.5);
    assert_eq!(metrics["map"].as_f64().unwrap(), mean_average_precision(&scored));
    assert_eq!(metrics["precision"].as_f64().unwrap(), bm.precision);
    assert_eq!(metrics["recall"].as_f64().unwrap(), bm.recall);
    assert_eq!(metrics["f1"].as_f64().unwrap(), bm.f1);
    assert_eq!(metrics["pr_auc"].as_f64(), pr_auc(&flat));
    assert_eq!(
        fs::read_to_string(&op).unwrap().lines().count(),
        flat.len(),
        "one line per labeled term"
    );
}

#[test]
fn et_score_with_corpus_uses_pmi() {
    let dir = tempfile::tempdir().unwrap();
    let ep = dir.path().join("et.tsv");
    let cp = dir.path().join("corpus.txt");
    write(&ep, ET_TSV);
    write(&cp, "bears eat berries\nrabbits like carrots\nberries feed bears\n");
    let out = run_ok(bin()
        .arg("et-score")
        .arg("--questions")
        .arg(&ep)
        .arg("--corpus")
        .arg(&cp));
    let lines = stdout_lines(&out);
    let data = load_et_tsv(&ep).unwrap();
    let corpus = load_corpus(&cp, 3).unwrap();
    let scorer = PmiScorer::new(&corpus, PmiMode::Max);
    let scored = score_dataset(&scorer, &data);
    // Term lines precede the metrics line; spot-check the first score.
    assert_eq!(lines[0]["term"], "bear");
    assert_eq!(lines[0]["score"].as_f64().unwrap(), scored[0][0].0);
}

const SCORECARDS: &str = "\
{\"question_id\":\"q1\",\"gold\":0,\"n_options\":2,\"solvers\":{\"ilp\":[2.0,0.5],\"ir\":[1.0,0.8]}}
{\"question_id\":\"q2\",\"gold\":1,\"n_options\":2,\"solvers\":{\"ilp\":[0.3,1.9],\"ir\":[0.4,0.6]}}
{\"question_id\":\"q3\",\"gold\":0,\"n_options\":2,\"solvers\":{\"ilp\":[1.4,0.2],\"ir\":[0.9,0.1]}}
";

#[test]
fn train_then_combine_recovers_the_gold_answers() {
    let dir = tempfile::tempdir().unwrap();
    let sp = dir.path().join("cards.jsonl");
    let mp = dir.path().join("model.json");
    write(&sp, SCORECARDS);
    let trained = run_ok(bin()
        .arg("train-combiner")
        .arg("--scorecards")
        .arg(&sp)
        .arg("--out")
        .arg(&mp));
    let info = &stdout_lines(&trained)[0];
    assert_eq!(info["examples"], 6);
    assert_eq!(info["dimension"], 8);

    let out = run_ok(bin().arg("combine").arg("--scorecards").arg(&sp).arg("--model").arg(&mp));
    let lines = stdout_lines(&out);
    assert_eq!(lines.len(), 3);
    for line in &lines {
        assert_eq!(line["chosen"], line["gold"], "line: {line}");
    }

    // The binary's picks equal the library's on the same model and cards.
    let model = CombinerModel::load(&mp).unwrap();
    let mut cards = load_scorecards(&sp).unwrap();
    cards.sort_by(|a, b| a.question_id.cmp(&b.question_id));
    for (card, line) in cards.iter().zip(&lines) {
        let feats: Vec<Vec<f64>> = (0..card.n_options)
            .map(|o| extract_features(card, o, None).unwrap())
            .collect();
        let o = combine(&model, &feats).unwrap();
        assert_eq!(line["chosen"].as_u64().unwrap() as usize, o.chosen);
    }
}

#[test]
fn train_without_gold_labels_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let sp = dir.path().join("cards.jsonl");
    write(
        &sp,
        "{\"question_id\":\"q1\",\"n_options\":2,\"solvers\":{\"ilp\":[2.0,0.5]}}\n",
    );
    let out = bin()
        .arg("train-combiner")
        .arg("--scorecards")
        .arg(&sp)
        .arg("--out")
        .arg(dir.path().join("model.json"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("gold"));
}

#[test]
fn cascade_agrees_with_the_library() {
    let dir = tempfile::tempdir().unwrap();
    let (tables, questions) = suite_fixture(dir.path(), 44, 5);
    let corpus_text: String = questions
        .iter()
        .map(|q| format!("{} {}\n", q.text, q.options.join(" ")))
        .collect();
    let cp = dir.path().join("corpus.txt");
    write(&cp, &corpus_text);
    let out = run_ok(bin()
        .arg("cascade")
        .arg("--tables")
        .arg(dir.path().join("tables.txt"))
        .arg("--questions")
        .arg(dir.path().join("questions.jsonl"))
        .arg("--corpus")
        .arg(&cp));
    let lines = stdout_lines(&out);
    assert_eq!(lines.len(), questions.len());

    let corpus = load_corpus(&cp, 3).unwrap();
    let scorer = PmiScorer::new(&corpus, PmiMode::Max);
    let opts = ReasonOptions::default();
    let thresholds = [0.4, 0.6, 0.8, 1.0];
    let mut sorted = questions.clone();
    sorted.sort_by(|a, b| a.id.cmp(&b.id));
    for (q, line) in sorted.iter().zip(&lines) {
        let scores = essentiality_profile(&scorer, q);
        let o = run_cascade(&tables, q, &scores, &thresholds, &opts).unwrap();
        assert_eq!(line["question_id"].as_str().unwrap(), q.id);
        assert_eq!(
            line["answer"].as_u64().map(|v| v as usize),
            o.result.answer,
            "question {}",
            q.id
        );
        assert_eq!(
            line["stage"].as_u64().map(|v| v as usize),
            o.stage,
            "question {}",
            q.id
        );
    }
}
