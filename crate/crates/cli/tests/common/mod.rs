//! Fixture plumbing shared by the binary's integration tests: writers for
//! the on-disk table and question formats, and a handle on the compiled
//! binary.
#![allow(dead_code)]

use std::path::Path;
use std::process::{Command, Output};

use tableqa::kb::{QuestionInstance, Table};
use tableqa::synthetic::qa_suite;

pub fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_tableqa"))
}

pub fn run_ok(cmd: &mut Command) -> Output {
    let out = cmd.output().expect("binary runs");
    assert!(
        out.status.success(),
        "command failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

pub fn stdout_lines(out: &Output) -> Vec<serde_json::Value> {
    String::from_utf8_lossy(&out.stdout)
        .lines()
        .map(|l| serde_json::from_str(l).expect("stdout line is JSON"))
        .collect()
}

pub fn tables_text(tables: &[Table]) -> String {
    let mut s = String::new();
    for t in tables {
        s.push_str("* ");
        s.push_str(&t.title);
        s.push('\n');
        s.push_str(&t.headers.join("\t"));
        s.push('\n');
        for row in &t.rows {
            s.push_str(&row.join("\t"));
            s.push('\n');
        }
    }
    s
}

pub fn questions_jsonl(questions: &[QuestionInstance]) -> String {
    questions
        .iter()
        .map(|q| {
            serde_json::json!({
                "id": q.id,
                "text": q.text,
                "options": q.options,
                "gold": q.gold,
            })
            .to_string()
                + "\n"
        })
        .collect()
}

pub fn write(path: &Path, text: &str) {
    std::fs::write(path, text).expect("fixture writes");
}

/// Writes a generated suite as one merged tables file plus a questions
/// file. Instances use disjoint vocabularies and distinct titles, so the
/// merged knowledge base answers each question exactly as the lone
/// instance would.
pub fn suite_fixture(dir: &Path, seed: u64, n: usize) -> (Vec<Table>, Vec<QuestionInstance>) {
    let suite = qa_suite(seed, n);
    let tables: Vec<Table> = suite.iter().flat_map(|g| g.tables.clone()).collect();
    let questions: Vec<QuestionInstance> =
        suite.iter().map(|g| g.question.clone()).collect();
    write(&dir.join("tables.txt"), &tables_text(&tables));
    write(&dir.join("questions.jsonl"), &questions_jsonl(&questions));
    (tables, questions)
}
