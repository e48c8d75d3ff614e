//! Seeded generators for test instances: random integer programs for
//! solver cross-checking, answerable table-QA questions with essentiality
//! profiles, a symmetric tie case, and one large instance for scale tests.
//! Everything is a pure function of the seed.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::kb::{chunk_question, QuestionInstance, Table};
use crate::model::{ConstraintTag, IlpProblem, Sense, VarId};

/// Deterministic vocabulary: base-26 letters wrapped so no word is a
/// stopword and none ends in a suffix the stemmer strips.
pub fn word(n: usize) -> String {
    let mut s = String::from("w");
    let mut n = n;
    loop {
        s.push((b'a' + (n % 26) as u8) as char);
        n /= 26;
        if n == 0 {
            break;
        }
    }
    s.push('k');
    s
}

/// Random 0/1 program for solver oracle tests: up to 18 variables and 30
/// constraints. Weights are continuous draws, so distinct assignments tie
/// in objective with probability zero and the optimum is unique.
pub fn random_ilp(rng: &mut ChaCha8Rng) -> IlpProblem {
    let n = rng.gen_range(2..=18);
    let m = rng.gen_range(0..=14);
    let mut p = IlpProblem::new("random");
    for i in 0..n {
        p.add_var(format!("x{i}"), rng.gen_range(-5.0..5.0), None);
    }
    for _ in 0..m {
        let k = rng.gen_range(1..=n.min(4));
        let terms: Vec<(VarId, f64)> = (0..k)
            .map(|_| {
                let v = rng.gen_range(0..n);
                let mut c = 0;
                while c == 0 {
                    c = rng.gen_range(-3..=3);
                }
                (VarId(v), c as f64)
            })
            .collect();
        let sense = match rng.gen_range(0..8) {
            0 => Sense::Eq,
            1..=5 => Sense::Le,
            _ => Sense::Ge,
        };
        let rhs = rng.gen_range(-1..=5) as f64;
        p.add_constraint(ConstraintTag::Custom("random".into()), terms, sense, rhs);
    }
    p
}

/// A generated question with its tables and a per-constituent essentiality
/// profile aligned with `question.constituents`.
#[derive(Debug, Clone)]
pub struct GeneratedQa {
    pub tables: Vec<Table>,
    pub question: QuestionInstance,
    pub scores: Vec<f64>,
}

struct WordSource {
    next: usize,
}

impl WordSource {
    fn take(&mut self) -> String {
        let w = word(self.next);
        self.next += 1;
        w
    }
}

fn make_table(id: usize, title: String, rows: Vec<[String; 2]>) -> Table {
    Table {
        id: format!("tbl{id}"),
        title,
        headers: vec![format!("h{id}qk"), format!("h{id}ak")],
        rows: rows.into_iter().map(|[a, b]| vec![a, b]).collect(),
        relations: Vec::new(),
    }
}

/// One answerable instance. The gold option always has a fully supported
/// path: rows pair a two-word question phrase with the option word, so the
/// row clears the two-active-cells rule with a question-side and an
/// option-side alignment. Variants add a second chained table, a weaker
/// distractor table supporting another option, and constituents that align
/// nowhere (sometimes scored high so early cascade stages are infeasible).
pub fn answerable_instance(rng: &mut ChaCha8Rng, idx: usize) -> GeneratedQa {
    let mut words = WordSource { next: idx * 101 };
    let n_options = rng.gen_range(2..=4);
    let gold = rng.gen_range(0..n_options);
    let option_words: Vec<String> = (0..n_options).map(|_| words.take()).collect();

    // Matched constituents come in adjacent pairs, one table row per pair.
    let n_pairs = rng.gen_range(1..=2);
    let matched: Vec<String> = (0..2 * n_pairs).map(|_| words.take()).collect();
    let chained = rng.gen_bool(0.25);
    let skipper = rng.gen_bool(0.3);
    let unmatched: Vec<String> = (0..rng.gen_range(0..=1) + usize::from(skipper))
        .map(|_| words.take())
        .collect();

    let mut tables = Vec::new();
    let gold_rows: Vec<[String; 2]> = (0..n_pairs)
        .map(|p| {
            let phrase = format!("{} {}", matched[2 * p], matched[2 * p + 1]);
            [phrase, option_words[gold].clone()]
        })
        .collect();
    if chained {
        // The question-side table ends in a link word; a second table maps
        // the link word to the gold option, reachable only by chaining.
        let link = words.take();
        let q_rows: Vec<[String; 2]> = gold_rows
            .iter()
            .map(|[phrase, _]| [phrase.clone(), link.clone()])
            .collect();
        tables.push(make_table(tables.len(), format!("topic {}", words.take()), q_rows));
        tables.push(make_table(
            tables.len(),
            format!("bridge {}", words.take()),
            vec![[link, option_words[gold].clone()]],
        ));
    } else {
        tables.push(make_table(tables.len(), format!("topic {}", words.take()), gold_rows));
    }
    if n_options > 1 && rng.gen_bool(0.8) {
        // A weaker rival: one distractor option is reachable through a row
        // that covers a single constituent.
        let rival = (gold + 1) % n_options;
        tables.push(make_table(
            tables.len(),
            format!("rival {}", words.take()),
            vec![[matched[0].clone(), option_words[rival].clone()]],
        ));
    }

    let mut cons_words = matched.clone();
    cons_words.extend(unmatched.iter().cloned());
    let text = cons_words.join(" ");
    let question = QuestionInstance {
        id: format!("syn{idx:03}"),
        text: text.clone(),
        constituents: chunk_question(&text).expect("generated words are content words"),
        options: option_words,
        gold: Some(gold),
    };
    let scores: Vec<f64> = question
        .constituents
        .iter()
        .map(|c| {
            if skipper && unmatched.contains(&c.text) {
                // Force the unalignable word in early stages.
                rng.gen_range(0.85..0.99)
            } else {
                rng.gen_range(0.05..0.8)
            }
        })
        .collect();
    GeneratedQa { tables, question, scores }
}

/// Fixed suite of answerable instances derived from one seed.
pub fn qa_suite(seed: u64, n: usize) -> Vec<GeneratedQa> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|idx| answerable_instance(&mut rng, idx)).collect()
}

/// A symmetric instance whose two options are the same word, so their
/// forced objectives tie exactly and the answer must report a 2-way tie.
pub fn tie_instance() -> GeneratedQa {
    let tables = vec![make_table(
        0,
        "topic wttk".into(),
        vec![["wtak wtbk".into(), "wtck".into()]],
    )];
    let text = "wtak wtbk";
    let question = QuestionInstance {
        id: "tie".into(),
        text: text.into(),
        constituents: chunk_question(text).unwrap(),
        options: vec!["wtck".into(), "wtck".into()],
        gold: Some(0),
    };
    let scores = vec![0.5; question.constituents.len()];
    GeneratedQa { tables, question, scores }
}

/// Knobs for [`scale_instance`]; every count is deterministic in them.
#[derive(Debug, Clone, Copy)]
pub struct ScaleSpec {
    pub n_tables: usize,
    pub rows_per_table: usize,
    pub n_options: usize,
    pub n_cons: usize,
}

impl Default for ScaleSpec {
    fn default() -> Self {
        ScaleSpec { n_tables: 26, rows_per_table: 5, n_options: 4, n_cons: 25 }
    }
}

/// Copies of each question word per [`scale_instance`] question; every copy
/// is its own constituent and multiplies the edge count.
const SCALE_WORD_COPIES: usize = 3;
/// Constituent words mentioned by each table title, sized so the overlap
/// score still clears the title threshold.
const SCALE_TITLE_WORDS: usize = 10;

/// One big instance tuned so the relaxation is tight despite its size.
///
/// Table 0 is the only live evidence: each row pairs one question word with
/// the first option. Every other table is filler whose rows align to the
/// question side only; the row floor that demands a table-side or option
/// alignment then pins those rows, and everything reachable from them, to
/// zero in the relaxation itself. Title edges join no row at all, so they
/// add variables and objective mass but never a bound gap. The net effect
/// is a program at full size whose root relaxation already sits on the
/// integral optimum.
pub fn scale_instance(spec: &ScaleSpec) -> (Vec<Table>, QuestionInstance) {
    let cons: Vec<String> = (0..spec.n_cons).map(|i| word(1000 + i)).collect();
    let options: Vec<String> = (0..spec.n_options).map(|m| word(2000 + m)).collect();
    let title = |t: usize| -> String {
        (0..SCALE_TITLE_WORDS)
            .map(|j| cons[(t * 3 + j) % spec.n_cons].as_str())
            .collect::<Vec<_>>()
            .join(" ")
    };
    let mut tables = Vec::new();
    let gold_rows: Vec<[String; 2]> =
        (0..4).map(|r| [cons[r].clone(), options[0].clone()]).collect();
    tables.push(make_table(0, title(0), gold_rows));
    for t in 1..spec.n_tables {
        let mut rows = Vec::new();
        for r in 0..spec.rows_per_table {
            let slot = t * spec.rows_per_table + r;
            // One question word, padded to ten tokens so no cell pair
            // anywhere reaches the cell-cell threshold.
            let mut q = vec![cons[(t * 7 + r) % spec.n_cons].clone()];
            q.extend((0..9).map(|s| word(10_000 + slot * 9 + s)));
            let a: Vec<String> = (0..10).map(|s| word(40_000 + slot * 10 + s)).collect();
            rows.push([q.join(" "), a.join(" ")]);
        }
        tables.push(make_table(t, title(t), rows));
    }
    let text: String = cons
        .iter()
        .flat_map(|w| std::iter::repeat_n(w.as_str(), SCALE_WORD_COPIES))
        .collect::<Vec<_>>()
        .join(" ");
    let question = QuestionInstance {
        id: "scale".into(),
        text: text.clone(),
        constituents: chunk_question(&text).unwrap(),
        options,
        gold: Some(0),
    };
    (tables, question)
}
