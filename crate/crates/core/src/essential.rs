//! Which question words actually matter: essentiality scoring of question
//! terms, the forcing cascade that pins high-scoring terms into the support
//! graph, and ranking metrics for evaluating scorers against labeled data.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use thiserror::Error;

use crate::align::candidate_edges;
use crate::kb::{Corpus, QuestionInstance, Table};
use crate::model::{
    add_essential_forcing, build_cascade_extension, build_model, ModelError, VarKind,
};
use crate::reason::{answer_on_problem, AnswerResult, ReasonOptions};
use crate::solver::{solve_with, SolveStatus};
use crate::text::{stem, stemmed_tokens};

#[derive(Debug, Error)]
pub enum EssentialError {
    #[error("cannot access {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// One labeled question term; `label` is the annotator essentiality in
/// [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct EtTerm {
    pub term: String,
    pub label: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EtQuestion {
    pub id: String,
    pub text: String,
    pub options: Vec<String>,
    pub terms: Vec<EtTerm>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EtDataset {
    pub questions: Vec<EtQuestion>,
}

/// Tab-separated labeled terms: `question_id TAB question text TAB
/// pipe-separated options TAB term TAB label`, one term per line. `#` lines
/// and blank lines are skipped; rows group by question id in first-seen
/// order, with the question text and options taken from the id's first row.
pub fn parse_et_tsv(text: &str) -> Result<EtDataset, EssentialError> {
    let mut order: Vec<String> = Vec::new();
    let mut by_id: BTreeMap<String, EtQuestion> = BTreeMap::new();
    for (ln, raw) in text.lines().enumerate() {
        let line = ln + 1;
        if raw.trim().is_empty() || raw.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = raw.split('\t').collect();
        let [id, qtext, opts, term, label] = cols[..] else {
            return Err(EssentialError::Malformed {
                line,
                message: format!("expected 5 tab-separated fields, found {}", cols.len()),
            });
        };
        let label: f64 = label.trim().parse().map_err(|_| EssentialError::Malformed {
            line,
            message: format!("bad label {label:?}"),
        })?;
        if !(0.0..=1.0).contains(&label) {
            return Err(EssentialError::Malformed {
                line,
                message: format!("label {label} outside [0, 1]"),
            });
        }
        let entry = by_id.entry(id.to_string()).or_insert_with(|| {
            order.push(id.to_string());
            EtQuestion {
                id: id.to_string(),
                text: qtext.trim().to_string(),
                options: opts
                    .split('|')
                    .map(|o| o.trim().to_string())
                    .filter(|o| !o.is_empty())
                    .collect(),
                terms: Vec::new(),
            }
        });
        entry.terms.push(EtTerm { term: term.trim().to_string(), label });
    }
    Ok(EtDataset {
        questions: order.into_iter().map(|id| by_id.remove(&id).unwrap()).collect(),
    })
}

pub fn load_et_tsv(path: &Path) -> Result<EtDataset, EssentialError> {
    let text = fs::read_to_string(path)
        .map_err(|source| EssentialError::Io { path: path.display().to_string(), source })?;
    parse_et_tsv(&text)
}

/// Scores one question term; `options` are the question's answer options.
pub trait TermScorer {
    fn score(&self, term: &str, options: &[String]) -> f64;
}

/// Stable 64-bit FNV-1a, the basis for order-invariant pseudo-random
/// fallback scores.
fn fnv1a(seed: u64, s: &str) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325 ^ seed.wrapping_mul(0x100000001b3);
    for b in s.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

fn pseudo_uniform(seed: u64, s: &str) -> f64 {
    (fnv1a(seed, s) >> 11) as f64 / (1u64 << 53) as f64
}

/// Label-proportion scorer: a term's score is the mean label it received in
/// training. Unseen terms draw a deterministic pseudo-uniform value from
/// `(seed, term)`, so scores do not depend on evaluation order. `lemma`
/// keys the table by the stemmed term instead of the surface form.
#[derive(Debug, Clone)]
pub struct PropScorer {
    sums: BTreeMap<String, (f64, u64)>,
    lemma: bool,
    seed: u64,
}

impl PropScorer {
    fn key(&self, term: &str) -> String {
        let lower = term.to_lowercase();
        if self.lemma {
            stem(&lower)
        } else {
            lower
        }
    }

    pub fn fit(data: &EtDataset, lemma: bool, seed: u64) -> PropScorer {
        let mut s = PropScorer { sums: BTreeMap::new(), lemma, seed };
        for q in &data.questions {
            for t in &q.terms {
                let key = s.key(&t.term);
                let e = s.sums.entry(key).or_insert((0.0, 0));
                e.0 += t.label;
                e.1 += 1;
            }
        }
        s
    }
}

impl TermScorer for PropScorer {
    fn score(&self, term: &str, _options: &[String]) -> f64 {
        let key = self.key(term);
        match self.sums.get(&key) {
            Some(&(sum, n)) => sum / n as f64,
            None => pseudo_uniform(self.seed, &key),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PmiMode {
    Max,
    Sum,
}

/// Scores a term by its pointwise mutual information with the answer
/// options: each option contributes its contiguous n-grams up to `max_n`
/// plus skip-bigrams with gaps up to `skip`, and the scorer takes the max
/// or the sum of the term-gram PMI values.
#[derive(Debug, Clone)]
pub struct PmiScorer<'c> {
    pub corpus: &'c Corpus,
    pub mode: PmiMode,
    pub max_n: usize,
    pub skip: usize,
}

impl<'c> PmiScorer<'c> {
    pub fn new(corpus: &'c Corpus, mode: PmiMode) -> PmiScorer<'c> {
        PmiScorer { corpus, mode, max_n: 3, skip: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
enum Gram {
    Contig(Vec<String>),
    /// Two tokens separated by exactly `gap` others.
    Skip(String, String, usize),
}

impl Gram {
    /// Start positions of this gram in a token sequence.
    fn positions(&self, tokens: &[String]) -> Vec<usize> {
        match self {
            Gram::Contig(g) => (0..tokens.len().saturating_sub(g.len() - 1))
                .filter(|&i| tokens[i..i + g.len()] == g[..])
                .collect(),
            Gram::Skip(a, b, gap) => (0..tokens.len().saturating_sub(gap + 1))
                .filter(|&i| &tokens[i] == a && &tokens[i + gap + 1] == b)
                .collect(),
        }
    }
}

fn option_grams(options: &[String], max_n: usize, skip: usize) -> Vec<Gram> {
    let mut grams = Vec::new();
    for opt in options {
        let toks = stemmed_tokens(opt);
        for n in 1..=max_n.min(toks.len()) {
            for w in toks.windows(n) {
                grams.push(Gram::Contig(w.to_vec()));
            }
        }
        for gap in 1..=skip {
            for i in 0..toks.len().saturating_sub(gap + 1) {
                grams.push(Gram::Skip(toks[i].clone(), toks[i + gap + 1].clone(), gap));
            }
        }
    }
    grams.sort();
    grams.dedup();
    grams
}

/// PMI between a (stemmed) term and a gram over the corpus: ln of the
/// co-occurrence probability over the product of the marginals, where
/// co-occurrences are position pairs within the corpus window of one
/// sentence and a gram's position is its first token. Any zero count gives
/// 0 rather than negative infinity.
fn pmi(corpus: &Corpus, term: &str, gram: &Gram) -> f64 {
    let term_count = corpus.token_count(term);
    if term_count == 0 {
        return 0.0;
    }
    let mut gram_count = 0u64;
    let mut cooc = 0u64;
    for s in &corpus.sentences {
        let gpos = gram.positions(s);
        gram_count += gpos.len() as u64;
        if gpos.is_empty() {
            continue;
        }
        let tpos: Vec<usize> =
            (0..s.len()).filter(|&i| s[i] == term).collect();
        for &a in &tpos {
            for &b in &gpos {
                if a.abs_diff(b) <= corpus.window {
                    cooc += 1;
                }
            }
        }
    }
    if gram_count == 0 || cooc == 0 {
        return 0.0;
    }
    let t = corpus.total_tokens as f64;
    ((cooc as f64 * t) / (term_count as f64 * gram_count as f64)).ln()
}

impl TermScorer for PmiScorer<'_> {
    fn score(&self, term: &str, options: &[String]) -> f64 {
        let key = stem(&term.to_lowercase());
        let grams = option_grams(options, self.max_n, self.skip);
        let vals = grams.iter().map(|g| pmi(self.corpus, &key, g));
        match self.mode {
            PmiMode::Max => vals.fold(0.0, f64::max),
            PmiMode::Sum => vals.sum(),
        }
    }
}

/// Per-constituent essentiality in [0, 1]: raw scorer outputs min-max
/// normalized within the question; a constant raw vector maps to 0.5
/// everywhere. Normalization preserves the ranking, which is all the
/// cascade thresholds consume.
pub fn essentiality_profile<S: TermScorer + ?Sized>(
    scorer: &S,
    question: &QuestionInstance,
) -> Vec<f64> {
    let raw: Vec<f64> = question
        .constituents
        .iter()
        .map(|c| scorer.score(&c.text, &question.options))
        .collect();
    let (lo, hi) = raw
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if raw.is_empty() || hi - lo <= 1e-12 {
        return vec![0.5; raw.len()];
    }
    raw.iter().map(|&v| (v - lo) / (hi - lo)).collect()
}

#[derive(Debug, Clone)]
pub struct CascadeOutcome {
    pub result: AnswerResult,
    /// Index into the threshold list of the stage that answered; `None`
    /// means every stage abstained and the unforced program answered (or
    /// abstained) instead.
    pub stage: Option<usize>,
}

fn check_thresholds(thresholds: &[f64]) -> Result<(), ModelError> {
    if thresholds.is_empty()
        || thresholds.windows(2).any(|w| w[0] >= w[1])
        || thresholds.iter().any(|x| !(0.0..=1.0).contains(x))
    {
        return Err(ModelError::BadCascadeThresholds);
    }
    Ok(())
}

/// Sequential cascade: stages run from the strictest threshold upward, each
/// forcing the constituents scoring above it; the first stage that answers
/// wins, and if all abstain the unforced program has the last word.
pub fn run_cascade(
    tables: &[Table],
    question: &QuestionInstance,
    scores: &[f64],
    thresholds: &[f64],
    opts: &ReasonOptions,
) -> Result<CascadeOutcome, EssentialError> {
    check_thresholds(thresholds)?;
    let edges = candidate_edges(tables, question, &opts.model.alignment);
    let base = build_model(tables, question, &edges, &opts.model);
    for (j, &xi) in thresholds.iter().enumerate() {
        let staged = add_essential_forcing(&base, question, scores, xi)?;
        let r = answer_on_problem(&staged, question, opts);
        if r.answer.is_some() {
            return Ok(CascadeOutcome { result: r, stage: Some(j) });
        }
    }
    let result = answer_on_problem(&base, question, opts);
    Ok(CascadeOutcome { result, stage: None })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BigMOutcome {
    pub answer: Option<usize>,
    /// Earliest threshold whose forcing the solution satisfies; `None` when
    /// no stage reward was collected or the program was infeasible.
    pub stage: Option<usize>,
    /// Objective with the stage rewards subtracted back out.
    pub base_objective: f64,
}

/// Single-program cascade: one solve with a reward variable per stage. The
/// reward dominates the base objective, so the optimum satisfies every
/// feasible stage at once and the reward count recovers the earliest one.
/// Unlike [`run_cascade`] this cannot skip past a feasible stage whose
/// optimum falls below the abstention threshold.
pub fn run_cascade_big_m(
    tables: &[Table],
    question: &QuestionInstance,
    scores: &[f64],
    thresholds: &[f64],
    opts: &ReasonOptions,
) -> Result<BigMOutcome, EssentialError> {
    let edges = candidate_edges(tables, question, &opts.model.alignment);
    let base = build_model(tables, question, &edges, &opts.model);
    let ext = build_cascade_extension(&base, question, scores, thresholds, None)?;
    let sol = solve_with(&ext, &opts.solver);
    if sol.status != SolveStatus::Optimal {
        return Ok(BigMOutcome { answer: None, stage: None, base_objective: 0.0 });
    }
    let m = ext
        .vars
        .iter()
        .find(|v| matches!(v.kind, Some(VarKind::CascadeStage { .. })))
        .map_or(0.0, |v| v.weight);
    let active_stages = ext
        .vars
        .iter()
        .enumerate()
        .filter(|(v, var)| {
            matches!(var.kind, Some(VarKind::CascadeStage { .. })) && sol.assignment[*v]
        })
        .count();
    let base_objective = sol.objective - m * active_stages as f64;
    let stage = (active_stages > 0).then(|| thresholds.len() - active_stages);
    let answer = if base_objective > opts.abstain_threshold {
        ext.vars.iter().enumerate().find_map(|(v, var)| match var.kind {
            Some(VarKind::Choice { index }) if sol.assignment[v] => Some(index),
            _ => None,
        })
    } else {
        None
    };
    Ok(BigMOutcome { answer, stage, base_objective })
}

/// Precision, recall, and F1 of predicting positive at `score >=
/// threshold`. Empty denominators give 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinaryMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

pub fn binary_metrics(scored: &[(f64, bool)], threshold: f64) -> BinaryMetrics {
    let (mut tp, mut fp, mut fnn) = (0u64, 0u64, 0u64);
    for &(s, lab) in scored {
        match (s >= threshold, lab) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fnn += 1,
            (false, false) => {}
        }
    }
    let precision = if tp + fp == 0 { 0.0 } else { tp as f64 / (tp + fp) as f64 };
    let recall = if tp + fnn == 0 { 0.0 } else { tp as f64 / (tp + fnn) as f64 };
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    BinaryMetrics { precision, recall, f1 }
}

/// Descending score, ties in original order.
fn ranked(scored: &[(f64, bool)]) -> Vec<(f64, bool)> {
    let mut r = scored.to_vec();
    r.sort_by(|a, b| b.0.total_cmp(&a.0));
    r
}

/// Mean precision at the ranks of the positives; `None` without positives.
pub fn average_precision(scored: &[(f64, bool)]) -> Option<f64> {
    let r = ranked(scored);
    let mut pos = 0u64;
    let mut sum = 0.0;
    for (i, &(_, lab)) in r.iter().enumerate() {
        if lab {
            pos += 1;
            sum += pos as f64 / (i + 1) as f64;
        }
    }
    (pos > 0).then(|| sum / pos as f64)
}

/// Mean AP over questions that have at least one positive; 0 if none do.
pub fn mean_average_precision(per_question: &[Vec<(f64, bool)>]) -> f64 {
    let aps: Vec<f64> = per_question.iter().filter_map(|q| average_precision(q)).collect();
    if aps.is_empty() {
        0.0
    } else {
        aps.iter().sum::<f64>() / aps.len() as f64
    }
}

/// Area under the precision-recall curve by trapezoid over the prefix
/// points at distinct-score boundaries, with a leading point at recall 0
/// carrying the first prefix's precision. `None` without positives.
pub fn pr_auc(scored: &[(f64, bool)]) -> Option<f64> {
    let r = ranked(scored);
    let total_pos = r.iter().filter(|&&(_, lab)| lab).count();
    if total_pos == 0 {
        return None;
    }
    let mut points: Vec<(f64, f64)> = Vec::new();
    let mut pos = 0usize;
    for i in 0..r.len() {
        if r[i].1 {
            pos += 1;
        }
        let boundary = i + 1 == r.len() || r[i + 1].0 != r[i].0;
        if boundary {
            points.push((pos as f64 / total_pos as f64, pos as f64 / (i + 1) as f64));
        }
    }
    let first_p = points[0].1;
    let mut auc = 0.0;
    let mut prev = (0.0, first_p);
    for &(rec, prec) in &points {
        auc += (rec - prev.0) * (prec + prev.1) / 2.0;
        prev = (rec, prec);
    }
    Some(auc)
}

/// Scores every labeled term of every question; labels binarize at 0.5.
pub fn score_dataset<S: TermScorer + ?Sized>(
    scorer: &S,
    data: &EtDataset,
) -> Vec<Vec<(f64, bool)>> {
    data.questions
        .iter()
        .map(|q| {
            q.terms
                .iter()
                .map(|t| (scorer.score(&t.term, &q.options), t.label >= 0.5))
                .collect()
        })
        .collect()
}
