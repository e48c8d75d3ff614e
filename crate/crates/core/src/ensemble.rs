//! Combining answerers: a sentence-retrieval baseline, per-option feature
//! extraction over solver scores and support graphs, and a logistic
//! regression combiner that turns the features into option probabilities.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kb::{Corpus, QuestionInstance};
use crate::reason::SupportGraph;
use crate::text::{content_token_set, is_stopword};

#[derive(Debug, Error)]
pub enum EnsembleError {
    #[error("cannot access {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {source}")]
    Json {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("feature vector has {found} entries, model expects {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("feature rows disagree in length: {first} vs {other}")]
    RaggedFeatures { first: usize, other: usize },
    #[error("training needs at least one example of each class")]
    SingleClass,
    #[error("training config rejected: {message}")]
    BadTrainConfig { message: String },
    #[error("no options to combine")]
    NoOptions,
}

/// Retrieval over the corpus: a sentence only counts when it shares content
/// tokens with both the question side and the option, and then scores the
/// sum of the two overlap sizes. Returns the best sentence index with its
/// score, ties broken to the earliest sentence; `None` when every sentence
/// fails the two-sided overlap requirement.
///
/// `et_filter` restricts the question side to the named constituents;
/// without it every constituent participates.
pub fn ir_retrieve(
    corpus: &Corpus,
    question: &QuestionInstance,
    option: &str,
    et_filter: Option<&[usize]>,
) -> Option<(usize, f64)> {
    let mut qset = std::collections::BTreeSet::new();
    let keep = |l: usize| et_filter.is_none_or(|f| f.contains(&l));
    for (l, c) in question.constituents.iter().enumerate() {
        if keep(l) {
            qset.extend(content_token_set(&c.text));
        }
    }
    let aset = content_token_set(option);
    let mut best: Option<(usize, f64)> = None;
    for (i, sent) in corpus.sentences.iter().enumerate() {
        // Corpus sentences are already stemmed, so membership tests run in
        // the same token space as `content_token_set`.
        let sset: std::collections::BTreeSet<&String> =
            sent.iter().filter(|t| !is_stopword(t)).collect();
        let q_overlap = sset.iter().filter(|t| qset.contains(**t)).count();
        let a_overlap = sset.iter().filter(|t| aset.contains(**t)).count();
        if q_overlap == 0 || a_overlap == 0 {
            continue;
        }
        let score = (q_overlap + a_overlap) as f64;
        if best.is_none_or(|(_, b)| score > b) {
            best = Some((i, score));
        }
    }
    best
}

/// Best retrieval score for the option, 0 when nothing qualifies.
pub fn ir_score(
    corpus: &Corpus,
    question: &QuestionInstance,
    option: &str,
    et_filter: Option<&[usize]>,
) -> f64 {
    ir_retrieve(corpus, question, option, et_filter).map_or(0.0, |(_, s)| s)
}

/// One question's scores from every participating answerer, keyed by
/// answerer name so feature order is reproducible.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverScorecard {
    pub question_id: String,
    #[serde(default)]
    pub gold: Option<usize>,
    pub n_options: usize,
    pub solvers: BTreeMap<String, Vec<f64>>,
    /// Set when a short score vector had to be padded with zeros.
    #[serde(default)]
    pub padded: bool,
}

impl SolverScorecard {
    /// Pads short score vectors with zeros so every answerer covers every
    /// option, recording the repair in `padded`. Returns whether any
    /// padding happened in this call.
    pub fn pad_missing(&mut self) -> bool {
        let mut changed = false;
        for v in self.solvers.values_mut() {
            if v.len() < self.n_options {
                v.resize(self.n_options, 0.0);
                changed = true;
            }
        }
        self.padded |= changed;
        changed
    }
}

pub fn parse_scorecards(text: &str) -> Result<Vec<SolverScorecard>, EnsembleError> {
    let mut cards = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let card = serde_json::from_str(line)
            .map_err(|source| EnsembleError::Json { line: ln + 1, source })?;
        cards.push(card);
    }
    Ok(cards)
}

pub fn load_scorecards(path: &Path) -> Result<Vec<SolverScorecard>, EnsembleError> {
    let text = fs::read_to_string(path)
        .map_err(|source| EnsembleError::Io { path: path.display().to_string(), source })?;
    parse_scorecards(&text)
}

pub fn scorecards_to_jsonl(cards: &[SolverScorecard]) -> String {
    cards
        .iter()
        .map(|c| serde_json::to_string(c).expect("scorecards serialize"))
        .map(|l| l + "\n")
        .collect()
}

/// Normalized scores: `s_i / sum`, with an exactly-zero denominator mapping
/// to the uniform vector because the share of nothing is taken as even.
pub fn normalized_scores(scores: &[f64]) -> Vec<f64> {
    let sum: f64 = scores.iter().sum();
    if sum == 0.0 {
        return vec![1.0 / scores.len() as f64; scores.len()];
    }
    scores.iter().map(|&s| s / sum).collect()
}

/// Max-subtracted softmax.
pub fn softmax_scores(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let exps: Vec<f64> = scores.iter().map(|&s| (s - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// The support-side inputs to feature extraction: the winning graph plus
/// the sizes of the program it came from.
#[derive(Debug, Clone, Copy)]
pub struct SupportInfo<'a> {
    pub graph: &'a SupportGraph,
    pub n_constituents: usize,
    pub n_vars: usize,
    pub n_constraints: usize,
}

fn touches_constituent(e: &crate::reason::ActiveEdge) -> bool {
    use crate::align::ElementRef::Constituent;
    matches!(e.a, Constituent { .. }) || matches!(e.b, Constituent { .. })
}

fn touches_option(e: &crate::reason::ActiveEdge) -> bool {
    use crate::align::ElementRef::Option;
    matches!(e.a, Option { .. }) || matches!(e.b, Option { .. })
}

/// (average, minimum, sum) of a weight collection; all 0 when empty.
fn weight_stats<I: Iterator<Item = f64>>(weights: I) -> (f64, f64, f64) {
    let (mut n, mut sum, mut min) = (0u64, 0.0f64, f64::INFINITY);
    for w in weights {
        n += 1;
        sum += w;
        min = min.min(w);
    }
    if n == 0 {
        (0.0, 0.0, 0.0)
    } else {
        (sum / n as f64, min, sum)
    }
}

/// Support-graph features, in fixed order: average and minimum alignment
/// over edges touching a question constituent; count and fraction of
/// active constituents; average and sum of alignment over edges touching
/// the chosen option; active cell count; average and minimum alignment
/// over all active edges; natural log of the variable and constraint
/// counts (empty programs log as 0).
pub fn support_features(info: &SupportInfo) -> Vec<f64> {
    let g = info.graph;
    let (q_avg, q_min, _) =
        weight_stats(g.active_edges.iter().filter(|e| touches_constituent(e)).map(|e| e.weight));
    let (a_avg, _, a_sum) =
        weight_stats(g.active_edges.iter().filter(|e| touches_option(e)).map(|e| e.weight));
    let (all_avg, all_min, _) = weight_stats(g.active_edges.iter().map(|e| e.weight));
    let n_active_cons = g.active_constituents.len() as f64;
    let frac = n_active_cons / info.n_constituents.max(1) as f64;
    vec![
        q_avg,
        q_min,
        n_active_cons,
        frac,
        a_avg,
        a_sum,
        g.active_cells.len() as f64,
        all_avg,
        all_min,
        (info.n_vars.max(1) as f64).ln(),
        (info.n_constraints.max(1) as f64).ln(),
    ]
}

/// Per-option feature vector: for each answerer in name order, its raw
/// score, normalized score, softmax score, and a top-score indicator (ties
/// all flagged); followed by the support features when a graph is given.
pub fn extract_features(
    card: &SolverScorecard,
    option: usize,
    support: Option<&SupportInfo>,
) -> Result<Vec<f64>, EnsembleError> {
    if card.n_options == 0 || option >= card.n_options {
        return Err(EnsembleError::NoOptions);
    }
    let mut f = Vec::new();
    for scores in card.solvers.values() {
        if scores.len() != card.n_options {
            return Err(EnsembleError::RaggedFeatures {
                first: card.n_options,
                other: scores.len(),
            });
        }
        let max = scores.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        f.push(scores[option]);
        f.push(normalized_scores(scores)[option]);
        f.push(softmax_scores(scores)[option]);
        f.push(if scores[option] == max { 1.0 } else { 0.0 });
    }
    if let Some(info) = support {
        f.extend(support_features(info));
    }
    Ok(f)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub l2: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { learning_rate: 0.5, epochs: 2000, l2: 1e-6 }
    }
}

/// Logistic regression over option feature vectors; stored flat so the
/// weight file is diffable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CombinerModel {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl CombinerModel {
    pub fn linear(&self, features: &[f64]) -> Result<f64, EnsembleError> {
        if features.len() != self.weights.len() {
            return Err(EnsembleError::DimensionMismatch {
                expected: self.weights.len(),
                found: features.len(),
            });
        }
        Ok(self.bias + self.weights.iter().zip(features).map(|(w, x)| w * x).sum::<f64>())
    }

    pub fn probability(&self, features: &[f64]) -> Result<f64, EnsembleError> {
        Ok(sigmoid(self.linear(features)?))
    }

    pub fn save(&self, path: &Path) -> Result<(), EnsembleError> {
        let text = serde_json::to_string_pretty(self).expect("model serializes");
        fs::write(path, text + "\n")
            .map_err(|source| EnsembleError::Io { path: path.display().to_string(), source })
    }

    pub fn load(path: &Path) -> Result<CombinerModel, EnsembleError> {
        let text = fs::read_to_string(path)
            .map_err(|source| EnsembleError::Io { path: path.display().to_string(), source })?;
        serde_json::from_str(&text).map_err(|source| EnsembleError::Json { line: 1, source })
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Mean log-loss plus the `l2/2 * ||w||^2` penalty (bias unpenalized).
pub fn regularized_loss(
    model: &CombinerModel,
    features: &[Vec<f64>],
    labels: &[bool],
    l2: f64,
) -> Result<f64, EnsembleError> {
    let n = features.len() as f64;
    let mut loss = 0.0;
    for (x, &y) in features.iter().zip(labels) {
        let z = model.linear(x)?;
        // log(1 + e^-|z|) + max(0, -yz) form keeps the loss finite.
        let zy = if y { z } else { -z };
        loss += (1.0 + (-zy.abs()).exp()).ln() + (-zy).max(0.0);
    }
    Ok(loss / n + l2 / 2.0 * model.weights.iter().map(|w| w * w).sum::<f64>())
}

/// Full-batch gradient descent on regularized log-loss from a zero
/// initialization. Deterministic: no shuffling, no random init. Zero
/// epochs therefore returns the all-zero model, whose probability is 0.5
/// everywhere.
pub fn train_combiner(
    features: &[Vec<f64>],
    labels: &[bool],
    config: &TrainConfig,
) -> Result<CombinerModel, EnsembleError> {
    // Negated form on purpose: a NaN learning rate must fail this gate.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    if !(config.learning_rate > 0.0) || config.l2 < 0.0 {
        return Err(EnsembleError::BadTrainConfig {
            message: format!(
                "learning_rate {} must be positive, l2 {} nonnegative",
                config.learning_rate, config.l2
            ),
        });
    }
    if features.len() != labels.len() {
        return Err(EnsembleError::RaggedFeatures {
            first: features.len(),
            other: labels.len(),
        });
    }
    if !labels.contains(&true) || !labels.contains(&false) {
        return Err(EnsembleError::SingleClass);
    }
    let dim = features[0].len();
    if let Some(bad) = features.iter().find(|x| x.len() != dim) {
        return Err(EnsembleError::RaggedFeatures { first: dim, other: bad.len() });
    }
    let n = features.len() as f64;
    let mut model = CombinerModel { weights: vec![0.0; dim], bias: 0.0 };
    for _ in 0..config.epochs {
        let mut grad_w = vec![0.0; dim];
        let mut grad_b = 0.0;
        for (x, &y) in features.iter().zip(labels) {
            let e = (sigmoid(model.linear(x).unwrap()) - f64::from(u8::from(y))) / n;
            for (g, &xj) in grad_w.iter_mut().zip(x) {
                *g += e * xj;
            }
            grad_b += e;
        }
        for (w, g) in model.weights.iter_mut().zip(&grad_w) {
            *w -= config.learning_rate * (g + config.l2 * *w);
        }
        model.bias -= config.learning_rate * grad_b;
    }
    Ok(model)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CombineOutcome {
    pub chosen: usize,
    pub probabilities: Vec<f64>,
}

/// Scores each option's feature vector through the model and picks the
/// highest probability, ties to the lowest index. Because the link is
/// monotone this equals the argmax of the linear scores.
pub fn combine(
    model: &CombinerModel,
    per_option_features: &[Vec<f64>],
) -> Result<CombineOutcome, EnsembleError> {
    if per_option_features.is_empty() {
        return Err(EnsembleError::NoOptions);
    }
    let probabilities = per_option_features
        .iter()
        .map(|x| model.probability(x))
        .collect::<Result<Vec<f64>, _>>()?;
    let chosen = probabilities
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1).then(b.0.cmp(&a.0)))
        .map(|(i, _)| i)
        .unwrap();
    Ok(CombineOutcome { chosen, probabilities })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::align::{EdgeKind, ElementRef};
    use crate::kb::{build_corpus, chunk_question};
    use crate::reason::ActiveEdge;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn ask(text: &str, options: &[&str]) -> QuestionInstance {
        QuestionInstance {
            id: "q".into(),
            text: text.into(),
            constituents: chunk_question(text).unwrap(),
            options: options.iter().map(|s| s.to_string()).collect(),
            gold: None,
        }
    }

    #[test]
    fn ir_verbatim_sentence_wins() {
        let c = build_corpus(
            "bears eat berries\nbears hibernate through the cold winter\nfish swim",
            2,
        )
        .unwrap();
        let q = ask("what do bears do in winter", &["hibernate", "swim"]);
        let (idx, score) = ir_retrieve(&c, &q, "hibernate", None).unwrap();
        assert_eq!(idx, 1);
        // Sentence 1 shares bear+winter with the question and hibernate
        // with the option.
        assert_eq!(score, 3.0);
        assert_eq!(ir_score(&c, &q, "hibernate", None), 3.0);
    }

    #[test]
    fn ir_requires_overlap_on_both_sides() {
        let c = build_corpus("bears eat berries", 2).unwrap();
        let q = ask("what do bears do in winter", &["swim", "fly"]);
        // The sentence overlaps the question but never the options.
        assert_eq!(ir_score(&c, &q, "swim", None), 0.0);
        assert!(ir_retrieve(&c, &q, "swim", None).is_none());
    }

    #[test]
    fn ir_filter_switches_retrieved_sentence() {
        // Unfiltered, the distractor "tree" pulls sentence 0 ahead; once the
        // filter keeps only the first two constituents, sentence 1 wins.
        let c = build_corpus(
            "tall tree shade keeps soil cool\nshade keeps animals cool in summer\nrocks sit",
            3,
        )
        .unwrap();
        let q = ask("shade tree cool animals", &["cool"]);
        assert_eq!(q.constituents.len(), 4, "{:?}", q.constituents);
        let (unfiltered, _) = ir_retrieve(&c, &q, "cool", None).unwrap();
        assert_eq!(unfiltered, 0);
        let keep = [0usize, 3];
        let (filtered, _) = ir_retrieve(&c, &q, "cool", Some(&keep)).unwrap();
        assert_eq!(filtered, 1);
    }

    #[test]
    fn ir_score_ignores_sentence_order() {
        let lines = ["bears eat berries", "bears hibernate in winter", "fish swim in winter"];
        let q = ask("what do bears do in winter", &["hibernate"]);
        let base = ir_score(&build_corpus(&lines.join("\n"), 2).unwrap(), &q, "hibernate", None);
        let mut perm = lines;
        perm.reverse();
        let rev = ir_score(&build_corpus(&perm.join("\n"), 2).unwrap(), &q, "hibernate", None);
        assert_eq!(base, rev);
    }

    fn card(scores: &[(&str, Vec<f64>)], n: usize) -> SolverScorecard {
        SolverScorecard {
            question_id: "q".into(),
            gold: None,
            n_options: n,
            solvers: scores.iter().map(|(k, v)| (k.to_string(), v.clone())).collect(),
            padded: false,
        }
    }

    #[test]
    fn scorecard_padding_flags_missing_scores() {
        let mut c = card(&[("ir", vec![1.0])], 3);
        assert!(c.pad_missing());
        assert_eq!(c.solvers["ir"], vec![1.0, 0.0, 0.0]);
        assert!(c.padded);
        assert!(!c.pad_missing());
        assert!(c.padded, "flag survives later no-op calls");
    }

    #[test]
    fn scorecard_jsonl_round_trip() {
        let cards = vec![card(&[("ir", vec![1.5, 0.25])], 2), card(&[("ilp", vec![0.1, 0.2])], 2)];
        let text = scorecards_to_jsonl(&cards);
        assert_eq!(parse_scorecards(&text).unwrap(), cards);
        assert!(parse_scorecards("{broken").is_err());
    }

    #[test]
    fn feature_quartet_hand_values() {
        let c = card(&[("s", vec![2.0, 2.0])], 2);
        let f0 = extract_features(&c, 0, None).unwrap();
        let f1 = extract_features(&c, 1, None).unwrap();
        // Equal scores: both normalized and softmax are 0.5, both are top.
        assert_eq!(f0, vec![2.0, 0.5, 0.5, 1.0]);
        assert_eq!(f1, f0);
        let c = card(&[("s", vec![1.0, 0.0])], 2);
        assert_eq!(extract_features(&c, 0, None).unwrap()[3], 1.0);
        assert_eq!(extract_features(&c, 1, None).unwrap()[3], 0.0);
    }

    #[test]
    fn normalized_and_softmax_sum_to_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..200 {
            let n = rng.gen_range(1..=6);
            let scores: Vec<f64> = (0..n).map(|_| rng.gen_range(-50.0..50.0)).collect();
            let ns: f64 = normalized_scores(&scores).iter().sum();
            let ss: f64 = softmax_scores(&scores).iter().sum();
            // Normalized shares can cancel badly when the sum is tiny, so
            // only well-conditioned vectors are asserted tightly.
            if scores.iter().sum::<f64>().abs() > 1.0 {
                assert!((ns - 1.0).abs() < 1e-12, "{scores:?} -> {ns}");
            }
            assert!((ss - 1.0).abs() < 1e-12, "{scores:?} -> {ss}");
        }
        assert_eq!(normalized_scores(&[0.0, 0.0, 0.0, 0.0]), vec![0.25; 4]);
    }

    fn toy_graph() -> SupportGraph {
        let edge = |kind, a, b, weight| ActiveEdge { kind, a, b, weight };
        SupportGraph {
            active_constituents: vec![0, 1, 2],
            active_cells: vec![(0, 0, 0), (0, 0, 1)],
            active_edges: vec![
                edge(
                    EdgeKind::CellQCons,
                    ElementRef::Cell { table: 0, row: 0, col: 0 },
                    ElementRef::Constituent { index: 0 },
                    0.4,
                ),
                edge(
                    EdgeKind::CellQCons,
                    ElementRef::Cell { table: 0, row: 0, col: 0 },
                    ElementRef::Constituent { index: 1 },
                    0.8,
                ),
                edge(
                    EdgeKind::CellQOption,
                    ElementRef::Cell { table: 0, row: 0, col: 1 },
                    ElementRef::Option { index: 0 },
                    0.9,
                ),
            ],
            ..Default::default()
        }
    }

    #[test]
    fn support_features_hand_values() {
        let g = toy_graph();
        let info = SupportInfo { graph: &g, n_constituents: 4, n_vars: 20, n_constraints: 50 };
        let f = support_features(&info);
        assert_eq!(f.len(), 11);
        assert!((f[0] - 0.6).abs() < 1e-12, "avg constituent-edge weight");
        assert_eq!(f[1], 0.4, "min constituent-edge weight");
        assert_eq!(f[2], 3.0);
        assert_eq!(f[3], 0.75);
        assert_eq!(f[4], 0.9, "avg option-edge weight");
        assert_eq!(f[5], 0.9, "sum option-edge weight");
        assert_eq!(f[6], 2.0);
        assert!((f[7] - 0.7).abs() < 1e-12, "avg over all edges");
        assert_eq!(f[8], 0.4, "min over all edges");
        assert_eq!(f[9], 20f64.ln());
        assert_eq!(f[10], 50f64.ln());
        // An empty graph produces all-zero aggregates and ln(1) = 0 sizes.
        let empty = SupportGraph::default();
        let f = support_features(&SupportInfo {
            graph: &empty,
            n_constituents: 0,
            n_vars: 0,
            n_constraints: 0,
        });
        assert_eq!(f, vec![0.0; 11]);
    }

    #[test]
    fn card_plus_support_concatenates() {
        let c = card(&[("a", vec![1.0, 3.0]), ("b", vec![0.5, 0.5])], 2);
        let g = toy_graph();
        let info = SupportInfo { graph: &g, n_constituents: 4, n_vars: 20, n_constraints: 50 };
        let f = extract_features(&c, 1, Some(&info)).unwrap();
        // Two answerers x 4 features, then the 11 support features.
        assert_eq!(f.len(), 19);
        assert_eq!(f[0], 3.0, "answerer a sorts first");
        assert_eq!(f[4], 0.5);
        assert_eq!(f[8..], support_features(&info)[..]);
        assert!(matches!(
            extract_features(&c, 2, None),
            Err(EnsembleError::NoOptions)
        ));
        let ragged = card(&[("a", vec![1.0])], 2);
        assert!(matches!(
            extract_features(&ragged, 0, None),
            Err(EnsembleError::RaggedFeatures { .. })
        ));
    }

    #[test]
    fn separable_data_trains_to_full_accuracy() {
        // One feature, classes split at 0.
        let features: Vec<Vec<f64>> =
            vec![vec![-2.0], vec![-1.5], vec![-0.7], vec![0.6], vec![1.2], vec![2.5]];
        let labels = vec![false, false, false, true, true, true];
        let model = train_combiner(&features, &labels, &TrainConfig::default()).unwrap();
        for (x, &y) in features.iter().zip(&labels) {
            let p = model.probability(x).unwrap();
            assert_eq!(p > 0.5, y, "{x:?} -> {p}");
        }
    }

    #[test]
    fn zero_epochs_returns_uniform_model() {
        let cfg = TrainConfig { epochs: 0, ..TrainConfig::default() };
        let model =
            train_combiner(&[vec![1.0], vec![-1.0]], &[true, false], &cfg).unwrap();
        assert_eq!(model, CombinerModel { weights: vec![0.0], bias: 0.0 });
        assert_eq!(model.probability(&[123.0]).unwrap(), 0.5);
    }

    #[test]
    fn training_rejects_degenerate_inputs() {
        assert!(matches!(
            train_combiner(&[vec![1.0]], &[true], &TrainConfig::default()),
            Err(EnsembleError::SingleClass)
        ));
        let bad = TrainConfig { learning_rate: 0.0, ..TrainConfig::default() };
        assert!(matches!(
            train_combiner(&[vec![1.0], vec![0.0]], &[true, false], &bad),
            Err(EnsembleError::BadTrainConfig { .. })
        ));
        assert!(matches!(
            train_combiner(&[vec![1.0], vec![0.0, 1.0]], &[true, false], &TrainConfig::default()),
            Err(EnsembleError::RaggedFeatures { .. })
        ));
    }

    #[test]
    fn loss_never_increases_under_small_steps() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let features: Vec<Vec<f64>> =
            (0..30).map(|_| vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]).collect();
        let labels: Vec<bool> = features.iter().map(|x| x[0] + 0.3 * x[1] > 0.1).collect();
        let l2 = 1e-3;
        let mut prev = f64::INFINITY;
        for epochs in [0, 1, 2, 5, 10, 25, 60, 150] {
            let cfg = TrainConfig { learning_rate: 0.05, epochs, l2 };
            let model = train_combiner(&features, &labels, &cfg).unwrap();
            let loss = regularized_loss(&model, &features, &labels, l2).unwrap();
            assert!(loss <= prev + 1e-12, "epochs {epochs}: {loss} > {prev}");
            prev = loss;
        }
    }

    #[test]
    fn stronger_l2_shrinks_weights() {
        let features: Vec<Vec<f64>> = vec![vec![-2.0], vec![-1.0], vec![1.0], vec![2.0]];
        let labels = vec![false, false, true, true];
        let norm = |l2: f64| {
            let cfg = TrainConfig { learning_rate: 0.3, epochs: 4000, l2 };
            let m = train_combiner(&features, &labels, &cfg).unwrap();
            m.weights.iter().map(|w| w * w).sum::<f64>().sqrt()
        };
        let (w1, w2, w4) = (norm(0.01), norm(0.02), norm(0.04));
        assert!(w2 <= w1 + 1e-9, "{w2} vs {w1}");
        assert!(w4 <= w2 + 1e-9, "{w4} vs {w2}");
    }

    #[test]
    fn combine_breaks_ties_low_and_tracks_linear_argmax() {
        let model = CombinerModel { weights: vec![1.0, -0.5], bias: 0.2 };
        let same = vec![vec![1.0, 2.0], vec![1.0, 2.0], vec![1.0, 2.0]];
        assert_eq!(combine(&model, &same).unwrap().chosen, 0);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let opts: Vec<Vec<f64>> = (0..rng.gen_range(1..=5))
                .map(|_| vec![rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)])
                .collect();
            let out = combine(&model, &opts).unwrap();
            let linear: Vec<f64> = opts.iter().map(|x| model.linear(x).unwrap()).collect();
            let lin_best = linear
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.total_cmp(b.1).then(b.0.cmp(&a.0)))
                .unwrap()
                .0;
            assert_eq!(out.chosen, lin_best);
            assert!(out.probabilities.iter().all(|&p| (0.0..=1.0).contains(&p)));
        }
        assert!(matches!(combine(&model, &[]), Err(EnsembleError::NoOptions)));
        let single = combine(&model, &[vec![0.0, 0.0]]).unwrap();
        assert_eq!(single.chosen, 0);
    }

    #[test]
    fn model_file_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        let model = CombinerModel { weights: vec![0.1, -2.5, 1.0 / 3.0], bias: 0.7 };
        model.save(&path).unwrap();
        assert_eq!(CombinerModel::load(&path).unwrap(), model);
    }
}
