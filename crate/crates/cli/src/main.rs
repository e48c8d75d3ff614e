//! Batch front end for the table QA engine. Every subcommand reads plain
//! files (tab-separated tables, JSONL questions, sentence corpora, JSONL
//! scorecards), emits line-delimited JSON on stdout or `--out`, and keeps
//! the human-readable summary on stderr so outputs stay machine-parseable.
//!
//! Exit codes: 0 on success, 2 when a named input file is missing, 1 for
//! any other failure.

use std::collections::BTreeSet;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use tableqa::align::candidate_edges;
use tableqa::config::{load_config, EngineConfig};
use tableqa::ensemble::{
    combine, extract_features, load_scorecards, regularized_loss, train_combiner,
    CombinerModel, TrainConfig,
};
use tableqa::essential::{
    binary_metrics, essentiality_profile, load_et_tsv, mean_average_precision, pr_auc,
    run_cascade, score_dataset, PmiMode, PmiScorer, PropScorer, TermScorer,
};
use tableqa::kb::{
    load_corpus, load_questions, load_tables, Corpus, QuestionInstance, Table,
};
use tableqa::model::{add_essential_forcing, build_model, import_mps, write_mps};
use tableqa::reason::{
    answer_on_problem, answer_with_edges, eval_score, AnswerResult,
};
use tableqa::solver::{solve_with, SolveStatus, SolverConfig};

#[derive(Debug, Error)]
enum CliError {
    #[error("missing input file: {}", .0.display())]
    MissingInput(PathBuf),
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Kb(#[from] tableqa::kb::KbError),
    #[error(transparent)]
    Config(#[from] tableqa::config::ConfigError),
    #[error(transparent)]
    Model(#[from] tableqa::model::ModelError),
    #[error(transparent)]
    Essential(#[from] tableqa::essential::EssentialError),
    #[error(transparent)]
    Ensemble(#[from] tableqa::ensemble::EnsembleError),
    #[error("cannot access {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::MissingInput(_) => 2,
            _ => 1,
        }
    }
}

#[derive(Parser)]
#[command(
    name = "tableqa",
    version,
    about = "Answer multiple-choice questions over tables with an exact 0/1 ILP"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Answer every question and write one result object per line.
    Solve(SolveArgs),
    /// Answer and project each result down to its score against gold.
    Eval(SolveArgs),
    /// Run the essential-term cascade, reporting which stage answered.
    Cascade(CascadeArgs),
    /// Write each question's integer program as an MPS file.
    ExportIlp(ExportArgs),
    /// Solve a standalone MPS file with the embedded solver.
    SolveMps(SolveMpsArgs),
    /// Score labeled essential-term data and report ranking metrics.
    EtScore(EtArgs),
    /// Fit the logistic answer combiner from solver scorecards.
    TrainCombiner(TrainArgs),
    /// Pick answers by running scorecards through a trained combiner.
    Combine(CombineArgs),
}

#[derive(Args)]
struct BatchArgs {
    /// Tables file: `* Title` lines starting tab-separated grids.
    #[arg(long)]
    tables: PathBuf,
    /// Questions as JSON lines: id, text, options, optional gold.
    #[arg(long)]
    questions: PathBuf,
    /// Sentence corpus (one per line) backing PMI essentiality scores.
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// Engine configuration in TOML; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Co-occurrence window used when building the corpus statistics.
    #[arg(long, default_value_t = 3)]
    window: usize,
    /// Worker threads for per-question solves; output order is unaffected.
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Master seed for anything randomized.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Per-question solver budget in milliseconds; overrides the config.
    #[arg(long)]
    time_limit: Option<u64>,
    /// Result lines go here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    batch: BatchArgs,
    /// Force constituents with essentiality strictly above this threshold
    /// into the support graph. Scores come from PMI, so this needs
    /// --corpus.
    #[arg(long, requires = "corpus")]
    xi: Option<f64>,
}

#[derive(Args)]
struct CascadeArgs {
    #[command(flatten)]
    batch: BatchArgs,
    /// Comma-separated stage thresholds, strictly increasing in [0, 1].
    /// Falls back to the config's cascade section, then 0.4,0.6,0.8,1.0.
    #[arg(long, value_delimiter = ',')]
    cascade: Option<Vec<f64>>,
}

#[derive(Args)]
struct ExportArgs {
    #[arg(long)]
    tables: PathBuf,
    #[arg(long)]
    questions: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory receiving one `<question id>.mps` file per question.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SolveMpsArgs {
    /// The MPS file to solve.
    file: PathBuf,
    /// Solver budget in milliseconds.
    #[arg(long)]
    time_limit: Option<u64>,
}

#[derive(Args)]
struct EtArgs {
    /// Labeled terms, tab-separated: id, question, options, term, label.
    #[arg(long)]
    questions: PathBuf,
    /// Corpus for the PMI scorer; without it a proportion model is fit
    /// to the labels instead.
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long, default_value_t = 3)]
    window: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Decision threshold for the precision/recall/F1 row.
    #[arg(long, default_value_t = 0.5)]
    threshold: f64,
    /// Per-term score lines go here; metrics always land on stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    /// Scorecards: one JSON object per line with per-solver option scores.
    #[arg(long)]
    scorecards: PathBuf,
    /// Where the trained weight file lands.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    l2: Option<f64>,
}

#[derive(Args)]
struct CombineArgs {
    #[arg(long)]
    scorecards: PathBuf,
    /// Trained combiner weight file.
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Solve(a) => cmd_solve(&a, false),
        Command::Eval(a) => cmd_solve(&a, true),
        Command::Cascade(a) => cmd_cascade(&a),
        Command::ExportIlp(a) => cmd_export(&a),
        Command::SolveMps(a) => cmd_solve_mps(&a),
        Command::EtScore(a) => cmd_et(&a),
        Command::TrainCombiner(a) => cmd_train(&a),
        Command::Combine(a) => cmd_combine(&a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn require_file(path: &Path) -> Result<(), CliError> {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::MissingInput(path.to_path_buf()))
    }
}

fn write_out(text: &str, out: Option<&Path>) -> Result<(), CliError> {
    let io_err = |path: &str| {
        let path = path.to_string();
        move |source| CliError::Io { path, source }
    };
    match out {
        Some(path) => fs::write(path, text).map_err(io_err(&path.display().to_string())),
        None => std::io::stdout().write_all(text.as_bytes()).map_err(io_err("stdout")),
    }
}

fn jsonl<T: Serialize>(items: &[T]) -> String {
    items
        .iter()
        .map(|x| serde_json::to_string(x).expect("output line serializes") + "\n")
        .collect()
}

fn engine_config(
    config: Option<&Path>,
    time_limit: Option<u64>,
) -> Result<EngineConfig, CliError> {
    let mut cfg = match config {
        Some(path) => {
            require_file(path)?;
            load_config(path)?
        }
        None => EngineConfig::default(),
    };
    if time_limit.is_some() {
        cfg.solver.time_limit_ms = time_limit;
    }
    Ok(cfg)
}

struct Batch {
    cfg: EngineConfig,
    tables: Vec<Table>,
    questions: Vec<QuestionInstance>,
    corpus: Option<Corpus>,
}

fn load_batch(a: &BatchArgs) -> Result<Batch, CliError> {
    require_file(&a.tables)?;
    require_file(&a.questions)?;
    if let Some(c) = &a.corpus {
        require_file(c)?;
    }
    if a.workers == 0 {
        return Err(CliError::Usage("--workers must be at least 1".into()));
    }
    let cfg = engine_config(a.config.as_deref(), a.time_limit)?;
    let tables = load_tables(&a.tables)?;
    let questions = load_questions(&a.questions)?;
    let corpus = match &a.corpus {
        Some(c) => Some(load_corpus(c, a.window)?),
        None => None,
    };
    Ok(Batch { cfg, tables, questions, corpus })
}

/// Maps `f` over the questions on a dedicated pool of `workers` threads.
/// The output keeps the input order, so callers sort once by question id
/// and get byte-stable files at any worker count.
fn for_questions<T, F>(
    questions: &[QuestionInstance],
    workers: usize,
    f: F,
) -> Result<Vec<T>, CliError>
where
    T: Send,
    F: Fn(&QuestionInstance) -> Result<T, CliError> + Sync + Send,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::Usage(format!("cannot build worker pool: {e}")))?;
    pool.install(|| questions.par_iter().map(f).collect())
}

fn mean_eval(results: &[AnswerResult]) -> (usize, Option<f64>) {
    let scores: Vec<f64> = results.iter().filter_map(eval_score).collect();
    let mean = (!scores.is_empty())
        .then(|| scores.iter().sum::<f64>() / scores.len() as f64);
    (scores.len(), mean)
}

fn eval_summary(results: &[AnswerResult]) -> String {
    let answered = results.iter().filter(|r| r.answer.is_some()).count();
    let (labeled, mean) = mean_eval(results);
    let tail = match mean {
        Some(m) => format!("mean eval_score {m:.4} over {labeled} labeled"),
        None => "mean eval_score n/a (no gold labels)".to_string(),
    };
    format!(
        "{} questions: {} answered, {} abstained; {}",
        results.len(),
        answered,
        results.len() - answered,
        tail
    )
}

#[derive(Serialize)]
struct EvalLine<'a> {
    question_id: &'a str,
    answer: Option<usize>,
    gold: Option<usize>,
    ties: &'a [usize],
    objective: Option<f64>,
    eval_score: Option<f64>,
}

fn cmd_solve(args: &SolveArgs, eval_only: bool) -> Result<(), CliError> {
    let batch = load_batch(&args.batch)?;
    let opts = batch.cfg.reason_options();
    let scorer = batch.corpus.as_ref().map(|c| PmiScorer::new(c, PmiMode::Max));
    let mut results = for_questions(&batch.questions, args.batch.workers, |q| {
        let r = match args.xi {
            Some(xi) => {
                let scorer = scorer.as_ref().expect("--xi requires --corpus");
                let scores = essentiality_profile(scorer, q);
                let edges = candidate_edges(&batch.tables, q, &opts.model.alignment);
                let p = build_model(&batch.tables, q, &edges, &opts.model);
                let forced = add_essential_forcing(&p, q, &scores, xi)?;
                answer_on_problem(&forced, q, &opts)
            }
            None => {
                let edges = candidate_edges(&batch.tables, q, &opts.model.alignment);
                answer_with_edges(&batch.tables, q, &edges, &opts)
            }
        };
        Ok(r)
    })?;
    results.sort_by(|a, b| a.question_id.cmp(&b.question_id));
    let body = if eval_only {
        let lines: Vec<EvalLine> = results
            .iter()
            .map(|r| EvalLine {
                question_id: &r.question_id,
                answer: r.answer,
                gold: r.gold,
                ties: &r.ties,
                objective: r.objective,
                eval_score: eval_score(r),
            })
            .collect();
        jsonl(&lines)
    } else {
        jsonl(&results)
    };
    write_out(&body, args.batch.out.as_deref())?;
    eprintln!("{}", eval_summary(&results));
    Ok(())
}

#[derive(Serialize)]
struct CascadeLine {
    /// Stage index that answered; absent stage means the unforced fallback.
    stage: Option<usize>,
    #[serde(flatten)]
    result: AnswerResult,
}

fn cmd_cascade(args: &CascadeArgs) -> Result<(), CliError> {
    let batch = load_batch(&args.batch)?;
    let corpus = batch.corpus.as_ref().ok_or_else(|| {
        CliError::Usage("cascade needs --corpus for essentiality scores".into())
    })?;
    let thresholds: Vec<f64> = args
        .cascade
        .clone()
        .filter(|v| !v.is_empty())
        .or_else(|| {
            let t = &batch.cfg.cascade.thresholds;
            (!t.is_empty()).then(|| t.clone())
        })
        .unwrap_or_else(|| vec![0.4, 0.6, 0.8, 1.0]);
    let opts = batch.cfg.reason_options();
    let scorer = PmiScorer::new(corpus, PmiMode::Max);
    let mut rows = for_questions(&batch.questions, args.batch.workers, |q| {
        let scores = essentiality_profile(&scorer, q);
        let o = run_cascade(&batch.tables, q, &scores, &thresholds, &opts)?;
        Ok(CascadeLine { stage: o.stage, result: o.result })
    })?;
    rows.sort_by(|a, b| a.result.question_id.cmp(&b.result.question_id));
    write_out(&jsonl(&rows), args.batch.out.as_deref())?;
    let results: Vec<AnswerResult> = rows.iter().map(|r| r.result.clone()).collect();
    let by_stage: Vec<usize> = (0..thresholds.len())
        .map(|j| rows.iter().filter(|r| r.stage == Some(j)).count())
        .collect();
    let fallback = rows.iter().filter(|r| r.stage.is_none()).count();
    eprintln!(
        "{}; stage answers {:?}, fallback {}",
        eval_summary(&results),
        by_stage,
        fallback
    );
    Ok(())
}

/// Question ids become file names, so squash anything path-hostile.
fn file_stem(id: &str) -> String {
    id.chars()
        .map(|c| if c.is_ascii_alphanumeric() || "-_.".contains(c) { c } else { '-' })
        .collect()
}

#[derive(Serialize)]
struct ExportLine {
    question_id: String,
    path: String,
    variables: usize,
    constraints: usize,
}

fn cmd_export(args: &ExportArgs) -> Result<(), CliError> {
    require_file(&args.tables)?;
    require_file(&args.questions)?;
    let cfg = engine_config(args.config.as_deref(), None)?;
    let tables = load_tables(&args.tables)?;
    let mut questions = load_questions(&args.questions)?;
    questions.sort_by(|a, b| a.id.cmp(&b.id));
    fs::create_dir_all(&args.out).map_err(|source| CliError::Io {
        path: args.out.display().to_string(),
        source,
    })?;
    let mut stems = BTreeSet::new();
    let mut lines = Vec::new();
    for q in &questions {
        let stem = file_stem(&q.id);
        if !stems.insert(stem.clone()) {
            return Err(CliError::Usage(format!(
                "question ids '{}' collide after file name sanitizing",
                q.id
            )));
        }
        let edges = candidate_edges(&tables, q, &cfg.model.alignment);
        let p = build_model(&tables, q, &edges, &cfg.model);
        let path = args.out.join(format!("{stem}.mps"));
        write_mps(&p, &path)?;
        lines.push(ExportLine {
            question_id: q.id.clone(),
            path: path.display().to_string(),
            variables: p.n_vars(),
            constraints: p.n_constraints(),
        });
    }
    write_out(&jsonl(&lines), None)?;
    eprintln!("wrote {} program files to {}", lines.len(), args.out.display());
    Ok(())
}

fn cmd_solve_mps(args: &SolveMpsArgs) -> Result<(), CliError> {
    require_file(&args.file)?;
    let text = fs::read_to_string(&args.file).map_err(|source| CliError::Io {
        path: args.file.display().to_string(),
        source,
    })?;
    let p = import_mps(&text)?;
    let cfg = SolverConfig { time_limit: args.time_limit.map(Duration::from_millis) };
    let sol = solve_with(&p, &cfg);
    let line = serde_json::to_string(&sol).expect("solution serializes") + "\n";
    write_out(&line, None)?;
    let status = match sol.status {
        SolveStatus::Optimal => "optimal",
        SolveStatus::Infeasible => "infeasible",
        SolveStatus::TimedOut => "timed out",
    };
    eprintln!(
        "{} vars, {} rows: {status}, objective {}, {} nodes, {} lp iterations",
        p.n_vars(),
        p.n_constraints(),
        sol.objective,
        sol.stats.nodes,
        sol.stats.lp_iterations
    );
    Ok(())
}

#[derive(Serialize)]
struct TermLine<'a> {
    question_id: &'a str,
    term: &'a str,
    score: f64,
    label: bool,
}

#[derive(Serialize)]
struct MetricsLine {
    map: f64,
    precision: f64,
    recall: f64,
    f1: f64,
    pr_auc: Option<f64>,
}

fn cmd_et(args: &EtArgs) -> Result<(), CliError> {
    require_file(&args.questions)?;
    if let Some(c) = &args.corpus {
        require_file(c)?;
    }
    let data = load_et_tsv(&args.questions)?;
    let corpus = match &args.corpus {
        Some(c) => Some(load_corpus(c, args.window)?),
        None => None,
    };
    let scorer: Box<dyn TermScorer + '_> = match &corpus {
        Some(c) => Box::new(PmiScorer::new(c, PmiMode::Max)),
        None => Box::new(PropScorer::fit(&data, true, args.seed)),
    };
    let scored = score_dataset(scorer.as_ref(), &data);
    let mut term_lines = String::new();
    for (q, qs) in data.questions.iter().zip(&scored) {
        for (t, (score, label)) in q.terms.iter().zip(qs) {
            let line = TermLine {
                question_id: &q.id,
                term: &t.term,
                score: *score,
                label: *label,
            };
            term_lines += &serde_json::to_string(&line).expect("term line serializes");
            term_lines.push('\n');
        }
    }
    let flat: Vec<(f64, bool)> = scored.iter().flatten().copied().collect();
    let bm = binary_metrics(&flat, args.threshold);
    let metrics = MetricsLine {
        map: mean_average_precision(&scored),
        precision: bm.precision,
        recall: bm.recall,
        f1: bm.f1,
        pr_auc: pr_auc(&flat),
    };
    write_out(&term_lines, args.out.as_deref())?;
    let line = serde_json::to_string(&metrics).expect("metrics serialize") + "\n";
    write_out(&line, None)?;
    eprintln!("{} terms across {} questions", flat.len(), data.questions.len());
    eprintln!("MAP     {:.4}", metrics.map);
    eprintln!(
        "P/R/F1  {:.4} / {:.4} / {:.4} at score >= {}",
        metrics.precision, metrics.recall, metrics.f1, args.threshold
    );
    match metrics.pr_auc {
        Some(a) => eprintln!("PR-AUC  {a:.4}"),
        None => eprintln!("PR-AUC  n/a (no positive labels)"),
    }
    Ok(())
}

#[derive(Serialize)]
struct TrainLine {
    examples: usize,
    dimension: usize,
    loss: f64,
}

fn cmd_train(args: &TrainArgs) -> Result<(), CliError> {
    require_file(&args.scorecards)?;
    let mut cards = load_scorecards(&args.scorecards)?;
    let defaults = TrainConfig::default();
    let tc = TrainConfig {
        learning_rate: args.learning_rate.unwrap_or(defaults.learning_rate),
        epochs: args.epochs.unwrap_or(defaults.epochs),
        l2: args.l2.unwrap_or(defaults.l2),
    };
    let mut features: Vec<Vec<f64>> = Vec::new();
    let mut labels: Vec<bool> = Vec::new();
    let mut labeled_cards = 0usize;
    for card in &mut cards {
        card.pad_missing();
        let Some(gold) = card.gold else { continue };
        if gold >= card.n_options {
            return Err(CliError::Usage(format!(
                "scorecard '{}': gold {} out of range for {} options",
                card.question_id, gold, card.n_options
            )));
        }
        labeled_cards += 1;
        for option in 0..card.n_options {
            features.push(extract_features(card, option, None)?);
            labels.push(option == gold);
        }
    }
    if features.is_empty() {
        return Err(CliError::Usage(
            "no scorecard carries a gold label; nothing to train on".into(),
        ));
    }
    let model = train_combiner(&features, &labels, &tc)?;
    model.save(&args.out)?;
    let loss = regularized_loss(&model, &features, &labels, tc.l2)?;
    let line = TrainLine {
        examples: features.len(),
        dimension: model.weights.len(),
        loss,
    };
    write_out(&(serde_json::to_string(&line).expect("train line serializes") + "\n"), None)?;
    eprintln!(
        "trained on {} option rows from {} labeled scorecards; loss {:.6}; model at {}",
        features.len(),
        labeled_cards,
        loss,
        args.out.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct CombineLine {
    question_id: String,
    chosen: usize,
    probabilities: Vec<f64>,
    gold: Option<usize>,
}

fn cmd_combine(args: &CombineArgs) -> Result<(), CliError> {
    require_file(&args.scorecards)?;
    require_file(&args.model)?;
    let model = CombinerModel::load(&args.model)?;
    let mut cards = load_scorecards(&args.scorecards)?;
    let mut lines: Vec<CombineLine> = Vec::new();
    for card in &mut cards {
        card.pad_missing();
        let per_option: Vec<Vec<f64>> = (0..card.n_options)
            .map(|o| extract_features(card, o, None))
            .collect::<Result<_, _>>()?;
        let o = combine(&model, &per_option)?;
        lines.push(CombineLine {
            question_id: card.question_id.clone(),
            chosen: o.chosen,
            probabilities: o.probabilities,
            gold: card.gold,
        });
    }
    lines.sort_by(|a, b| a.question_id.cmp(&b.question_id));
    write_out(&jsonl(&lines), args.out.as_deref())?;
    let labeled: Vec<&CombineLine> =
        lines.iter().filter(|l| l.gold.is_some()).collect();
    let correct = labeled.iter().filter(|l| l.gold == Some(l.chosen)).count();
    match labeled.len() {
        0 => eprintln!("{} scorecards combined; no gold labels", lines.len()),
        n => eprintln!(
            "{} scorecards combined; accuracy {:.4} over {} labeled",
            lines.len(),
            correct as f64 / n as f64,
            n
        ),
    }
    Ok(())
}
