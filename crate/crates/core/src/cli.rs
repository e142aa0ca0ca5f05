//! The `hnil` command line: argument parsing and one function per subcommand.
//!
//! Every subcommand prints a single JSON document on standard output. Errors
//! are reported as one line on standard error, and the exit code is 0 on
//! success, 1 for usage errors, 2 for data errors and 3 for numerical failures.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};

use crate::checkpoint::{load_checkpoint, save_for_corpus};
use crate::config::RunConfig;
use crate::corpus::{generate_synthetic, load_corpus, train_test_split, Corpus, QuestionRecord};
use crate::encoder::{load_word2vec, Dims};
use crate::error::{Error, Result};
use crate::experiment::{run_on_split, sweep, SweepParam};
use crate::gradcheck::{gradcheck, GradcheckSpec};
use crate::retrieval::{HnilIndex, RankerKind};
use crate::training::{initial_params, train_from};

#[derive(Debug, Parser)]
#[command(name = "hnil", version, about = "Question retrieval over question/user/category networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic corpus.
    Synth(Common),
    /// Train on the training part of a corpus split and write a checkpoint.
    Train(Common),
    /// Evaluate rankers on the held-out part of a corpus split.
    Eval(Common),
    /// Compare analytic gradients against finite differences.
    Gradcheck(GradcheckArgs),
    /// Retrain and evaluate HNIL over a list of values of one parameter.
    Sweep(SweepArgs),
    /// Rank the questions of a corpus against a query text.
    Query(QueryArgs),
}

/// Flags shared by the corpus-level subcommands. Each flag sets the
/// configuration key of the same name after `--config` has been read.
#[derive(Debug, Args)]
struct Common {
    /// Flat `key = value` configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    questions: Option<String>,
    #[arg(long)]
    users: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    split_seed: Option<String>,
    #[arg(long)]
    train_frac: Option<String>,
    #[arg(long)]
    iters: Option<String>,
    #[arg(long)]
    walk_len: Option<String>,
    #[arg(long)]
    walks: Option<String>,
    #[arg(long)]
    window: Option<String>,
    /// Total question-vector dimension, split evenly between text and asker.
    #[arg(long)]
    dim: Option<String>,
    #[arg(long)]
    margin: Option<String>,
    #[arg(long)]
    lambda: Option<String>,
    #[arg(long)]
    lr: Option<String>,
    #[arg(long)]
    neg: Option<String>,
    /// Comma-separated subset of vsm, bm25, deepwalk and hnil.
    #[arg(long)]
    rankers: Option<String>,
    #[arg(long)]
    k: Option<String>,
    #[arg(long)]
    k_eval: Option<String>,
    #[arg(long)]
    min_count: Option<String>,
    #[arg(long)]
    checkpoint: Option<String>,
    #[arg(long)]
    out: Option<String>,
    #[arg(long)]
    word2vec: Option<String>,
    /// Worker threads for walk sampling and evaluation.
    #[arg(long)]
    threads: Option<String>,
    #[arg(long)]
    freeze_words: bool,
    #[arg(long)]
    no_score_norm: bool,
    #[arg(long)]
    num_topics: Option<String>,
    #[arg(long)]
    groups_per_topic: Option<String>,
    #[arg(long)]
    questions_per_group: Option<String>,
    #[arg(long)]
    users_per_topic_cluster: Option<String>,
    #[arg(long)]
    p_in: Option<String>,
    #[arg(long)]
    p_out: Option<String>,
    #[arg(long)]
    q_align: Option<String>,
    #[arg(long)]
    lexical_overlap: Option<String>,
    /// Any other configuration key, as `key=value`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Debug, Args)]
struct GradcheckArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Word, hidden and user dimension.
    #[arg(long, default_value_t = 8)]
    dim: usize,
    #[arg(long, default_value_t = 50)]
    vocab: usize,
    #[arg(long, default_value_t = 20)]
    users: usize,
    /// Halve the gradient of one tensor to check that the comparison notices.
    #[arg(long)]
    perturb_backward: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SweepArgs {
    /// One of walk_len, walks or dim.
    #[arg(long)]
    param: String,
    /// Comma-separated values.
    #[arg(long)]
    values: String,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
struct QueryArgs {
    /// Query text.
    #[arg(long)]
    text: String,
    /// Asker id; unknown ids contribute a zero user part.
    #[arg(long)]
    asker: Option<String>,
    #[command(flatten)]
    common: Common,
}

impl Common {
    fn pairs(&self) -> Vec<(&'static str, &str)> {
        let options = [
            ("questions", &self.questions),
            ("users", &self.users),
            ("seed", &self.seed),
            ("split_seed", &self.split_seed),
            ("train_frac", &self.train_frac),
            ("iters", &self.iters),
            ("walk_len", &self.walk_len),
            ("walks", &self.walks),
            ("window", &self.window),
            ("dim", &self.dim),
            ("margin", &self.margin),
            ("lambda", &self.lambda),
            ("lr", &self.lr),
            ("neg", &self.neg),
            ("rankers", &self.rankers),
            ("k", &self.k),
            ("k_eval", &self.k_eval),
            ("min_count", &self.min_count),
            ("checkpoint", &self.checkpoint),
            ("out", &self.out),
            ("word2vec", &self.word2vec),
            ("threads", &self.threads),
            ("num_topics", &self.num_topics),
            ("groups_per_topic", &self.groups_per_topic),
            ("questions_per_group", &self.questions_per_group),
            ("users_per_topic_cluster", &self.users_per_topic_cluster),
            ("p_in", &self.p_in),
            ("p_out", &self.p_out),
            ("q_align", &self.q_align),
            ("lexical_overlap", &self.lexical_overlap),
        ];
        let mut pairs: Vec<(&'static str, &str)> = options
            .into_iter()
            .filter_map(|(k, v)| v.as_deref().map(|v| (k, v)))
            .collect();
        if self.freeze_words {
            pairs.push(("freeze_words", "true"));
        }
        if self.no_score_norm {
            pairs.push(("score_norm", "false"));
        }
        pairs
    }

    fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = RunConfig::default();
        if let Some(path) = &self.config {
            cfg.apply_file(path)?;
        }
        for (key, value) in self.pairs() {
            cfg.set(key, value)?;
        }
        for kv in &self.set {
            let (key, value) = kv
                .split_once('=')
                .ok_or_else(|| Error::Usage(format!("--set expects key=value, got {kv:?}")))?;
            cfg.set(key, value)?;
        }
        cfg.hyper.validate()?;
        Ok(cfg)
    }
}

/// Parses `args` (program name first), runs the subcommand and returns the
/// process exit code. JSON goes to `out`, diagnostics to `err`.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = i32::from(e.use_stderr());
            let text = e.render().to_string();
            if code == 0 {
                let _ = write!(out, "{text}");
            } else {
                let first = text.lines().next().unwrap_or("invalid arguments");
                let _ = writeln!(err, "{first}");
            }
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(outcome) => {
            let _ = writeln!(out, "{}", outcome.json);
            if let Some(message) = &outcome.failure {
                let _ = writeln!(err, "error: {message}");
                return 3;
            }
            0
        }
        Err(e) => {
            let _ = writeln!(err, "error: {}", e.to_string().replace('\n', " "));
            e.exit_code()
        }
    }
}

struct Outcome {
    json: String,
    failure: Option<String>,
}

impl Outcome {
    fn ok(value: &impl Serialize) -> Result<Self> {
        Ok(Self {
            json: to_json(value)?,
            failure: None,
        })
    }
}

fn to_json(value: &impl Serialize) -> Result<String> {
    serde_json::to_string_pretty(value).map_err(|e| Error::Data(format!("cannot serialize output: {e}")))
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::Data(format!("cannot write {}: {e}", path.display())))
}

fn dispatch(command: Command) -> Result<Outcome> {
    match command {
        Command::Synth(c) => cmd_synth(&c.resolve()?),
        Command::Train(c) => with_threads(&c.resolve()?, cmd_train),
        Command::Eval(c) => with_threads(&c.resolve()?, cmd_eval),
        Command::Gradcheck(a) => cmd_gradcheck(&a),
        Command::Sweep(a) => {
            let cfg = a.common.resolve()?;
            with_threads(&cfg, |cfg| cmd_sweep(cfg, &a.param, &a.values))
        }
        Command::Query(a) => {
            let cfg = a.common.resolve()?;
            with_threads(&cfg, |cfg| cmd_query(cfg, &a.text, a.asker.as_deref()))
        }
    }
}

fn with_threads(cfg: &RunConfig, f: impl FnOnce(&RunConfig) -> Result<Outcome> + Send) -> Result<Outcome> {
    if cfg.threads == 0 {
        return Err(Error::Usage("threads must be at least 1".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .map_err(|e| Error::Usage(format!("cannot start {} threads: {e}", cfg.threads)))?;
    pool.install(|| f(cfg))
}

fn load(cfg: &RunConfig) -> Result<Corpus> {
    let (questions, users) = cfg.corpus_paths()?;
    for p in [questions, users] {
        if !p.exists() {
            return Err(Error::Usage(format!("no such file: {}", p.display())));
        }
    }
    load_corpus(questions, users, cfg.min_count)
}

fn corpus_stats(corpus: &Corpus) -> Value {
    let groups: std::collections::BTreeSet<_> = corpus
        .question_records()
        .filter_map(|q| q.dup_group.as_deref())
        .collect();
    let friendships: usize = (0..corpus.users().len())
        .map(|u| corpus.friends_of(u).len())
        .sum::<usize>()
        / 2;
    json!({
        "questions": corpus.questions().len(),
        "users": corpus.users().len(),
        "categories": corpus.categories().len(),
        "dup_groups": groups.len(),
        "friendships": friendships,
        "vocab": corpus.vocab().len(),
    })
}

/// Writes `questions.jsonl` and `users.jsonl` into `--out` (default: current
/// directory) unless `--questions` / `--users` name the files directly.
fn cmd_synth(cfg: &RunConfig) -> Result<Outcome> {
    let corpus = generate_synthetic(&cfg.synth, cfg.hyper.seed)?;
    let dir = cfg.out.clone().unwrap_or_else(|| PathBuf::from("."));
    if !dir.is_dir() {
        fs::create_dir_all(&dir).map_err(|e| Error::Data(format!("cannot create {}: {e}", dir.display())))?;
    }
    let questions = cfg.questions.clone().unwrap_or_else(|| dir.join("questions.jsonl"));
    let users = cfg.users.clone().unwrap_or_else(|| dir.join("users.jsonl"));
    corpus.write_jsonl(&questions, &users)?;
    Outcome::ok(&json!({
        "seed": cfg.hyper.seed,
        "spec": cfg.synth,
        "questions_path": questions,
        "users_path": users,
        "stats": corpus_stats(&corpus),
    }))
}

fn cmd_train(cfg: &RunConfig) -> Result<Outcome> {
    let checkpoint = cfg
        .checkpoint
        .as_deref()
        .ok_or_else(|| Error::Usage("missing --checkpoint <path>".into()))?;
    let corpus = load(cfg)?;
    let split = train_test_split(&corpus, cfg.train_frac, cfg.split_seed())?;
    let mut params = initial_params(&split.train, &cfg.hyper);
    let coverage = match &cfg.word2vec {
        Some(path) => Some(load_word2vec(&mut params, path, split.train.vocab())?),
        None => None,
    };
    let (params, report) = train_from(&split.train, &cfg.hyper, params)?;
    save_for_corpus(&params, &cfg.hyper, &split.train, checkpoint)?;
    let value = json!({
        "checkpoint": checkpoint,
        "train_questions": split.train.questions().len(),
        "test_questions": split.test.len(),
        "parameters": params.num_parameters(),
        "word2vec_coverage": coverage.map(|c| c.fraction()),
        "losses": report.losses(),
        "report": report,
    });
    if let Some(out) = &cfg.out {
        write_file(out, &to_json(&value)?)?;
    }
    Outcome::ok(&value)
}

fn cmd_eval(cfg: &RunConfig) -> Result<Outcome> {
    let corpus = load(cfg)?;
    let split = train_test_split(&corpus, cfg.train_frac, cfg.split_seed())?;
    let model = if cfg.rankers.contains(&RankerKind::Hnil) {
        let path = cfg.checkpoint.as_deref().ok_or_else(|| {
            Error::Usage("the hnil ranker needs --checkpoint (or drop it from --rankers)".into())
        })?;
        Some(load_checkpoint(path)?.into_model()?)
    } else {
        None
    };
    let report = run_on_split(&corpus, &split, &cfg.experiment(), model.as_ref())?;
    let table = report.table();
    if let Some(out) = &cfg.out {
        write_file(out, &to_json(&report)?)?;
        write_file(&out.with_extension("txt"), &table)?;
    }
    Outcome::ok(&json!({
        "split": report.split,
        "reports": report.reports,
        "table": table,
    }))
}

fn cmd_gradcheck(a: &GradcheckArgs) -> Result<Outcome> {
    if a.dim == 0 || a.vocab < 2 || a.users == 0 {
        return Err(Error::Usage("gradcheck needs dim >= 1, vocab >= 2 and users >= 1".into()));
    }
    let spec = GradcheckSpec {
        dims: Dims {
            word: a.dim,
            hidden: a.dim,
            user: a.dim,
        },
        vocab_size: a.vocab,
        users: a.users,
        perturb_backward: a.perturb_backward,
        ..GradcheckSpec::default()
    };
    let report = gradcheck(&spec, a.seed)?;
    let json = to_json(&report)?;
    if let Some(out) = &a.out {
        write_file(out, &json)?;
    }
    let failure = (!report.passed).then(|| {
        format!(
            "max relative error {:.3e} exceeds tolerance {:.0e}",
            report.max_rel_error, report.tolerance
        )
    });
    Ok(Outcome { json, failure })
}

fn cmd_sweep(cfg: &RunConfig, param: &str, values: &str) -> Result<Outcome> {
    let param: SweepParam = param.parse()?;
    let values = values
        .split(',')
        .map(|v| {
            v.trim()
                .parse::<usize>()
                .map_err(|_| Error::Usage(format!("invalid sweep value {v:?}")))
        })
        .collect::<Result<Vec<_>>>()?;
    let corpus = load(cfg)?;
    let report = sweep(&corpus, &cfg.experiment(), param, &values)?;
    let table = report.table();
    if let Some(out) = &cfg.out {
        write_file(out, &to_json(&report)?)?;
        write_file(&out.with_extension("txt"), &table)?;
    }
    Outcome::ok(&json!({
        "param": report.param,
        "rows": report.rows,
        "table": table,
    }))
}

fn cmd_query(cfg: &RunConfig, text: &str, asker: Option<&str>) -> Result<Outcome> {
    let path = cfg
        .checkpoint
        .as_deref()
        .ok_or_else(|| Error::Usage("missing --checkpoint <path>".into()))?;
    let model = load_checkpoint(path)?.into_model()?;
    let corpus = load(cfg)?;
    let index = HnilIndex::build(model, &corpus)?;
    let query = QuestionRecord {
        id: String::new(),
        text: text.to_owned(),
        category: String::new(),
        asker: asker.unwrap_or_default().to_owned(),
        dup_group: None,
    };
    let ranked = index.rank_vector(&index.model().encode_record(&query, true)?, "", cfg.k)?;
    Outcome::ok(&ranked)
}
