//! Flat `key = value` run configuration shared by every command.
//!
//! A configuration file holds one `key = value` pair per line; blank lines and
//! lines starting with `#` are ignored. Command-line flags are applied after
//! the file with the same keys, so they take precedence. Unknown keys and
//! malformed values are usage errors.

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::SynthSpec;
use crate::encoder::Dims;
use crate::error::{Error, Result};
use crate::experiment::ExperimentConfig;
use crate::metrics::DEFAULT_K_EVAL;
use crate::retrieval::{DeepWalkConfig, RankerKind};
use crate::training::Hyper;

/// Every key accepted by [`RunConfig::set`].
pub const KEYS: &[&str] = &[
    // training
    "window",
    "walk_len",
    "walks",
    "iters",
    "margin",
    "lambda",
    "lr",
    "neg",
    "seed",
    "freeze_words",
    "score_norm",
    "dim",
    "word_dim",
    "hidden_dim",
    "user_dim",
    "batch_size",
    "user_pretrain_epochs",
    "word_pretrain_epochs",
    "weight_question_user",
    "weight_question_category",
    "weight_user_user",
    // paths
    "questions",
    "users",
    "checkpoint",
    "out",
    "word2vec",
    // evaluation
    "train_frac",
    "split_seed",
    "rankers",
    "k",
    "k_eval",
    "min_count",
    "threads",
    // synthetic corpora
    "num_topics",
    "groups_per_topic",
    "questions_per_group",
    "users_per_topic_cluster",
    "p_in",
    "p_out",
    "q_align",
    "lexical_overlap",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub hyper: Hyper,
    pub synth: SynthSpec,
    pub questions: Option<PathBuf>,
    pub users: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub word2vec: Option<PathBuf>,
    pub train_frac: f64,
    /// Defaults to `hyper.seed` when unset.
    pub split_seed: Option<u64>,
    pub rankers: Vec<RankerKind>,
    pub k: usize,
    pub k_eval: usize,
    pub min_count: usize,
    pub threads: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            hyper: Hyper::default(),
            synth: SynthSpec::default(),
            questions: None,
            users: None,
            checkpoint: None,
            out: None,
            word2vec: None,
            train_frac: 0.8,
            split_seed: None,
            rankers: RankerKind::ALL.to_vec(),
            k: 10,
            k_eval: DEFAULT_K_EVAL,
            min_count: 1,
            threads: 1,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Usage(format!("invalid value {value:?} for {key}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(Error::Usage(format!(
            "invalid value {value:?} for {key} (expected true or false)"
        ))),
    }
}

/// Parses a comma-separated ranker list such as `vsm,bm25,hnil`.
pub fn parse_rankers(value: &str) -> Result<Vec<RankerKind>> {
    let rankers = value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(RankerKind::from_str)
        .collect::<Result<Vec<_>>>()?;
    if rankers.is_empty() {
        return Err(Error::Usage("the ranker list is empty".into()));
    }
    Ok(rankers)
}

impl RunConfig {
    /// Sets one key. Dashes in `key` are read as underscores.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim().replace('-', "_");
        let value = value.trim();
        let h = &mut self.hyper;
        let s = &mut self.synth;
        let path = || Some(PathBuf::from(value));
        match key.as_str() {
            "window" => h.window = parse(&key, value)?,
            "walk_len" => h.walk_len = parse(&key, value)?,
            "walks" => h.walks = parse(&key, value)?,
            "iters" => h.iters = parse(&key, value)?,
            "margin" => h.margin = parse(&key, value)?,
            "lambda" => h.lambda = parse(&key, value)?,
            "lr" => h.lr = parse(&key, value)?,
            "neg" => h.neg = parse(&key, value)?,
            "seed" => h.seed = parse(&key, value)?,
            "freeze_words" => h.freeze_words = parse_bool(&key, value)?,
            "score_norm" => h.score_norm = parse_bool(&key, value)?,
            "dim" => {
                let total: usize = parse(&key, value)?;
                if total < 2 {
                    return Err(Error::Usage(format!("dim must be at least 2, got {total}")));
                }
                h.dims = Dims::from_total(total);
            }
            "word_dim" => h.dims.word = parse(&key, value)?,
            "hidden_dim" => h.dims.hidden = parse(&key, value)?,
            "user_dim" => h.dims.user = parse(&key, value)?,
            "batch_size" => h.batch_size = parse(&key, value)?,
            "user_pretrain_epochs" => h.user_pretrain_epochs = parse(&key, value)?,
            "word_pretrain_epochs" => h.word_pretrain_epochs = parse(&key, value)?,
            "weight_question_user" => h.edge_weights.question_user = parse(&key, value)?,
            "weight_question_category" => h.edge_weights.question_category = parse(&key, value)?,
            "weight_user_user" => h.edge_weights.user_user = parse(&key, value)?,
            "questions" => self.questions = path(),
            "users" => self.users = path(),
            "checkpoint" => self.checkpoint = path(),
            "out" => self.out = path(),
            "word2vec" => self.word2vec = path(),
            "train_frac" => self.train_frac = parse(&key, value)?,
            "split_seed" => self.split_seed = Some(parse(&key, value)?),
            "rankers" => self.rankers = parse_rankers(value)?,
            "k" => self.k = parse(&key, value)?,
            "k_eval" => self.k_eval = parse(&key, value)?,
            "min_count" => self.min_count = parse(&key, value)?,
            "threads" => self.threads = parse(&key, value)?,
            "num_topics" => s.num_topics = parse(&key, value)?,
            "groups_per_topic" => s.groups_per_topic = parse(&key, value)?,
            "questions_per_group" => s.questions_per_group = parse(&key, value)?,
            "users_per_topic_cluster" => s.users_per_topic_cluster = parse(&key, value)?,
            "p_in" => s.p_in = parse(&key, value)?,
            "p_out" => s.p_out = parse(&key, value)?,
            "q_align" => s.q_align = parse(&key, value)?,
            "lexical_overlap" => s.lexical_overlap = parse(&key, value)?,
            _ => return Err(Error::Usage(format!("unknown configuration key {key:?}"))),
        }
        Ok(())
    }

    /// Applies every `key = value` line of `text`.
    pub fn apply_text(&mut self, text: &str, origin: &str) -> Result<()> {
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Usage(format!("{origin}:{}: expected key = value, got {line:?}", i + 1))
            })?;
            self.set(key, value)
                .map_err(|e| Error::Usage(format!("{origin}:{}: {e}", i + 1)))?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Usage(format!("cannot read config {}: {e}", path.display())))?;
        self.apply_text(&text, &path.display().to_string())
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply_text(text, "config")?;
        Ok(cfg)
    }

    pub fn split_seed(&self) -> u64 {
        self.split_seed.unwrap_or(self.hyper.seed)
    }

    /// Both corpus paths, or a usage error naming the missing one.
    pub fn corpus_paths(&self) -> Result<(&Path, &Path)> {
        fn need<'a>(p: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path> {
            p.as_deref()
                .ok_or_else(|| Error::Usage(format!("missing --{flag} <path>")))
        }
        Ok((need(&self.questions, "questions")?, need(&self.users, "users")?))
    }

    pub fn experiment(&self) -> ExperimentConfig {
        ExperimentConfig {
            hyper: self.hyper.clone(),
            train_frac: self.train_frac,
            split_seed: self.split_seed(),
            k_eval: self.k_eval,
            rankers: self.rankers.clone(),
            deepwalk: None::<DeepWalkConfig>,
        }
    }
}
