//! End-to-end runs: split, train, index, evaluate, compare and sweep.

use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::{train_test_split, Corpus, QuestionRecord, Split};
use crate::encoder::Dims;
use crate::error::{Error, Result};
use crate::hetnet::HetGraph;
use crate::metrics::{evaluate, judgments_from_groups, EvalReport, DEFAULT_K_EVAL};
use crate::model::Model;
use crate::retrieval::{
    deepwalk_train, Bm25Index, DeepWalkConfig, DeepWalkIndex, HnilIndex, Ranker, RankerKind,
    TermStats, VsmIndex,
};
use crate::training::{train, Hyper, TrainReport};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub hyper: Hyper,
    pub train_frac: f64,
    /// Seed of the train/test split; independent of the training seed.
    pub split_seed: u64,
    pub k_eval: usize,
    pub rankers: Vec<RankerKind>,
    /// Overrides the DeepWalk settings otherwise derived from `hyper`.
    pub deepwalk: Option<DeepWalkConfig>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            hyper: Hyper::default(),
            train_frac: 0.8,
            split_seed: 0,
            k_eval: DEFAULT_K_EVAL,
            rankers: RankerKind::ALL.to_vec(),
            deepwalk: None,
        }
    }
}

impl ExperimentConfig {
    /// DeepWalk uses the same walk geometry, total dimension, epoch count and
    /// seed as the HNIL run it is compared against.
    pub fn deepwalk_config(&self) -> DeepWalkConfig {
        self.deepwalk.clone().unwrap_or_else(|| DeepWalkConfig {
            dim: self.hyper.dims.question(),
            window: self.hyper.window,
            walk_len: self.hyper.walk_len,
            walks: self.hyper.walks,
            epochs: self.hyper.iters,
            lr: self.hyper.lr,
            seed: self.hyper.seed,
            ..DeepWalkConfig::default()
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSummary {
    pub train: usize,
    pub test: usize,
    pub discarded: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub split: SplitSummary,
    pub train: Option<TrainReport>,
    pub reports: Vec<EvalReport>,
}

impl ExperimentReport {
    pub fn report(&self, ranker: RankerKind) -> Option<&EvalReport> {
        self.reports.iter().find(|r| r.ranker == ranker.as_str())
    }

    pub fn table(&self) -> String {
        comparison_table(&self.reports)
    }
}

/// The held-out questions of a split, as raw records.
pub fn test_records(split: &Split) -> Vec<QuestionRecord> {
    split.test.iter().map(|q| q.record.clone()).collect()
}

/// Corpus containing the training questions and the held-out queries, for the
/// transductive DeepWalk baseline.
pub fn transductive_corpus(corpus: &Corpus, split: &Split) -> Corpus {
    let mut keep: Vec<usize> = split
        .train
        .questions()
        .iter()
        .chain(&split.test)
        .map(|q| corpus.question_ordinal(q.id()).expect("split questions come from the corpus"))
        .collect();
    keep.sort_unstable();
    corpus.subset(&keep)
}

/// Builds the requested ranker over the training part of `split`. HNIL needs
/// a trained `model`; DeepWalk trains its own embeddings on the transductive graph.
pub fn build_ranker(
    kind: RankerKind,
    corpus: &Corpus,
    split: &Split,
    model: Option<&Model>,
    cfg: &ExperimentConfig,
) -> Result<Box<dyn Ranker>> {
    Ok(match kind {
        RankerKind::Vsm => Box::new(VsmIndex::build(TermStats::build(
            split.train.question_records(),
        ))),
        RankerKind::Bm25 => Box::new(Bm25Index::build(TermStats::build(
            split.train.question_records(),
        ))),
        RankerKind::Hnil => {
            let model = model.ok_or_else(|| {
                Error::Usage("the hnil ranker needs a trained model".into())
            })?;
            Box::new(HnilIndex::build(model.clone(), &split.train)?)
        }
        RankerKind::DeepWalk => {
            let full = transductive_corpus(corpus, split);
            let graph = HetGraph::build(&full);
            let embeddings = deepwalk_train(&graph, &cfg.deepwalk_config());
            let candidates: Vec<&str> = split.train.questions().iter().map(|q| q.id()).collect();
            Box::new(DeepWalkIndex::new(embeddings, graph, &full, candidates)?)
        }
    })
}

/// Evaluates the requested rankers on one split. `model` is used for HNIL
/// when given; otherwise HNIL is trained on the split's training part.
pub fn run_on_split(
    corpus: &Corpus,
    split: &Split,
    cfg: &ExperimentConfig,
    model: Option<&Model>,
) -> Result<ExperimentReport> {
    let queries = test_records(split);
    if queries.is_empty() {
        return Err(Error::Data("the split has no held-out queries".into()));
    }
    let judgments = judgments_from_groups(&split.train, &queries);
    let mut trained = None;
    let mut train_report = None;
    if cfg.rankers.contains(&RankerKind::Hnil) && model.is_none() {
        let (params, report) = train(&split.train, &cfg.hyper)?;
        trained = Some(Model::for_corpus(params, &split.train, cfg.hyper.score_norm)?);
        train_report = Some(report);
    }
    let model = model.or(trained.as_ref());
    let mut reports = Vec::with_capacity(cfg.rankers.len());
    for &kind in &cfg.rankers {
        let ranker = build_ranker(kind, corpus, split, model, cfg)?;
        reports.push(evaluate(ranker.as_ref(), &queries, &judgments, cfg.k_eval)?);
    }
    Ok(ExperimentReport {
        split: SplitSummary {
            train: split.train.questions().len(),
            test: split.test.len(),
            discarded: split.discarded,
        },
        train: train_report,
        reports,
    })
}

/// Splits `corpus`, trains HNIL on the training part and evaluates every ranker.
pub fn run_experiment(corpus: &Corpus, cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let split = train_test_split(corpus, cfg.train_frac, cfg.split_seed)?;
    run_on_split(corpus, &split, cfg, None)
}

/// Aligned text table: one row per ranker, MAP/P@1/P@5/MRR columns.
pub fn comparison_table(reports: &[EvalReport]) -> String {
    let mut out = format!(
        "{:<10} {:>7} {:>7} {:>7} {:>7}\n",
        "ranker", "MAP", "P@1", "P@5", "MRR"
    );
    for r in reports {
        let _ = writeln!(
            out,
            "{:<10} {:>7.4} {:>7.4} {:>7.4} {:>7.4}",
            r.ranker, r.map, r.p1, r.p5, r.mrr
        );
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    WalkLen,
    Walks,
    Dim,
}

impl SweepParam {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::WalkLen => "walk_len",
            Self::Walks => "walks",
            Self::Dim => "dim",
        }
    }

    /// Copy of `hyper` with this parameter set to `value`.
    pub fn apply(self, hyper: &Hyper, value: usize) -> Hyper {
        let mut h = hyper.clone();
        match self {
            Self::WalkLen => h.walk_len = value,
            Self::Walks => h.walks = value,
            Self::Dim => h.dims = Dims::from_total(value),
        }
        h
    }
}

impl FromStr for SweepParam {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "walk_len" | "walk-len" => Ok(Self::WalkLen),
            "walks" => Ok(Self::Walks),
            "dim" => Ok(Self::Dim),
            other => Err(Error::Usage(format!(
                "cannot sweep {other:?} (expected walk_len, walks or dim)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: usize,
    pub map: f64,
    pub p1: f64,
    pub p5: f64,
    pub mrr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub param: SweepParam,
    pub rows: Vec<SweepRow>,
}

impl SweepReport {
    pub fn table(&self) -> String {
        let mut out = format!(
            "{:<10} {:>7} {:>7} {:>7} {:>7}\n",
            self.param.as_str(),
            "MAP",
            "P@1",
            "P@5",
            "MRR"
        );
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{:<10} {:>7.4} {:>7.4} {:>7.4} {:>7.4}",
                r.value, r.map, r.p1, r.p5, r.mrr
            );
        }
        out
    }
}

/// Retrains and evaluates HNIL once per value on a single fixed split.
pub fn sweep(
    corpus: &Corpus,
    cfg: &ExperimentConfig,
    param: SweepParam,
    values: &[usize],
) -> Result<SweepReport> {
    if values.is_empty() {
        return Err(Error::Usage("sweep needs at least one value".into()));
    }
    let split = train_test_split(corpus, cfg.train_frac, cfg.split_seed)?;
    let mut rows = Vec::with_capacity(values.len());
    for &value in values {
        let run = ExperimentConfig {
            hyper: param.apply(&cfg.hyper, value),
            rankers: vec![RankerKind::Hnil],
            ..cfg.clone()
        };
        run.hyper.validate()?;
        let report = run_on_split(corpus, &split, &run, None)?;
        let r = report.report(RankerKind::Hnil).expect("hnil was requested");
        rows.push(SweepRow {
            value,
            map: r.map,
            p1: r.p1,
            p5: r.p5,
            mrr: r.mrr,
        });
    }
    Ok(SweepReport { param, rows })
}
