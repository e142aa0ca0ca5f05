//! Rankers: the trained encoder plus VSM, BM25 and DeepWalk baselines.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::{tokenize, Corpus, QuestionRecord};
use crate::encoder::QuestionVec;
use crate::error::{Error, Result};
use crate::hetnet::{sample_walk_set, HetGraph, HetNode};
use crate::linalg::dot;
use crate::model::Model;
use crate::rng;
use crate::sgns::Sgns;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scored {
    pub id: String,
    pub score: f64,
}

/// Results in descending score order, ties broken by ascending id.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RankedList(Vec<Scored>);

impl RankedList {
    /// Wraps items that are already in ranking order.
    pub fn new(items: Vec<Scored>) -> Self {
        Self(items)
    }

    /// Sorts candidates under `(-score, id)`, drops `exclude_id` and keeps `k`.
    pub fn top_k(candidates: impl IntoIterator<Item = Scored>, exclude_id: &str, k: usize) -> Self {
        let mut items: Vec<Scored> = candidates
            .into_iter()
            .filter(|s| s.id != exclude_id)
            .collect();
        items.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.id.cmp(&b.id)));
        items.truncate(k);
        Self(items)
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Scored> {
        self.0.iter()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn ids(&self) -> Vec<&str> {
        self.0.iter().map(|s| s.id.as_str()).collect()
    }

    pub fn into_inner(self) -> Vec<Scored> {
        self.0
    }
}

impl<'a> IntoIterator for &'a RankedList {
    type Item = &'a Scored;
    type IntoIter = std::slice::Iter<'a, Scored>;
    fn into_iter(self) -> Self::IntoIter {
        self.0.iter()
    }
}

/// Anything that ranks indexed questions against a query question.
pub trait Ranker: Sync {
    fn name(&self) -> &str;
    fn rank(&self, query: &QuestionRecord, k: usize) -> Result<RankedList>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RankerKind {
    Vsm,
    Bm25,
    DeepWalk,
    Hnil,
}

impl RankerKind {
    pub const ALL: [RankerKind; 4] = [Self::Vsm, Self::Bm25, Self::DeepWalk, Self::Hnil];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Vsm => "vsm",
            Self::Bm25 => "bm25",
            Self::DeepWalk => "deepwalk",
            Self::Hnil => "hnil",
        }
    }
}

impl fmt::Display for RankerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RankerKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == s.trim())
            .ok_or_else(|| {
                Error::Usage(format!(
                    "unknown ranker {s:?} (expected one of vsm, bm25, deepwalk, hnil)"
                ))
            })
    }
}

// ---------------------------------------------------------------------------
// Encoder index

/// Encoded questions of a corpus, scored by dot product against encoded queries.
#[derive(Debug, Clone)]
pub struct HnilIndex {
    model: Model,
    ids: Vec<String>,
    vectors: Vec<QuestionVec>,
}

impl HnilIndex {
    /// Encodes every question of `corpus` with its asker.
    pub fn build(model: Model, corpus: &Corpus) -> Result<Self> {
        let mut ids = Vec::with_capacity(corpus.questions().len());
        let mut vectors = Vec::with_capacity(corpus.questions().len());
        for record in corpus.question_records() {
            ids.push(record.id.clone());
            vectors.push(model.encode_record(record, true)?);
        }
        Ok(Self { model, ids, vectors })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn vectors(&self) -> &[QuestionVec] {
        &self.vectors
    }

    /// Ranks against an already encoded query.
    pub fn rank_vector(&self, query: &QuestionVec, exclude_id: &str, k: usize) -> Result<RankedList> {
        if query.dim() != self.model.params.dims.question() {
            return Err(Error::DimensionMismatch("query vector dimension".into()));
        }
        Ok(RankedList::top_k(
            self.ids.iter().zip(&self.vectors).map(|(id, v)| Scored {
                id: id.clone(),
                score: dot(&query.v, &v.v),
            }),
            exclude_id,
            k,
        ))
    }

    /// Scales every indexed vector by `c` (used to check ranking invariances).
    pub fn scale(&mut self, c: f64) {
        for v in &mut self.vectors {
            v.v.iter_mut().for_each(|x| *x *= c);
        }
    }
}

impl Ranker for HnilIndex {
    fn name(&self) -> &str {
        "hnil"
    }

    fn rank(&self, query: &QuestionRecord, k: usize) -> Result<RankedList> {
        let q = self.model.encode_record(query, true)?;
        self.rank_vector(&q, &query.id, k)
    }
}

// ---------------------------------------------------------------------------
// Lexical baselines

fn bag_of_words(text: &str) -> HashMap<String, usize> {
    let mut bag = HashMap::new();
    for tok in tokenize(text).unwrap_or_default().into_iter().flatten() {
        *bag.entry(tok).or_insert(0) += 1;
    }
    bag
}

/// Term statistics over the indexed questions.
#[derive(Debug, Clone)]
pub struct TermStats {
    ids: Vec<String>,
    docs: Vec<HashMap<String, usize>>,
    lengths: Vec<usize>,
    df: HashMap<String, usize>,
}

impl TermStats {
    pub fn build<'a>(records: impl IntoIterator<Item = &'a QuestionRecord>) -> Self {
        let mut ids = Vec::new();
        let mut docs = Vec::new();
        let mut lengths = Vec::new();
        let mut df: HashMap<String, usize> = HashMap::new();
        for r in records {
            let bag = bag_of_words(&r.text);
            for term in bag.keys() {
                *df.entry(term.clone()).or_insert(0) += 1;
            }
            lengths.push(bag.values().sum());
            ids.push(r.id.clone());
            docs.push(bag);
        }
        Self {
            ids,
            docs,
            lengths,
            df,
        }
    }

    pub fn num_docs(&self) -> usize {
        self.docs.len()
    }

    pub fn df(&self, term: &str) -> usize {
        self.df.get(term).copied().unwrap_or(0)
    }

    pub fn avg_len(&self) -> f64 {
        if self.lengths.is_empty() {
            0.0
        } else {
            self.lengths.iter().sum::<usize>() as f64 / self.lengths.len() as f64
        }
    }
}

/// tf-idf vectors (raw counts, `ln(N/df)`) compared by cosine.
pub struct VsmIndex {
    stats: TermStats,
    weights: Vec<HashMap<String, f64>>,
    norms: Vec<f64>,
}

impl VsmIndex {
    pub fn build(stats: TermStats) -> Self {
        let weights: Vec<HashMap<String, f64>> = stats
            .docs
            .iter()
            .map(|bag| {
                bag.iter()
                    .map(|(t, &tf)| (t.clone(), tf as f64 * Self::idf(&stats, t)))
                    .collect()
            })
            .collect();
        let norms = weights
            .iter()
            .map(|w| w.values().map(|x| x * x).sum::<f64>().sqrt())
            .collect();
        Self {
            stats,
            weights,
            norms,
        }
    }

    fn idf(stats: &TermStats, term: &str) -> f64 {
        match stats.df(term) {
            0 => 0.0,
            df => (stats.num_docs() as f64 / df as f64).ln(),
        }
    }

    pub fn scores(&self, text: &str) -> Vec<f64> {
        let query: HashMap<String, f64> = bag_of_words(text)
            .into_iter()
            .map(|(t, tf)| {
                let w = tf as f64 * Self::idf(&self.stats, &t);
                (t, w)
            })
            .collect();
        let qnorm = query.values().map(|x| x * x).sum::<f64>().sqrt();
        self.weights
            .iter()
            .zip(&self.norms)
            .map(|(doc, &dnorm)| {
                if qnorm == 0.0 || dnorm == 0.0 {
                    return 0.0;
                }
                let d: f64 = query
                    .iter()
                    .filter_map(|(t, qw)| doc.get(t).map(|dw| qw * dw))
                    .sum();
                d / (qnorm * dnorm)
            })
            .collect()
    }
}

pub fn vsm_rank(index: &VsmIndex, query: &QuestionRecord, k: usize) -> RankedList {
    ranked_from_scores(&index.stats.ids, index.scores(&query.text), &query.id, k)
}

impl Ranker for VsmIndex {
    fn name(&self) -> &str {
        "vsm"
    }

    fn rank(&self, query: &QuestionRecord, k: usize) -> Result<RankedList> {
        Ok(vsm_rank(self, query, k))
    }
}

pub const BM25_K1: f64 = 1.2;
pub const BM25_B: f64 = 0.75;

/// Okapi BM25 with `idf = ln((N - df + 0.5) / (df + 0.5) + 1)`.
pub struct Bm25Index {
    stats: TermStats,
}

impl Bm25Index {
    pub fn build(stats: TermStats) -> Self {
        Self { stats }
    }

    pub fn idf(&self, term: &str) -> f64 {
        let n = self.stats.num_docs() as f64;
        let df = self.stats.df(term) as f64;
        ((n - df + 0.5) / (df + 0.5) + 1.0).ln()
    }

    pub fn scores(&self, text: &str) -> Vec<f64> {
        let terms: Vec<(String, f64)> = bag_of_words(text)
            .into_keys()
            .filter(|t| self.stats.df(t) > 0)
            .map(|t| {
                let idf = self.idf(&t);
                (t, idf)
            })
            .collect();
        let avg = self.stats.avg_len();
        self.stats
            .docs
            .iter()
            .zip(&self.stats.lengths)
            .map(|(doc, &len)| {
                let norm = BM25_K1 * (1.0 - BM25_B + BM25_B * len as f64 / avg);
                terms
                    .iter()
                    .filter_map(|(t, idf)| {
                        doc.get(t).map(|&tf| {
                            let tf = tf as f64;
                            idf * tf * (BM25_K1 + 1.0) / (tf + norm)
                        })
                    })
                    .sum()
            })
            .collect()
    }
}

pub fn bm25_rank(index: &Bm25Index, query: &QuestionRecord, k: usize) -> RankedList {
    ranked_from_scores(&index.stats.ids, index.scores(&query.text), &query.id, k)
}

impl Ranker for Bm25Index {
    fn name(&self) -> &str {
        "bm25"
    }

    fn rank(&self, query: &QuestionRecord, k: usize) -> Result<RankedList> {
        Ok(bm25_rank(self, query, k))
    }
}

fn ranked_from_scores(ids: &[String], scores: Vec<f64>, exclude: &str, k: usize) -> RankedList {
    RankedList::top_k(
        ids.iter().zip(scores).map(|(id, score)| Scored {
            id: id.clone(),
            score,
        }),
        exclude,
        k,
    )
}

// ---------------------------------------------------------------------------
// DeepWalk baseline

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DeepWalkConfig {
    pub dim: usize,
    pub window: usize,
    pub walk_len: usize,
    pub walks: usize,
    pub epochs: usize,
    pub negatives: usize,
    pub lr: f64,
    pub seed: u64,
}

impl Default for DeepWalkConfig {
    fn default() -> Self {
        Self {
            dim: 200,
            window: 2,
            walk_len: 6,
            walks: 10,
            epochs: 5,
            negatives: 5,
            lr: 0.1,
            seed: 0,
        }
    }
}

pub use crate::sgns::Embeddings as NodeEmbeddings;

/// Skip-gram with negative sampling over fresh walks each epoch: for every
/// (centre, context) pair, maximize `log σ(ctxᵀ·centre) + Σ log σ(-negᵀ·centre)`
/// with negatives drawn from node frequencies raised to the 3/4 power.
pub fn deepwalk_train(graph: &HetGraph, cfg: &DeepWalkConfig) -> NodeEmbeddings {
    let mut model = Sgns::new(graph.num_nodes(), cfg.dim, cfg.seed);
    for epoch in 0..cfg.epochs {
        let walk_seed = rng::derive_seed(cfg.seed, &[rng::TAG_DEEPWALK, epoch as u64]);
        let sequences: Vec<Vec<usize>> = sample_walk_set(graph, cfg.walks, cfg.walk_len, walk_seed)
            .iter()
            .map(|w| w.nodes.iter().map(|&v| graph.id(v)).collect())
            .collect();
        let mut rng = rng::stream(cfg.seed, &[rng::TAG_DEEPWALK, epoch as u64, 1]);
        model.epoch(&sequences, cfg.window, cfg.negatives, cfg.lr, &mut rng);
    }
    model.into_embeddings()
}

/// Graph-only ranker over question-node embeddings. The graph must contain the
/// query questions as nodes; only `candidates` are returned.
pub struct DeepWalkIndex {
    embeddings: NodeEmbeddings,
    graph: HetGraph,
    node_of: HashMap<String, usize>,
    candidates: Vec<(String, usize)>,
}

impl DeepWalkIndex {
    /// `graph_corpus` is the corpus the graph was built from; `candidates` are
    /// the ids that may be returned.
    pub fn new<'a>(
        embeddings: NodeEmbeddings,
        graph: HetGraph,
        graph_corpus: &Corpus,
        candidates: impl IntoIterator<Item = &'a str>,
    ) -> Result<Self> {
        let node_of: HashMap<String, usize> = graph_corpus
            .questions()
            .iter()
            .enumerate()
            .map(|(i, q)| (q.record.id.clone(), graph.id(HetNode::Question(i))))
            .collect();
        let candidates = candidates
            .into_iter()
            .map(|id| {
                node_of
                    .get(id)
                    .map(|&n| (id.to_owned(), n))
                    .ok_or_else(|| Error::Data(format!("candidate {id:?} is not a graph node")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            embeddings,
            graph,
            node_of,
            candidates,
        })
    }

    pub fn graph(&self) -> &HetGraph {
        &self.graph
    }

    pub fn embeddings(&self) -> &NodeEmbeddings {
        &self.embeddings
    }
}

/// Ranks candidates by dot product with the query node's embedding.
pub fn deepwalk_rank(index: &DeepWalkIndex, query_id: &str, k: usize) -> Result<RankedList> {
    let &node = index
        .node_of
        .get(query_id)
        .ok_or_else(|| Error::Data(format!("query {query_id:?} is not a node of the graph")))?;
    let q = index.embeddings.input.row(node);
    Ok(RankedList::top_k(
        index.candidates.iter().map(|(id, n)| Scored {
            id: id.clone(),
            score: dot(q, index.embeddings.input.row(*n)),
        }),
        query_id,
        k,
    ))
}

impl Ranker for DeepWalkIndex {
    fn name(&self) -> &str {
        "deepwalk"
    }

    fn rank(&self, query: &QuestionRecord, k: usize) -> Result<RankedList> {
        deepwalk_rank(self, &query.id, k)
    }
}
