//! Walk-based training: triplets from walk windows, the hinge/user node loss,
//! the L2-regularized objective, exact gradients and AdaGrad updates.

use std::collections::BTreeMap;
use std::time::Instant;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::encoder::{self, init_params, Dims, ModelParams};
use crate::error::{Error, Result};
use crate::hetnet::{extract_windows, sample_walk_set, EdgeWeights, HetGraph, HetNode, Window};
use crate::linalg::{axpy, dot, norm};
use crate::retrieval::{deepwalk_train, DeepWalkConfig};
use crate::sgns::Sgns;
use crate::rng;

pub const ADAGRAD_EPS: f64 = 1e-8;
/// Below this distance the user-distance gradient is taken to be zero.
pub const USER_DIST_EPS: f64 = 1e-12;
/// Context radius, in tokens, of word-embedding pretraining.
pub const WORD_WINDOW: usize = 5;
pub const SGNS_NEGATIVES: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Hyper {
    pub window: usize,
    pub walk_len: usize,
    pub walks: usize,
    pub iters: usize,
    pub margin: f64,
    pub lambda: f64,
    pub lr: f64,
    pub neg: usize,
    pub seed: u64,
    pub freeze_words: bool,
    pub score_norm: bool,
    pub dims: Dims,
    pub batch_size: usize,
    pub edge_weights: EdgeWeights,
    /// Skip-gram epochs over graph walks used to initialize user embeddings;
    /// 0 keeps the random initialization.
    pub user_pretrain_epochs: usize,
    /// Skip-gram epochs over the question texts used to initialize word
    /// embeddings; 0 keeps the random initialization.
    pub word_pretrain_epochs: usize,
}

impl Default for Hyper {
    fn default() -> Self {
        Self {
            window: 2,
            walk_len: 6,
            walks: 10,
            iters: 5,
            margin: 0.5,
            lambda: 1e-4,
            lr: 0.1,
            neg: 2,
            seed: 0,
            freeze_words: false,
            score_norm: true,
            dims: Dims::default(),
            batch_size: 32,
            edge_weights: EdgeWeights::default(),
            user_pretrain_epochs: 5,
            word_pretrain_epochs: 0,
        }
    }
}

impl Hyper {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Usage(m));
        if !(self.margin > 0.0 && self.margin < 1.0) {
            return fail(format!("margin must lie in (0, 1), got {}", self.margin));
        }
        if self.lambda.is_nan() || self.lambda < 0.0 {
            return fail(format!("lambda must be non-negative, got {}", self.lambda));
        }
        if self.lr.is_nan() || self.lr <= 0.0 {
            return fail(format!("learning rate must be positive, got {}", self.lr));
        }
        if self.walk_len < 2 {
            return fail(format!("walk length must be at least 2, got {}", self.walk_len));
        }
        if self.window < 1 {
            return fail("window radius must be at least 1".into());
        }
        if self.walks < 1 || self.batch_size < 1 {
            return fail("walks per vertex and batch size must be positive".into());
        }
        let d = self.dims;
        if d.word == 0 || d.hidden == 0 || d.user == 0 {
            return fail("embedding dimensions must be positive".into());
        }
        Ok(())
    }
}

/// `positive` should score higher than `negative` against `anchor`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Triplet {
    pub anchor: usize,
    pub positive: usize,
    pub negative: usize,
}

/// Triplets for a question-centred window.
///
/// Positives are context questions of the centre's category and negatives are
/// context questions of other categories, topped up to `k` with questions drawn
/// uniformly from other categories of the whole corpus. Every positive is paired
/// with every negative.
pub fn build_triplets(window: &Window, corpus: &Corpus, k: usize, rng: &mut rng::Rng) -> Vec<Triplet> {
    let Some(anchor) = window.center.as_question() else {
        return Vec::new();
    };
    let questions = corpus.questions();
    let category = questions[anchor].category;
    let mut positives = Vec::new();
    let mut negatives = Vec::new();
    for q in window.context.iter().filter_map(|n| n.as_question()) {
        if q == anchor {
            continue;
        }
        let bucket = if questions[q].category == category {
            &mut positives
        } else {
            &mut negatives
        };
        if !bucket.contains(&q) {
            bucket.push(q);
        }
    }
    if positives.is_empty() {
        return Vec::new();
    }
    let available = questions.iter().filter(|q| q.category != category).count();
    let target = k.min(available);
    while negatives.len() < target {
        let q = rng.random_range(0..questions.len());
        if questions[q].category != category && !negatives.contains(&q) {
            negatives.push(q);
        }
    }
    positives
        .iter()
        .flat_map(|&positive| {
            negatives.iter().map(move |&negative| Triplet {
                anchor,
                positive,
                negative,
            })
        })
        .collect()
}

pub fn hinge(margin: f64, s_pos: f64, s_neg: f64) -> f64 {
    (margin + s_neg - s_pos).max(0.0)
}

/// Loss inputs derived from one window.
#[derive(Debug, Clone, PartialEq)]
pub enum NodeTerm {
    Question { triplets: Vec<Triplet> },
    User { center: usize, context: Vec<usize> },
    Category,
}

impl NodeTerm {
    pub fn from_window(window: &Window, corpus: &Corpus, k: usize, rng: &mut rng::Rng) -> Self {
        match window.center {
            HetNode::Question(_) => NodeTerm::Question {
                triplets: build_triplets(window, corpus, k, rng),
            },
            HetNode::User(u) => NodeTerm::User {
                center: u,
                context: window.context.iter().filter_map(|n| n.as_user()).collect(),
            },
            HetNode::Category(_) => NodeTerm::Category,
        }
    }
}

/// A mini-batch of windows with their negatives already drawn, so that loss
/// and gradient evaluations see identical terms.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Batch {
    pub terms: Vec<NodeTerm>,
    /// Question-centred windows that had positives but no possible negative.
    pub starved: usize,
}

impl Batch {
    pub fn prepare(windows: &[Window], corpus: &Corpus, hyper: &Hyper, rng: &mut rng::Rng) -> Self {
        let single_category = corpus.categories().len() < 2;
        let mut starved = 0;
        let terms = windows
            .iter()
            .map(|w| {
                let term = NodeTerm::from_window(w, corpus, hyper.neg, rng);
                if single_category && matches!(term, NodeTerm::Question { .. }) {
                    let has_positive = w.context.iter().any(|n| {
                        n.as_question()
                            .is_some_and(|q| Some(q) != w.center.as_question())
                    });
                    starved += usize::from(has_positive);
                }
                term
            })
            .collect();
        Self { terms, starved }
    }

    pub fn triplets(&self) -> usize {
        self.terms
            .iter()
            .map(|t| match t {
                NodeTerm::Question { triplets } => triplets.len(),
                _ => 0,
            })
            .sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossParts {
    pub hinge: f64,
    pub user: f64,
    pub regularizer: f64,
}

impl LossParts {
    pub fn total(&self) -> f64 {
        self.hinge + self.user + self.regularizer
    }
}

/// Loss of each window centre: summed triplet hinges for questions, summed
/// distances to context users for users, zero for categories.
pub fn node_loss(params: &ModelParams, term: &NodeTerm, corpus: &Corpus, hyper: &Hyper) -> Result<f64> {
    let batch = Batch {
        terms: vec![term.clone()],
        starved: 0,
    };
    let parts = objective(params, &batch, corpus, hyper, 0.0, None)?;
    Ok(parts.hinge + parts.user)
}

/// Node losses of the batch plus `λ‖Θ‖²`.
pub fn total_loss(params: &ModelParams, batch: &Batch, corpus: &Corpus, hyper: &Hyper) -> Result<LossParts> {
    objective(params, batch, corpus, hyper, 1.0, None)
}

/// Exact gradient of [`total_loss`] with respect to every trainable tensor.
pub fn backward(
    params: &ModelParams,
    batch: &Batch,
    corpus: &Corpus,
    hyper: &Hyper,
) -> Result<(LossParts, ModelParams)> {
    let mut grads = params.zeros_like();
    let parts = objective(params, batch, corpus, hyper, 1.0, Some(&mut grads))?;
    Ok((parts, grads))
}

/// Loss with the regularizer weighted by `reg_scale`; accumulates gradients
/// into `grads` when given.
pub(crate) fn objective(
    params: &ModelParams,
    batch: &Batch,
    corpus: &Corpus,
    hyper: &Hyper,
    reg_scale: f64,
    mut grads: Option<&mut ModelParams>,
) -> Result<LossParts> {
    let questions = corpus.questions();
    let mut slots: BTreeMap<usize, usize> = BTreeMap::new();
    for term in &batch.terms {
        if let NodeTerm::Question { triplets } = term {
            for t in triplets {
                for q in [t.anchor, t.positive, t.negative] {
                    let next = slots.len();
                    slots.entry(q).or_insert(next);
                }
            }
        }
    }
    let mut traces = vec![None; slots.len()];
    for (&q, &slot) in &slots {
        let question = &questions[q];
        traces[slot] = Some(encoder::forward_question(
            params,
            &question.sentences,
            Some(question.asker),
            hyper.score_norm,
        )?);
    }
    let traces: Vec<_> = traces.into_iter().map(|t| t.expect("every slot encoded")).collect();
    let dim = params.dims.question();
    let mut d_out = vec![vec![0.0; dim]; if grads.is_some() { traces.len() } else { 0 }];

    let mut parts = LossParts::default();
    for term in &batch.terms {
        match term {
            NodeTerm::Question { triplets } => {
                for t in triplets {
                    let (a, p, n) = (slots[&t.anchor], slots[&t.positive], slots[&t.negative]);
                    let (va, vp, vn) = (&traces[a].out, &traces[p].out, &traces[n].out);
                    let violation = hyper.margin + dot(va, vn) - dot(va, vp);
                    if violation > 0.0 {
                        parts.hinge += violation;
                        if grads.is_some() {
                            let (va, vp, vn) = (va.clone(), vp.clone(), vn.clone());
                            axpy(1.0, &vn, &mut d_out[a]);
                            axpy(-1.0, &vp, &mut d_out[a]);
                            axpy(-1.0, &va, &mut d_out[p]);
                            axpy(1.0, &va, &mut d_out[n]);
                        }
                    }
                }
            }
            NodeTerm::User { center, context } => {
                for &other in context {
                    let diff: Vec<f64> = params
                        .user_emb
                        .row(*center)
                        .iter()
                        .zip(params.user_emb.row(other))
                        .map(|(a, b)| a - b)
                        .collect();
                    let d = norm(&diff);
                    parts.user += d;
                    if let Some(g) = grads.as_deref_mut() {
                        if d >= USER_DIST_EPS {
                            axpy(1.0 / d, &diff, g.user_emb.row_mut(*center));
                            axpy(-1.0 / d, &diff, g.user_emb.row_mut(other));
                        }
                    }
                }
            }
            NodeTerm::Category => {}
        }
    }

    if let Some(g) = grads.as_deref_mut() {
        for (trace, d) in traces.iter().zip(&d_out) {
            if d.iter().any(|&v| v != 0.0) {
                encoder::backward_question(params, trace, d, g, hyper.freeze_words);
            }
        }
    }

    let lambda = hyper.lambda * reg_scale;
    parts.regularizer = lambda * params.squared_norm(hyper.freeze_words);
    if let Some(g) = grads {
        if lambda != 0.0 {
            for (i, (gt, pt)) in g.tensors_mut().into_iter().zip(params.tensors()).enumerate() {
                if hyper.freeze_words && i == 0 {
                    continue;
                }
                axpy(2.0 * lambda, &pt.data, &mut gt.data);
            }
        }
        if !g.is_finite() {
            return Err(Error::NonFinite("gradient".into()));
        }
    }
    if !parts.total().is_finite() {
        return Err(Error::NonFinite("total loss".into()));
    }
    Ok(parts)
}

/// Per-coordinate sums of squared gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaGradState {
    pub accum: ModelParams,
    pub steps: u64,
}

impl AdaGradState {
    pub fn new(params: &ModelParams) -> Self {
        Self {
            accum: params.zeros_like(),
            steps: 0,
        }
    }
}

/// `acc += g²; θ -= ρ · g / √(acc + 1e-8)` for every coordinate.
pub fn adagrad_update(params: &mut ModelParams, grads: &ModelParams, state: &mut AdaGradState, lr: f64) {
    for ((p, g), a) in params
        .tensors_mut()
        .into_iter()
        .zip(grads.tensors())
        .zip(state.accum.tensors_mut())
    {
        for ((theta, &grad), acc) in p.data.iter_mut().zip(&g.data).zip(a.data.iter_mut()) {
            if grad != 0.0 {
                *acc += grad * grad;
                *theta -= lr * grad / (*acc + ADAGRAD_EPS).sqrt();
            }
        }
    }
    state.steps += 1;
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct IterationReport {
    pub iteration: usize,
    pub total: f64,
    pub hinge: f64,
    pub user: f64,
    pub regularizer: f64,
    pub windows: usize,
    pub triplets: usize,
    pub starved_windows: usize,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainReport {
    pub iterations: Vec<IterationReport>,
}

impl TrainReport {
    pub fn losses(&self) -> Vec<f64> {
        self.iterations.iter().map(|i| i.total).collect()
    }
}

/// Random initialization, optionally with user rows taken from skip-gram
/// embeddings of graph walks and word rows from skip-gram embeddings of the
/// question texts, rounded to `f32` precision.
pub fn initial_params(corpus: &Corpus, hyper: &Hyper) -> ModelParams {
    let mut params = init_params(
        hyper.dims,
        corpus.vocab().len(),
        corpus.users().len(),
        hyper.seed,
    );
    if hyper.word_pretrain_epochs > 0 {
        let sequences: Vec<Vec<usize>> = corpus
            .questions()
            .iter()
            .map(|q| q.sentences.iter().flatten().map(|&t| t as usize).collect())
            .collect();
        let seed = rng::derive_seed(hyper.seed, &[rng::TAG_INIT, rng::TAG_SYNTH]);
        let mut sgns = Sgns::new(corpus.vocab().len(), hyper.dims.word, seed);
        for epoch in 0..hyper.word_pretrain_epochs {
            let mut r = rng::stream(seed, &[epoch as u64]);
            sgns.epoch(&sequences, WORD_WINDOW, SGNS_NEGATIVES, hyper.lr, &mut r);
        }
        params.word_emb.data.copy_from_slice(&sgns.embeddings().input.data);
    }
    if hyper.user_pretrain_epochs > 0 && !corpus.users().is_empty() {
        let graph = HetGraph::build(corpus).with_edge_weights(hyper.edge_weights);
        let cfg = DeepWalkConfig {
            dim: hyper.dims.user,
            window: hyper.window,
            walk_len: hyper.walk_len,
            walks: hyper.walks,
            epochs: hyper.user_pretrain_epochs,
            lr: hyper.lr,
            seed: rng::derive_seed(hyper.seed, &[rng::TAG_INIT, rng::TAG_DEEPWALK]),
            ..DeepWalkConfig::default()
        };
        let emb = deepwalk_train(&graph, &cfg);
        for u in 0..corpus.users().len() {
            let row = emb.input.row(graph.id(HetNode::User(u)));
            params.user_emb.row_mut(u).copy_from_slice(row);
        }
    }
    params.round_to_f32();
    params
}

/// Trains from [`initial_params`]; see [`train_from`].
pub fn train(corpus: &Corpus, hyper: &Hyper) -> Result<(ModelParams, TrainReport)> {
    train_from(corpus, hyper, initial_params(corpus, hyper))
}

/// Each iteration samples fresh walks, cuts them into windows and applies one
/// AdaGrad step per mini-batch. Over an iteration the regularizer is spread
/// across batches in proportion to their size, so one pass descends the full
/// objective once. Parameters are kept at `f32` precision after every step.
pub fn train_from(
    corpus: &Corpus,
    hyper: &Hyper,
    mut params: ModelParams,
) -> Result<(ModelParams, TrainReport)> {
    hyper.validate()?;
    if corpus.categories().len() < 2 {
        return Err(Error::Data(
            "training needs questions from at least two categories; \
             add questions from another category or merge corpora"
                .into(),
        ));
    }
    if params.vocab_size() != corpus.vocab().len() || params.num_users() != corpus.users().len() {
        return Err(Error::DimensionMismatch(
            "initial parameters do not match the corpus vocabulary or user table".into(),
        ));
    }
    let graph = HetGraph::build(corpus).with_edge_weights(hyper.edge_weights);
    let mut state = AdaGradState::new(&params);
    let mut report = TrainReport::default();
    for it in 0..hyper.iters {
        let started = Instant::now();
        let walk_seed = rng::derive_seed(hyper.seed, &[rng::TAG_WALK, it as u64]);
        let walks = sample_walk_set(&graph, hyper.walks, hyper.walk_len, walk_seed);
        let windows: Vec<Window> = walks
            .iter()
            .flat_map(|w| extract_windows(w, hyper.window))
            .collect();
        let mut neg_rng = rng::stream(hyper.seed, &[rng::TAG_NEGATIVES, it as u64]);
        let mut stats = IterationReport {
            iteration: it,
            windows: windows.len(),
            ..Default::default()
        };
        for chunk in windows.chunks(hyper.batch_size) {
            let batch = Batch::prepare(chunk, corpus, hyper, &mut neg_rng);
            stats.triplets += batch.triplets();
            stats.starved_windows += batch.starved;
            let reg_scale = chunk.len() as f64 / windows.len() as f64;
            let mut grads = params.zeros_like();
            let parts = objective(&params, &batch, corpus, hyper, reg_scale, Some(&mut grads))?;
            stats.hinge += parts.hinge;
            stats.user += parts.user;
            adagrad_update(&mut params, &grads, &mut state, hyper.lr);
            params.round_to_f32();
        }
        if !params.is_finite() {
            return Err(Error::NonFinite(format!("parameters after iteration {it}")));
        }
        stats.regularizer = hyper.lambda * params.squared_norm(hyper.freeze_words);
        stats.total = stats.hinge + stats.user + stats.regularizer;
        stats.seconds = started.elapsed().as_secs_f64();
        report.iterations.push(stats);
    }
    Ok((params, report))
}
