//! Question encoder: word embeddings, a per-sentence LSTM, max-pooling over
//! sentences and concatenation with the asker's embedding.
//!
//! The LSTM cell is
//!
//! ```text
//! i_t = σ(W_i x_t + G_i h_{t-1} + b_i)
//! ĉ_t = tanh(W_c x_t + G_c h_{t-1} + b_c)
//! f_t = σ(W_f x_t + G_f h_{t-1} + b_f)
//! C_t = i_t ⊙ ĉ_t + f_t ⊙ C_{t-1}
//! o_t = σ(W_o x_t + G_o h_{t-1} + V_o C_t + b_o)
//! h_t = o_t ⊙ tanh(C_t)
//! ```
//!
//! with a dense `V_o`. A sentence is encoded by its final `h`.

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::corpus::{Question, Vocab};
use crate::error::{Error, Result};
use crate::linalg::{dot, norm, sigmoid, Tensor};
use crate::rng;

/// Standard deviation of the Gaussian used for every initialized weight.
pub const INIT_STD: f64 = 0.1;
pub const FORGET_BIAS: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dims {
    pub word: usize,
    pub hidden: usize,
    pub user: usize,
}

impl Default for Dims {
    fn default() -> Self {
        Self {
            word: 100,
            hidden: 100,
            user: 100,
        }
    }
}

impl Dims {
    /// Splits a total question-vector dimension evenly between text and user parts;
    /// the word dimension follows the hidden size.
    pub fn from_total(total: usize) -> Self {
        let hidden = total.div_ceil(2);
        Self {
            word: hidden,
            hidden,
            user: total - hidden,
        }
    }

    pub fn question(&self) -> usize {
        self.hidden + self.user
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmParams {
    pub w_i: Tensor,
    pub w_c: Tensor,
    pub w_f: Tensor,
    pub w_o: Tensor,
    pub g_i: Tensor,
    pub g_c: Tensor,
    pub g_f: Tensor,
    pub g_o: Tensor,
    pub v_o: Tensor,
    pub b_i: Tensor,
    pub b_c: Tensor,
    pub b_f: Tensor,
    pub b_o: Tensor,
}

/// Every trainable tensor of the model. The same type doubles as a gradient buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub dims: Dims,
    pub word_emb: Tensor,
    pub user_emb: Tensor,
    pub lstm: LstmParams,
}

/// Fixed tensor order used by checkpoints, optimizers and gradient checks.
pub const TENSOR_NAMES: [&str; 15] = [
    "word_emb", "user_emb", "w_i", "w_c", "w_f", "w_o", "g_i", "g_c", "g_f", "g_o", "v_o", "b_i",
    "b_c", "b_f", "b_o",
];

impl ModelParams {
    pub fn zeros(dims: Dims, vocab_size: usize, num_users: usize) -> Self {
        let (dw, dq) = (dims.word, dims.hidden);
        let input = || Tensor::zeros(dq, dw);
        let recurrent = || Tensor::zeros(dq, dq);
        let bias = || Tensor::zeros(dq, 1);
        Self {
            dims,
            word_emb: Tensor::zeros(vocab_size, dw),
            user_emb: Tensor::zeros(num_users, dims.user),
            lstm: LstmParams {
                w_i: input(),
                w_c: input(),
                w_f: input(),
                w_o: input(),
                g_i: recurrent(),
                g_c: recurrent(),
                g_f: recurrent(),
                g_o: recurrent(),
                v_o: recurrent(),
                b_i: bias(),
                b_c: bias(),
                b_f: bias(),
                b_o: bias(),
            },
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.dims, self.vocab_size(), self.num_users())
    }

    pub fn vocab_size(&self) -> usize {
        self.word_emb.rows
    }

    pub fn num_users(&self) -> usize {
        self.user_emb.rows
    }

    pub fn tensors(&self) -> [&Tensor; 15] {
        let l = &self.lstm;
        [
            &self.word_emb, &self.user_emb, &l.w_i, &l.w_c, &l.w_f, &l.w_o, &l.g_i, &l.g_c,
            &l.g_f, &l.g_o, &l.v_o, &l.b_i, &l.b_c, &l.b_f, &l.b_o,
        ]
    }

    pub fn tensors_mut(&mut self) -> [&mut Tensor; 15] {
        let ModelParams {
            word_emb,
            user_emb,
            lstm:
                LstmParams {
                    w_i,
                    w_c,
                    w_f,
                    w_o,
                    g_i,
                    g_c,
                    g_f,
                    g_o,
                    v_o,
                    b_i,
                    b_c,
                    b_f,
                    b_o,
                },
            ..
        } = self;
        [
            word_emb, user_emb, w_i, w_c, w_f, w_o, g_i, g_c, g_f, g_o, v_o, b_i, b_c, b_f, b_o,
        ]
    }

    pub fn num_parameters(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    /// Sum of squared entries over trainable tensors.
    pub fn squared_norm(&self, freeze_words: bool) -> f64 {
        self.tensors()
            .iter()
            .enumerate()
            .filter(|&(i, _)| !(freeze_words && i == 0))
            .map(|(_, t)| t.squared_norm())
            .sum()
    }

    /// Rounds every value to the nearest `f32`, the checkpoint storage precision.
    pub fn round_to_f32(&mut self) {
        for t in self.tensors_mut() {
            t.data.iter_mut().for_each(|x| *x = *x as f32 as f64);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.is_finite())
    }

    /// Bitwise equality of every value (distinguishes `-0.0` from `0.0`).
    pub fn bitwise_eq(&self, other: &Self) -> bool {
        self.dims == other.dims
            && self.tensors().iter().zip(other.tensors()).all(|(a, b)| {
                a.shape() == b.shape()
                    && a.data.iter().zip(&b.data).all(|(x, y)| x.to_bits() == y.to_bits())
            })
    }
}

/// Gaussian(0, 0.1²) weights and embeddings, zero biases except the forget
/// bias, which starts at 1. Values are rounded to `f32`.
pub fn init_params(dims: Dims, vocab_size: usize, num_users: usize, seed: u64) -> ModelParams {
    let mut params = ModelParams::zeros(dims, vocab_size, num_users);
    let mut rng = rng::stream(seed, &[rng::TAG_INIT]);
    let normal = Normal::new(0.0, INIT_STD).expect("valid std");
    for (name, t) in TENSOR_NAMES.iter().zip(params.tensors_mut()) {
        if name.starts_with("b_") {
            continue;
        }
        t.data
            .iter_mut()
            .for_each(|x| *x = normal.sample(&mut rng) as f32 as f64);
    }
    params.lstm.b_f.fill(FORGET_BIAS);
    params
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Coverage {
    pub matched: usize,
    pub vocab_tokens: usize,
}

impl Coverage {
    /// Fraction of (non-UNK) vocabulary rows overwritten.
    pub fn fraction(&self) -> f64 {
        if self.vocab_tokens == 0 {
            0.0
        } else {
            self.matched as f64 / self.vocab_tokens as f64
        }
    }
}

/// Overwrites word-embedding rows from a textual word2vec file
/// (`count dim` header, then `token v1 … vd` per line).
pub fn load_word2vec(params: &mut ModelParams, path: &Path, vocab: &Vocab) -> Result<Coverage> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let malformed = |line: usize, message: String| Error::MalformedLine {
        path: path.to_owned(),
        line,
        message,
    };
    let mut lines = BufReader::new(file).lines().enumerate();
    let header = match lines.next() {
        Some((_, l)) => l.map_err(|e| Error::io(path, e))?,
        None => return Err(malformed(1, "missing header".into())),
    };
    let fields: Vec<&str> = header.split_whitespace().collect();
    let dim: usize = match fields.as_slice() {
        [_, d] => d
            .parse()
            .map_err(|_| malformed(1, format!("bad dimension {d:?}")))?,
        _ => return Err(malformed(1, "header must be `count dim`".into())),
    };
    if dim != params.dims.word {
        return Err(Error::DimensionMismatch(format!(
            "word2vec vectors have dimension {dim}, model expects {}",
            params.dims.word
        )));
    }
    let mut staged: Vec<(u32, Vec<f64>)> = Vec::new();
    for (n, line) in lines {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        let token = parts.next().unwrap_or_default();
        let values = parts
            .map(|v| v.parse::<f32>().map(f64::from))
            .collect::<std::result::Result<Vec<f64>, _>>()
            .map_err(|e| malformed(n + 1, e.to_string()))?;
        if values.len() != dim {
            return Err(malformed(
                n + 1,
                format!("expected {dim} values, found {}", values.len()),
            ));
        }
        let idx = vocab.lookup(token);
        if idx != crate::corpus::UNK && (idx as usize) < params.word_emb.rows {
            staged.push((idx, values));
        }
    }
    let mut seen = vec![false; params.word_emb.rows];
    for (idx, values) in staged {
        params.word_emb.row_mut(idx as usize).copy_from_slice(&values);
        seen[idx as usize] = true;
    }
    Ok(Coverage {
        matched: seen.iter().filter(|&&s| s).count(),
        vocab_tokens: vocab.len().saturating_sub(1),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmState {
    pub h: Vec<f64>,
    pub c: Vec<f64>,
}

impl LstmState {
    pub fn zeros(hidden: usize) -> Self {
        Self {
            h: vec![0.0; hidden],
            c: vec![0.0; hidden],
        }
    }
}

/// Activations of one LSTM step, kept for backpropagation.
#[derive(Debug, Clone)]
pub(crate) struct Step {
    token: u32,
    i: Vec<f64>,
    f: Vec<f64>,
    o: Vec<f64>,
    chat: Vec<f64>,
    c: Vec<f64>,
    tanh_c: Vec<f64>,
    h: Vec<f64>,
}

fn preactivation(w: &Tensor, g: &Tensor, b: &Tensor, x: &[f64], h: &[f64]) -> Vec<f64> {
    let mut z = b.data.clone();
    w.matvec_add(x, &mut z);
    g.matvec_add(h, &mut z);
    z
}

fn forward_step(lstm: &LstmParams, token: u32, x: &[f64], h_prev: &[f64], c_prev: &[f64]) -> Step {
    let mut i = preactivation(&lstm.w_i, &lstm.g_i, &lstm.b_i, x, h_prev);
    i.iter_mut().for_each(|v| *v = sigmoid(*v));
    let mut chat = preactivation(&lstm.w_c, &lstm.g_c, &lstm.b_c, x, h_prev);
    chat.iter_mut().for_each(|v| *v = v.tanh());
    let mut f = preactivation(&lstm.w_f, &lstm.g_f, &lstm.b_f, x, h_prev);
    f.iter_mut().for_each(|v| *v = sigmoid(*v));
    let c: Vec<f64> = (0..c_prev.len())
        .map(|k| i[k] * chat[k] + f[k] * c_prev[k])
        .collect();
    let mut o = preactivation(&lstm.w_o, &lstm.g_o, &lstm.b_o, x, h_prev);
    lstm.v_o.matvec_add(&c, &mut o);
    o.iter_mut().for_each(|v| *v = sigmoid(*v));
    let tanh_c: Vec<f64> = c.iter().map(|v| v.tanh()).collect();
    let h = o.iter().zip(&tanh_c).map(|(a, b)| a * b).collect();
    Step {
        token,
        i,
        f,
        o,
        chat,
        c,
        tanh_c,
        h,
    }
}

fn check_finite(values: &[f64], what: &str) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what.to_owned()))
    }
}

/// One LSTM step from `prev` on input vector `x`.
pub fn lstm_step(params: &ModelParams, x: &[f64], prev: &LstmState) -> Result<LstmState> {
    let dims = params.dims;
    if x.len() != dims.word || prev.h.len() != dims.hidden || prev.c.len() != dims.hidden {
        return Err(Error::DimensionMismatch(format!(
            "lstm step expects x of {} and state of {}",
            dims.word, dims.hidden
        )));
    }
    let s = forward_step(&params.lstm, 0, x, &prev.h, &prev.c);
    for (values, gate) in [
        (&s.i, "input gate"),
        (&s.chat, "candidate cell"),
        (&s.f, "forget gate"),
        (&s.c, "cell state"),
        (&s.o, "output gate"),
        (&s.h, "hidden state"),
    ] {
        check_finite(values, gate)?;
    }
    Ok(LstmState { h: s.h, c: s.c })
}

fn check_tokens(params: &ModelParams, tokens: &[u32]) -> Result<()> {
    if tokens.is_empty() {
        return Err(Error::Data("cannot encode an empty sentence".into()));
    }
    if let Some(&t) = tokens.iter().find(|&&t| t as usize >= params.vocab_size()) {
        return Err(Error::DimensionMismatch(format!(
            "token index {t} outside the embedding table of {} rows",
            params.vocab_size()
        )));
    }
    Ok(())
}

pub(crate) fn forward_sentence(params: &ModelParams, tokens: &[u32]) -> Result<Vec<Step>> {
    check_tokens(params, tokens)?;
    let dq = params.dims.hidden;
    let zeros = vec![0.0; dq];
    let mut steps: Vec<Step> = Vec::with_capacity(tokens.len());
    for &tok in tokens {
        let x = params.word_emb.row(tok as usize);
        let step = match steps.last() {
            Some(prev) => forward_step(&params.lstm, tok, x, &prev.h, &prev.c),
            None => forward_step(&params.lstm, tok, x, &zeros, &zeros),
        };
        check_finite(&step.c, "cell state")?;
        check_finite(&step.h, "hidden state")?;
        steps.push(step);
    }
    Ok(steps)
}

/// Final hidden state of the LSTM run over `tokens` from the zero state.
pub fn encode_sentence(params: &ModelParams, tokens: &[u32]) -> Result<Vec<f64>> {
    let mut steps = forward_sentence(params, tokens)?;
    Ok(steps.pop().expect("non-empty").h)
}

/// Element-wise maximum; ties resolve to the lowest index.
pub fn max_pool(rows: &[Vec<f64>]) -> (Vec<f64>, Vec<usize>) {
    let dim = rows.first().map_or(0, Vec::len);
    let mut pooled = vec![f64::NEG_INFINITY; dim];
    let mut argmax = vec![0; dim];
    for (s, row) in rows.iter().enumerate() {
        for k in 0..dim {
            if row[k] > pooled[k] {
                pooled[k] = row[k];
                argmax[k] = s;
            }
        }
    }
    (pooled, argmax)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuestionVec {
    pub v: Vec<f64>,
    pub normalized: bool,
}

impl QuestionVec {
    pub fn dim(&self) -> usize {
        self.v.len()
    }
}

/// Everything a question encoding needs for its backward pass.
#[derive(Debug, Clone)]
pub(crate) struct QuestionTrace {
    sentences: Vec<Vec<Step>>,
    argmax: Vec<usize>,
    asker: Option<usize>,
    norm: f64,
    pub(crate) out: Vec<f64>,
    normalized: bool,
}

pub(crate) fn forward_question(
    params: &ModelParams,
    sentences: &[Vec<u32>],
    asker: Option<usize>,
    normalize: bool,
) -> Result<QuestionTrace> {
    if sentences.is_empty() {
        return Err(Error::Data("question has no sentences".into()));
    }
    if let Some(u) = asker {
        if u >= params.num_users() {
            return Err(Error::DimensionMismatch(format!(
                "asker row {u} outside the user table of {} rows",
                params.num_users()
            )));
        }
    }
    let traces = sentences
        .iter()
        .map(|s| forward_sentence(params, s))
        .collect::<Result<Vec<_>>>()?;
    let finals: Vec<Vec<f64>> = traces
        .iter()
        .map(|t| t.last().expect("non-empty").h.clone())
        .collect();
    let (pooled, argmax) = max_pool(&finals);
    let mut out = pooled;
    match asker {
        Some(u) => out.extend_from_slice(params.user_emb.row(u)),
        None => out.extend(std::iter::repeat_n(0.0, params.dims.user)),
    }
    let n = norm(&out);
    if normalize && n > 0.0 {
        out.iter_mut().for_each(|v| *v /= n);
    }
    Ok(QuestionTrace {
        sentences: traces,
        argmax,
        asker,
        norm: n,
        out,
        normalized: normalize,
    })
}

/// Encodes a question: max-pooled sentence encodings followed by the asker row
/// (zeros when `asker_known` is false). Optionally unit-normalized.
pub fn encode_question(
    params: &ModelParams,
    question: &Question,
    asker_known: bool,
    normalize: bool,
) -> Result<QuestionVec> {
    let asker = asker_known.then_some(question.asker);
    encode_tokens(params, &question.sentences, asker, normalize)
}

/// Encodes already-indexed sentences with an optional asker row.
pub fn encode_tokens(
    params: &ModelParams,
    sentences: &[Vec<u32>],
    asker: Option<usize>,
    normalize: bool,
) -> Result<QuestionVec> {
    let trace = forward_question(params, sentences, asker, normalize)?;
    Ok(QuestionVec {
        v: trace.out,
        normalized: normalize,
    })
}

/// Accumulates into `grads` the gradient of a scalar whose derivative with
/// respect to the question vector is `d_out`.
pub(crate) fn backward_question(
    params: &ModelParams,
    trace: &QuestionTrace,
    d_out: &[f64],
    grads: &mut ModelParams,
    freeze_words: bool,
) {
    let dq = params.dims.hidden;
    let d_raw: Vec<f64> = if trace.normalized {
        if trace.norm == 0.0 {
            return;
        }
        let proj = dot(&trace.out, d_out);
        d_out
            .iter()
            .zip(&trace.out)
            .map(|(g, y)| (g - y * proj) / trace.norm)
            .collect()
    } else {
        d_out.to_vec()
    };
    if let Some(u) = trace.asker {
        crate::linalg::axpy(1.0, &d_raw[dq..], grads.user_emb.row_mut(u));
    }
    let mut d_final = vec![vec![0.0; dq]; trace.sentences.len()];
    for (k, &s) in trace.argmax.iter().enumerate() {
        d_final[s][k] += d_raw[k];
    }
    for (steps, dh) in trace.sentences.iter().zip(d_final) {
        if dh.iter().all(|&v| v == 0.0) {
            continue;
        }
        backward_sentence(params, steps, dh, grads, freeze_words);
    }
}

fn backward_sentence(
    params: &ModelParams,
    steps: &[Step],
    mut dh: Vec<f64>,
    grads: &mut ModelParams,
    freeze_words: bool,
) {
    let dq = params.dims.hidden;
    let lstm = &params.lstm;
    let zeros = vec![0.0; dq];
    let mut dc_next = vec![0.0; dq];
    let mut dzi = vec![0.0; dq];
    let mut dzc = vec![0.0; dq];
    let mut dzf = vec![0.0; dq];
    let mut dzo = vec![0.0; dq];
    let mut dc = vec![0.0; dq];
    let mut dx = vec![0.0; params.dims.word];
    for t in (0..steps.len()).rev() {
        let s = &steps[t];
        let (h_prev, c_prev) = if t == 0 {
            (&zeros, &zeros)
        } else {
            (&steps[t - 1].h, &steps[t - 1].c)
        };
        for k in 0..dq {
            dzo[k] = dh[k] * s.tanh_c[k] * s.o[k] * (1.0 - s.o[k]);
            dc[k] = dc_next[k] + dh[k] * s.o[k] * (1.0 - s.tanh_c[k] * s.tanh_c[k]);
        }
        lstm.v_o.matvec_t_add(&dzo, &mut dc);
        for k in 0..dq {
            dzi[k] = dc[k] * s.chat[k] * s.i[k] * (1.0 - s.i[k]);
            dzc[k] = dc[k] * s.i[k] * (1.0 - s.chat[k] * s.chat[k]);
            dzf[k] = dc[k] * c_prev[k] * s.f[k] * (1.0 - s.f[k]);
            dc_next[k] = dc[k] * s.f[k];
        }
        let x = params.word_emb.row(s.token as usize);
        let g = &mut grads.lstm;
        g.v_o.outer_add(&dzo, &s.c);
        for (dz, w, gw, gg, gb) in [
            (&dzi, &lstm.w_i, &mut g.w_i, &mut g.g_i, &mut g.b_i),
            (&dzc, &lstm.w_c, &mut g.w_c, &mut g.g_c, &mut g.b_c),
            (&dzf, &lstm.w_f, &mut g.w_f, &mut g.g_f, &mut g.b_f),
            (&dzo, &lstm.w_o, &mut g.w_o, &mut g.g_o, &mut g.b_o),
        ] {
            gw.outer_add(dz, x);
            if t > 0 {
                gg.outer_add(dz, h_prev);
            }
            crate::linalg::axpy(1.0, dz, &mut gb.data);
            if !freeze_words {
                w.matvec_t_add(dz, &mut dx);
            }
        }
        if !freeze_words {
            crate::linalg::axpy(1.0, &dx, grads.word_emb.row_mut(s.token as usize));
            dx.iter_mut().for_each(|v| *v = 0.0);
        }
        if t > 0 {
            dh.iter_mut().for_each(|v| *v = 0.0);
            for (dz, gmat) in [
                (&dzi, &lstm.g_i),
                (&dzc, &lstm.g_c),
                (&dzf, &lstm.g_f),
                (&dzo, &lstm.g_o),
            ] {
                gmat.matvec_t_add(dz, &mut dh);
            }
        }
    }
}

/// Match score `aᵀb`.
pub fn score(a: &QuestionVec, b: &QuestionVec) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch(format!(
            "cannot score vectors of dimension {} and {}",
            a.dim(),
            b.dim()
        )));
    }
    Ok(dot(&a.v, &b.v))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_dims() -> Dims {
        Dims {
            word: 3,
            hidden: 4,
            user: 2,
        }
    }

    #[test]
    fn init_is_deterministic_with_declared_biases() {
        let a = init_params(small_dims(), 10, 5, 3);
        let b = init_params(small_dims(), 10, 5, 3);
        assert!(a.bitwise_eq(&b));
        assert!(a.lstm.b_f.data.iter().all(|&v| v == 1.0));
        for bias in [&a.lstm.b_i, &a.lstm.b_c, &a.lstm.b_o] {
            assert!(bias.data.iter().all(|&v| v == 0.0));
        }
        assert!(!init_params(small_dims(), 10, 5, 4).bitwise_eq(&a));
    }

    #[test]
    fn init_weight_moments() {
        let dims = Dims {
            word: 50,
            hidden: 50,
            user: 10,
        };
        let p = init_params(dims, 2, 2, 11);
        let all: Vec<f64> = p.tensors()[2..11]
            .iter()
            .flat_map(|t| t.data.iter().copied())
            .take(10_000)
            .collect();
        assert_eq!(all.len(), 10_000);
        let mean = all.iter().sum::<f64>() / all.len() as f64;
        let var = all.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (all.len() - 1) as f64;
        assert!(mean.abs() < 0.01, "mean {mean}");
        assert!((var.sqrt() - 0.1).abs() < 0.01, "std {}", var.sqrt());
    }

    #[test]
    fn zero_params_give_zero_state() {
        let p = ModelParams::zeros(small_dims(), 4, 1);
        let s = lstm_step(&p, &[0.3, -2.0, 5.0], &LstmState::zeros(4)).unwrap();
        assert_eq!(s.h, vec![0.0; 4]);
        assert_eq!(s.c, vec![0.0; 4]);
        assert_eq!(encode_sentence(&p, &[2]).unwrap(), vec![0.0; 4]);
    }

    #[test]
    fn saturated_gates_preserve_memory() {
        let mut p = ModelParams::zeros(small_dims(), 4, 1);
        p.lstm.b_f.fill(1e3);
        p.lstm.b_i.fill(-1e3);
        let prev = LstmState {
            h: vec![0.1, 0.2, -0.3, 0.0],
            c: vec![0.5, -1.5, 2.0, 0.25],
        };
        let next = lstm_step(&p, &[1.0, 1.0, 1.0], &prev).unwrap();
        assert_eq!(next.c, prev.c);
    }

    #[test]
    fn non_finite_step_names_gate() {
        let mut p = ModelParams::zeros(small_dims(), 4, 1);
        p.lstm.b_c.fill(f64::NAN);
        let err = lstm_step(&p, &[0.0; 3], &LstmState::zeros(4)).unwrap_err();
        assert!(err.to_string().contains("candidate cell"), "{err}");
        assert_eq!(err.exit_code(), 3);
    }

    #[test]
    fn empty_sentence_is_rejected() {
        let p = ModelParams::zeros(small_dims(), 4, 1);
        assert!(encode_sentence(&p, &[]).is_err());
    }

    #[test]
    fn pooling_takes_elementwise_max() {
        let (pooled, argmax) = max_pool(&[vec![1.0, -2.0], vec![0.0, 5.0]]);
        assert_eq!(pooled, vec![1.0, 5.0]);
        assert_eq!(argmax, vec![0, 1]);
        let (_, ties) = max_pool(&[vec![1.0], vec![1.0]]);
        assert_eq!(ties, vec![0]);
    }

    #[test]
    fn unknown_asker_zeroes_user_part() {
        let p = init_params(small_dims(), 6, 3, 1);
        let sentences = vec![vec![1, 2, 3], vec![4]];
        let known = encode_tokens(&p, &sentences, Some(2), false).unwrap();
        let unknown = encode_tokens(&p, &sentences, None, false).unwrap();
        assert_eq!(known.v[..4], unknown.v[..4]);
        assert_eq!(unknown.v[4..], [0.0, 0.0]);
        assert_eq!(known.v[4..], *p.user_emb.row(2));
    }

    #[test]
    fn single_sentence_pool_is_identity() {
        let p = init_params(small_dims(), 6, 3, 2);
        let q = encode_tokens(&p, &[vec![5, 1]], None, false).unwrap();
        assert_eq!(q.v[..4], encode_sentence(&p, &[5, 1]).unwrap()[..]);
    }

    #[test]
    fn normalized_vectors_have_unit_norm() {
        let p = init_params(small_dims(), 6, 3, 2);
        let q = encode_tokens(&p, &[vec![5, 1]], Some(0), true).unwrap();
        assert!((norm(&q.v) - 1.0).abs() < 1e-12);
        let z = encode_tokens(&ModelParams::zeros(small_dims(), 6, 3), &[vec![1]], None, true).unwrap();
        assert!(z.v.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn score_examples() {
        let v = |x: &[f64]| QuestionVec {
            v: x.to_vec(),
            normalized: false,
        };
        assert_eq!(score(&v(&[1.0, 0.0]), &v(&[0.0, 1.0])).unwrap(), 0.0);
        assert!((score(&v(&[0.6, 0.8]), &v(&[0.8, 0.6])).unwrap() - 0.96).abs() < 1e-15);
        assert!((score(&v(&[0.6, 0.8]), &v(&[0.6, 0.8])).unwrap() - 1.0).abs() < 1e-15);
        assert!(score(&v(&[1.0]), &v(&[1.0, 2.0])).is_err());
    }

    #[test]
    fn word2vec_loading() {
        let dir = tempfile::tempdir().unwrap();
        let vocab = Vocab::build(["alpha", "beta"], 1);
        let base = init_params(small_dims(), vocab.len(), 1, 0);

        let none = dir.path().join("none.txt");
        std::fs::write(&none, "1 3\nzzz 1 2 3\n").unwrap();
        let mut p = base.clone();
        let cov = load_word2vec(&mut p, &none, &vocab).unwrap();
        assert_eq!(cov.fraction(), 0.0);
        assert!(p.bitwise_eq(&base));

        let all = dir.path().join("all.txt");
        std::fs::write(&all, "2 3\nalpha 1 2 3\nbeta 4 5 6\n").unwrap();
        let cov = load_word2vec(&mut p, &all, &vocab).unwrap();
        assert_eq!(cov.fraction(), 1.0);
        assert_eq!(p.word_emb.row(vocab.lookup("beta") as usize), [4.0, 5.0, 6.0]);

        let wrong = dir.path().join("wrong.txt");
        std::fs::write(&wrong, "1 50\n").unwrap();
        assert!(matches!(
            load_word2vec(&mut p, &wrong, &vocab),
            Err(Error::DimensionMismatch(_))
        ));

        let bad = dir.path().join("bad.txt");
        std::fs::write(&bad, "2 3\nalpha 1 2 3\nbeta 4 x 6\n").unwrap();
        match load_word2vec(&mut p, &bad, &vocab) {
            Err(Error::MalformedLine { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }
}
