//! Finite-difference verification of the analytic training gradient.

use rand::seq::IndexedRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, QuestionRecord, UserRecord};
use crate::encoder::{encode_question, encode_sentence, init_params, Dims, ModelParams, TENSOR_NAMES};
use crate::error::Result;
use crate::hetnet::{extract_windows, sample_walk_set, HetGraph, Window};
use crate::rng;
use crate::linalg::dot;
use crate::training::{backward, total_loss, Batch, Hyper, NodeTerm};

pub const EPSILON: f64 = 1e-5;
pub const TOLERANCE: f64 = 1e-4;
/// Gradients smaller than this are compared on an absolute rather than relative scale.
pub const REL_FLOOR: f64 = 1e-5;
/// Minimum distance from a max-pool tie or a hinge corner for a fixture to be used.
pub const KINK_GAP: f64 = 1e-4;
pub const MAX_ATTEMPTS: u64 = 32;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradcheckSpec {
    pub dims: Dims,
    pub vocab_size: usize,
    pub users: usize,
    pub categories: usize,
    pub questions: usize,
    pub windows: usize,
    pub lambda: f64,
    pub perturb_backward: bool,
}

impl Default for GradcheckSpec {
    fn default() -> Self {
        Self {
            dims: Dims {
                word: 8,
                hidden: 8,
                user: 8,
            },
            vocab_size: 50,
            users: 20,
            categories: 3,
            questions: 30,
            windows: 24,
            lambda: 1e-3,
            perturb_backward: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorCheck {
    pub name: String,
    pub entries: usize,
    pub max_rel_error: f64,
    pub max_abs_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradcheckReport {
    pub seed: u64,
    pub epsilon: f64,
    pub tolerance: f64,
    pub parameters: usize,
    pub triplets: usize,
    /// Parameter draws tried before one lay at least [`KINK_GAP`] from every kink.
    pub attempts: u64,
    pub kink_gap: f64,
    pub max_rel_error: f64,
    pub passed: bool,
    pub tensors: Vec<TensorCheck>,
}

/// `|a - n| / max(|a|, |n|, REL_FLOOR)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

/// Random corpus whose vocabulary (UNK included) has exactly `vocab_size`
/// entries and whose user table has `users` entries.
pub fn fixture_corpus(spec: &GradcheckSpec, seed: u64) -> Result<Corpus> {
    let mut r = rng::stream(seed, &[rng::TAG_SYNTH, 99]);
    let words: Vec<String> = (1..spec.vocab_size).map(|i| format!("w{i:03}")).collect();
    let users: Vec<UserRecord> = (0..spec.users)
        .map(|u| UserRecord {
            id: format!("u{u:02}"),
            friends: (0..spec.users)
                .filter(|&v| v != u && r.random_bool(0.2))
                .map(|v| format!("u{v:02}"))
                .collect(),
        })
        .collect();
    let mut next_word = 0usize;
    let questions = (0..spec.questions)
        .map(|q| {
            let sentences = r.random_range(1..=3);
            let text = (0..sentences)
                .map(|_| {
                    let len = r.random_range(2..=5);
                    (0..len)
                        .map(|_| {
                            let w = if next_word < words.len() {
                                next_word += 1;
                                &words[next_word - 1]
                            } else {
                                words.choose(&mut r).expect("non-empty word list")
                            };
                            w.clone()
                        })
                        .collect::<Vec<_>>()
                        .join(" ")
                })
                .collect::<Vec<_>>()
                .join(". ");
            QuestionRecord {
                id: format!("q{q:03}"),
                text,
                category: format!("c{}", q % spec.categories),
                asker: format!("u{:02}", r.random_range(0..spec.users)),
                dup_group: None,
            }
        })
        .collect();
    Corpus::from_records(questions, users, 1)
}

/// Compares [`backward`] against central differences of [`total_loss`] for
/// every parameter of a random model on a random batch.
pub fn gradcheck(spec: &GradcheckSpec, seed: u64) -> Result<GradcheckReport> {
    let corpus = fixture_corpus(spec, seed)?;
    let hyper = Hyper {
        dims: spec.dims,
        lambda: spec.lambda,
        seed,
        ..Hyper::default()
    };
    let graph = HetGraph::build(&corpus);
    let walks = sample_walk_set(&graph, 1, hyper.walk_len, rng::derive_seed(seed, &[rng::TAG_WALK]));
    let windows: Vec<Window> = walks
        .iter()
        .flat_map(|w| extract_windows(w, hyper.window))
        .filter(|w| w.center.as_question().is_some() || w.center.as_user().is_some())
        .take(spec.windows)
        .collect();
    let batch = Batch::prepare(
        &windows,
        &corpus,
        &hyper,
        &mut rng::stream(seed, &[rng::TAG_NEGATIVES]),
    );
    let mut attempts = 0;
    let (mut params, kink_gap) = loop {
        let draw = if attempts == 0 {
            seed
        } else {
            rng::derive_seed(seed, &[rng::TAG_INIT, attempts])
        };
        attempts += 1;
        let params = init_params(spec.dims, corpus.vocab().len(), corpus.users().len(), draw);
        let gap = kink_gap(&params, &batch, &corpus, &hyper)?;
        if gap >= KINK_GAP || attempts == MAX_ATTEMPTS {
            break (params, gap);
        }
    };
    let (_, mut analytic) = backward(&params, &batch, &corpus, &hyper)?;
    if spec.perturb_backward {
        inject_bug(&mut analytic);
    }

    let mut tensors = Vec::with_capacity(TENSOR_NAMES.len());
    for (ti, name) in TENSOR_NAMES.iter().enumerate() {
        let len = params.tensors()[ti].data.len();
        let mut check = TensorCheck {
            name: (*name).to_owned(),
            entries: len,
            max_rel_error: 0.0,
            max_abs_error: 0.0,
        };
        for i in 0..len {
            let numeric = central_difference(&mut params, ti, i, &batch, &corpus, &hyper)?;
            let a = analytic.tensors()[ti].data[i];
            check.max_abs_error = check.max_abs_error.max((a - numeric).abs());
            check.max_rel_error = check.max_rel_error.max(relative_error(a, numeric));
        }
        tensors.push(check);
    }
    let max_rel_error = tensors.iter().map(|t| t.max_rel_error).fold(0.0, f64::max);
    Ok(GradcheckReport {
        seed,
        epsilon: EPSILON,
        tolerance: TOLERANCE,
        parameters: params.num_parameters(),
        triplets: batch.triplets(),
        attempts,
        kink_gap,
        max_rel_error,
        passed: max_rel_error < TOLERANCE,
        tensors,
    })
}

/// Smallest distance of the batch loss from a non-differentiable point: the
/// gap between the two largest sentence encodings in any pooled coordinate,
/// and the distance of any triplet from the hinge corner.
pub fn kink_gap(params: &ModelParams, batch: &Batch, corpus: &Corpus, hyper: &Hyper) -> Result<f64> {
    let mut gap = f64::INFINITY;
    let mut seen = std::collections::BTreeSet::new();
    for term in &batch.terms {
        let NodeTerm::Question { triplets } = term else {
            continue;
        };
        for t in triplets {
            for q in [t.anchor, t.positive, t.negative] {
                if !seen.insert(q) {
                    continue;
                }
                let finals = corpus.questions()[q]
                    .sentences
                    .iter()
                    .map(|s| encode_sentence(params, s))
                    .collect::<Result<Vec<_>>>()?;
                for k in 0..params.dims.hidden {
                    let mut column: Vec<f64> = finals.iter().map(|h| h[k]).collect();
                    column.sort_by(|a, b| b.total_cmp(a));
                    if let [first, second, ..] = column[..] {
                        gap = gap.min(first - second);
                    }
                }
            }
            let enc = |q: usize| encode_question(params, &corpus.questions()[q], true, hyper.score_norm);
            let (a, p, n) = (enc(t.anchor)?, enc(t.positive)?, enc(t.negative)?);
            let corner = hyper.margin + dot(&a.v, &n.v) - dot(&a.v, &p.v);
            gap = gap.min(corner.abs());
        }
    }
    Ok(gap)
}

fn central_difference(
    params: &mut ModelParams,
    tensor: usize,
    index: usize,
    batch: &Batch,
    corpus: &Corpus,
    hyper: &Hyper,
) -> Result<f64> {
    let original = params.tensors()[tensor].data[index];
    params.tensors_mut()[tensor].data[index] = original + EPSILON;
    let plus = total_loss(params, batch, corpus, hyper)?.total();
    params.tensors_mut()[tensor].data[index] = original - EPSILON;
    let minus = total_loss(params, batch, corpus, hyper)?.total();
    params.tensors_mut()[tensor].data[index] = original;
    Ok((plus - minus) / (2.0 * EPSILON))
}

/// Halves the gradient of the forget gate's recurrent weights.
fn inject_bug(grads: &mut ModelParams) {
    grads.lstm.g_f.data.iter_mut().for_each(|g| *g *= 0.5);
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixture_has_requested_tables() {
        let spec = GradcheckSpec::default();
        let c = fixture_corpus(&spec, 3).unwrap();
        assert_eq!(c.vocab().len(), 50);
        assert_eq!(c.users().len(), 20);
        assert_eq!(c.categories().len(), 3);
    }

    #[test]
    fn analytic_gradient_matches_and_bugs_are_caught() {
        let good = gradcheck(&GradcheckSpec::default(), 0).unwrap();
        assert!(good.passed, "{good:?}");
        assert!(good.kink_gap >= KINK_GAP);
        let bad = GradcheckSpec {
            perturb_backward: true,
            ..GradcheckSpec::default()
        };
        assert!(!gradcheck(&bad, 0).unwrap().passed);
    }

    #[test]
    fn relative_error_floor() {
        assert_eq!(relative_error(1.0, 1.0), 0.0);
        assert!((relative_error(2.0, 1.0) - 0.5).abs() < 1e-15);
        assert!((relative_error(0.0, 1e-9) - 1e-4).abs() < 1e-15);
    }
}
