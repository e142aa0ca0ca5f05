use std::collections::HashMap;

use rand::seq::SliceRandom;

use super::{Corpus, Question};
use crate::error::{Error, Result};
use crate::rng;

/// Largest share of the corpus held out for testing.
pub const TEST_FRACTION: f64 = 0.2;

#[derive(Debug, Clone)]
pub struct Split {
    pub train: Corpus,
    pub test: Vec<Question>,
    /// Questions in neither part (when `train_frac + 0.2 < 1`).
    pub discarded: usize,
}

/// Holds out up to 20% of the questions for testing and keeps `train_frac` of
/// the corpus for training; anything left over is discarded.
///
/// A held-out question is only kept in the test set if at least one question
/// of its `dup_group` remains in training; otherwise it is moved to training.
pub fn train_test_split(corpus: &Corpus, train_frac: f64, seed: u64) -> Result<Split> {
    if !(train_frac > 0.0 && train_frac < 1.0) {
        return Err(Error::Usage(format!(
            "train fraction must lie in (0, 1), got {train_frac}"
        )));
    }
    let n = corpus.questions().len();
    if n == 0 {
        return Err(Error::Data("cannot split an empty corpus".into()));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::stream(seed, &[rng::TAG_SPLIT]));

    let test_target = (n as f64 * TEST_FRACTION.min(1.0 - train_frac)).round() as usize;
    let train_target = ((n as f64 * train_frac).round() as usize).min(n - test_target);
    let (candidates, rest) = order.split_at(test_target);
    let mut train: Vec<usize> = rest[..train_target].to_vec();

    let group_of = |i: usize| corpus.questions()[i].record.dup_group.as_deref();
    let mut in_train: HashMap<&str, usize> = HashMap::new();
    for &i in &train {
        if let Some(g) = group_of(i) {
            *in_train.entry(g).or_default() += 1;
        }
    }
    let mut test = Vec::with_capacity(candidates.len());
    for &i in candidates {
        match group_of(i) {
            Some(g) if in_train.get(g).copied().unwrap_or(0) > 0 => test.push(i),
            group => {
                train.push(i);
                if let Some(g) = group {
                    *in_train.entry(g).or_default() += 1;
                }
            }
        }
    }
    train.sort_unstable();
    test.sort_unstable();
    let discarded = n - train.len() - test.len();
    Ok(Split {
        train: corpus.subset(&train),
        test: test.into_iter().map(|i| corpus.questions()[i].clone()).collect(),
        discarded,
    })
}
