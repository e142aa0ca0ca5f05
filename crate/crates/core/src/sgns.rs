//! Skip-gram with negative sampling over integer sequences, trained with
//! per-pair AdaGrad steps. Shared by the DeepWalk baseline and by embedding
//! pretraining.

use rand::Rng as _;

use crate::linalg::{axpy, dot, sigmoid, Tensor};
use crate::rng;
use crate::training::ADAGRAD_EPS;

/// Target vectors (`input`) and their context vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct Embeddings {
    pub input: Tensor,
    pub context: Tensor,
}

#[derive(Debug, Clone)]
pub struct Sgns {
    emb: Embeddings,
    acc_in: Tensor,
    acc_ctx: Tensor,
}

impl Sgns {
    /// Input vectors start uniform in `±0.5/dim`, context vectors at zero.
    pub fn new(n: usize, dim: usize, seed: u64) -> Self {
        let mut r = rng::stream(seed, &[rng::TAG_DEEPWALK, u64::MAX]);
        let bound = 0.5 / dim as f64;
        let input = Tensor::from_vec(
            n,
            dim,
            (0..n * dim).map(|_| r.random_range(-bound..bound)).collect(),
        );
        Self {
            emb: Embeddings {
                input,
                context: Tensor::zeros(n, dim),
            },
            acc_in: Tensor::zeros(n, dim),
            acc_ctx: Tensor::zeros(n, dim),
        }
    }

    /// One pass over every (centre, context) pair within `window` positions.
    /// Negatives follow the epoch's item counts raised to the 3/4 power.
    pub fn epoch(
        &mut self,
        sequences: &[Vec<usize>],
        window: usize,
        negatives: usize,
        lr: f64,
        rng: &mut rng::Rng,
    ) {
        let n = self.emb.input.rows;
        if n == 0 {
            return;
        }
        let mut counts = vec![0.0f64; n];
        for s in sequences {
            for &item in s {
                counts[item] += 1.0;
            }
        }
        let mut cumulative = Vec::with_capacity(n);
        let mut total = 0.0;
        for c in &counts {
            total += c.powf(0.75);
            cumulative.push(total);
        }
        let dim = self.emb.input.cols;
        let mut grad_center = vec![0.0; dim];
        let mut center_row = vec![0.0; dim];
        let mut targets = Vec::with_capacity(negatives + 1);
        for seq in sequences {
            for (i, &center) in seq.iter().enumerate() {
                let lo = i.saturating_sub(window);
                let hi = (i + window + 1).min(seq.len());
                for j in (lo..hi).filter(|&j| j != i) {
                    targets.clear();
                    targets.push((seq[j], 1.0));
                    for _ in 0..negatives {
                        let r = rng.random::<f64>() * total;
                        targets.push((cumulative.partition_point(|&c| c <= r).min(n - 1), 0.0));
                    }
                    grad_center.iter_mut().for_each(|g| *g = 0.0);
                    center_row.copy_from_slice(self.emb.input.row(center));
                    for &(target, label) in &targets {
                        let s = sigmoid(dot(&center_row, self.emb.context.row(target)));
                        let g = s - label;
                        if g == 0.0 {
                            continue;
                        }
                        axpy(g, self.emb.context.row(target), &mut grad_center);
                        adagrad_row(
                            self.emb.context.row_mut(target),
                            self.acc_ctx.row_mut(target),
                            &center_row,
                            g,
                            lr,
                        );
                    }
                    adagrad_row(
                        self.emb.input.row_mut(center),
                        self.acc_in.row_mut(center),
                        &grad_center,
                        1.0,
                        lr,
                    );
                }
            }
        }
    }

    pub fn embeddings(&self) -> &Embeddings {
        &self.emb
    }

    pub fn into_embeddings(self) -> Embeddings {
        self.emb
    }
}

fn adagrad_row(row: &mut [f64], acc: &mut [f64], grad: &[f64], scale: f64, lr: f64) {
    for ((theta, a), &g) in row.iter_mut().zip(acc.iter_mut()).zip(grad) {
        let g = g * scale;
        if g != 0.0 {
            *a += g * g;
            *theta -= lr * g / (*a + ADAGRAD_EPS).sqrt();
        }
    }
}
