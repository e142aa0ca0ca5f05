//! Trains HNIL on the training part of a synthetic corpus and saves a checkpoint.
//!
//! Run with `cargo run --release --example train_hnil -- [checkpoint] [iters]`.

use std::path::PathBuf;

use hnil::checkpoint::{load_checkpoint, save_for_corpus};
use hnil::corpus::{generate_synthetic, train_test_split};
use hnil::training::train;
use hnil::{Hyper, SynthSpec};

fn main() -> anyhow::Result<()> {
    let mut args = std::env::args().skip(1);
    let path = PathBuf::from(args.next().unwrap_or_else(|| "hnil.ckpt".into()));
    let iters: usize = args.next().map(|s| s.parse()).transpose()?.unwrap_or(5);

    let corpus = generate_synthetic(&SynthSpec::default(), 0)?;
    let split = train_test_split(&corpus, 0.8, 0)?;
    let hyper = Hyper {
        iters,
        ..Hyper::default()
    };
    let (params, report) = train(&split.train, &hyper)?;
    for it in &report.iterations {
        println!(
            "iteration {}: total {:.2} (hinge {:.2}, user {:.2}, regularizer {:.3}), {} triplets, {:.1}s",
            it.iteration, it.total, it.hinge, it.user, it.regularizer, it.triplets, it.seconds
        );
    }

    save_for_corpus(&params, &hyper, &split.train, &path)?;
    let restored = load_checkpoint(&path)?;
    assert!(restored.params.bitwise_eq(&params));
    println!("saved {} parameters to {}", params.num_parameters(), path.display());
    Ok(())
}
