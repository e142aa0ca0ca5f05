//! Compares HNIL against the VSM, BM25 and DeepWalk rankers on a synthetic corpus.
//!
//! Run with `cargo run --release --example baselines -- [seed]`.

use std::time::Instant;

use hnil::corpus::generate_synthetic;
use hnil::experiment::{run_experiment, ExperimentConfig};
use hnil::SynthSpec;

fn main() -> anyhow::Result<()> {
    let seed: u64 = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(0);
    let corpus = generate_synthetic(&SynthSpec::default(), seed)?;
    let mut cfg = ExperimentConfig::default();
    cfg.hyper.seed = seed;
    cfg.split_seed = seed;
    let started = Instant::now();
    let report = run_experiment(&corpus, &cfg)?;
    println!(
        "train {} / test {} questions, {:.1}s",
        report.split.train,
        report.split.test,
        started.elapsed().as_secs_f64()
    );
    if let Some(train) = &report.train {
        println!("loss per iteration: {:?}", train.losses());
    }
    print!("{}", report.table());
    Ok(())
}
