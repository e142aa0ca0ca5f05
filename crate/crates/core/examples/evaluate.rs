//! Evaluates a saved checkpoint and the content-only rankers on a held-out split.
//!
//! Run `train_hnil` first, then `cargo run --release --example evaluate -- [checkpoint]`.

use std::path::PathBuf;

use hnil::checkpoint::load_checkpoint;
use hnil::corpus::{generate_synthetic, train_test_split};
use hnil::experiment::{run_on_split, ExperimentConfig};
use hnil::{RankerKind, SynthSpec};

fn main() -> anyhow::Result<()> {
    let path = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "hnil.ckpt".into()));
    let model = load_checkpoint(&path)?.into_model()?;

    let corpus = generate_synthetic(&SynthSpec::default(), 0)?;
    let split = train_test_split(&corpus, 0.8, 0)?;
    let cfg = ExperimentConfig {
        rankers: vec![RankerKind::Vsm, RankerKind::Bm25, RankerKind::Hnil],
        ..ExperimentConfig::default()
    };
    let report = run_on_split(&corpus, &split, &cfg, Some(&model))?;
    println!("{} queries against {} indexed questions", report.split.test, report.split.train);
    print!("{}", report.table());

    let hnil = report.report(RankerKind::Hnil).expect("hnil was requested");
    let best = hnil.queries.iter().max_by(|a, b| a.ap.total_cmp(&b.ap)).expect("queries");
    println!("best hnil query {}: AP {:.3} over {} relevant", best.id, best.ap, best.relevant);
    Ok(())
}
