//! Sweeps the walk length and reports HNIL retrieval quality for each value.
//!
//! Run with `cargo run --release --example sweep -- [walk_len|walks|dim] [v1,v2,...]`.

use hnil::corpus::generate_synthetic;
use hnil::experiment::{sweep, ExperimentConfig, SweepParam};
use hnil::SynthSpec;

fn main() -> anyhow::Result<()> {
    let mut args = std::env::args().skip(1);
    let param: SweepParam = args.next().unwrap_or_else(|| "walk_len".into()).parse()?;
    let values: Vec<usize> = args
        .next()
        .unwrap_or_else(|| "2,4,6,8".into())
        .split(',')
        .map(str::parse)
        .collect::<Result<_, _>>()?;

    let corpus = generate_synthetic(&SynthSpec::default(), 0)?;
    let report = sweep(&corpus, &ExperimentConfig::default(), param, &values)?;
    print!("{}", report.table());
    Ok(())
}
