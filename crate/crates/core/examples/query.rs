//! Answers free-text queries with a trained model, with and without the asker.
//!
//! Run `train_hnil` first, then `cargo run --release --example query -- [checkpoint]`.

use std::path::PathBuf;

use hnil::checkpoint::load_checkpoint;
use hnil::corpus::{generate_synthetic, train_test_split};
use hnil::retrieval::HnilIndex;
use hnil::{QuestionRecord, SynthSpec};

fn main() -> anyhow::Result<()> {
    let path = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "hnil.ckpt".into()));
    let model = load_checkpoint(&path)?.into_model()?;
    let corpus = generate_synthetic(&SynthSpec::default(), 0)?;
    let split = train_test_split(&corpus, 0.8, 0)?;
    let index = HnilIndex::build(model, &split.train)?;

    let held_out = &split.test[0].record;
    println!("query {}: {}", held_out.id, held_out.text);
    println!("relevant group {}", held_out.dup_group.as_deref().unwrap_or("-"));
    for asker in [held_out.asker.as_str(), "nobody"] {
        let query = QuestionRecord {
            id: held_out.id.clone(),
            asker: asker.to_owned(),
            ..held_out.clone()
        };
        let v = index.model().encode_record(&query, true)?;
        let ranked = index.rank_vector(&v, &query.id, 5)?;
        println!("asked by {asker}:");
        for hit in ranked.iter() {
            let q = &split.train.questions()[split.train.question_ordinal(&hit.id).expect("indexed")];
            println!(
                "  {:.3} {} [{}] {}",
                hit.score,
                hit.id,
                q.record.dup_group.as_deref().unwrap_or("-"),
                q.record.text
            );
        }
    }
    Ok(())
}
