//! Generates a synthetic corpus, writes it as JSONL and reads it back.
//!
//! Run with `cargo run --release --example synth_corpus -- [out_dir] [seed]`.

use std::path::PathBuf;

use hnil::corpus::{generate_synthetic, load_corpus};
use hnil::SynthSpec;

fn main() -> anyhow::Result<()> {
    let mut args = std::env::args().skip(1);
    let dir = PathBuf::from(args.next().unwrap_or_else(|| "synthetic".into()));
    let seed: u64 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(0);
    std::fs::create_dir_all(&dir)?;

    let spec = SynthSpec::default();
    let corpus = generate_synthetic(&spec, seed)?;
    let questions = dir.join("questions.jsonl");
    let users = dir.join("users.jsonl");
    corpus.write_jsonl(&questions, &users)?;

    let reloaded = load_corpus(&questions, &users, 1)?;
    assert_eq!(reloaded.questions().len(), corpus.questions().len());
    println!(
        "{} questions in {} categories, {} users, vocabulary of {} tokens",
        reloaded.questions().len(),
        reloaded.categories().len(),
        reloaded.users().len(),
        reloaded.vocab().len()
    );
    for q in reloaded.question_records().take(3) {
        println!("  {} [{}] asked by {}: {}", q.id, q.category, q.asker, q.text);
    }
    println!("wrote {} and {}", questions.display(), users.display());
    Ok(())
}
