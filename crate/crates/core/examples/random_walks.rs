//! Builds the question/user/category graph of a small corpus and samples walks.
//!
//! Run with `cargo run --release --example random_walks`.

use hnil::corpus::generate_synthetic;
use hnil::hetnet::{extract_windows, sample_walk_set};
use hnil::{HetGraph, HetNode, SynthSpec};

fn main() -> anyhow::Result<()> {
    let spec = SynthSpec {
        num_topics: 2,
        groups_per_topic: 3,
        questions_per_group: 3,
        users_per_topic_cluster: 8,
        ..SynthSpec::default()
    };
    let corpus = generate_synthetic(&spec, 1)?;
    let graph = HetGraph::build(&corpus);
    println!(
        "{} nodes ({} questions, {} users, {} categories), {} edges",
        graph.num_nodes(),
        graph.num_questions(),
        graph.num_users(),
        graph.num_categories(),
        graph.num_edges()
    );

    let walks = sample_walk_set(&graph, 2, 6, 7);
    println!("{} walks of at most 6 nodes", walks.len());
    let label = |n: HetNode| match n {
        HetNode::Question(i) => corpus.questions()[i].id().to_owned(),
        HetNode::User(i) => corpus.users()[i].id.clone(),
        HetNode::Category(i) => corpus.categories()[i].clone(),
    };
    for walk in walks.iter().take(4) {
        let names: Vec<String> = walk.nodes.iter().map(|&n| label(n)).collect();
        println!("  {}", names.join(" -> "));
    }

    let window = &extract_windows(&walks[0], 2)[2];
    let context: Vec<String> = window.context.iter().map(|&n| label(n)).collect();
    println!("window around {}: {}", label(window.center), context.join(", "));
    Ok(())
}
