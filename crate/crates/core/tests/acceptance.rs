//! Acceptance gate: prints one PASS/FAIL line per criterion.
//!
//! Run with `cargo test --release --test acceptance`. The process exits
//! non-zero on a FAIL only when `ACCEPTANCE_STRICT` is set, so the full test
//! suite still reports the remaining targets when a criterion is missed.

mod common;

use std::collections::BTreeSet;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

use hnil::checkpoint::{decode_checkpoint, encode_checkpoint};
use hnil::corpus::generate_synthetic;
use hnil::encoder::{encode_tokens, init_params, lstm_step, LstmState};
use hnil::experiment::{run_experiment, sweep, ExperimentConfig, SweepParam};
use hnil::gradcheck::{gradcheck, GradcheckSpec};
use hnil::hetnet::{random_walk, sample_walk_set};
use hnil::metrics::{
    average_precision, first_relevant_rank, mean_average_precision, mean_reciprocal_rank,
    precision_at_n,
};
use hnil::training::train;
use hnil::{Dims, HetGraph, HetNode, Hyper, ModelParams, RankedList, RankerKind, Scored, SynthSpec};

const GRAD_TOLERANCE: f64 = 1e-4;
const METRIC_TOLERANCE: f64 = 1e-12;
const METRIC_INSTANCES: usize = 1000;
const HOP_SAMPLES: usize = 10_000;
const HOP_TOLERANCE: f64 = 0.02;
const LSTM_TOLERANCE: f64 = 1e-12;
const POOL_QUESTIONS: usize = 100;
const LOSS_RATIO: f64 = 0.5;
const MAP_MARGIN: f64 = 0.02;
const ORDERING_SEEDS: u64 = 5;
const SWEEP_LENGTHS: [usize; 4] = [2, 4, 6, 8];

struct Verdict {
    passed: bool,
    detail: String,
}

fn verdict(passed: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        passed,
        detail: detail.into(),
    }
}

fn within(elapsed: Duration, budget_secs: u64) -> bool {
    elapsed <= Duration::from_secs(budget_secs)
}

fn gradient_correctness() -> Verdict {
    let started = Instant::now();
    let mut worst: f64 = 0.0;
    for seed in 0..5 {
        let report = gradcheck(&GradcheckSpec::default(), seed).expect("gradcheck runs");
        worst = worst.max(report.max_rel_error);
    }
    let t = started.elapsed();
    verdict(
        worst < GRAD_TOLERANCE && within(t, 30),
        format!("max relative error {worst:.2e} over 5 seeds in {:.1}s", t.as_secs_f64()),
    )
}

fn metric_oracle() -> Verdict {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    let (mut aps, mut ranks, mut naive_aps, mut naive_rrs) = (vec![], vec![], vec![], vec![]);
    for _ in 0..METRIC_INSTANCES {
        let n = rng.random_range(1..40);
        let mut ids: Vec<String> = (0..n + 10).map(|i| format!("d{i}")).collect();
        ids.shuffle(&mut rng);
        let relevant: BTreeSet<String> = ids
            .iter()
            .filter(|_| rng.random_bool(0.2))
            .cloned()
            .chain(std::iter::once(ids[n + 3].clone()))
            .collect();
        ids.truncate(n);
        let list = RankedList::new(
            ids.iter()
                .enumerate()
                .map(|(i, id)| Scored {
                    id: id.clone(),
                    score: (n - i) as f64,
                })
                .collect(),
        );
        let (ap, p1, p5, rr) = common::naive_metrics(&ids, &relevant);
        let got_ap = average_precision(&list, &relevant, relevant.len()).unwrap();
        for (a, b) in [
            (got_ap, ap),
            (precision_at_n(&list, &relevant, 1), p1),
            (precision_at_n(&list, &relevant, 5), p5),
        ] {
            worst = worst.max((a - b).abs());
        }
        aps.push(got_ap);
        ranks.push(first_relevant_rank(&list, &relevant));
        naive_aps.push(ap);
        naive_rrs.push(rr);
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    worst = worst.max((mean_average_precision(&aps).unwrap() - mean(&naive_aps)).abs());
    worst = worst.max((mean_reciprocal_rank(&ranks).unwrap() - mean(&naive_rrs)).abs());

    let ids: Vec<String> = ["a", "b", "c"].map(String::from).to_vec();
    let list = RankedList::new(ids.iter().map(|id| Scored { id: id.clone(), score: 0.0 }).collect());
    let rel: BTreeSet<String> = ["a", "c"].map(String::from).into();
    let ap = average_precision(&list, &rel, 2).unwrap();
    let mrr = mean_reciprocal_rank(&[Some(2), Some(4)]).unwrap();
    let fixtures = (ap - 5.0 / 6.0).abs() < METRIC_TOLERANCE && (mrr - 0.375).abs() < METRIC_TOLERANCE;
    let t = started.elapsed();
    verdict(
        worst < METRIC_TOLERANCE && fixtures && within(t, 5),
        format!(
            "max deviation {worst:.1e} over {METRIC_INSTANCES} instances, AP fixture {ap:.6}, MRR fixture {mrr}, {:.2}s",
            t.as_secs_f64()
        ),
    )
}

fn walk_statistics() -> Verdict {
    let started = Instant::now();
    let leaves = 8;
    let corpus = common::star_corpus(leaves);
    let graph = HetGraph::build(&corpus);
    let hub = HetNode::User(corpus.user_ordinal("hub").unwrap());
    let mut counts = vec![0usize; leaves];
    for i in 0..HOP_SAMPLES {
        let mut rng = hnil::rng::stream(11, &[i as u64]);
        let walk = random_walk(&graph, hub, 2, &mut rng);
        let HetNode::User(u) = walk.nodes[1] else {
            return verdict(false, "hub stepped to a non-user node");
        };
        counts[u - 1] += 1;
    }
    let worst = counts
        .iter()
        .map(|&c| (c as f64 / HOP_SAMPLES as f64 - 1.0 / leaves as f64).abs())
        .fold(0.0, f64::max);
    let walks = sample_walk_set(&graph, 3, 6, 5);
    let count_ok = walks.len() == 3 * graph.num_nodes();
    let edges_ok = walks
        .iter()
        .all(|w| w.nodes.windows(2).all(|p| graph.has_edge(p[0], p[1])));
    let t = started.elapsed();
    verdict(
        worst <= HOP_TOLERANCE && count_ok && edges_ok && within(t, 5),
        format!(
            "max next-hop deviation {worst:.4} at {HOP_SAMPLES} samples, walk count {} = 3 x {}, all hops are edges: {edges_ok}",
            walks.len(),
            graph.num_nodes()
        ),
    )
}

fn random_params(rng: &mut ChaCha8Rng) -> ModelParams {
    let dims = Dims {
        word: rng.random_range(1..9),
        hidden: rng.random_range(1..9),
        user: rng.random_range(1..5),
    };
    let mut p = init_params(dims, 12, 3, rng.random());
    for t in p.tensors_mut() {
        t.data.iter_mut().for_each(|x| *x = rng.random_range(-1.5..1.5));
    }
    p
}

fn encoder_oracle() -> Verdict {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst: f64 = 0.0;
    for _ in 0..500 {
        let p = random_params(&mut rng);
        let n = p.dims.hidden;
        let x: Vec<f64> = (0..p.dims.word).map(|_| rng.random_range(-2.0..2.0)).collect();
        let prev = LstmState {
            h: (0..n).map(|_| rng.random_range(-1.0..1.0)).collect(),
            c: (0..n).map(|_| rng.random_range(-2.0..2.0)).collect(),
        };
        let got = lstm_step(&p, &x, &prev).unwrap();
        let (h, c) = common::straight_line_step(&p, &x, &prev.h, &prev.c);
        for (a, b) in got.h.iter().zip(&h).chain(got.c.iter().zip(&c)) {
            worst = worst.max((a - b).abs());
        }
    }
    let zero = ModelParams::zeros(Dims { word: 5, hidden: 4, user: 2 }, 3, 1);
    let x = vec![0.7, -1.0, 2.0, 0.1, 3.0];
    let zero_ok = lstm_step(&zero, &x, &LstmState::zeros(4))
        .unwrap()
        .h
        .iter()
        .all(|&v| v == 0.0);
    let mut pool_ok = true;
    for _ in 0..POOL_QUESTIONS {
        let p = random_params(&mut rng);
        let sentences: Vec<Vec<u32>> = (0..rng.random_range(1..6))
            .map(|_| (0..rng.random_range(1..7)).map(|_| rng.random_range(0..12)).collect())
            .collect();
        let mut shuffled = sentences.clone();
        shuffled.shuffle(&mut rng);
        let a = encode_tokens(&p, &sentences, Some(1), true).unwrap();
        let b = encode_tokens(&p, &shuffled, Some(1), true).unwrap();
        pool_ok &= a == b;
    }
    let t = started.elapsed();
    verdict(
        worst < LSTM_TOLERANCE && zero_ok && pool_ok && within(t, 5),
        format!(
            "max deviation {worst:.1e} from the straight-line step, zero model gives zero state: {zero_ok}, permutation invariant on {POOL_QUESTIONS} questions: {pool_ok}"
        ),
    )
}

fn training_progress() -> Verdict {
    let started = Instant::now();
    let corpus = generate_synthetic(&SynthSpec::default(), 0).unwrap();
    let (_, report) = train(&corpus, &Hyper::default()).unwrap();
    let losses = report.losses();
    let (first, last) = (losses[0], *losses.last().unwrap());
    let t = started.elapsed();
    verdict(
        last < LOSS_RATIO * first && within(t, 180),
        format!(
            "loss {first:.1} -> {last:.1} (ratio {:.3}) in {:.0}s",
            last / first,
            t.as_secs_f64()
        ),
    )
}

fn qualitative_ordering() -> Verdict {
    let started = Instant::now();
    let mut map = [0.0; 4];
    let mut mrr = [0.0; 4];
    for seed in 0..ORDERING_SEEDS {
        let corpus = generate_synthetic(&SynthSpec::default(), seed).unwrap();
        let mut cfg = ExperimentConfig::default();
        cfg.hyper.seed = seed;
        cfg.split_seed = seed;
        let report = run_experiment(&corpus, &cfg).unwrap();
        for (i, kind) in RankerKind::ALL.iter().enumerate() {
            let r = report.report(*kind).unwrap();
            map[i] += r.map / ORDERING_SEEDS as f64;
            mrr[i] += r.mrr / ORDERING_SEEDS as f64;
        }
    }
    let hnil = RankerKind::ALL.iter().position(|k| *k == RankerKind::Hnil).unwrap();
    let margin_ok = (0..4).filter(|&i| i != hnil).all(|i| map[hnil] - map[i] >= MAP_MARGIN);
    let mrr_ok = (0..4).all(|i| mrr[hnil] >= mrr[i]);
    let summary: Vec<String> = RankerKind::ALL
        .iter()
        .enumerate()
        .map(|(i, k)| format!("{k} MAP {:.4} MRR {:.4}", map[i], mrr[i]))
        .collect();
    let t = started.elapsed();
    verdict(
        margin_ok && mrr_ok && within(t, 900),
        format!("mean over {ORDERING_SEEDS} seeds: {} ({:.0}s)", summary.join(", "), t.as_secs_f64()),
    )
}

fn sweep_shape() -> Verdict {
    let started = Instant::now();
    let corpus = generate_synthetic(&SynthSpec::default(), 0).unwrap();
    let report = sweep(&corpus, &ExperimentConfig::default(), SweepParam::WalkLen, &SWEEP_LENGTHS).unwrap();
    let rows_ok = report.rows.len() == 4
        && report.table().lines().count() == 5
        && report.rows.iter().zip(SWEEP_LENGTHS).all(|(r, v)| r.value == v);
    let base = report.rows[0].map;
    let longer_ok = report.rows[1..].iter().all(|r| r.map > base);
    let maps: Vec<String> = report
        .rows
        .iter()
        .map(|r| format!("{}: {:.4}", r.value, r.map))
        .collect();
    let t = started.elapsed();
    verdict(
        rows_ok && longer_ok && within(t, 1800),
        format!("MAP by walk_len {} ({:.0}s)", maps.join(", "), t.as_secs_f64()),
    )
}

fn cli(args: &[&str]) -> Option<Value> {
    let out = Command::new(env!("CARGO_BIN_EXE_hnil")).args(args).output().ok()?;
    if !out.status.success() {
        return None;
    }
    serde_json::from_slice(&out.stdout).ok()
}

fn has_keys(v: &Option<Value>, keys: &[&str]) -> bool {
    v.as_ref()
        .is_some_and(|v| keys.iter().all(|k| v.get(k).is_some()))
}

fn determinism_and_persistence() -> Verdict {
    let started = Instant::now();
    let corpus = generate_synthetic(&common::small_spec(), 6).unwrap();
    let hyper = Hyper {
        dims: Dims::from_total(24),
        iters: 2,
        seed: 6,
        ..Hyper::default()
    };
    let bytes = || {
        let (p, _) = train(&corpus, &hyper).unwrap();
        encode_checkpoint(&p, &hyper, corpus.vocab(), &corpus.user_ids()).unwrap()
    };
    let (a, b) = (bytes(), bytes());
    let identical = a == b;
    let restored = decode_checkpoint(&a).unwrap();
    let round_trip = encode_checkpoint(&restored.params, &restored.meta.hyper, &restored.meta.vocab(), &restored.meta.user_ids)
        .unwrap()
        == a;

    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap().to_owned();
    let (q, u, ck) = (format!("{d}/questions.jsonl"), format!("{d}/users.jsonl"), format!("{d}/m.ckpt"));
    let small = ["--num-topics", "3", "--groups-per-topic", "3", "--users-per-topic-cluster", "8"];
    let fast = ["--dim", "16", "--iters", "2", "--walks", "3"];
    let corpus_flags = ["--questions", q.as_str(), "--users", u.as_str()];
    let args = |head: &[&str], tail: &[&str]| -> Vec<String> {
        head.iter().chain(tail).map(|s| s.to_string()).collect::<Vec<_>>()
    };
    let run = |v: Vec<String>| cli(&v.iter().map(String::as_str).collect::<Vec<_>>());
    let synth = run(args(&["synth", "--out", &d], &small));
    let mut train_args = args(&["train", "--checkpoint", &ck], &corpus_flags);
    train_args.extend(fast.map(String::from));
    let trained = run(train_args);
    let mut eval_args = args(&["eval", "--checkpoint", &ck], &corpus_flags);
    eval_args.extend(fast.map(String::from));
    let eval = run(eval_args);
    let mut sweep_args = args(&["sweep", "--param", "walks", "--values", "2,3"], &corpus_flags);
    sweep_args.extend(fast.map(String::from));
    let swept = run(sweep_args);
    let query = run(args(&["query", "--checkpoint", &ck, "--text", "how do i fix this", "--k", "4"], &corpus_flags));
    let grad = cli(&["gradcheck", "--seed", "1"]);
    let schemas = [
        has_keys(&synth, &["seed", "spec", "questions_path", "users_path", "stats"]),
        has_keys(&trained, &["checkpoint", "losses", "report", "parameters"]),
        has_keys(&eval, &["split", "reports", "table"])
            && eval.as_ref().unwrap()["reports"].as_array().is_some_and(|r| {
                r.len() == 4 && r.iter().all(|r| ["ranker", "map", "p1", "p5", "mrr"].iter().all(|k| r.get(k).is_some()))
            }),
        has_keys(&swept, &["param", "rows", "table"]),
        query.as_ref().and_then(Value::as_array).is_some_and(|hits| {
            hits.len() == 4 && hits.iter().all(|h| h["id"].is_string() && h["score"].is_number())
        }),
        has_keys(&grad, &["max_rel_error", "passed", "tensors", "tolerance"]),
    ];
    let schemas_ok = schemas.iter().all(|&ok| ok);
    let t = started.elapsed();
    verdict(
        identical && round_trip && schemas_ok && within(t, 120),
        format!(
            "repeat training bit-identical: {identical}, save/load bitwise: {round_trip}, CLI JSON schemas {:?}, {:.0}s",
            schemas,
            t.as_secs_f64()
        ),
    )
}

fn main() {
    type Check = fn() -> Verdict;
    let criteria: [(&str, Check); 8] = [
        ("gradient correctness", gradient_correctness),
        ("metric oracle equivalence", metric_oracle),
        ("walk-sampler statistics", walk_statistics),
        ("LSTM/encoder oracle", encoder_oracle),
        ("training progress", training_progress),
        ("qualitative ordering", qualitative_ordering),
        ("sensitivity sweep shape", sweep_shape),
        ("determinism and persistence", determinism_and_persistence),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let v = check();
        failed += usize::from(!v.passed);
        println!(
            "criterion {}: {} - {name}: {}",
            i + 1,
            if v.passed { "PASS" } else { "FAIL" },
            v.detail
        );
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 && std::env::var_os("ACCEPTANCE_STRICT").is_some() {
        std::process::exit(1);
    }
}
