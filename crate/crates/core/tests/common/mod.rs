#![allow(dead_code)]

use std::collections::BTreeSet;

use hnil::corpus::{Corpus, QuestionRecord, SynthSpec, UserRecord};
use hnil::linalg::Tensor;
use hnil::ModelParams;

/// AP, P@1, P@5 and reciprocal rank computed position by position.
pub fn naive_metrics(ranked: &[String], relevant: &BTreeSet<String>) -> (f64, f64, f64, f64) {
    let is_rel: Vec<bool> = ranked.iter().map(|id| relevant.contains(id)).collect();
    let mut ap = 0.0;
    for j in 0..is_rel.len() {
        if is_rel[j] {
            let mut hits_so_far = 0;
            for earlier in &is_rel[..=j] {
                if *earlier {
                    hits_so_far += 1;
                }
            }
            ap += hits_so_far as f64 / (j + 1) as f64;
        }
    }
    ap /= relevant.len() as f64;
    let p_at = |n: usize| {
        let mut hits = 0;
        for j in 0..n {
            if j < is_rel.len() && is_rel[j] {
                hits += 1;
            }
        }
        hits as f64 / n as f64
    };
    let mut rr = 0.0;
    for (j, r) in is_rel.iter().enumerate() {
        if *r {
            rr = 1.0 / (j + 1) as f64;
            break;
        }
    }
    (ap, p_at(1), p_at(5), rr)
}

fn sig(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn mv(m: &Tensor, x: &[f64], r: usize) -> f64 {
    let mut s = 0.0;
    for (c, xc) in x.iter().enumerate().take(m.cols) {
        s += m.data[r * m.cols + c] * xc;
    }
    s
}

/// One LSTM step written out gate by gate, with a dense cell-to-output peephole.
pub fn straight_line_step(p: &ModelParams, x: &[f64], h: &[f64], c: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let l = &p.lstm;
    let n = p.dims.hidden;
    let mut c_new = vec![0.0; n];
    for r in 0..n {
        let i = sig(mv(&l.w_i, x, r) + mv(&l.g_i, h, r) + l.b_i.data[r]);
        let cand = (mv(&l.w_c, x, r) + mv(&l.g_c, h, r) + l.b_c.data[r]).tanh();
        let f = sig(mv(&l.w_f, x, r) + mv(&l.g_f, h, r) + l.b_f.data[r]);
        c_new[r] = i * cand + f * c[r];
    }
    let mut h_new = vec![0.0; n];
    for r in 0..n {
        let o = sig(mv(&l.w_o, x, r) + mv(&l.g_o, h, r) + mv(&l.v_o, &c_new, r) + l.b_o.data[r]);
        h_new[r] = o * c_new[r].tanh();
    }
    (h_new, c_new)
}

pub fn small_spec() -> SynthSpec {
    SynthSpec {
        num_topics: 3,
        groups_per_topic: 3,
        questions_per_group: 4,
        users_per_topic_cluster: 8,
        ..SynthSpec::default()
    }
}

/// Every group is its own category, owns a rare token and is asked by its own
/// user, so group, category and asker all coincide.
pub fn oracle_corpus(groups: usize, per_group: usize) -> Corpus {
    let fillers = ["how", "do", "i", "fix", "this", "thing", "today", "please"];
    let mut questions = Vec::new();
    for g in 0..groups {
        for q in 0..per_group {
            let a = fillers[(g + q) % fillers.len()];
            let b = fillers[(g + 3 * q + 1) % fillers.len()];
            questions.push(QuestionRecord {
                id: format!("q{g:02}{q:02}"),
                text: format!("{a} marker{g} {b} marker{g}"),
                category: format!("c{g}"),
                asker: format!("u{g}"),
                dup_group: Some(format!("g{g}")),
            });
        }
    }
    let users = (0..groups)
        .map(|g| UserRecord {
            id: format!("u{g}"),
            friends: Default::default(),
        })
        .collect();
    Corpus::from_records(questions, users, 1).expect("valid oracle corpus")
}

/// A user `hub` befriended by `leaves` users, each of whom asks one question.
pub fn star_corpus(leaves: usize) -> Corpus {
    let mut users = vec![UserRecord {
        id: "hub".into(),
        friends: (0..leaves).map(|i| format!("leaf{i}")).collect(),
    }];
    users.extend((0..leaves).map(|i| UserRecord {
        id: format!("leaf{i}"),
        friends: ["hub".to_owned()].into(),
    }));
    let questions = (0..leaves)
        .map(|i| QuestionRecord {
            id: format!("q{i}"),
            text: format!("question number {i}"),
            category: format!("c{}", i % 2),
            asker: format!("leaf{i}"),
            dup_group: None,
        })
        .collect();
    Corpus::from_records(questions, users, 1).expect("valid star corpus")
}
