//! MAP, P@N and MRR over ranked lists.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, QuestionRecord};
use crate::error::{Error, Result};
use crate::retrieval::{RankedList, Ranker};

pub const DEFAULT_K_EVAL: usize = 20;

/// Query id → ids of relevant indexed questions.
pub type RelevanceJudgments = BTreeMap<String, BTreeSet<String>>;

/// Judges as relevant every indexed question that shares the query's `dup_group`.
pub fn judgments_from_groups<'a>(
    index: &Corpus,
    queries: impl IntoIterator<Item = &'a QuestionRecord>,
) -> RelevanceJudgments {
    let mut by_group: HashMap<&str, BTreeSet<String>> = HashMap::new();
    for q in index.question_records() {
        if let Some(g) = &q.dup_group {
            by_group.entry(g).or_default().insert(q.id.clone());
        }
    }
    queries
        .into_iter()
        .map(|q| {
            let mut rel = q
                .dup_group
                .as_deref()
                .and_then(|g| by_group.get(g))
                .cloned()
                .unwrap_or_default();
            rel.remove(&q.id);
            (q.id.clone(), rel)
        })
        .collect()
}

/// `(1/N) Σ_j (relevant in top j / j) · 1(item j relevant)`, with `N` the total
/// number of relevant questions, retrieved or not.
pub fn average_precision(
    ranked: &RankedList,
    relevant: &BTreeSet<String>,
    total_relevant: usize,
) -> Result<f64> {
    if total_relevant == 0 {
        return Err(Error::Data(
            "average precision is undefined without relevant questions".into(),
        ));
    }
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (j, item) in ranked.iter().enumerate() {
        if relevant.contains(&item.id) {
            hits += 1;
            sum += hits as f64 / (j + 1) as f64;
        }
    }
    Ok(sum / total_relevant as f64)
}

pub fn mean_average_precision(aps: &[f64]) -> Result<f64> {
    mean(aps, "mean average precision")
}

/// Relevant share of the top `n`; missing slots count as irrelevant.
pub fn precision_at_n(ranked: &RankedList, relevant: &BTreeSet<String>, n: usize) -> f64 {
    assert!(n >= 1, "precision cutoff must be positive");
    let hits = ranked
        .iter()
        .take(n)
        .filter(|item| relevant.contains(&item.id))
        .count();
    hits as f64 / n as f64
}

/// 1-based rank of the first relevant item.
pub fn first_relevant_rank(ranked: &RankedList, relevant: &BTreeSet<String>) -> Option<usize> {
    ranked
        .iter()
        .position(|item| relevant.contains(&item.id))
        .map(|p| p + 1)
}

/// Mean of `1/rank`, with queries lacking a relevant result contributing zero.
pub fn mean_reciprocal_rank(ranks: &[Option<usize>]) -> Result<f64> {
    let rr: Vec<f64> = ranks.iter().map(|r| r.map_or(0.0, |r| 1.0 / r as f64)).collect();
    mean(&rr, "mean reciprocal rank")
}

fn mean(values: &[f64], what: &str) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::Data(format!("{what} over an empty query set")));
    }
    Ok(values.iter().sum::<f64>() / values.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryEval {
    pub id: String,
    pub relevant: usize,
    pub ap: f64,
    pub p1: f64,
    pub p5: f64,
    pub rr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub ranker: String,
    pub map: f64,
    pub p1: f64,
    pub p5: f64,
    pub mrr: f64,
    pub k_eval: usize,
    /// Queries skipped because nothing relevant was indexed for them.
    pub excluded: usize,
    pub queries: Vec<QueryEval>,
}

/// Ranks every query to depth `k_eval` and aggregates the four metrics in
/// query-id order.
pub fn evaluate(
    ranker: &dyn Ranker,
    queries: &[QuestionRecord],
    judgments: &RelevanceJudgments,
    k_eval: usize,
) -> Result<EvalReport> {
    let mut judged: Vec<(&QuestionRecord, &BTreeSet<String>)> = Vec::new();
    let mut excluded = 0;
    for q in queries {
        match judgments.get(&q.id) {
            Some(rel) if !rel.is_empty() => judged.push((q, rel)),
            _ => excluded += 1,
        }
    }
    judged.sort_by(|a, b| a.0.id.cmp(&b.0.id));
    let per_query = judged
        .par_iter()
        .map(|&(q, rel)| -> Result<QueryEval> {
            let ranked = ranker.rank(q, k_eval)?;
            Ok(QueryEval {
                id: q.id.clone(),
                relevant: rel.len(),
                ap: average_precision(&ranked, rel, rel.len())?,
                p1: precision_at_n(&ranked, rel, 1),
                p5: precision_at_n(&ranked, rel, 5),
                rr: first_relevant_rank(&ranked, rel).map_or(0.0, |r| 1.0 / r as f64),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let column = |f: fn(&QueryEval) -> f64| per_query.iter().map(f).collect::<Vec<f64>>();
    Ok(EvalReport {
        ranker: ranker.name().to_owned(),
        map: mean_average_precision(&column(|q| q.ap))?,
        p1: mean(&column(|q| q.p1), "P@1")?,
        p5: mean(&column(|q| q.p5), "P@5")?,
        mrr: mean(&column(|q| q.rr), "mean reciprocal rank")?,
        k_eval,
        excluded,
        queries: per_query,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::retrieval::Scored;

    fn list(ids: &[&str]) -> RankedList {
        RankedList::new(
            ids.iter()
                .enumerate()
                .map(|(i, id)| Scored {
                    id: id.to_string(),
                    score: -(i as f64),
                })
                .collect(),
        )
    }

    fn set(ids: &[&str]) -> BTreeSet<String> {
        ids.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn ap_examples() {
        let ap = average_precision(&list(&["a", "x", "b"]), &set(&["a", "b"]), 2).unwrap();
        assert!((ap - 5.0 / 6.0).abs() < 1e-15);
        let perfect = average_precision(&list(&["a", "b"]), &set(&["a", "b"]), 2).unwrap();
        assert_eq!(perfect, 1.0);
        assert_eq!(average_precision(&list(&["x", "y"]), &set(&["a"]), 1).unwrap(), 0.0);
        assert!(average_precision(&list(&["a"]), &set(&[]), 0).is_err());
    }

    #[test]
    fn map_examples() {
        assert_eq!(mean_average_precision(&[1.0, 0.0]).unwrap(), 0.5);
        assert_eq!(mean_average_precision(&[0.3]).unwrap(), 0.3);
        let m = mean_average_precision(&[5.0 / 6.0, 1.0, 0.25]).unwrap();
        assert!((m - (5.0 / 6.0 + 1.25) / 3.0).abs() < 1e-15);
        assert!((m - 0.694_444_444_444_444_4).abs() < 1e-12);
        assert!(mean_average_precision(&[]).is_err());
    }

    #[test]
    fn precision_examples() {
        let rel = set(&["a", "b", "e"]);
        assert!((precision_at_n(&list(&["a", "b", "c", "d", "e"]), &rel, 5) - 0.6).abs() < 1e-15);
        assert_eq!(precision_at_n(&list(&[]), &rel, 5), 0.0);
        assert_eq!(precision_at_n(&list(&["a"]), &rel, 1), 1.0);
        // Short lists keep the full denominator.
        assert_eq!(precision_at_n(&list(&["a"]), &rel, 5), 0.2);
    }

    #[test]
    fn mrr_examples() {
        assert_eq!(mean_reciprocal_rank(&[Some(2)]).unwrap(), 0.5);
        assert_eq!(mean_reciprocal_rank(&[Some(2), Some(4)]).unwrap(), 0.375);
        assert_eq!(mean_reciprocal_rank(&[None]).unwrap(), 0.0);
        assert!(mean_reciprocal_rank(&[]).is_err());
    }
}
