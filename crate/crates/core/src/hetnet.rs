//! The heterogeneous question/user/category graph and truncated random walks over it.

use std::io::Write;

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum HetNode {
    Question(usize),
    User(usize),
    Category(usize),
}

impl HetNode {
    pub fn as_question(self) -> Option<usize> {
        match self {
            HetNode::Question(q) => Some(q),
            _ => None,
        }
    }

    pub fn as_user(self) -> Option<usize> {
        match self {
            HetNode::User(u) => Some(u),
            _ => None,
        }
    }
}

/// Relative transition weights per edge type. All ones gives a uniform walk.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdgeWeights {
    pub question_user: f64,
    pub question_category: f64,
    pub user_user: f64,
}

impl Default for EdgeWeights {
    fn default() -> Self {
        Self {
            question_user: 1.0,
            question_category: 1.0,
            user_user: 1.0,
        }
    }
}

impl EdgeWeights {
    fn is_uniform(&self) -> bool {
        self.question_user == self.question_category && self.question_category == self.user_user
    }

    fn between(&self, a: HetNode, b: HetNode) -> f64 {
        use HetNode::*;
        match (a, b) {
            (Question(_), User(_)) | (User(_), Question(_)) => self.question_user,
            (Question(_), Category(_)) | (Category(_), Question(_)) => self.question_category,
            (User(_), User(_)) => self.user_user,
            _ => 0.0,
        }
    }
}

/// Undirected graph over question, user and category nodes.
///
/// Node ids are dense: questions first, then users, then categories.
#[derive(Debug, Clone, PartialEq)]
pub struct HetGraph {
    num_questions: usize,
    num_users: usize,
    num_categories: usize,
    adjacency: Vec<Vec<HetNode>>,
    weights: EdgeWeights,
}

impl HetGraph {
    /// Links every question to its asker and its category, and every pair of friends.
    pub fn build(corpus: &Corpus) -> Self {
        let nq = corpus.questions().len();
        let nu = corpus.users().len();
        let nc = corpus.categories().len();
        let mut adjacency = vec![Vec::new(); nq + nu + nc];
        let mut g = Self {
            num_questions: nq,
            num_users: nu,
            num_categories: nc,
            adjacency: Vec::new(),
            weights: EdgeWeights::default(),
        };
        for (i, q) in corpus.questions().iter().enumerate() {
            let (a, b, c) = (HetNode::Question(i), HetNode::User(q.asker), HetNode::Category(q.category));
            adjacency[g.id(a)].push(b);
            adjacency[g.id(b)].push(a);
            adjacency[g.id(a)].push(c);
            adjacency[g.id(c)].push(a);
        }
        for u in 0..nu {
            for &f in corpus.friends_of(u) {
                adjacency[g.id(HetNode::User(u))].push(HetNode::User(f));
            }
        }
        for list in &mut adjacency {
            list.sort_unstable();
            list.dedup();
        }
        g.adjacency = adjacency;
        g
    }

    pub fn with_edge_weights(mut self, weights: EdgeWeights) -> Self {
        self.weights = weights;
        self
    }

    pub fn num_nodes(&self) -> usize {
        self.adjacency.len()
    }

    pub fn num_questions(&self) -> usize {
        self.num_questions
    }

    pub fn num_users(&self) -> usize {
        self.num_users
    }

    pub fn num_categories(&self) -> usize {
        self.num_categories
    }

    pub fn num_edges(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    /// Dense id of a node.
    pub fn id(&self, node: HetNode) -> usize {
        match node {
            HetNode::Question(i) => i,
            HetNode::User(i) => self.num_questions + i,
            HetNode::Category(i) => self.num_questions + self.num_users + i,
        }
    }

    pub fn node(&self, id: usize) -> HetNode {
        let (nq, nu) = (self.num_questions, self.num_users);
        if id < nq {
            HetNode::Question(id)
        } else if id < nq + nu {
            HetNode::User(id - nq)
        } else {
            HetNode::Category(id - nq - nu)
        }
    }

    pub fn nodes(&self) -> impl Iterator<Item = HetNode> + '_ {
        (0..self.num_nodes()).map(|i| self.node(i))
    }

    /// Sorted neighbor list.
    pub fn neighbors(&self, node: HetNode) -> &[HetNode] {
        &self.adjacency[self.id(node)]
    }

    pub fn has_edge(&self, a: HetNode, b: HetNode) -> bool {
        self.neighbors(a).binary_search(&b).is_ok()
    }

    fn step(&self, from: HetNode, rng: &mut rng::Rng) -> Option<HetNode> {
        let nbrs = self.neighbors(from);
        if nbrs.is_empty() {
            return None;
        }
        if self.weights.is_uniform() {
            return Some(nbrs[rng.random_range(0..nbrs.len())]);
        }
        let total: f64 = nbrs.iter().map(|&n| self.weights.between(from, n)).sum();
        if total <= 0.0 {
            return None;
        }
        let mut r = rng.random::<f64>() * total;
        for &n in nbrs {
            r -= self.weights.between(from, n);
            if r < 0.0 {
                return Some(n);
            }
        }
        nbrs.last().copied()
    }

    /// Writes one `type:id type:id` line per edge (debugging aid).
    pub fn write_edge_list(&self, corpus: &Corpus, mut out: impl Write) -> std::io::Result<()> {
        let label = |n: HetNode| match n {
            HetNode::Question(i) => format!("q:{}", corpus.questions()[i].id()),
            HetNode::User(i) => format!("u:{}", corpus.users()[i].id),
            HetNode::Category(i) => format!("c:{}", corpus.categories()[i]),
        };
        for a in self.nodes() {
            for &b in self.neighbors(a) {
                if a < b {
                    writeln!(out, "{} {}", label(a), label(b))?;
                }
            }
        }
        Ok(())
    }
}

/// A truncated random walk.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Walk {
    pub nodes: Vec<HetNode>,
}

impl Walk {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Walks from `start` for at most `max_len` nodes, stopping early at a node
/// without neighbors.
pub fn random_walk(graph: &HetGraph, start: HetNode, max_len: usize, rng: &mut rng::Rng) -> Walk {
    let mut nodes = Vec::with_capacity(max_len.max(1));
    nodes.push(start);
    let mut cur = start;
    while nodes.len() < max_len {
        match graph.step(cur, rng) {
            Some(next) => {
                nodes.push(next);
                cur = next;
            }
            None => break,
        }
    }
    Walk { nodes }
}

/// `passes` rounds of one walk per vertex, each round over a fresh shuffle of
/// the vertex set. Walk `(pass, vertex)` draws from its own seeded stream, so the
/// result does not depend on the rayon pool size.
pub fn sample_walk_set(graph: &HetGraph, passes: usize, max_len: usize, seed: u64) -> Vec<Walk> {
    use rand::seq::SliceRandom;
    let mut walks = Vec::with_capacity(passes * graph.num_nodes());
    for pass in 0..passes {
        let mut order: Vec<usize> = (0..graph.num_nodes()).collect();
        order.shuffle(&mut rng::stream(seed, &[rng::TAG_SHUFFLE, pass as u64]));
        let batch: Vec<Walk> = order
            .par_iter()
            .map(|&v| {
                let mut rng = rng::stream(seed, &[rng::TAG_WALK, pass as u64, v as u64]);
                random_walk(graph, graph.node(v), max_len, &mut rng)
            })
            .collect();
        walks.extend(batch);
    }
    walks
}

/// A walk position together with the nodes within `w` steps of it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Window {
    pub center: HetNode,
    pub context: Vec<HetNode>,
}

/// One window per walk position; context positions are clipped at the walk ends.
pub fn extract_windows(walk: &Walk, w: usize) -> Vec<Window> {
    let n = walk.nodes.len();
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(w);
            let hi = (i + w + 1).min(n);
            let context = (lo..hi)
                .filter(|&j| j != i)
                .map(|j| walk.nodes[j])
                .collect();
            Window {
                center: walk.nodes[i],
                context,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{QuestionRecord, UserRecord};
    use HetNode::*;

    fn corpus(qs: &[(&str, &str, &str)], users: &[(&str, &[&str])]) -> Corpus {
        let questions = qs
            .iter()
            .map(|&(id, cat, asker)| QuestionRecord {
                id: id.into(),
                text: format!("text of {id}"),
                category: cat.into(),
                asker: asker.into(),
                dup_group: None,
            })
            .collect();
        let users = users
            .iter()
            .map(|&(id, fs)| UserRecord {
                id: id.into(),
                friends: fs.iter().map(|s| s.to_string()).collect(),
            })
            .collect();
        Corpus::from_records(questions, users, 1).unwrap()
    }

    #[test]
    fn single_question_has_two_edges() {
        let g = HetGraph::build(&corpus(&[("q", "c", "u")], &[("u", &[])]));
        assert_eq!(g.num_edges(), 2);
        assert!(g.has_edge(Question(0), User(0)));
        assert!(g.has_edge(Category(0), Question(0)));
    }

    #[test]
    fn friends_without_questions() {
        let g = HetGraph::build(&corpus(&[], &[("a", &["b"]), ("b", &[])]));
        assert_eq!(g.num_edges(), 1);
        assert!(g.has_edge(User(1), User(0)));
    }

    #[test]
    fn fig1_motif() {
        // q5, q6 in c3 asked by friends u2, u3; q7 in c3 asked by unrelated u4.
        let c = corpus(
            &[("q5", "c3", "u2"), ("q6", "c3", "u3"), ("q7", "c3", "u4")],
            &[("u2", &["u3"]), ("u3", &[]), ("u4", &[])],
        );
        let g = HetGraph::build(&c);
        let (q5, q6, q7) = (Question(0), Question(1), Question(2));
        let (u2, u3, u4) = (User(0), User(1), User(2));
        let path = [q5, u2, u3, q6];
        assert!(path.windows(2).all(|e| g.has_edge(e[0], e[1])));
        assert_eq!(path.len() - 1, 3);
        // Users reachable from q7's asker through user-user edges only.
        let mut seen = vec![u4];
        let mut frontier = vec![u4];
        while let Some(u) = frontier.pop() {
            for &n in g.neighbors(u) {
                if matches!(n, User(_)) && !seen.contains(&n) {
                    seen.push(n);
                    frontier.push(n);
                }
            }
        }
        assert!(!seen.contains(&u2) && !seen.contains(&u3));
        assert!(g.has_edge(q7, u4));
    }

    #[test]
    fn isolated_node_walk() {
        let g = HetGraph::build(&corpus(&[], &[("a", &[])]));
        let w = random_walk(&g, User(0), 6, &mut rng::stream(0, &[]));
        assert_eq!(w.nodes, vec![User(0)]);
    }

    #[test]
    fn two_node_path_walk() {
        let g = HetGraph::build(&corpus(&[], &[("a", &["b"]), ("b", &[])]));
        let w = random_walk(&g, User(0), 4, &mut rng::stream(0, &[]));
        assert_eq!(w.nodes, vec![User(0), User(1), User(0), User(1)]);
    }

    #[test]
    fn walk_count_and_determinism() {
        let c = corpus(
            &[("q1", "a", "x"), ("q2", "b", "y"), ("q3", "a", "y")],
            &[("x", &["y"]), ("y", &[])],
        );
        let g = HetGraph::build(&c);
        assert_eq!(g.num_nodes(), 7);
        let walks = sample_walk_set(&g, 10, 5, 3);
        assert_eq!(walks.len(), 70);
        assert_eq!(walks, sample_walk_set(&g, 10, 5, 3));
        // Every vertex starts exactly one walk per pass.
        for pass in walks.chunks(7) {
            let mut starts: Vec<_> = pass.iter().map(|w| w.nodes[0]).collect();
            starts.sort();
            assert_eq!(starts, g.nodes().collect::<Vec<_>>());
        }
        let first: Vec<_> = walks[..7].iter().map(|w| w.nodes[0]).collect();
        let second: Vec<_> = walks[7..14].iter().map(|w| w.nodes[0]).collect();
        assert_ne!(first, second);
    }

    #[test]
    fn window_shapes() {
        let (a, b, c) = (User(0), User(1), User(2));
        let ws = extract_windows(&Walk { nodes: vec![a, b, c] }, 1);
        assert_eq!(
            ws,
            vec![
                Window { center: a, context: vec![b] },
                Window { center: b, context: vec![a, c] },
                Window { center: c, context: vec![b] },
            ]
        );
        let single = extract_windows(&Walk { nodes: vec![a] }, 3);
        assert_eq!(single, vec![Window { center: a, context: vec![] }]);
    }

    #[test]
    fn window_slot_count_enumerated() {
        let walk = Walk {
            nodes: (0..6).map(User).collect(),
        };
        // Count pairs (i, j), i != j, |i - j| <= 2 by brute force.
        let brute = (0..6usize)
            .flat_map(|i| (0..6usize).map(move |j| (i, j)))
            .filter(|&(i, j)| i != j && i.abs_diff(j) <= 2)
            .count();
        assert_eq!(brute, 18);
        let total: usize = extract_windows(&walk, 2).iter().map(|w| w.context.len()).sum();
        assert_eq!(total, brute);
    }

    #[test]
    fn weighted_walk_respects_zero_weight() {
        let c = corpus(&[("q1", "a", "x")], &[("x", &["y"]), ("y", &[])]);
        let g = HetGraph::build(&c).with_edge_weights(EdgeWeights {
            question_user: 1.0,
            question_category: 0.0,
            user_user: 1.0,
        });
        let mut r = rng::stream(1, &[]);
        for _ in 0..100 {
            let w = random_walk(&g, Question(0), 2, &mut r);
            assert_eq!(w.nodes[1], User(0));
        }
    }
}
