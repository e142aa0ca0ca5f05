//! Synthetic CQA corpora with planted topic, paraphrase-group and social structure.
//!
//! Each topic is a category with its own user cluster. Each paraphrase group
//! (a `dup_group`) expresses one concept through a few slots, every slot owning a
//! small synonym set, so two paraphrases of the same concept usually share only
//! part of their surface words. `lexical_overlap` is the fraction of a group's
//! synonyms taken from a pool shared by all groups of the topic.
//!
//! Users of a topic cluster are split into circles of [`CIRCLE_SIZE`]
//! consecutive users. Two users of one circle are friends with probability
//! [`P_CIRCLE`], two users of one cluster with probability `p_in`, and any other
//! pair with probability `p_out`. Each group is owned by one circle of its topic
//! cluster; its askers come from that circle with probability `q_align` and
//! from another cluster otherwise.

use std::collections::BTreeSet;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{Corpus, QuestionRecord, UserRecord};
use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub num_topics: usize,
    pub groups_per_topic: usize,
    pub questions_per_group: usize,
    pub users_per_topic_cluster: usize,
    pub p_in: f64,
    pub p_out: f64,
    pub q_align: f64,
    pub lexical_overlap: f64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            num_topics: 5,
            groups_per_topic: 10,
            questions_per_group: 4,
            users_per_topic_cluster: 12,
            p_in: 0.3,
            p_out: 0.01,
            q_align: 0.9,
            lexical_overlap: 0.3,
        }
    }
}

const SLOTS: usize = 3;
const SYNONYMS: usize = 3;
pub const CIRCLE_SIZE: usize = 4;
pub const P_CIRCLE: f64 = 0.7;
const TOPIC_WORDS: usize = 6;
const SHARED_POOL: usize = 8;
const AMBIGUOUS_WORDS: usize = 12;
const P_AMBIGUOUS: f64 = 0.5;
const P_SECOND_SENTENCE: f64 = 0.3;

const TEMPLATES: &[&str] = &[
    "how do i {0} the {1} {2} in {t}",
    "what is the best way to {0} {1} {2}",
    "why does my {t} {1} {0} {2}",
    "can you {0} a {1} with {2}",
    "is it possible to {0} {2} {1}",
    "what happens when {1} {0} {2} on {t}",
];
const FOLLOW_UPS: &[&str] = &["any help with {t} {s}", "i tried {s} already", "thanks for {s} tips"];

const ONSETS: &[&str] = &[
    "b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "br", "dr", "kl", "pr",
    "st", "tr",
];
const VOWELS: &[&str] = &["a", "e", "i", "o", "u", "ai", "ou"];

struct Words {
    used: BTreeSet<String>,
}

impl Words {
    fn fresh(&mut self, rng: &mut rng::Rng) -> String {
        loop {
            let syllables = rng.random_range(2..=3);
            let mut w = String::new();
            for _ in 0..syllables {
                w.push_str(ONSETS.choose(rng).unwrap());
                w.push_str(VOWELS.choose(rng).unwrap());
            }
            if rng.random_bool(0.5) {
                w.push(['n', 'r', 'x', 's'][rng.random_range(0..4)]);
            }
            if self.used.insert(w.clone()) {
                return w;
            }
        }
    }

    fn fresh_n(&mut self, n: usize, rng: &mut rng::Rng) -> Vec<String> {
        (0..n).map(|_| self.fresh(rng)).collect()
    }
}

/// Generates a corpus whose structure is fully determined by `spec` and `seed`.
pub fn generate_synthetic(spec: &SynthSpec, seed: u64) -> Result<Corpus> {
    let (questions, users) = generate_records(spec, seed)?;
    Corpus::from_records(questions, users, 1)
}

pub(crate) fn generate_records(
    spec: &SynthSpec,
    seed: u64,
) -> Result<(Vec<QuestionRecord>, Vec<UserRecord>)> {
    validate(spec)?;
    let mut rng = rng::stream(seed, &[rng::TAG_SYNTH]);
    let mut words = Words {
        used: BTreeSet::new(),
    };
    for t in TEMPLATES.iter().chain(FOLLOW_UPS) {
        for w in t.split_whitespace().filter(|w| !w.starts_with('{')) {
            words.used.insert(w.to_owned());
        }
    }

    // Users and friendships.
    let cluster = spec.users_per_topic_cluster;
    let n_users = spec.num_topics * cluster;
    let user_id = |u: usize| format!("u{u:04}");
    let circle_of = |u: usize| (u / cluster, (u % cluster) / CIRCLE_SIZE);
    let circles_per_topic = cluster.div_ceil(CIRCLE_SIZE);
    let mut friends: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n_users];
    for a in 0..n_users {
        for b in a + 1..n_users {
            let p = if circle_of(a) == circle_of(b) {
                P_CIRCLE
            } else if a / cluster == b / cluster {
                spec.p_in
            } else {
                spec.p_out
            };
            if rng.random_bool(p) {
                friends[a].insert(b);
                friends[b].insert(a);
            }
        }
    }

    let ambiguous = words.fresh_n(AMBIGUOUS_WORDS, &mut rng);
    let mut questions = Vec::new();
    for topic in 0..spec.num_topics {
        let topic_words = words.fresh_n(TOPIC_WORDS, &mut rng);
        let shared = words.fresh_n(SHARED_POOL, &mut rng);
        let members: Vec<usize> = (topic * cluster..(topic + 1) * cluster).collect();
        let outsiders: Vec<usize> = (0..n_users).filter(|u| u / cluster != topic).collect();
        for group in 0..spec.groups_per_topic {
            let slots: Vec<Vec<String>> = (0..SLOTS)
                .map(|_| {
                    (0..SYNONYMS)
                        .map(|_| {
                            if rng.random_bool(spec.lexical_overlap) {
                                shared.choose(&mut rng).unwrap().clone()
                            } else {
                                words.fresh(&mut rng)
                            }
                        })
                        .collect()
                })
                .collect();
            let c = group % circles_per_topic;
            let circle: Vec<usize> = members.iter().copied().filter(|&u| circle_of(u).1 == c).collect();
            for _ in 0..spec.questions_per_group {
                let asker = if outsiders.is_empty() || rng.random_bool(spec.q_align) {
                    *circle.choose(&mut rng).unwrap()
                } else {
                    *outsiders.choose(&mut rng).unwrap()
                };
                let text = question_text(&slots, &topic_words, &ambiguous, &mut rng);
                questions.push(QuestionRecord {
                    id: String::new(),
                    text,
                    category: format!("topic-{topic}"),
                    asker: user_id(asker),
                    dup_group: Some(format!("g{topic}-{group}")),
                });
            }
        }
    }
    questions.shuffle(&mut rng);
    for (i, q) in questions.iter_mut().enumerate() {
        q.id = format!("q{i:05}");
    }

    let users = (0..n_users)
        .map(|u| UserRecord {
            id: user_id(u),
            friends: friends[u].iter().map(|&f| user_id(f)).collect(),
        })
        .collect();
    Ok((questions, users))
}

fn validate(spec: &SynthSpec) -> Result<()> {
    let counts = [
        spec.num_topics,
        spec.groups_per_topic,
        spec.questions_per_group,
        spec.users_per_topic_cluster,
    ];
    if counts.contains(&0) {
        return Err(Error::Usage("synthetic spec counts must be positive".into()));
    }
    let unit = |x: f64| (0.0..=1.0).contains(&x);
    if ![spec.p_in, spec.p_out, spec.q_align, spec.lexical_overlap]
        .into_iter()
        .all(unit)
    {
        return Err(Error::Usage("synthetic spec probabilities must lie in [0, 1]".into()));
    }
    if spec.p_in <= spec.p_out {
        return Err(Error::Usage(format!(
            "p_in ({}) must exceed p_out ({}) so that user clusters exist",
            spec.p_in, spec.p_out
        )));
    }
    Ok(())
}

fn question_text(
    slots: &[Vec<String>],
    topic_words: &[String],
    ambiguous: &[String],
    rng: &mut rng::Rng,
) -> String {
    let picks: Vec<&str> = slots.iter().map(|s| s.choose(rng).unwrap().as_str()).collect();
    let topic = topic_words.choose(rng).unwrap();
    let template = TEMPLATES.choose(rng).unwrap();
    let mut text = fill(template, &picks, topic);
    if rng.random_bool(P_AMBIGUOUS) {
        text.push(' ');
        text.push_str(ambiguous.choose(rng).unwrap());
    }
    text.push('?');
    if rng.random_bool(P_SECOND_SENTENCE) {
        let follow = FOLLOW_UPS.choose(rng).unwrap();
        let s = picks.choose(rng).unwrap();
        text.push(' ');
        text.push_str(&follow.replace("{t}", topic).replace("{s}", s));
        text.push('.');
    }
    text
}

fn fill(template: &str, picks: &[&str], topic: &str) -> String {
    let mut out = template.replace("{t}", topic);
    for (i, p) in picks.iter().enumerate() {
        out = out.replace(&format!("{{{i}}}"), p);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(topics: usize, groups: usize, per_group: usize) -> SynthSpec {
        SynthSpec {
            num_topics: topics,
            groups_per_topic: groups,
            questions_per_group: per_group,
            ..SynthSpec::default()
        }
    }

    #[test]
    fn single_group_is_mutually_relevant() {
        let c = generate_synthetic(&small(1, 1, 3), 1).unwrap();
        assert_eq!(c.questions().len(), 3);
        assert_eq!(c.categories().len(), 1);
        let groups: BTreeSet<_> = c.question_records().map(|q| q.dup_group.clone()).collect();
        assert_eq!(groups.len(), 1);
    }

    #[test]
    fn counts_follow_spec() {
        let spec = small(5, 10, 4);
        let c = generate_synthetic(&spec, 3).unwrap();
        assert_eq!(c.questions().len(), 200);
        assert_eq!(c.categories().len(), 5);
        assert_eq!(c.users().len(), 5 * spec.users_per_topic_cluster);
    }

    #[test]
    fn deterministic_given_seed() {
        let spec = SynthSpec::default();
        assert_eq!(generate_records(&spec, 9).unwrap(), generate_records(&spec, 9).unwrap());
        assert_ne!(generate_records(&spec, 9).unwrap(), generate_records(&spec, 10).unwrap());
    }

    #[test]
    fn weak_community_structure_is_rejected() {
        let spec = SynthSpec {
            p_in: 0.1,
            p_out: 0.2,
            ..SynthSpec::default()
        };
        assert!(matches!(generate_synthetic(&spec, 0), Err(Error::Usage(_))));
    }

    #[test]
    fn groups_stay_within_one_category() {
        let c = generate_synthetic(&SynthSpec::default(), 5).unwrap();
        let mut seen = std::collections::HashMap::new();
        for q in c.questions() {
            let g = q.record.dup_group.clone().unwrap();
            assert_eq!(*seen.entry(g).or_insert(q.category), q.category);
        }
    }

    #[test]
    fn aligned_askers_come_from_one_circle() {
        let spec = SynthSpec {
            q_align: 1.0,
            ..SynthSpec::default()
        };
        let (questions, _) = generate_records(&spec, 2).unwrap();
        let mut circles = std::collections::HashMap::new();
        for q in &questions {
            let u: usize = q.asker[1..].parse().unwrap();
            let circle = (u / spec.users_per_topic_cluster, (u % spec.users_per_topic_cluster) / CIRCLE_SIZE);
            let g = q.dup_group.clone().unwrap();
            assert_eq!(*circles.entry(g).or_insert(circle), circle);
        }
    }
}
