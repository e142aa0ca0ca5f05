//! Question/user corpora: ingestion, vocabulary, synthesis and splitting.

mod split;
mod synth;
mod tokenize;

use std::collections::{BTreeSet, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use split::{train_test_split, Split};
pub use synth::{generate_synthetic, SynthSpec};
pub use tokenize::{tokenize, EmptyTokenization, MAX_SENTENCES, MAX_SENTENCE_TOKENS};

/// One line of `questions.jsonl`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuestionRecord {
    pub id: String,
    pub text: String,
    pub category: String,
    pub asker: String,
    #[serde(default)]
    pub dup_group: Option<String>,
}

/// One line of `users.jsonl`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserRecord {
    pub id: String,
    #[serde(default)]
    pub friends: BTreeSet<String>,
}

pub const UNK: u32 = 0;
pub const UNK_TOKEN: &str = "<unk>";

/// Token dictionary. Index 0 is reserved for out-of-vocabulary tokens.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocab {
    index: HashMap<String, u32>,
    tokens: Vec<String>,
    min_count: usize,
}

impl Vocab {
    /// Builds a vocabulary from token frequencies. Retained tokens are ordered by
    /// descending frequency, ties broken lexicographically.
    pub fn build<'a>(tokens: impl IntoIterator<Item = &'a str>, min_count: usize) -> Self {
        let min_count = min_count.max(1);
        let mut counts: HashMap<&str, usize> = HashMap::new();
        for tok in tokens {
            *counts.entry(tok).or_default() += 1;
        }
        let mut kept: Vec<(&str, usize)> =
            counts.into_iter().filter(|&(_, c)| c >= min_count).collect();
        kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        let list = std::iter::once(UNK_TOKEN.to_owned())
            .chain(kept.into_iter().map(|(t, _)| t.to_owned()))
            .collect();
        Self::from_tokens(list, min_count)
    }

    /// Rebuilds a vocabulary from its index-ordered token list (index 0 must be UNK).
    pub fn from_tokens(tokens: Vec<String>, min_count: usize) -> Self {
        let index = tokens
            .iter()
            .enumerate()
            .skip(1)
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
        Self {
            index,
            tokens,
            min_count,
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.len() <= 1
    }

    pub fn min_count(&self) -> usize {
        self.min_count
    }

    pub fn lookup(&self, token: &str) -> u32 {
        self.index.get(token).copied().unwrap_or(UNK)
    }

    /// Surface token for an index; `None` for UNK and out-of-range indices.
    pub fn token(&self, index: u32) -> Option<&str> {
        match index {
            UNK => None,
            i => self.tokens.get(i as usize).map(String::as_str),
        }
    }

    /// Index-ordered token list, UNK placeholder first.
    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn encode(&self, sentences: &[Vec<String>]) -> Vec<Vec<u32>> {
        sentences
            .iter()
            .map(|s| s.iter().map(|t| self.lookup(t)).collect())
            .collect()
    }

    /// Tokenizes and indexes raw question text.
    pub fn encode_text(&self, text: &str) -> Result<Vec<Vec<u32>>, EmptyTokenization> {
        tokenize(text).map(|s| self.encode(&s))
    }
}

/// A question with resolved ordinals and tokenized content.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Question {
    pub record: QuestionRecord,
    pub category: usize,
    pub asker: usize,
    pub sentences: Vec<Vec<u32>>,
}

impl Question {
    pub fn id(&self) -> &str {
        &self.record.id
    }
}

/// A validated corpus. Immutable once built.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    questions: Vec<Question>,
    users: Vec<UserRecord>,
    friends: Vec<Vec<usize>>,
    categories: Vec<String>,
    vocab: Vocab,
    user_index: HashMap<String, usize>,
    question_index: HashMap<String, usize>,
}

impl Corpus {
    /// Validates raw records and builds a vocabulary over their text.
    pub fn from_records(
        questions: Vec<QuestionRecord>,
        users: Vec<UserRecord>,
        min_count: usize,
    ) -> Result<Self> {
        let mut tokenized = Vec::with_capacity(questions.len());
        for q in &questions {
            let sentences = tokenize(&q.text).map_err(|_| Error::EmptyQuestion(q.id.clone()))?;
            tokenized.push(sentences);
        }
        let vocab = Vocab::build(
            tokenized.iter().flatten().flatten().map(String::as_str),
            min_count,
        );
        Self::assemble(questions, tokenized, users, vocab)
    }

    /// Validates raw records against an existing vocabulary.
    pub fn with_vocab(
        questions: Vec<QuestionRecord>,
        users: Vec<UserRecord>,
        vocab: Vocab,
    ) -> Result<Self> {
        let mut tokenized = Vec::with_capacity(questions.len());
        for q in &questions {
            let sentences = tokenize(&q.text).map_err(|_| Error::EmptyQuestion(q.id.clone()))?;
            tokenized.push(sentences);
        }
        Self::assemble(questions, tokenized, users, vocab)
    }

    fn assemble(
        questions: Vec<QuestionRecord>,
        tokenized: Vec<Vec<Vec<String>>>,
        mut users: Vec<UserRecord>,
        vocab: Vocab,
    ) -> Result<Self> {
        let mut user_index = HashMap::with_capacity(users.len());
        for (i, u) in users.iter().enumerate() {
            if user_index.insert(u.id.clone(), i).is_some() {
                return Err(Error::DuplicateUser(u.id.clone()));
            }
        }
        // Symmetrize friendships and drop self-loops.
        let mut friends: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); users.len()];
        for (i, u) in users.iter().enumerate() {
            for f in &u.friends {
                let j = *user_index.get(f).ok_or_else(|| Error::UnknownFriend {
                    user: u.id.clone(),
                    friend: f.clone(),
                })?;
                if i != j {
                    friends[i].insert(j);
                    friends[j].insert(i);
                }
            }
        }
        let ids: Vec<String> = users.iter().map(|u| u.id.clone()).collect();
        for (u, fs) in users.iter_mut().zip(&friends) {
            u.friends = fs.iter().map(|&j| ids[j].clone()).collect();
        }

        let categories: Vec<String> = questions
            .iter()
            .map(|q| q.category.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let category_index: HashMap<&str, usize> = categories
            .iter()
            .enumerate()
            .map(|(i, c)| (c.as_str(), i))
            .collect();

        let mut question_index = HashMap::with_capacity(questions.len());
        let mut built = Vec::with_capacity(questions.len());
        for (i, (record, sentences)) in questions.into_iter().zip(tokenized).enumerate() {
            if question_index.insert(record.id.clone(), i).is_some() {
                return Err(Error::DuplicateQuestion(record.id));
            }
            let asker = *user_index
                .get(&record.asker)
                .ok_or_else(|| Error::UnknownAsker {
                    question: record.id.clone(),
                    asker: record.asker.clone(),
                })?;
            let category = category_index[record.category.as_str()];
            let sentences = vocab.encode(&sentences);
            built.push(Question {
                record,
                category,
                asker,
                sentences,
            });
        }

        Ok(Self {
            questions: built,
            users,
            friends: friends
                .into_iter()
                .map(|s| s.into_iter().collect())
                .collect(),
            categories,
            vocab,
            user_index,
            question_index,
        })
    }

    /// Sub-corpus holding the questions at `keep` (in the given order). Users,
    /// categories and vocabulary are shared with `self`.
    pub fn subset(&self, keep: &[usize]) -> Self {
        let questions: Vec<Question> = keep.iter().map(|&i| self.questions[i].clone()).collect();
        let question_index = questions
            .iter()
            .enumerate()
            .map(|(i, q)| (q.record.id.clone(), i))
            .collect();
        Self {
            questions,
            users: self.users.clone(),
            friends: self.friends.clone(),
            categories: self.categories.clone(),
            vocab: self.vocab.clone(),
            user_index: self.user_index.clone(),
            question_index,
        }
    }

    pub fn questions(&self) -> &[Question] {
        &self.questions
    }

    pub fn users(&self) -> &[UserRecord] {
        &self.users
    }

    pub fn categories(&self) -> &[String] {
        &self.categories
    }

    pub fn vocab(&self) -> &Vocab {
        &self.vocab
    }

    /// Sorted friend ordinals of a user.
    pub fn friends_of(&self, user: usize) -> &[usize] {
        &self.friends[user]
    }

    pub fn user_ordinal(&self, id: &str) -> Option<usize> {
        self.user_index.get(id).copied()
    }

    pub fn question_ordinal(&self, id: &str) -> Option<usize> {
        self.question_index.get(id).copied()
    }

    pub fn question_records(&self) -> impl Iterator<Item = &QuestionRecord> {
        self.questions.iter().map(|q| &q.record)
    }

    pub fn user_ids(&self) -> Vec<String> {
        self.users.iter().map(|u| u.id.clone()).collect()
    }

    /// Writes the corpus back out in the `questions.jsonl` / `users.jsonl` layout.
    pub fn write_jsonl(&self, questions_path: &Path, users_path: &Path) -> Result<()> {
        write_lines(questions_path, self.question_records())?;
        write_lines(users_path, self.users.iter())
    }
}

fn write_lines<'a, T: Serialize + 'a>(
    path: &Path,
    items: impl IntoIterator<Item = &'a T>,
) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    for item in items {
        let line = serde_json::to_string(item).expect("records serialize");
        writeln!(out, "{line}").map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

pub(crate) fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let item = serde_json::from_str(&line).map_err(|e| Error::MalformedLine {
            path: path.to_owned(),
            line: n + 1,
            message: e.to_string(),
        })?;
        out.push(item);
    }
    Ok(out)
}

/// Reads and validates a corpus from its two JSONL files.
pub fn load_corpus(questions_path: &Path, users_path: &Path, min_count: usize) -> Result<Corpus> {
    let questions = read_jsonl(questions_path)?;
    let users = read_jsonl(users_path)?;
    Corpus::from_records(questions, users, min_count)
}

/// Reads a corpus and indexes it with a fixed vocabulary (e.g. a checkpoint's).
pub fn load_corpus_with_vocab(
    questions_path: &Path,
    users_path: &Path,
    vocab: Vocab,
) -> Result<Corpus> {
    let questions = read_jsonl(questions_path)?;
    let users = read_jsonl(users_path)?;
    Corpus::with_vocab(questions, users, vocab)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(id: &str, text: &str, cat: &str, asker: &str) -> QuestionRecord {
        QuestionRecord {
            id: id.into(),
            text: text.into(),
            category: cat.into(),
            asker: asker.into(),
            dup_group: None,
        }
    }

    fn u(id: &str, friends: &[&str]) -> UserRecord {
        UserRecord {
            id: id.into(),
            friends: friends.iter().map(|s| s.to_string()).collect(),
        }
    }

    #[test]
    fn identity_ingestion() {
        let c = Corpus::from_records(
            vec![q("1", "how to sort", "rust", "a"), q("2", "why sort", "go", "b")],
            vec![u("a", &[]), u("b", &[])],
            1,
        )
        .unwrap();
        assert_eq!(c.questions().len(), 2);
        assert_eq!(c.users().len(), 2);
        assert_eq!(c.categories(), ["go", "rust"]);
    }

    #[test]
    fn friendships_are_symmetrized() {
        let c = Corpus::from_records(
            vec![q("1", "x", "c", "a")],
            vec![u("a", &["b", "a"]), u("b", &[])],
            1,
        )
        .unwrap();
        assert!(c.users()[1].friends.contains("a"));
        assert!(c.users()[0].friends.contains("b"));
        assert!(!c.users()[0].friends.contains("a"));
        assert_eq!(c.friends_of(0), [1]);
        assert_eq!(c.friends_of(1), [0]);
    }

    #[test]
    fn rare_tokens_become_unk() {
        let c = Corpus::from_records(
            vec![q("1", "bar foo", "c", "a"), q("2", "bar baz baz", "c", "a")],
            vec![u("a", &[])],
            2,
        )
        .unwrap();
        let vocab = c.vocab();
        assert_eq!(vocab.lookup("foo"), UNK);
        assert_eq!(c.questions()[0].sentences, vec![vec![vocab.lookup("bar"), UNK]]);
        // bar and baz both occur twice: tie broken lexicographically.
        assert_eq!(vocab.tokens(), ["<unk>", "bar", "baz"]);
        assert_eq!(vocab.token(UNK), None);
    }

    #[test]
    fn vocab_orders_by_frequency() {
        let v = Vocab::build(["b", "a", "c", "c", "b", "c"], 1);
        assert_eq!(v.tokens(), ["<unk>", "c", "b", "a"]);
        for i in 1..v.len() as u32 {
            assert_eq!(v.lookup(v.token(i).unwrap()), i);
        }
    }

    #[test]
    fn duplicate_question_is_rejected() {
        let err = Corpus::from_records(
            vec![q("1", "x", "c", "a"), q("1", "y", "c", "a")],
            vec![u("a", &[])],
            1,
        )
        .unwrap_err();
        assert!(matches!(err, Error::DuplicateQuestion(ref id) if id == "1"), "{err}");
    }

    #[test]
    fn unknown_asker_is_rejected() {
        let err = Corpus::from_records(vec![q("1", "x", "c", "zed")], vec![u("a", &[])], 1)
            .unwrap_err();
        assert!(matches!(err, Error::UnknownAsker { .. }));
    }

    #[test]
    fn empty_question_is_rejected() {
        let err = Corpus::from_records(vec![q("1", "?!", "c", "a")], vec![u("a", &[])], 1)
            .unwrap_err();
        assert!(matches!(err, Error::EmptyQuestion(_)));
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let dir = tempfile::tempdir().unwrap();
        let qp = dir.path().join("q.jsonl");
        let up = dir.path().join("u.jsonl");
        std::fs::write(
            &qp,
            "{\"id\":\"1\",\"text\":\"x\",\"category\":\"c\",\"asker\":\"a\",\"dup_group\":null}\n{oops\n",
        )
        .unwrap();
        std::fs::write(&up, "{\"id\":\"a\",\"friends\":[]}\n").unwrap();
        match load_corpus(&qp, &up, 1).unwrap_err() {
            Error::MalformedLine { line, .. } => assert_eq!(line, 2),
            e => panic!("unexpected {e}"),
        }
    }
}
