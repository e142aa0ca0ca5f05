//! A trained encoder bundled with the vocabulary and user table it was trained on.

use std::collections::HashMap;

use crate::corpus::{Corpus, QuestionRecord, Vocab};
use crate::encoder::{encode_tokens, ModelParams, QuestionVec};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub params: ModelParams,
    pub vocab: Vocab,
    pub user_ids: Vec<String>,
    pub score_norm: bool,
    user_index: HashMap<String, usize>,
}

impl Model {
    pub fn new(
        params: ModelParams,
        vocab: Vocab,
        user_ids: Vec<String>,
        score_norm: bool,
    ) -> Result<Self> {
        if params.vocab_size() != vocab.len() {
            return Err(Error::DimensionMismatch(format!(
                "word table has {} rows but the vocabulary has {} entries",
                params.vocab_size(),
                vocab.len()
            )));
        }
        if params.num_users() != user_ids.len() {
            return Err(Error::DimensionMismatch(format!(
                "user table has {} rows but {} user ids were given",
                params.num_users(),
                user_ids.len()
            )));
        }
        let user_index = user_ids
            .iter()
            .enumerate()
            .map(|(i, u)| (u.clone(), i))
            .collect();
        Ok(Self {
            params,
            vocab,
            user_ids,
            score_norm,
            user_index,
        })
    }

    /// Wraps parameters trained on `corpus`.
    pub fn for_corpus(params: ModelParams, corpus: &Corpus, score_norm: bool) -> Result<Self> {
        Self::new(params, corpus.vocab().clone(), corpus.user_ids(), score_norm)
    }

    pub fn user_row(&self, id: &str) -> Option<usize> {
        self.user_index.get(id).copied()
    }

    /// Encodes raw question text. The asker part is zero when `use_asker` is
    /// false or the asker is not in the model's user table.
    pub fn encode_record(&self, record: &QuestionRecord, use_asker: bool) -> Result<QuestionVec> {
        let sentences = self
            .vocab
            .encode_text(&record.text)
            .map_err(|_| Error::EmptyQuestion(record.id.clone()))?;
        let asker = if use_asker {
            self.user_row(&record.asker)
        } else {
            None
        };
        encode_tokens(&self.params, &sentences, asker, self.score_norm)
    }
}
