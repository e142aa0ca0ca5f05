use std::fmt;

pub const MAX_SENTENCES: usize = 8;
pub const MAX_SENTENCE_TOKENS: usize = 64;

/// Raised when a text contains no tokens at all.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EmptyTokenization;

impl fmt::Display for EmptyTokenization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("text yields no tokens")
    }
}

impl std::error::Error for EmptyTokenization {}

/// Splits `text` into sentences of lowercase tokens.
///
/// Sentences end at `.`, `?` or `!`. Tokens are whitespace separated and have
/// non-alphanumeric characters stripped from both ends. Empty sentences are
/// dropped, each sentence keeps at most 64 tokens and at most 8 sentences are
/// kept.
pub fn tokenize(text: &str) -> Result<Vec<Vec<String>>, EmptyTokenization> {
    let lowered = text.to_lowercase();
    let sentences: Vec<Vec<String>> = lowered
        .split(['.', '?', '!'])
        .map(|sentence| {
            sentence
                .split_whitespace()
                .map(|raw| raw.trim_matches(|c: char| !c.is_alphanumeric()))
                .filter(|tok| !tok.is_empty())
                .take(MAX_SENTENCE_TOKENS)
                .map(str::to_owned)
                .collect::<Vec<_>>()
        })
        .filter(|s| !s.is_empty())
        .take(MAX_SENTENCES)
        .collect();
    if sentences.is_empty() {
        Err(EmptyTokenization)
    } else {
        Ok(sentences)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splits_sentences_and_lowercases() {
        let got = tokenize("What is Rust? It is fast.").unwrap();
        assert_eq!(
            got,
            vec![vec!["what", "is", "rust"], vec!["it", "is", "fast"]]
        );
    }

    #[test]
    fn punctuation_only_is_empty() {
        assert_eq!(tokenize("???"), Err(EmptyTokenization));
        assert_eq!(tokenize("   "), Err(EmptyTokenization));
        assert_eq!(tokenize("-- ,, !"), Err(EmptyTokenization));
    }

    #[test]
    fn long_sentence_is_truncated() {
        let text = (0..200).map(|i| format!("w{i}")).collect::<Vec<_>>().join(" ");
        let got = tokenize(&text).unwrap();
        assert_eq!(got.len(), 1);
        assert_eq!(got[0].len(), 64);
        assert_eq!(got[0][63], "w63");
    }

    #[test]
    fn sentence_cap() {
        let text = "a. b. c. d. e. f. g. h. i. j.";
        assert_eq!(tokenize(text).unwrap().len(), 8);
    }

    #[test]
    fn strips_edge_punctuation_only() {
        let got = tokenize("(c++) isn't \"quoted\", e-mail").unwrap();
        assert_eq!(got, vec![vec!["c", "isn't", "quoted", "e-mail"]]);
    }
}
