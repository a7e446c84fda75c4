//! Word-level vocabulary and premise/hypothesis pair tokenization.

use std::collections::BTreeMap;

use crate::{Error, Result};

pub const UNK: usize = 0;
pub const START: usize = 1;
pub const SEP: usize = 2;
pub const END: usize = 3;
/// First id available to ordinary words.
pub const FIRST_WORD: usize = 4;

const SPECIAL_NAMES: [&str; 4] = ["[UNK]", "[CLS]", "[SEP]", "[EOS]"];

/// Lowercase alphanumeric word tokens; everything else separates.
pub fn word_tokens(text: &str) -> Vec<String> {
    let cleaned: String = text
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() { c } else { ' ' })
        .collect();
    cleaned
        .to_lowercase()
        .split_whitespace()
        .map(str::to_string)
        .collect()
}

/// Fixed word-to-id table built from training text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocab {
    words: Vec<String>,
    index: BTreeMap<String, usize>,
}

impl Vocab {
    /// Build from texts: words ranked by frequency (ties alphabetically),
    /// capped at `cap` distinct words.
    pub fn build<'a>(texts: impl Iterator<Item = &'a str>, cap: usize) -> Vocab {
        let mut counts: BTreeMap<String, usize> = BTreeMap::new();
        for text in texts {
            for token in word_tokens(text) {
                *counts.entry(token).or_default() += 1;
            }
        }
        let mut ranked: Vec<(String, usize)> = counts.into_iter().collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        ranked.truncate(cap);
        Vocab::from_words(ranked.into_iter().map(|(w, _)| w).collect())
    }

    pub fn from_words(words: Vec<String>) -> Vocab {
        let index = words
            .iter()
            .enumerate()
            .map(|(i, w)| (w.clone(), FIRST_WORD + i))
            .collect();
        Vocab { words, index }
    }

    /// Total id space including the four specials.
    pub fn len(&self) -> usize {
        FIRST_WORD + self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn id_of(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(UNK)
    }

    pub fn token_of(&self, id: usize) -> &str {
        if id < FIRST_WORD {
            SPECIAL_NAMES[id]
        } else {
            &self.words[id - FIRST_WORD]
        }
    }

    /// Words in id order, for serialization.
    pub fn words(&self) -> &[String] {
        &self.words
    }
}

/// A tokenized premise/hypothesis pair in the fixed tagged layout:
/// start marker, premise tokens, separator, hypothesis tokens, end marker.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenizedPair {
    pub ids: Vec<usize>,
    pub premise_tokens: Vec<String>,
    pub hypothesis_tokens: Vec<String>,
    pub truncated: bool,
}

impl TokenizedPair {
    /// Human-readable rendering of the layout, e.g.
    /// `[CLS] the system ... [SEP] this requirement ... [EOS]`.
    pub fn tagged_format(&self) -> String {
        let mut parts = vec!["[CLS]".to_string()];
        parts.extend(self.premise_tokens.iter().cloned());
        parts.push("[SEP]".to_string());
        parts.extend(self.hypothesis_tokens.iter().cloned());
        parts.push("[EOS]".to_string());
        parts.join(" ")
    }
}

/// Tokenize a pair into the tagged layout, truncating the longer side first
/// when the pair exceeds `max_length` total ids.
pub fn tokenize_pair(
    vocab: &Vocab,
    premise: &str,
    hypothesis: &str,
    max_length: usize,
) -> Result<TokenizedPair> {
    if max_length < 5 {
        return Err(Error::Config(format!(
            "max_length {max_length} leaves no room for two segments and three markers"
        )));
    }
    let mut premise_tokens = word_tokens(premise);
    let mut hypothesis_tokens = word_tokens(hypothesis);
    if hypothesis_tokens.is_empty() {
        return Err(Error::InvalidArgument(
            "hypothesis must contain at least one word".into(),
        ));
    }
    if premise_tokens.is_empty() {
        return Err(Error::InvalidArgument(
            "premise must contain at least one word".into(),
        ));
    }

    let budget = max_length - 3;
    let mut truncated = false;
    while premise_tokens.len() + hypothesis_tokens.len() > budget {
        truncated = true;
        // drop from the longer side; ties favor trimming the premise
        if hypothesis_tokens.len() > premise_tokens.len() && hypothesis_tokens.len() > 1 {
            hypothesis_tokens.pop();
        } else if premise_tokens.len() > 1 {
            premise_tokens.pop();
        } else {
            hypothesis_tokens.pop();
        }
    }

    let mut ids = Vec::with_capacity(premise_tokens.len() + hypothesis_tokens.len() + 3);
    ids.push(START);
    ids.extend(premise_tokens.iter().map(|t| vocab.id_of(t)));
    ids.push(SEP);
    ids.extend(hypothesis_tokens.iter().map(|t| vocab.id_of(t)));
    ids.push(END);

    Ok(TokenizedPair {
        ids,
        premise_tokens,
        hypothesis_tokens,
        truncated,
    })
}
