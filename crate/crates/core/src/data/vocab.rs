use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{preprocess::tokenize, DataError, Domain, RawClient};

pub const UNK: &str = "<UNK>";
pub const BOS: &str = "<BOS>";
pub const EOS: &str = "<EOS>";
pub const PAD: &str = "<PAD>";

/// Ids of the special tokens. They always occupy the last four ids, in the
/// order UNK, BOS, EOS, PAD, so they follow from the vocabulary size alone.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpecialTokens {
    pub unk: u32,
    pub bos: u32,
    pub eos: u32,
    pub pad: u32,
}

impl SpecialTokens {
    pub fn for_vocab_size(size: usize) -> Self {
        assert!(size >= 4, "vocabulary must hold the special tokens");
        let n = size as u32;
        Self {
            unk: n - 4,
            bos: n - 3,
            eos: n - 2,
            pad: n - 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Vocab {
    tokens: Vec<String>,
    index: HashMap<String, u32>,
}

impl Vocab {
    /// Builds a vocabulary from ordinary words; specials are appended.
    pub fn from_words(words: Vec<String>) -> Self {
        let mut tokens = words;
        tokens.extend([UNK, BOS, EOS, PAD].map(String::from));
        let index = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i as u32)).collect();
        Self { tokens, index }
    }

    /// Rebuilds from the full token list (specials included, in id order).
    pub fn from_tokens(tokens: Vec<String>) -> Result<Self, DataError> {
        let n = tokens.len();
        if n < 4 || tokens[n - 4..] != [UNK, BOS, EOS, PAD] {
            return Err(DataError::Cache("vocabulary must end with <UNK> <BOS> <EOS> <PAD>".into()));
        }
        let vocab = Self::from_words(tokens[..n - 4].to_vec());
        if vocab.index.len() != n {
            return Err(DataError::Cache("duplicate vocabulary entries".into()));
        }
        Ok(vocab)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn specials(&self) -> SpecialTokens {
        SpecialTokens::for_vocab_size(self.len())
    }

    pub fn id(&self, word: &str) -> u32 {
        self.index.get(word).copied().unwrap_or(self.specials().unk)
    }

    pub fn contains(&self, word: &str) -> bool {
        self.index.contains_key(word)
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }
}

/// The `size − 4` most frequent words in the target-domain text of the
/// given (training) clients, ties broken lexicographically, plus specials.
pub fn build_vocab(target_train_clients: &[&RawClient], size: usize) -> Result<Vocab, DataError> {
    if size < 4 {
        return Err(DataError::VocabTooSmall(size));
    }
    let mut counts: HashMap<String, u64> = HashMap::new();
    for client in target_train_clients {
        for sentence in client.sentences.get(&Domain::T).into_iter().flatten() {
            for word in tokenize(sentence) {
                *counts.entry(word).or_default() += 1;
            }
        }
    }
    if counts.is_empty() {
        return Err(DataError::EmptyCorpus);
    }
    let mut ranked: Vec<(String, u64)> = counts.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    ranked.truncate(size - 4);
    Ok(Vocab::from_words(ranked.into_iter().map(|(w, _)| w).collect()))
}
