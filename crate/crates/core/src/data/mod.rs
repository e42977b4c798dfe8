//! Corpus ingestion, preprocessing into fixed-length token sequences,
//! synthetic two-domain population generation, and client splits.

mod corpus;
mod preprocess;
mod split;
mod synth;
mod vocab;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use corpus::{load_population, read_corpus, save_population, write_corpus, POPULATION_FORMAT, POPULATION_VERSION};
pub use preprocess::{preprocess_client, tokenize, SEQ_LEN, TOKEN_CAP};
pub use split::{split_clients, PopulationSplit};
pub use synth::{generate_synthetic_population, DomainMix, SynthConfig};
pub use vocab::{build_vocab, SpecialTokens, Vocab};

use crate::seed::Seed;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("vocabulary size {0} leaves no room for the 4 special tokens")]
    VocabTooSmall(usize),
    #[error("empty corpus: no target-domain words in the training clients")]
    EmptyCorpus,
    #[error("need at least 5 clients to split, got {0}")]
    TooFewClients(usize),
    #[error("{path}:{line}: {message}")]
    Parse { path: String, line: usize, message: String },
    #[error("unknown domain label `{0}` (expected S or T)")]
    UnknownDomain(String),
    #[error("invalid synthetic config: {0}")]
    InvalidSynth(String),
    #[error("population cache: {0}")]
    Cache(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Source (large population) or target (scarce) domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Domain {
    S,
    T,
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Domain::S => "S",
            Domain::T => "T",
        })
    }
}

impl FromStr for Domain {
    type Err = DataError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "S" | "s" => Ok(Domain::S),
            "T" | "t" => Ok(Domain::T),
            other => Err(DataError::UnknownDomain(other.to_string())),
        }
    }
}

/// A client's raw text, grouped by domain.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RawClient {
    pub id: String,
    pub sentences: BTreeMap<Domain, Vec<String>>,
}

/// A client's preprocessed fixed-length token sequences, grouped by domain.
/// Only domains with at least one sequence are present.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClientRecord {
    pub id: String,
    pub sequences: BTreeMap<Domain, Vec<Vec<u32>>>,
}

impl ClientRecord {
    pub fn has(&self, domain: Domain) -> bool {
        self.sequences.get(&domain).is_some_and(|s| !s.is_empty())
    }

    pub fn sequences(&self, domain: Domain) -> &[Vec<u32>] {
        self.sequences.get(&domain).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn domains(&self) -> impl Iterator<Item = Domain> + '_ {
        self.sequences.iter().filter(|(_, s)| !s.is_empty()).map(|(d, _)| *d)
    }
}

/// Which part of the client split.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Part {
    Train,
    Validation,
    Test,
}

/// Preprocessed clients, their vocabulary, and the train/validation/test split.
/// Clients are ordered by id.
#[derive(Debug, Clone, PartialEq)]
pub struct Population {
    pub vocab: Vocab,
    pub clients: Vec<ClientRecord>,
    pub split: PopulationSplit,
}

impl Population {
    /// Indices into `clients` of the given split part, in id order.
    pub fn indices(&self, part: Part) -> Vec<usize> {
        let ids = match part {
            Part::Train => &self.split.train,
            Part::Validation => &self.split.validation,
            Part::Test => &self.split.test,
        };
        let wanted: std::collections::HashSet<&str> = ids.iter().map(String::as_str).collect();
        self.clients
            .iter()
            .enumerate()
            .filter(|(_, c)| wanted.contains(c.id.as_str()))
            .map(|(i, _)| i)
            .collect()
    }

    /// All sequences of `domain` held by clients in `part`, in client order.
    pub fn domain_sequences(&self, part: Part, domain: Domain) -> Vec<&[u32]> {
        self.indices(part)
            .into_iter()
            .flat_map(|i| self.clients[i].sequences(domain).iter().map(Vec::as_slice))
            .collect()
    }
}

/// Splits raw clients 6:2:2, builds the vocabulary from target-domain text
/// of the training clients, and preprocesses every client.
///
/// Clients without any text are dropped before splitting.
pub fn prepare_population(raw: Vec<RawClient>, vocab_size: usize, seed: Seed) -> Result<Population, DataError> {
    let mut raw: Vec<RawClient> = raw
        .into_iter()
        .filter(|c| c.sentences.values().any(|s| s.iter().any(|t| !t.trim().is_empty())))
        .collect();
    raw.sort_by(|a, b| a.id.cmp(&b.id));
    let ids: Vec<String> = raw.iter().map(|c| c.id.clone()).collect();
    let split = split_clients(&ids, seed.child("split"))?;

    let train: std::collections::HashSet<&str> = split.train.iter().map(String::as_str).collect();
    let train_clients: Vec<&RawClient> = raw.iter().filter(|c| train.contains(c.id.as_str())).collect();
    let vocab = build_vocab(&train_clients, vocab_size)?;

    let clients = raw
        .iter()
        .map(|c| ClientRecord {
            id: c.id.clone(),
            sequences: c
                .sentences
                .iter()
                .map(|(d, s)| (*d, preprocess_client(s, &vocab)))
                .filter(|(_, s)| !s.is_empty())
                .collect(),
        })
        .collect();
    Ok(Population { vocab, clients, split })
}
