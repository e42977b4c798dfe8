//! Corpus text files and the preprocessed-population cache.
//!
//! Corpus: UTF-8, one sentence per line, `client_id<TAB>domain<TAB>sentence`
//! with domain `S` or `T`. Blank lines and lines starting with `#` are skipped.
//!
//! Cache: a JSON document
//!
//! ```text
//! {
//!   "format": "pfl-sim-population",
//!   "version": 1,
//!   "seq_len": 10,
//!   "token_cap": 1600,
//!   "vocab": ["w0", ..., "<UNK>", "<BOS>", "<EOS>", "<PAD>"],   // index = token id
//!   "split": {"train": [ids], "validation": [ids], "test": [ids]},
//!   "clients": [{"id": "...", "sequences": {"S": [[10 ids], ...], "T": [...]}}]
//! }
//! ```
//!
//! Clients appear in id order; keys are written in the order shown.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ClientRecord, DataError, Domain, Population, PopulationSplit, RawClient, Vocab, SEQ_LEN, TOKEN_CAP};

pub const POPULATION_FORMAT: &str = "pfl-sim-population";
pub const POPULATION_VERSION: u32 = 1;

fn io_err(path: &Path, source: std::io::Error) -> DataError {
    DataError::Io {
        path: path.display().to_string(),
        source,
    }
}

pub fn read_corpus(path: &Path) -> Result<Vec<RawClient>, DataError> {
    let file = fs::File::open(path).map_err(|e| io_err(path, e))?;
    let mut clients: BTreeMap<String, RawClient> = BTreeMap::new();
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| io_err(path, e))?;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let parse_err = |message: String| DataError::Parse {
            path: path.display().to_string(),
            line: lineno + 1,
            message,
        };
        let mut fields = line.splitn(3, '\t');
        let (Some(id), Some(domain), Some(text)) = (fields.next(), fields.next(), fields.next()) else {
            return Err(parse_err("expected client_id<TAB>domain<TAB>sentence".into()));
        };
        if id.is_empty() {
            return Err(parse_err("empty client id".into()));
        }
        let domain: Domain = domain.parse().map_err(|e: DataError| parse_err(e.to_string()))?;
        clients
            .entry(id.to_string())
            .or_insert_with(|| RawClient {
                id: id.to_string(),
                ..RawClient::default()
            })
            .sentences
            .entry(domain)
            .or_default()
            .push(text.to_string());
    }
    Ok(clients.into_values().collect())
}

pub fn write_corpus(path: &Path, clients: &[RawClient]) -> Result<(), DataError> {
    let file = fs::File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(file);
    for c in clients {
        for (domain, sentences) in &c.sentences {
            for s in sentences {
                writeln!(w, "{}\t{}\t{}", c.id, domain, s).map_err(|e| io_err(path, e))?;
            }
        }
    }
    w.flush().map_err(|e| io_err(path, e))
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PopulationFile {
    format: String,
    version: u32,
    seq_len: usize,
    token_cap: usize,
    vocab: Vec<String>,
    split: PopulationSplit,
    clients: Vec<ClientRecord>,
}

pub fn save_population(path: &Path, pop: &Population) -> Result<(), DataError> {
    let doc = PopulationFile {
        format: POPULATION_FORMAT.into(),
        version: POPULATION_VERSION,
        seq_len: SEQ_LEN,
        token_cap: TOKEN_CAP,
        vocab: pop.vocab.tokens().to_vec(),
        split: pop.split.clone(),
        clients: pop.clients.clone(),
    };
    let file = fs::File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer(&mut w, &doc).map_err(|e| DataError::Cache(e.to_string()))?;
    w.flush().map_err(|e| io_err(path, e))
}

pub fn load_population(path: &Path) -> Result<Population, DataError> {
    let file = fs::File::open(path).map_err(|e| io_err(path, e))?;
    let doc: PopulationFile =
        serde_json::from_reader(BufReader::new(file)).map_err(|e| DataError::Cache(e.to_string()))?;
    if doc.format != POPULATION_FORMAT || doc.version != POPULATION_VERSION {
        return Err(DataError::Cache(format!(
            "unsupported cache {} v{} (expected {POPULATION_FORMAT} v{POPULATION_VERSION})",
            doc.format, doc.version
        )));
    }
    if doc.seq_len != SEQ_LEN {
        return Err(DataError::Cache(format!("sequence length {} != {SEQ_LEN}", doc.seq_len)));
    }
    let vocab = Vocab::from_tokens(doc.vocab)?;
    let v = vocab.len() as u32;
    for c in &doc.clients {
        for seq in c.sequences.values().flatten() {
            if seq.len() != SEQ_LEN || seq.iter().any(|&t| t >= v) {
                return Err(DataError::Cache(format!("client {} has a malformed sequence", c.id)));
            }
        }
    }
    Ok(Population {
        vocab,
        clients: doc.clients,
        split: doc.split,
    })
}
