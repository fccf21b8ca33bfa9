//! Static token embeddings: random, CBOW and FastText-style subword tables.

pub mod sgns;
pub mod vocab;

use std::collections::HashMap;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::neural::tensor::{axpy, Tensor2};
use crate::store::{decode_f32, encode_f32, Container, EMBEDDING_MAGIC};

pub use sgns::{trigrams, SgnsConfig};
pub use vocab::{build_vocabulary, name_sequences, Vocabulary, MISSING, UNK};

pub const EMBEDDING_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Random,
    Cbow,
    Fasttext,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Random => "random",
            Method::Cbow => "cbow",
            Method::Fasttext => "fasttext",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random" => Ok(Method::Random),
            "cbow" => Ok(Method::Cbow),
            "fasttext" => Ok(Method::Fasttext),
            _ => Err(Error::InvalidArgument(format!("unknown embedding method {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubwordIndex {
    pub trigrams: Vec<String>,
    index: HashMap<String, usize>,
    pub matrix: Tensor2,
}

impl SubwordIndex {
    pub fn new(trigrams: Vec<String>, matrix: Tensor2) -> SubwordIndex {
        let index = trigrams.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        SubwordIndex { trigrams, index, matrix }
    }

    pub fn get(&self, trigram: &str) -> Option<usize> {
        self.index.get(trigram).copied()
    }

    /// Sum of the known trigram vectors of `word`.
    pub fn compose(&self, word: &str) -> Vec<f64> {
        let mut v = vec![0.0; self.matrix.cols];
        for t in trigrams(word) {
            if let Some(i) = self.get(&t) {
                axpy(1.0, self.matrix.row(i), &mut v);
            }
        }
        v
    }
}

/// A `|vocab| × dim` embedding table plus, for FastText, its trigram index.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    pub method: Method,
    pub vocab: Vocabulary,
    pub matrix: Tensor2,
    pub subwords: Option<SubwordIndex>,
    /// Effective training configuration, echoed into saved files.
    pub config: Value,
    /// Mean loss per training epoch (empty for random tables).
    pub epoch_loss: Vec<f64>,
}

impl EmbeddingTable {
    pub fn dim(&self) -> usize {
        self.matrix.cols
    }

    /// Vector of an element name; `None` is a missing element.
    pub fn embed(&self, element: Option<&str>) -> Vec<f64> {
        let Some(name) = element else { return self.matrix.row(MISSING).to_vec() };
        match (&self.subwords, self.vocab.get(name)) {
            (Some(sub), Some(id)) => {
                let mut v = sub.compose(name);
                axpy(1.0, self.matrix.row(id), &mut v);
                v
            }
            (Some(sub), None) => sub.compose(name),
            (None, id) => self.matrix.row(id.unwrap_or(UNK)).to_vec(),
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.to_container().save(path)
    }

    pub fn to_container(&self) -> Container {
        let header = json!({
            "method": self.method,
            "dim": self.dim(),
            "rows": self.matrix.rows,
            "vocab": self.vocab.entries,
            "trigrams": self.subwords.as_ref().map(|s| &s.trigrams),
            "config": self.config,
            "epoch_loss": self.epoch_loss,
        });
        let mut c = Container::new(EMBEDDING_MAGIC, EMBEDDING_VERSION, header);
        c.push(encode_f32(&self.matrix.data));
        if let Some(s) = &self.subwords {
            c.push(encode_f32(&s.matrix.data));
        }
        c
    }

    pub fn load(path: &Path) -> Result<EmbeddingTable> {
        EmbeddingTable::from_container(&Container::load(path, EMBEDDING_MAGIC)?)
    }

    pub fn from_container(c: &Container) -> Result<EmbeddingTable> {
        c.expect_version(EMBEDDING_VERSION)?;
        let h = &c.header;
        let method: Method = serde_json::from_value(h["method"].clone())?;
        let dim = h["dim"].as_u64().ok_or_else(|| Error::Format("embedding header lacks dim".into()))? as usize;
        let mut vocab = Vocabulary::from_entries(serde_json::from_value(h["vocab"].clone())?);
        vocab.reindex();
        let matrix = Tensor2::from_vec(vocab.len(), dim, decode_f32(c.record(0)?)?)?;
        let subwords = match h["trigrams"].as_array() {
            Some(_) => {
                let names: Vec<String> = serde_json::from_value(h["trigrams"].clone())?;
                let m = Tensor2::from_vec(names.len(), dim, decode_f32(c.record(1)?)?)?;
                Some(SubwordIndex::new(names, m))
            }
            None => None,
        };
        Ok(EmbeddingTable {
            method,
            vocab,
            matrix,
            subwords,
            config: h["config"].clone(),
            epoch_loss: serde_json::from_value(h["epoch_loss"].clone()).unwrap_or_default(),
        })
    }
}

/// Frozen random table with entries uniform in `[-0.5/dim, 0.5/dim]`.
pub fn random_provider(vocab: &Vocabulary, dim: usize, seed: u64) -> EmbeddingTable {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    EmbeddingTable {
        method: Method::Random,
        vocab: vocab.clone(),
        matrix: Tensor2::uniform(vocab.len(), dim, 0.5 / dim as f64, &mut rng),
        subwords: None,
        config: json!({"dim": dim, "seed": seed}),
        epoch_loss: Vec::new(),
    }
}

pub fn train_cbow(sequences: &[Vec<String>], vocab: &Vocabulary, config: &SgnsConfig) -> Result<EmbeddingTable> {
    let (model, _, epoch_loss) = sgns::train(sequences, vocab, config, false)?;
    Ok(EmbeddingTable {
        method: Method::Cbow,
        vocab: vocab.clone(),
        matrix: model.input,
        subwords: None,
        config: serde_json::to_value(config)?,
        epoch_loss,
    })
}

pub fn train_fasttext(sequences: &[Vec<String>], vocab: &Vocabulary, config: &SgnsConfig) -> Result<EmbeddingTable> {
    let (model, names, epoch_loss) = sgns::train(sequences, vocab, config, true)?;
    Ok(EmbeddingTable {
        method: Method::Fasttext,
        vocab: vocab.clone(),
        matrix: model.input,
        subwords: Some(SubwordIndex::new(names, model.trigrams)),
        config: serde_json::to_value(config)?,
        epoch_loss,
    })
}
