//! Feature providers: map an instance to one vector per slot.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, FileRecord};
use crate::embeddings::EmbeddingTable;
use crate::error::{Error, Result};
use crate::extraction::{feature_token_positions, CodeInstance, BIN_OP, CALL_BASE};
use crate::lm::{collapse, CollapseWeights, LmModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProviderMode {
    Random,
    Cbow,
    Fasttext,
    NocontextElmo,
    Scelmo,
}

impl ProviderMode {
    pub fn as_str(self) -> &'static str {
        match self {
            ProviderMode::Random => "random",
            ProviderMode::Cbow => "cbow",
            ProviderMode::Fasttext => "fasttext",
            ProviderMode::NocontextElmo => "nocontext-elmo",
            ProviderMode::Scelmo => "scelmo",
        }
    }

    pub fn is_static(self) -> bool {
        matches!(self, ProviderMode::Random | ProviderMode::Cbow | ProviderMode::Fasttext)
    }
}

impl std::str::FromStr for ProviderMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random" => Ok(ProviderMode::Random),
            "cbow" => Ok(ProviderMode::Cbow),
            "fasttext" => Ok(ProviderMode::Fasttext),
            "nocontext-elmo" => Ok(ProviderMode::NocontextElmo),
            "scelmo" => Ok(ProviderMode::Scelmo),
            _ => Err(Error::InvalidArgument(format!("unknown provider mode {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SlotVector {
    Vector(Vec<f64>),
    /// An operator left for the detector's own operator table.
    Operator(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub mode: ProviderMode,
    pub dim: usize,
    pub slots: Vec<SlotVector>,
}

impl FeatureVector {
    pub fn width(&self) -> usize {
        self.slots.len() * self.dim
    }
}

/// Files an instance may refer to, by id.
pub trait FileSource {
    fn file(&self, file_id: u32) -> Option<&FileRecord>;
}

impl FileSource for Corpus {
    fn file(&self, file_id: u32) -> Option<&FileRecord> {
        Corpus::file(self, file_id)
    }
}

pub trait FeatureProvider: Send + Sync {
    fn mode(&self) -> ProviderMode;
    fn dim(&self) -> usize;
    fn features(&self, inst: &CodeInstance, files: &dyn FileSource) -> Result<FeatureVector>;
}

/// Random, CBOW or FastText table lookup.
pub struct StaticProvider {
    pub table: EmbeddingTable,
}

impl FeatureProvider for StaticProvider {
    fn mode(&self) -> ProviderMode {
        match self.table.method {
            crate::embeddings::Method::Random => ProviderMode::Random,
            crate::embeddings::Method::Cbow => ProviderMode::Cbow,
            crate::embeddings::Method::Fasttext => ProviderMode::Fasttext,
        }
    }

    fn dim(&self) -> usize {
        self.table.dim()
    }

    fn features(&self, inst: &CodeInstance, _files: &dyn FileSource) -> Result<FeatureVector> {
        let slots = inst
            .elements()
            .into_iter()
            .enumerate()
            .map(|(i, e)| {
                if !inst.pattern.is_call() && i == BIN_OP {
                    SlotVector::Operator(e.unwrap_or_default().to_string())
                } else {
                    SlotVector::Vector(self.table.embed(e))
                }
            })
            .collect();
        Ok(FeatureVector { mode: self.mode(), dim: self.dim(), slots })
    }
}

/// Synthetic query built from the element names alone, plus the indices
/// of the element tokens in it. The base slot index is `None` when the
/// base is missing.
pub fn no_context_tokens(inst: &CodeInstance) -> (Vec<String>, Vec<Option<usize>>) {
    let e = inst.elements();
    let name = |i: usize| e[i].unwrap_or_default().to_string();
    if inst.pattern.is_call() {
        let mut toks = Vec::with_capacity(8);
        let mut at = Vec::with_capacity(4);
        match e[CALL_BASE] {
            Some(b) => {
                at.push(Some(0));
                toks.extend([b.to_string(), ".".to_string()]);
            }
            None => at.push(None),
        }
        for (i, sep) in [(1, "("), (2, ","), (3, ")")] {
            at.push(Some(toks.len()));
            toks.push(name(i));
            toks.push(sep.to_string());
        }
        (toks, at)
    } else {
        ((0..3).map(name).collect(), vec![Some(0), Some(1), Some(2)])
    }
}

pub struct NoContextProvider {
    pub lm: Arc<LmModel>,
    pub weights: CollapseWeights,
}

impl FeatureProvider for NoContextProvider {
    fn mode(&self) -> ProviderMode {
        ProviderMode::NocontextElmo
    }

    fn dim(&self) -> usize {
        self.lm.config.width()
    }

    fn features(&self, inst: &CodeInstance, _files: &dyn FileSource) -> Result<FeatureVector> {
        let (toks, at) = no_context_tokens(inst);
        let refs: Vec<&str> = toks.iter().map(String::as_str).collect();
        let states = self.lm.layer_states(&refs);
        let slots = at
            .into_iter()
            .map(|a| match a {
                Some(k) => collapse(&states[k], &self.weights).map(SlotVector::Vector),
                None => Ok(SlotVector::Vector(vec![0.0; self.dim()])),
            })
            .collect::<Result<_>>()?;
        Ok(FeatureVector { mode: self.mode(), dim: self.dim(), slots })
    }
}

/// Contextual states read at the instance's feature tokens, computed over
/// the fixed-length chunk of the file that contains each token.
pub struct ScelmoProvider {
    pub lm: Arc<LmModel>,
    pub weights: CollapseWeights,
    cache: Mutex<HashMap<(u32, usize), Arc<Vec<Vec<f64>>>>>,
}

impl ScelmoProvider {
    pub fn new(lm: Arc<LmModel>, weights: CollapseWeights) -> ScelmoProvider {
        ScelmoProvider { lm, weights, cache: Mutex::new(HashMap::new()) }
    }

    fn chunk_vectors(&self, file: &FileRecord, start: usize, inst: &CodeInstance) -> Result<Arc<Vec<Vec<f64>>>> {
        let end = (start + self.lm.config.seq_len).min(file.tokens.len());
        let touched = inst.overrides.iter().any(|o| (start..end).contains(&o.position));
        let key = (file.file_id, start);
        if !touched {
            if let Some(v) = self.cache.lock().unwrap().get(&key) {
                return Ok(v.clone());
            }
        }
        let mut toks: Vec<&str> = file.tokens[start..end].iter().map(|t| t.text.as_str()).collect();
        for o in &inst.overrides {
            if (start..end).contains(&o.position) {
                toks[o.position - start] = &o.text;
            }
        }
        let vecs = Arc::new(
            self.lm.layer_states(&toks).iter().map(|s| collapse(s, &self.weights)).collect::<Result<Vec<_>>>()?,
        );
        if !touched {
            self.cache.lock().unwrap().insert(key, vecs.clone());
        }
        Ok(vecs)
    }
}

impl FeatureProvider for ScelmoProvider {
    fn mode(&self) -> ProviderMode {
        ProviderMode::Scelmo
    }

    fn dim(&self) -> usize {
        self.lm.config.width()
    }

    fn features(&self, inst: &CodeInstance, files: &dyn FileSource) -> Result<FeatureVector> {
        let file = files
            .file(inst.file_id)
            .ok_or_else(|| Error::CorruptInstance(format!("instance refers to unknown file {}", inst.file_id)))?;
        let positions = feature_token_positions(inst, file)?;
        let slots = positions
            .into_iter()
            .map(|p| match p {
                Some(p) => {
                    let chunk = self.lm.chunk_of(p);
                    let vecs = self.chunk_vectors(file, chunk.start, inst)?;
                    Ok(SlotVector::Vector(vecs[p - chunk.start].clone()))
                }
                None => Ok(SlotVector::Vector(vec![0.0; self.dim()])),
            })
            .collect::<Result<_>>()?;
        Ok(FeatureVector { mode: self.mode(), dim: self.dim(), slots })
    }
}
