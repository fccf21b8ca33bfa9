//! Glue shared by the command-line stages: corpus-wide extraction, LM
//! token streams, provider construction and real-bug pair loading.

use std::fs;
use std::io::{BufRead, BufReader};
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::corpus::{Corpus, FileRecord, SplitTag};
use crate::detector::Binding;
use crate::embeddings::EmbeddingTable;
use crate::error::{Error, Result};
use crate::extraction::{extract_file, CodeInstance, ExtractConfig, ExtractStats, Pattern};
use crate::lm::{CollapseWeights, LmModel};
use crate::provider::{FeatureProvider, NoContextProvider, ProviderMode, ScelmoProvider, StaticProvider};

/// Instances of `pattern` from every parsed file, in file order.
pub fn extract_corpus(corpus: &Corpus, pattern: Pattern, config: &ExtractConfig, seed: u64) -> (Vec<CodeInstance>, ExtractStats) {
    let mut all = Vec::new();
    let mut stats = ExtractStats::default();
    for f in &corpus.files {
        let (inst, s) = extract_file(f, pattern, config, seed);
        all.extend(inst);
        stats += s;
    }
    (all, stats)
}

/// Raw token texts of every file in `split`, one stream per file.
pub fn token_streams(corpus: &Corpus, split: SplitTag) -> Vec<Vec<String>> {
    corpus.split(split).map(|f| f.tokens.iter().map(|t| t.text.clone()).collect()).collect()
}

pub fn in_split(instances: &[CodeInstance], split: SplitTag) -> Vec<CodeInstance> {
    instances.iter().filter(|i| i.split == split).cloned().collect()
}

/// Builds the provider described by `binding`, loading its model files.
pub fn provider_for(mode: ProviderMode, binding: &Binding) -> Result<Box<dyn FeatureProvider>> {
    if mode.is_static() {
        let path = binding
            .embeddings
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument(format!("mode {} needs an embeddings file", mode.as_str())))?;
        let table = EmbeddingTable::load(Path::new(path))?;
        let p = StaticProvider { table };
        if p.mode() != mode {
            return Err(Error::ProviderMismatch(format!(
                "{path} holds {} embeddings, not {}",
                p.mode().as_str(),
                mode.as_str()
            )));
        }
        return Ok(Box::new(p));
    }
    let path = binding
        .lm
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument(format!("mode {} needs a language model file", mode.as_str())))?;
    let lm = Arc::new(LmModel::load(Path::new(path))?);
    let weights = binding.collapse.clone().unwrap_or_else(|| CollapseWeights::equal(lm.layers()));
    Ok(match mode {
        ProviderMode::NocontextElmo => Box::new(NoContextProvider { lm, weights }),
        _ => Box::new(ScelmoProvider::new(lm, weights)),
    })
}

/// One line of a real-bug file: the same file before and after its fix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RealBugPair {
    #[serde(default)]
    pub id: Option<String>,
    pub pattern: Pattern,
    pub buggy: Value,
    pub fixed: Value,
}

/// Reads real-bug pairs; lines that are not valid pairs are counted.
pub fn read_real_bugs(path: &Path) -> Result<(Vec<RealBugPair>, usize)> {
    let reader = BufReader::new(fs::File::open(path)?);
    let (mut pairs, mut bad) = (Vec::new(), 0);
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<RealBugPair>(&line) {
            Ok(p) => pairs.push(p),
            Err(_) => bad += 1,
        }
    }
    Ok((pairs, bad))
}

/// Real-bug files as a corpus plus the `(buggy, fixed)` instance pairs.
pub struct RealBugSet {
    pub files: Corpus,
    pub pairs: Vec<(CodeInstance, CodeInstance)>,
    pub skipped: usize,
}

/// Extracts both versions of every pair of `pattern` and keeps the
/// instances whose elements differ at the same index. Pairs of another
/// pattern, unparseable files, differing instance counts and pairs with no
/// changed instance are skipped.
pub fn real_bug_instances(pairs: &[RealBugPair], pattern: Pattern, config: &ExtractConfig, seed: u64) -> RealBugSet {
    let mut set = RealBugSet { files: Corpus::default(), pairs: Vec::new(), skipped: 0 };
    for p in pairs {
        if p.pattern != pattern {
            continue;
        }
        let id = set.files.files.len() as u32;
        let parsed = FileRecord::from_exported(&p.buggy, id).and_then(|b| Ok((b, FileRecord::from_exported(&p.fixed, id + 1)?)));
        let Ok((mut b, mut f)) = parsed else {
            set.skipped += 1;
            continue;
        };
        b.split = SplitTag::Test;
        f.split = SplitTag::Test;
        let (bi, _) = extract_file(&b, pattern, config, seed);
        let (fi, _) = extract_file(&f, pattern, config, seed);
        let changed: Vec<(CodeInstance, CodeInstance)> = if bi.len() == fi.len() {
            bi.into_iter().zip(fi).filter(|(x, y)| x.elements() != y.elements()).collect()
        } else {
            Vec::new()
        };
        if changed.is_empty() {
            set.skipped += 1;
            continue;
        }
        set.files.files.push(b);
        set.files.files.push(f);
        set.pairs.extend(changed);
    }
    set
}
