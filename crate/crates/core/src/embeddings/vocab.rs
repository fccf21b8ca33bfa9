use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, SplitTag};
use crate::error::{Error, Result};

pub const UNK: usize = 0;
pub const MISSING: usize = 1;
pub const RESERVED: usize = 2;

/// Frequency-ranked identifier/literal vocabulary. Ids 0 and 1 are the
/// reserved UNK and MISSING entries; ranked entries start at id 2.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vocabulary {
    pub entries: Vec<(String, u64)>,
    #[serde(skip)]
    index: HashMap<String, usize>,
}

impl Vocabulary {
    pub fn from_entries(entries: Vec<(String, u64)>) -> Vocabulary {
        let index = entries.iter().enumerate().map(|(i, (t, _))| (t.clone(), i + RESERVED)).collect();
        Vocabulary { entries, index }
    }

    /// Keeps the `v_max` most frequent strings; ties go to the
    /// lexicographically smaller one.
    pub fn from_counts(counts: HashMap<String, u64>, v_max: usize) -> Vocabulary {
        let mut entries: Vec<(String, u64)> = counts.into_iter().collect();
        entries.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        entries.truncate(v_max);
        Vocabulary::from_entries(entries)
    }

    pub fn build<'a, S: AsRef<str> + 'a>(sequences: impl IntoIterator<Item = &'a Vec<S>>, v_max: usize) -> Result<Vocabulary> {
        let mut counts: HashMap<String, u64> = HashMap::new();
        for seq in sequences {
            for t in seq {
                *counts.entry(t.as_ref().to_string()).or_default() += 1;
            }
        }
        if counts.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        Ok(Vocabulary::from_counts(counts, v_max))
    }

    /// Total size including the reserved ids.
    pub fn len(&self) -> usize {
        self.entries.len() + RESERVED
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn get(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    /// Id of `token`, or UNK.
    pub fn id(&self, token: &str) -> usize {
        self.get(token).unwrap_or(UNK)
    }

    pub fn word(&self, id: usize) -> &str {
        match id {
            UNK => "<unk>",
            MISSING => "<missing>",
            _ => &self.entries[id - RESERVED].0,
        }
    }

    pub fn count(&self, id: usize) -> u64 {
        if id >= RESERVED {
            self.entries[id - RESERVED].1
        } else {
            0
        }
    }

    /// Rebuilds the lookup index after deserialisation.
    pub fn reindex(&mut self) {
        self.index = self.entries.iter().enumerate().map(|(i, (t, _))| (t.clone(), i + RESERVED)).collect();
    }
}

/// Identifier and literal names of every file in `split`, one sequence per
/// file.
pub fn name_sequences(corpus: &Corpus, split: SplitTag) -> Vec<Vec<String>> {
    corpus
        .split(split)
        .map(|f| f.tokens.iter().filter(|t| t.is_name()).map(|t| t.name()).collect())
        .collect()
}

/// Vocabulary over the identifier and literal tokens of the training split.
pub fn build_vocabulary(corpus: &Corpus, v_max: usize) -> Result<Vocabulary> {
    let seqs = name_sequences(corpus, SplitTag::Train);
    if seqs.iter().all(Vec::is_empty) {
        return Err(Error::EmptyCorpus);
    }
    Vocabulary::build(&seqs, v_max)
}
