//! Loading exported token/AST corpora, duplicate removal and train/valid
//! splitting.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::BufRead;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::store::{Container, CORPUS_MAGIC};

pub const CORPUS_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TokenKind {
    Identifier,
    Literal,
    Keyword,
    Punctuator,
    Other,
}

impl TokenKind {
    /// Maps exporter token types (esprima names or the lowercase categories)
    /// onto the coarse lexical categories.
    pub fn from_exported(kind: &str) -> TokenKind {
        match kind.to_ascii_lowercase().as_str() {
            "identifier" => TokenKind::Identifier,
            "keyword" => TokenKind::Keyword,
            "punctuator" => TokenKind::Punctuator,
            "literal" | "numeric" | "string" | "boolean" | "null" | "regularexpression"
            | "template" => TokenKind::Literal,
            _ => TokenKind::Other,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Token {
    pub kind: TokenKind,
    pub text: String,
    /// Position of the token within its file.
    pub index: u32,
    /// Source offsets `[start, end)` as reported by the exporter.
    pub start: usize,
    pub end: usize,
}

impl Token {
    /// Identifier and literal tokens, i.e. the tokens that carry names.
    pub fn is_name(&self) -> bool {
        matches!(self.kind, TokenKind::Identifier | TokenKind::Literal)
    }

    /// The name under which this token enters the baseline vocabulary:
    /// identifiers verbatim, literals in their stringified form.
    pub fn name(&self) -> String {
        match self.kind {
            TokenKind::Literal => literal_token_name(&self.text),
            _ => self.text.clone(),
        }
    }
}

/// Stringifies a literal token the way the name heuristic stringifies
/// literal values: strings by their unquoted content, numbers by their
/// shortest round-trip decimal, everything else verbatim.
pub fn literal_token_name(raw: &str) -> String {
    let bytes = raw.as_bytes();
    if raw.len() >= 2 && (bytes[0] == b'"' || bytes[0] == b'\'') && bytes[raw.len() - 1] == bytes[0] {
        let content = unescape(&raw[1..raw.len() - 1]);
        return if content.is_empty() { raw.to_string() } else { content };
    }
    if bytes.first().is_some_and(|b| b.is_ascii_digit() || *b == b'.') {
        if let Some(v) = parse_js_number(raw) {
            return format_number(v);
        }
    }
    raw.to_string()
}

fn parse_js_number(raw: &str) -> Option<f64> {
    let clean: String = raw.chars().filter(|&c| c != '_').collect();
    let lower = clean.to_ascii_lowercase();
    let radix = |prefix: &str, radix: u32| {
        lower.strip_prefix(prefix).and_then(|d| u64::from_str_radix(d, radix).ok()).map(|v| v as f64)
    };
    radix("0x", 16)
        .or_else(|| radix("0o", 8))
        .or_else(|| radix("0b", 2))
        .or_else(|| lower.parse::<f64>().ok())
}

/// Shortest round-trip decimal rendering of a number.
pub fn format_number(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    format!("{v}")
}

fn unescape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut chars = s.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next() {
            Some('n') => out.push('\n'),
            Some('t') => out.push('\t'),
            Some('r') => out.push('\r'),
            Some('0') => out.push('\0'),
            Some(other) => out.push(other),
            None => {}
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum SplitTag {
    Train,
    Valid,
    Test,
    #[default]
    Unassigned,
}

impl SplitTag {
    pub fn as_str(self) -> &'static str {
        match self {
            SplitTag::Train => "train",
            SplitTag::Valid => "valid",
            SplitTag::Test => "test",
            SplitTag::Unassigned => "unassigned",
        }
    }

    pub fn code(self) -> u64 {
        match self {
            SplitTag::Train => 1,
            SplitTag::Valid => 2,
            SplitTag::Test => 3,
            SplitTag::Unassigned => 0,
        }
    }
}

impl std::str::FromStr for SplitTag {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(SplitTag::Train),
            "valid" | "validation" => Ok(SplitTag::Valid),
            "test" => Ok(SplitTag::Test),
            "unassigned" => Ok(SplitTag::Unassigned),
            _ => Err(Error::InvalidArgument(format!("unknown split {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileRecord {
    pub file_id: u32,
    pub path: String,
    pub tokens: Vec<Token>,
    /// Raw ESTree tree, absent when the exporter could not parse the file.
    pub ast: Option<Value>,
    #[serde(default)]
    pub split: SplitTag,
}

impl FileRecord {
    pub fn token_texts(&self) -> Vec<&str> {
        self.tokens.iter().map(|t| t.text.as_str()).collect()
    }

    /// Builds a record from one exporter JSON object.
    pub fn from_exported(value: &Value, file_id: u32) -> Result<FileRecord> {
        let exported: ExportedFile = serde_json::from_value(value.clone())?;
        exported.into_record(file_id)
    }
}

#[derive(Debug, Deserialize)]
struct ExportedToken {
    kind: String,
    text: String,
    start: usize,
    end: usize,
}

#[derive(Debug, Deserialize)]
struct ExportedFile {
    path: String,
    tokens: Vec<ExportedToken>,
    #[serde(default)]
    ast: Option<Value>,
    #[serde(default = "default_true")]
    parse_ok: bool,
}

fn default_true() -> bool {
    true
}

impl ExportedFile {
    fn into_record(self, file_id: u32) -> Result<FileRecord> {
        let mut tokens = Vec::with_capacity(self.tokens.len());
        let mut last_start = 0;
        for (i, t) in self.tokens.into_iter().enumerate() {
            if t.text.is_empty() {
                return Err(Error::Format(format!("{}: empty token text at {i}", self.path)));
            }
            if t.start < last_start || t.end < t.start {
                return Err(Error::Format(format!("{}: token offsets out of order at {i}", self.path)));
            }
            last_start = t.start;
            tokens.push(Token {
                kind: TokenKind::from_exported(&t.kind),
                text: t.text,
                index: i as u32,
                start: t.start,
                end: t.end,
            });
        }
        let ast = match (self.parse_ok, self.ast) {
            (true, Some(Value::Null)) | (false, _) | (_, None) => None,
            (true, Some(ast)) => Some(ast),
        };
        Ok(FileRecord { file_id, path: self.path, tokens, ast, split: SplitTag::Unassigned })
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Corpus {
    pub files: Vec<FileRecord>,
    /// Malformed input lines skipped while loading.
    pub skipped: usize,
}

impl Corpus {
    pub fn len(&self) -> usize {
        self.files.len()
    }

    pub fn is_empty(&self) -> bool {
        self.files.is_empty()
    }

    pub fn file(&self, file_id: u32) -> Option<&FileRecord> {
        // ids are dense, so the id is normally the index.
        match self.files.get(file_id as usize) {
            Some(f) if f.file_id == file_id => Some(f),
            _ => self.files.iter().find(|f| f.file_id == file_id),
        }
    }

    pub fn split(&self, tag: SplitTag) -> impl Iterator<Item = &FileRecord> {
        self.files.iter().filter(move |f| f.split == tag)
    }

    fn renumber(&mut self) {
        for (i, f) in self.files.iter_mut().enumerate() {
            f.file_id = i as u32;
        }
    }

    pub fn save_store(&self, path: &Path, config: Value) -> Result<()> {
        self.to_container(config)?.save(path)
    }

    pub fn to_container(&self, config: Value) -> Result<Container> {
        let header = serde_json::json!({
            "format": "scelmo-corpus",
            "files": self.files.len(),
            "skipped": self.skipped,
            "config": config,
        });
        let mut c = Container::new(CORPUS_MAGIC, CORPUS_VERSION, header);
        for f in &self.files {
            c.push(serde_json::to_vec(f)?);
        }
        Ok(c)
    }

    /// Loads a corpus store; returns the corpus and the store header.
    pub fn load_store(path: &Path) -> Result<(Corpus, Value)> {
        let c = Container::load(path, CORPUS_MAGIC)?;
        c.expect_version(CORPUS_VERSION)?;
        let files = c
            .records
            .iter()
            .map(|r| serde_json::from_slice(r).map_err(Error::from))
            .collect::<Result<Vec<FileRecord>>>()?;
        let skipped = c.header["skipped"].as_u64().unwrap_or(0) as usize;
        Ok((Corpus { files, skipped }, c.header))
    }
}

/// Parses exporter JSONL. Malformed lines are counted in `skipped`.
pub fn parse_corpus<R: BufRead>(reader: R) -> Result<Corpus> {
    let mut corpus = Corpus::default();
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed = serde_json::from_str::<ExportedFile>(&line)
            .map_err(Error::from)
            .and_then(|f| f.into_record(corpus.files.len() as u32));
        match parsed {
            Ok(rec) => corpus.files.push(rec),
            Err(_) => corpus.skipped += 1,
        }
    }
    if corpus.files.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    Ok(corpus)
}

pub fn load_corpus(path: &Path) -> Result<Corpus> {
    let file = fs::File::open(path)?;
    parse_corpus(std::io::BufReader::new(file))
}

fn token_sequence_key(file: &FileRecord) -> [u8; 32] {
    let mut h = Sha256::new();
    for t in &file.tokens {
        h.update(t.text.as_bytes());
        h.update([0x1f]);
    }
    h.finalize().into()
}

/// Keeps one file per distinct token-text sequence: the one with the
/// lexicographically smallest path. Survivor order is preserved and ids are
/// renumbered densely.
pub fn deduplicate(mut corpus: Corpus) -> Corpus {
    let keys: Vec<[u8; 32]> = corpus.files.iter().map(token_sequence_key).collect();
    let mut best: HashMap<[u8; 32], usize> = HashMap::new();
    for (i, key) in keys.iter().enumerate() {
        best.entry(*key)
            .and_modify(|j| {
                if corpus.files[i].path < corpus.files[*j].path {
                    *j = i;
                }
            })
            .or_insert(i);
    }
    let mut i = 0;
    corpus.files.retain(|_| {
        let keep = best[&keys[i]] == i;
        i += 1;
        keep
    });
    corpus.renumber();
    corpus
}

fn split_key(seed: u64, s: &str) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(s.as_bytes());
    h.finalize().into()
}

fn project_of(path: &str) -> &str {
    match path.find('/') {
        Some(i) => &path[..i],
        None => path,
    }
}

/// Assigns every file to train or valid. Files (or whole projects when
/// `by_project` is set) are ordered by a keyed hash of `(seed, path)` and the
/// first `round(n * train_frac)` files go to train, clamped so both splits
/// are nonempty.
pub fn split_corpus(mut corpus: Corpus, train_frac: f64, seed: u64, by_project: bool) -> Result<Corpus> {
    if !(train_frac > 0.0 && train_frac < 1.0) {
        return Err(Error::InvalidArgument(format!("train_frac must be in (0, 1), got {train_frac}")));
    }
    let n = corpus.files.len();
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "cannot form nonempty train and valid splits from {n} file(s)"
        )));
    }
    let target = ((n as f64 * train_frac).round() as usize).clamp(1, n - 1);

    if !by_project {
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by_cached_key(|&i| (split_key(seed, &corpus.files[i].path), corpus.files[i].path.clone()));
        for (rank, &i) in order.iter().enumerate() {
            corpus.files[i].split = if rank < target { SplitTag::Train } else { SplitTag::Valid };
        }
        return Ok(corpus);
    }

    let mut projects: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, f) in corpus.files.iter().enumerate() {
        projects.entry(project_of(&f.path)).or_default().push(i);
    }
    if projects.len() < 2 {
        return Err(Error::InvalidArgument("project split needs at least two projects".into()));
    }
    let mut order: Vec<(&str, Vec<usize>)> = projects.into_iter().collect();
    order.sort_by_cached_key(|(p, _)| (split_key(seed, p), p.to_string()));
    let mut assignment = vec![SplitTag::Valid; n];
    let mut in_train = 0usize;
    let mut train_projects = 0usize;
    let total_projects = order.len();
    for (_, members) in &order {
        let with = in_train + members.len();
        let better = with.abs_diff(target) < in_train.abs_diff(target);
        if (better || train_projects == 0) && train_projects + 1 < total_projects {
            for &i in members {
                assignment[i] = SplitTag::Train;
            }
            in_train = with;
            train_projects += 1;
        }
    }
    for (f, tag) in corpus.files.iter_mut().zip(assignment) {
        f.split = tag;
    }
    Ok(corpus)
}
