//! Sentence corpora: normalization, line-aligned parallel files, stratified
//! train/valid/test splitting and persistence.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use unicode_normalization::UnicodeNormalization;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("invalid UTF-8 at byte offset {offset}")]
    Decode { offset: usize },
    #[error("{path}: invalid UTF-8 on line {line} at byte offset {offset}")]
    DecodeLine {
        path: PathBuf,
        line: usize,
        offset: usize,
    },
    #[error("alignment error: source has {source_lines} lines, target has {target_lines}")]
    Alignment {
        source_lines: usize,
        target_lines: usize,
    },
    #[error("split requests {requested} pairs but the corpus has {available}")]
    Capacity { requested: usize, available: usize },
    #[error("{path}: {err}")]
    Io {
        path: PathBuf,
        #[source]
        err: io::Error,
    },
}

impl CorpusError {
    pub(crate) fn io(path: impl Into<PathBuf>, err: io::Error) -> Self {
        CorpusError::Io {
            path: path.into(),
            err,
        }
    }
}

/// A normalized sentence: NFC, no leading/trailing whitespace, single spaces
/// between tokens. `id` is the line ordinal inside the corpus it came from.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Sentence {
    pub id: usize,
    pub text: String,
}

impl Sentence {
    pub fn new(id: usize, raw: &str) -> Self {
        Sentence {
            id,
            text: normalize_str(raw),
        }
    }

    pub fn with_id(mut self, id: usize) -> Self {
        self.id = id;
        self
    }

    pub fn as_str(&self) -> &str {
        &self.text
    }

    pub fn is_empty(&self) -> bool {
        self.text.is_empty()
    }

    /// Number of whitespace-separated tokens.
    pub fn token_count(&self) -> usize {
        self.text.split(' ').filter(|t| !t.is_empty()).count()
    }
}

impl fmt::Display for Sentence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text)
    }
}

impl AsRef<str> for Sentence {
    fn as_ref(&self) -> &str {
        &self.text
    }
}

fn normalize_str(raw: &str) -> String {
    let composed: String = raw.nfc().collect();
    let mut out = String::with_capacity(composed.len());
    for tok in composed.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(tok);
    }
    out
}

/// Collapses whitespace and converts to NFC. Idempotent.
pub fn normalize_text(raw: &str) -> Sentence {
    Sentence::new(0, raw)
}

/// Like [`normalize_text`] but starting from raw bytes, reporting the offset
/// of the first invalid UTF-8 sequence.
pub fn normalize_bytes(raw: &[u8]) -> Result<Sentence, CorpusError> {
    let s = std::str::from_utf8(raw).map_err(|e| CorpusError::Decode {
        offset: e.valid_up_to(),
    })?;
    Ok(normalize_text(s))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitLabel {
    Train,
    Valid,
    Test,
}

impl SplitLabel {
    pub const ALL: [SplitLabel; 3] = [SplitLabel::Train, SplitLabel::Valid, SplitLabel::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            SplitLabel::Train => "train",
            SplitLabel::Valid => "valid",
            SplitLabel::Test => "test",
        }
    }
}

impl fmt::Display for SplitLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SentencePair {
    pub source: Sentence,
    pub target: Sentence,
}

/// Line-aligned (noisy source, official target) pairs, optionally labeled with
/// the split each pair belongs to.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ParallelCorpus {
    pairs: Vec<SentencePair>,
    labels: Option<Vec<SplitLabel>>,
}

impl ParallelCorpus {
    pub fn new(pairs: Vec<SentencePair>) -> Self {
        ParallelCorpus {
            pairs,
            labels: None,
        }
    }

    /// Builds an aligned corpus from two equally long sentence lists.
    pub fn from_sides(
        sources: Vec<Sentence>,
        targets: Vec<Sentence>,
    ) -> Result<Self, CorpusError> {
        if sources.len() != targets.len() {
            return Err(CorpusError::Alignment {
                source_lines: sources.len(),
                target_lines: targets.len(),
            });
        }
        let pairs = sources
            .into_iter()
            .zip(targets)
            .map(|(source, target)| SentencePair { source, target })
            .collect();
        Ok(ParallelCorpus::new(pairs))
    }

    /// Attaches one label per pair.
    ///
    /// # Panics
    /// If the number of labels differs from the number of pairs.
    pub fn with_labels(mut self, labels: Vec<SplitLabel>) -> Self {
        assert_eq!(labels.len(), self.pairs.len(), "one label per pair");
        self.labels = Some(labels);
        self
    }

    pub fn pairs(&self) -> &[SentencePair] {
        &self.pairs
    }

    pub fn labels(&self) -> Option<&[SplitLabel]> {
        self.labels.as_deref()
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn sources(&self) -> impl Iterator<Item = &Sentence> {
        self.pairs.iter().map(|p| &p.source)
    }

    pub fn targets(&self) -> impl Iterator<Item = &Sentence> {
        self.pairs.iter().map(|p| &p.target)
    }

    /// The pairs carrying `label`, in corpus order. Empty if unlabeled.
    pub fn subset(&self, label: SplitLabel) -> Vec<&SentencePair> {
        match &self.labels {
            None => Vec::new(),
            Some(labels) => self
                .pairs
                .iter()
                .zip(labels)
                .filter(|(_, l)| **l == label)
                .map(|(p, _)| p)
                .collect(),
        }
    }

    pub fn label_counts(&self) -> BTreeMap<SplitLabel, usize> {
        let mut counts = BTreeMap::new();
        for l in self.labels.iter().flatten() {
            *counts.entry(*l).or_insert(0) += 1;
        }
        counts
    }
}

fn read_lines(path: &Path) -> Result<Vec<Sentence>, CorpusError> {
    let bytes = fs::read(path).map_err(|e| CorpusError::io(path, e))?;
    let mut out = Vec::new();
    if bytes.is_empty() {
        return Ok(out);
    }
    let body = bytes.strip_suffix(b"\n").unwrap_or(&bytes);
    for (i, line) in body.split(|b| *b == b'\n').enumerate() {
        let line = line.strip_suffix(b"\r").unwrap_or(line);
        let text = std::str::from_utf8(line).map_err(|e| CorpusError::DecodeLine {
            path: path.to_path_buf(),
            line: i + 1,
            offset: e.valid_up_to(),
        })?;
        out.push(Sentence::new(i, text));
    }
    Ok(out)
}

/// Reads a one-sentence-per-line file, normalizing each line.
pub fn load_sentences(path: impl AsRef<Path>) -> Result<Vec<Sentence>, CorpusError> {
    read_lines(path.as_ref())
}

/// Loads a line-aligned pair of files.
pub fn load_parallel(
    source_path: impl AsRef<Path>,
    target_path: impl AsRef<Path>,
) -> Result<ParallelCorpus, CorpusError> {
    let sources = read_lines(source_path.as_ref())?;
    let targets = read_lines(target_path.as_ref())?;
    ParallelCorpus::from_sides(sources, targets)
}

/// Writes sentences one per line, UTF-8, LF-terminated.
pub fn write_sentences<'a, I>(path: impl AsRef<Path>, sentences: I) -> Result<(), CorpusError>
where
    I: IntoIterator<Item = &'a str>,
{
    let path = path.as_ref();
    let mut buf = String::new();
    for s in sentences {
        buf.push_str(s);
        buf.push('\n');
    }
    fs::write(path, buf).map_err(|e| CorpusError::io(path, e))
}

/// File stem used for an unlabeled corpus.
pub const UNLABELED_STEM: &str = "corpus";

/// Writes `<split>.src`/`<split>.tgt` for a labeled corpus, or
/// `corpus.src`/`corpus.tgt` otherwise. Returns the written paths.
pub fn write_corpus(
    corpus: &ParallelCorpus,
    dir: impl AsRef<Path>,
) -> Result<Vec<PathBuf>, CorpusError> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| CorpusError::io(dir, e))?;
    let mut written = Vec::new();
    let mut emit = |stem: &str, pairs: &[&SentencePair]| -> Result<(), CorpusError> {
        let src = dir.join(format!("{stem}.src"));
        let tgt = dir.join(format!("{stem}.tgt"));
        write_sentences(&src, pairs.iter().map(|p| p.source.as_str()))?;
        write_sentences(&tgt, pairs.iter().map(|p| p.target.as_str()))?;
        written.push(src);
        written.push(tgt);
        Ok(())
    };
    match corpus.labels() {
        None => {
            let all: Vec<&SentencePair> = corpus.pairs().iter().collect();
            emit(UNLABELED_STEM, &all)?;
        }
        Some(_) => {
            for label in SplitLabel::ALL {
                emit(label.as_str(), &corpus.subset(label))?;
            }
        }
    }
    Ok(written)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum StrataKey {
    /// Buckets of target-side token counts, `LENGTH_BUCKET_WIDTH` wide.
    #[default]
    LengthBucket,
    None,
}

impl FromStr for StrataKey {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "length_bucket" | "length-bucket" => Ok(StrataKey::LengthBucket),
            "none" => Ok(StrataKey::None),
            other => Err(format!("unknown strata key `{other}`")),
        }
    }
}

pub const LENGTH_BUCKET_WIDTH: usize = 5;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_count: usize,
    pub valid_count: usize,
    pub test_count: usize,
    pub seed: u64,
    #[serde(default)]
    pub strata_key: StrataKey,
}

impl SplitSpec {
    pub fn new(train: usize, valid: usize, test: usize, seed: u64) -> Self {
        SplitSpec {
            train_count: train,
            valid_count: valid,
            test_count: test,
            seed,
            strata_key: StrataKey::LengthBucket,
        }
    }

    pub fn total(&self) -> usize {
        self.train_count + self.valid_count + self.test_count
    }

    fn counts(&self) -> [usize; 3] {
        [self.train_count, self.valid_count, self.test_count]
    }
}

/// Stratum of a pair under `key`.
pub fn stratum_of(pair: &SentencePair, key: StrataKey) -> usize {
    match key {
        StrataKey::LengthBucket => pair.target.token_count() / LENGTH_BUCKET_WIDTH,
        StrataKey::None => 0,
    }
}

/// Per-stratum allocation for each subset. Every cell is within one pair of
/// its proportional quota, row sums equal stratum sizes (the fourth column
/// is the unselected remainder) and column sums equal the requested counts.
pub(crate) fn allocate(stratum_sizes: &[usize], counts: [usize; 3]) -> Vec<[usize; 4]> {
    let total: usize = stratum_sizes.iter().sum();
    let selected: usize = counts.iter().sum();
    let cols = [counts[0], counts[1], counts[2], total - selected];
    let mut table = vec![[0usize; 4]; stratum_sizes.len()];
    if total == 0 {
        return table;
    }
    let mut row_deficit = Vec::with_capacity(stratum_sizes.len());
    let mut col_deficit = cols;
    for (h, &size) in stratum_sizes.iter().enumerate() {
        let mut used = 0;
        for j in 0..4 {
            // floor(cols[j] * size / total) without overflow for realistic sizes
            let q = (cols[j] as u128 * size as u128 / total as u128) as usize;
            table[h][j] = q;
            used += q;
            col_deficit[j] -= q;
        }
        row_deficit.push(size - used);
    }
    // Distribute the remaining units as a 0/1 matrix with the given margins:
    // each row takes the columns with the largest outstanding demand.
    for h in 0..stratum_sizes.len() {
        let mut order: Vec<usize> = (0..4).collect();
        order.sort_by(|&a, &b| col_deficit[b].cmp(&col_deficit[a]).then(a.cmp(&b)));
        for &j in order.iter().take(row_deficit[h]) {
            debug_assert!(col_deficit[j] > 0);
            table[h][j] += 1;
            col_deficit[j] -= 1;
        }
    }
    table
}

/// Samples disjoint train/valid/test subsets of exactly the requested sizes,
/// keeping each stratum's share of every subset proportional to its share of
/// the corpus (within one pair). Returns only the selected pairs, in corpus
/// order, each carrying its label.
pub fn stratified_split(
    corpus: &ParallelCorpus,
    spec: &SplitSpec,
) -> Result<ParallelCorpus, CorpusError> {
    if spec.total() > corpus.len() {
        return Err(CorpusError::Capacity {
            requested: spec.total(),
            available: corpus.len(),
        });
    }
    let mut strata: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, pair) in corpus.pairs().iter().enumerate() {
        strata
            .entry(stratum_of(pair, spec.strata_key))
            .or_default()
            .push(i);
    }
    let sizes: Vec<usize> = strata.values().map(Vec::len).collect();
    let table = allocate(&sizes, spec.counts());

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut assigned: Vec<Option<SplitLabel>> = vec![None; corpus.len()];
    for (members, alloc) in strata.values().zip(&table) {
        let mut members = members.clone();
        members.shuffle(&mut rng);
        let mut it = members.into_iter();
        for (label, &n) in SplitLabel::ALL.iter().zip(alloc.iter()) {
            for idx in it.by_ref().take(n) {
                assigned[idx] = Some(*label);
            }
        }
    }

    let mut pairs = Vec::with_capacity(spec.total());
    let mut labels = Vec::with_capacity(spec.total());
    for (pair, label) in corpus.pairs().iter().zip(assigned) {
        if let Some(label) = label {
            pairs.push(pair.clone());
            labels.push(label);
        }
    }
    Ok(ParallelCorpus::new(pairs).with_labels(labels))
}

/// Sidecar describing how a split was produced.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitManifest {
    pub seed: u64,
    pub strata_key: StrataKey,
    pub corpus_size: usize,
    pub train: usize,
    pub valid: usize,
    pub test: usize,
}

impl SplitManifest {
    pub fn new(spec: &SplitSpec, corpus_size: usize) -> Self {
        SplitManifest {
            seed: spec.seed,
            strata_key: spec.strata_key,
            corpus_size,
            train: spec.train_count,
            valid: spec.valid_count,
            test: spec.test_count,
        }
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<(), CorpusError> {
        let path = path.as_ref();
        let mut json = serde_json::to_string_pretty(self).expect("manifest serializes");
        json.push('\n');
        fs::write(path, json).map_err(|e| CorpusError::io(path, e))
    }
}
