//! Character n-gram language model with additive (add-k) smoothing.
//!
//! Sentences are padded with `order - 1` start symbols and one end symbol.
//! The predicted vocabulary is the training character set, the end symbol,
//! and one bucket for characters never seen in training, so
//! `V = |chars| + 2`:
//!
//! ```text
//! P(w | h) = (c(h, w) + k) / (c(h) + k * V)
//! ```
//!
//! A context never seen in training with `k == 0` falls back to uniform.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Sentence;

pub const MAX_ORDER: usize = 9;
pub const DEFAULT_ORDER: usize = 5;
pub const DEFAULT_K: f64 = 0.1;

const FORMAT: &str = "wolofspell-char-ngram";
const FORMAT_VERSION: u32 = 1;

// Symbol ids. Characters start at FIRST_CHAR in sorted order.
const BOS: u16 = 0;
const EOS: u16 = 1;
const UNK: u16 = 2;
const FIRST_CHAR: u16 = 3;
const BITS: u32 = 16;

#[derive(Debug, Error)]
pub enum LmError {
    #[error("order must be between 1 and {MAX_ORDER}, got {0}")]
    Order(usize),
    #[error("smoothing constant must be finite and non-negative, got {0}")]
    Smoothing(f64),
    #[error("cannot train on an empty corpus")]
    EmptyCorpus,
    #[error("perplexity is undefined on an empty evaluation set")]
    EmptyEvaluation,
    #[error("alphabet of {0} characters does not fit the symbol table")]
    AlphabetTooLarge(usize),
    #[error("unsupported model file: {0}")]
    Format(String),
    #[error("{path}: {err}")]
    Io {
        path: PathBuf,
        #[source]
        err: io::Error,
    },
}

/// One predictable symbol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Symbol {
    Char(char),
    End,
    Unknown,
}

/// The last `order - 1` symbols, packed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct LmState(u128);

#[derive(Debug, Clone)]
pub struct NGramLanguageModel {
    order: usize,
    k: f64,
    alphabet: Vec<char>,
    index: HashMap<char, u16>,
    totals: HashMap<u128, u64>,
    counts: HashMap<(u128, u16), u64>,
    /// Lowercased substrings of observed n-grams, boundaries as spaces.
    seen: OnceLock<HashSet<String>>,
}

type Counts = HashMap<(u128, u16), u64>;

fn check_params(order: usize, k: f64) -> Result<(), LmError> {
    if order == 0 || order > MAX_ORDER {
        return Err(LmError::Order(order));
    }
    if !k.is_finite() || k < 0.0 {
        return Err(LmError::Smoothing(k));
    }
    Ok(())
}

/// Trains on the characters of `sentences`.
pub fn train_lm(sentences: &[Sentence], order: usize, k: f64) -> Result<NGramLanguageModel, LmError> {
    let alphabet: BTreeSet<char> = sentences.iter().flat_map(|s| s.as_str().chars()).collect();
    train_lm_with_alphabet(sentences, order, k, alphabet)
}

/// Trains with a fixed alphabet; characters outside it count as unknown.
pub fn train_lm_with_alphabet(
    sentences: &[Sentence],
    order: usize,
    k: f64,
    alphabet: impl IntoIterator<Item = char>,
) -> Result<NGramLanguageModel, LmError> {
    check_params(order, k)?;
    if sentences.is_empty() {
        return Err(LmError::EmptyCorpus);
    }
    let mut model = NGramLanguageModel::empty(order, k, alphabet)?;
    let counts = sentences
        .par_iter()
        .fold(Counts::new, |mut acc, s| {
            model.count_into(s.as_str(), &mut acc);
            acc
        })
        .reduce(Counts::new, |mut a, b| {
            for (key, c) in b {
                *a.entry(key).or_insert(0) += c;
            }
            a
        });
    model.set_counts(counts);
    Ok(model)
}

impl NGramLanguageModel {
    fn empty(order: usize, k: f64, alphabet: impl IntoIterator<Item = char>) -> Result<Self, LmError> {
        let alphabet: Vec<char> = alphabet.into_iter().collect::<BTreeSet<_>>().into_iter().collect();
        if alphabet.len() > (u16::MAX - FIRST_CHAR) as usize {
            return Err(LmError::AlphabetTooLarge(alphabet.len()));
        }
        let index = alphabet
            .iter()
            .enumerate()
            .map(|(i, &c)| (c, i as u16 + FIRST_CHAR))
            .collect();
        Ok(Self {
            order,
            k,
            alphabet,
            index,
            totals: HashMap::new(),
            counts: HashMap::new(),
            seen: OnceLock::new(),
        })
    }

    fn set_counts(&mut self, counts: Counts) {
        let mut totals = HashMap::new();
        for (&(ctx, _), &c) in &counts {
            *totals.entry(ctx).or_insert(0) += c;
        }
        self.counts = counts;
        self.totals = totals;
        self.seen = OnceLock::new();
    }

    fn count_into(&self, text: &str, acc: &mut Counts) {
        let mut state = self.start();
        for c in text.chars() {
            let id = self.id(c);
            *acc.entry((state.0, id)).or_insert(0) += 1;
            state = self.push(state, id);
        }
        *acc.entry((state.0, EOS)).or_insert(0) += 1;
    }

    fn mask(&self) -> u128 {
        let bits = (self.order as u32 - 1) * BITS;
        if bits >= 128 {
            u128::MAX
        } else {
            (1u128 << bits) - 1
        }
    }

    fn push(&self, state: LmState, id: u16) -> LmState {
        if self.order == 1 {
            return LmState(0);
        }
        LmState(((state.0 << BITS) | id as u128) & self.mask())
    }

    fn id(&self, c: char) -> u16 {
        self.index.get(&c).copied().unwrap_or(UNK)
    }

    fn sym_id(&self, sym: Symbol) -> u16 {
        match sym {
            Symbol::Char(c) => self.id(c),
            Symbol::End => EOS,
            Symbol::Unknown => UNK,
        }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn alphabet(&self) -> &[char] {
        &self.alphabet
    }

    /// Size of the predicted vocabulary: characters, end symbol, unknown bucket.
    pub fn vocab_size(&self) -> usize {
        self.alphabet.len() + 2
    }

    /// Every predictable symbol, characters first.
    pub fn symbols(&self) -> impl Iterator<Item = Symbol> + '_ {
        self.alphabet
            .iter()
            .map(|&c| Symbol::Char(c))
            .chain([Symbol::End, Symbol::Unknown])
    }

    /// Contexts observed in training, in a stable order.
    pub fn contexts(&self) -> Vec<LmState> {
        let mut v: Vec<LmState> = self.totals.keys().map(|&c| LmState(c)).collect();
        v.sort_unstable();
        v
    }

    /// State after the start padding.
    pub fn start(&self) -> LmState {
        (1..self.order).fold(LmState(0), |s, _| self.push(s, BOS))
    }

    /// State after the start padding followed by `history`.
    pub fn state_after(&self, history: &str) -> LmState {
        history
            .chars()
            .fold(self.start(), |s, c| self.push(s, self.id(c)))
    }

    fn prob_id(&self, ctx: u128, id: u16) -> f64 {
        let total = self.totals.get(&ctx).copied().unwrap_or(0) as f64;
        let v = self.vocab_size() as f64;
        if total == 0.0 && self.k == 0.0 {
            return 1.0 / v;
        }
        let c = self.counts.get(&(ctx, id)).copied().unwrap_or(0) as f64;
        (c + self.k) / (total + self.k * v)
    }

    pub fn prob(&self, state: LmState, sym: Symbol) -> f64 {
        self.prob_id(state.0, self.sym_id(sym))
    }

    /// Natural-log conditional probability; `-inf` only when `k == 0`.
    pub fn logprob(&self, state: LmState, sym: Symbol) -> f64 {
        self.prob(state, sym).ln()
    }

    /// Scores one character and advances the state.
    pub fn step(&self, state: LmState, c: char) -> (LmState, f64) {
        let id = self.id(c);
        let lp = self.prob_id(state.0, id).ln();
        (self.push(state, id), lp)
    }

    /// Log-probability of the end symbol.
    pub fn end(&self, state: LmState) -> f64 {
        self.prob_id(state.0, EOS).ln()
    }

    /// Sum of character log-probabilities, without the end symbol.
    pub fn score_prefix(&self, text: &str) -> f64 {
        let mut state = self.start();
        let mut total = 0.0;
        for c in text.chars() {
            let (next, lp) = self.step(state, c);
            total += lp;
            state = next;
        }
        total
    }

    /// Log-probability of a full padded sentence.
    pub fn score(&self, text: &str) -> f64 {
        let state = self.state_after(text);
        self.score_prefix(text) + self.end(state)
    }

    /// `exp(-total logprob / predicted symbols)`; each sentence predicts its
    /// characters plus the end symbol.
    pub fn perplexity(&self, sentences: &[Sentence]) -> Result<f64, LmError> {
        if sentences.is_empty() {
            return Err(LmError::EmptyEvaluation);
        }
        let (logp, n) = sentences
            .par_iter()
            .map(|s| (self.score(s.as_str()), s.as_str().chars().count() + 1))
            .reduce(|| (0.0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
        Ok((-logp / n as f64).exp())
    }

    fn seen(&self) -> &HashSet<String> {
        self.seen.get_or_init(|| {
            let width = self.order - 1;
            let mut out = HashSet::new();
            for &(ctx, sym) in self.counts.keys() {
                let ids = (0..width)
                    .rev()
                    .map(|i| ((ctx >> (i as u32 * BITS)) & 0xffff) as u16)
                    .chain([sym]);
                let Some(chars) = ids
                    .map(|id| match id {
                        BOS | EOS => Some(' '),
                        UNK => None,
                        _ => Some(self.alphabet[(id - FIRST_CHAR) as usize]),
                    })
                    .collect::<Option<Vec<char>>>()
                else {
                    continue;
                };
                let lower: Vec<char> = chars.iter().flat_map(|c| c.to_lowercase()).collect();
                for i in 0..lower.len() {
                    for j in i + 1..=lower.len() {
                        out.insert(lower[i..j].iter().collect());
                    }
                }
            }
            out
        })
    }

    /// Whether every `order`-character window of ` word ` (lowercased) was
    /// observed in training; boundaries count as spaces.
    pub fn supports(&self, word: &str) -> bool {
        let padded: Vec<char> = format!(" {} ", word.to_lowercase()).chars().collect();
        let seen = self.seen();
        if padded.len() <= self.order {
            return seen.contains(&padded.iter().collect::<String>());
        }
        padded
            .windows(self.order)
            .all(|w| seen.contains(&w.iter().collect::<String>()))
    }

    pub(crate) fn to_file(&self) -> ModelFile {
        let width = self.order - 1;
        let sorted: BTreeMap<(u128, u16), u64> = self.counts.iter().map(|(&k, &v)| (k, v)).collect();
        let ngrams = sorted
            .into_iter()
            .map(|((ctx, sym), c)| {
                let history = (0..width)
                    .rev()
                    .map(|i| ((ctx >> (i as u32 * BITS)) & 0xffff) as u16)
                    .collect();
                (history, sym, c)
            })
            .collect();
        ModelFile {
            format: FORMAT.to_string(),
            version: FORMAT_VERSION,
            order: self.order,
            k: self.k,
            alphabet: self.alphabet.iter().collect(),
            ngrams,
        }
    }

    pub(crate) fn from_file(file: ModelFile) -> Result<Self, LmError> {
        if file.format != FORMAT || file.version != FORMAT_VERSION {
            return Err(LmError::Format(format!(
                "expected {FORMAT} version {FORMAT_VERSION}, found {} version {}",
                file.format, file.version
            )));
        }
        check_params(file.order, file.k)?;
        let mut model = Self::empty(file.order, file.k, file.alphabet.chars())?;
        let max_id = model.alphabet.len() as u16 + FIRST_CHAR;
        let mut counts = Counts::new();
        for (history, sym, c) in file.ngrams {
            if history.len() != file.order - 1 || history.iter().chain([&sym]).any(|&i| i >= max_id) {
                return Err(LmError::Format("n-gram entry out of range".into()));
            }
            let ctx = history.iter().fold(0u128, |acc, &i| (acc << BITS) | i as u128);
            *counts.entry((ctx, sym)).or_insert(0) += c;
        }
        model.set_counts(counts);
        Ok(model)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_file()).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, LmError> {
        let file: ModelFile = serde_json::from_str(text).map_err(|e| LmError::Format(e.to_string()))?;
        Self::from_file(file)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), LmError> {
        let path = path.as_ref();
        fs::write(path, self.to_json() + "\n").map_err(|err| LmError::Io {
            path: path.to_path_buf(),
            err,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, LmError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|err| LmError::Io {
            path: path.to_path_buf(),
            err,
        })?;
        Self::from_json(&text)
    }
}

#[derive(Serialize, Deserialize)]
pub(crate) struct ModelFile {
    format: String,
    version: u32,
    order: usize,
    k: f64,
    alphabet: String,
    /// (history ids oldest first, next id, count)
    ngrams: Vec<(Vec<u16>, u16, u64)>,
}
