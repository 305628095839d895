//! Word, subword (byte-pair-style merges) and character segmentation, plus
//! vocabularies over the resulting tokens.
//!
//! In subword and character modes a space becomes [`SPACE_MARKER`] glued to
//! the front of the following word, so the first word of a sentence carries
//! no marker and decoding is plain concatenation.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use thiserror::Error;

use crate::corpus::{normalize_text, Sentence};

pub const SPACE_MARKER: char = '▁';
pub const UNK: &str = "<unk>";
pub const BOS: &str = "<s>";
pub const EOS: &str = "</s>";
pub const PAD: &str = "<pad>";
/// Reserved tokens, in id order.
pub const RESERVED: [&str; 4] = [UNK, BOS, EOS, PAD];
/// What `<unk>` decodes to.
pub const UNK_PLACEHOLDER: &str = "⁇";
pub const DEFAULT_SUBWORD_VOCAB: usize = 2000;

#[derive(Debug, Error)]
pub enum SegmentError {
    #[error("sentence contains the reserved symbol {0:?}")]
    ReservedSymbol(String),
    #[error("cannot learn merges from an empty corpus")]
    EmptyCorpus,
    #[error("target vocabulary {target} is smaller than the base inventory {base}")]
    TargetTooSmall { target: usize, base: usize },
    #[error("merge {left:?} + {right:?} appears twice")]
    DuplicateMerge { left: String, right: String },
    #[error("min_count must be at least 1")]
    MinCount,
    #[error("unknown segmentation scheme {0:?} (expected word, subword or character)")]
    UnknownScheme(String),
    #[error("{path}:{line}: {message}")]
    Format {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("{path}: {err}")]
    Io {
        path: PathBuf,
        #[source]
        err: io::Error,
    },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> SegmentError + '_ {
    move |err| SegmentError::Io {
        path: path.to_path_buf(),
        err,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SchemeKind {
    Word,
    Subword,
    Character,
}

impl SchemeKind {
    pub const ALL: [SchemeKind; 3] = [SchemeKind::Word, SchemeKind::Subword, SchemeKind::Character];

    pub fn as_str(self) -> &'static str {
        match self {
            SchemeKind::Word => "word",
            SchemeKind::Subword => "subword",
            SchemeKind::Character => "character",
        }
    }

    /// Default vocabulary threshold: words are pruned, characters never.
    pub fn default_min_count(self) -> u64 {
        match self {
            SchemeKind::Word => 2,
            _ => 1,
        }
    }
}

impl fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SchemeKind {
    type Err = SegmentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "word" | "none" => Ok(SchemeKind::Word),
            "subword" | "bpe" => Ok(SchemeKind::Subword),
            "character" | "char" => Ok(SchemeKind::Character),
            other => Err(SegmentError::UnknownScheme(other.to_string())),
        }
    }
}

pub type Merge = (String, String);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SegmentationScheme {
    kind: SchemeKind,
    merges: Vec<Merge>,
    ranks: HashMap<Merge, usize>,
}

impl SegmentationScheme {
    pub fn word() -> Self {
        Self::plain(SchemeKind::Word)
    }

    pub fn character() -> Self {
        Self::plain(SchemeKind::Character)
    }

    fn plain(kind: SchemeKind) -> Self {
        SegmentationScheme {
            kind,
            merges: Vec::new(),
            ranks: HashMap::new(),
        }
    }

    /// A subword scheme from an ordered merge list.
    pub fn subword(merges: Vec<Merge>) -> Result<Self, SegmentError> {
        let mut ranks = HashMap::with_capacity(merges.len());
        for (i, m) in merges.iter().enumerate() {
            if ranks.insert(m.clone(), i).is_some() {
                return Err(SegmentError::DuplicateMerge {
                    left: m.0.clone(),
                    right: m.1.clone(),
                });
            }
        }
        Ok(SegmentationScheme {
            kind: SchemeKind::Subword,
            merges,
            ranks,
        })
    }

    pub fn kind(&self) -> SchemeKind {
        self.kind
    }

    pub fn merges(&self) -> &[Merge] {
        &self.merges
    }

    pub fn encode(&self, s: &Sentence) -> Result<Vec<String>, SegmentError> {
        let text = s.as_str();
        if text.contains(SPACE_MARKER) {
            return Err(SegmentError::ReservedSymbol(SPACE_MARKER.to_string()));
        }
        Ok(match self.kind {
            SchemeKind::Word => {
                if let Some(r) = text.split(' ').find(|w| RESERVED.contains(w)) {
                    return Err(SegmentError::ReservedSymbol(r.to_string()));
                }
                text.split_whitespace().map(str::to_string).collect()
            }
            SchemeKind::Character => text
                .chars()
                .map(|c| if c == ' ' { SPACE_MARKER } else { c }.to_string())
                .collect(),
            SchemeKind::Subword => marked_words(text)
                .flat_map(|w| self.apply_merges(&w))
                .collect(),
        })
    }

    /// Applies merges by rank until none matches.
    fn apply_merges(&self, word: &str) -> Vec<String> {
        let mut syms: Vec<String> = word.chars().map(String::from).collect();
        loop {
            let best = syms
                .windows(2)
                .filter_map(|w| self.ranks.get(&(w[0].clone(), w[1].clone())))
                .min()
                .copied();
            let Some(rank) = best else { break };
            let (l, r) = &self.merges[rank];
            syms = merge_pair(&syms, l, r);
        }
        syms
    }

    pub fn decode<T: AsRef<str>>(&self, tokens: &[T]) -> Sentence {
        let mut out = String::new();
        for (i, t) in tokens.iter().enumerate() {
            let t = t.as_ref();
            if self.kind == SchemeKind::Word && i > 0 {
                out.push(' ');
            }
            if t == UNK {
                out.push_str(UNK_PLACEHOLDER);
            } else {
                out.extend(t.chars().map(|c| if c == SPACE_MARKER { ' ' } else { c }));
            }
        }
        normalize_text(&out)
    }

    /// One `left right` pair per line, in learned order.
    pub fn write_merges(&self, path: impl AsRef<Path>) -> Result<(), SegmentError> {
        let path = path.as_ref();
        let mut out = String::new();
        for (l, r) in &self.merges {
            out.push_str(l);
            out.push(' ');
            out.push_str(r);
            out.push('\n');
        }
        fs::write(path, out).map_err(io_err(path))
    }

    pub fn read_merges(path: impl AsRef<Path>) -> Result<Self, SegmentError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        let mut merges = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let mut parts = line.split(' ');
            match (parts.next(), parts.next(), parts.next()) {
                (Some(l), Some(r), None) if !l.is_empty() && !r.is_empty() => {
                    merges.push((l.to_string(), r.to_string()))
                }
                _ => {
                    return Err(SegmentError::Format {
                        path: path.to_path_buf(),
                        line: i + 1,
                        message: "expected two space-separated symbols".into(),
                    })
                }
            }
        }
        Self::subword(merges)
    }
}

fn marked_words(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(' ')
        .filter(|w| !w.is_empty())
        .enumerate()
        .map(|(i, w)| {
            if i == 0 {
                w.to_string()
            } else {
                format!("{SPACE_MARKER}{w}")
            }
        })
}

fn merge_pair(syms: &[String], l: &str, r: &str) -> Vec<String> {
    let mut out = Vec::with_capacity(syms.len());
    let mut i = 0;
    while i < syms.len() {
        if i + 1 < syms.len() && syms[i] == l && syms[i + 1] == r {
            out.push(format!("{l}{r}"));
            i += 2;
        } else {
            out.push(syms[i].clone());
            i += 1;
        }
    }
    out
}

/// Distinct non-space characters plus the marker.
pub fn base_inventory<'a>(sentences: impl IntoIterator<Item = &'a Sentence>) -> BTreeSet<char> {
    let mut inv: BTreeSet<char> = sentences
        .into_iter()
        .flat_map(|s| s.as_str().chars())
        .filter(|&c| c != ' ')
        .collect();
    inv.insert(SPACE_MARKER);
    inv
}

/// Learns merges greedily: the most frequent adjacent pair wins, ties go to
/// the lexicographically smallest pair. Stops at `target_vocab_size` or when
/// no pair occurs at least twice.
pub fn train_subword(
    sentences: &[Sentence],
    target_vocab_size: usize,
) -> Result<SegmentationScheme, SegmentError> {
    if sentences.iter().all(|s| s.is_empty()) {
        return Err(SegmentError::EmptyCorpus);
    }
    if sentences.iter().any(|s| s.as_str().contains(SPACE_MARKER)) {
        return Err(SegmentError::ReservedSymbol(SPACE_MARKER.to_string()));
    }
    let base = base_inventory(sentences).len();
    if target_vocab_size < base {
        return Err(SegmentError::TargetTooSmall {
            target: target_vocab_size,
            base,
        });
    }

    let mut freq: BTreeMap<String, u64> = BTreeMap::new();
    for s in sentences {
        for w in marked_words(s.as_str()) {
            *freq.entry(w).or_insert(0) += 1;
        }
    }
    let mut words: Vec<(Vec<String>, u64)> = freq
        .into_iter()
        .map(|(w, f)| (w.chars().map(String::from).collect(), f))
        .collect();

    let mut pair_counts: HashMap<Merge, u64> = HashMap::new();
    let mut where_: HashMap<Merge, BTreeSet<usize>> = HashMap::new();
    for (i, (syms, f)) in words.iter().enumerate() {
        for w in syms.windows(2) {
            let p = (w[0].clone(), w[1].clone());
            *pair_counts.entry(p.clone()).or_insert(0) += f;
            where_.entry(p).or_default().insert(i);
        }
    }

    let mut merges = Vec::new();
    while base + merges.len() < target_vocab_size {
        let best = pair_counts
            .iter()
            .filter(|(_, &c)| c >= 2)
            .max_by(|a, b| a.1.cmp(b.1).then_with(|| b.0.cmp(a.0)));
        let Some((pair, _)) = best else { break };
        let pair = pair.clone();
        let touched = where_.remove(&pair).unwrap_or_default();
        for i in touched {
            let (syms, f) = &mut words[i];
            for w in syms.windows(2) {
                let p = (w[0].clone(), w[1].clone());
                if let Some(c) = pair_counts.get_mut(&p) {
                    *c -= *f;
                    if *c == 0 {
                        pair_counts.remove(&p);
                    }
                }
            }
            *syms = merge_pair(syms, &pair.0, &pair.1);
            for w in syms.windows(2) {
                let p = (w[0].clone(), w[1].clone());
                *pair_counts.entry(p.clone()).or_insert(0) += *f;
                where_.entry(p).or_default().insert(i);
            }
        }
        pair_counts.remove(&pair);
        merges.push(pair);
    }
    SegmentationScheme::subword(merges)
}

/// Token-to-id map with reserved ids `<unk>`=0, `<s>`=1, `</s>`=2, `<pad>`=3.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    counts: Vec<u64>,
    index: HashMap<String, u32>,
}

impl Default for Vocabulary {
    fn default() -> Self {
        let mut v = Vocabulary {
            tokens: Vec::new(),
            counts: Vec::new(),
            index: HashMap::new(),
        };
        for r in RESERVED {
            v.push(r.to_string(), 0);
        }
        v
    }
}

impl Vocabulary {
    pub const UNK_ID: u32 = 0;

    fn push(&mut self, token: String, count: u64) {
        self.index.insert(token.clone(), self.tokens.len() as u32);
        self.tokens.push(token);
        self.counts.push(count);
    }

    /// Adds `token` with count 0 if absent.
    pub fn ensure(&mut self, token: &str) {
        if !self.index.contains_key(token) {
            self.push(token.to_string(), 0);
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> u32 {
        self.index.get(token).copied().unwrap_or(Self::UNK_ID)
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    pub fn count(&self, token: &str) -> Option<u64> {
        self.index.get(token).map(|&i| self.counts[i as usize])
    }

    pub fn tokens(&self) -> impl Iterator<Item = (&str, u64)> {
        self.tokens.iter().map(String::as_str).zip(self.counts.iter().copied())
    }

    /// Replaces out-of-vocabulary tokens by `<unk>`.
    pub fn map_unknown(&self, tokens: &[String]) -> Vec<String> {
        tokens
            .iter()
            .map(|t| if self.contains(t) { t.clone() } else { UNK.to_string() })
            .collect()
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<(), SegmentError> {
        let path = path.as_ref();
        let mut out = String::new();
        for (t, c) in self.tokens() {
            out.push_str(t);
            out.push('\t');
            out.push_str(&c.to_string());
            out.push('\n');
        }
        fs::write(path, out).map_err(io_err(path))
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self, SegmentError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        let bad = |line: usize, message: &str| SegmentError::Format {
            path: path.to_path_buf(),
            line,
            message: message.to_string(),
        };
        let mut v = Vocabulary {
            tokens: Vec::new(),
            counts: Vec::new(),
            index: HashMap::new(),
        };
        for (i, line) in text.lines().enumerate() {
            let (tok, count) = line.split_once('\t').ok_or_else(|| bad(i + 1, "expected token<TAB>count"))?;
            let count: u64 = count.parse().map_err(|_| bad(i + 1, "count is not an integer"))?;
            if v.contains(tok) {
                return Err(bad(i + 1, "duplicate token"));
            }
            if i < RESERVED.len() && tok != RESERVED[i] {
                return Err(bad(i + 1, "reserved symbols must come first"));
            }
            v.push(tok.to_string(), count);
        }
        if v.len() < RESERVED.len() {
            return Err(bad(v.len() + 1, "missing reserved symbols"));
        }
        Ok(v)
    }
}

/// Counts tokens and keeps those seen at least `min_count` times, most
/// frequent first (ties by token).
pub fn build_vocab<'a, I>(sequences: I, min_count: u64) -> Result<Vocabulary, SegmentError>
where
    I: IntoIterator<Item = &'a [String]>,
{
    if min_count < 1 {
        return Err(SegmentError::MinCount);
    }
    let mut counts: HashMap<&str, u64> = HashMap::new();
    for seq in sequences {
        for t in seq {
            *counts.entry(t.as_str()).or_insert(0) += 1;
        }
    }
    let mut kept: Vec<(&str, u64)> = counts
        .into_iter()
        .filter(|&(t, c)| c >= min_count && !RESERVED.contains(&t))
        .collect();
    kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    let mut v = Vocabulary::default();
    for (t, c) in kept {
        v.push(t.to_string(), c);
    }
    Ok(v)
}

/// Writes space-joined tokens, one sequence per line.
pub fn write_tokenized<'a, I>(path: impl AsRef<Path>, sequences: I) -> Result<(), SegmentError>
where
    I: IntoIterator<Item = &'a Vec<String>>,
{
    let path = path.as_ref();
    let mut out = String::new();
    for seq in sequences {
        out.push_str(&seq.join(" "));
        out.push('\n');
    }
    fs::write(path, out).map_err(io_err(path))
}

pub fn read_tokenized(path: impl AsRef<Path>) -> Result<Vec<Vec<String>>, SegmentError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    Ok(text
        .lines()
        .map(|l| l.split(' ').filter(|t| !t.is_empty()).map(str::to_string).collect())
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(text: &str) -> Sentence {
        Sentence::new(0, text)
    }

    fn toks(xs: &[&str]) -> Vec<String> {
        xs.iter().map(|x| x.to_string()).collect()
    }

    #[test]
    fn character_and_word_modes() {
        let c = SegmentationScheme::character();
        assert_eq!(c.encode(&s("bal bi")).unwrap(), toks(&["b", "a", "l", "▁", "b", "i"]));
        assert_eq!(c.decode(&toks(&["b", "a", "l", "▁", "b", "i"])).as_str(), "bal bi");
        let w = SegmentationScheme::word();
        assert_eq!(w.encode(&s("bal bi")).unwrap(), toks(&["bal", "bi"]));
        assert_eq!(w.decode(&toks(&["bal", "bi"])).as_str(), "bal bi");
    }

    #[test]
    fn empty_and_unknown() {
        let c = SegmentationScheme::character();
        assert_eq!(c.decode::<String>(&[]).as_str(), "");
        assert_eq!(c.decode(&toks(&["b", UNK, "l"])).as_str(), "b⁇l");
        assert_eq!(SegmentationScheme::word().decode(&toks(&["xam", UNK])).as_str(), "xam ⁇");
    }

    #[test]
    fn marker_in_input_is_rejected() {
        for scheme in [SegmentationScheme::character(), SegmentationScheme::word()] {
            assert!(matches!(scheme.encode(&s("a▁b")), Err(SegmentError::ReservedSymbol(_))));
        }
        assert!(matches!(
            SegmentationScheme::word().encode(&s("xam <unk>")),
            Err(SegmentError::ReservedSymbol(_))
        ));
    }

    #[test]
    fn three_merges_on_small_corpus() {
        // Pair counts by hand: aa=4, ab=3 -> aa; then ab=3, (aa,a)=2 -> ab;
        // then (aa,ab)=2 -> aaab. Base {a, b, ▁} + 3 = 6.
        let corpus = [s("aaab"), s("aaab"), s("ab")];
        let bpe = train_subword(&corpus, 6).unwrap();
        let want: Vec<Merge> = vec![
            ("a".into(), "a".into()),
            ("a".into(), "b".into()),
            ("aa".into(), "ab".into()),
        ];
        assert_eq!(bpe.merges(), &want[..]);
        assert_eq!(bpe.encode(&s("aaab")).unwrap(), toks(&["aaab"]));
    }

    #[test]
    fn given_merges_apply_in_rank_order() {
        let bpe = SegmentationScheme::subword(vec![
            ("a".into(), "a".into()),
            ("aa".into(), "a".into()),
        ])
        .unwrap();
        assert_eq!(bpe.encode(&s("aaab")).unwrap(), toks(&["aaa", "b"]));
    }

    #[test]
    fn target_equal_to_base_learns_nothing() {
        let corpus = [s("aaab"), s("ab ba")];
        let bpe = train_subword(&corpus, 3).unwrap();
        assert!(bpe.merges().is_empty());
        let chars = SegmentationScheme::character();
        assert_eq!(bpe.encode(&corpus[1]).unwrap(), chars.encode(&corpus[1]).unwrap());
        assert!(matches!(
            train_subword(&corpus, 2),
            Err(SegmentError::TargetTooSmall { target: 2, base: 3 })
        ));
    }

    #[test]
    fn stops_without_repeated_pairs() {
        let bpe = train_subword(&[s("ab")], 100).unwrap();
        assert!(bpe.merges().is_empty());
        assert!(matches!(train_subword(&[], 10), Err(SegmentError::EmptyCorpus)));
    }

    #[test]
    fn merges_stay_inside_words() {
        let corpus = vec![s("ab ab ab ab")];
        let bpe = train_subword(&corpus, 50).unwrap();
        assert!(bpe.merges().iter().all(|(_, r)| !r.starts_with(SPACE_MARKER)));
        assert_eq!(bpe.encode(&corpus[0]).unwrap(), toks(&["ab", "▁ab", "▁ab", "▁ab"]));
    }

    #[test]
    fn duplicate_merges_rejected() {
        let m = ("a".to_string(), "b".to_string());
        assert!(matches!(
            SegmentationScheme::subword(vec![m.clone(), m]),
            Err(SegmentError::DuplicateMerge { .. })
        ));
    }

    #[test]
    fn vocab_thresholds() {
        let seqs = [toks(&["a", "b"]), toks(&["a"])];
        let v = build_vocab(seqs.iter().map(Vec::as_slice), 1).unwrap();
        assert_eq!(v.len(), 6);
        assert_eq!(v.count("a"), Some(2));
        assert_eq!(v.count("b"), Some(1));
        assert_eq!(v.id(UNK), 0);
        assert_eq!(v.id(PAD), 3);
        let v2 = build_vocab(seqs.iter().map(Vec::as_slice), 2).unwrap();
        assert_eq!(v2.len(), 5);
        assert_eq!(v2.id("b"), Vocabulary::UNK_ID);
        let empty = build_vocab(std::iter::empty(), 1).unwrap();
        assert_eq!(empty.tokens().map(|t| t.0).collect::<Vec<_>>(), RESERVED);
        assert!(matches!(build_vocab(std::iter::empty(), 0), Err(SegmentError::MinCount)));
    }

    #[test]
    fn files_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let corpus = [s("ñaari xar"), s("xar yi"), s("ñaari xar yi")];
        let bpe = train_subword(&corpus, 20).unwrap();
        bpe.write_merges(dir.path().join("m")).unwrap();
        assert_eq!(SegmentationScheme::read_merges(dir.path().join("m")).unwrap(), bpe);

        let seqs: Vec<Vec<String>> = corpus.iter().map(|x| bpe.encode(x).unwrap()).collect();
        let v = build_vocab(seqs.iter().map(Vec::as_slice), 1).unwrap();
        v.write(dir.path().join("v")).unwrap();
        assert_eq!(Vocabulary::read(dir.path().join("v")).unwrap(), v);
        write_tokenized(dir.path().join("t"), &seqs).unwrap();
        assert_eq!(read_tokenized(dir.path().join("t")).unwrap(), seqs);
    }

    #[test]
    fn scheme_names() {
        assert_eq!("char".parse::<SchemeKind>().unwrap(), SchemeKind::Character);
        assert_eq!("none".parse::<SchemeKind>().unwrap(), SchemeKind::Word);
        assert!("morph".parse::<SchemeKind>().is_err());
    }
}
