//! Rule inversion and candidate lattices.
//!
//! Every rule's pattern is expanded into the finite set of strings it can
//! match (open repetitions capped at `max_run`, classes intersected with the
//! alphabet). Each (match, replacement) instance is trimmed to the span that
//! actually changed, which gives context-free entries such as `kh ← x` or
//! `di ← j`. Where a later rule's input overlaps text produced by an earlier
//! rule, the two entries are composed into one, so chained rewrites (`ë` →
//! `eu`, then `g` → `gu` in `gën` → `gueun`) stay reachable.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use regex_syntax::hir::{Class, Hir, HirKind};
use thiserror::Error;

use crate::corpus::Sentence;
use crate::rules::RewriteRuleSet;

#[derive(Debug, Error)]
pub enum InversionError {
    #[error("rule {index} (`{pattern}`) cannot be inverted: {reason}")]
    NonInvertible {
        index: usize,
        pattern: String,
        reason: String,
    },
}

/// Lowercase letters of the official Wolof alphabet.
pub const OFFICIAL_LOWERCASE: &str = "aàbcdeéëfgijklmnñŋoópqrstuwxy";

/// The official alphabet in both cases.
pub fn official_alphabet() -> Vec<char> {
    let mut out: Vec<char> = OFFICIAL_LOWERCASE.chars().collect();
    out.extend(OFFICIAL_LOWERCASE.chars().flat_map(char::to_uppercase));
    out
}

pub const DEFAULT_IDENTITY_PROB: f64 = 0.5;

#[derive(Debug, Clone)]
pub struct InversionConfig {
    /// Cap applied to `+`, `*` and `{n,}` when enumerating matches.
    pub max_run: u32,
    /// Characters that wide classes such as `\w` are instantiated over.
    pub alphabet: Vec<char>,
    /// Expansions larger than this are treated as unbounded.
    pub max_expansion: usize,
    /// Channel probability of "no error" for identity candidates.
    pub identity_prob: f64,
}

impl Default for InversionConfig {
    fn default() -> Self {
        InversionConfig {
            max_run: 2,
            alphabet: official_alphabet(),
            max_expansion: 20_000,
            identity_prob: DEFAULT_IDENTITY_PROB,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InverseCandidate {
    pub source: String,
    /// Channel log-probability.
    pub logp: f64,
}

/// Maps produced (noisy) substrings to the substrings they may have come from.
#[derive(Debug, Clone)]
pub struct InverseTable {
    entries: BTreeMap<String, Vec<InverseCandidate>>,
    max_key_chars: usize,
    identity_logp: f64,
}

impl Default for InverseTable {
    fn default() -> Self {
        InverseTable {
            entries: BTreeMap::new(),
            max_key_chars: 0,
            identity_logp: DEFAULT_IDENTITY_PROB.ln(),
        }
    }
}

impl InverseTable {
    /// Builds a table from raw (key → sources) lists. Each key also gets its
    /// identity candidate; weights follow the identity/uniform-remainder prior.
    pub fn from_entries<I, K, S>(entries: I, identity_prob: f64) -> Self
    where
        I: IntoIterator<Item = (K, Vec<S>)>,
        K: Into<String>,
        S: Into<String>,
    {
        let mut sets: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
        for (k, sources) in entries {
            let set = sets.entry(k.into()).or_default();
            set.extend(sources.into_iter().map(Into::into));
        }
        Self::weighted(sets, identity_prob)
    }

    fn weighted(sets: BTreeMap<String, BTreeSet<String>>, identity_prob: f64) -> Self {
        let identity_logp = identity_prob.ln();
        let mut entries = BTreeMap::new();
        let mut max_key_chars = 0;
        for (key, mut sources) in sets {
            if key.is_empty() {
                continue;
            }
            sources.remove(&key);
            max_key_chars = max_key_chars.max(key.chars().count());
            let mut cands = vec![InverseCandidate {
                source: key.clone(),
                logp: identity_logp,
            }];
            if !sources.is_empty() {
                let share = ((1.0 - identity_prob) / sources.len() as f64).ln();
                cands.extend(sources.into_iter().map(|source| InverseCandidate {
                    source,
                    logp: share,
                }));
            }
            entries.insert(key, cands);
        }
        InverseTable {
            entries,
            max_key_chars,
            identity_logp,
        }
    }

    /// Candidates for `key`, identity first.
    pub fn get(&self, key: &str) -> Option<&[InverseCandidate]> {
        self.entries.get(key).map(Vec::as_slice)
    }

    /// Source strings for `key` (identity included).
    pub fn sources(&self, key: &str) -> BTreeSet<&str> {
        self.get(key)
            .into_iter()
            .flatten()
            .map(|c| c.source.as_str())
            .collect()
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn max_key_chars(&self) -> usize {
        self.max_key_chars
    }

    pub fn identity_logp(&self) -> f64 {
        self.identity_logp
    }

    /// `key<TAB>source<TAB>logp` lines, sorted.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for (k, cands) in &self.entries {
            for c in cands {
                out.push_str(&format!("{k}\t{}\t{:.6}\n", c.source, c.logp));
            }
        }
        out
    }
}

#[derive(Debug, Clone, Default)]
struct Frag {
    text: String,
    groups: Vec<(u32, String)>,
}

impl Frag {
    fn concat(&self, other: &Frag) -> Frag {
        let mut groups = self.groups.clone();
        groups.extend(other.groups.iter().cloned());
        Frag {
            text: format!("{}{}", self.text, other.text),
            groups,
        }
    }

    fn group(&self, g: usize) -> Option<String> {
        if g == 0 {
            return Some(self.text.clone());
        }
        self.groups
            .iter()
            .rev()
            .find(|(i, _)| *i as usize == g)
            .map(|(_, s)| s.clone())
    }
}

/// Classes up to this size are taken literally; larger ones (`\w`, `[^o]`)
/// are intersected with the alphabet.
const SMALL_CLASS: u32 = 64;

struct Expander<'a> {
    cfg: &'a InversionConfig,
}

impl Expander<'_> {
    fn check(&self, n: usize) -> Result<(), String> {
        if n > self.cfg.max_expansion {
            Err(format!(
                "expands to more than {} strings",
                self.cfg.max_expansion
            ))
        } else {
            Ok(())
        }
    }

    fn product(&self, a: &[Frag], b: &[Frag]) -> Result<Vec<Frag>, String> {
        self.check(a.len().saturating_mul(b.len()))?;
        Ok(a.iter()
            .flat_map(|x| b.iter().map(move |y| x.concat(y)))
            .collect())
    }

    fn expand(&self, hir: &Hir) -> Result<Vec<Frag>, String> {
        match hir.kind() {
            HirKind::Empty | HirKind::Look(_) => Ok(vec![Frag::default()]),
            HirKind::Literal(lit) => {
                let text = std::str::from_utf8(&lit.0)
                    .map_err(|_| "non-UTF-8 literal".to_string())?
                    .to_string();
                Ok(vec![Frag {
                    text,
                    groups: Vec::new(),
                }])
            }
            HirKind::Class(Class::Unicode(cls)) => {
                let size: u32 = cls.ranges().iter().map(|r| r.len() as u32).sum();
                let mut out: Vec<char> = if size <= SMALL_CLASS {
                    cls.iter().flat_map(|r| r.start()..=r.end()).collect()
                } else {
                    self.cfg
                        .alphabet
                        .iter()
                        .copied()
                        .filter(|c| cls.ranges().iter().any(|r| (r.start()..=r.end()).contains(c)))
                        .collect()
                };
                out.sort_unstable();
                out.dedup();
                self.check(out.len())?;
                Ok(out
                    .into_iter()
                    .map(|c| Frag {
                        text: c.to_string(),
                        groups: Vec::new(),
                    })
                    .collect())
            }
            HirKind::Class(Class::Bytes(_)) => Err("byte classes are not supported".into()),
            HirKind::Repetition(rep) => {
                let max = rep.max.unwrap_or(rep.min.max(self.cfg.max_run));
                let sub = self.expand(&rep.sub)?;
                let mut out = Vec::new();
                let mut layer = vec![Frag::default()];
                for k in 0..=max {
                    if k >= rep.min {
                        out.extend(layer.iter().cloned());
                        self.check(out.len())?;
                    }
                    if k < max {
                        layer = self.product(&layer, &sub)?;
                    }
                }
                Ok(out)
            }
            HirKind::Capture(cap) => {
                let sub = self.expand(&cap.sub)?;
                Ok(sub
                    .into_iter()
                    .map(|mut f| {
                        f.groups.push((cap.index, f.text.clone()));
                        f
                    })
                    .collect())
            }
            HirKind::Concat(parts) => {
                let mut acc = vec![Frag::default()];
                for p in parts {
                    let sub = self.expand(p)?;
                    acc = self.product(&acc, &sub)?;
                }
                Ok(acc)
            }
            HirKind::Alternation(alts) => {
                let mut out = Vec::new();
                for a in alts {
                    out.extend(self.expand(a)?);
                    self.check(out.len())?;
                }
                Ok(out)
            }
        }
    }
}

/// Trims the unchanged prefix and suffix of a (source, produced) instance.
/// Neither side is left empty: one character of context is re-attached,
/// suffix first, so insertions and deletions stay anchored.
fn changed_core(source: &str, produced: &str) -> Option<(String, String)> {
    if source == produced {
        return None;
    }
    let s: Vec<char> = source.chars().collect();
    let p: Vec<char> = produced.chars().collect();
    let cp = s.iter().zip(&p).take_while(|(a, b)| a == b).count();
    let room = s.len().min(p.len()) - cp;
    let cs = s
        .iter()
        .rev()
        .zip(p.iter().rev())
        .take(room)
        .take_while(|(a, b)| a == b)
        .count();
    let (mut lo, mut s_hi, mut p_hi) = (cp, s.len() - cs, p.len() - cs);
    if p_hi == lo || s_hi == lo {
        if cs > 0 {
            s_hi += 1;
            p_hi += 1;
        } else if cp > 0 {
            lo -= 1;
        } else if p_hi == lo {
            return Some((String::new(), source.to_string()));
        }
    }
    Some((p[lo..p_hi].iter().collect(), s[lo..s_hi].iter().collect()))
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
struct RawEntry {
    rule: usize,
    produced: String,
    source: String,
    /// Earlier rules already substituted into `source`.
    composed: BTreeSet<usize>,
}

const MAX_COMPOSITION_PASSES: usize = 4;

/// Every way `early.produced` and `late.source` can share at least one
/// character of intermediate text, as (final text, original text).
fn overlaps(early: &RawEntry, late: &RawEntry) -> Vec<(String, String)> {
    let p1: Vec<char> = early.produced.chars().collect();
    let s2: Vec<char> = late.source.chars().collect();
    let mut out = Vec::new();
    if p1.is_empty() || s2.is_empty() {
        return out;
    }
    // `p1` starts at offset `o` relative to the start of `s2`.
    for o in -(p1.len() as isize - 1)..s2.len() as isize {
        let lo = o.max(0);
        let hi = (o + p1.len() as isize).min(s2.len() as isize);
        if (lo..hi).any(|i| s2[i as usize] != p1[(i - o) as usize]) {
            continue;
        }
        let start = o.min(0);
        let end = (o + p1.len() as isize).max(s2.len() as isize);
        let at = |i: isize| -> char {
            if (0..s2.len() as isize).contains(&i) {
                s2[i as usize]
            } else {
                p1[(i - o) as usize]
            }
        };
        let span = |a: isize, b: isize| -> String { (a..b).map(at).collect() };
        let produced = span(start, 0) + &late.produced + &span(s2.len() as isize, end);
        let source = span(start, o) + &early.source + &span(o + p1.len() as isize, end);
        out.push((produced, source));
    }
    out
}

/// Inverts a rule set into a substitution table (see module docs).
pub fn invert_ruleset(
    rules: &RewriteRuleSet,
    cfg: &InversionConfig,
) -> Result<InverseTable, InversionError> {
    let expander = Expander { cfg };
    let mut entries: BTreeSet<RawEntry> = BTreeSet::new();
    for (index, rule) in rules.rules().iter().enumerate() {
        let fail = |reason: String| InversionError::NonInvertible {
            index,
            pattern: rule.pattern.clone(),
            reason,
        };
        let hir = regex_syntax::parse(&rule.pattern).map_err(|e| fail(e.to_string()))?;
        let frags = expander.expand(&hir).map_err(fail)?;
        for frag in frags {
            let produced = rule.render(&frag.text, |g| frag.group(g));
            if let Some((p, s)) = changed_core(&frag.text, &produced) {
                if p.is_empty() {
                    return Err(fail(format!(
                        "`{}` is deleted with no surrounding context",
                        frag.text
                    )));
                }
                entries.insert(RawEntry {
                    rule: index,
                    produced: p,
                    source: s,
                    composed: BTreeSet::new(),
                });
            }
        }
    }

    // Compose: where a later entry's input overlaps an earlier rule's
    // output, the pair is one joint rewrite of the original text.
    for _ in 0..MAX_COMPOSITION_PASSES {
        let snapshot: Vec<RawEntry> = entries.iter().cloned().collect();
        let mut added = false;
        for late in &snapshot {
            for early in &snapshot {
                if early.rule >= late.rule || late.composed.contains(&early.rule) {
                    continue;
                }
                for (produced, source) in overlaps(early, late) {
                    // Normalized text never holds two spaces in a row.
                    if source.contains("  ") || produced == source {
                        continue;
                    }
                    let mut composed = late.composed.clone();
                    composed.insert(early.rule);
                    added |= entries.insert(RawEntry {
                        rule: late.rule,
                        produced,
                        source,
                        composed,
                    });
                }
            }
        }
        if !added {
            break;
        }
    }

    let mut sets: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    for e in entries {
        sets.entry(e.produced).or_default().insert(e.source);
    }
    Ok(InverseTable::weighted(sets, cfg.identity_prob))
}

#[derive(Debug, Clone, PartialEq)]
pub struct LatticeArc {
    /// Noisy characters consumed.
    pub span: usize,
    /// Text emitted on the corrected side.
    pub candidate: String,
    /// Channel log-probability.
    pub logp: f64,
    pub identity: bool,
}

/// Per-position arcs over a noisy sentence. Position `i` holds the arcs that
/// start at character `i`.
#[derive(Debug, Clone)]
pub struct CandidateLattice {
    chars: Vec<char>,
    arcs: Vec<Vec<LatticeArc>>,
}

impl CandidateLattice {
    /// Number of characters in the noisy sentence.
    pub fn len(&self) -> usize {
        self.chars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chars.is_empty()
    }

    pub fn noisy(&self) -> String {
        self.chars.iter().collect()
    }

    pub fn arcs_at(&self, pos: usize) -> &[LatticeArc] {
        &self.arcs[pos]
    }

    pub fn arc_count(&self) -> usize {
        self.arcs.iter().map(Vec::len).sum()
    }

    /// Number of complete paths, saturating.
    pub fn path_count(&self) -> u128 {
        let n = self.chars.len();
        let mut ways = vec![0u128; n + 1];
        ways[n] = 1;
        for pos in (0..n).rev() {
            ways[pos] = self.arcs[pos]
                .iter()
                .map(|a| ways[pos + a.span])
                .fold(0u128, u128::saturating_add);
        }
        ways[0]
    }

    /// Whether some path emits exactly `target`.
    pub fn contains(&self, target: &str) -> bool {
        let n = self.chars.len();
        // reach[pos] holds the byte offsets into `target` reachable at `pos`.
        let mut reach: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n + 1];
        reach[0].insert(0);
        for pos in 0..n {
            let here = std::mem::take(&mut reach[pos]);
            for &off in &here {
                for arc in &self.arcs[pos] {
                    if target[off..].starts_with(arc.candidate.as_str()) {
                        reach[pos + arc.span].insert(off + arc.candidate.len());
                    }
                }
            }
            reach[pos] = here;
        }
        reach[n].contains(&target.len())
    }

    /// Every complete path as (emitted text, channel log-probability), in
    /// depth-first order. Returns `None` when there are more than `limit`.
    pub fn paths(&self, limit: usize) -> Option<Vec<(String, f64)>> {
        if self.path_count() > limit as u128 {
            return None;
        }
        let mut out = Vec::new();
        let mut stack: Vec<(usize, String, f64)> = vec![(0, String::new(), 0.0)];
        while let Some((pos, text, w)) = stack.pop() {
            if pos == self.chars.len() {
                out.push((text, w));
                continue;
            }
            for arc in self.arcs[pos].iter().rev() {
                let mut t = text.clone();
                t.push_str(&arc.candidate);
                stack.push((pos + arc.span, t, w + arc.logp));
            }
        }
        Some(out)
    }
}

/// Lays every matching table entry over the noisy sentence, plus a
/// one-character identity arc at each position.
pub fn build_lattice(noisy: &Sentence, inverse: &InverseTable) -> CandidateLattice {
    let chars: Vec<char> = noisy.text.chars().collect();
    let n = chars.len();
    let mut arcs = Vec::with_capacity(n);
    let mut key = String::new();
    for pos in 0..n {
        let mut here = vec![LatticeArc {
            span: 1,
            candidate: chars[pos].to_string(),
            logp: inverse.identity_logp(),
            identity: true,
        }];
        let mut seen: HashMap<(usize, String), usize> = HashMap::new();
        seen.insert((1, here[0].candidate.clone()), 0);
        let longest = inverse.max_key_chars().min(n - pos);
        for len in 1..=longest {
            key.clear();
            key.extend(&chars[pos..pos + len]);
            let Some(cands) = inverse.get(&key) else {
                continue;
            };
            for c in cands {
                let id = (len, c.source.clone());
                if let Some(&i) = seen.get(&id) {
                    if c.logp > here[i].logp {
                        here[i].logp = c.logp;
                    }
                    continue;
                }
                seen.insert(id, here.len());
                here.push(LatticeArc {
                    span: len,
                    candidate: c.source.clone(),
                    logp: c.logp,
                    identity: c.source == key,
                });
            }
        }
        arcs.push(here);
    }
    CandidateLattice { chars, arcs }
}
