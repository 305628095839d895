//! Noisy-channel correction: beam search over the candidate lattice scored
//! by `lm_weight * lm_logp + channel_logp`.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::path::Path;

use rayon::prelude::*;
use thiserror::Error;

use crate::corpus::{load_sentences, write_sentences, CorpusError, Sentence};
use crate::inverse::{
    build_lattice, invert_ruleset, CandidateLattice, InverseTable, InversionConfig, InversionError,
    LatticeArc,
};
use crate::lm::{LmState, NGramLanguageModel};
use crate::rules::{apply_rules, RewriteRuleSet};

#[derive(Debug, Error)]
pub enum CorrectorError {
    #[error("invalid decoder configuration: {0}")]
    Config(String),
    #[error("alignment error: {predictions} predictions for {references} references")]
    Alignment { predictions: usize, references: usize },
    #[error(transparent)]
    Inversion(#[from] InversionError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecoderConfig {
    pub beam_width: usize,
    pub lm_weight: f64,
    /// Per (position, span), keep this many highest-weight candidates; 0
    /// keeps all. Identity arcs always survive.
    pub max_candidates_per_span: usize,
}

impl Default for DecoderConfig {
    fn default() -> Self {
        DecoderConfig {
            beam_width: 32,
            lm_weight: 1.0,
            max_candidates_per_span: 0,
        }
    }
}

impl DecoderConfig {
    /// A beam that never prunes.
    pub fn exhaustive() -> Self {
        DecoderConfig {
            beam_width: usize::MAX,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), CorrectorError> {
        if self.beam_width == 0 {
            return Err(CorrectorError::Config("beam_width must be at least 1".into()));
        }
        if !(self.lm_weight.is_finite() && self.lm_weight > 0.0) {
            return Err(CorrectorError::Config(format!(
                "lm_weight must be a positive number, got {}",
                self.lm_weight
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hypothesis {
    /// Noisy characters consumed.
    pub consumed: usize,
    pub text: String,
    pub channel_logp: f64,
    /// Includes the end symbol once the hypothesis is complete.
    pub lm_logp: f64,
    pub lm_state: LmState,
    pub score: f64,
}

/// Best first: higher score, then higher channel score, then smaller text.
pub fn rank(a: &Hypothesis, b: &Hypothesis) -> Ordering {
    b.score
        .total_cmp(&a.score)
        .then_with(|| b.channel_logp.total_cmp(&a.channel_logp))
        .then_with(|| a.text.cmp(&b.text))
}

fn pruned_arcs(arcs: &[LatticeArc], keep: usize) -> Vec<&LatticeArc> {
    if keep == 0 {
        return arcs.iter().collect();
    }
    let mut by_span: HashMap<usize, Vec<&LatticeArc>> = HashMap::new();
    for a in arcs {
        by_span.entry(a.span).or_default().push(a);
    }
    let mut out = Vec::new();
    for (_, mut group) in by_span {
        group.sort_by(|x, y| {
            y.identity
                .cmp(&x.identity)
                .then_with(|| y.logp.total_cmp(&x.logp))
                .then_with(|| x.candidate.cmp(&y.candidate))
        });
        out.extend(group.into_iter().take(keep.max(1)));
    }
    out
}

/// Complete hypotheses surviving the beam, best first.
pub fn decode_nbest(
    lattice: &CandidateLattice,
    lm: &NGramLanguageModel,
    cfg: &DecoderConfig,
) -> Vec<Hypothesis> {
    let n = lattice.len();
    let mut agenda: Vec<HashMap<String, Hypothesis>> = (0..=n).map(|_| HashMap::new()).collect();
    let start = Hypothesis {
        consumed: 0,
        text: String::new(),
        channel_logp: 0.0,
        lm_logp: 0.0,
        lm_state: lm.start(),
        score: 0.0,
    };
    agenda[0].insert(String::new(), start);

    for pos in 0..n {
        let mut beam: Vec<Hypothesis> = std::mem::take(&mut agenda[pos]).into_values().collect();
        beam.sort_by(rank);
        beam.truncate(cfg.beam_width);
        let arcs = pruned_arcs(lattice.arcs_at(pos), cfg.max_candidates_per_span);
        for h in &beam {
            for arc in &arcs {
                let mut state = h.lm_state;
                let mut lm_logp = h.lm_logp;
                for c in arc.candidate.chars() {
                    let (next, lp) = lm.step(state, c);
                    lm_logp += lp;
                    state = next;
                }
                let channel_logp = h.channel_logp + arc.logp;
                let mut text = h.text.clone();
                text.push_str(&arc.candidate);
                let next = Hypothesis {
                    consumed: pos + arc.span,
                    channel_logp,
                    lm_logp,
                    lm_state: state,
                    score: cfg.lm_weight * lm_logp + channel_logp,
                    text,
                };
                let slot = &mut agenda[next.consumed];
                match slot.get(&next.text) {
                    Some(old) if rank(old, &next) != Ordering::Greater => {}
                    _ => {
                        slot.insert(next.text.clone(), next);
                    }
                }
            }
        }
    }

    let mut done: Vec<Hypothesis> = std::mem::take(&mut agenda[n])
        .into_values()
        .map(|mut h| {
            h.lm_logp += lm.end(h.lm_state);
            h.score = cfg.lm_weight * h.lm_logp + h.channel_logp;
            h
        })
        .collect();
    done.sort_by(rank);
    done.truncate(cfg.beam_width);
    done
}

/// Highest-scoring complete path under the beam.
pub fn decode(
    noisy: &Sentence,
    lattice: &CandidateLattice,
    lm: &NGramLanguageModel,
    cfg: &DecoderConfig,
) -> Sentence {
    let best = decode_nbest(lattice, lm, cfg)
        .into_iter()
        .next()
        .expect("identity arcs give every lattice a complete path");
    Sentence::new(noisy.id, &best.text)
}

/// Rules, their inverse table and a language model, ready to correct text.
pub struct Corrector {
    rules: RewriteRuleSet,
    inverse: InverseTable,
    lm: NGramLanguageModel,
    cfg: DecoderConfig,
}

impl Corrector {
    pub fn new(
        rules: RewriteRuleSet,
        lm: NGramLanguageModel,
        cfg: DecoderConfig,
    ) -> Result<Self, CorrectorError> {
        Self::with_inversion(rules, lm, cfg, &InversionConfig::default())
    }

    pub fn with_inversion(
        rules: RewriteRuleSet,
        lm: NGramLanguageModel,
        cfg: DecoderConfig,
        inversion: &InversionConfig,
    ) -> Result<Self, CorrectorError> {
        cfg.validate()?;
        let inverse = invert_ruleset(&rules, inversion)?;
        Ok(Corrector {
            rules,
            inverse,
            lm,
            cfg,
        })
    }

    pub fn rules(&self) -> &RewriteRuleSet {
        &self.rules
    }

    pub fn inverse(&self) -> &InverseTable {
        &self.inverse
    }

    pub fn lm(&self) -> &NGramLanguageModel {
        &self.lm
    }

    pub fn config(&self) -> &DecoderConfig {
        &self.cfg
    }

    /// Decodes, then reranks the n-best list: hypotheses the rules map back
    /// onto the input come first, then those with fewer words the LM has
    /// never seen, then by score.
    pub fn correct(&self, noisy: &Sentence) -> Sentence {
        let lattice = build_lattice(noisy, &self.inverse);
        let nbest = decode_nbest(&lattice, &self.lm, &self.cfg);
        let pick = nbest
            .iter()
            .enumerate()
            .min_by_key(|(i, h)| {
                let consistent = self.rules.apply_str(&h.text) == noisy.as_str();
                let unsupported = h.text.split(' ').filter(|w| !self.lm.supports(w)).count();
                (!consistent, unsupported, *i)
            })
            .map(|(_, h)| h)
            .expect("identity arcs give every lattice a complete path");
        Sentence::new(noisy.id, &pick.text)
    }

    pub fn correct_all(&self, noisy: &[Sentence]) -> Vec<Sentence> {
        noisy.par_iter().map(|s| self.correct(s)).collect()
    }

    /// Corrects a file line by line into `output`; returns the line count.
    pub fn correct_corpus(
        &self,
        noisy_file: impl AsRef<Path>,
        output: impl AsRef<Path>,
    ) -> Result<usize, CorrectorError> {
        let input = load_sentences(noisy_file)?;
        let fixed = self.correct_all(&input);
        write_sentences(output, fixed.iter().map(Sentence::as_str))?;
        Ok(fixed.len())
    }
}

/// Fixed points of the rules need no correction.
pub fn is_fixed_point(s: &Sentence, rules: &RewriteRuleSet) -> bool {
    apply_rules(s, rules) == *s
}

/// Reads a predictions file produced elsewhere, one sentence per line.
pub fn load_external_predictions(
    path: impl AsRef<Path>,
    reference_count: usize,
) -> Result<Vec<Sentence>, CorrectorError> {
    let preds = load_sentences(path)?;
    if preds.len() != reference_count {
        return Err(CorrectorError::Alignment {
            predictions: preds.len(),
            references: reference_count,
        });
    }
    Ok(preds)
}
