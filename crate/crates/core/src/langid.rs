//! Language identification with one character n-gram model per label.
//!
//! All label models share one alphabet (the union over the training data) so
//! their scores are comparable. A sentence goes to the label with the highest
//! per-symbol log-likelihood; ties go to the smallest label.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Sentence;
use crate::lm::{train_lm_with_alphabet, LmError, ModelFile, NGramLanguageModel};

pub const DEFAULT_ORDER: usize = 3;
pub const DEFAULT_SMOOTHING: f64 = 0.5;

const FORMAT: &str = "wolofspell-langid";
const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum LangIdError {
    #[error("language identification needs at least two labels, found {0}")]
    Degenerate(usize),
    #[error(transparent)]
    Lm(#[from] LmError),
    #[error("unsupported langid model file: {0}")]
    Format(String),
    #[error("{path}: {err}")]
    Io {
        path: PathBuf,
        #[source]
        err: io::Error,
    },
}

#[derive(Debug, Clone)]
pub struct LangIdModel {
    labels: Vec<String>,
    models: Vec<NGramLanguageModel>,
    order: usize,
    smoothing: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Classification {
    pub label: String,
    /// Per-symbol log-likelihood under each label.
    pub scores: BTreeMap<String, f64>,
}

pub fn train_langid(
    labeled: &[(Sentence, String)],
    order: usize,
    smoothing: f64,
) -> Result<LangIdModel, LangIdError> {
    let mut by_label: BTreeMap<&str, Vec<Sentence>> = BTreeMap::new();
    for (s, l) in labeled {
        by_label.entry(l.as_str()).or_default().push(s.clone());
    }
    if by_label.len() < 2 {
        return Err(LangIdError::Degenerate(by_label.len()));
    }
    let alphabet: BTreeSet<char> = labeled.iter().flat_map(|(s, _)| s.as_str().chars()).collect();
    let mut labels = Vec::new();
    let mut models = Vec::new();
    for (label, sents) in by_label {
        models.push(train_lm_with_alphabet(&sents, order, smoothing, alphabet.iter().copied())?);
        labels.push(label.to_string());
    }
    Ok(LangIdModel {
        labels,
        models,
        order,
        smoothing,
    })
}

impl LangIdModel {
    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn smoothing(&self) -> f64 {
        self.smoothing
    }

    pub fn model(&self, label: &str) -> Option<&NGramLanguageModel> {
        self.labels.iter().position(|l| l == label).map(|i| &self.models[i])
    }

    /// `None` for an empty sentence.
    pub fn classify(&self, s: &Sentence) -> Option<Classification> {
        if s.is_empty() {
            return None;
        }
        let n = (s.as_str().chars().count() + 1) as f64;
        let scores: BTreeMap<String, f64> = self
            .labels
            .iter()
            .zip(&self.models)
            .map(|(l, m)| (l.clone(), m.score(s.as_str()) / n))
            .collect();
        // Labels are sorted, so keeping the first maximum breaks ties.
        let mut best: Option<(&String, f64)> = None;
        for (l, &v) in &scores {
            if best.is_none_or(|(_, b)| v > b) {
                best = Some((l, v));
            }
        }
        let label = best.map(|(l, _)| l.clone())?;
        Some(Classification { label, scores })
    }

    pub fn classify_all(&self, sentences: &[Sentence]) -> Vec<Option<Classification>> {
        sentences.par_iter().map(|s| self.classify(s)).collect()
    }

    pub fn to_json(&self) -> String {
        let file = LangIdFile {
            format: FORMAT.into(),
            version: FORMAT_VERSION,
            order: self.order,
            smoothing: self.smoothing,
            labels: self
                .labels
                .iter()
                .cloned()
                .zip(self.models.iter().map(NGramLanguageModel::to_file))
                .collect(),
        };
        serde_json::to_string(&file).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, LangIdError> {
        let file: LangIdFile =
            serde_json::from_str(text).map_err(|e| LangIdError::Format(e.to_string()))?;
        if file.format != FORMAT || file.version != FORMAT_VERSION {
            return Err(LangIdError::Format(format!(
                "expected {FORMAT} version {FORMAT_VERSION}, found {} version {}",
                file.format, file.version
            )));
        }
        if file.labels.len() < 2 {
            return Err(LangIdError::Degenerate(file.labels.len()));
        }
        let mut labels = Vec::new();
        let mut models = Vec::new();
        for (l, m) in file.labels {
            labels.push(l);
            models.push(NGramLanguageModel::from_file(m)?);
        }
        if labels.windows(2).any(|w| w[0] >= w[1]) {
            return Err(LangIdError::Format("labels must be sorted and distinct".into()));
        }
        Ok(LangIdModel {
            labels,
            models,
            order: file.order,
            smoothing: file.smoothing,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), LangIdError> {
        let path = path.as_ref();
        fs::write(path, self.to_json() + "\n").map_err(|err| LangIdError::Io {
            path: path.to_path_buf(),
            err,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, LangIdError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|err| LangIdError::Io {
            path: path.to_path_buf(),
            err,
        })?;
        Self::from_json(&text)
    }
}

/// Keeps the sentences classified as `keep`, in order.
pub fn filter_corpus(model: &LangIdModel, sentences: &[Sentence], keep: &str) -> Vec<Sentence> {
    let verdicts = model.classify_all(sentences);
    sentences
        .iter()
        .zip(verdicts)
        .filter(|(_, c)| c.as_ref().is_some_and(|c| c.label == keep))
        .map(|(s, _)| s.clone())
        .collect()
}

#[derive(Serialize, Deserialize)]
struct LangIdFile {
    format: String,
    version: u32,
    order: usize,
    smoothing: f64,
    labels: Vec<(String, ModelFile)>,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn data() -> Vec<(Sentence, String)> {
        let wo = ["xam naa ko", "ñaari xar yi", "dafa neex", "bañ naa ko", "dëkk bi"];
        let fr = ["je ne sais pas", "les deux moutons", "il fait beau", "la maison est belle", "le village"];
        wo.iter()
            .map(|s| (Sentence::new(0, s), "wo".to_string()))
            .chain(fr.iter().map(|s| (Sentence::new(0, s), "fr".to_string())))
            .collect()
    }

    #[test]
    fn resubstitution() {
        let m = train_langid(&data(), 3, 0.5).unwrap();
        assert_eq!(m.labels(), ["fr", "wo"]);
        for (s, l) in data() {
            assert_eq!(&m.classify(&s).unwrap().label, &l, "{s}");
        }
    }

    #[test]
    fn empty_sentence_abstains() {
        let m = train_langid(&data(), 3, 0.5).unwrap();
        assert!(m.classify(&Sentence::new(0, "")).is_none());
    }

    #[test]
    fn degenerate_inputs() {
        assert!(matches!(train_langid(&[], 3, 0.5), Err(LangIdError::Degenerate(0))));
        let one = vec![(Sentence::new(0, "xam"), "wo".to_string())];
        assert!(matches!(train_langid(&one, 3, 0.5), Err(LangIdError::Degenerate(1))));
    }

    #[test]
    fn identical_text_ties_to_smallest_label() {
        let d = vec![
            (Sentence::new(0, "bal bi"), "wo".to_string()),
            (Sentence::new(0, "bal bi"), "fr".to_string()),
        ];
        let m = train_langid(&d, 3, 0.5).unwrap();
        let c = m.classify(&Sentence::new(0, "bi bal")).unwrap();
        assert_eq!(c.label, "fr");
        assert_eq!(c.scores["fr"], c.scores["wo"]);
    }

    #[test]
    fn filter_keeps_order() {
        let m = train_langid(&data(), 3, 0.5).unwrap();
        let mixed: Vec<Sentence> = ["dëkk bi neex", "il fait beau", "ñaari xar", "", "le village"]
            .iter()
            .map(|s| Sentence::new(0, s))
            .collect();
        let kept = filter_corpus(&m, &mixed, "wo");
        let texts: Vec<&str> = kept.iter().map(Sentence::as_str).collect();
        assert_eq!(texts, ["dëkk bi neex", "ñaari xar"]);
        assert!(filter_corpus(&m, &[], "wo").is_empty());
    }

    #[test]
    fn json_round_trip() {
        let m = train_langid(&data(), 3, 0.5).unwrap();
        let back = LangIdModel::from_json(&m.to_json()).unwrap();
        assert_eq!(back.to_json(), m.to_json());
    }
}
