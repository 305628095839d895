//! Sentence accuracy, character error rate and result tables.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{normalize_text, Sentence};

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("alignment error: {predictions} predictions for {references} references")]
    Alignment { predictions: usize, references: usize },
    #[error("metric is undefined on an empty evaluation set")]
    Empty,
    #[error("character error rate is undefined: references are empty but predictions are not")]
    NoReferenceChars,
    #[error("a report needs at least one row")]
    EmptyReport,
    #[error("unknown report format {0:?} (expected json or table)")]
    UnknownFormat(String),
    #[error("malformed report: {0}")]
    Parse(String),
}

fn check(predictions: &[Sentence], references: &[Sentence]) -> Result<(), EvalError> {
    if predictions.len() != references.len() {
        return Err(EvalError::Alignment {
            predictions: predictions.len(),
            references: references.len(),
        });
    }
    if predictions.is_empty() {
        return Err(EvalError::Empty);
    }
    Ok(())
}

fn same(a: &Sentence, b: &Sentence) -> bool {
    normalize_text(a.as_str()).text == normalize_text(b.as_str()).text
}

/// Percentage of exact matches after normalization.
pub fn sentence_accuracy(predictions: &[Sentence], references: &[Sentence]) -> Result<f64, EvalError> {
    check(predictions, references)?;
    let hits = predictions.iter().zip(references).filter(|(p, r)| same(p, r)).count();
    Ok(100.0 * hits as f64 / predictions.len() as f64)
}

/// Per-pair outcome.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairScore {
    pub exact: bool,
    pub distance: usize,
    pub reference_chars: usize,
}

pub fn score_pairs(predictions: &[Sentence], references: &[Sentence]) -> Result<Vec<PairScore>, EvalError> {
    check(predictions, references)?;
    Ok(predictions
        .iter()
        .zip(references)
        .map(|(p, r)| {
            let p = normalize_text(p.as_str());
            let r = normalize_text(r.as_str());
            PairScore {
                exact: p.text == r.text,
                distance: strsim::levenshtein(&p.text, &r.text),
                reference_chars: r.text.chars().count(),
            }
        })
        .collect())
}

/// Total character edit distance over total reference characters. Pairs
/// whose prediction and reference are both empty are left out.
pub fn char_error_rate(predictions: &[Sentence], references: &[Sentence]) -> Result<f64, EvalError> {
    let pairs = score_pairs(predictions, references)?;
    let (dist, chars) = pairs
        .iter()
        .filter(|p| !(p.reference_chars == 0 && p.distance == 0))
        .fold((0usize, 0usize), |acc, p| (acc.0 + p.distance, acc.1 + p.reference_chars));
    match (dist, chars) {
        (0, _) => Ok(0.0),
        (_, 0) => Err(EvalError::NoReferenceChars),
        (d, c) => Ok(d as f64 / c as f64),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Table,
}

impl FromStr for ReportFormat {
    type Err = EvalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "json" => Ok(ReportFormat::Json),
            "table" | "text" => Ok(ReportFormat::Table),
            other => Err(EvalError::UnknownFormat(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub model: String,
    pub scheme: String,
    pub accuracy: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cer: Option<f64>,
}

impl ReportRow {
    pub fn new(model: &str, scheme: &str, accuracy: f64) -> Self {
        ReportRow {
            model: model.to_string(),
            scheme: scheme.to_string(),
            accuracy,
            cer: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct EvalReport {
    pub rows: Vec<ReportRow>,
    #[serde(default)]
    pub metadata: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sentences: Vec<PairScore>,
}

impl EvalReport {
    pub fn new(rows: Vec<ReportRow>) -> Self {
        EvalReport {
            rows,
            ..Self::default()
        }
    }

    pub fn render(&self, format: ReportFormat) -> Result<String, EvalError> {
        if self.rows.is_empty() {
            return Err(EvalError::EmptyReport);
        }
        Ok(match format {
            ReportFormat::Json => {
                let mut s = serde_json::to_string_pretty(self).expect("report serializes");
                s.push('\n');
                s
            }
            ReportFormat::Table => render_table(&self.rows),
        })
    }

    pub fn from_json(text: &str) -> Result<Self, EvalError> {
        serde_json::from_str(text).map_err(|e| EvalError::Parse(e.to_string()))
    }
}

pub fn render_report(rows: &[ReportRow], format: ReportFormat) -> Result<String, EvalError> {
    EvalReport::new(rows.to_vec()).render(format)
}

/// Model groups in first-appearance order, one line per scheme.
fn render_table(rows: &[ReportRow]) -> String {
    let mut groups: Vec<(&str, Vec<&ReportRow>)> = Vec::new();
    for r in rows {
        match groups.iter_mut().find(|(m, _)| *m == r.model) {
            Some((_, g)) => g.push(r),
            None => groups.push((&r.model, vec![r])),
        }
    }
    let acc = |r: &ReportRow| format!("{:05.2}", r.accuracy);
    let w_model = rows.iter().map(|r| r.model.chars().count()).chain([5]).max().unwrap_or(5);
    let w_scheme = rows.iter().map(|r| r.scheme.chars().count()).chain([10]).max().unwrap_or(10);
    let w_acc = rows.iter().map(|r| acc(r).len()).chain([8]).max().unwrap_or(8);
    let rule = format!("+-{}-+-{}-+-{}-+\n", "-".repeat(w_model), "-".repeat(w_scheme), "-".repeat(w_acc));

    let mut out = rule.clone();
    let _ = writeln!(out, "| {:<w_model$} | {:<w_scheme$} | {:>w_acc$} |", "Model", "Subwording", "Accuracy");
    out.push_str(&rule.replace('-', "="));
    for (model, group) in groups {
        for (i, r) in group.iter().enumerate() {
            let name = if i == 0 { model } else { "" };
            let _ = writeln!(out, "| {:<w_model$} | {:<w_scheme$} | {:>w_acc$} |", name, r.scheme, acc(r));
        }
        out.push_str(&rule);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(xs: &[&str]) -> Vec<Sentence> {
        xs.iter().enumerate().map(|(i, s)| Sentence::new(i, s)).collect()
    }

    #[test]
    fn accuracy_basics() {
        assert_eq!(sentence_accuracy(&v(&["a", "b"]), &v(&["a", "c"])), Ok(50.0));
        assert_eq!(sentence_accuracy(&v(&["a  b"]), &v(&[" a b"])), Ok(100.0));
        assert_eq!(
            sentence_accuracy(&v(&["a"]), &v(&["a", "b"])),
            Err(EvalError::Alignment { predictions: 1, references: 2 })
        );
        assert_eq!(sentence_accuracy(&[], &[]), Err(EvalError::Empty));
    }

    #[test]
    fn cer_by_hand() {
        // órób -> orob: two substitutions over four characters.
        assert_eq!(char_error_rate(&v(&["orob"]), &v(&["órób"])), Ok(0.5));
        assert_eq!(char_error_rate(&v(&["x", ""]), &v(&["x", ""])), Ok(0.0));
        assert_eq!(char_error_rate(&v(&["ab", ""]), &v(&["ab", ""])), Ok(0.0));
        assert_eq!(char_error_rate(&v(&["ab"]), &v(&[""])), Err(EvalError::NoReferenceChars));
        // Empty/empty pair contributes nothing to either total.
        assert_eq!(char_error_rate(&v(&["", "abcd"]), &v(&["", "abcx"])), Ok(0.25));
    }

    #[test]
    fn table_groups_models() {
        let rows = vec![
            ReportRow::new("LSTM", "No Subword", 50.09),
            ReportRow::new("LSTM", "SentencePiece", 69.14),
            ReportRow::new("LSTM", "Character-level", 77.67),
            ReportRow::new("Transformer", "No Subword", 9.46),
            ReportRow::new("Transformer", "SentencePiece", 6.99),
            ReportRow::new("Transformer", "Character-level", 81.00),
        ];
        let t = render_report(&rows, ReportFormat::Table).unwrap();
        let lines: Vec<&str> = t.lines().collect();
        assert_eq!(lines.len(), 3 + 3 + 1 + 3 + 1);
        assert!(lines[3].starts_with("| LSTM ") && lines[3].ends_with("50.09 |"));
        assert!(lines[4].starts_with("|      ") && lines[4].contains("SentencePiece"));
        assert!(lines[7].contains("Transformer") && lines[7].ends_with("09.46 |"));
        assert!(lines[9].ends_with("81.00 |"));
        assert!(lines.iter().all(|l| l.chars().count() == lines[0].chars().count()));
    }

    #[test]
    fn single_row_and_empty() {
        let t = render_report(&[ReportRow::new("noisy-channel", "character", 100.0)], ReportFormat::Table).unwrap();
        assert_eq!(t.lines().filter(|l| l.starts_with("| ")).count(), 2);
        assert!(t.contains("100.00"));
        assert_eq!(render_report(&[], ReportFormat::Json), Err(EvalError::EmptyReport));
    }

    #[test]
    fn json_round_trip() {
        let mut rows = vec![ReportRow::new("m", "word", 100.0 / 3.0)];
        rows[0].cer = Some(0.1 + 0.2);
        let json = render_report(&rows, ReportFormat::Json).unwrap();
        assert_eq!(EvalReport::from_json(&json).unwrap().rows, rows);
    }
}
