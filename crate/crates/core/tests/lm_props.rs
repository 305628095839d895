use std::collections::{BTreeSet, HashMap};

use proptest::prelude::*;
use wolofspell::corpus::Sentence;
use wolofspell::lm::{train_lm, LmState, NGramLanguageModel, Symbol};

/// Straight-from-the-definition add-k model over string symbols.
struct Naive {
    order: usize,
    k: f64,
    vocab: usize,
    ngrams: HashMap<Vec<String>, f64>,
    ctx: HashMap<Vec<String>, f64>,
}

fn padded(s: &str, order: usize) -> Vec<String> {
    let mut v = vec!["<s>".to_string(); order - 1];
    v.extend(s.chars().map(|c| c.to_string()));
    v.push("</s>".into());
    v
}

impl Naive {
    fn train(corpus: &[&str], order: usize, k: f64) -> Self {
        let chars: BTreeSet<char> = corpus.iter().flat_map(|s| s.chars()).collect();
        let mut ngrams = HashMap::new();
        let mut ctx = HashMap::new();
        for s in corpus {
            let p = padded(s, order);
            for w in p.windows(order) {
                *ngrams.entry(w.to_vec()).or_insert(0.0) += 1.0;
                *ctx.entry(w[..order - 1].to_vec()).or_insert(0.0) += 1.0;
            }
        }
        Naive {
            order,
            k,
            vocab: chars.len() + 2,
            ngrams,
            ctx,
        }
    }

    fn prob(&self, history: &[String], next: &str) -> f64 {
        let mut key = history.to_vec();
        key.push(next.to_string());
        let c = self.ngrams.get(&key).copied().unwrap_or(0.0);
        let t = self.ctx.get(history).copied().unwrap_or(0.0);
        (c + self.k) / (t + self.k * self.vocab as f64)
    }

    fn score(&self, s: &str) -> f64 {
        padded(s, self.order)
            .windows(self.order)
            .map(|w| self.prob(&w[..self.order - 1], &w[self.order - 1]).ln())
            .sum()
    }
}

fn sents(xs: &[&str]) -> Vec<Sentence> {
    xs.iter().enumerate().map(|(i, s)| Sentence::new(i, s)).collect()
}

#[test]
fn hand_computed_sentence_score() {
    let m = train_lm(&sents(&["ab"]), 2, 1.0).unwrap();
    // P(a|<s>) = 2/5, P(b|a) = 2/5, P(</s>|b) = 2/5.
    let want = 3.0 * (2.0f64 / 5.0).ln();
    assert!((m.score("ab") - want).abs() < 1e-12);
}

#[test]
fn appending_lowers_prefix_score_but_not_always_full_score() {
    let corpus: Vec<&str> = vec!["ab"; 10];
    let m = train_lm(&sents(&corpus), 2, 1.0).unwrap();
    assert!(m.score_prefix("ab") < m.score_prefix("a"));
    // "a" almost never ends a sentence, "ab" almost always does.
    assert!(m.score("ab") > m.score("a"));
}

#[test]
fn uniform_model_perplexity_is_vocab_size() {
    // Smoothing swamps the counts as k grows.
    let m = train_lm(&sents(&["xyz"]), 3, 1e12).unwrap();
    let text = sents(&["qqqq xx", "y"]);
    let ppl = m.perplexity(&text).unwrap();
    assert!((ppl - m.vocab_size() as f64).abs() < 1e-6, "{ppl}");
}

#[test]
fn repeated_char_k0_perplexity_near_one() {
    let long = "a".repeat(5000);
    let m = train_lm(&sents(&[&long]), 2, 0.0).unwrap();
    let ppl = m.perplexity(&sents(&[&long])).unwrap();
    assert!(ppl < 1.01, "{ppl}");
}

fn corpus_strategy() -> impl Strategy<Value = Vec<String>> {
    prop::collection::vec("[abñë ]{0,12}", 1..8)
}

proptest! {
    #[test]
    fn conditionals_match_naive_oracle(corpus in corpus_strategy(), order in 1usize..5, k in 0.01f64..3.0, probe in "[abñëz ]{0,10}") {
        let refs: Vec<&str> = corpus.iter().map(String::as_str).collect();
        let corpus = sents(&refs);
        let m = train_lm(&corpus, order, k).unwrap();
        let normalized: Vec<&str> = corpus.iter().map(Sentence::as_str).collect();
        let naive = Naive::train(&normalized, order, k);
        let want = naive.score(&probe);
        let got = m.score(&probe);
        prop_assert!((want - got).abs() < 1e-9 * want.abs().max(1.0), "{want} vs {got}");
    }

    #[test]
    fn every_context_normalizes(corpus in corpus_strategy(), order in 1usize..6, k in 0.0f64..2.0) {
        let refs: Vec<&str> = corpus.iter().map(String::as_str).collect();
        let m = train_lm(&sents(&refs), order, k).unwrap();
        let mut states: Vec<LmState> = m.contexts();
        states.push(m.state_after("zz"));
        for st in states {
            let total: f64 = m.symbols().map(|s| m.prob(st, s)).sum();
            prop_assert!((total - 1.0).abs() < 1e-9);
            for s in m.symbols() {
                let lp = m.logprob(st, s);
                prop_assert!(lp <= 0.0);
                if k > 0.0 { prop_assert!(lp.is_finite()); }
            }
        }
    }

    #[test]
    fn counts_are_order_independent(mut corpus in corpus_strategy()) {
        let a = train_lm(&sents(&corpus.iter().map(String::as_str).collect::<Vec<_>>()), 3, 0.5).unwrap();
        corpus.reverse();
        let b = train_lm(&sents(&corpus.iter().map(String::as_str).collect::<Vec<_>>()), 3, 0.5).unwrap();
        prop_assert_eq!(a.to_json(), b.to_json());
    }

    #[test]
    fn prefix_score_strictly_decreases(corpus in corpus_strategy(), s in "[abñ]{0,8}", c in "[abñz]") {
        let refs: Vec<&str> = corpus.iter().map(String::as_str).collect();
        let m = train_lm(&sents(&refs), 3, 0.1).unwrap();
        let longer = format!("{s}{c}");
        prop_assert!(m.score_prefix(&longer) < m.score_prefix(&s));
    }

    #[test]
    fn score_splits_at_boundaries(corpus in corpus_strategy(), a in "[abñ ]{0,6}", b in "[abñ ]{0,6}") {
        let refs: Vec<&str> = corpus.iter().map(String::as_str).collect();
        let m = train_lm(&sents(&refs), 3, 0.2).unwrap();
        let joined = format!("{a}{b}");
        let mut st = m.state_after(&a);
        let mut tail = 0.0;
        for ch in b.chars() {
            let (next, lp) = m.step(st, ch);
            tail += lp;
            st = next;
        }
        let sum = m.score_prefix(&a) + tail + m.end(st);
        prop_assert!((sum - m.score(&joined)).abs() < 1e-9);
    }
}

#[test]
fn file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("lm.json");
    let m = train_lm(&sents(&["dégg", "xam xam"]), 5, 0.1).unwrap();
    m.save(&path).unwrap();
    let back = NGramLanguageModel::load(&path).unwrap();
    assert_eq!(back.score("xam"), m.score("xam"));
    assert_eq!(back.prob(back.start(), Symbol::End), m.prob(m.start(), Symbol::End));
}
