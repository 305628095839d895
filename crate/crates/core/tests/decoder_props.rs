use std::cmp::Ordering;
use std::sync::OnceLock;

use proptest::prelude::*;
use wolofspell::corpus::Sentence;
use wolofspell::corrector::{decode, decode_nbest, DecoderConfig};
use wolofspell::inverse::{build_lattice, invert_ruleset, InverseTable, InversionConfig};
use wolofspell::lm::{train_lm, NGramLanguageModel};
use wolofspell::rules::{apply_rules, builtin};
use wolofspell::synth::{wolof_lexicon, SentenceSampler};

fn table() -> &'static InverseTable {
    static T: OnceLock<InverseTable> = OnceLock::new();
    T.get_or_init(|| invert_ruleset(builtin(), &InversionConfig::default()).unwrap())
}

fn lm() -> &'static NGramLanguageModel {
    static M: OnceLock<NGramLanguageModel> = OnceLock::new();
    M.get_or_init(|| train_lm(&SentenceSampler::wolof().distinct(2_000, 3), 4, 0.1).unwrap())
}

/// Scores every path from scratch and returns the winner under
/// (score desc, channel desc, text asc).
fn oracle(paths: &[(String, f64)], lm: &NGramLanguageModel, weight: f64) -> (String, f64) {
    let mut best: Option<(String, f64, f64)> = None;
    for (text, ch) in paths {
        let score = weight * lm.score(text) + ch;
        let better = match &best {
            None => true,
            Some((bt, bs, bc)) => match score.total_cmp(bs) {
                Ordering::Greater => true,
                Ordering::Less => false,
                Ordering::Equal => match ch.total_cmp(bc) {
                    Ordering::Greater => true,
                    Ordering::Less => false,
                    Ordering::Equal => text < bt,
                },
            },
        };
        if better {
            best = Some((text.clone(), score, *ch));
        }
    }
    let (t, s, _) = best.expect("at least one path");
    (t, s)
}

fn sentence() -> impl Strategy<Value = String> {
    prop::collection::vec(prop::sample::select(wolof_lexicon()), 1..5).prop_map(|ws| ws.join(" "))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn exhaustive_beam_is_the_argmax(official in sentence(), weight in prop::sample::select(vec![0.5, 1.0, 2.0])) {
        let noisy = apply_rules(&Sentence::new(0, &official), builtin());
        let lattice = build_lattice(&noisy, table());
        let paths = lattice.paths(10_000);
        prop_assume!(paths.is_some());
        let paths = paths.unwrap();
        let cfg = DecoderConfig { lm_weight: weight, ..DecoderConfig::exhaustive() };
        let got = decode(&noisy, &lattice, lm(), &cfg);
        let (want, want_score) = oracle(&paths, lm(), weight);
        if got.as_str() != want {
            // Only a floating-point tie may separate the two.
            let got_score = paths
                .iter()
                .filter(|(t, _)| t == got.as_str())
                .map(|(t, ch)| weight * lm().score(t) + ch)
                .fold(f64::NEG_INFINITY, f64::max);
            prop_assert!((got_score - want_score).abs() < 1e-9, "{got} vs {want}");
        }
    }

    #[test]
    fn wider_beams_never_score_lower(official in sentence()) {
        let noisy = apply_rules(&Sentence::new(0, &official), builtin());
        let lattice = build_lattice(&noisy, table());
        let mut last = f64::NEG_INFINITY;
        for beam in [1, 2, 4, 8, 32, 128] {
            let cfg = DecoderConfig { beam_width: beam, ..DecoderConfig::default() };
            let top = decode_nbest(&lattice, lm(), &cfg)[0].score;
            prop_assert!(top >= last - 1e-9, "beam {beam}: {top} < {last}");
            last = top;
        }
    }

    #[test]
    fn nbest_is_sorted_and_distinct(official in sentence()) {
        let noisy = apply_rules(&Sentence::new(0, &official), builtin());
        let lattice = build_lattice(&noisy, table());
        let nb = decode_nbest(&lattice, lm(), &DecoderConfig::default());
        prop_assert!(!nb.is_empty());
        prop_assert!(nb.windows(2).all(|w| w[0].score >= w[1].score));
        let mut texts: Vec<&str> = nb.iter().map(|h| h.text.as_str()).collect();
        texts.sort();
        texts.dedup();
        prop_assert_eq!(texts.len(), nb.len());
        for h in &nb {
            prop_assert!(h.score.is_finite());
            prop_assert!((h.score - (h.lm_logp + h.channel_logp)).abs() < 1e-9);
        }
    }
}
