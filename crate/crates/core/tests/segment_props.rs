use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;
use wolofspell::corpus::Sentence;
use wolofspell::inverse::OFFICIAL_LOWERCASE;
use wolofspell::segment::{
    build_vocab, train_subword, SegmentationScheme, RESERVED, SPACE_MARKER,
};

/// Recounts every pair from scratch on each iteration.
fn naive_bpe(corpus: &[String], target: usize) -> Vec<(String, String)> {
    let mut words: Vec<Vec<String>> = Vec::new();
    let mut base: BTreeSet<char> = BTreeSet::from([SPACE_MARKER]);
    for s in corpus {
        for (i, w) in s.split_whitespace().enumerate() {
            let w = if i == 0 { w.to_string() } else { format!("{SPACE_MARKER}{w}") };
            base.extend(w.chars());
            words.push(w.chars().map(String::from).collect());
        }
    }
    let mut merges = Vec::new();
    while base.len() + merges.len() < target {
        let mut counts: BTreeMap<(String, String), usize> = BTreeMap::new();
        for w in &words {
            for p in w.windows(2) {
                *counts.entry((p[0].clone(), p[1].clone())).or_default() += 1;
            }
        }
        // BTreeMap iterates pairs in ascending order, so the first maximum wins ties.
        let mut best: Option<((String, String), usize)> = None;
        for (p, c) in counts {
            if c >= 2 && best.as_ref().is_none_or(|b| c > b.1) {
                best = Some((p, c));
            }
        }
        let Some(((l, r), _)) = best else { break };
        for w in &mut words {
            let mut out = Vec::new();
            let mut i = 0;
            while i < w.len() {
                if i + 1 < w.len() && w[i] == l && w[i + 1] == r {
                    out.push(format!("{l}{r}"));
                    i += 2;
                } else {
                    out.push(w[i].clone());
                    i += 1;
                }
            }
            *w = out;
        }
        merges.push((l, r));
    }
    merges
}

fn official_sentence() -> impl Strategy<Value = String> {
    let alpha: Vec<char> = OFFICIAL_LOWERCASE.chars().chain("ABÑX".chars()).collect();
    let word = prop::collection::vec(prop::sample::select(alpha), 1..9)
        .prop_map(|cs| cs.into_iter().collect::<String>());
    prop::collection::vec(word, 0..8).prop_map(|ws| ws.join(" "))
}

fn sents(xs: &[String]) -> Vec<Sentence> {
    xs.iter().enumerate().map(|(i, s)| Sentence::new(i, s)).collect()
}

proptest! {
    #[test]
    fn round_trip_all_schemes(train in prop::collection::vec(official_sentence(), 1..20), probe in official_sentence(), target in 40usize..120) {
        let train = sents(&train);
        let schemes = match train_subword(&train, target) {
            Ok(bpe) => vec![SegmentationScheme::word(), SegmentationScheme::character(), bpe],
            Err(_) => vec![SegmentationScheme::word(), SegmentationScheme::character()],
        };
        let s = Sentence::new(0, &probe);
        for scheme in &schemes {
            let tokens = scheme.encode(&s).unwrap();
            prop_assert_eq!(scheme.decode(&tokens), s.clone());
        }
    }

    #[test]
    fn bpe_matches_naive_trainer(corpus in prop::collection::vec("[abcñ]{1,6}( [abcñ]{1,6}){0,3}", 1..12), extra in 0usize..30) {
        let normalized: Vec<String> = sents(&corpus).iter().map(|s| s.as_str().to_string()).collect();
        let base = normalized.iter().flat_map(|s| s.chars()).filter(|&c| c != ' ').collect::<BTreeSet<_>>().len() + 1;
        let target = base + extra;
        let got = train_subword(&sents(&corpus), target).unwrap();
        prop_assert_eq!(got.merges(), &naive_bpe(&normalized, target)[..]);
        let again = train_subword(&sents(&corpus), target).unwrap();
        prop_assert_eq!(got, again);
    }

    #[test]
    fn char_vocab_is_inventory(corpus in prop::collection::vec(official_sentence(), 1..10)) {
        let corpus = sents(&corpus);
        let scheme = SegmentationScheme::character();
        let seqs: Vec<Vec<String>> = corpus.iter().map(|s| scheme.encode(s).unwrap()).collect();
        let mut vocab = build_vocab(seqs.iter().map(Vec::as_slice), 1).unwrap();
        vocab.ensure(&SPACE_MARKER.to_string());
        let mut want: BTreeSet<String> = corpus.iter().flat_map(|s| s.as_str().chars()).filter(|&c| c != ' ').map(String::from).collect();
        want.insert(SPACE_MARKER.to_string());
        want.extend(RESERVED.iter().map(|r| r.to_string()));
        let got: BTreeSet<String> = vocab.tokens().map(|(t, _)| t.to_string()).collect();
        prop_assert_eq!(got, want);
    }
}
