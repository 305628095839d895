//! One line per acceptance criterion. Runs without the libtest harness so
//! the verdicts print even when everything passes; exits nonzero if any
//! criterion fails.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use wolofspell::corpus::{
    normalize_text, stratified_split, Sentence, SplitLabel, SplitSpec,
};
use wolofspell::corrector::{decode, Corrector, DecoderConfig};
use wolofspell::eval::sentence_accuracy;
use wolofspell::inverse::{build_lattice, invert_ruleset, InversionConfig, OFFICIAL_LOWERCASE};
use wolofspell::langid::{train_langid, DEFAULT_ORDER, DEFAULT_SMOOTHING};
use wolofspell::lm::{train_lm, NGramLanguageModel, Symbol};
use wolofspell::rules::{apply_rules, builtin, noise_corpus};
use wolofspell::segment::{train_subword, SegmentationScheme};
use wolofspell::synth::{wolof_lexicon, PreimageIndex, SentenceSampler};

struct Verdict {
    pass: bool,
    detail: String,
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn lines(path: &Path) -> Vec<Sentence> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .enumerate()
        .map(|(i, l)| Sentence::new(i, l))
        .collect()
}

fn golden_rules() -> Verdict {
    let text = fs::read_to_string(fixture("golden-rules.tsv")).unwrap();
    let rows: Vec<(&str, &str)> = text.lines().map(|l| l.split_once('\t').unwrap()).collect();
    let t = Instant::now();
    let bad: Vec<String> = rows
        .iter()
        .filter_map(|(official, conventional)| {
            let got = apply_rules(&normalize_text(official), builtin());
            (got.as_str().as_bytes() != conventional.as_bytes())
                .then(|| format!("{official:?} -> {:?}", got.as_str()))
        })
        .collect();
    let took = t.elapsed();
    Verdict {
        pass: rows.len() == 9 && bad.is_empty() && took < Duration::from_secs(1),
        detail: format!(
            "{}/{} pairs byte-exact in {took:.2?} (limit 1 s){}",
            rows.len() - bad.len(),
            rows.len(),
            if bad.is_empty() { String::new() } else { format!("; {}", bad.join(", ")) }
        ),
    }
}

fn split_contract() -> Verdict {
    // Sentences need not be distinct for a split; pair i is tagged by index.
    let sampler = SentenceSampler::wolof();
    let mut rng = ChaCha8Rng::seed_from_u64(154);
    let targets: Vec<Sentence> = (0..154_000)
        .map(|i| Sentence::new(i, &format!("{} {i}", sampler.sample(&mut rng))))
        .collect();
    let corpus = noise_corpus(&targets, builtin());
    let spec = SplitSpec::new(140_000, 7_000, 7_000, 11);

    let t = Instant::now();
    let a = stratified_split(&corpus, &spec).unwrap();
    let took = t.elapsed();
    let b = stratified_split(&corpus, &spec).unwrap();

    let labels = a.labels().unwrap();
    let count = |l: SplitLabel| labels.iter().filter(|&&x| x == l).count();
    let sizes = [count(SplitLabel::Train), count(SplitLabel::Valid), count(SplitLabel::Test)];
    let ids: HashSet<usize> = a.pairs().iter().map(|p| p.target.id).collect();
    let disjoint = ids.len() == a.len();

    // Strata recounted here: target token count in buckets of five.
    let stratum = |s: &Sentence| s.as_str().split(' ').count() / 5;
    let mut whole: BTreeMap<usize, f64> = BTreeMap::new();
    for p in corpus.pairs() {
        *whole.entry(stratum(&p.target)).or_default() += 1.0;
    }
    let mut worst: f64 = 0.0;
    for (label, want_total) in [
        (SplitLabel::Train, 140_000.0),
        (SplitLabel::Valid, 7_000.0),
        (SplitLabel::Test, 7_000.0),
    ] {
        let mut got: BTreeMap<usize, f64> = BTreeMap::new();
        for (p, l) in a.pairs().iter().zip(labels) {
            if *l == label {
                *got.entry(stratum(&p.target)).or_default() += 1.0;
            }
        }
        for (h, n) in &whole {
            let expected = n * want_total / 154_000.0;
            worst = worst.max((got.get(h).copied().unwrap_or(0.0) - expected).abs());
        }
    }
    let deterministic = a == b;
    Verdict {
        pass: sizes == [140_000, 7_000, 7_000]
            && disjoint
            && deterministic
            && worst <= 1.0
            && took < Duration::from_secs(30),
        detail: format!(
            "sizes {sizes:?}, disjoint {disjoint}, deterministic {deterministic}, \
             max stratum deviation {worst:.3} (limit 1), {} strata, {took:.2?} (limit 30 s)",
            whole.len()
        ),
    }
}

fn segmentation_round_trip() -> Verdict {
    let bpe = train_subword(&SentenceSampler::wolof().distinct(2_000, 5), 600).unwrap();
    let schemes = [SegmentationScheme::word(), bpe, SegmentationScheme::character()];
    let alpha: Vec<char> = OFFICIAL_LOWERCASE
        .chars()
        .chain(OFFICIAL_LOWERCASE.chars().flat_map(char::to_uppercase))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(10_000);
    let mut ok = [0usize; 3];
    let n = 10_000;
    for i in 0..n {
        let words = rng.random_range(1..=12);
        let text: Vec<String> = (0..words)
            .map(|_| {
                let len = rng.random_range(1..=10);
                (0..len).map(|_| alpha[rng.random_range(0..alpha.len())]).collect()
            })
            .collect();
        let s = Sentence::new(i, &text.join(" "));
        for (k, scheme) in schemes.iter().enumerate() {
            if scheme.encode(&s).map(|t| scheme.decode(&t).as_str() == s.as_str()).unwrap_or(false) {
                ok[k] += 1;
            }
        }
    }
    Verdict {
        pass: ok.iter().all(|&k| k == n),
        detail: format!("word {}/{n}, subword {}/{n}, character {}/{n}", ok[0], ok[1], ok[2]),
    }
}

fn lm_correctness() -> Verdict {
    // ["ab"], order 2, k = 1. Symbols: a, b, </s>, unknown → V = 4.
    // Counts: <s>→a, a→b, b→</s>, one each.
    let m = train_lm(&[Sentence::new(0, "ab")], 2, 1.0).unwrap();
    let start = m.start();
    let after_a = m.state_after("a");
    let after_b = m.state_after("ab");
    let hand = [
        (m.prob(start, Symbol::Char('a')), 2.0 / 5.0),
        (m.prob(start, Symbol::Char('b')), 1.0 / 5.0),
        (m.prob(start, Symbol::End), 1.0 / 5.0),
        (m.prob(after_a, Symbol::Char('b')), 2.0 / 5.0),
        (m.prob(after_a, Symbol::Char('a')), 1.0 / 5.0),
        (m.prob(after_b, Symbol::End), 2.0 / 5.0),
        (m.prob(after_b, Symbol::Unknown), 1.0 / 5.0),
    ];
    let hand_err = hand.iter().map(|(g, w)| (g - w).abs()).fold(0.0, f64::max);

    let train = SentenceSampler::wolof().distinct(10_000, 17);
    let lm = train_lm(&train, 5, 0.1).unwrap();
    let mut contexts = lm.contexts();
    let mut rng = ChaCha8Rng::seed_from_u64(1_000);
    contexts.shuffle(&mut rng);
    let syms: Vec<Symbol> = lm.symbols().collect();
    let norm_err = contexts
        .iter()
        .take(1_000)
        .map(|&c| (syms.iter().map(|&s| lm.prob(c, s)).sum::<f64>() - 1.0).abs())
        .fold(0.0, f64::max);
    let sampled = contexts.len().min(1_000);

    let shuffled: Vec<Sentence> = train
        .iter()
        .map(|s| {
            let mut cs: Vec<char> = s.as_str().chars().collect();
            cs.shuffle(&mut rng);
            Sentence::new(s.id, &cs.into_iter().collect::<String>())
        })
        .collect();
    let ppl_train = lm.perplexity(&train).unwrap();
    let ppl_shuf = lm.perplexity(&shuffled).unwrap();
    Verdict {
        pass: hand_err <= 1e-12 && sampled == 1_000 && norm_err <= 1e-9 && ppl_train <= ppl_shuf,
        detail: format!(
            "hand conditionals max err {hand_err:.1e} (limit 1e-12); normalization max err \
             {norm_err:.1e} over {sampled} contexts (limit 1e-9); perplexity train {ppl_train:.3} \
             <= shuffled {ppl_shuf:.3}"
        ),
    }
}

/// Exhaustive argmax under (score desc, channel desc, text asc), each path
/// scored from scratch.
fn enumerate_best(paths: &[(String, f64)], lm: &NGramLanguageModel) -> String {
    let mut best: Option<(&str, f64, f64)> = None;
    for (text, ch) in paths {
        let score = lm.score(text) + ch;
        let better = match best {
            None => true,
            Some((bt, bs, bc)) => score > bs || (score == bs && (*ch > bc || (*ch == bc && text.as_str() < bt))),
        };
        if better {
            best = Some((text, score, *ch));
        }
    }
    best.unwrap().0.to_string()
}

fn decoder_oracle() -> Verdict {
    let table = invert_ruleset(builtin(), &InversionConfig::default()).unwrap();
    let lm = train_lm(&SentenceSampler::wolof().distinct(10_000, 23), 5, 0.1).unwrap();
    let sampler = SentenceSampler::new(wolof_lexicon(), 1, 12);
    let mut rng = ChaCha8Rng::seed_from_u64(500);
    let t = Instant::now();
    let (mut tried, mut agree, mut checked, mut max_paths) = (0, 0, 0, 0usize);
    while checked < 500 {
        tried += 1;
        let noisy = apply_rules(&Sentence::new(0, &sampler.sample(&mut rng)), builtin());
        let lattice = build_lattice(&noisy, &table);
        let Some(paths) = lattice.paths(10_000) else { continue };
        max_paths = max_paths.max(paths.len());
        checked += 1;
        let want = enumerate_best(&paths, &lm);
        if decode(&noisy, &lattice, &lm, &DecoderConfig::exhaustive()).as_str() == want {
            agree += 1;
        }
    }
    let took = t.elapsed();
    Verdict {
        pass: agree == checked && took < Duration::from_secs(120),
        detail: format!(
            "{agree}/{checked} equal to exhaustive argmax (largest lattice {max_paths} paths, \
             {tried} sentences drawn), {took:.2?} (limit 2 min)"
        ),
    }
}

fn end_to_end() -> Verdict {
    let all = SentenceSampler::wolof().distinct(11_000, 42);
    let (train, held_out) = all.split_at(10_000);
    let t = Instant::now();
    let lm = train_lm(train, 5, 0.1).unwrap();
    let noisy: Vec<Sentence> = held_out.iter().map(|s| apply_rules(s, builtin())).collect();
    let corrector = Corrector::new(builtin().clone(), lm, DecoderConfig::default()).unwrap();
    let predicted = corrector.correct_all(&noisy);
    let took = t.elapsed();
    let acc = sentence_accuracy(&predicted, held_out).unwrap();
    let baseline = sentence_accuracy(&noisy, held_out).unwrap();

    // Unambiguous: every noisy token has exactly one lexicon pre-image.
    let index = PreimageIndex::new(&wolof_lexicon(), builtin());
    let (mut n, mut hit) = (0, 0);
    for ((noisy, pred), gold) in noisy.iter().zip(&predicted).zip(held_out) {
        if let Some(unique) = index.unique_preimage(noisy, builtin()) {
            assert_eq!(&unique, gold, "pre-image index disagrees with the source sentence");
            n += 1;
            hit += usize::from(pred.as_str() == unique.as_str());
        }
    }
    Verdict {
        pass: acc > baseline && n > 0 && hit == n,
        detail: format!(
            "accuracy {acc:.1}% vs do-nothing {baseline:.1}%; rule-unambiguous subset {hit}/{n}; \
             {took:.2?}"
        ),
    }
}

fn evaluator_exactness() -> Verdict {
    let pred = lines(&fixture("mixed.pred"));
    let refs = lines(&fixture("mixed.ref"));
    let mixed = sentence_accuracy(&pred, &refs).unwrap();
    let same = sentence_accuracy(&refs, &refs).unwrap();
    Verdict {
        pass: mixed == 60.0 && same == 100.0,
        detail: format!("mixed-error fixture {mixed}% (want 60.0), identical lists {same}% (want 100.0)"),
    }
}

fn langid_accuracy() -> Verdict {
    let french = SentenceSampler::french().distinct(500, 61);
    let wolof = SentenceSampler::wolof().distinct(1_000, 62);
    let mut rows: Vec<(Sentence, String, bool)> = Vec::new();
    for s in french {
        rows.push((s, "fr".into(), false));
    }
    for (i, s) in wolof.into_iter().enumerate() {
        if i % 2 == 0 {
            rows.push((apply_rules(&s, builtin()), "wo".into(), true));
        } else {
            rows.push((s, "wo".into(), false));
        }
    }
    rows.shuffle(&mut ChaCha8Rng::seed_from_u64(63));
    let cut = rows.len() * 4 / 5;
    let (train, test) = rows.split_at(cut);
    let labeled: Vec<(Sentence, String)> = train.iter().map(|(s, l, _)| (s.clone(), l.clone())).collect();
    let model = train_langid(&labeled, DEFAULT_ORDER, DEFAULT_SMOOTHING).unwrap();
    let right = |rs: &[&(Sentence, String, bool)]| {
        rs.iter()
            .filter(|(s, l, _)| model.classify(s).is_some_and(|c| &c.label == l))
            .count()
    };
    let all: Vec<_> = test.iter().collect();
    let conv: Vec<_> = test.iter().filter(|r| r.2).collect();
    let acc = 100.0 * right(&all) as f64 / all.len() as f64;
    let conv_acc = 100.0 * right(&conv) as f64 / conv.len() as f64;
    Verdict {
        pass: acc >= 90.0,
        detail: format!(
            "held-out accuracy {acc:.1}% on {} sentences (limit 90%); conventional-form Wolof \
             {conv_acc:.1}% on {}",
            all.len(),
            conv.len()
        ),
    }
}

type Check = (&'static str, fn() -> Verdict);

fn main() -> ExitCode {
    let checks: [Check; 8] = [
        ("golden rule fidelity", golden_rules),
        ("split contract", split_contract),
        ("segmentation round-trip", segmentation_round_trip),
        ("LM correctness", lm_correctness),
        ("decoder oracle equivalence", decoder_oracle),
        ("end-to-end desk experiment", end_to_end),
        ("evaluator exactness", evaluator_exactness),
        ("langid accuracy", langid_accuracy),
    ];
    let mut failed = 0;
    for (i, (name, check)) in checks.iter().enumerate() {
        let v = check();
        failed += usize::from(!v.pass);
        println!("{} [{}] {name}: {}", if v.pass { "PASS" } else { "FAIL" }, i + 1, v.detail);
    }
    println!("acceptance: {}/{} criteria pass", checks.len() - failed, checks.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
