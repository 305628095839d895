//! Seeded synthetic corpora for tests, benchmarks and the bundled pipeline
//! fixture: official-orthography Wolof and a small French word list.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::Sentence;
use crate::rules::{apply_rules, RewriteRuleSet};

/// Wolof words in official orthography, roughly by frequency.
pub const WOLOF_WORDS: &str = "\
bi yi ak a ci ko la ñu na naa dafa nga ku kula mu ma ba gi li mi si wi ji \
ca ya ga sa ka moo mooy ñoo yaa laa ngi dina dinaa du dula dees lu ludul \
fu fi fan kan lan ndax waaye te walla bu bul bañ am amul nekk nekkul \
dem demal ñëw ñëwal jàng jàngal bind xam xamal xamul gis gisal dégg déggal \
wax waxal lekk naan togg liggéey jënd jaay fey sàcc dàq taal ubbi tëj tëdd \
nelaw yewwu sangu sol jàpp jàppal yóbbu indi yónnee may jox jël bëgg bëggul \
sopp ragal mer bég nuru daw dox wàcc yéeg toog taxaw woy fecc tàkk ñaan \
julli wut gëm dund dee feebar wér gën mag rafet taaru neex metti baax bon \
yomb jafe gudd gàtt bari tuuti ndaw weex ñuul xonq sew diis yàgg bees jeex \
kër dëkk réew xale jigéen góor doom yaay baay rakk xarit nit ñi njaboot ngor \
gaal géej suuf asamaan ndox ceeb mburu jën yàpp lekkool téere kayit xaalis \
jàngalekat buur bànk órób waxtu bés guddi suba ngoon at weer tey démb ëllëg \
léegi jamono yoon dara lépp yëpp wàññi sàmm ànd raw ëppalé nàngu mukk wànté \
yii yooyu bii boobu kii kooku lii loolu fii bal xar bey ginaar golo gaynde \
njeexital juin duñu leen daa biñuy mbaam nag ñaari ñett ñeent juróom benn \
fukk téeméer junni ŋaam ñàkk sëriñ ndeysaan cere caabi kaani mbëggeel \
xol bopp tànk loxo bët nopp gémmiñ baat tur dënn wàll lool rekk itam tamit";

pub const FRENCH_WORDS: &str = "\
le la les un une des de du et est sont il elle ils nous vous je tu on pas ne \
que qui dans pour avec sur par mais ou donc très bien tout tous faire dire \
aller voir savoir pouvoir vouloir venir prendre maison village ville pays \
enfant femme homme père mère ami eau riz pain poisson viande école livre \
argent travail roi temps jour nuit matin soir année mois hier demain \
maintenant beau belle grand petit bon mauvais nouveau vieux blanc noir rouge \
chaud froid lourd merci bonjour oui non toujours jamais encore déjà ici là \
chez avant après parce comme aussi peut fait été était avoir être mange boit \
parle travaille dort marche cherche trouve donne aime veut sait connais \
beaucoup peu trop plus moins rien quelque chose monde vie cœur main tête \
route marché mer soleil ciel terre famille frère sœur fille garçon juillet \
mardi samedi dimanche français pourquoi comment combien quand où notre votre \
leur cette ces mon ton son ma ta sa mes tes ses";

pub fn wolof_lexicon() -> Vec<&'static str> {
    dedup(WOLOF_WORDS)
}

pub fn french_lexicon() -> Vec<&'static str> {
    dedup(FRENCH_WORDS)
}

fn dedup(words: &'static str) -> Vec<&'static str> {
    let mut seen = HashSet::new();
    words.split_whitespace().filter(|w| seen.insert(*w)).collect()
}

/// Samples sentences of 2..=`max_words` words with Zipf-like word weights.
#[derive(Debug, Clone)]
pub struct SentenceSampler {
    words: Vec<&'static str>,
    weights: WeightedIndex<f64>,
    min_words: usize,
    max_words: usize,
    capitalize: f64,
}

impl SentenceSampler {
    pub fn new(words: Vec<&'static str>, min_words: usize, max_words: usize) -> Self {
        assert!(!words.is_empty() && min_words >= 1 && min_words <= max_words);
        let weights = WeightedIndex::new((0..words.len()).map(|r| 1.0 / (r as f64 + 2.0).powf(0.7)))
            .expect("positive weights");
        SentenceSampler {
            words,
            weights,
            min_words,
            max_words,
            capitalize: 0.3,
        }
    }

    pub fn wolof() -> Self {
        Self::new(wolof_lexicon(), 2, 12)
    }

    pub fn french() -> Self {
        Self::new(french_lexicon(), 2, 12)
    }

    /// Probability that the first letter is upper-cased.
    pub fn with_capitalization(mut self, p: f64) -> Self {
        self.capitalize = p;
        self
    }

    pub fn sample(&self, rng: &mut ChaCha8Rng) -> String {
        let n = rng.random_range(self.min_words..=self.max_words);
        let text = (0..n)
            .map(|_| self.words[self.weights.sample(rng)])
            .collect::<Vec<_>>()
            .join(" ");
        if rng.random_bool(self.capitalize) {
            capitalize(&text)
        } else {
            text
        }
    }

    /// `n` pairwise-distinct sentences, deterministic in `seed`.
    pub fn distinct(&self, n: usize, seed: u64) -> Vec<Sentence> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut seen = HashSet::with_capacity(n);
        let mut out = Vec::with_capacity(n);
        while out.len() < n {
            let s = self.sample(&mut rng);
            if seen.insert(s.clone()) {
                out.push(Sentence::new(out.len(), &s));
            }
        }
        out
    }
}

fn capitalize(s: &str) -> String {
    let mut cs = s.chars();
    match cs.next() {
        Some(c) => c.to_uppercase().chain(cs).collect(),
        None => String::new(),
    }
}

/// Maps each noisy token to the lexicon strings that noise into it. A
/// single-vowel word can fuse with the word before it, so pairs
/// `"w a"` are keys too.
#[derive(Debug, Clone)]
pub struct PreimageIndex {
    map: BTreeMap<String, BTreeSet<String>>,
}

impl PreimageIndex {
    pub fn new(lexicon: &[&str], rules: &RewriteRuleSet) -> Self {
        let vowels: Vec<&str> = lexicon
            .iter()
            .copied()
            .filter(|w| w.chars().count() == 1)
            .collect();
        let mut map: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
        let mut add = |official: String| {
            let noisy = apply_rules(&Sentence::new(0, &official), rules);
            map.entry(noisy.text).or_default().insert(official);
        };
        for w in lexicon {
            for form in [w.to_string(), capitalize(w)] {
                add(form.clone());
                for v in &vowels {
                    add(format!("{form} {v}"));
                }
            }
        }
        PreimageIndex { map }
    }

    pub fn get(&self, noisy_token: &str) -> Option<&BTreeSet<String>> {
        self.map.get(noisy_token)
    }

    /// The unique official sentence whose tokens each have exactly one
    /// lexicon pre-image, if that sentence noises back to `noisy`.
    pub fn unique_preimage(&self, noisy: &Sentence, rules: &RewriteRuleSet) -> Option<Sentence> {
        let mut parts = Vec::new();
        for tok in noisy.as_str().split(' ') {
            let set = self.map.get(tok)?;
            if set.len() != 1 {
                return None;
            }
            parts.push(set.iter().next()?.clone());
        }
        let candidate = Sentence::new(noisy.id, &parts.join(" "));
        (apply_rules(&candidate, rules) == *noisy).then_some(candidate)
    }
}
