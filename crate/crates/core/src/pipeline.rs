//! Declarative experiments: noise → split → tokenize → train-lm → correct →
//! evaluate, with every intermediate artifact written under one directory.
//!
//! Each stage is also exposed on its own so the CLI subcommands and the
//! pipeline share one implementation.

use std::fmt;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{
    load_parallel, load_sentences, stratified_split, write_corpus, CorpusError,
    ParallelCorpus, Sentence, SplitLabel, SplitManifest, SplitSpec, StrataKey,
};
use crate::corrector::{Corrector, CorrectorError, DecoderConfig};
use crate::eval::{char_error_rate, sentence_accuracy, EvalError, EvalReport, ReportFormat, ReportRow};
use crate::inverse::{InversionConfig, DEFAULT_IDENTITY_PROB};
use crate::lm::{train_lm, LmError, NGramLanguageModel, DEFAULT_K, DEFAULT_ORDER};
use crate::rules::{noise_corpus, resolve_ruleset, RewriteRuleSet, RuleError, BUILTIN_NAME};
use crate::segment::{
    build_vocab, train_subword, write_tokenized, SchemeKind, SegmentError, SegmentationScheme,
    DEFAULT_SUBWORD_VOCAB,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Noise,
    Split,
    Tokenize,
    TrainLm,
    Correct,
    Evaluate,
}

impl Stage {
    pub const ALL: [Stage; 6] = [
        Stage::Noise,
        Stage::Split,
        Stage::Tokenize,
        Stage::TrainLm,
        Stage::Correct,
        Stage::Evaluate,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Noise => "noise",
            Stage::Split => "split",
            Stage::Tokenize => "tokenize",
            Stage::TrainLm => "train-lm",
            Stage::Correct => "correct",
            Stage::Evaluate => "evaluate",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Error)]
pub enum StageError {
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Rules(#[from] RuleError),
    #[error(transparent)]
    Segment(#[from] SegmentError),
    #[error(transparent)]
    Lm(#[from] LmError),
    #[error(transparent)]
    Corrector(#[from] CorrectorError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("{path}: {err}")]
    Io {
        path: PathBuf,
        #[source]
        err: io::Error,
    },
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error("{stage} stage failed")]
    Stage {
        stage: Stage,
        #[source]
        source: StageError,
    },
}

impl PipelineError {
    pub fn stage(&self) -> Option<Stage> {
        match self {
            PipelineError::Stage { stage, .. } => Some(*stage),
            PipelineError::Config(_) => None,
        }
    }
}

fn at<E: Into<StageError>>(stage: Stage) -> impl FnOnce(E) -> PipelineError {
    move |e| PipelineError::Stage {
        stage,
        source: e.into(),
    }
}

fn io_at(stage: Stage, path: &Path) -> impl FnOnce(io::Error) -> PipelineError + '_ {
    move |err| PipelineError::Stage {
        stage,
        source: StageError::Io {
            path: path.to_path_buf(),
            err,
        },
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsConfig {
    /// Official-orthography sentences, one per line.
    pub corpus: PathBuf,
    /// Built-in rule-set name or path to a rule file.
    pub rules: String,
    pub out_dir: PathBuf,
}

impl Default for PathsConfig {
    fn default() -> Self {
        PathsConfig {
            corpus: PathBuf::new(),
            rules: BUILTIN_NAME.to_string(),
            out_dir: PathBuf::from("wolofspell-run"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitConfig {
    pub train: usize,
    pub valid: usize,
    pub test: usize,
    pub strata: StrataKey,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig {
            train: 140_000,
            valid: 7_000,
            test: 7_000,
            strata: StrataKey::LengthBucket,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SegmentConfig {
    /// Any of `word`, `subword`, `character`.
    pub schemes: Vec<String>,
    pub subword_vocab: usize,
    /// Vocabulary threshold for word segmentation; other schemes keep
    /// everything.
    pub word_min_count: u64,
}

impl Default for SegmentConfig {
    fn default() -> Self {
        SegmentConfig {
            schemes: SchemeKind::ALL.iter().map(|k| k.as_str().to_string()).collect(),
            subword_vocab: DEFAULT_SUBWORD_VOCAB,
            word_min_count: SchemeKind::Word.default_min_count(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LmConfig {
    pub order: usize,
    pub k: f64,
}

impl Default for LmConfig {
    fn default() -> Self {
        LmConfig {
            order: DEFAULT_ORDER,
            k: DEFAULT_K,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecoderSection {
    pub beam_width: usize,
    pub lm_weight: f64,
    pub max_candidates_per_span: usize,
    pub identity_prob: f64,
}

impl Default for DecoderSection {
    fn default() -> Self {
        let d = DecoderConfig::default();
        DecoderSection {
            beam_width: d.beam_width,
            lm_weight: d.lm_weight,
            max_candidates_per_span: d.max_candidates_per_span,
            identity_prob: DEFAULT_IDENTITY_PROB,
        }
    }
}

impl DecoderSection {
    pub fn decoder(&self) -> DecoderConfig {
        DecoderConfig {
            beam_width: self.beam_width,
            lm_weight: self.lm_weight,
            max_candidates_per_span: self.max_candidates_per_span,
        }
    }

    pub fn inversion(&self) -> InversionConfig {
        InversionConfig {
            identity_prob: self.identity_prob,
            ..InversionConfig::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub paths: PathsConfig,
    pub split: SplitConfig,
    pub segment: SegmentConfig,
    pub lm: LmConfig,
    pub decoder: DecoderSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 42,
            paths: PathsConfig::default(),
            split: SplitConfig::default(),
            segment: SegmentConfig::default(),
            lm: LmConfig::default(),
            decoder: DecoderSection::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, PipelineError> {
        toml::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))
    }

    /// Reads a TOML file; relative paths inside it are taken relative to
    /// the file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, PipelineError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)
            .map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        let rebase = |p: &mut PathBuf| {
            if !p.as_os_str().is_empty() && p.is_relative() {
                *p = base.join(&*p);
            }
        };
        rebase(&mut cfg.paths.corpus);
        rebase(&mut cfg.paths.out_dir);
        if cfg.paths.rules != BUILTIN_NAME && Path::new(&cfg.paths.rules).is_relative() {
            cfg.paths.rules = base.join(&cfg.paths.rules).to_string_lossy().into_owned();
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn split_spec(&self) -> SplitSpec {
        SplitSpec {
            strata_key: self.split.strata,
            ..SplitSpec::new(self.split.train, self.split.valid, self.split.test, self.seed)
        }
    }

    pub fn schemes(&self) -> Result<Vec<SchemeKind>, PipelineError> {
        let mut out = Vec::new();
        for s in &self.segment.schemes {
            let k: SchemeKind = s.parse().map_err(|e: SegmentError| PipelineError::Config(e.to_string()))?;
            if !out.contains(&k) {
                out.push(k);
            }
        }
        Ok(out)
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: String| Err(PipelineError::Config(m));
        if self.paths.corpus.as_os_str().is_empty() {
            return bad("paths.corpus is required".into());
        }
        if !self.paths.corpus.is_file() {
            return bad(format!("corpus {} does not exist", self.paths.corpus.display()));
        }
        if self.paths.rules != BUILTIN_NAME && !Path::new(&self.paths.rules).is_file() {
            return bad(format!("rules {} is neither `{BUILTIN_NAME}` nor a file", self.paths.rules));
        }
        if self.split.train == 0 || self.split.test == 0 {
            return bad("split.train and split.test must be positive".into());
        }
        self.schemes()?;
        self.decoder
            .decoder()
            .validate()
            .map_err(|e| PipelineError::Config(e.to_string()))?;
        let p = self.decoder.identity_prob;
        if !(p > 0.0 && p < 1.0) {
            return bad(format!("decoder.identity_prob must lie in (0, 1), got {p}"));
        }
        Ok(())
    }
}

/// Artifact locations under an output directory.
#[derive(Debug, Clone)]
pub struct RunLayout {
    pub root: PathBuf,
}

impl RunLayout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        RunLayout { root: root.into() }
    }

    pub fn config(&self) -> PathBuf {
        self.root.join("config.toml")
    }

    pub fn rules(&self) -> PathBuf {
        self.root.join("rules.tsv")
    }

    pub fn noised(&self) -> PathBuf {
        self.root.join("noised")
    }

    pub fn split(&self) -> PathBuf {
        self.root.join("split")
    }

    pub fn split_file(&self, label: SplitLabel, side: &str) -> PathBuf {
        self.split().join(format!("{}.{side}", label.as_str()))
    }

    pub fn tokenized(&self, kind: SchemeKind) -> PathBuf {
        self.root.join("tokenized").join(kind.as_str())
    }

    pub fn lm(&self) -> PathBuf {
        self.root.join("lm.json")
    }

    pub fn predictions(&self) -> PathBuf {
        self.root.join("predictions.txt")
    }

    pub fn report_json(&self) -> PathBuf {
        self.root.join("report.json")
    }

    pub fn report_table(&self) -> PathBuf {
        self.root.join("report.txt")
    }
}

/// Noises every official sentence; the result is unlabeled.
pub fn noise_stage(targets: &[Sentence], rules: &RewriteRuleSet) -> ParallelCorpus {
    noise_corpus(targets, rules)
}

/// Segments every split under `scheme`, builds a joint source+target
/// vocabulary from the training split and writes `<split>.src`/`.tgt`,
/// `vocab.txt` and (for subwords) `merges.txt` into `dir`.
pub fn tokenize_split(
    split: &ParallelCorpus,
    kind: SchemeKind,
    subword_vocab: usize,
    min_count: u64,
    dir: &Path,
) -> Result<SegmentationScheme, StageError> {
    fs::create_dir_all(dir).map_err(|err| StageError::Io {
        path: dir.to_path_buf(),
        err,
    })?;
    let train = split.subset(SplitLabel::Train);
    let scheme = match kind {
        SchemeKind::Word => SegmentationScheme::word(),
        SchemeKind::Character => SegmentationScheme::character(),
        SchemeKind::Subword => {
            let sides: Vec<Sentence> = train
                .iter()
                .flat_map(|p| [p.source.clone(), p.target.clone()])
                .collect();
            train_subword(&sides, subword_vocab)?
        }
    };
    let mut train_seqs = Vec::new();
    for label in SplitLabel::ALL {
        let pairs = split.subset(label);
        let src = pairs.iter().map(|p| scheme.encode(&p.source)).collect::<Result<Vec<_>, _>>()?;
        let tgt = pairs.iter().map(|p| scheme.encode(&p.target)).collect::<Result<Vec<_>, _>>()?;
        write_tokenized(dir.join(format!("{}.src", label.as_str())), &src)?;
        write_tokenized(dir.join(format!("{}.tgt", label.as_str())), &tgt)?;
        if label == SplitLabel::Train {
            train_seqs = src.into_iter().chain(tgt).collect();
        }
    }
    let vocab = build_vocab(train_seqs.iter().map(Vec::as_slice), min_count)?;
    vocab.write(dir.join("vocab.txt"))?;
    if kind == SchemeKind::Subword {
        scheme.write_merges(dir.join("merges.txt"))?;
    }
    Ok(scheme)
}

/// Accuracy rows for the do-nothing baseline and the corrector.
pub fn evaluate_rows(
    noisy: &[Sentence],
    predictions: &[Sentence],
    references: &[Sentence],
) -> Result<Vec<ReportRow>, EvalError> {
    let mut baseline = ReportRow::new("identity", "none", sentence_accuracy(noisy, references)?);
    baseline.cer = Some(char_error_rate(noisy, references)?);
    let mut corrected = ReportRow::new(
        "noisy-channel",
        SchemeKind::Character.as_str(),
        sentence_accuracy(predictions, references)?,
    );
    corrected.cer = Some(char_error_rate(predictions, references)?);
    Ok(vec![baseline, corrected])
}

/// Runs every stage in order. Rerunning the same config rewrites the same
/// bytes.
pub fn run_pipeline(cfg: &ExperimentConfig) -> Result<EvalReport, PipelineError> {
    cfg.validate()?;
    let out = RunLayout::new(&cfg.paths.out_dir);
    fs::create_dir_all(&out.root).map_err(|e| PipelineError::Config(format!("{}: {e}", out.root.display())))?;
    fs::write(out.config(), cfg.to_toml()).map_err(io_at(Stage::Noise, &out.config()))?;

    // noise
    let rules = resolve_ruleset(&cfg.paths.rules).map_err(at(Stage::Noise))?;
    fs::write(out.rules(), rules.to_rule_file()).map_err(io_at(Stage::Noise, &out.rules()))?;
    let targets = load_sentences(&cfg.paths.corpus).map_err(at(Stage::Noise))?;
    let noised = noise_stage(&targets, &rules);
    write_corpus(&noised, out.noised()).map_err(at(Stage::Noise))?;

    // split
    let spec = cfg.split_spec();
    let split = stratified_split(&noised, &spec).map_err(at(Stage::Split))?;
    write_corpus(&split, out.split()).map_err(at(Stage::Split))?;
    SplitManifest::new(&spec, noised.len())
        .write(out.split().join("manifest.json"))
        .map_err(at(Stage::Split))?;

    // tokenize
    for kind in cfg.schemes()? {
        let min_count = match kind {
            SchemeKind::Word => cfg.segment.word_min_count,
            other => other.default_min_count(),
        };
        tokenize_split(&split, kind, cfg.segment.subword_vocab, min_count, &out.tokenized(kind))
            .map_err(at(Stage::Tokenize))?;
    }

    // train-lm
    let train_tgt: Vec<Sentence> = split
        .subset(SplitLabel::Train)
        .iter()
        .map(|p| p.target.clone())
        .collect();
    let lm = train_lm(&train_tgt, cfg.lm.order, cfg.lm.k).map_err(at(Stage::TrainLm))?;
    lm.save(out.lm()).map_err(at(Stage::TrainLm))?;

    // correct: read back what the earlier stages wrote, as the subcommands would
    let lm = NGramLanguageModel::load(out.lm()).map_err(at(Stage::Correct))?;
    let corrector = Corrector::with_inversion(rules.clone(), lm, cfg.decoder.decoder(), &cfg.decoder.inversion())
        .map_err(at(Stage::Correct))?;
    corrector
        .correct_corpus(out.split_file(SplitLabel::Test, "src"), out.predictions())
        .map_err(at(Stage::Correct))?;

    // evaluate
    let test = load_parallel(
        out.split_file(SplitLabel::Test, "src"),
        out.split_file(SplitLabel::Test, "tgt"),
    )
    .map_err(at(Stage::Evaluate))?;
    let noisy: Vec<Sentence> = test.sources().cloned().collect();
    let refs: Vec<Sentence> = test.targets().cloned().collect();
    let preds = load_sentences(out.predictions()).map_err(at(Stage::Evaluate))?;
    let rows = evaluate_rows(&noisy, &preds, &refs).map_err(at(Stage::Evaluate))?;
    let mut report = EvalReport::new(rows);
    let meta = [
        ("corpus_size", noised.len().to_string()),
        ("train", spec.train_count.to_string()),
        ("valid", spec.valid_count.to_string()),
        ("test", spec.test_count.to_string()),
        ("seed", cfg.seed.to_string()),
        ("rules", format!("{} {}", rules.name, rules.version)),
        ("lm_order", cfg.lm.order.to_string()),
        ("lm_k", cfg.lm.k.to_string()),
    ];
    report.metadata = meta.into_iter().map(|(k, v)| (k.to_string(), v)).collect();
    for (path, fmt) in [
        (out.report_json(), ReportFormat::Json),
        (out.report_table(), ReportFormat::Table),
    ] {
        let text = report.render(fmt).map_err(at(Stage::Evaluate))?;
        fs::write(&path, text).map_err(io_at(Stage::Evaluate, &path))?;
    }
    Ok(report)
}
