use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use wolofspell::corpus::{
    load_parallel, load_sentences, stratified_split, write_corpus, write_sentences, ParallelCorpus,
    Sentence, SplitManifest, SplitSpec, StrataKey,
};
use wolofspell::corrector::{load_external_predictions, Corrector, DecoderConfig};
use wolofspell::eval::{char_error_rate, sentence_accuracy, EvalReport, ReportFormat, ReportRow};
use wolofspell::inverse::{invert_ruleset, InversionConfig, DEFAULT_IDENTITY_PROB};
use wolofspell::langid::{filter_corpus, train_langid, LangIdModel};
use wolofspell::lm::{train_lm, NGramLanguageModel, DEFAULT_K, DEFAULT_ORDER};
use wolofspell::pipeline::{noise_stage, run_pipeline, tokenize_split, ExperimentConfig};
use wolofspell::rules::{resolve_ruleset, BUILTIN_NAME};
use wolofspell::segment::{SchemeKind, DEFAULT_SUBWORD_VOCAB};
use wolofspell::synth::SentenceSampler;

const OUT_DIR_ENV: &str = "WOLOFSPELL_OUT_DIR";

/// Wolof spelling correction: noising, splitting, segmentation, language
/// models, correction and evaluation.
#[derive(Parser)]
#[command(name = "wolofspell", version)]
struct Cli {
    /// Cap on worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Default directory for outputs not given explicitly.
    #[arg(long, global = true, env = OUT_DIR_ENV, default_value = "wolofspell-out")]
    out_dir: PathBuf,

    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Noise official sentences into a parallel corpus (corpus.src/corpus.tgt).
    Noise {
        /// Official-orthography sentences, one per line.
        input: PathBuf,
        #[arg(long, default_value = BUILTIN_NAME)]
        rules: String,
        /// Output directory [default: --out-dir].
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Stratified train/valid/test split of a parallel corpus.
    Split {
        #[arg(long)]
        src: PathBuf,
        #[arg(long)]
        tgt: PathBuf,
        #[arg(long, default_value_t = 140_000)]
        train: usize,
        #[arg(long, default_value_t = 7_000)]
        valid: usize,
        #[arg(long, default_value_t = 7_000)]
        test: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// length_bucket or none.
        #[arg(long, default_value = "length_bucket")]
        strata: StrataKey,
        /// Output directory [default: --out-dir].
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Segment a split directory under one scheme and build its vocabulary.
    Tokenize {
        /// Directory holding train/valid/test .src/.tgt files.
        #[arg(long)]
        split_dir: PathBuf,
        /// word, subword or character.
        #[arg(long)]
        scheme: SchemeKind,
        #[arg(long, default_value_t = DEFAULT_SUBWORD_VOCAB)]
        subword_vocab: usize,
        /// Vocabulary threshold [default: 2 for word, 1 otherwise].
        #[arg(long)]
        min_count: Option<u64>,
        /// Output directory [default: <--out-dir>/tokenized/<scheme>].
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Train a character n-gram language model.
    TrainLm {
        /// Official-orthography training sentences.
        input: PathBuf,
        #[arg(long, default_value_t = DEFAULT_ORDER)]
        order: usize,
        /// Additive smoothing constant.
        #[arg(long, default_value_t = DEFAULT_K)]
        k: f64,
        /// Model file [default: <--out-dir>/lm.json].
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Perplexity of a language model on a file.
    Ppl {
        #[arg(long)]
        lm: PathBuf,
        input: PathBuf,
    },
    /// Train a language identifier from LABEL=PATH corpora.
    TrainLangid {
        /// Labeled corpus, e.g. wo=wolof.txt; repeat for each label.
        #[arg(long = "corpus", value_name = "LABEL=PATH", required = true)]
        corpora: Vec<String>,
        #[arg(long, default_value_t = wolofspell::langid::DEFAULT_ORDER)]
        order: usize,
        #[arg(long, default_value_t = wolofspell::langid::DEFAULT_SMOOTHING)]
        smoothing: f64,
        /// Model file [default: <--out-dir>/langid.json].
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Print `label<TAB>sentence` for every line.
    Classify {
        #[arg(long)]
        model: PathBuf,
        input: PathBuf,
    },
    /// Keep the lines classified as one label.
    Filter {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value = "wo")]
        keep: String,
        input: PathBuf,
        /// Output file [default: stdout].
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Correct conventional-spelling text into official orthography.
    Correct {
        /// Noisy sentences, one per line.
        input: PathBuf,
        #[arg(long)]
        lm: PathBuf,
        #[arg(long, default_value = BUILTIN_NAME)]
        rules: String,
        #[command(flatten)]
        decoder: DecoderArgs,
        /// Predictions file [default: <--out-dir>/predictions.txt].
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Score predictions against references.
    Evaluate {
        #[arg(long)]
        references: PathBuf,
        /// Predictions as MODEL:SCHEME=PATH, or a bare PATH; repeatable.
        #[arg(long = "predictions", value_name = "[MODEL:SCHEME=]PATH", required = true)]
        predictions: Vec<String>,
        /// json or table.
        #[arg(long, default_value = "table")]
        format: ReportFormat,
        /// Also write the report here.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Print a rule set, or its inverse table.
    DumpRules {
        #[arg(long, default_value = BUILTIN_NAME)]
        rules: String,
        #[arg(long)]
        inverse: bool,
        #[arg(long, default_value_t = DEFAULT_IDENTITY_PROB)]
        identity_prob: f64,
    },
    /// Run noise → split → tokenize → train-lm → correct → evaluate.
    Pipeline(PipelineArgs),
    /// Write seeded synthetic sentences.
    Synth {
        /// wolof or french.
        #[arg(long, default_value = "wolof")]
        lang: String,
        #[arg(short, long)]
        n: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Output file [default: stdout].
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

#[derive(Args)]
struct DecoderArgs {
    #[arg(long, default_value_t = DecoderConfig::default().beam_width)]
    beam_width: usize,
    #[arg(long, default_value_t = DecoderConfig::default().lm_weight)]
    lm_weight: f64,
    /// Keep this many candidates per span; 0 keeps all.
    #[arg(long, default_value_t = 0)]
    max_candidates: usize,
    /// Channel probability that a span is already correct.
    #[arg(long, default_value_t = DEFAULT_IDENTITY_PROB)]
    identity_prob: f64,
}

/// Flags override the config file; the config file overrides built-in
/// defaults (shown in brackets).
#[derive(Args)]
struct PipelineArgs {
    /// TOML experiment config.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Seed for every stochastic step [default: 42]
    #[arg(long)]
    seed: Option<u64>,
    /// Official-orthography corpus (required here or in the config).
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// Rule-set name or file [default: beqi-v1]
    #[arg(long)]
    rules: Option<String>,
    /// Run directory [default: paths.out_dir, else --out-dir]
    #[arg(long = "run-dir")]
    run_dir: Option<PathBuf>,
    /// Training pairs [default: 140000]
    #[arg(long)]
    train: Option<usize>,
    /// Validation pairs [default: 7000]
    #[arg(long)]
    valid: Option<usize>,
    /// Test pairs [default: 7000]
    #[arg(long)]
    test: Option<usize>,
    /// length_bucket or none [default: length_bucket]
    #[arg(long)]
    strata: Option<StrataKey>,
    /// Comma-separated schemes [default: word,subword,character]
    #[arg(long, value_delimiter = ',')]
    schemes: Option<Vec<String>>,
    /// Subword vocabulary size [default: 2000]
    #[arg(long)]
    subword_vocab: Option<usize>,
    /// Word vocabulary threshold [default: 2]
    #[arg(long)]
    word_min_count: Option<u64>,
    /// LM order [default: 5]
    #[arg(long)]
    order: Option<usize>,
    /// LM additive smoothing [default: 0.1]
    #[arg(long)]
    k: Option<f64>,
    /// Beam width [default: 32]
    #[arg(long)]
    beam_width: Option<usize>,
    /// LM weight [default: 1.0]
    #[arg(long)]
    lm_weight: Option<f64>,
    /// Candidates kept per span, 0 = all [default: 0]
    #[arg(long)]
    max_candidates: Option<usize>,
    /// Channel probability of no error [default: 0.5]
    #[arg(long)]
    identity_prob: Option<f64>,
}

impl PipelineArgs {
    fn resolve(self, default_out: &Path) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig {
                paths: wolofspell::pipeline::PathsConfig {
                    out_dir: default_out.to_path_buf(),
                    ..Default::default()
                },
                ..Default::default()
            },
        };
        macro_rules! set {
            ($($flag:ident => $($field:ident).+),* $(,)?) => {
                $(if let Some(v) = self.$flag { cfg.$($field).+ = v; })*
            };
        }
        set! {
            seed => seed,
            corpus => paths.corpus,
            rules => paths.rules,
            run_dir => paths.out_dir,
            train => split.train,
            valid => split.valid,
            test => split.test,
            strata => split.strata,
            schemes => segment.schemes,
            subword_vocab => segment.subword_vocab,
            word_min_count => segment.word_min_count,
            order => lm.order,
            k => lm.k,
            beam_width => decoder.beam_width,
            lm_weight => decoder.lm_weight,
            max_candidates => decoder.max_candidates_per_span,
            identity_prob => decoder.identity_prob,
        }
        Ok(cfg)
    }
}

fn parse_labeled(spec: &str) -> Result<(String, PathBuf)> {
    let (label, path) = spec
        .split_once('=')
        .ok_or_else(|| anyhow!("expected LABEL=PATH, got {spec:?}"))?;
    Ok((label.to_string(), PathBuf::from(path)))
}

fn emit(output: Option<&Path>, text: &str) -> Result<()> {
    match output {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            io::stdout().lock().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
            .context("configuring the thread pool")?;
    }
    let out_dir = cli.out_dir;
    match cli.cmd {
        Cmd::Noise { input, rules, output } => {
            let rules = resolve_ruleset(&rules)?;
            let targets = load_sentences(&input)?;
            let corpus = noise_stage(&targets, &rules);
            let dir = output.unwrap_or(out_dir);
            for p in write_corpus(&corpus, &dir)? {
                eprintln!("wrote {}", p.display());
            }
        }
        Cmd::Split {
            src,
            tgt,
            train,
            valid,
            test,
            seed,
            strata,
            output,
        } => {
            let corpus = load_parallel(&src, &tgt)?;
            let spec = SplitSpec {
                strata_key: strata,
                ..SplitSpec::new(train, valid, test, seed)
            };
            let split = stratified_split(&corpus, &spec)?;
            let dir = output.unwrap_or(out_dir);
            write_corpus(&split, &dir)?;
            SplitManifest::new(&spec, corpus.len()).write(dir.join("manifest.json"))?;
            eprintln!("split {} pairs into {}", split.len(), dir.display());
        }
        Cmd::Tokenize {
            split_dir,
            scheme,
            subword_vocab,
            min_count,
            output,
        } => {
            let mut pairs = Vec::new();
            let mut labels = Vec::new();
            for label in wolofspell::corpus::SplitLabel::ALL {
                let part = load_parallel(
                    split_dir.join(format!("{}.src", label.as_str())),
                    split_dir.join(format!("{}.tgt", label.as_str())),
                )?;
                labels.extend(std::iter::repeat_n(label, part.len()));
                pairs.extend(part.pairs().iter().cloned());
            }
            let split = ParallelCorpus::new(pairs).with_labels(labels);
            let dir = output.unwrap_or_else(|| out_dir.join("tokenized").join(scheme.as_str()));
            let min_count = min_count.unwrap_or(scheme.default_min_count());
            tokenize_split(&split, scheme, subword_vocab, min_count, &dir)?;
            eprintln!("wrote {}", dir.display());
        }
        Cmd::TrainLm { input, order, k, output } => {
            let sents = load_sentences(&input)?;
            let lm = train_lm(&sents, order, k)?;
            let path = output.unwrap_or_else(|| out_dir.join("lm.json"));
            ensure_parent(&path)?;
            lm.save(&path)?;
            eprintln!("wrote {}", path.display());
        }
        Cmd::Ppl { lm, input } => {
            let lm = NGramLanguageModel::load(&lm)?;
            let sents = load_sentences(&input)?;
            println!("{}", lm.perplexity(&sents)?);
        }
        Cmd::TrainLangid {
            corpora,
            order,
            smoothing,
            output,
        } => {
            let mut labeled = Vec::new();
            for spec in &corpora {
                let (label, path) = parse_labeled(spec)?;
                labeled.extend(load_sentences(&path)?.into_iter().map(|s| (s, label.clone())));
            }
            let model = train_langid(&labeled, order, smoothing)?;
            let path = output.unwrap_or_else(|| out_dir.join("langid.json"));
            ensure_parent(&path)?;
            model.save(&path)?;
            eprintln!("wrote {}", path.display());
        }
        Cmd::Classify { model, input } => {
            let model = LangIdModel::load(&model)?;
            let sents = load_sentences(&input)?;
            let mut out = String::new();
            for (s, c) in sents.iter().zip(model.classify_all(&sents)) {
                let label = c.map(|c| c.label).unwrap_or_else(|| "-".into());
                out.push_str(&format!("{label}\t{s}\n"));
            }
            emit(None, &out)?;
        }
        Cmd::Filter {
            model,
            keep,
            input,
            output,
        } => {
            let model = LangIdModel::load(&model)?;
            if !model.labels().contains(&keep) {
                bail!("label {keep:?} is not in the model (labels: {})", model.labels().join(", "));
            }
            let kept = filter_corpus(&model, &load_sentences(&input)?, &keep);
            let text: String = kept.iter().map(|s| format!("{s}\n")).collect();
            emit(output.as_deref(), &text)?;
        }
        Cmd::Correct {
            input,
            lm,
            rules,
            decoder,
            output,
        } => {
            let rules = resolve_ruleset(&rules)?;
            let lm = NGramLanguageModel::load(&lm)?;
            let cfg = DecoderConfig {
                beam_width: decoder.beam_width,
                lm_weight: decoder.lm_weight,
                max_candidates_per_span: decoder.max_candidates,
            };
            let inversion = InversionConfig {
                identity_prob: decoder.identity_prob,
                ..InversionConfig::default()
            };
            let corrector = Corrector::with_inversion(rules, lm, cfg, &inversion)?;
            let path = output.unwrap_or_else(|| out_dir.join("predictions.txt"));
            ensure_parent(&path)?;
            let n = corrector.correct_corpus(&input, &path)?;
            eprintln!("corrected {n} lines into {}", path.display());
        }
        Cmd::Evaluate {
            references,
            predictions,
            format,
            output,
        } => {
            let refs = load_sentences(&references)?;
            let mut rows = Vec::new();
            for spec in &predictions {
                let (name, path) = match spec.split_once('=') {
                    Some((name, path)) => (name, path),
                    None => ("external:-", spec.as_str()),
                };
                let (model, scheme) = name.split_once(':').unwrap_or((name, "-"));
                let preds = load_external_predictions(path, refs.len())
                    .with_context(|| format!("predictions {path}"))?;
                let mut row = ReportRow::new(model, scheme, sentence_accuracy(&preds, &refs)?);
                row.cer = char_error_rate(&preds, &refs).ok();
                rows.push(row);
            }
            let mut report = EvalReport::new(rows);
            report.metadata.insert("references".into(), refs.len().to_string());
            let text = report.render(format)?;
            if let Some(p) = &output {
                ensure_parent(p)?;
                fs::write(p, &text).with_context(|| format!("writing {}", p.display()))?;
            }
            emit(None, &text)?;
        }
        Cmd::DumpRules {
            rules,
            inverse,
            identity_prob,
        } => {
            let rules = resolve_ruleset(&rules)?;
            if inverse {
                let cfg = InversionConfig {
                    identity_prob,
                    ..InversionConfig::default()
                };
                emit(None, &invert_ruleset(&rules, &cfg)?.to_tsv())?;
            } else {
                emit(None, &rules.to_rule_file())?;
            }
        }
        Cmd::Pipeline(args) => {
            let cfg = args.resolve(&out_dir)?;
            let report = run_pipeline(&cfg)?;
            emit(None, &report.render(ReportFormat::Table)?)?;
            eprintln!("artifacts in {}", cfg.paths.out_dir.display());
        }
        Cmd::Synth {
            lang,
            n,
            seed,
            output,
        } => {
            let sampler = match lang.as_str() {
                "wolof" | "wo" => SentenceSampler::wolof(),
                "french" | "fr" => SentenceSampler::french(),
                other => bail!("unknown language {other:?} (expected wolof or french)"),
            };
            let sents: Vec<Sentence> = sampler.distinct(n, seed);
            match output {
                Some(p) => {
                    ensure_parent(&p)?;
                    write_sentences(&p, sents.iter().map(Sentence::as_str))?;
                }
                None => emit(None, &sents.iter().map(|s| format!("{s}\n")).collect::<String>())?,
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
