//! Ordered official→conventional rewrite rules.
//!
//! A rule set is a list of regular-expression rewrites grouped into three
//! stages (`normalize`, `main`, `post`). Application is strictly sequential:
//! each rule rewrites every match in the sentence before the next rule runs,
//! so later rules see the output of earlier ones.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;
use std::sync::OnceLock;

use regex::{Captures, Regex};
use thiserror::Error;

use crate::corpus::{ParallelCorpus, Sentence, SentencePair};

#[derive(Debug, Error)]
pub enum RuleError {
    #[error("rule {index}: pattern `{pattern}` does not compile: {message}")]
    Compile {
        index: usize,
        pattern: String,
        message: String,
    },
    #[error("rule {index}: replacement references group {group} but the pattern has {available}")]
    BadReference {
        index: usize,
        group: usize,
        available: usize,
    },
    #[error("line {line}: {message}")]
    Schema { line: usize, message: String },
    #[error("rule {index}: stage `{stage}` follows a later stage")]
    StageOrder { index: usize, stage: Stage },
    #[error("{path}: {err}")]
    Io {
        path: std::path::PathBuf,
        #[source]
        err: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Stage {
    Normalize,
    Main,
    Post,
}

impl Stage {
    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Normalize => "normalize",
            Stage::Main => "main",
            Stage::Post => "post",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Stage {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "normalize" => Ok(Stage::Normalize),
            "main" => Ok(Stage::Main),
            "post" => Ok(Stage::Post),
            other => Err(format!("unknown stage `{other}`")),
        }
    }
}

/// One piece of a parsed replacement template.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TemplatePart {
    Literal(String),
    Group(usize),
}

/// Parses `\1`-style templates (the notation rule files use).
pub(crate) fn parse_template(template: &str) -> Vec<TemplatePart> {
    let mut parts = Vec::new();
    let mut lit = String::new();
    let mut chars = template.chars().peekable();
    while let Some(c) = chars.next() {
        if c == '\\' {
            match chars.peek() {
                Some(d) if d.is_ascii_digit() => {
                    let mut n = 0usize;
                    while let Some(d) = chars.peek().and_then(|d| d.to_digit(10)) {
                        n = n * 10 + d as usize;
                        chars.next();
                    }
                    if !lit.is_empty() {
                        parts.push(TemplatePart::Literal(std::mem::take(&mut lit)));
                    }
                    parts.push(TemplatePart::Group(n));
                }
                Some('\\') => {
                    chars.next();
                    lit.push('\\');
                }
                _ => lit.push('\\'),
            }
        } else {
            lit.push(c);
        }
    }
    if !lit.is_empty() {
        parts.push(TemplatePart::Literal(lit));
    }
    parts
}

/// Uppercases the first character of `s`.
pub(crate) fn capitalize_first(s: &str) -> String {
    let mut chars = s.chars();
    match chars.next() {
        Some(first) => first.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}

#[derive(Debug, Clone)]
pub struct RewriteRule {
    pub stage: Stage,
    pub pattern: String,
    pub replacement: String,
    /// When the match starts with an uppercase letter, the replacement's
    /// first letter is uppercased too (`Jàppal` → `Diappal`).
    pub case_carry: bool,
    regex: Regex,
    template: Vec<TemplatePart>,
}

impl RewriteRule {
    /// Compiles a rule; `index` is only used in error messages.
    pub fn new(
        index: usize,
        stage: Stage,
        pattern: &str,
        replacement: &str,
        case_carry: bool,
    ) -> Result<Self, RuleError> {
        let regex = Regex::new(pattern).map_err(|e| RuleError::Compile {
            index,
            pattern: pattern.to_string(),
            message: e.to_string(),
        })?;
        let template = parse_template(replacement);
        let available = regex.captures_len() - 1;
        for part in &template {
            if let TemplatePart::Group(g) = part {
                if *g > available {
                    return Err(RuleError::BadReference {
                        index,
                        group: *g,
                        available,
                    });
                }
            }
        }
        Ok(RewriteRule {
            stage,
            pattern: pattern.to_string(),
            replacement: replacement.to_string(),
            case_carry,
            regex,
            template,
        })
    }

    pub fn regex(&self) -> &Regex {
        &self.regex
    }

    /// Instantiates the replacement for a match given its text and groups.
    pub(crate) fn render(&self, matched: &str, group: impl Fn(usize) -> Option<String>) -> String {
        let mut out = String::new();
        for part in &self.template {
            match part {
                TemplatePart::Literal(l) => out.push_str(l),
                TemplatePart::Group(g) => {
                    if let Some(v) = group(*g) {
                        out.push_str(&v);
                    }
                }
            }
        }
        let starts_upper = matched.chars().next().is_some_and(char::is_uppercase);
        if self.case_carry && starts_upper {
            out = capitalize_first(&out);
        }
        out
    }

    pub fn apply(&self, text: &str) -> String {
        self.regex
            .replace_all(text, |caps: &Captures<'_>| {
                self.render(&caps[0], |g| caps.get(g).map(|m| m.as_str().to_string()))
            })
            .into_owned()
    }
}

#[derive(Debug, Clone)]
pub struct RewriteRuleSet {
    pub name: String,
    pub version: String,
    rules: Vec<RewriteRule>,
}

impl RewriteRuleSet {
    /// Checks that stages are non-decreasing.
    pub fn new(name: &str, version: &str, rules: Vec<RewriteRule>) -> Result<Self, RuleError> {
        for (i, w) in rules.windows(2).enumerate() {
            if w[1].stage < w[0].stage {
                return Err(RuleError::StageOrder {
                    index: i + 1,
                    stage: w[1].stage,
                });
            }
        }
        Ok(RewriteRuleSet {
            name: name.to_string(),
            version: version.to_string(),
            rules,
        })
    }

    pub fn rules(&self) -> &[RewriteRule] {
        &self.rules
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    pub fn stage_count(&self) -> usize {
        let mut stages: Vec<Stage> = self.rules.iter().map(|r| r.stage).collect();
        stages.dedup();
        stages.len()
    }

    /// Applies all rules in order to raw text.
    pub fn apply_str(&self, text: &str) -> String {
        let mut cur = text.to_string();
        for rule in &self.rules {
            cur = rule.apply(&cur);
        }
        cur
    }

    /// Serializes in the rule-file format accepted by [`parse_ruleset`].
    pub fn to_rule_file(&self) -> String {
        let mut out = format!("# name: {}\n# version: {}\n", self.name, self.version);
        for r in &self.rules {
            let flags = if r.case_carry { "case" } else { "-" };
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\n",
                r.stage, r.pattern, r.replacement, flags
            ));
        }
        out
    }
}

/// Parses the line-oriented rule format:
/// `stage<TAB>pattern<TAB>replacement<TAB>flags`, `#` starting a comment
/// line. `flags` is `-` or a comma-separated list; `case` enables case
/// carry-over. `# name:` and `# version:` header comments are honored.
pub fn parse_ruleset(text: &str) -> Result<RewriteRuleSet, RuleError> {
    let mut name = String::from("unnamed");
    let mut version = String::from("0");
    let mut rules = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.strip_suffix('\r').unwrap_or(line);
        if line.trim().is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            let comment = comment.trim();
            if let Some(v) = comment.strip_prefix("name:") {
                name = v.trim().to_string();
            } else if let Some(v) = comment.strip_prefix("version:") {
                version = v.trim().to_string();
            }
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if !(3..=4).contains(&fields.len()) {
            return Err(RuleError::Schema {
                line: lineno + 1,
                message: format!("expected 3 or 4 tab-separated fields, found {}", fields.len()),
            });
        }
        let stage: Stage = fields[0].parse().map_err(|message| RuleError::Schema {
            line: lineno + 1,
            message,
        })?;
        let mut case_carry = false;
        if let Some(flags) = fields.get(3) {
            for flag in flags.split(',').map(str::trim) {
                match flag {
                    "" | "-" => {}
                    "case" => case_carry = true,
                    other => {
                        return Err(RuleError::Schema {
                            line: lineno + 1,
                            message: format!("unknown flag `{other}`"),
                        })
                    }
                }
            }
        }
        rules.push(RewriteRule::new(
            rules.len(),
            stage,
            fields[1],
            fields[2],
            case_carry,
        )?);
    }
    RewriteRuleSet::new(&name, &version, rules)
}

/// Reads and compiles a rule file.
pub fn compile_ruleset(path: impl AsRef<Path>) -> Result<RewriteRuleSet, RuleError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|err| RuleError::Io {
        path: path.to_path_buf(),
        err,
    })?;
    parse_ruleset(&text)
}

pub const BUILTIN_NAME: &str = "beqi-v1";

/// The built-in rule file.
///
/// Accent stripping runs first so that `J` + accented vowel is caught by the
/// `J`-rules. The `u` rules run before `ë+` → `eu`; otherwise the `u` that
/// `ë` produces would itself become `ou`. The `u([blt]+)` and `u\b` rows
/// skip a `u` preceded by `o`: after `u+` every `u` sits in an `ou`, so they
/// never fire instead of doubling the `o`.
pub const BUILTIN_RULES: &str = "\
# name: beqi-v1
# version: 1
normalize\t[àÀ]\ta\tcase
normalize\t[éÉ]\te\tcase
normalize\t[óÓ]\to\tcase
main\t[ñÑ]+\tgn\tcase
main\t[ŋŊ]+\tng\tcase
main\tu+\tou\t-
main\t(^|[^o])u([blt]+)\t\\1ou\\2\t-
main\tq\tkh\t-
main\tx\tkh\t-
main\t(^|[^o])u\\b\t\\1ou\t-
main\të+\teu\t-
main\tc([aeiouy]{1,})\tth\\1\t-
main\tc{2}\\b\tthie\t-
main\t[Jj]([eao]{1,2})\tdi\\1\tcase
main\t[Jj]([i]+)\tdj\\1\tcase
main\t[Jj]([u]+)\tdio\\1\tcase
main\tth([aeouy]+)\tthi\\1\t-
post\t(\\w) ([aeiou])\\b\t\\1\\2\t-
post\t[Gg]([ae])\tgu\\1\tcase
";

/// The built-in `beqi-v1` rule set (compiled once).
pub fn builtin() -> &'static RewriteRuleSet {
    static RULES: OnceLock<RewriteRuleSet> = OnceLock::new();
    RULES.get_or_init(|| parse_ruleset(BUILTIN_RULES).expect("built-in rules compile"))
}

/// Looks up a rule set by built-in name, or compiles it from a file path.
pub fn resolve_ruleset(name_or_path: &str) -> Result<RewriteRuleSet, RuleError> {
    if name_or_path == BUILTIN_NAME {
        Ok(builtin().clone())
    } else {
        compile_ruleset(name_or_path)
    }
}

/// Applies every rule, stage by stage, in list order.
pub fn apply_rules(sentence: &Sentence, rules: &RewriteRuleSet) -> Sentence {
    Sentence {
        id: sentence.id,
        text: rules.apply_str(&sentence.text),
    }
}

/// Pairs each official sentence with its rule-generated noisy form.
pub fn noise_corpus(targets: &[Sentence], rules: &RewriteRuleSet) -> ParallelCorpus {
    use rayon::prelude::*;
    let pairs = targets
        .par_iter()
        .map(|t| SentencePair {
            source: apply_rules(t, rules),
            target: t.clone(),
        })
        .collect();
    ParallelCorpus::new(pairs)
}
