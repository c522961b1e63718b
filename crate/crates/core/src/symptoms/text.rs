//! Tokenization, keyword lexicons and retweet removal.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use crate::error::{Error, Result};

use super::Tweet;

/// Terms naming the disease itself. They describe news and opinion far more
/// often than a person's symptoms, so they never count as keywords.
pub const EXPLICIT_TERMS: &[&str] = &[
    "coronavirus",
    "corona",
    "covid",
    "covid19",
    "covid-19",
    "sars-cov-2",
    "sarscov2",
    "pandemic",
];

/// Lowercased word tokens. Letters, digits, `-` and `'` are word characters.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !(c.is_alphanumeric() || c == '-' || c == '\''))
        .map(|t| t.trim_matches(|c| c == '-' || c == '\''))
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Symptom keywords per language tag. Multi-word entries match as
/// consecutive tokens.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Lexicon {
    by_lang: BTreeMap<String, Vec<Vec<String>>>,
}

impl Lexicon {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a keyword; explicit disease terms are silently ignored.
    pub fn add(&mut self, lang: &str, keyword: &str) {
        let tokens = tokenize(keyword);
        if tokens.is_empty() || tokens.iter().all(|t| EXPLICIT_TERMS.contains(&t.as_str())) {
            return;
        }
        let entry = self.by_lang.entry(lang.to_lowercase()).or_default();
        if !entry.contains(&tokens) {
            entry.push(tokens);
        }
    }

    pub fn from_pairs<'a>(pairs: impl IntoIterator<Item = (&'a str, &'a str)>) -> Self {
        let mut lex = Self::new();
        for (lang, kw) in pairs {
            lex.add(lang, kw);
        }
        lex
    }

    pub fn languages(&self) -> impl Iterator<Item = &str> {
        self.by_lang.keys().map(String::as_str)
    }

    pub fn is_empty(&self) -> bool {
        self.by_lang.values().all(Vec::is_empty)
    }

    pub fn keywords(&self, lang: &str) -> &[Vec<String>] {
        self.by_lang.get(&lang.to_lowercase()).map_or(&[], Vec::as_slice)
    }

    pub fn load_tsv(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_tsv(f)
    }

    /// Reads `lang<TAB>keyword` lines; blank lines and `#` comments skipped.
    pub fn read_tsv(input: impl Read) -> Result<Self> {
        let mut lex = Self::new();
        for (i, line) in BufReader::new(input).lines().enumerate() {
            let line = line.map_err(|e| Error::Data(format!("lexicon line {}: {e}", i + 1)))?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (lang, kw) = line
                .split_once('\t')
                .ok_or_else(|| Error::Data(format!("lexicon line {}: expected lang<TAB>keyword", i + 1)))?;
            lex.add(lang.trim(), kw.trim());
        }
        if lex.is_empty() {
            return Err(Error::Data("lexicon has no keywords".into()));
        }
        Ok(lex)
    }

    /// Small built-in English, German, Italian, Portuguese and Spanish lists.
    pub fn builtin() -> Self {
        const WORDS: &[(&str, &str)] = &[
            ("en", "fever"),
            ("en", "cough"),
            ("en", "coughing"),
            ("en", "sore throat"),
            ("en", "shortness of breath"),
            ("en", "headache"),
            ("en", "fatigue"),
            ("en", "chills"),
            ("en", "loss of smell"),
            ("en", "loss of taste"),
            ("en", "muscle pain"),
            ("en", "diarrhea"),
            ("en", "temperature"),
            ("de", "fieber"),
            ("de", "husten"),
            ("de", "halsschmerzen"),
            ("de", "kopfschmerzen"),
            ("de", "atemnot"),
            ("it", "febbre"),
            ("it", "tosse"),
            ("it", "mal di gola"),
            ("it", "mal di testa"),
            ("pt", "febre"),
            ("pt", "tosse"),
            ("pt", "dor de garganta"),
            ("pt", "dor de cabeça"),
            ("es", "fiebre"),
            ("es", "tos"),
            ("es", "dolor de garganta"),
            ("es", "dolor de cabeza"),
        ];
        Self::from_pairs(WORDS.iter().copied())
    }
}

fn contains_phrase(tokens: &[String], phrase: &[String]) -> bool {
    !phrase.is_empty() && tokens.windows(phrase.len()).any(|w| w == phrase)
}

/// True when at least one keyword for `lang` occurs on token boundaries.
pub fn keyword_filter(text: &str, lang: &str, lexicon: &Lexicon) -> bool {
    let tokens = tokenize(text);
    lexicon
        .keywords(lang)
        .iter()
        .any(|kw| contains_phrase(&tokens, kw))
}

pub fn is_retweet(tweet: &Tweet) -> bool {
    tweet.retweeted || tweet.text.trim_start().starts_with("#RT")
}

pub fn drop_retweets(tweets: &[Tweet]) -> Vec<Tweet> {
    tweets.iter().filter(|t| !is_retweet(t)).cloned().collect()
}
