//! Text preprocessing: cleaning, tokenization, POS-lite lemmatization,
//! stopword removal, frequency-based word nomination, and projection onto
//! the two analysis vocabularies.
//!
//! Everything here is a pure function over immutable inputs, so the whole
//! pipeline is deterministic: the same corpus and configuration always yield
//! a byte-identical lemma stream.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A preprocessed review: ordered lowercase lemmas.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenDoc {
    pub review_id: String,
    pub lemmas: Vec<String>,
}

/// The two hand-built analysis vocabularies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum WordCategory {
    Qualitative,
    Content,
}

impl fmt::Display for WordCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WordCategory::Qualitative => write!(f, "Qualitative"),
            WordCategory::Content => write!(f, "Content"),
        }
    }
}

/// word → category mapping driving vocabulary projection.
///
/// File format: one `word<TAB>category` per line, `#` comments, category
/// `Q` or `C`. A word may appear in at most one category.
#[derive(Debug, Clone)]
pub struct CategoryLexicon {
    entries: BTreeMap<String, WordCategory>,
}

impl CategoryLexicon {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (word, cat) = line.split_once('\t').ok_or_else(|| {
                Error::invalid_input(format!(
                    "category lexicon line {}: expected word<TAB>category",
                    lineno + 1
                ))
            })?;
            let word = word.trim().to_lowercase();
            let category = match cat.trim() {
                "Q" | "q" => WordCategory::Qualitative,
                "C" | "c" => WordCategory::Content,
                other => {
                    return Err(Error::invalid_input(format!(
                        "category lexicon line {}: unknown category {other:?}",
                        lineno + 1
                    )))
                }
            };
            if let Some(prev) = entries.insert(word.clone(), category) {
                if prev != category {
                    return Err(Error::invalid_input(format!(
                        "category lexicon line {}: {word:?} assigned to both {prev} and {category}",
                        lineno + 1
                    )));
                }
            }
        }
        Ok(CategoryLexicon { entries })
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// The bundled starter lexicon (see `data/category_lexicon.tsv`).
    pub fn bundled() -> &'static CategoryLexicon {
        static BUNDLED: OnceLock<CategoryLexicon> = OnceLock::new();
        BUNDLED.get_or_init(|| {
            CategoryLexicon::parse(include_str!("../data/category_lexicon.tsv"))
                .expect("bundled category lexicon parses")
        })
    }

    pub fn category(&self, word: &str) -> Option<WordCategory> {
        self.entries.get(word).copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn count_of(&self, category: WordCategory) -> usize {
        self.entries.values().filter(|&&c| c == category).count()
    }

    pub fn words_of(&self, category: WordCategory) -> impl Iterator<Item = &str> {
        self.entries
            .iter()
            .filter(move |(_, &c)| c == category)
            .map(|(w, _)| w.as_str())
    }
}

/// Stopword set; file format is one word per line, `#` comments.
#[derive(Debug, Clone)]
pub struct StopwordList {
    words: BTreeSet<String>,
}

impl StopwordList {
    pub fn parse(text: &str) -> Self {
        let words = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(str::to_lowercase)
            .collect();
        StopwordList { words }
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(Self::parse(&text))
    }

    pub fn bundled() -> &'static StopwordList {
        static BUNDLED: OnceLock<StopwordList> = OnceLock::new();
        BUNDLED.get_or_init(|| StopwordList::parse(include_str!("../data/stopwords_en.txt")))
    }

    pub fn contains(&self, word: &str) -> bool {
        self.words.contains(word)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.words.iter().map(String::as_str)
    }
}

/// Remove URLs, digits, punctuation and control characters; collapse
/// whitespace; lowercase. Idempotent.
pub fn clean_text(raw: &str) -> String {
    static URL: OnceLock<Regex> = OnceLock::new();
    let url = URL.get_or_init(|| Regex::new(r"(https?://\S+|www\.\S+)").expect("static regex"));

    let lowered = raw.to_lowercase();
    let no_urls = url.replace_all(&lowered, " ");
    let mut out = String::with_capacity(no_urls.len());
    let mut last_space = true;
    for c in no_urls.chars() {
        if c.is_alphabetic() {
            out.push(c);
            last_space = false;
        } else if !last_space {
            out.push(' ');
            last_space = true;
        }
    }
    while out.ends_with(' ') {
        out.pop();
    }
    out
}

/// Split cleaned text on whitespace, dropping tokens shorter than 2 chars.
pub fn tokenize(cleaned: &str) -> Vec<String> {
    cleaned
        .split_whitespace()
        .filter(|t| t.chars().count() >= 2)
        .map(str::to_string)
        .collect()
}

/// Exception-table + suffix-rule lemmatizer.
///
/// Tokens are first looked up in an exception table (irregular forms and
/// words the rules would mangle), then run through suffix rules gated by a
/// suffix-based part-of-speech guess: `-ing`/`-ed` take verb rules, `-s`
/// noun rules, `-er`/`-est` adjective rules. Unknown words pass through.
#[derive(Debug, Clone)]
pub struct Lemmatizer {
    exceptions: BTreeMap<String, String>,
}

impl Lemmatizer {
    pub fn parse(text: &str) -> Result<Self> {
        let mut exceptions = BTreeMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (word, lemma) = line.split_once('\t').ok_or_else(|| {
                Error::invalid_input(format!(
                    "lemma exception line {}: expected word<TAB>lemma",
                    lineno + 1
                ))
            })?;
            exceptions.insert(word.trim().to_lowercase(), lemma.trim().to_lowercase());
        }
        Ok(Lemmatizer { exceptions })
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn bundled() -> &'static Lemmatizer {
        static BUNDLED: OnceLock<Lemmatizer> = OnceLock::new();
        BUNDLED.get_or_init(|| {
            Lemmatizer::parse(include_str!("../data/lemma_exceptions.tsv"))
                .expect("bundled lemma exceptions parse")
        })
    }

    pub fn lemmatize(&self, tokens: &[String]) -> Vec<String> {
        tokens.iter().map(|t| self.lemma(t)).collect()
    }

    pub fn lemma(&self, token: &str) -> String {
        if let Some(lemma) = self.exceptions.get(token) {
            return lemma.clone();
        }
        let n = token.chars().count();
        // Suffix rules are ASCII; anything else passes through.
        if !token.is_ascii() {
            return token.to_string();
        }

        // Verb guess: -ing / -ed.
        if token.ends_with("ing") && n >= 6 {
            return finish_verb_stem(strip(token, 3));
        }
        if token.ends_with("ied") && n >= 5 {
            return format!("{}y", strip(token, 3));
        }
        if token.ends_with("eed") && n >= 6 {
            return strip(token, 1);
        }
        if token.ends_with("ed") && n >= 5 {
            return finish_verb_stem(strip(token, 2));
        }

        // Adjective guess: -est / -er.
        if token.ends_with("iest") && n >= 6 {
            return format!("{}y", strip(token, 4));
        }
        if token.ends_with("est") && n >= 6 {
            return finish_verb_stem(strip(token, 3));
        }
        if token.ends_with("ier") && n >= 5 {
            return format!("{}y", strip(token, 3));
        }
        if token.ends_with("er") && n >= 5 {
            return finish_verb_stem(strip(token, 2));
        }

        // Noun guess: -s.
        if token.ends_with('s')
            && n >= 3
            && !token.ends_with("ss")
            && !token.ends_with("us")
            && !token.ends_with("is")
        {
            if token.ends_with("ies") && n >= 5 {
                return format!("{}y", strip(token, 3));
            }
            if token.ends_with("sses")
                || token.ends_with("xes")
                || token.ends_with("ches")
                || token.ends_with("shes")
                || token.ends_with("zes")
                || token.ends_with("oes")
            {
                return strip(token, 2);
            }
            return strip(token, 1);
        }

        token.to_string()
    }
}

fn strip(token: &str, suffix_len: usize) -> String {
    let keep = token.chars().count() - suffix_len;
    token.chars().take(keep).collect()
}

/// Undouble trailing consonants (running → run) and restore a dropped `e`
/// after the stems Porter treats specially (creat → create).
fn finish_verb_stem(mut stem: String) -> String {
    let chars: Vec<char> = stem.chars().collect();
    let len = chars.len();
    if len >= 4
        && chars[len - 1] == chars[len - 2]
        && matches!(chars[len - 1], 'b' | 'd' | 'g' | 'm' | 'n' | 'p' | 'r' | 't')
    {
        stem.pop();
        return stem;
    }
    if len >= 4 && (stem.ends_with("at") || stem.ends_with("bl") || stem.ends_with("iz")) {
        stem.push('e');
    }
    stem
}

/// Drop stoplist members, preserving order and multiplicity of the rest.
pub fn remove_stopwords(lemmas: &[String], stoplist: &StopwordList) -> Vec<String> {
    lemmas
        .iter()
        .filter(|l| !stoplist.contains(l))
        .cloned()
        .collect()
}

/// Corpus-wide lemma occurrence counts.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrequencyTable {
    counts: BTreeMap<String, u64>,
    total_tokens: u64,
}

impl FrequencyTable {
    pub fn count(&self, word: &str) -> u64 {
        self.counts.get(word).copied().unwrap_or(0)
    }

    pub fn total_tokens(&self) -> u64 {
        self.total_tokens
    }

    pub fn distinct_words(&self) -> usize {
        self.counts.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, u64)> {
        self.counts.iter().map(|(w, &c)| (w.as_str(), c))
    }
}

/// Exact corpus-wide counts over the lemma stream.
pub fn build_frequency_table(docs: &[TokenDoc]) -> FrequencyTable {
    let mut counts: BTreeMap<String, u64> = BTreeMap::new();
    let mut total = 0u64;
    for doc in docs {
        for lemma in &doc.lemmas {
            *counts.entry(lemma.clone()).or_insert(0) += 1;
            total += 1;
        }
    }
    FrequencyTable {
        counts,
        total_tokens: total,
    }
}

/// Words occurring strictly more than `min_count` times, ordered by
/// descending count then lexicographically.
pub fn nominate_candidates(table: &FrequencyTable, min_count: u64) -> Vec<String> {
    let mut hits: Vec<(&String, u64)> = table
        .counts
        .iter()
        .filter(|(_, &c)| c > min_count)
        .map(|(w, &c)| (w, c))
        .collect();
    hits.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    hits.into_iter().map(|(w, _)| w.clone()).collect()
}

/// Keep only the lemmas belonging to `category`, preserving order and
/// multiplicity. Output may be empty; callers flag empty projections.
pub fn project_vocabulary(
    doc: &TokenDoc,
    lexicon: &CategoryLexicon,
    category: WordCategory,
) -> TokenDoc {
    TokenDoc {
        review_id: doc.review_id.clone(),
        lemmas: doc
            .lemmas
            .iter()
            .filter(|l| lexicon.category(l) == Some(category))
            .cloned()
            .collect(),
    }
}

/// Full per-review pipeline: clean → tokenize → lemmatize → stopwords.
pub fn preprocess_review(
    review_id: &str,
    text: &str,
    lemmatizer: &Lemmatizer,
    stoplist: &StopwordList,
) -> TokenDoc {
    let cleaned = clean_text(text);
    let tokens = tokenize(&cleaned);
    let lemmas = lemmatizer.lemmatize(&tokens);
    TokenDoc {
        review_id: review_id.to_string(),
        lemmas: remove_stopwords(&lemmas, stoplist),
    }
}
