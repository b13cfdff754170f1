//! Run configuration: a TOML file with one section per stage. Every
//! field has a default; flag overrides win over the file and both are
//! recorded in the stage manifest.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::corpus::InputFormat;
use crate::error::{Error, Result};
use crate::sentiment::Engine;
use crate::textprep::WordCategory;

pub const CONFIG_ENV_VAR: &str = "REVIEWKIT_CONFIG";
pub const DEFAULT_CONFIG_PATH: &str = "reviewkit.toml";

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub input: InputConfig,
    pub filter: FilterConfig,
    pub lexicons: LexiconConfig,
    pub preprocess: PreprocessConfig,
    pub sentiment: SentimentConfig,
    pub lda: LdaSection,
    pub coherence: CoherenceConfig,
    pub stats: StatsConfig,
    pub characterize: CharacterizeConfig,
    pub synth: SynthConfig,
    pub output: OutputConfig,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InputConfig {
    pub reviews: Option<PathBuf>,
    pub format: Option<String>,
    pub courses: Option<PathBuf>,
    pub external_labels: Option<PathBuf>,
}

impl InputConfig {
    pub fn format(&self) -> Result<InputFormat> {
        match &self.format {
            None => Ok(InputFormat::Jsonl),
            Some(name) => name.parse(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FilterConfig {
    /// Language code to keep; `None` skips language filtering.
    pub language: Option<String>,
    pub min_reviews: usize,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig {
            language: Some("en".to_string()),
            min_reviews: 1,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LexiconConfig {
    pub stopwords: Option<PathBuf>,
    pub category: Option<PathBuf>,
    pub lemma_exceptions: Option<PathBuf>,
    pub valence: Option<PathBuf>,
    pub boosters: Option<PathBuf>,
    pub negators: Option<PathBuf>,
    pub polarity: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PreprocessConfig {
    /// Nomination threshold: words occurring strictly more often are
    /// listed as categorization candidates.
    pub min_count: u64,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig { min_count: 500 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SentimentConfig {
    pub engine: String,
    pub pos_threshold: f64,
    pub neg_threshold: f64,
    pub alpha: f64,
    pub negation_factor: f64,
    /// Score whitespace-split raw text instead of cleaned tokens.
    pub score_raw_text: bool,
}

impl Default for SentimentConfig {
    fn default() -> Self {
        SentimentConfig {
            engine: "valence_rule".to_string(),
            pos_threshold: 0.1,
            neg_threshold: -0.1,
            alpha: 15.0,
            negation_factor: -0.74,
            score_raw_text: false,
        }
    }
}

impl SentimentConfig {
    pub fn engine(&self) -> Result<Engine> {
        match self.engine.as_str() {
            "valence_rule" => Ok(Engine::ValenceRule),
            "polarity_avg" => Ok(Engine::PolarityAvg),
            "external" => Ok(Engine::External),
            other => Err(Error::invalid_config(format!(
                "sentiment.engine: unknown engine {other:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LdaSection {
    pub qual: ModelConfig,
    pub content: ModelConfig,
}

impl LdaSection {
    pub fn model(&self, which: WordCategory) -> &ModelConfig {
        match which {
            WordCategory::Qualitative => &self.qual,
            WordCategory::Content => &self.content,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub k: usize,
    /// Document prior; omitted means 50/K.
    pub alpha: Option<f64>,
    pub beta: f64,
    pub iterations: usize,
    pub burn_in: usize,
    pub seed: u64,
    /// Training docs override (defaults to the stage's projected docs).
    pub docs: Option<PathBuf>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            k: 5,
            alpha: None,
            beta: 0.01,
            iterations: 1000,
            burn_in: 100,
            seed: 42,
            docs: None,
        }
    }
}

impl ModelConfig {
    pub fn lda_config(&self) -> crate::lda::LdaConfig {
        crate::lda::LdaConfig {
            k: self.k,
            alpha: self.alpha,
            beta: self.beta,
            iterations: self.iterations,
            burn_in: self.burn_in,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CoherenceConfig {
    /// Which projection to sweep: "qual" or "content".
    pub model: String,
    pub k_min: usize,
    pub k_max: usize,
    pub step: usize,
    pub top_n: usize,
    pub window: usize,
    pub epsilon: f64,
    pub iterations: usize,
    pub seed: u64,
    pub docs: Option<PathBuf>,
}

impl Default for CoherenceConfig {
    fn default() -> Self {
        CoherenceConfig {
            model: "qual".to_string(),
            k_min: 2,
            k_max: 10,
            step: 1,
            top_n: 10,
            window: 110,
            epsilon: 1e-12,
            iterations: 200,
            seed: 1234,
            docs: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StatsConfig {
    pub bin_edges: Vec<f64>,
    /// Projection used for the sentiment-group MANOVA.
    pub manova_model: String,
    pub permutations: usize,
    pub seed: u64,
}

impl Default for StatsConfig {
    fn default() -> Self {
        StatsConfig {
            bin_edges: vec![1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0, 4.5, 5.0],
            manova_model: "qual".to_string(),
            permutations: 999,
            seed: 99,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CharacterizeConfig {
    /// "n_reviews" (default) or "mean_rating".
    pub order_by: String,
    /// Words per topic used for default display labels.
    pub top_words: usize,
    /// Optional label-editing files: `topic_id<TAB>label` per line.
    pub qual_labels: Option<PathBuf>,
    pub content_labels: Option<PathBuf>,
}

impl Default for CharacterizeConfig {
    fn default() -> Self {
        CharacterizeConfig {
            order_by: "n_reviews".to_string(),
            top_words: 5,
            qual_labels: None,
            content_labels: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthConfig {
    pub k: usize,
    pub vocab_size: usize,
    pub docs: usize,
    pub doc_len: usize,
    pub alpha: f64,
    pub beta: f64,
    pub seed: u64,
    pub courses: usize,
    pub empty_courses: usize,
    /// `[[rating, share], ...]`; the biased default mirrors the observed
    /// full-collection distribution.
    pub rating_mix: Vec<(f64, f64)>,
    pub language_mix: Vec<(String, f64)>,
    /// "synthetic" (generated words) or "lexicon" (drawn from the bundled
    /// category lexicon so the corpus survives projection).
    pub vocabulary_source: String,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            k: 3,
            vocab_size: 60,
            docs: 100,
            doc_len: 40,
            alpha: 0.1,
            beta: 0.5,
            seed: 42,
            courses: 10,
            empty_courses: 0,
            rating_mix: crate::synth::PlantedSpec::biased_rating_mix(),
            language_mix: vec![("en".to_string(), 0.9), ("es".to_string(), 0.1)],
            vocabulary_source: "lexicon".to_string(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: PathBuf::from("out"),
        }
    }
}

impl RunConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::invalid_config(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// Field-level validation: referenced files must exist, enums and
    /// numeric ranges must parse.
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        let mut need_file = |field: &str, path: &Option<PathBuf>| {
            if let Some(p) = path {
                if !p.exists() {
                    problems.push(format!("{field}: file {} does not exist", p.display()));
                }
            }
        };
        need_file("input.reviews", &self.input.reviews);
        need_file("input.courses", &self.input.courses);
        need_file("input.external_labels", &self.input.external_labels);
        need_file("lexicons.stopwords", &self.lexicons.stopwords);
        need_file("lexicons.category", &self.lexicons.category);
        need_file("lexicons.lemma_exceptions", &self.lexicons.lemma_exceptions);
        need_file("lexicons.valence", &self.lexicons.valence);
        need_file("lexicons.boosters", &self.lexicons.boosters);
        need_file("lexicons.negators", &self.lexicons.negators);
        need_file("lexicons.polarity", &self.lexicons.polarity);
        need_file("characterize.qual_labels", &self.characterize.qual_labels);
        need_file("characterize.content_labels", &self.characterize.content_labels);
        need_file("lda.qual.docs", &self.lda.qual.docs);
        need_file("lda.content.docs", &self.lda.content.docs);
        need_file("coherence.docs", &self.coherence.docs);

        if let Err(e) = self.input.format() {
            problems.push(e.to_string());
        }
        if let Err(e) = self.sentiment.engine() {
            problems.push(e.to_string());
        }
        if self.sentiment.neg_threshold > self.sentiment.pos_threshold {
            problems.push("sentiment: neg_threshold must be <= pos_threshold".to_string());
        }
        if self.filter.min_reviews < 1 {
            problems.push("filter.min_reviews must be at least 1".to_string());
        }
        if !matches!(self.coherence.model.as_str(), "qual" | "content") {
            problems.push(format!(
                "coherence.model: expected \"qual\" or \"content\", got {:?}",
                self.coherence.model
            ));
        }
        if !matches!(self.stats.manova_model.as_str(), "qual" | "content") {
            problems.push(format!(
                "stats.manova_model: expected \"qual\" or \"content\", got {:?}",
                self.stats.manova_model
            ));
        }
        if !matches!(self.characterize.order_by.as_str(), "n_reviews" | "mean_rating") {
            problems.push(format!(
                "characterize.order_by: expected \"n_reviews\" or \"mean_rating\", got {:?}",
                self.characterize.order_by
            ));
        }
        if !matches!(self.synth.vocabulary_source.as_str(), "synthetic" | "lexicon") {
            problems.push(format!(
                "synth.vocabulary_source: expected \"synthetic\" or \"lexicon\", got {:?}",
                self.synth.vocabulary_source
            ));
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::invalid_config(problems.join("; ")))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        let config = RunConfig::default();
        config.validate().unwrap();
        assert_eq!(config.filter.min_reviews, 1);
        assert_eq!(config.lda.qual.k, 5);
        assert_eq!(config.sentiment.engine().unwrap(), Engine::ValenceRule);
    }

    #[test]
    fn toml_round_trip() {
        let config = RunConfig::default();
        let text = config.to_toml();
        let parsed = RunConfig::parse(&text).unwrap();
        assert_eq!(parsed.to_toml(), text);
    }

    #[test]
    fn partial_config_fills_defaults() {
        let config = RunConfig::parse(
            r#"
[filter]
language = "es"

[lda.qual]
k = 7
seed = 5
"#,
        )
        .unwrap();
        assert_eq!(config.filter.language.as_deref(), Some("es"));
        assert_eq!(config.filter.min_reviews, 1);
        assert_eq!(config.lda.qual.k, 7);
        assert_eq!(config.lda.content.k, 5);
    }

    #[test]
    fn unknown_fields_are_rejected() {
        assert!(RunConfig::parse("[filter]\nmin_review = 2\n").is_err());
    }

    #[test]
    fn missing_files_fail_validation_with_field_names() {
        let config = RunConfig::parse(
            r#"
[input]
reviews = "/nonexistent/reviews.jsonl"
"#,
        )
        .unwrap();
        let err = config.validate().unwrap_err().to_string();
        assert!(err.contains("input.reviews"), "{err}");
    }

    #[test]
    fn bad_enum_values_fail_validation() {
        let config = RunConfig::parse("[sentiment]\nengine = \"flair\"\n").unwrap();
        assert!(config.validate().is_err());
        let config = RunConfig::parse("[coherence]\nmodel = \"both\"\n").unwrap();
        assert!(config.validate().is_err());
    }
}
