//! Lexicon sentiment engines, threshold labeling, external-label import,
//! and course-level aggregation.
//!
//! Two native engines are implemented: a valence-rule scorer (word order,
//! degree modifiers, negation, compound normalization) and a polarity-mean
//! scorer. A third engine slot imports labels produced by an external
//! classifier. Scorers consume cleaned, case-folded tokens by default;
//! lookups fold case so raw-case tokens also work.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, RejectRecord};
use crate::error::{Error, Result};
use crate::stats;

/// Booster decay by distance from the scored token (1, 2, 3 back).
const BOOSTER_DECAY: [f64; 3] = [1.0, 0.95, 0.9];
const LOOKBACK: usize = 3;

/// Which engine produced a score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Engine {
    ValenceRule,
    PolarityAvg,
    External,
}

impl fmt::Display for Engine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Engine::ValenceRule => write!(f, "valence_rule"),
            Engine::PolarityAvg => write!(f, "polarity_avg"),
            Engine::External => write!(f, "external"),
        }
    }
}

/// Discrete sentiment label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SentimentLabel {
    Positive,
    Neutral,
    Negative,
}

impl fmt::Display for SentimentLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SentimentLabel::Positive => write!(f, "Positive"),
            SentimentLabel::Neutral => write!(f, "Neutral"),
            SentimentLabel::Negative => write!(f, "Negative"),
        }
    }
}

/// Per-review sentiment value. `compound` is absent for external labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentimentScore {
    pub review_id: String,
    pub engine: Engine,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub compound: Option<f64>,
    pub label: SentimentLabel,
}

/// Valence lexicon with degree modifiers and negation cues.
#[derive(Debug, Clone)]
pub struct ValenceLexicon {
    valences: HashMap<String, f64>,
    boosters: HashMap<String, f64>,
    negators: HashSet<String>,
}

impl ValenceLexicon {
    pub fn new(
        valences: HashMap<String, f64>,
        boosters: HashMap<String, f64>,
        negators: HashSet<String>,
    ) -> Result<Self> {
        for (word, v) in &valences {
            if !(-4.0..=4.0).contains(v) {
                return Err(Error::invalid_input(format!(
                    "valence for {word:?} out of [-4, 4]: {v}"
                )));
            }
        }
        for (word, m) in &boosters {
            if *m <= 0.0 {
                return Err(Error::invalid_input(format!(
                    "booster magnitude for {word:?} must be positive: {m}"
                )));
            }
        }
        Ok(ValenceLexicon {
            valences,
            boosters,
            negators,
        })
    }

    pub fn parse(valences: &str, boosters: &str, negators: &str) -> Result<Self> {
        Self::new(
            parse_weighted(valences, "valence lexicon")?,
            parse_weighted(boosters, "booster file")?,
            negators
                .lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#'))
                .map(str::to_lowercase)
                .collect(),
        )
    }

    pub fn from_paths(
        valences: impl AsRef<Path>,
        boosters: impl AsRef<Path>,
        negators: impl AsRef<Path>,
    ) -> Result<Self> {
        let read = |p: &Path| std::fs::read_to_string(p).map_err(|e| Error::io(p, e));
        Self::parse(
            &read(valences.as_ref())?,
            &read(boosters.as_ref())?,
            &read(negators.as_ref())?,
        )
    }

    pub fn bundled() -> &'static ValenceLexicon {
        static BUNDLED: OnceLock<ValenceLexicon> = OnceLock::new();
        BUNDLED.get_or_init(|| {
            ValenceLexicon::parse(
                include_str!("../data/valence.tsv"),
                include_str!("../data/boosters.tsv"),
                include_str!("../data/negators.txt"),
            )
            .expect("bundled valence lexicon parses")
        })
    }

    pub fn valence(&self, word: &str) -> Option<f64> {
        self.valences.get(word).copied()
    }

    pub fn len(&self) -> usize {
        self.valences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.valences.is_empty()
    }

    /// Lexicon with every valence negated (used by sign-symmetry checks).
    pub fn negated(&self) -> ValenceLexicon {
        ValenceLexicon {
            valences: self.valences.iter().map(|(w, v)| (w.clone(), -v)).collect(),
            boosters: self.boosters.clone(),
            negators: self.negators.clone(),
        }
    }
}

/// Polarity lexicon for the averaging engine; values in [-1, 1].
#[derive(Debug, Clone)]
pub struct PolarityLexicon {
    polarities: HashMap<String, f64>,
    boosters: HashSet<String>,
}

impl PolarityLexicon {
    pub fn parse(polarities: &str, boosters: &str) -> Result<Self> {
        let map = parse_weighted(polarities, "polarity lexicon")?;
        for (word, p) in &map {
            if !(-1.0..=1.0).contains(p) {
                return Err(Error::invalid_input(format!(
                    "polarity for {word:?} out of [-1, 1]: {p}"
                )));
            }
        }
        Ok(PolarityLexicon {
            polarities: map,
            boosters: parse_weighted(boosters, "booster file")?
                .into_keys()
                .collect(),
        })
    }

    pub fn from_paths(polarities: impl AsRef<Path>, boosters: impl AsRef<Path>) -> Result<Self> {
        let read = |p: &Path| std::fs::read_to_string(p).map_err(|e| Error::io(p, e));
        Self::parse(&read(polarities.as_ref())?, &read(boosters.as_ref())?)
    }

    pub fn bundled() -> &'static PolarityLexicon {
        static BUNDLED: OnceLock<PolarityLexicon> = OnceLock::new();
        BUNDLED.get_or_init(|| {
            PolarityLexicon::parse(
                include_str!("../data/polarity.tsv"),
                include_str!("../data/boosters.tsv"),
            )
            .expect("bundled polarity lexicon parses")
        })
    }

    pub fn polarity(&self, word: &str) -> Option<f64> {
        self.polarities.get(word).copied()
    }

    pub fn len(&self) -> usize {
        self.polarities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.polarities.is_empty()
    }
}

fn parse_weighted(text: &str, what: &str) -> Result<HashMap<String, f64>> {
    let mut map = HashMap::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (word, value) = line.split_once('\t').ok_or_else(|| {
            Error::invalid_input(format!(
                "{what} line {}: expected word<TAB>value",
                lineno + 1
            ))
        })?;
        let value: f64 = value.trim().parse().map_err(|_| {
            Error::invalid_input(format!(
                "{what} line {}: bad value {:?}",
                lineno + 1,
                value.trim()
            ))
        })?;
        map.insert(word.trim().to_lowercase(), value);
    }
    Ok(map)
}

/// Valence-rule scorer options; both constants come from the published
/// description of the method and are configurable.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ValenceRuleOptions {
    /// Normalization constant in `s / sqrt(s^2 + alpha)`.
    pub alpha: f64,
    /// Multiplier applied when a negator precedes a lexicon hit.
    pub negation_factor: f64,
}

impl Default for ValenceRuleOptions {
    fn default() -> Self {
        ValenceRuleOptions {
            alpha: 15.0,
            negation_factor: -0.74,
        }
    }
}

/// Valence-rule compound over tokens: per-hit booster adjustment within a
/// three-token lookback (decayed with distance), negation flip, sum, and
/// normalization to [-1, 1]. Empty input scores 0.
pub fn score_valence_rule(
    tokens: &[impl AsRef<str>],
    lexicon: &ValenceLexicon,
    options: ValenceRuleOptions,
) -> f64 {
    let lowered: Vec<String> = tokens.iter().map(|t| t.as_ref().to_lowercase()).collect();
    let mut sum = 0.0;
    for (i, token) in lowered.iter().enumerate() {
        let Some(valence) = lexicon.valence(token) else {
            continue;
        };
        let mut adjusted = valence;
        let mut negated = false;
        for dist in 1..=LOOKBACK {
            if dist > i {
                break;
            }
            let prev = &lowered[i - dist];
            if let Some(&magnitude) = lexicon.boosters.get(prev) {
                adjusted += valence.signum() * magnitude * BOOSTER_DECAY[dist - 1];
            }
            if lexicon.negators.contains(prev) {
                negated = true;
            }
        }
        if negated {
            adjusted *= options.negation_factor;
        }
        sum += adjusted;
    }
    if sum == 0.0 {
        return 0.0;
    }
    (sum / (sum * sum + options.alpha).sqrt()).clamp(-1.0, 1.0)
}

/// Booster multiplier for the polarity-mean engine.
const POLARITY_BOOST: f64 = 1.3;

/// Mean polarity over lexicon hits; an immediately preceding booster scales
/// the following hit by 1.3 (clamped). No hits scores 0.
pub fn score_polarity_avg(tokens: &[impl AsRef<str>], lexicon: &PolarityLexicon) -> f64 {
    let lowered: Vec<String> = tokens.iter().map(|t| t.as_ref().to_lowercase()).collect();
    let mut sum = 0.0;
    let mut hits = 0usize;
    for (i, token) in lowered.iter().enumerate() {
        let Some(polarity) = lexicon.polarity(token) else {
            continue;
        };
        let mut adjusted = polarity;
        if i > 0 && lexicon.boosters.contains(&lowered[i - 1]) {
            adjusted = (adjusted * POLARITY_BOOST).clamp(-1.0, 1.0);
        }
        sum += adjusted;
        hits += 1;
    }
    if hits == 0 {
        0.0
    } else {
        (sum / hits as f64).clamp(-1.0, 1.0)
    }
}

/// Classification thresholds; defaults follow the compound > 0.1 rule with
/// an inclusive neutral band.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct LabelThresholds {
    pub positive: f64,
    pub negative: f64,
}

impl Default for LabelThresholds {
    fn default() -> Self {
        LabelThresholds {
            positive: 0.1,
            negative: -0.1,
        }
    }
}

/// Positive iff compound > positive threshold, Negative iff compound <
/// negative threshold, Neutral otherwise (boundaries inclusive).
pub fn label_from_compound(compound: f64, thresholds: LabelThresholds) -> SentimentLabel {
    debug_assert!(thresholds.negative <= thresholds.positive);
    if compound > thresholds.positive {
        SentimentLabel::Positive
    } else if compound < thresholds.negative {
        SentimentLabel::Negative
    } else {
        SentimentLabel::Neutral
    }
}

/// Score one review's tokens with the requested native engine.
pub fn score_review(
    review_id: &str,
    tokens: &[impl AsRef<str>],
    engine: Engine,
    valence: &ValenceLexicon,
    polarity: &PolarityLexicon,
    options: ValenceRuleOptions,
    thresholds: LabelThresholds,
) -> Result<SentimentScore> {
    let compound = match engine {
        Engine::ValenceRule => score_valence_rule(tokens, valence, options),
        Engine::PolarityAvg => score_polarity_avg(tokens, polarity),
        Engine::External => {
            return Err(Error::invalid_input(
                "external engine scores are imported, not computed",
            ))
        }
    };
    Ok(SentimentScore {
        review_id: review_id.to_string(),
        engine,
        compound: Some(compound),
        label: label_from_compound(compound, thresholds),
    })
}

#[derive(Debug, Deserialize)]
struct RawExternalLabel {
    review_id: Option<String>,
    label: Option<String>,
}

/// Result of importing external classifier labels.
#[derive(Debug, Clone, Default)]
pub struct ImportOutcome {
    pub scores: Vec<SentimentScore>,
    pub rejects: Vec<RejectRecord>,
}

/// Import external labels from JSONL `{review_id, label}`. Labels outside
/// {Positive, Negative, Neutral} are rejected with a diagnostic.
pub fn import_external_labels(path: impl AsRef<Path>) -> Result<ImportOutcome> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut outcome = ImportOutcome::default();
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let lineno = lineno + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawExternalLabel = match serde_json::from_str(&line) {
            Ok(r) => r,
            Err(e) => {
                outcome
                    .rejects
                    .push(RejectRecord {
                        line: lineno,
                        reason: "bad_json".into(),
                        detail: e.to_string(),
                    });
                continue;
            }
        };
        let Some(review_id) = raw.review_id.filter(|s| !s.is_empty()) else {
            outcome.rejects.push(RejectRecord {
                line: lineno,
                reason: "missing_review_id".into(),
                detail: String::new(),
            });
            continue;
        };
        let label = match raw.label.as_deref() {
            Some("Positive") => SentimentLabel::Positive,
            Some("Negative") => SentimentLabel::Negative,
            Some("Neutral") => SentimentLabel::Neutral,
            other => {
                outcome.rejects.push(RejectRecord {
                    line: lineno,
                    reason: "bad_label".into(),
                    detail: format!("review {review_id}: label {other:?}"),
                });
                continue;
            }
        };
        outcome.scores.push(SentimentScore {
            review_id,
            engine: Engine::External,
            compound: None,
            label,
        });
    }
    Ok(outcome)
}

/// review_ids in `scores` that do not resolve in the corpus.
pub fn unknown_review_ids(scores: &[SentimentScore], corpus: &Corpus) -> Vec<String> {
    scores
        .iter()
        .filter(|s| corpus.review_by_id(&s.review_id).is_none())
        .map(|s| s.review_id.clone())
        .collect()
}

/// Course-level sentiment summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CourseSentiment {
    pub course_id: String,
    /// Mean over scores carrying compounds; absent for external-only input.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_compound: Option<f64>,
    pub label_counts: BTreeMap<SentimentLabel, usize>,
    pub majority_label: SentimentLabel,
}

impl CourseSentiment {
    pub fn count(&self, label: SentimentLabel) -> usize {
        self.label_counts.get(&label).copied().unwrap_or(0)
    }

    pub fn scored_reviews(&self) -> usize {
        self.label_counts.values().sum()
    }
}

/// Aggregate review scores to course level: mean compound and majority
/// label (ties break to Neutral). Courses with zero scored reviews are
/// excluded and returned separately.
pub fn aggregate_course_sentiment(
    scores: &[SentimentScore],
    corpus: &Corpus,
) -> (Vec<CourseSentiment>, Vec<String>) {
    let mut per_course: BTreeMap<String, Vec<&SentimentScore>> = BTreeMap::new();
    for score in scores {
        if let Some(review) = corpus.review_by_id(&score.review_id) {
            per_course
                .entry(review.course_id.clone())
                .or_default()
                .push(score);
        }
    }

    let mut summaries = Vec::new();
    let mut excluded = Vec::new();
    for course in corpus.courses() {
        let Some(course_scores) = per_course.get(&course.course_id) else {
            excluded.push(course.course_id.clone());
            continue;
        };
        let mut label_counts: BTreeMap<SentimentLabel, usize> = BTreeMap::new();
        let mut compound_sum = 0.0;
        let mut compound_n = 0usize;
        for score in course_scores {
            *label_counts.entry(score.label).or_insert(0) += 1;
            if let Some(c) = score.compound {
                compound_sum += c;
                compound_n += 1;
            }
        }
        summaries.push(CourseSentiment {
            course_id: course.course_id.clone(),
            mean_compound: (compound_n > 0).then(|| compound_sum / compound_n as f64),
            majority_label: majority_label(&label_counts),
            label_counts,
        });
    }
    summaries.sort_by(|a, b| a.course_id.cmp(&b.course_id));
    excluded.sort();
    (summaries, excluded)
}

fn majority_label(counts: &BTreeMap<SentimentLabel, usize>) -> SentimentLabel {
    let max = counts.values().copied().max().unwrap_or(0);
    let leaders: Vec<SentimentLabel> = counts
        .iter()
        .filter(|(_, &c)| c == max)
        .map(|(&l, _)| l)
        .collect();
    if leaders.len() == 1 {
        leaders[0]
    } else {
        SentimentLabel::Neutral
    }
}

/// Correlation method for compound-vs-rating.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorrelationMethod {
    Pearson,
    Spearman,
}

/// Correlate review-level compounds with numeric ratings.
pub fn correlate_sentiment_rating(
    scores: &[SentimentScore],
    corpus: &Corpus,
    method: CorrelationMethod,
) -> Result<f64> {
    let mut compounds = Vec::new();
    let mut ratings = Vec::new();
    for score in scores {
        let (Some(compound), Some(review)) = (score.compound, corpus.review_by_id(&score.review_id))
        else {
            continue;
        };
        compounds.push(compound);
        ratings.push(review.rating.value());
    }
    if compounds.len() < 2 {
        return Err(Error::invalid_input(
            "need at least 2 paired (compound, rating) observations",
        ));
    }
    match method {
        CorrelationMethod::Pearson => stats::pearson(&compounds, &ratings),
        CorrelationMethod::Spearman => stats::spearman(&compounds, &ratings),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(items: &[&str]) -> Vec<String> {
        items.iter().map(|s| s.to_string()).collect()
    }

    fn opts() -> ValenceRuleOptions {
        ValenceRuleOptions::default()
    }

    #[test]
    fn empty_input_scores_zero() {
        let lex = ValenceLexicon::bundled();
        assert_eq!(score_valence_rule(&Vec::<String>::new(), lex, opts()), 0.0);
        assert_eq!(
            score_polarity_avg(&Vec::<String>::new(), PolarityLexicon::bundled()),
            0.0
        );
    }

    #[test]
    fn booster_raises_positive_compound() {
        let lex = ValenceLexicon::bundled();
        let plain = score_valence_rule(&toks(&["good"]), lex, opts());
        let boosted = score_valence_rule(&toks(&["very", "good"]), lex, opts());
        assert!(plain > 0.0);
        assert!(boosted > plain, "boosted {boosted} <= plain {plain}");
    }

    #[test]
    fn booster_lowers_negative_compound() {
        let lex = ValenceLexicon::bundled();
        let plain = score_valence_rule(&toks(&["bad"]), lex, opts());
        let boosted = score_valence_rule(&toks(&["very", "bad"]), lex, opts());
        assert!(plain < 0.0);
        assert!(boosted < plain);
    }

    #[test]
    fn negation_flips_sign_with_hand_traced_value() {
        // Hand trace with the bundled lexicon: good = +2.0.
        // [good]       s = 2.0,   compound = 2 / sqrt(4 + 15)
        // [not, good]  s = 2.0 * -0.74 = -1.48, compound = -1.48 / sqrt(1.48^2 + 15)
        let lex = ValenceLexicon::bundled();
        assert_eq!(lex.valence("good"), Some(2.0));

        let plain = score_valence_rule(&toks(&["good"]), lex, opts());
        let expected_plain = 2.0 / (4.0f64 + 15.0).sqrt();
        assert!((plain - expected_plain).abs() < 1e-12);

        let negated = score_valence_rule(&toks(&["not", "good"]), lex, opts());
        let s = 2.0 * -0.74;
        let expected_negated = s / (s * s + 15.0f64).sqrt();
        assert!((negated - expected_negated).abs() < 1e-12);
        assert!(negated < 0.0 && plain > 0.0);
    }

    #[test]
    fn booster_decays_with_distance() {
        let lex = ValenceLexicon::bundled();
        let d1 = score_valence_rule(&toks(&["very", "good"]), lex, opts());
        let d2 = score_valence_rule(&toks(&["very", "and", "good"]), lex, opts());
        let d3 = score_valence_rule(&toks(&["very", "and", "and", "good"]), lex, opts());
        let d4 = score_valence_rule(&toks(&["very", "and", "and", "and", "good"]), lex, opts());
        let plain = score_valence_rule(&toks(&["good"]), lex, opts());
        assert!(d1 > d2 && d2 > d3, "decay violated: {d1} {d2} {d3}");
        assert!(d3 > plain);
        assert!((d4 - plain).abs() < 1e-12, "outside lookback must not boost");
    }

    #[test]
    fn sign_symmetry_under_lexicon_negation() {
        let lex = ValenceLexicon::bundled();
        let neg = lex.negated();
        for phrase in [
            vec!["good"],
            vec!["very", "good"],
            vec!["not", "good"],
            vec!["not", "very", "good", "but", "terrible", "teacher"],
            vec!["boring", "and", "useless", "but", "cheap"],
        ] {
            let phrase = toks(&phrase);
            let a = score_valence_rule(&phrase, lex, opts());
            let b = score_valence_rule(&phrase, &neg, opts());
            assert!((a + b).abs() < 1e-12, "asymmetry on {phrase:?}: {a} vs {b}");
        }
    }

    #[test]
    fn compound_stays_in_range() {
        let lex = ValenceLexicon::bundled();
        let mut tokens = Vec::new();
        for _ in 0..500 {
            tokens.push("excellent".to_string());
        }
        let c = score_valence_rule(&tokens, lex, opts());
        assert!(c <= 1.0 && c > 0.99);
    }

    #[test]
    fn polarity_single_hit_and_cancellation() {
        let lex = PolarityLexicon::bundled();
        assert_eq!(lex.polarity("good"), Some(0.7));
        assert_eq!(lex.polarity("bad"), Some(-0.7));
        let single = score_polarity_avg(&toks(&["good"]), lex);
        assert!((single - 0.7).abs() < 1e-12);
        let cancelled = score_polarity_avg(&toks(&["good", "bad"]), lex);
        assert!(cancelled.abs() < 1e-12);
    }

    #[test]
    fn polarity_booster_scales_next_hit() {
        let lex = PolarityLexicon::bundled();
        let boosted = score_polarity_avg(&toks(&["very", "good"]), lex);
        assert!((boosted - 0.7 * 1.3).abs() < 1e-12);
        // Clamped at 1.
        let clamped = score_polarity_avg(&toks(&["very", "excellent"]), lex);
        assert!(clamped <= 1.0);
    }

    #[test]
    fn labeling_matches_threshold_rule() {
        let t = LabelThresholds::default();
        assert_eq!(label_from_compound(0.5, t), SentimentLabel::Positive);
        assert_eq!(label_from_compound(0.1, t), SentimentLabel::Neutral);
        assert_eq!(label_from_compound(-0.1, t), SentimentLabel::Neutral);
        assert_eq!(label_from_compound(0.0, t), SentimentLabel::Neutral);
        assert_eq!(label_from_compound(-0.3, t), SentimentLabel::Negative);
        assert_eq!(
            label_from_compound(0.10000000001, t),
            SentimentLabel::Positive
        );
    }

    proptest::proptest! {
        #[test]
        fn label_is_total_and_monotone(a in -1.0f64..1.0, b in -1.0f64..1.0) {
            let t = LabelThresholds::default();
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let rank = |l: SentimentLabel| match l {
                SentimentLabel::Negative => 0,
                SentimentLabel::Neutral => 1,
                SentimentLabel::Positive => 2,
            };
            proptest::prop_assert!(rank(label_from_compound(lo, t)) <= rank(label_from_compound(hi, t)));
        }

        #[test]
        fn fuzzed_compounds_stay_in_range(tokens in proptest::collection::vec("[a-z]{1,12}", 0..40)) {
            let c = score_valence_rule(&tokens, ValenceLexicon::bundled(), opts());
            proptest::prop_assert!((-1.0..=1.0).contains(&c));
            let p = score_polarity_avg(&tokens, PolarityLexicon::bundled());
            proptest::prop_assert!((-1.0..=1.0).contains(&p));
        }
    }

    fn test_corpus() -> Corpus {
        let mk = |id: &str, course: &str, rating: f64| -> crate::corpus::Review {
            serde_json::from_str(&format!(
                r#"{{"review_id":"{id}","course_id":"{course}","rating":{rating},"text":"t"}}"#
            ))
            .unwrap()
        };
        let reviews = vec![
            mk("r1", "c1", 5.0),
            mk("r2", "c1", 4.0),
            mk("r3", "c1", 2.0),
            mk("r4", "c2", 3.0),
            mk("r5", "c2", 1.0),
            mk("r6", "c3", 5.0),
        ];
        Corpus::new(reviews, Vec::new()).0
    }

    fn label_score(id: &str, label: SentimentLabel, compound: Option<f64>) -> SentimentScore {
        SentimentScore {
            review_id: id.into(),
            engine: if compound.is_some() {
                Engine::ValenceRule
            } else {
                Engine::External
            },
            compound,
            label,
        }
    }

    #[test]
    fn course_aggregation_majority_and_mean() {
        let corpus = test_corpus();
        let scores = vec![
            label_score("r1", SentimentLabel::Positive, Some(0.2)),
            label_score("r2", SentimentLabel::Positive, Some(0.4)),
            label_score("r3", SentimentLabel::Negative, Some(-0.5)),
            label_score("r4", SentimentLabel::Positive, Some(0.3)),
            label_score("r5", SentimentLabel::Negative, Some(-0.3)),
        ];
        let (summaries, excluded) = aggregate_course_sentiment(&scores, &corpus);
        assert_eq!(excluded, vec!["c3".to_string()]);
        assert_eq!(summaries.len(), 2);

        let c1 = &summaries[0];
        assert_eq!(c1.course_id, "c1");
        assert_eq!(c1.majority_label, SentimentLabel::Positive);
        let mean = (0.2 + 0.4 - 0.5) / 3.0;
        assert!((c1.mean_compound.unwrap() - mean).abs() < 1e-12);

        // Tie breaks to Neutral.
        let c2 = &summaries[1];
        assert_eq!(c2.course_id, "c2");
        assert_eq!(c2.majority_label, SentimentLabel::Neutral);
    }

    #[test]
    fn majority_matches_brute_force_recount() {
        let corpus = test_corpus();
        let scores = vec![
            label_score("r1", SentimentLabel::Positive, Some(0.9)),
            label_score("r2", SentimentLabel::Neutral, Some(0.0)),
            label_score("r3", SentimentLabel::Positive, Some(0.8)),
        ];
        let (summaries, _) = aggregate_course_sentiment(&scores, &corpus);
        let c1 = summaries.iter().find(|s| s.course_id == "c1").unwrap();
        // Brute force over the raw score list.
        let mut pos = 0;
        let mut neu = 0;
        let mut neg = 0;
        for s in &scores {
            match s.label {
                SentimentLabel::Positive => pos += 1,
                SentimentLabel::Neutral => neu += 1,
                SentimentLabel::Negative => neg += 1,
            }
        }
        assert_eq!(c1.count(SentimentLabel::Positive), pos);
        assert_eq!(c1.count(SentimentLabel::Neutral), neu);
        assert_eq!(c1.count(SentimentLabel::Negative), neg);
    }

    #[test]
    fn external_label_import() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("labels.jsonl");
        std::fs::write(
            &path,
            r#"{"review_id":"r1","label":"Positive"}
{"review_id":"r2","label":"Great"}
{"review_id":"r3","label":"Negative"}
"#,
        )
        .unwrap();
        let outcome = import_external_labels(&path).unwrap();
        assert_eq!(outcome.scores.len(), 2);
        assert_eq!(outcome.rejects.len(), 1);
        assert_eq!(outcome.rejects[0].reason, "bad_label");
        assert_eq!(outcome.scores[0].engine, Engine::External);
        assert_eq!(outcome.scores[0].compound, None);

        let corpus = test_corpus();
        let unknown = unknown_review_ids(&outcome.scores, &corpus);
        assert!(unknown.is_empty());
    }

    #[test]
    fn correlation_perfect_linearity() {
        let corpus = test_corpus();
        // compounds proportional to ratings of r1 (5), r2 (4), r3 (2).
        let scores = vec![
            label_score("r1", SentimentLabel::Positive, Some(0.5)),
            label_score("r2", SentimentLabel::Positive, Some(0.4)),
            label_score("r3", SentimentLabel::Positive, Some(0.2)),
        ];
        let r = correlate_sentiment_rating(&scores, &corpus, CorrelationMethod::Pearson).unwrap();
        assert!((r - 1.0).abs() < 1e-12);
        let rho = correlate_sentiment_rating(&scores, &corpus, CorrelationMethod::Spearman).unwrap();
        assert!((rho - 1.0).abs() < 1e-12);
    }

    #[test]
    fn correlation_constant_series_is_error() {
        let corpus = test_corpus();
        let scores = vec![
            label_score("r1", SentimentLabel::Positive, Some(0.5)),
            label_score("r2", SentimentLabel::Positive, Some(0.5)),
        ];
        assert!(matches!(
            correlate_sentiment_rating(&scores, &corpus, CorrelationMethod::Pearson),
            Err(Error::UndefinedCorrelation(_))
        ));
    }
}
