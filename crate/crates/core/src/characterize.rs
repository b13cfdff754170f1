//! Per-course characterization: rating mean, sentiment summary, and the
//! two topic distributions, with machine-readable report and plot-data
//! emission.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Course};
use crate::error::{Error, Result};
use crate::lda::{self, InferredTopics, TopicModel};
use crate::sentiment::{CourseSentiment, Engine, SentimentLabel, SentimentScore};
use crate::textprep::TokenDoc;

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Courses with fewer projected non-empty reviews than this are flagged.
pub const LOW_EVIDENCE_THRESHOLD: usize = 5;

/// One course's characterization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CourseProfile {
    pub course_id: String,
    pub title: String,
    pub n_reviews: usize,
    pub mean_rating: f64,
    pub sentiment: CourseSentiment,
    pub sentiment_engine: Engine,
    pub qual_topics: Vec<f64>,
    pub content_topics: Vec<f64>,
    pub qual_topic_labels: Vec<String>,
    pub content_topic_labels: Vec<String>,
    pub low_evidence: bool,
}

/// Everything needed to assemble one course's profile.
pub struct ProfileContext<'a> {
    pub corpus: &'a Corpus,
    pub sentiment_engine: Engine,
    /// Per-review weights for the qualitative model, keyed by review id.
    pub qual_weights: &'a HashMap<String, InferredTopics>,
    pub content_weights: &'a HashMap<String, InferredTopics>,
    pub qual_topic_labels: &'a [String],
    pub content_topic_labels: &'a [String],
}

/// Assemble one profile: topic vectors are the per-review weight means
/// scaled to percentages (restricted to the course's reviews), the
/// sentiment block is the ready-made course aggregate, and the rating is
/// the arithmetic mean.
pub fn build_course_profile(
    course: &Course,
    sentiment: &CourseSentiment,
    ctx: &ProfileContext<'_>,
) -> Result<CourseProfile> {
    let positions = ctx.corpus.review_positions(&course.course_id);
    if positions.is_empty() {
        return Err(Error::invalid_input(format!(
            "course {} has no reviews",
            course.course_id
        )));
    }
    let reviews: Vec<&crate::corpus::Review> = positions
        .iter()
        .map(|&i| &ctx.corpus.reviews()[i])
        .collect();
    let mean_rating =
        reviews.iter().map(|r| r.rating.value()).sum::<f64>() / reviews.len() as f64;

    let collect = |weights: &HashMap<String, InferredTopics>| -> Result<(Vec<f64>, usize)> {
        let rows: Vec<InferredTopics> = reviews
            .iter()
            .filter_map(|r| weights.get(&r.review_id).cloned())
            .collect();
        if rows.is_empty() {
            return Err(Error::invalid_input(format!(
                "course {} has no inferred topic weights",
                course.course_id
            )));
        }
        let evidence = rows.iter().filter(|w| w.in_vocab > 0).count();
        Ok((lda::topic_proportions(&rows)?, evidence))
    };
    let (qual_topics, qual_evidence) = collect(ctx.qual_weights)?;
    let (content_topics, content_evidence) = collect(ctx.content_weights)?;

    Ok(CourseProfile {
        course_id: course.course_id.clone(),
        title: course.title.clone(),
        n_reviews: reviews.len(),
        mean_rating,
        sentiment: sentiment.clone(),
        sentiment_engine: ctx.sentiment_engine,
        qual_topics,
        content_topics,
        qual_topic_labels: ctx.qual_topic_labels.to_vec(),
        content_topic_labels: ctx.content_topic_labels.to_vec(),
        low_evidence: qual_evidence < LOW_EVIDENCE_THRESHOLD
            || content_evidence < LOW_EVIDENCE_THRESHOLD,
    })
}

/// Report ordering; review count is the default.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileOrder {
    ByReviews,
    ByMeanRating,
}

/// Build profiles for every course that has scored reviews, ordered by
/// One projection's trained model with its documents and display labels.
pub struct ModelInputs<'a> {
    pub model: &'a TopicModel,
    pub docs: &'a [TokenDoc],
    pub labels: &'a [String],
}

/// descending review count (or mean rating), ties on course id.
pub fn build_profiles(
    corpus: &Corpus,
    scores: &[SentimentScore],
    engine: Engine,
    qual: ModelInputs<'_>,
    content: ModelInputs<'_>,
    order: ProfileOrder,
) -> Result<(Vec<CourseProfile>, Vec<String>)> {
    let (summaries, skipped) = crate::sentiment::aggregate_course_sentiment(scores, corpus);
    let by_course: HashMap<&str, &CourseSentiment> = summaries
        .iter()
        .map(|s| (s.course_id.as_str(), s))
        .collect();

    let to_map = |weights: Vec<InferredTopics>| -> HashMap<String, InferredTopics> {
        weights
            .into_iter()
            .map(|w| (w.review_id.clone(), w))
            .collect()
    };
    let qual_weights = to_map(lda::doc_topic_weights(qual.model, qual.docs));
    let content_weights = to_map(lda::doc_topic_weights(content.model, content.docs));
    let ctx = ProfileContext {
        corpus,
        sentiment_engine: engine,
        qual_weights: &qual_weights,
        content_weights: &content_weights,
        qual_topic_labels: qual.labels,
        content_topic_labels: content.labels,
    };

    let mut profiles = Vec::new();
    for course in corpus.courses() {
        let Some(sentiment) = by_course.get(course.course_id.as_str()) else {
            continue;
        };
        profiles.push(build_course_profile(course, sentiment, &ctx)?);
    }
    match order {
        ProfileOrder::ByReviews => profiles.sort_by(|a, b| {
            b.n_reviews
                .cmp(&a.n_reviews)
                .then_with(|| a.course_id.cmp(&b.course_id))
        }),
        ProfileOrder::ByMeanRating => profiles.sort_by(|a, b| {
            b.mean_rating
                .partial_cmp(&a.mean_rating)
                .expect("ratings are finite")
                .then_with(|| a.course_id.cmp(&b.course_id))
        }),
    }
    Ok((profiles, skipped))
}

/// Report container; the timestamp honors `SOURCE_DATE_EPOCH` so reruns
/// can be byte-identical.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: u32,
    pub generated_at: String,
    pub profiles: Vec<CourseProfile>,
}

pub fn report_timestamp() -> String {
    if let Ok(epoch) = std::env::var("SOURCE_DATE_EPOCH") {
        if let Ok(secs) = epoch.trim().parse::<i64>() {
            if let Some(dt) = chrono::DateTime::from_timestamp(secs, 0) {
                return dt.to_rfc3339();
            }
        }
    }
    chrono::Utc::now().to_rfc3339()
}

/// Output format for [`emit_report`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Json,
    Csv,
}

/// Write profiles as schema-versioned JSON or flattened CSV.
pub fn emit_report(
    profiles: &[CourseProfile],
    format: ReportFormat,
    path: impl AsRef<Path>,
) -> Result<()> {
    if profiles.is_empty() {
        return Err(Error::invalid_input("no profiles to report"));
    }
    let path = path.as_ref();
    match format {
        ReportFormat::Json => {
            let report = Report {
                schema_version: REPORT_SCHEMA_VERSION,
                generated_at: report_timestamp(),
                profiles: profiles.to_vec(),
            };
            let file = File::create(path).map_err(|e| Error::io(path, e))?;
            let mut w = BufWriter::new(file);
            serde_json::to_writer_pretty(&mut w, &report)?;
            w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
            Ok(())
        }
        ReportFormat::Csv => emit_report_csv(profiles, path),
    }
}

fn emit_report_csv(profiles: &[CourseProfile], path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    let io_err = |e: csv::Error| Error::invalid_input(format!("csv write failed: {e}"));

    let mut header: Vec<String> = [
        "course_id",
        "title",
        "n_reviews",
        "mean_rating",
        "sentiment_engine",
        "majority_label",
        "mean_compound",
        "n_positive",
        "n_neutral",
        "n_negative",
        "low_evidence",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    for label in &profiles[0].qual_topic_labels {
        header.push(format!("qual:{label}"));
    }
    for label in &profiles[0].content_topic_labels {
        header.push(format!("content:{label}"));
    }
    w.write_record(&header).map_err(io_err)?;

    for p in profiles {
        let mut record: Vec<String> = vec![
            p.course_id.clone(),
            p.title.clone(),
            p.n_reviews.to_string(),
            format!("{}", p.mean_rating),
            p.sentiment_engine.to_string(),
            p.sentiment.majority_label.to_string(),
            p.sentiment
                .mean_compound
                .map(|c| format!("{c}"))
                .unwrap_or_default(),
            p.sentiment.count(SentimentLabel::Positive).to_string(),
            p.sentiment.count(SentimentLabel::Neutral).to_string(),
            p.sentiment.count(SentimentLabel::Negative).to_string(),
            p.low_evidence.to_string(),
        ];
        for v in &p.qual_topics {
            record.push(format!("{v}"));
        }
        for v in &p.content_topics {
            record.push(format!("{v}"));
        }
        w.write_record(&record).map_err(io_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Parse a JSON report back into profiles.
pub fn parse_report(path: impl AsRef<Path>) -> Result<Report> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let report: Report = serde_json::from_reader(BufReader::new(file))?;
    if report.schema_version != REPORT_SCHEMA_VERSION {
        return Err(Error::invalid_input(format!(
            "unsupported report schema version {}",
            report.schema_version
        )));
    }
    Ok(report)
}

/// Long-format plot rows: `course_id, panel, label, value` with panels
/// `rating`, `sentiment`, `qual_topic`, `content_topic`.
pub fn emit_plot_data(profiles: &[CourseProfile], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    let io_err = |e: csv::Error| Error::invalid_input(format!("csv write failed: {e}"));
    w.write_record(["course_id", "panel", "label", "value"])
        .map_err(io_err)?;
    for p in profiles {
        w.write_record([
            p.course_id.as_str(),
            "rating",
            "mean",
            &format!("{}", p.mean_rating),
        ])
        .map_err(io_err)?;
        let scored = p.sentiment.scored_reviews().max(1) as f64;
        for label in [
            SentimentLabel::Positive,
            SentimentLabel::Neutral,
            SentimentLabel::Negative,
        ] {
            let pct = 100.0 * p.sentiment.count(label) as f64 / scored;
            w.write_record([
                p.course_id.as_str(),
                "sentiment",
                &label.to_string(),
                &format!("{pct}"),
            ])
            .map_err(io_err)?;
        }
        for (label, value) in p.qual_topic_labels.iter().zip(&p.qual_topics) {
            w.write_record([
                p.course_id.as_str(),
                "qual_topic",
                label.as_str(),
                &format!("{value}"),
            ])
            .map_err(io_err)?;
        }
        for (label, value) in p.content_topic_labels.iter().zip(&p.content_topics) {
            w.write_record([
                p.course_id.as_str(),
                "content_topic",
                label.as_str(),
                &format!("{value}"),
            ])
            .map_err(io_err)?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Review;
    use crate::lda::LdaConfig;

    fn review(id: &str, course: &str, rating: f64, text: &str) -> Review {
        serde_json::from_str(&format!(
            r#"{{"review_id":"{id}","course_id":"{course}","rating":{rating},"text":"{text}"}}"#
        ))
        .unwrap()
    }

    fn toy_setup() -> (Corpus, TopicModel, Vec<TokenDoc>) {
        let reviews = vec![
            review("r1", "c1", 5.0, "alpha alpha alpha"),
            review("r2", "c1", 4.0, "alpha alpha"),
            review("r3", "c1", 4.5, "bravo bravo"),
            review("r4", "c1", 5.0, "alpha bravo"),
            review("r5", "c1", 4.0, "alpha alpha bravo"),
            review("r6", "c2", 2.0, "bravo bravo bravo"),
            review("r7", "c2", 1.5, "bravo bravo"),
            review("r8", "c2", 2.5, "bravo alpha"),
            review("r9", "c2", 1.0, "bravo bravo"),
            review("r10", "c2", 2.0, "bravo"),
        ];
        let corpus = Corpus::new(reviews, Vec::new()).0;
        let docs: Vec<TokenDoc> = corpus
            .reviews()
            .iter()
            .map(|r| TokenDoc {
                review_id: r.review_id.clone(),
                lemmas: r.text.split_whitespace().map(String::from).collect(),
            })
            .collect();
        let config = LdaConfig {
            k: 2,
            alpha: Some(0.1),
            beta: 0.01,
            iterations: 150,
            burn_in: 0,
            seed: 13,
        };
        let model = lda::train_lda(&docs, &config).unwrap();
        (corpus, model, docs)
    }

    fn scores_for(corpus: &Corpus) -> Vec<SentimentScore> {
        corpus
            .reviews()
            .iter()
            .map(|r| {
                let compound = (r.rating.value() - 3.0) / 2.5;
                SentimentScore {
                    review_id: r.review_id.clone(),
                    engine: Engine::ValenceRule,
                    compound: Some(compound),
                    label: crate::sentiment::label_from_compound(
                        compound,
                        crate::sentiment::LabelThresholds::default(),
                    ),
                }
            })
            .collect()
    }

    fn labels(model: &TopicModel) -> Vec<String> {
        lda::top_words(model, 2.min(model.vocab_size()))
            .unwrap()
            .iter()
            .map(|s| s.display_label())
            .collect()
    }

    fn build_toy_profiles() -> Vec<CourseProfile> {
        let (corpus, model, docs) = toy_setup();
        let scores = scores_for(&corpus);
        let topic_labels = labels(&model);
        let (profiles, skipped) = build_profiles(
            &corpus,
            &scores,
            Engine::ValenceRule,
            ModelInputs { model: &model, docs: &docs, labels: &topic_labels },
            ModelInputs { model: &model, docs: &docs, labels: &topic_labels },
            ProfileOrder::ByReviews,
        )
        .unwrap();
        assert!(skipped.is_empty());
        profiles
    }

    #[test]
    fn profile_vectors_sum_to_100_and_ratings_average() {
        let profiles = build_toy_profiles();
        assert_eq!(profiles.len(), 2);
        for p in &profiles {
            let qual_sum: f64 = p.qual_topics.iter().sum();
            assert!((qual_sum - 100.0).abs() < 1e-6, "qual sums to {qual_sum}");
            let content_sum: f64 = p.content_topics.iter().sum();
            assert!((content_sum - 100.0).abs() < 1e-6);
        }
        let c1 = profiles.iter().find(|p| p.course_id == "c1").unwrap();
        assert!((c1.mean_rating - 4.5).abs() < 1e-12);
        assert_eq!(c1.n_reviews, 5);
        assert!(!c1.low_evidence);
    }

    #[test]
    fn single_course_profile_equals_corpus_proportions() {
        let (corpus, model, docs) = toy_setup();
        // Restrict to course c1 only.
        let c1_reviews: Vec<Review> = corpus
            .reviews()
            .iter()
            .filter(|r| r.course_id == "c1")
            .cloned()
            .collect();
        let one_course = Corpus::new(c1_reviews, Vec::new()).0;
        let c1_docs: Vec<TokenDoc> = docs
            .iter()
            .filter(|d| one_course.review_by_id(&d.review_id).is_some())
            .cloned()
            .collect();
        let scores = scores_for(&one_course);
        let topic_labels = labels(&model);
        let (profiles, _) = build_profiles(
            &one_course,
            &scores,
            Engine::ValenceRule,
            ModelInputs { model: &model, docs: &c1_docs, labels: &topic_labels },
            ModelInputs { model: &model, docs: &c1_docs, labels: &topic_labels },
            ProfileOrder::ByReviews,
        )
        .unwrap();
        let weights = lda::doc_topic_weights(&model, &c1_docs);
        let expected = lda::topic_proportions(&weights).unwrap();
        for (a, b) in profiles[0].qual_topics.iter().zip(&expected) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn uniform_weights_give_uniform_percentages() {
        let (corpus, model, _) = toy_setup();
        // Hand-built weight maps: every review uniform.
        let uniform: HashMap<String, InferredTopics> = corpus
            .reviews()
            .iter()
            .map(|r| {
                (
                    r.review_id.clone(),
                    InferredTopics {
                        review_id: r.review_id.clone(),
                        weights: vec![0.5, 0.5],
                        in_vocab: 0,
                    },
                )
            })
            .collect();
        let scores = scores_for(&corpus);
        let (summaries, _) = crate::sentiment::aggregate_course_sentiment(&scores, &corpus);
        let ctx = ProfileContext {
            corpus: &corpus,
            sentiment_engine: Engine::ValenceRule,
            qual_weights: &uniform,
            content_weights: &uniform,
            qual_topic_labels: &labels(&model),
            content_topic_labels: &labels(&model),
        };
        let course = corpus.course("c1").unwrap();
        let sentiment = summaries.iter().find(|s| s.course_id == "c1").unwrap();
        let profile = build_course_profile(course, sentiment, &ctx).unwrap();
        assert!((profile.qual_topics[0] - 50.0).abs() < 1e-9);
        assert!((profile.qual_topics[1] - 50.0).abs() < 1e-9);
        // All in_vocab == 0: flagged low evidence.
        assert!(profile.low_evidence);
    }

    #[test]
    fn topic_dominated_course_shows_high_proportion() {
        // A course whose reviews all use one planted topic's vocabulary
        // gets a high percentage on that topic.
        let (corpus, model, docs) = toy_setup();
        let scores = scores_for(&corpus);
        let topic_labels = labels(&model);
        let (profiles, _) = build_profiles(
            &corpus,
            &scores,
            Engine::ValenceRule,
            ModelInputs { model: &model, docs: &docs, labels: &topic_labels },
            ModelInputs { model: &model, docs: &docs, labels: &topic_labels },
            ProfileOrder::ByReviews,
        )
        .unwrap();
        // c2 is bravo-heavy by construction; the bravo topic must carry
        // the bulk of its qualitative distribution.
        let c2 = profiles.iter().find(|p| p.course_id == "c2").unwrap();
        let bravo_word = model.vocab.iter().position(|w| w == "bravo").unwrap();
        let bravo_topic = (0..model.k)
            .max_by(|&a, &b| model.phi[a][bravo_word].partial_cmp(&model.phi[b][bravo_word]).unwrap())
            .unwrap();
        assert!(
            c2.qual_topics[bravo_topic] > 65.0,
            "bravo topic only {}% of c2",
            c2.qual_topics[bravo_topic]
        );
        // And the alpha-heavy course leans the other way.
        let c1 = profiles.iter().find(|p| p.course_id == "c1").unwrap();
        assert!(c1.qual_topics[bravo_topic] < c2.qual_topics[bravo_topic]);
    }

    #[test]
    fn report_round_trip_json() {
        let profiles = build_toy_profiles();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("report.json");
        std::env::set_var("SOURCE_DATE_EPOCH", "0");
        emit_report(&profiles, ReportFormat::Json, &path).unwrap();
        let parsed = parse_report(&path).unwrap();
        assert_eq!(parsed.schema_version, REPORT_SCHEMA_VERSION);
        assert_eq!(parsed.profiles, profiles);
    }

    #[test]
    fn report_csv_has_labeled_topic_columns() {
        let profiles = build_toy_profiles();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("report.csv");
        emit_report(&profiles, ReportFormat::Csv, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let header = text.lines().next().unwrap();
        assert!(header.starts_with("course_id,title,n_reviews,mean_rating"));
        assert_eq!(header.matches("qual:").count(), 2);
        assert_eq!(header.matches("content:").count(), 2);
        assert_eq!(text.lines().count(), 1 + profiles.len());
    }

    #[test]
    fn plot_data_row_arithmetic() {
        let profiles = build_toy_profiles();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("plot.csv");
        emit_plot_data(&profiles, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        // Header + per course: 1 rating + 3 sentiment + K qual + K content.
        let per_course = 1 + 3 + 2 + 2;
        assert_eq!(lines.len(), 1 + profiles.len() * per_course);

        // Topic panels sum to 100 per course.
        for p in &profiles {
            let qual_sum: f64 = lines
                .iter()
                .filter(|l| l.starts_with(&format!("{},qual_topic", p.course_id)))
                .map(|l| l.rsplit(',').next().unwrap().parse::<f64>().unwrap())
                .sum();
            assert!((qual_sum - 100.0).abs() < 1e-6);
        }
    }

    #[test]
    fn empty_profile_list_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        assert!(emit_report(&[], ReportFormat::Json, dir.path().join("x.json")).is_err());
    }
}
