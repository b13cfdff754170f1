//! Bundled fixture checks: counts hold by construction, the fixture
//! regenerates bit-identically from its spec, and the external labels
//! attach cleanly.

use std::path::PathBuf;

use reviewkit::corpus::{self, InputFormat};
use reviewkit::pipeline::config::SynthConfig;
use reviewkit::pipeline::stages::planted_spec_from;
use reviewkit::sentiment;
use reviewkit::synth;

fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

#[test]
fn sample_100_loads_with_expected_counts() {
    let (corpus, report) =
        corpus::load_corpus(fixture_path("sample_100.jsonl"), InputFormat::Jsonl).unwrap();
    assert_eq!(corpus.review_count(), 100);
    assert_eq!(corpus.course_count(), 10);
    assert!(report.rejects.is_empty());
    assert_eq!(report.orphan_courses_synthesized, 0);
}

#[test]
fn sample_100_language_split_is_90_10() {
    let (corpus, _) =
        corpus::load_corpus(fixture_path("sample_100.jsonl"), InputFormat::Jsonl).unwrap();
    let filtered = corpus::filter_language(&corpus, "en");
    assert_eq!(filtered.review_count(), 90);
    let spanish = corpus::filter_language(&corpus, "es");
    assert_eq!(spanish.review_count(), 10);
}

#[test]
fn sample_100_regenerates_identically() {
    // Drift guard: the committed fixture is exactly what the default synth
    // section produces.
    let spec = planted_spec_from(&SynthConfig::default()).unwrap();
    let (corpus, _) = synth::generate_corpus(&spec).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let regenerated = dir.path().join("regen.jsonl");
    corpus::save_corpus(&corpus, &regenerated).unwrap();
    assert_eq!(
        std::fs::read(&regenerated).unwrap(),
        std::fs::read(fixture_path("sample_100.jsonl")).unwrap(),
        "fixture drifted from the default synth spec"
    );
}

#[test]
fn sample_100_labels_attach_fully() {
    let (corpus, _) =
        corpus::load_corpus(fixture_path("sample_100.jsonl"), InputFormat::Jsonl).unwrap();
    let outcome =
        sentiment::import_external_labels(fixture_path("sample_100.labels.jsonl")).unwrap();
    assert_eq!(outcome.scores.len(), 100);
    assert!(outcome.rejects.is_empty());
    assert!(sentiment::unknown_review_ids(&outcome.scores, &corpus).is_empty());
    assert!(outcome.scores.iter().all(|s| s.compound.is_none()));
}

#[test]
fn sample_100_labels_follow_rating_rule() {
    // The labels file was constructed from ratings: >= 4 Positive,
    // <= 2.5 Negative, Neutral otherwise.
    let (corpus, _) =
        corpus::load_corpus(fixture_path("sample_100.jsonl"), InputFormat::Jsonl).unwrap();
    let outcome =
        sentiment::import_external_labels(fixture_path("sample_100.labels.jsonl")).unwrap();
    for score in &outcome.scores {
        let rating = corpus
            .review_by_id(&score.review_id)
            .unwrap()
            .rating
            .value();
        let expected = if rating >= 4.0 {
            sentiment::SentimentLabel::Positive
        } else if rating <= 2.5 {
            sentiment::SentimentLabel::Negative
        } else {
            sentiment::SentimentLabel::Neutral
        };
        assert_eq!(score.label, expected, "review {}", score.review_id);
    }
}

#[test]
fn quarter_empty_courses_are_removed_at_min_one() {
    // 16 courses, 4 without reviews: the one-review threshold removes
    // exactly 25% of courses.
    let mut spec = synth::PlantedSpec::new(2, 20, 48, 6, 99);
    spec.courses = 16;
    spec.empty_courses = 4;
    let (corpus, _) = synth::generate_corpus(&spec).unwrap();
    let (filtered, report) = corpus::filter_min_reviews(&corpus, 1).unwrap();
    assert_eq!(report.removed_courses, 4);
    assert!((report.removed_course_fraction - 0.25).abs() < 1e-12);
    assert_eq!(filtered.course_count(), 12);
    assert_eq!(filtered.review_count(), corpus.review_count());
}
