//! Review/course data model, file ingestion, and corpus-level filters.
//!
//! A [`Corpus`] is immutable once built: filters return new corpora. Reviews
//! are ingested from JSONL (canonical) or CSV; malformed records are skipped
//! and reported, never fatal. Reviews whose `course_id` has no course record
//! get a synthesized stub course flagged `synthetic`.

mod langid;

pub use langid::detect_language;

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Review platform of origin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Platform {
    Udemy,
    Coursera,
    Domestika,
    Platzi,
    Crehana,
    #[default]
    #[serde(other)]
    Other,
}

/// Half-star rating in `{1.0, 1.5, …, 5.0}`, stored as half-star steps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Rating(u8);

impl Rating {
    pub const ALL: [Rating; 9] = [
        Rating(2),
        Rating(3),
        Rating(4),
        Rating(5),
        Rating(6),
        Rating(7),
        Rating(8),
        Rating(9),
        Rating(10),
    ];

    /// Validates that `v` lands exactly on a half-star bucket.
    pub fn from_value(v: f64) -> Option<Rating> {
        let doubled = v * 2.0;
        if !doubled.is_finite() || doubled.fract() != 0.0 {
            return None;
        }
        let steps = doubled as i64;
        (2..=10).contains(&steps).then_some(Rating(steps as u8))
    }

    pub fn value(self) -> f64 {
        f64::from(self.0) / 2.0
    }
}

impl fmt::Display for Rating {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.value())
    }
}

impl Serialize for Rating {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_f64(self.value())
    }
}

impl<'de> Deserialize<'de> for Rating {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let v = f64::deserialize(deserializer)?;
        Rating::from_value(v)
            .ok_or_else(|| serde::de::Error::custom(format!("rating {v} is not a half-star value in [1, 5]")))
    }
}

/// One learner review of one course.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Review {
    pub review_id: String,
    pub course_id: String,
    #[serde(default)]
    pub platform: Platform,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub username: Option<String>,
    #[serde(
        default,
        skip_serializing_if = "Option::is_none",
        deserialize_with = "deserialize_lenient_date"
    )]
    pub date: Option<NaiveDate>,
    pub rating: Rating,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub language: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub url: Option<String>,
}

/// Course-level metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Course {
    pub course_id: String,
    pub title: String,
    #[serde(default)]
    pub platform: Platform,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub url: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub category: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub teacher: Option<String>,
    /// True for stub records synthesized for orphan reviews.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub synthetic: bool,
}

/// Dates arrive in heterogeneous formats across platforms; anything
/// unparseable becomes `None` rather than an error.
fn deserialize_lenient_date<'de, D: Deserializer<'de>>(
    deserializer: D,
) -> std::result::Result<Option<NaiveDate>, D::Error> {
    let raw: Option<String> = Option::deserialize(deserializer)?;
    Ok(raw.as_deref().and_then(parse_date_lenient))
}

/// Parse a date-only or datetime string; `None` when nothing matches.
pub fn parse_date_lenient(s: &str) -> Option<NaiveDate> {
    let s = s.trim();
    if let Ok(d) = NaiveDate::parse_from_str(s, "%Y-%m-%d") {
        return Some(d);
    }
    if let Ok(dt) = chrono::DateTime::parse_from_rfc3339(s) {
        return Some(dt.date_naive());
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S"] {
        if let Ok(dt) = chrono::NaiveDateTime::parse_from_str(s, fmt) {
            return Some(dt.date());
        }
    }
    for fmt in ["%d/%m/%Y", "%B %d, %Y", "%b %d, %Y", "%d %B %Y"] {
        if let Ok(d) = NaiveDate::parse_from_str(s, fmt) {
            return Some(d);
        }
    }
    None
}

/// Why a record was rejected during ingestion.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RejectRecord {
    pub line: usize,
    pub reason: String,
    pub detail: String,
}

impl RejectRecord {
    fn new(line: usize, reason: &str, detail: impl Into<String>) -> Self {
        RejectRecord {
            line,
            reason: reason.to_string(),
            detail: detail.into(),
        }
    }
}

/// Ingestion outcome counters and per-record diagnostics.
#[derive(Debug, Clone, Default, Serialize)]
pub struct IngestReport {
    pub reviews_loaded: usize,
    pub courses_loaded: usize,
    pub rejects: Vec<RejectRecord>,
    pub orphan_courses_synthesized: usize,
    /// Reviews sharing (username, course_id) with an earlier review; kept verbatim.
    pub duplicate_user_course: usize,
}

/// The immutable review collection plus its course index.
#[derive(Debug, Clone)]
pub struct Corpus {
    reviews: Vec<Review>,
    courses: Vec<Course>,
    /// course_id → positions into `reviews`, kept exactly consistent.
    index: BTreeMap<String, Vec<usize>>,
    /// review_id → position into `reviews`.
    id_index: HashMap<String, usize>,
}

impl Corpus {
    /// Build a corpus, synthesizing stub courses for orphan reviews.
    ///
    /// Returns the corpus and the number of stubs synthesized. Callers must
    /// have deduplicated `review_id`s already (ingestion rejects duplicates).
    pub fn new(reviews: Vec<Review>, mut courses: Vec<Course>) -> (Corpus, usize) {
        let known: HashSet<String> = courses.iter().map(|c| c.course_id.clone()).collect();
        let mut synthesized = Vec::new();
        let mut seen_orphan = HashSet::new();
        for review in &reviews {
            if !known.contains(&review.course_id) && seen_orphan.insert(review.course_id.clone()) {
                synthesized.push(Course {
                    course_id: review.course_id.clone(),
                    title: review.course_id.clone(),
                    platform: review.platform,
                    url: None,
                    category: None,
                    teacher: None,
                    synthetic: true,
                });
            }
        }
        let n_synth = synthesized.len();
        courses.extend(synthesized);

        let mut index: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        let mut id_index = HashMap::with_capacity(reviews.len());
        for (pos, review) in reviews.iter().enumerate() {
            index.entry(review.course_id.clone()).or_default().push(pos);
            id_index.insert(review.review_id.clone(), pos);
        }
        (
            Corpus {
                reviews,
                courses,
                index,
                id_index,
            },
            n_synth,
        )
    }

    pub fn reviews(&self) -> &[Review] {
        &self.reviews
    }

    pub fn courses(&self) -> &[Course] {
        &self.courses
    }

    pub fn review_count(&self) -> usize {
        self.reviews.len()
    }

    pub fn course_count(&self) -> usize {
        self.courses.len()
    }

    pub fn course(&self, course_id: &str) -> Option<&Course> {
        self.courses.iter().find(|c| c.course_id == course_id)
    }

    pub fn review_by_id(&self, review_id: &str) -> Option<&Review> {
        self.id_index.get(review_id).map(|&pos| &self.reviews[pos])
    }

    /// Positions of a course's reviews in input order.
    pub fn review_positions(&self, course_id: &str) -> &[usize] {
        self.index.get(course_id).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn reviews_for(&self, course_id: &str) -> impl Iterator<Item = &Review> {
        self.review_positions(course_id)
            .iter()
            .map(move |&pos| &self.reviews[pos])
    }

    /// Course ids in index order (sorted).
    pub fn course_ids(&self) -> impl Iterator<Item = &str> {
        self.index.keys().map(String::as_str)
    }
}

/// Supported ingestion formats.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InputFormat {
    Jsonl,
    Csv,
}

impl std::str::FromStr for InputFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "jsonl" => Ok(InputFormat::Jsonl),
            "csv" => Ok(InputFormat::Csv),
            other => Err(Error::invalid_config(format!(
                "unknown input format {other:?} (expected jsonl or csv)"
            ))),
        }
    }
}

// Raw record with everything optional so per-field validation can produce
// reject diagnostics instead of serde errors.
#[derive(Debug, Deserialize)]
struct RawRecord {
    review_id: Option<String>,
    course_id: Option<String>,
    #[serde(default)]
    platform: Option<Platform>,
    username: Option<String>,
    date: Option<String>,
    rating: Option<f64>,
    text: Option<String>,
    language: Option<String>,
    url: Option<String>,
    // Course-record fields.
    title: Option<String>,
    category: Option<String>,
    teacher: Option<String>,
    #[serde(default)]
    synthetic: Option<bool>,
}

/// Load a corpus from a JSONL or CSV file.
///
/// JSONL files may mix review records (carry `review_id`) and course records
/// (carry `title` but no `review_id`). CSV carries reviews only. Unreadable
/// files are fatal; malformed records are skipped with a diagnostic.
pub fn load_corpus(path: impl AsRef<Path>, format: InputFormat) -> Result<(Corpus, IngestReport)> {
    let (reviews, courses, mut report) = load_records(path, format)?;
    report.reviews_loaded = reviews.len();
    report.courses_loaded = courses.len();
    let (corpus, orphans) = Corpus::new(reviews, courses);
    report.orphan_courses_synthesized = orphans;
    Ok((corpus, report))
}

/// Load raw review/course records without building the corpus, so callers
/// can merge several files first.
pub fn load_records(
    path: impl AsRef<Path>,
    format: InputFormat,
) -> Result<(Vec<Review>, Vec<Course>, IngestReport)> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    match format {
        InputFormat::Jsonl => load_jsonl(BufReader::new(file)),
        InputFormat::Csv => load_csv(file),
    }
}

fn load_jsonl<R: BufRead>(reader: R) -> Result<(Vec<Review>, Vec<Course>, IngestReport)> {
    let mut reviews = Vec::new();
    let mut courses = Vec::new();
    let mut report = IngestReport::default();
    let mut seen_ids = HashSet::new();
    let mut seen_courses = HashSet::new();
    let mut seen_user_course = HashSet::new();

    for (lineno, line) in reader.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line.map_err(|e| Error::io("<input>", e))?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawRecord = match serde_json::from_str(&line) {
            Ok(r) => r,
            Err(e) => {
                report
                    .rejects
                    .push(RejectRecord::new(lineno, "bad_json", e.to_string()));
                continue;
            }
        };
        if raw.review_id.is_some() {
            match validate_review(raw, lineno, &mut seen_ids) {
                Ok(review) => {
                    if let Some(user) = &review.username {
                        if !seen_user_course.insert((user.clone(), review.course_id.clone())) {
                            report.duplicate_user_course += 1;
                        }
                    }
                    reviews.push(review);
                }
                Err(reject) => report.rejects.push(reject),
            }
        } else if let Some(title) = raw.title {
            match raw.course_id {
                Some(course_id) if !course_id.is_empty() => {
                    if title.is_empty() {
                        report.rejects.push(RejectRecord::new(
                            lineno,
                            "empty_title",
                            "course record with empty title",
                        ));
                    } else if !seen_courses.insert(course_id.clone()) {
                        report.rejects.push(RejectRecord::new(
                            lineno,
                            "duplicate_course_id",
                            course_id,
                        ));
                    } else {
                        courses.push(Course {
                            course_id,
                            title,
                            platform: raw.platform.unwrap_or_default(),
                            url: raw.url,
                            category: raw.category,
                            teacher: raw.teacher,
                            synthetic: raw.synthetic.unwrap_or(false),
                        });
                    }
                }
                _ => report.rejects.push(RejectRecord::new(
                    lineno,
                    "missing_course_id",
                    "course record without course_id",
                )),
            }
        } else if raw.rating.is_some() || raw.text.is_some() {
            report.rejects.push(RejectRecord::new(
                lineno,
                "missing_review_id",
                "review-like record without review_id",
            ));
        } else {
            report.rejects.push(RejectRecord::new(
                lineno,
                "unrecognized_record",
                "neither a review (review_id) nor a course (title)",
            ));
        }
    }

    Ok((reviews, courses, report))
}

fn validate_review(
    raw: RawRecord,
    lineno: usize,
    seen_ids: &mut HashSet<String>,
) -> std::result::Result<Review, RejectRecord> {
    let review_id = raw
        .review_id
        .filter(|s| !s.is_empty())
        .ok_or_else(|| RejectRecord::new(lineno, "missing_review_id", "review_id absent or empty"))?;
    let course_id = raw
        .course_id
        .filter(|s| !s.is_empty())
        .ok_or_else(|| RejectRecord::new(lineno, "missing_course_id", format!("review {review_id}")))?;
    let rating_value = raw
        .rating
        .ok_or_else(|| RejectRecord::new(lineno, "missing_rating", format!("review {review_id}")))?;
    let rating = Rating::from_value(rating_value).ok_or_else(|| {
        RejectRecord::new(
            lineno,
            "bad_rating",
            format!("review {review_id}: rating {rating_value} is not a half-star value in [1, 5]"),
        )
    })?;
    let text = raw
        .text
        .ok_or_else(|| RejectRecord::new(lineno, "missing_text", format!("review {review_id}")))?;
    if !seen_ids.insert(review_id.clone()) {
        return Err(RejectRecord::new(lineno, "duplicate_review_id", review_id));
    }
    Ok(Review {
        review_id,
        course_id,
        platform: raw.platform.unwrap_or_default(),
        username: raw.username,
        date: raw.date.as_deref().and_then(parse_date_lenient),
        rating,
        text,
        language: raw.language.filter(|s| !s.is_empty()),
        url: raw.url,
    })
}

fn load_csv(file: File) -> Result<(Vec<Review>, Vec<Course>, IngestReport)> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(file);
    let headers = reader
        .headers()
        .map_err(|e| Error::invalid_input(format!("cannot read CSV header: {e}")))?
        .clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let idx_review = col("review_id");
    let idx_course = col("course_id");
    let idx_rating = col("rating");
    let idx_text = col("text");
    for (name, idx) in [
        ("review_id", idx_review),
        ("course_id", idx_course),
        ("rating", idx_rating),
        ("text", idx_text),
    ] {
        if idx.is_none() {
            return Err(Error::invalid_input(format!(
                "CSV header missing required column {name:?}"
            )));
        }
    }
    let optional = |name: &str| col(name);
    let idx_platform = optional("platform");
    let idx_username = optional("username");
    let idx_date = optional("date");
    let idx_language = optional("language");
    let idx_url = optional("url");

    let mut reviews = Vec::new();
    let mut report = IngestReport::default();
    let mut seen_ids = HashSet::new();
    let mut seen_user_course = HashSet::new();

    for (recno, record) in reader.records().enumerate() {
        let lineno = recno + 2; // header is line 1
        let record = match record {
            Ok(r) => r,
            Err(e) => {
                report
                    .rejects
                    .push(RejectRecord::new(lineno, "bad_csv", e.to_string()));
                continue;
            }
        };
        let get = |idx: Option<usize>| -> Option<String> {
            idx.and_then(|i| record.get(i))
                .map(str::to_string)
                .filter(|s| !s.is_empty())
        };
        let raw = RawRecord {
            review_id: get(idx_review),
            course_id: get(idx_course),
            platform: get(idx_platform).map(|p| parse_platform(&p)),
            username: get(idx_username),
            date: get(idx_date),
            rating: get(idx_rating).and_then(|r| r.parse::<f64>().ok()),
            text: get(idx_text),
            language: get(idx_language),
            url: get(idx_url),
            title: None,
            category: None,
            teacher: None,
            synthetic: None,
        };
        match validate_review(raw, lineno, &mut seen_ids) {
            Ok(review) => {
                if let Some(user) = &review.username {
                    if !seen_user_course.insert((user.clone(), review.course_id.clone())) {
                        report.duplicate_user_course += 1;
                    }
                }
                reviews.push(review);
            }
            Err(reject) => report.rejects.push(reject),
        }
    }

    Ok((reviews, Vec::new(), report))
}

fn parse_platform(s: &str) -> Platform {
    match s.to_ascii_lowercase().as_str() {
        "udemy" => Platform::Udemy,
        "coursera" => Platform::Coursera,
        "domestika" => Platform::Domestika,
        "platzi" => Platform::Platzi,
        "crehana" => Platform::Crehana,
        _ => Platform::Other,
    }
}

/// Write a corpus as JSONL: course records first, then reviews, input order.
pub fn save_corpus(corpus: &Corpus, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for course in corpus.courses() {
        serde_json::to_writer(&mut w, course)?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    for review in corpus.reviews() {
        serde_json::to_writer(&mut w, review)?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Write reject diagnostics to the `.rejects.jsonl` sidecar.
pub fn write_rejects(rejects: &[RejectRecord], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for reject in rejects {
        serde_json::to_writer(&mut w, reject)?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Keep exactly the reviews whose language equals `code`.
///
/// Reviews carrying a `language` field are trusted; the rest are detected.
/// Courses left with no reviews are pruned.
pub fn filter_language(corpus: &Corpus, code: &str) -> Corpus {
    let kept: Vec<Review> = corpus
        .reviews()
        .iter()
        .filter(|r| review_language(r).as_deref() == Some(code))
        .cloned()
        .collect();
    rebuild_with(corpus, kept)
}

fn review_language(review: &Review) -> Option<String> {
    if let Some(code) = &review.language {
        return Some(code.clone());
    }
    detect_language(&review.text).ok().map(|(code, _)| code)
}

/// Report for [`filter_min_reviews`].
#[derive(Debug, Clone, Serialize)]
pub struct MinReviewsReport {
    pub removed_courses: usize,
    pub removed_reviews: usize,
    pub removed_course_fraction: f64,
}

/// Drop courses with fewer than `min` reviews, along with their reviews.
pub fn filter_min_reviews(corpus: &Corpus, min: usize) -> Result<(Corpus, MinReviewsReport)> {
    if min < 1 {
        return Err(Error::invalid_input("min_reviews must be at least 1"));
    }
    let keep: HashSet<&str> = corpus
        .courses()
        .iter()
        .map(|c| c.course_id.as_str())
        .filter(|id| corpus.review_positions(id).len() >= min)
        .collect();
    let kept_reviews: Vec<Review> = corpus
        .reviews()
        .iter()
        .filter(|r| keep.contains(r.course_id.as_str()))
        .cloned()
        .collect();
    let total_courses = corpus.course_count();
    let removed_courses = total_courses - keep.len();
    let removed_reviews = corpus.review_count() - kept_reviews.len();

    let courses: Vec<Course> = corpus
        .courses()
        .iter()
        .filter(|c| keep.contains(c.course_id.as_str()))
        .cloned()
        .collect();
    let (corpus, _) = Corpus::new(kept_reviews, courses);
    Ok((
        corpus,
        MinReviewsReport {
            removed_courses,
            removed_reviews,
            removed_course_fraction: if total_courses == 0 {
                0.0
            } else {
                removed_courses as f64 / total_courses as f64
            },
        },
    ))
}

fn rebuild_with(corpus: &Corpus, reviews: Vec<Review>) -> Corpus {
    let retained: HashSet<&str> = reviews.iter().map(|r| r.course_id.as_str()).collect();
    let courses: Vec<Course> = corpus
        .courses()
        .iter()
        .filter(|c| retained.contains(c.course_id.as_str()))
        .cloned()
        .collect();
    Corpus::new(reviews, courses).0
}
