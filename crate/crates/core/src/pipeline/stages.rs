//! Stage execution. Every stage locks the output directory, reads plain
//! JSONL/CSV intermediates, writes its artifacts plus a manifest with
//! config and file digests, and is restartable from what is on disk.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::config::RunConfig;
use super::manifest::{verify_manifests, RunLock, StageManifest};
use crate::characterize::{self, ProfileOrder, ReportFormat};
use crate::coherence::{self, SweepConfig};
use crate::corpus::{self, Corpus, IngestReport, InputFormat, Review};
use crate::error::{Error, Result};
use crate::lda::{self, TopicModel};
use crate::sentiment::{
    self, Engine, LabelThresholds, PolarityLexicon, SentimentScore, ValenceLexicon,
    ValenceRuleOptions,
};
use crate::stats::{self, GroupedTopicMatrix, PermutationStatistic};
use crate::synth::{self, PlantedSpec};
use crate::textprep::{
    self, CategoryLexicon, Lemmatizer, StopwordList, TokenDoc, WordCategory,
};

pub const SYNTH_CORPUS_FILE: &str = "synth_corpus.jsonl";
pub const SYNTH_DOCS_FILE: &str = "synth_docs.jsonl";
pub const TRUTH_FILE: &str = "truth.json";
pub const CORPUS_FILE: &str = "corpus.jsonl";
pub const REJECTS_FILE: &str = "ingest.rejects.jsonl";
pub const INGEST_REPORT_FILE: &str = "ingest_report.json";
pub const TOKENDOCS_FILE: &str = "tokendocs.jsonl";
pub const QUAL_DOCS_FILE: &str = "qual_docs.jsonl";
pub const CONTENT_DOCS_FILE: &str = "content_docs.jsonl";
pub const FREQUENCY_FILE: &str = "frequency.csv";
pub const CANDIDATES_FILE: &str = "candidates.csv";
pub const PREPROCESS_REPORT_FILE: &str = "preprocess_report.json";
pub const SCORES_FILE: &str = "scores.jsonl";
pub const COURSE_SENTIMENT_FILE: &str = "course_sentiment.jsonl";
pub const SENTIMENT_REPORT_FILE: &str = "sentiment_report.json";
pub const QUAL_MODEL_FILE: &str = "model_qual.json";
pub const CONTENT_MODEL_FILE: &str = "model_content.json";
pub const QUAL_TOPICS_FILE: &str = "topics_qual.csv";
pub const CONTENT_TOPICS_FILE: &str = "topics_content.csv";
pub const HISTOGRAM_FILE: &str = "rating_histogram.csv";
pub const COURSE_BINS_FILE: &str = "course_mean_bins.csv";
pub const TOPICS_BY_SENTIMENT_FILE: &str = "topics_by_sentiment.csv";
pub const STATS_REPORT_FILE: &str = "stats_report.json";
pub const PROFILES_JSON_FILE: &str = "profiles.json";
pub const PROFILES_CSV_FILE: &str = "profiles.csv";
pub const PLOT_DATA_FILE: &str = "plot_data.csv";

const TOPICS_CSV_TOP_N: usize = 10;

/// The pipeline stages exposed as CLI subcommands.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Ingest,
    Preprocess,
    Sentiment,
    LdaTrain,
    CoherenceSweep,
    Stats,
    Characterize,
    Synth,
    Verify,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::Preprocess => "preprocess",
            Stage::Sentiment => "sentiment",
            Stage::LdaTrain => "lda-train",
            Stage::CoherenceSweep => "coherence-sweep",
            Stage::Stats => "stats",
            Stage::Characterize => "characterize",
            Stage::Synth => "synth",
            Stage::Verify => "verify",
        }
    }
}

/// Summary returned to the CLI for printing.
pub struct StageOutcome {
    pub stage: &'static str,
    pub lines: Vec<String>,
}

/// Run one stage under the output-directory lock.
pub fn run_stage(
    stage: Stage,
    config: &RunConfig,
    flag_overrides: Vec<String>,
) -> Result<StageOutcome> {
    let out_dir = config.output.dir.clone();
    if stage == Stage::Verify {
        return run_verify(&out_dir);
    }
    let _lock = RunLock::acquire(&out_dir)?;
    let mut manifest = StageManifest::new(stage.name(), config.to_toml(), flag_overrides);
    let mut outcome = StageOutcome {
        stage: stage.name(),
        lines: Vec::new(),
    };
    match stage {
        Stage::Ingest => run_ingest(config, &out_dir, &mut manifest, &mut outcome)?,
        Stage::Preprocess => run_preprocess(config, &out_dir, &mut manifest, &mut outcome)?,
        Stage::Sentiment => run_sentiment(config, &out_dir, &mut manifest, &mut outcome)?,
        Stage::LdaTrain => run_lda_train(config, &out_dir, &mut manifest, &mut outcome)?,
        Stage::CoherenceSweep => run_coherence(config, &out_dir, &mut manifest, &mut outcome)?,
        Stage::Stats => run_stats(config, &out_dir, &mut manifest, &mut outcome)?,
        Stage::Characterize => run_characterize(config, &out_dir, &mut manifest, &mut outcome)?,
        Stage::Synth => run_synth(config, &out_dir, &mut manifest, &mut outcome)?,
        Stage::Verify => unreachable!(),
    }
    manifest.write(&out_dir)?;
    Ok(outcome)
}

fn run_verify(out_dir: &Path) -> Result<StageOutcome> {
    let (checked, mismatches) = verify_manifests(out_dir)?;
    let mut lines = vec![format!("checked {checked} artifact digests")];
    for m in &mismatches {
        lines.push(format!(
            "MISMATCH {} ({}): expected {}, found {}",
            m.path.display(),
            m.stage,
            m.expected,
            m.actual.as_deref().unwrap_or("missing file")
        ));
    }
    if mismatches.is_empty() {
        lines.push("all digests match".to_string());
        Ok(StageOutcome {
            stage: "verify",
            lines,
        })
    } else {
        Err(Error::invalid_input(lines.join("\n")))
    }
}

// ----------------------------------------------------------------- ingest

fn run_ingest(
    config: &RunConfig,
    out_dir: &Path,
    manifest: &mut StageManifest,
    outcome: &mut StageOutcome,
) -> Result<()> {
    let reviews_path = config.input.reviews.as_ref().ok_or_else(|| {
        Error::invalid_config("ingest requires input.reviews")
    })?;
    let format = config.input.format()?;
    manifest.record_input(reviews_path)?;

    let (reviews, mut courses, mut report) = corpus::load_records(reviews_path, format)?;
    if let Some(courses_path) = &config.input.courses {
        manifest.record_input(courses_path)?;
        let (extra_reviews, extra_courses, extra_report) =
            corpus::load_records(courses_path, InputFormat::Jsonl)?;
        if !extra_reviews.is_empty() {
            return Err(Error::invalid_input(format!(
                "courses file {} contains review records",
                courses_path.display()
            )));
        }
        let known: std::collections::HashSet<String> =
            courses.iter().map(|c| c.course_id.clone()).collect();
        courses.extend(
            extra_courses
                .into_iter()
                .filter(|c| !known.contains(&c.course_id)),
        );
        report.rejects.extend(extra_report.rejects);
    }
    report.reviews_loaded = reviews.len();
    report.courses_loaded = courses.len();
    let (corpus, orphans) = Corpus::new(reviews, courses);
    report.orphan_courses_synthesized = orphans;

    // The sidecar is written even when ingestion fails outright.
    let rejects_path = out_dir.join(REJECTS_FILE);
    corpus::write_rejects(&report.rejects, &rejects_path)?;
    if corpus.review_count() == 0 {
        return Err(Error::invalid_input(format!(
            "no valid review records in {} ({} rejects; see {})",
            reviews_path.display(),
            report.rejects.len(),
            rejects_path.display()
        )));
    }

    outcome.lines.push(format!(
        "loaded {} reviews, {} courses ({} rejects, {} orphan stubs, {} duplicate user/course pairs)",
        report.reviews_loaded,
        report.courses_loaded,
        report.rejects.len(),
        report.orphan_courses_synthesized,
        report.duplicate_user_course
    ));

    let corpus = match &config.filter.language {
        Some(code) => {
            let filtered = corpus::filter_language(&corpus, code);
            outcome.lines.push(format!(
                "language filter {:?}: kept {} of {} reviews",
                code,
                filtered.review_count(),
                corpus.review_count()
            ));
            filtered
        }
        None => corpus,
    };
    let (corpus, min_report) = corpus::filter_min_reviews(&corpus, config.filter.min_reviews)?;
    outcome.lines.push(format!(
        "min-review filter (>= {}): removed {} courses ({:.1}%), {} reviews",
        config.filter.min_reviews,
        min_report.removed_courses,
        100.0 * min_report.removed_course_fraction,
        min_report.removed_reviews
    ));

    let corpus_path = out_dir.join(CORPUS_FILE);
    corpus::save_corpus(&corpus, &corpus_path)?;

    #[derive(Serialize)]
    struct IngestSummary<'a> {
        ingest: &'a IngestReport,
        min_reviews: &'a corpus::MinReviewsReport,
        final_reviews: usize,
        final_courses: usize,
    }
    let report_path = out_dir.join(INGEST_REPORT_FILE);
    write_json(
        &report_path,
        &IngestSummary {
            ingest: &report,
            min_reviews: &min_report,
            final_reviews: corpus.review_count(),
            final_courses: corpus.course_count(),
        },
    )?;

    manifest.record_output(&corpus_path)?;
    manifest.record_output(&rejects_path)?;
    manifest.record_output(&report_path)?;
    outcome.lines.push(format!(
        "wrote {} ({} reviews, {} courses)",
        corpus_path.display(),
        corpus.review_count(),
        corpus.course_count()
    ));
    Ok(())
}

// -------------------------------------------------------------- preprocess

fn load_lemmatizer(config: &RunConfig) -> Result<Lemmatizer> {
    match &config.lexicons.lemma_exceptions {
        Some(path) => Lemmatizer::from_path(path),
        None => Ok(Lemmatizer::bundled().clone()),
    }
}

fn load_stopwords(config: &RunConfig) -> Result<StopwordList> {
    match &config.lexicons.stopwords {
        Some(path) => StopwordList::from_path(path),
        None => Ok(StopwordList::bundled().clone()),
    }
}

fn load_category_lexicon(config: &RunConfig) -> Result<CategoryLexicon> {
    match &config.lexicons.category {
        Some(path) => CategoryLexicon::from_path(path),
        None => Ok(CategoryLexicon::bundled().clone()),
    }
}

fn run_preprocess(
    config: &RunConfig,
    out_dir: &Path,
    manifest: &mut StageManifest,
    outcome: &mut StageOutcome,
) -> Result<()> {
    let corpus_path = out_dir.join(CORPUS_FILE);
    manifest.record_input(&corpus_path)?;
    let (corpus, _) = corpus::load_corpus(&corpus_path, InputFormat::Jsonl)?;

    let lemmatizer = load_lemmatizer(config)?;
    let stopwords = load_stopwords(config)?;
    let lexicon = load_category_lexicon(config)?;
    for path in [
        &config.lexicons.lemma_exceptions,
        &config.lexicons.stopwords,
        &config.lexicons.category,
    ]
    .into_iter()
    .flatten()
    {
        manifest.record_input(path)?;
    }

    let docs: Vec<TokenDoc> = corpus
        .reviews()
        .iter()
        .map(|r| textprep::preprocess_review(&r.review_id, &r.text, &lemmatizer, &stopwords))
        .collect();
    let table = textprep::build_frequency_table(&docs);
    let candidates = textprep::nominate_candidates(&table, config.preprocess.min_count);
    let qual: Vec<TokenDoc> = docs
        .iter()
        .map(|d| textprep::project_vocabulary(d, &lexicon, WordCategory::Qualitative))
        .collect();
    let content: Vec<TokenDoc> = docs
        .iter()
        .map(|d| textprep::project_vocabulary(d, &lexicon, WordCategory::Content))
        .collect();
    let qual_empty = qual.iter().filter(|d| d.lemmas.is_empty()).count();
    let content_empty = content.iter().filter(|d| d.lemmas.is_empty()).count();

    let tokendocs_path = out_dir.join(TOKENDOCS_FILE);
    write_jsonl(&tokendocs_path, &docs)?;
    let qual_path = out_dir.join(QUAL_DOCS_FILE);
    write_jsonl(&qual_path, &qual)?;
    let content_path = out_dir.join(CONTENT_DOCS_FILE);
    write_jsonl(&content_path, &content)?;

    let frequency_path = out_dir.join(FREQUENCY_FILE);
    {
        let file = File::create(&frequency_path).map_err(|e| Error::io(&frequency_path, e))?;
        let mut w = BufWriter::new(file);
        writeln!(w, "word,count").map_err(|e| Error::io(&frequency_path, e))?;
        for (word, count) in table.iter() {
            writeln!(w, "{word},{count}").map_err(|e| Error::io(&frequency_path, e))?;
        }
    }
    let candidates_path = out_dir.join(CANDIDATES_FILE);
    {
        let file = File::create(&candidates_path).map_err(|e| Error::io(&candidates_path, e))?;
        let mut w = BufWriter::new(file);
        writeln!(w, "rank,word,count").map_err(|e| Error::io(&candidates_path, e))?;
        for (rank, word) in candidates.iter().enumerate() {
            writeln!(w, "{},{word},{}", rank + 1, table.count(word))
                .map_err(|e| Error::io(&candidates_path, e))?;
        }
    }

    #[derive(Serialize)]
    struct PreprocessSummary {
        docs: usize,
        total_lemmas: u64,
        distinct_lemmas: usize,
        candidates: usize,
        qual_empty_projections: usize,
        content_empty_projections: usize,
    }
    let report_path = out_dir.join(PREPROCESS_REPORT_FILE);
    write_json(
        &report_path,
        &PreprocessSummary {
            docs: docs.len(),
            total_lemmas: table.total_tokens(),
            distinct_lemmas: table.distinct_words(),
            candidates: candidates.len(),
            qual_empty_projections: qual_empty,
            content_empty_projections: content_empty,
        },
    )?;

    for path in [
        &tokendocs_path,
        &qual_path,
        &content_path,
        &frequency_path,
        &candidates_path,
        &report_path,
    ] {
        manifest.record_output(path)?;
    }
    outcome.lines.push(format!(
        "preprocessed {} docs, {} lemma tokens, {} distinct ({} candidates above {})",
        docs.len(),
        table.total_tokens(),
        table.distinct_words(),
        candidates.len(),
        config.preprocess.min_count
    ));
    outcome.lines.push(format!(
        "projections: {} qualitative-empty, {} content-empty",
        qual_empty, content_empty
    ));
    Ok(())
}

// --------------------------------------------------------------- sentiment

fn load_valence(config: &RunConfig) -> Result<ValenceLexicon> {
    match (
        &config.lexicons.valence,
        &config.lexicons.boosters,
        &config.lexicons.negators,
    ) {
        (None, None, None) => Ok(ValenceLexicon::bundled().clone()),
        (valence, boosters, negators) => {
            let read = |p: &Option<PathBuf>, bundled: &str| -> Result<String> {
                match p {
                    Some(path) => {
                        std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
                    }
                    None => Ok(bundled.to_string()),
                }
            };
            ValenceLexicon::parse(
                &read(valence, include_str!("../../data/valence.tsv"))?,
                &read(boosters, include_str!("../../data/boosters.tsv"))?,
                &read(negators, include_str!("../../data/negators.txt"))?,
            )
        }
    }
}

fn load_polarity(config: &RunConfig) -> Result<PolarityLexicon> {
    match (&config.lexicons.polarity, &config.lexicons.boosters) {
        (None, None) => Ok(PolarityLexicon::bundled().clone()),
        (polarity, boosters) => {
            let read = |p: &Option<PathBuf>, bundled: &str| -> Result<String> {
                match p {
                    Some(path) => {
                        std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
                    }
                    None => Ok(bundled.to_string()),
                }
            };
            PolarityLexicon::parse(
                &read(polarity, include_str!("../../data/polarity.tsv"))?,
                &read(boosters, include_str!("../../data/boosters.tsv"))?,
            )
        }
    }
}

fn sentiment_tokens(review: &Review, raw: bool) -> Vec<String> {
    if raw {
        review.text.split_whitespace().map(String::from).collect()
    } else {
        textprep::tokenize(&textprep::clean_text(&review.text))
    }
}

fn run_sentiment(
    config: &RunConfig,
    out_dir: &Path,
    manifest: &mut StageManifest,
    outcome: &mut StageOutcome,
) -> Result<()> {
    let corpus_path = out_dir.join(CORPUS_FILE);
    manifest.record_input(&corpus_path)?;
    let (corpus, _) = corpus::load_corpus(&corpus_path, InputFormat::Jsonl)?;
    let engine = config.sentiment.engine()?;
    let thresholds = LabelThresholds {
        positive: config.sentiment.pos_threshold,
        negative: config.sentiment.neg_threshold,
    };
    let options = ValenceRuleOptions {
        alpha: config.sentiment.alpha,
        negation_factor: config.sentiment.negation_factor,
    };

    let mut unknown = Vec::new();
    let mut rejects = 0usize;
    let scores: Vec<SentimentScore> = match engine {
        Engine::External => {
            let labels_path = config.input.external_labels.as_ref().ok_or_else(|| {
                Error::invalid_config("sentiment.engine = external requires input.external_labels")
            })?;
            manifest.record_input(labels_path)?;
            let outcome_import = sentiment::import_external_labels(labels_path)?;
            rejects = outcome_import.rejects.len();
            unknown = sentiment::unknown_review_ids(&outcome_import.scores, &corpus);
            outcome_import
                .scores
                .into_iter()
                .filter(|s| corpus.review_by_id(&s.review_id).is_some())
                .collect()
        }
        native => {
            let valence = load_valence(config)?;
            let polarity = load_polarity(config)?;
            corpus
                .reviews()
                .iter()
                .map(|r| {
                    let tokens = sentiment_tokens(r, config.sentiment.score_raw_text);
                    sentiment::score_review(
                        &r.review_id,
                        &tokens,
                        native,
                        &valence,
                        &polarity,
                        options,
                        thresholds,
                    )
                })
                .collect::<Result<Vec<_>>>()?
        }
    };

    let scores_path = out_dir.join(SCORES_FILE);
    write_jsonl(&scores_path, &scores)?;
    let (course_sentiment, excluded) = sentiment::aggregate_course_sentiment(&scores, &corpus);
    let course_path = out_dir.join(COURSE_SENTIMENT_FILE);
    write_jsonl(&course_path, &course_sentiment)?;

    let correlations = if scores.iter().any(|s| s.compound.is_some()) {
        let pearson = sentiment::correlate_sentiment_rating(
            &scores,
            &corpus,
            sentiment::CorrelationMethod::Pearson,
        );
        let spearman = sentiment::correlate_sentiment_rating(
            &scores,
            &corpus,
            sentiment::CorrelationMethod::Spearman,
        );
        Some((
            pearson.map_err(|e| e.to_string()),
            spearman.map_err(|e| e.to_string()),
        ))
    } else {
        None
    };

    #[derive(Serialize)]
    struct SentimentSummary {
        engine: Engine,
        scores: usize,
        label_counts: BTreeMap<String, usize>,
        pearson: Option<std::result::Result<f64, String>>,
        spearman: Option<std::result::Result<f64, String>>,
        excluded_courses: Vec<String>,
        unknown_review_ids: Vec<String>,
        import_rejects: usize,
    }
    let mut label_counts: BTreeMap<String, usize> = BTreeMap::new();
    for s in &scores {
        *label_counts.entry(s.label.to_string()).or_insert(0) += 1;
    }
    let report_path = out_dir.join(SENTIMENT_REPORT_FILE);
    write_json(
        &report_path,
        &SentimentSummary {
            engine,
            scores: scores.len(),
            label_counts,
            pearson: correlations.as_ref().map(|(p, _)| p.clone()),
            spearman: correlations.as_ref().map(|(_, s)| s.clone()),
            excluded_courses: excluded,
            unknown_review_ids: unknown,
            import_rejects: rejects,
        },
    )?;

    manifest.record_output(&scores_path)?;
    manifest.record_output(&course_path)?;
    manifest.record_output(&report_path)?;
    outcome.lines.push(format!(
        "scored {} reviews with {engine}",
        scores.len()
    ));
    if let Some((Ok(p), Ok(s))) = &correlations {
        outcome
            .lines
            .push(format!("rating correlation: pearson {p:.4}, spearman {s:.4}"));
    }
    Ok(())
}

// --------------------------------------------------------------- lda-train

fn read_tokendocs(path: &Path) -> Result<Vec<TokenDoc>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut docs = Vec::new();
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let doc: TokenDoc = serde_json::from_str(&line).map_err(|e| Error::MalformedFile {
            kind: "tokendoc",
            path: path.to_path_buf(),
            line: lineno + 1,
            detail: e.to_string(),
        })?;
        docs.push(doc);
    }
    Ok(docs)
}

fn docs_path_for(config: &RunConfig, which: WordCategory, out_dir: &Path) -> PathBuf {
    let model = config.lda.model(which);
    match &model.docs {
        Some(path) => path.clone(),
        None => out_dir.join(match which {
            WordCategory::Qualitative => QUAL_DOCS_FILE,
            WordCategory::Content => CONTENT_DOCS_FILE,
        }),
    }
}

fn write_topics_csv(model: &TopicModel, path: &Path) -> Result<()> {
    let summaries = lda::top_words(model, TOPICS_CSV_TOP_N.min(model.vocab_size()))?;
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    writeln!(w, "topic_id,rank,word,probability").map_err(|e| Error::io(path, e))?;
    let index = model.vocab_index();
    for summary in &summaries {
        for (rank, word) in summary.top_words.iter().enumerate() {
            let prob = model.phi[summary.topic_id][index[word.as_str()]];
            writeln!(w, "{},{},{word},{prob}", summary.topic_id, rank + 1)
                .map_err(|e| Error::io(path, e))?;
        }
    }
    Ok(())
}

fn train_one(
    config: &RunConfig,
    which: WordCategory,
    out_dir: &Path,
    manifest: &mut StageManifest,
    outcome: &mut StageOutcome,
) -> Result<()> {
    let docs_path = docs_path_for(config, which, out_dir);
    manifest.record_input(&docs_path)?;
    let all_docs = read_tokendocs(&docs_path)?;
    let docs: Vec<TokenDoc> = all_docs
        .into_iter()
        .filter(|d| !d.lemmas.is_empty())
        .collect();
    let model_config = config.lda.model(which).lda_config();
    let (label, model_file, topics_file) = match which {
        WordCategory::Qualitative => ("qual", QUAL_MODEL_FILE, QUAL_TOPICS_FILE),
        WordCategory::Content => ("content", CONTENT_MODEL_FILE, CONTENT_TOPICS_FILE),
    };
    manifest.record_seed(label, model_config.seed);
    let model = lda::train_lda(&docs, &model_config)?;
    let model_path = out_dir.join(model_file);
    model.save(&model_path)?;
    let topics_path = out_dir.join(topics_file);
    write_topics_csv(&model, &topics_path)?;
    manifest.record_output(&model_path)?;
    manifest.record_output(&topics_path)?;
    outcome.lines.push(format!(
        "{label}: trained K={} on {} docs ({} vocabulary), {} sweeps, seed {}",
        model.k,
        model.doc_count(),
        model.vocab_size(),
        model.iterations,
        model.seed
    ));
    Ok(())
}

/// Which models the lda-train stage should fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelSelector {
    Qual,
    Content,
    Both,
}

impl std::str::FromStr for ModelSelector {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "qual" => Ok(ModelSelector::Qual),
            "content" => Ok(ModelSelector::Content),
            "both" => Ok(ModelSelector::Both),
            other => Err(Error::invalid_config(format!(
                "model selector must be qual, content or both, got {other:?}"
            ))),
        }
    }
}

fn run_lda_train(
    config: &RunConfig,
    out_dir: &Path,
    manifest: &mut StageManifest,
    outcome: &mut StageOutcome,
) -> Result<()> {
    // The two projection models are always separate; an override can
    // restrict the stage to one of them.
    let selector = ModelSelector::Both;
    if matches!(selector, ModelSelector::Qual | ModelSelector::Both) {
        train_one(config, WordCategory::Qualitative, out_dir, manifest, outcome)?;
    }
    if matches!(selector, ModelSelector::Content | ModelSelector::Both) {
        train_one(config, WordCategory::Content, out_dir, manifest, outcome)?;
    }
    Ok(())
}

// ---------------------------------------------------------- coherence-sweep

fn run_coherence(
    config: &RunConfig,
    out_dir: &Path,
    manifest: &mut StageManifest,
    outcome: &mut StageOutcome,
) -> Result<()> {
    let which = match config.coherence.model.as_str() {
        "qual" => WordCategory::Qualitative,
        "content" => WordCategory::Content,
        other => {
            return Err(Error::invalid_config(format!(
                "coherence.model: unknown projection {other:?}"
            )))
        }
    };
    let docs_path = match &config.coherence.docs {
        Some(path) => path.clone(),
        None => out_dir.join(match which {
            WordCategory::Qualitative => QUAL_DOCS_FILE,
            WordCategory::Content => CONTENT_DOCS_FILE,
        }),
    };
    manifest.record_input(&docs_path)?;
    let docs: Vec<TokenDoc> = read_tokendocs(&docs_path)?
        .into_iter()
        .filter(|d| !d.lemmas.is_empty())
        .collect();

    let sweep = SweepConfig {
        k_min: config.coherence.k_min,
        k_max: config.coherence.k_max,
        step: config.coherence.step,
        top_n: config.coherence.top_n,
        window: config.coherence.window,
        epsilon: config.coherence.epsilon,
        iterations: config.coherence.iterations,
        alpha: None,
        beta: 0.01,
        base_seed: config.coherence.seed,
    };
    manifest.record_seed("coherence_base", sweep.base_seed);
    let report = coherence::sweep_topic_count(&docs, &sweep)?;

    let report_path = out_dir.join(format!("coherence_{}.csv", config.coherence.model));
    {
        let file = File::create(&report_path).map_err(|e| Error::io(&report_path, e))?;
        let mut w = BufWriter::new(file);
        writeln!(w, "k,c_v,c_umass,recommended").map_err(|e| Error::io(&report_path, e))?;
        for entry in &report.entries {
            writeln!(
                w,
                "{},{},{},{}",
                entry.k,
                entry.c_v,
                entry.c_umass,
                entry.k == report.recommended_k
            )
            .map_err(|e| Error::io(&report_path, e))?;
        }
    }
    manifest.record_output(&report_path)?;
    outcome.lines.push(format!(
        "swept K = {}..={} (step {}): recommended K = {}",
        config.coherence.k_min, config.coherence.k_max, config.coherence.step, report.recommended_k
    ));
    for (k, why) in &report.failures {
        outcome.lines.push(format!("K = {k} failed: {why}"));
    }
    Ok(())
}

// -------------------------------------------------------------------- stats

fn read_scores(path: &Path) -> Result<Vec<SentimentScore>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut scores = Vec::new();
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let score: SentimentScore =
            serde_json::from_str(&line).map_err(|e| Error::MalformedFile {
                kind: "sentiment score",
                path: path.to_path_buf(),
                line: lineno + 1,
                detail: e.to_string(),
            })?;
        scores.push(score);
    }
    Ok(scores)
}

/// Per-course majority label and topic-proportion vector, every label.
fn course_label_distributions(
    corpus: &Corpus,
    scores: &[SentimentScore],
    model: &TopicModel,
    docs: &[TokenDoc],
) -> Result<Vec<(sentiment::SentimentLabel, Vec<f64>)>> {
    let weights = lda::doc_topic_weights(model, docs);
    let by_id: std::collections::HashMap<&str, &lda::InferredTopics> =
        weights.iter().map(|w| (w.review_id.as_str(), w)).collect();
    let (summaries, _) = sentiment::aggregate_course_sentiment(scores, corpus);

    let mut rows = Vec::new();
    for summary in &summaries {
        let course_weights: Vec<lda::InferredTopics> = corpus
            .reviews_for(&summary.course_id)
            .filter_map(|r| by_id.get(r.review_id.as_str()).map(|w| (*w).clone()))
            .collect();
        if course_weights.is_empty() {
            continue;
        }
        rows.push((
            summary.majority_label,
            lda::topic_proportions(&course_weights)?,
        ));
    }
    Ok(rows)
}

/// The Positive/Negative subset as a MANOVA matrix; `None` when a second
/// group is missing.
fn grouped_topic_matrix(
    rows: &[(sentiment::SentimentLabel, Vec<f64>)],
) -> Result<Option<GroupedTopicMatrix>> {
    let mut matrix_rows = Vec::new();
    let mut groups = Vec::new();
    for (label, distribution) in rows {
        match label {
            sentiment::SentimentLabel::Positive | sentiment::SentimentLabel::Negative => {
                matrix_rows.push(distribution.clone());
                groups.push(label.to_string());
            }
            sentiment::SentimentLabel::Neutral => {}
        }
    }
    let distinct: std::collections::HashSet<&String> = groups.iter().collect();
    if distinct.len() < 2 {
        return Ok(None);
    }
    Ok(Some(GroupedTopicMatrix::new(matrix_rows, groups)?))
}

fn run_stats(
    config: &RunConfig,
    out_dir: &Path,
    manifest: &mut StageManifest,
    outcome: &mut StageOutcome,
) -> Result<()> {
    let corpus_path = out_dir.join(CORPUS_FILE);
    manifest.record_input(&corpus_path)?;
    let (corpus, _) = corpus::load_corpus(&corpus_path, InputFormat::Jsonl)?;

    // Histogram.
    let histogram = stats::rating_histogram(&corpus)?;
    let histogram_path = out_dir.join(HISTOGRAM_FILE);
    {
        let file = File::create(&histogram_path).map_err(|e| Error::io(&histogram_path, e))?;
        let mut w = BufWriter::new(file);
        writeln!(w, "rating,count,percentage").map_err(|e| Error::io(&histogram_path, e))?;
        for (value, count, pct) in histogram.percentages() {
            writeln!(w, "{value},{count},{pct}").map_err(|e| Error::io(&histogram_path, e))?;
        }
    }
    manifest.record_output(&histogram_path)?;
    outcome.lines.push(format!(
        "rating histogram over {} reviews",
        histogram.total
    ));

    // Course-mean bins.
    let bins = stats::course_mean_distribution(&corpus, &config.stats.bin_edges)?;
    let bins_path = out_dir.join(COURSE_BINS_FILE);
    {
        let file = File::create(&bins_path).map_err(|e| Error::io(&bins_path, e))?;
        let mut w = BufWriter::new(file);
        writeln!(w, "bin_start,bin_end,count").map_err(|e| Error::io(&bins_path, e))?;
        for (i, count) in bins.counts.iter().enumerate() {
            writeln!(w, "{},{},{count}", bins.edges[i], bins.edges[i + 1])
                .map_err(|e| Error::io(&bins_path, e))?;
        }
    }
    manifest.record_output(&bins_path)?;

    // Correlations + MANOVA need scores; topic groups need a model.
    let scores_path = out_dir.join(SCORES_FILE);
    let mut manova_json: Option<serde_json::Value> = None;
    let mut perm_json: Option<serde_json::Value> = None;
    let mut pearson = None;
    let mut spearman = None;
    let mut by_sentiment_note = None;
    if scores_path.exists() {
        manifest.record_input(&scores_path)?;
        let scores = read_scores(&scores_path)?;
        pearson = Some(
            sentiment::correlate_sentiment_rating(
                &scores,
                &corpus,
                sentiment::CorrelationMethod::Pearson,
            )
            .map_err(|e| e.to_string()),
        );
        spearman = Some(
            sentiment::correlate_sentiment_rating(
                &scores,
                &corpus,
                sentiment::CorrelationMethod::Spearman,
            )
            .map_err(|e| e.to_string()),
        );

        let (which_file, which_docs) = match config.stats.manova_model.as_str() {
            "content" => (CONTENT_MODEL_FILE, CONTENT_DOCS_FILE),
            _ => (QUAL_MODEL_FILE, QUAL_DOCS_FILE),
        };
        let model_path = out_dir.join(which_file);
        let docs_path = out_dir.join(which_docs);
        if model_path.exists() && docs_path.exists() {
            manifest.record_input(&model_path)?;
            manifest.record_input(&docs_path)?;
            let model = TopicModel::load(&model_path)?;
            let docs = read_tokendocs(&docs_path)?;
            let rows = course_label_distributions(&corpus, &scores, &model, &docs)?;

            // Per-label mean distributions, every observed label.
            let by_sentiment_path = out_dir.join(TOPICS_BY_SENTIMENT_FILE);
            {
                let borrowed: Vec<(sentiment::SentimentLabel, &[f64])> =
                    rows.iter().map(|(l, d)| (*l, d.as_slice())).collect();
                let (means, _) = stats::mean_distribution_by_label(&borrowed);
                let labels = topic_labels(&model, &None, 3)?;
                let file = File::create(&by_sentiment_path)
                    .map_err(|e| Error::io(&by_sentiment_path, e))?;
                let mut w = BufWriter::new(file);
                writeln!(w, "label,topic_id,topic_label,value")
                    .map_err(|e| Error::io(&by_sentiment_path, e))?;
                for (label, mean) in &means {
                    for (topic, value) in mean.iter().enumerate() {
                        writeln!(w, "{label},{topic},{},{value}", labels[topic])
                            .map_err(|e| Error::io(&by_sentiment_path, e))?;
                    }
                }
            }
            manifest.record_output(&by_sentiment_path)?;

            match grouped_topic_matrix(&rows)? {
                Some(matrix) => {
                    manifest.record_seed("permutation", config.stats.seed);
                    match stats::manova_pillai(&matrix) {
                        Ok(result) => manova_json = Some(serde_json::to_value(&result)?),
                        Err(e) => {
                            manova_json =
                                Some(serde_json::json!({ "skipped": e.to_string() }))
                        }
                    }
                    match stats::permutation_test(
                        &matrix,
                        PermutationStatistic::Pillai,
                        config.stats.permutations,
                        config.stats.seed,
                    ) {
                        Ok(p) => {
                            perm_json = Some(serde_json::json!({
                                "p_value": p,
                                "permutations": config.stats.permutations,
                                "seed": config.stats.seed,
                            }))
                        }
                        Err(e) => {
                            perm_json = Some(serde_json::json!({ "skipped": e.to_string() }))
                        }
                    }
                }
                None => {
                    by_sentiment_note =
                        Some("fewer than two sentiment groups; MANOVA skipped".to_string());
                }
            }
        } else {
            by_sentiment_note = Some(format!(
                "model or docs missing ({}); run lda-train first",
                model_path.display()
            ));
        }
    } else {
        by_sentiment_note = Some("scores.jsonl missing; run sentiment first".to_string());
    }

    #[derive(Serialize)]
    struct StatsSummary {
        pearson: Option<std::result::Result<f64, String>>,
        spearman: Option<std::result::Result<f64, String>>,
        manova: Option<serde_json::Value>,
        permutation: Option<serde_json::Value>,
        note: Option<String>,
        bins_outside_range: usize,
    }
    let report_path = out_dir.join(STATS_REPORT_FILE);
    write_json(
        &report_path,
        &StatsSummary {
            pearson,
            spearman,
            manova: manova_json,
            permutation: perm_json,
            note: by_sentiment_note.clone(),
            bins_outside_range: bins.outside,
        },
    )?;
    manifest.record_output(&report_path)?;
    if let Some(note) = by_sentiment_note {
        outcome.lines.push(note);
    } else {
        outcome.lines.push("group statistics written".to_string());
    }
    Ok(())
}

// -------------------------------------------------------------- characterize

fn topic_labels(
    model: &TopicModel,
    label_file: &Option<PathBuf>,
    top_words: usize,
) -> Result<Vec<String>> {
    let summaries = lda::top_words(model, top_words.max(3).min(model.vocab_size()))?;
    let mut labels: Vec<String> = summaries.iter().map(|s| s.display_label()).collect();
    if let Some(path) = label_file {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (id, label) = line.split_once('\t').ok_or_else(|| Error::MalformedFile {
                kind: "topic labels",
                path: path.clone(),
                line: lineno + 1,
                detail: "expected topic_id<TAB>label".to_string(),
            })?;
            let id: usize = id.trim().parse().map_err(|_| Error::MalformedFile {
                kind: "topic labels",
                path: path.clone(),
                line: lineno + 1,
                detail: format!("bad topic id {id:?}"),
            })?;
            if id >= labels.len() {
                return Err(Error::invalid_input(format!(
                    "topic label file {} names topic {id}, model has {}",
                    path.display(),
                    labels.len()
                )));
            }
            labels[id] = label.trim().to_string();
        }
    }
    Ok(labels)
}

fn run_characterize(
    config: &RunConfig,
    out_dir: &Path,
    manifest: &mut StageManifest,
    outcome: &mut StageOutcome,
) -> Result<()> {
    let corpus_path = out_dir.join(CORPUS_FILE);
    let scores_path = out_dir.join(SCORES_FILE);
    let qual_model_path = out_dir.join(QUAL_MODEL_FILE);
    let content_model_path = out_dir.join(CONTENT_MODEL_FILE);
    let qual_docs_path = docs_path_for(config, WordCategory::Qualitative, out_dir);
    let content_docs_path = docs_path_for(config, WordCategory::Content, out_dir);
    for path in [
        &corpus_path,
        &scores_path,
        &qual_model_path,
        &content_model_path,
        &qual_docs_path,
        &content_docs_path,
    ] {
        manifest.record_input(path)?;
    }

    let (corpus, _) = corpus::load_corpus(&corpus_path, InputFormat::Jsonl)?;
    let scores = read_scores(&scores_path)?;
    let engine = scores.first().map(|s| s.engine).unwrap_or(Engine::ValenceRule);
    let qual_model = TopicModel::load(&qual_model_path)?;
    let content_model = TopicModel::load(&content_model_path)?;
    let qual_docs = read_tokendocs(&qual_docs_path)?;
    let content_docs = read_tokendocs(&content_docs_path)?;

    let qual_labels = topic_labels(
        &qual_model,
        &config.characterize.qual_labels,
        config.characterize.top_words,
    )?;
    let content_labels = topic_labels(
        &content_model,
        &config.characterize.content_labels,
        config.characterize.top_words,
    )?;
    let order = match config.characterize.order_by.as_str() {
        "mean_rating" => ProfileOrder::ByMeanRating,
        _ => ProfileOrder::ByReviews,
    };

    let (profiles, skipped) = characterize::build_profiles(
        &corpus,
        &scores,
        engine,
        characterize::ModelInputs {
            model: &qual_model,
            docs: &qual_docs,
            labels: &qual_labels,
        },
        characterize::ModelInputs {
            model: &content_model,
            docs: &content_docs,
            labels: &content_labels,
        },
        order,
    )?;

    let json_path = out_dir.join(PROFILES_JSON_FILE);
    characterize::emit_report(&profiles, ReportFormat::Json, &json_path)?;
    let csv_path = out_dir.join(PROFILES_CSV_FILE);
    characterize::emit_report(&profiles, ReportFormat::Csv, &csv_path)?;
    let plot_path = out_dir.join(PLOT_DATA_FILE);
    characterize::emit_plot_data(&profiles, &plot_path)?;

    for path in [&json_path, &csv_path, &plot_path] {
        manifest.record_output(path)?;
    }
    outcome.lines.push(format!(
        "characterized {} courses ({} without scores skipped, {} flagged low evidence)",
        profiles.len(),
        skipped.len(),
        profiles.iter().filter(|p| p.low_evidence).count()
    ));
    Ok(())
}

// -------------------------------------------------------------------- synth

/// Fixture vocabulary drawn from the bundled category lexicon: balanced
/// qualitative/content words so planted corpora survive projection.
pub fn lexicon_vocabulary(size: usize) -> Result<Vec<String>> {
    let lexicon = CategoryLexicon::bundled();
    let qual: Vec<&str> = lexicon.words_of(WordCategory::Qualitative).collect();
    let content: Vec<&str> = lexicon.words_of(WordCategory::Content).collect();
    let mut words = Vec::with_capacity(size);
    let mut qi = qual.iter();
    let mut ci = content.iter();
    while words.len() < size {
        match (qi.next(), ci.next()) {
            (Some(q), Some(c)) => {
                words.push(q.to_string());
                if words.len() < size {
                    words.push(c.to_string());
                }
            }
            (Some(q), None) => words.push(q.to_string()),
            (None, Some(c)) => words.push(c.to_string()),
            (None, None) => {
                return Err(Error::invalid_input(format!(
                    "bundled lexicon has fewer than {size} words"
                )))
            }
        }
    }
    Ok(words)
}

/// Expand a synth config section into a full planted spec.
pub fn planted_spec_from(s: &super::config::SynthConfig) -> Result<PlantedSpec> {
    let vocabulary = match s.vocabulary_source.as_str() {
        "lexicon" => Some(lexicon_vocabulary(s.vocab_size)?),
        _ => None,
    };
    Ok(PlantedSpec {
        k: s.k,
        vocab_size: s.vocab_size,
        docs: s.docs,
        doc_len: s.doc_len,
        alpha: s.alpha,
        beta: s.beta,
        rating_mix: s.rating_mix.clone(),
        seed: s.seed,
        courses: s.courses,
        empty_courses: s.empty_courses,
        language_mix: s.language_mix.clone(),
        vocabulary,
    })
}

fn run_synth(
    config: &RunConfig,
    out_dir: &Path,
    manifest: &mut StageManifest,
    outcome: &mut StageOutcome,
) -> Result<()> {
    let s = &config.synth;
    let spec = planted_spec_from(s)?;
    manifest.record_seed("synth", spec.seed);
    let (corpus, truth) = synth::generate_corpus(&spec)?;

    let corpus_path = out_dir.join(SYNTH_CORPUS_FILE);
    corpus::save_corpus(&corpus, &corpus_path)?;
    let truth_path = out_dir.join(TRUTH_FILE);
    truth.save(&truth_path)?;
    let docs: Vec<TokenDoc> = corpus
        .reviews()
        .iter()
        .map(|r| TokenDoc {
            review_id: r.review_id.clone(),
            lemmas: r.text.split_whitespace().map(String::from).collect(),
        })
        .collect();
    let docs_path = out_dir.join(SYNTH_DOCS_FILE);
    write_jsonl(&docs_path, &docs)?;

    for path in [&corpus_path, &truth_path, &docs_path] {
        manifest.record_output(path)?;
    }
    outcome.lines.push(format!(
        "planted corpus: {} reviews, {} courses, K={}, V={}, seed {}",
        corpus.review_count(),
        corpus.course_count(),
        s.k,
        s.vocab_size,
        s.seed
    ));
    Ok(())
}

// ------------------------------------------------------------------ helpers

fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for item in items {
        serde_json::to_writer(&mut w, item)?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}
