use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use reviewkit::pipeline::{self, RunConfig, Stage};
use reviewkit::Error;

#[derive(Parser)]
#[command(
    name = "reviewkit",
    version,
    about = "Course-review corpus analytics: ingestion, preprocessing, dual topic models, lexicon sentiment, statistics, and per-course reports"
)]
struct Cli {
    /// TOML run configuration; defaults to $REVIEWKIT_CONFIG, then
    /// ./reviewkit.toml when present, then built-in defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory (overrides [output].dir).
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load reviews, validate records, filter by language and review count.
    Ingest {
        /// Review file (JSONL or CSV).
        #[arg(long)]
        reviews: Option<PathBuf>,
        /// Input format: jsonl or csv.
        #[arg(long)]
        format: Option<String>,
        /// Extra course records (JSONL).
        #[arg(long)]
        courses: Option<PathBuf>,
        /// Keep only reviews in this language.
        #[arg(long)]
        language: Option<String>,
        /// Disable the language filter.
        #[arg(long)]
        no_language_filter: bool,
        /// Minimum reviews per course.
        #[arg(long)]
        min_reviews: Option<usize>,
    },
    /// Clean, tokenize, lemmatize, drop stopwords, project vocabularies.
    Preprocess {
        /// Stopword file override (one word per line).
        #[arg(long)]
        stopwords: Option<PathBuf>,
        /// Category lexicon override (word<TAB>Q|C).
        #[arg(long)]
        category_lexicon: Option<PathBuf>,
        /// Lemmatizer exception table override (word<TAB>lemma).
        #[arg(long)]
        lemma_exceptions: Option<PathBuf>,
        /// Frequency threshold for candidate nomination.
        #[arg(long)]
        min_count: Option<u64>,
    },
    /// Score review sentiment and aggregate to course level.
    Sentiment {
        /// Engine: valence_rule, polarity_avg or external.
        #[arg(long)]
        engine: Option<String>,
        #[arg(long)]
        pos_threshold: Option<f64>,
        #[arg(long)]
        neg_threshold: Option<f64>,
        /// Score whitespace-split raw text instead of cleaned tokens.
        #[arg(long)]
        score_raw_text: bool,
        /// External labels (JSONL {review_id, label}).
        #[arg(long)]
        external_labels: Option<PathBuf>,
    },
    /// Train the qualitative and content topic models.
    LdaTrain {
        /// Topic count for the qualitative model.
        #[arg(long)]
        k_qual: Option<usize>,
        /// Topic count for the content model.
        #[arg(long)]
        k_content: Option<usize>,
        /// Gibbs sweeps for both models.
        #[arg(long)]
        iterations: Option<usize>,
        #[arg(long)]
        seed_qual: Option<u64>,
        #[arg(long)]
        seed_content: Option<u64>,
        /// Training docs override for the qualitative model.
        #[arg(long)]
        qual_docs: Option<PathBuf>,
        /// Training docs override for the content model.
        #[arg(long)]
        content_docs: Option<PathBuf>,
    },
    /// Train one model per K and report C_v / C_umass coherence.
    CoherenceSweep {
        /// Projection to sweep: qual or content.
        #[arg(long)]
        model: Option<String>,
        #[arg(long)]
        k_min: Option<usize>,
        #[arg(long)]
        k_max: Option<usize>,
        #[arg(long)]
        step: Option<usize>,
        /// Gibbs sweeps per candidate K.
        #[arg(long)]
        iterations: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Docs override (defaults to the swept projection's docs).
        #[arg(long)]
        docs: Option<PathBuf>,
    },
    /// Rating distributions, correlations, and the sentiment-group MANOVA.
    Stats {
        /// Permutation replicates for the label test.
        #[arg(long)]
        permutations: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Projection for the MANOVA rows: qual or content.
        #[arg(long)]
        manova_model: Option<String>,
    },
    /// Assemble per-course profiles, reports, and plot data.
    Characterize {
        /// Profile order: n_reviews or mean_rating.
        #[arg(long)]
        order_by: Option<String>,
        /// Words shown in default topic labels.
        #[arg(long)]
        top_words: Option<usize>,
    },
    /// Generate a planted-topic synthetic corpus with ground truth.
    Synth {
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        vocab_size: Option<usize>,
        #[arg(long)]
        docs: Option<usize>,
        #[arg(long)]
        doc_len: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        courses: Option<usize>,
        #[arg(long)]
        empty_courses: Option<usize>,
        /// Word source: lexicon or synthetic.
        #[arg(long)]
        vocabulary_source: Option<String>,
    },
    /// Re-check artifact digests against the stage manifests.
    Verify,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(lines) => {
            for line in lines {
                println!("{line}");
            }
            ExitCode::SUCCESS
        }
        Err(Error::InvalidConfig(msg)) => {
            eprintln!("error: invalid configuration: {msg}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn load_config(cli_path: &Option<PathBuf>) -> reviewkit::Result<RunConfig> {
    if let Some(path) = cli_path {
        return RunConfig::load(path);
    }
    if let Ok(path) = std::env::var(pipeline::CONFIG_ENV_VAR) {
        return RunConfig::load(PathBuf::from(path));
    }
    let default = PathBuf::from(pipeline::DEFAULT_CONFIG_PATH);
    if default.exists() {
        return RunConfig::load(default);
    }
    Ok(RunConfig::default())
}

fn run(cli: Cli) -> reviewkit::Result<Vec<String>> {
    let mut config = load_config(&cli.config)?;
    let mut overrides: Vec<String> = Vec::new();
    macro_rules! set {
        ($opt:expr, $target:expr, $flag:literal) => {
            if let Some(value) = $opt {
                overrides.push(format!("--{}={:?}", $flag, value));
                $target = Some(value);
            }
        };
        (plain $opt:expr, $target:expr, $flag:literal) => {
            if let Some(value) = $opt {
                overrides.push(format!("--{}={}", $flag, value));
                $target = value;
            }
        };
    }
    if let Some(dir) = cli.out_dir {
        overrides.push(format!("--out-dir={}", dir.display()));
        config.output.dir = dir;
    }

    let stage = match cli.command {
        Command::Ingest {
            reviews,
            format,
            courses,
            language,
            no_language_filter,
            min_reviews,
        } => {
            set!(reviews, config.input.reviews, "reviews");
            set!(format, config.input.format, "format");
            set!(courses, config.input.courses, "courses");
            set!(language, config.filter.language, "language");
            if no_language_filter {
                overrides.push("--no-language-filter".to_string());
                config.filter.language = None;
            }
            set!(plain min_reviews, config.filter.min_reviews, "min-reviews");
            Stage::Ingest
        }
        Command::Preprocess {
            stopwords,
            category_lexicon,
            lemma_exceptions,
            min_count,
        } => {
            set!(stopwords, config.lexicons.stopwords, "stopwords");
            set!(category_lexicon, config.lexicons.category, "category-lexicon");
            set!(
                lemma_exceptions,
                config.lexicons.lemma_exceptions,
                "lemma-exceptions"
            );
            set!(plain min_count, config.preprocess.min_count, "min-count");
            Stage::Preprocess
        }
        Command::Sentiment {
            engine,
            pos_threshold,
            neg_threshold,
            score_raw_text,
            external_labels,
        } => {
            set!(plain engine, config.sentiment.engine, "engine");
            set!(plain pos_threshold, config.sentiment.pos_threshold, "pos-threshold");
            set!(plain neg_threshold, config.sentiment.neg_threshold, "neg-threshold");
            if score_raw_text {
                overrides.push("--score-raw-text".to_string());
                config.sentiment.score_raw_text = true;
            }
            set!(external_labels, config.input.external_labels, "external-labels");
            Stage::Sentiment
        }
        Command::LdaTrain {
            k_qual,
            k_content,
            iterations,
            seed_qual,
            seed_content,
            qual_docs,
            content_docs,
        } => {
            set!(plain k_qual, config.lda.qual.k, "k-qual");
            set!(plain k_content, config.lda.content.k, "k-content");
            if let Some(iterations) = iterations {
                overrides.push(format!("--iterations={iterations}"));
                config.lda.qual.iterations = iterations;
                config.lda.content.iterations = iterations;
            }
            set!(plain seed_qual, config.lda.qual.seed, "seed-qual");
            set!(plain seed_content, config.lda.content.seed, "seed-content");
            set!(qual_docs, config.lda.qual.docs, "qual-docs");
            set!(content_docs, config.lda.content.docs, "content-docs");
            Stage::LdaTrain
        }
        Command::CoherenceSweep {
            model,
            k_min,
            k_max,
            step,
            iterations,
            seed,
            docs,
        } => {
            set!(plain model, config.coherence.model, "model");
            set!(plain k_min, config.coherence.k_min, "k-min");
            set!(plain k_max, config.coherence.k_max, "k-max");
            set!(plain step, config.coherence.step, "step");
            set!(plain iterations, config.coherence.iterations, "iterations");
            set!(plain seed, config.coherence.seed, "seed");
            set!(docs, config.coherence.docs, "docs");
            Stage::CoherenceSweep
        }
        Command::Stats {
            permutations,
            seed,
            manova_model,
        } => {
            set!(plain permutations, config.stats.permutations, "permutations");
            set!(plain seed, config.stats.seed, "seed");
            set!(plain manova_model, config.stats.manova_model, "manova-model");
            Stage::Stats
        }
        Command::Characterize { order_by, top_words } => {
            set!(plain order_by, config.characterize.order_by, "order-by");
            set!(plain top_words, config.characterize.top_words, "top-words");
            Stage::Characterize
        }
        Command::Synth {
            k,
            vocab_size,
            docs,
            doc_len,
            seed,
            courses,
            empty_courses,
            vocabulary_source,
        } => {
            set!(plain k, config.synth.k, "k");
            set!(plain vocab_size, config.synth.vocab_size, "vocab-size");
            set!(plain docs, config.synth.docs, "docs");
            set!(plain doc_len, config.synth.doc_len, "doc-len");
            set!(plain seed, config.synth.seed, "seed");
            set!(plain courses, config.synth.courses, "courses");
            set!(plain empty_courses, config.synth.empty_courses, "empty-courses");
            set!(plain vocabulary_source, config.synth.vocabulary_source, "vocabulary-source");
            Stage::Synth
        }
        Command::Verify => Stage::Verify,
    };

    config.validate()?;
    let outcome = pipeline::run_stage(stage, &config, overrides)?;
    let mut lines = vec![format!("[{}]", outcome.stage)];
    lines.extend(outcome.lines);
    Ok(lines)
}
