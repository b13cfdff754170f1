//! Synthetic corpora with planted topic structure, exact rating and
//! language proportions, and persisted ground truth, for oracle-based
//! testing without any proprietary dataset.
//!
//! Token text is sampled from the planted topic model (phi rows ~
//! Dirichlet(beta), theta rows ~ Dirichlet(alpha), topic-then-word per
//! token). Ratings and language labels are allocated by largest-remainder
//! quota so the constructed proportions are exact, then shuffled.

use std::collections::HashSet;
use std::path::Path;

use rand::distributions::Distribution;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::Gamma;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Course, Platform, Rating, Review};
use crate::error::{Error, Result};
use crate::rng::{rng_from_seed, Xoshiro256PlusPlus};

/// Specification of a planted corpus.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlantedSpec {
    pub k: usize,
    pub vocab_size: usize,
    pub docs: usize,
    pub doc_len: usize,
    pub alpha: f64,
    pub beta: f64,
    /// (half-star rating value, share); shares sum to 1.
    pub rating_mix: Vec<(f64, f64)>,
    pub seed: u64,
    /// Courses to create; the first `courses - empty_courses` receive
    /// reviews, the rest stay empty.
    pub courses: usize,
    pub empty_courses: usize,
    /// (language code, share); shares sum to 1.
    pub language_mix: Vec<(String, f64)>,
    /// Explicit vocabulary; generated synthetic words when absent.
    pub vocabulary: Option<Vec<String>>,
}

impl PlantedSpec {
    pub fn new(k: usize, vocab_size: usize, docs: usize, doc_len: usize, seed: u64) -> Self {
        PlantedSpec {
            k,
            vocab_size,
            docs,
            doc_len,
            alpha: 0.1,
            beta: 0.01,
            rating_mix: vec![(5.0, 1.0)],
            seed,
            courses: 10.min(docs.max(1)),
            empty_courses: 0,
            language_mix: vec![("en".to_string(), 1.0)],
            vocabulary: None,
        }
    }

    /// Rating mix matching the observed full-collection bias: 63%
    /// five-star, 21.5% in the 4–4.5 band, 15.5% below.
    pub fn biased_rating_mix() -> Vec<(f64, f64)> {
        vec![
            (5.0, 0.63),
            (4.5, 0.13),
            (4.0, 0.085),
            (3.5, 0.05),
            (3.0, 0.04),
            (2.5, 0.03),
            (2.0, 0.02),
            (1.5, 0.01),
            (1.0, 0.005),
        ]
    }

    fn validate(&self) -> Result<()> {
        if self.k < 2 {
            return Err(Error::invalid_input("planted K must be at least 2"));
        }
        if self.vocab_size < self.k {
            return Err(Error::invalid_input("vocabulary must be at least K words"));
        }
        if self.docs > 0 && self.doc_len == 0 {
            return Err(Error::invalid_input("doc_len must be positive"));
        }
        if self.alpha <= 0.0 || self.beta <= 0.0 {
            return Err(Error::invalid_input("Dirichlet parameters must be positive"));
        }
        for (mix, what) in [
            (
                self.rating_mix
                    .iter()
                    .map(|(_, p)| *p)
                    .collect::<Vec<f64>>(),
                "rating_mix",
            ),
            (
                self.language_mix.iter().map(|(_, p)| *p).collect(),
                "language_mix",
            ),
        ] {
            let sum: f64 = mix.iter().sum();
            if (sum - 1.0).abs() > 1e-9 {
                return Err(Error::invalid_input(format!("{what} sums to {sum}, not 1")));
            }
            if mix.iter().any(|p| *p < 0.0) {
                return Err(Error::invalid_input(format!("{what} has negative share")));
            }
        }
        for (value, _) in &self.rating_mix {
            if Rating::from_value(*value).is_none() {
                return Err(Error::invalid_input(format!(
                    "rating_mix value {value} is not a half-star rating"
                )));
            }
        }
        if self.docs > 0 {
            if self.courses == 0 {
                return Err(Error::invalid_input("need at least one course"));
            }
            let filled = self
                .courses
                .checked_sub(self.empty_courses)
                .ok_or_else(|| Error::invalid_input("empty_courses exceeds courses"))?;
            if filled == 0 {
                return Err(Error::invalid_input(
                    "at least one course must receive reviews",
                ));
            }
            if self.docs < filled {
                return Err(Error::invalid_input(
                    "not enough documents to give every non-empty course a review",
                ));
            }
        }
        if let Some(vocab) = &self.vocabulary {
            if vocab.len() != self.vocab_size {
                return Err(Error::invalid_input(format!(
                    "explicit vocabulary has {} words, spec says {}",
                    vocab.len(),
                    self.vocab_size
                )));
            }
            let distinct: HashSet<&String> = vocab.iter().collect();
            if distinct.len() != vocab.len() {
                return Err(Error::invalid_input("explicit vocabulary has duplicates"));
            }
        }
        Ok(())
    }
}

/// The planted generative parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedTruth {
    pub vocab: Vec<String>,
    pub phi: Vec<Vec<f64>>,
    pub theta: Vec<Vec<f64>>,
}

impl PlantedTruth {
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        serde_json::to_writer(std::io::BufWriter::new(file), self)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_reader(std::io::BufReader::new(file))?)
    }
}

/// Deterministic synthetic vocabulary: two consonant-vowel syllables,
/// skipping anything the bundled preprocessing would alter (real words
/// like "data" slip into the pattern otherwise).
pub fn synthetic_vocabulary(size: usize) -> Vec<String> {
    const CONSONANTS: [char; 12] = ['b', 'd', 'f', 'g', 'k', 'l', 'm', 'n', 'p', 'r', 't', 'z'];
    const VOWELS: [char; 4] = ['a', 'i', 'o', 'u'];
    let lemmatizer = crate::textprep::Lemmatizer::bundled();
    let stopwords = crate::textprep::StopwordList::bundled();
    let mut words = Vec::with_capacity(size);
    'outer: for c1 in CONSONANTS {
        for v1 in VOWELS {
            for c2 in CONSONANTS {
                for v2 in VOWELS {
                    let word = format!("{c1}{v1}{c2}{v2}");
                    if lemmatizer.lemma(&word) != word || stopwords.contains(&word) {
                        continue;
                    }
                    words.push(word);
                    if words.len() == size {
                        break 'outer;
                    }
                }
            }
        }
    }
    words
}

fn dirichlet_row(rng: &mut Xoshiro256PlusPlus, dim: usize, concentration: f64) -> Vec<f64> {
    let gamma = Gamma::new(concentration, 1.0).expect("positive shape");
    let mut row: Vec<f64> = (0..dim).map(|_| gamma.sample(rng).max(1e-300)).collect();
    let total: f64 = row.iter().sum();
    for v in &mut row {
        *v /= total;
    }
    row
}

fn sample_categorical(rng: &mut Xoshiro256PlusPlus, weights: &[f64]) -> usize {
    let mut target = rng.gen::<f64>();
    for (i, w) in weights.iter().enumerate() {
        target -= w;
        if target < 0.0 {
            return i;
        }
    }
    weights.len() - 1
}

/// Largest-remainder allocation of `total` items over `shares`.
fn quota_counts(total: usize, shares: &[f64]) -> Vec<usize> {
    let mut counts: Vec<usize> = shares.iter().map(|p| (p * total as f64).floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut remainders: Vec<(usize, f64)> = shares
        .iter()
        .enumerate()
        .map(|(i, p)| (i, p * total as f64 - counts[i] as f64))
        .collect();
    remainders.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then_with(|| a.0.cmp(&b.0)));
    for (i, _) in remainders.into_iter().take(total - assigned) {
        counts[i] += 1;
    }
    counts
}

/// Generate a corpus from the spec. Deterministic for a fixed seed.
pub fn generate_corpus(spec: &PlantedSpec) -> Result<(Corpus, PlantedTruth)> {
    spec.validate()?;
    let mut rng = rng_from_seed(spec.seed);

    let vocab = match &spec.vocabulary {
        Some(words) => words.clone(),
        None => synthetic_vocabulary(spec.vocab_size),
    };

    let phi: Vec<Vec<f64>> = (0..spec.k)
        .map(|_| dirichlet_row(&mut rng, spec.vocab_size, spec.beta))
        .collect();
    let theta: Vec<Vec<f64>> = (0..spec.docs)
        .map(|_| dirichlet_row(&mut rng, spec.k, spec.alpha))
        .collect();

    let mut texts: Vec<String> = Vec::with_capacity(spec.docs);
    for doc_theta in &theta {
        let mut words = Vec::with_capacity(spec.doc_len);
        for _ in 0..spec.doc_len {
            let topic = sample_categorical(&mut rng, doc_theta);
            let word = sample_categorical(&mut rng, &phi[topic]);
            words.push(vocab[word].as_str());
        }
        texts.push(words.join(" "));
    }

    // Exact-proportion rating and language assignments, shuffled.
    let rating_shares: Vec<f64> = spec.rating_mix.iter().map(|(_, p)| *p).collect();
    let mut ratings: Vec<Rating> = Vec::with_capacity(spec.docs);
    for (count, (value, _)) in quota_counts(spec.docs, &rating_shares)
        .into_iter()
        .zip(&spec.rating_mix)
    {
        let rating = Rating::from_value(*value).expect("validated half-star value");
        ratings.extend(std::iter::repeat_n(rating, count));
    }
    ratings.shuffle(&mut rng);

    let language_shares: Vec<f64> = spec.language_mix.iter().map(|(_, p)| *p).collect();
    let mut languages: Vec<&str> = Vec::with_capacity(spec.docs);
    for (count, (code, _)) in quota_counts(spec.docs, &language_shares)
        .into_iter()
        .zip(&spec.language_mix)
    {
        languages.extend(std::iter::repeat_n(code.as_str(), count));
    }
    languages.shuffle(&mut rng);

    let filled_courses = spec.courses.saturating_sub(spec.empty_courses).max(1);
    let courses: Vec<Course> = (0..spec.courses)
        .map(|i| Course {
            course_id: format!("c{i:03}"),
            title: format!("Synthetic Course {i}"),
            platform: Platform::Other,
            url: None,
            category: None,
            teacher: None,
            synthetic: false,
        })
        .collect();

    let reviews: Vec<Review> = (0..spec.docs)
        .map(|i| {
            let course = if i < filled_courses {
                i
            } else {
                rng.gen_range(0..filled_courses)
            };
            Review {
                review_id: format!("r{i:05}"),
                course_id: format!("c{course:03}"),
                platform: Platform::Other,
                username: None,
                date: None,
                rating: ratings[i],
                text: texts[i].clone(),
                language: Some(languages[i].to_string()),
                url: None,
            }
        })
        .collect();

    let (corpus, orphans) = Corpus::new(reviews, if spec.docs == 0 { Vec::new() } else { courses });
    debug_assert_eq!(orphans, 0);
    Ok((
        corpus,
        PlantedTruth {
            vocab,
            phi,
            theta,
        },
    ))
}

/// Re-order phi columns from `vocab` order into `target_vocab` order;
/// words absent from `vocab` get zero columns. Needed before matching a
/// trained model (first-occurrence vocabulary) against planted truth.
pub fn align_to_vocab(
    phi: &[Vec<f64>],
    vocab: &[String],
    target_vocab: &[String],
) -> Vec<Vec<f64>> {
    let index: std::collections::HashMap<&str, usize> = vocab
        .iter()
        .enumerate()
        .map(|(i, w)| (w.as_str(), i))
        .collect();
    phi.iter()
        .map(|row| {
            target_vocab
                .iter()
                .map(|w| index.get(w.as_str()).map_or(0.0, |&i| row[i]))
                .collect()
        })
        .collect()
}

/// Topic matching between a learned and a true topic-word matrix.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatchResult {
    /// `assignment[t]` is the learned topic matched to true topic `t`.
    pub assignment: Vec<usize>,
    pub mean_cosine: f64,
}

/// Greedy maximum-cosine bipartite matching (each topic used once).
pub fn match_topics(learned_phi: &[Vec<f64>], true_phi: &[Vec<f64>]) -> Result<MatchResult> {
    let cosines = cosine_matrix(learned_phi, true_phi)?;
    let k = true_phi.len();
    let mut assignment = vec![usize::MAX; k];
    let mut used_learned = vec![false; k];
    let mut used_true = vec![false; k];
    let mut total = 0.0;
    for _ in 0..k {
        let mut best = (f64::NEG_INFINITY, 0usize, 0usize);
        for t in 0..k {
            if used_true[t] {
                continue;
            }
            for l in 0..k {
                if used_learned[l] {
                    continue;
                }
                if cosines[t][l] > best.0 {
                    best = (cosines[t][l], t, l);
                }
            }
        }
        let (cos, t, l) = best;
        assignment[t] = l;
        used_true[t] = true;
        used_learned[l] = true;
        total += cos;
    }
    Ok(MatchResult {
        assignment,
        mean_cosine: total / k as f64,
    })
}

/// Exhaustive optimal matching; practical for K ≤ 8.
pub fn match_topics_exhaustive(
    learned_phi: &[Vec<f64>],
    true_phi: &[Vec<f64>],
) -> Result<MatchResult> {
    let k = true_phi.len();
    if k > 8 {
        return Err(Error::invalid_input(
            "exhaustive matching is limited to K <= 8",
        ));
    }
    let cosines = cosine_matrix(learned_phi, true_phi)?;
    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut perm: Vec<usize> = (0..k).collect();
    permute(&mut perm, 0, &mut |p| {
        let total: f64 = p.iter().enumerate().map(|(t, &l)| cosines[t][l]).sum();
        if best.as_ref().is_none_or(|(b, _)| total > *b) {
            best = Some((total, p.to_vec()));
        }
    });
    let (total, assignment) = best.expect("k >= 1");
    Ok(MatchResult {
        assignment,
        mean_cosine: total / k as f64,
    })
}

fn permute(values: &mut Vec<usize>, start: usize, visit: &mut impl FnMut(&[usize])) {
    if start == values.len() {
        visit(values);
        return;
    }
    for i in start..values.len() {
        values.swap(start, i);
        permute(values, start + 1, visit);
        values.swap(start, i);
    }
}

fn cosine_matrix(learned: &[Vec<f64>], truth: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    if learned.len() != truth.len() {
        return Err(Error::invalid_input("topic counts differ"));
    }
    if learned.is_empty() {
        return Err(Error::invalid_input("no topics to match"));
    }
    let v = truth[0].len();
    if learned.iter().chain(truth).any(|row| row.len() != v) {
        return Err(Error::invalid_input("vocabulary sizes differ"));
    }
    Ok(truth
        .iter()
        .map(|t| {
            learned
                .iter()
                .map(|l| {
                    let dot: f64 = t.iter().zip(l).map(|(a, b)| a * b).sum();
                    let nt: f64 = t.iter().map(|a| a * a).sum::<f64>().sqrt();
                    let nl: f64 = l.iter().map(|a| a * a).sum::<f64>().sqrt();
                    dot / (nt * nl)
                })
                .collect()
        })
        .collect())
}
