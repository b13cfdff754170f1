//! Latent Dirichlet Allocation via collapsed Gibbs sampling.
//!
//! Training resamples token-topic assignments from the collapsed
//! conditionals and reads phi/theta off the final count state with
//! Dirichlet smoothing. Documents are inferred after training by fold-in
//! Gibbs with phi frozen; each document's chain is seeded from the model
//! seed and the document id, so per-document weights do not depend on
//! document order.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{derive_seed_str, rng_from_seed, Xoshiro256PlusPlus};
use crate::textprep::TokenDoc;

/// Training configuration. `alpha = None` selects the 50/K default.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct LdaConfig {
    pub k: usize,
    pub alpha: Option<f64>,
    pub beta: f64,
    pub iterations: usize,
    pub burn_in: usize,
    pub seed: u64,
}

impl LdaConfig {
    pub fn new(k: usize, seed: u64) -> Self {
        LdaConfig {
            k,
            alpha: None,
            beta: 0.01,
            iterations: 1000,
            burn_in: 100,
            seed,
        }
    }

    pub fn effective_alpha(&self) -> f64 {
        self.alpha.unwrap_or(50.0 / self.k as f64)
    }
}

/// Fold-in inference schedule: 50 sweeps, 10 burn-in, averaged.
const INFER_SWEEPS: usize = 50;
const INFER_BURN_IN: usize = 10;

pub const MODEL_FORMAT_VERSION: u32 = 1;

/// A trained topic model: topic-word matrix `phi` (K×V), document-topic
/// matrix `theta` (D×K), and the hyperparameters that produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicModel {
    pub format_version: u32,
    pub k: usize,
    pub vocab: Vec<String>,
    pub doc_ids: Vec<String>,
    pub phi: Vec<Vec<f64>>,
    pub theta: Vec<Vec<f64>>,
    pub alpha: f64,
    pub beta: f64,
    pub iterations: usize,
    pub seed: u64,
}

impl TopicModel {
    pub fn vocab_size(&self) -> usize {
        self.vocab.len()
    }

    pub fn doc_count(&self) -> usize {
        self.doc_ids.len()
    }

    /// word → vocab index lookup (build once, reuse across documents).
    pub fn vocab_index(&self) -> HashMap<&str, usize> {
        self.vocab
            .iter()
            .enumerate()
            .map(|(i, w)| (w.as_str(), i))
            .collect()
    }

    /// theta row of a training document, by id.
    pub fn theta_row(&self, review_id: &str) -> Option<&[f64]> {
        self.doc_ids
            .iter()
            .position(|id| id == review_id)
            .map(|i| self.theta[i].as_slice())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        serde_json::to_writer(BufWriter::new(file), self)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<TopicModel> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let model: TopicModel = serde_json::from_reader(BufReader::new(file))?;
        if model.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::invalid_input(format!(
                "unsupported model format version {}",
                model.format_version
            )));
        }
        if model.phi.len() != model.k || model.theta.len() != model.doc_ids.len() {
            return Err(Error::invalid_input("model matrix dimensions inconsistent"));
        }
        Ok(model)
    }
}

/// Train a topic model by collapsed Gibbs sampling.
///
/// Every document must be non-empty (callers filter empty projections) and
/// K must not exceed the number of distinct words.
pub fn train_lda(docs: &[TokenDoc], config: &LdaConfig) -> Result<TopicModel> {
    if config.k < 2 {
        return Err(Error::invalid_input("K must be at least 2"));
    }
    if config.iterations < 1 {
        return Err(Error::invalid_input("need at least one sweep"));
    }
    if docs.is_empty() {
        return Err(Error::invalid_input("no documents to train on"));
    }

    // First-occurrence vocabulary.
    let mut vocab: Vec<String> = Vec::new();
    let mut lookup: HashMap<String, usize> = HashMap::new();
    let mut token_ids: Vec<Vec<usize>> = Vec::with_capacity(docs.len());
    for doc in docs {
        if doc.lemmas.is_empty() {
            return Err(Error::invalid_input(format!(
                "document {} is empty; filter empty projections before training",
                doc.review_id
            )));
        }
        let mut ids = Vec::with_capacity(doc.lemmas.len());
        for lemma in &doc.lemmas {
            let id = match lookup.get(lemma.as_str()) {
                Some(&id) => id,
                None => {
                    let id = vocab.len();
                    vocab.push(lemma.clone());
                    lookup.insert(lemma.clone(), id);
                    id
                }
            };
            ids.push(id);
        }
        token_ids.push(ids);
    }
    let v = vocab.len();
    let k = config.k;
    if k > v {
        return Err(Error::invalid_input(format!(
            "K = {k} exceeds the {v} distinct words in the corpus"
        )));
    }

    let alpha = config.effective_alpha();
    let beta = config.beta;
    let d = docs.len();

    let mut n_dk = vec![0u32; d * k];
    let mut n_kw = vec![0u32; k * v];
    let mut n_k = vec![0u32; k];
    let mut assignments: Vec<Vec<usize>> = Vec::with_capacity(d);

    let mut rng = rng_from_seed(config.seed);
    for (di, ids) in token_ids.iter().enumerate() {
        let mut z = Vec::with_capacity(ids.len());
        for &w in ids {
            let topic = rng.gen_range(0..k);
            z.push(topic);
            n_dk[di * k + topic] += 1;
            n_kw[topic * v + w] += 1;
            n_k[topic] += 1;
        }
        assignments.push(z);
    }

    let v_beta = v as f64 * beta;
    let mut weights = vec![0.0f64; k];
    for _ in 0..config.iterations {
        for (di, ids) in token_ids.iter().enumerate() {
            let z = &mut assignments[di];
            for (ti, &w) in ids.iter().enumerate() {
                let old = z[ti];
                n_dk[di * k + old] -= 1;
                n_kw[old * v + w] -= 1;
                n_k[old] -= 1;

                let mut total = 0.0;
                for topic in 0..k {
                    let wgt = (f64::from(n_dk[di * k + topic]) + alpha)
                        * (f64::from(n_kw[topic * v + w]) + beta)
                        / (f64::from(n_k[topic]) + v_beta);
                    weights[topic] = wgt;
                    total += wgt;
                }
                let mut target = rng.gen::<f64>() * total;
                let mut new = k - 1;
                for (topic, &wgt) in weights.iter().enumerate() {
                    target -= wgt;
                    if target < 0.0 {
                        new = topic;
                        break;
                    }
                }

                z[ti] = new;
                n_dk[di * k + new] += 1;
                n_kw[new * v + w] += 1;
                n_k[new] += 1;
            }
        }
    }

    // phi[k][w] = (n_kw + β) / (n_k + Vβ); theta[d][k] = (n_dk + α) / (n_d + Kα)
    let phi: Vec<Vec<f64>> = (0..k)
        .map(|topic| {
            let denom = f64::from(n_k[topic]) + v_beta;
            (0..v)
                .map(|w| (f64::from(n_kw[topic * v + w]) + beta) / denom)
                .collect()
        })
        .collect();
    let theta: Vec<Vec<f64>> = (0..d)
        .map(|di| {
            let n_d = token_ids[di].len() as f64;
            let denom = n_d + k as f64 * alpha;
            (0..k)
                .map(|topic| (f64::from(n_dk[di * k + topic]) + alpha) / denom)
                .collect()
        })
        .collect();

    Ok(TopicModel {
        format_version: MODEL_FORMAT_VERSION,
        k,
        vocab,
        doc_ids: docs.iter().map(|doc| doc.review_id.clone()).collect(),
        phi,
        theta,
        alpha,
        beta,
        iterations: config.iterations,
        seed: config.seed,
    })
}

/// Inferred topic weights for one document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InferredTopics {
    pub review_id: String,
    pub weights: Vec<f64>,
    /// In-vocabulary token count; 0 means the uniform fallback was used.
    pub in_vocab: usize,
}

impl InferredTopics {
    pub fn is_uniform_fallback(&self) -> bool {
        self.in_vocab == 0
    }
}

/// Fold-in Gibbs inference with phi frozen (50 sweeps, 10 burn-in,
/// averaged). A document with no in-vocabulary words gets the uniform
/// vector and is flagged.
pub fn infer_doc_topics(model: &TopicModel, doc: &TokenDoc) -> InferredTopics {
    let index = model.vocab_index();
    infer_doc_topics_indexed(model, doc, &index)
}

/// As [`infer_doc_topics`] with a caller-provided vocabulary index, for
/// callers inferring many documents.
pub fn infer_doc_topics_indexed(
    model: &TopicModel,
    doc: &TokenDoc,
    index: &HashMap<&str, usize>,
) -> InferredTopics {
    let ids: Vec<usize> = doc
        .lemmas
        .iter()
        .filter_map(|l| index.get(l.as_str()).copied())
        .collect();
    let k = model.k;
    if ids.is_empty() {
        return InferredTopics {
            review_id: doc.review_id.clone(),
            weights: vec![1.0 / k as f64; k],
            in_vocab: 0,
        };
    }

    let mut rng: Xoshiro256PlusPlus =
        rng_from_seed(derive_seed_str(model.seed, &doc.review_id));
    let alpha = model.alpha;
    let mut n_dk = vec![0u32; k];
    let mut z: Vec<usize> = ids
        .iter()
        .map(|_| {
            let topic = rng.gen_range(0..k);
            n_dk[topic] += 1;
            topic
        })
        .collect();

    let mut weights = vec![0.0f64; k];
    let mut averaged = vec![0.0f64; k];
    let mut samples = 0usize;
    let denom = ids.len() as f64 + k as f64 * alpha;
    for sweep in 0..INFER_SWEEPS {
        for (ti, &w) in ids.iter().enumerate() {
            let old = z[ti];
            n_dk[old] -= 1;
            let mut total = 0.0;
            for topic in 0..k {
                let wgt = model.phi[topic][w] * (f64::from(n_dk[topic]) + alpha);
                weights[topic] = wgt;
                total += wgt;
            }
            let mut target = rng.gen::<f64>() * total;
            let mut new = k - 1;
            for (topic, &wgt) in weights.iter().enumerate() {
                target -= wgt;
                if target < 0.0 {
                    new = topic;
                    break;
                }
            }
            z[ti] = new;
            n_dk[new] += 1;
        }
        if sweep >= INFER_BURN_IN {
            for topic in 0..k {
                averaged[topic] += (f64::from(n_dk[topic]) + alpha) / denom;
            }
            samples += 1;
        }
    }
    for value in &mut averaged {
        *value /= samples as f64;
    }
    InferredTopics {
        review_id: doc.review_id.clone(),
        weights: averaged,
        in_vocab: ids.len(),
    }
}

/// Per-document weights for a document set: training documents reuse their
/// theta row, anything else is folded in.
pub fn doc_topic_weights(model: &TopicModel, docs: &[TokenDoc]) -> Vec<InferredTopics> {
    let index = model.vocab_index();
    let theta_by_id: HashMap<&str, usize> = model
        .doc_ids
        .iter()
        .enumerate()
        .map(|(i, id)| (id.as_str(), i))
        .collect();
    docs.iter()
        .map(|doc| match theta_by_id.get(doc.review_id.as_str()) {
            Some(&row) => InferredTopics {
                review_id: doc.review_id.clone(),
                weights: model.theta[row].clone(),
                in_vocab: doc
                    .lemmas
                    .iter()
                    .filter(|l| index.contains_key(l.as_str()))
                    .count(),
            },
            None => infer_doc_topics_indexed(model, doc, &index),
        })
        .collect()
}

/// Ranked top words of one topic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicSummary {
    pub topic_id: usize,
    pub top_words: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

impl TopicSummary {
    /// Default display label: top three words joined with underscores.
    pub fn display_label(&self) -> String {
        self.label
            .clone()
            .unwrap_or_else(|| self.top_words.iter().take(3).cloned().collect::<Vec<_>>().join("_"))
    }
}

/// Top `n` words per topic by descending phi, ties broken lexicographically.
pub fn top_words(model: &TopicModel, n: usize) -> Result<Vec<TopicSummary>> {
    if n > model.vocab_size() {
        return Err(Error::invalid_input(format!(
            "requested {n} top words but the vocabulary has {}",
            model.vocab_size()
        )));
    }
    Ok((0..model.k)
        .map(|topic| {
            let mut order: Vec<usize> = (0..model.vocab_size()).collect();
            order.sort_by(|&a, &b| {
                model.phi[topic][b]
                    .partial_cmp(&model.phi[topic][a])
                    .expect("phi has no NaN")
                    .then_with(|| model.vocab[a].cmp(&model.vocab[b]))
            });
            TopicSummary {
                topic_id: topic,
                top_words: order[..n].iter().map(|&w| model.vocab[w].clone()).collect(),
                label: None,
            }
        })
        .collect())
}

/// Corpus-level topic proportions: mean per-document weight × 100.
pub fn topic_proportions(weights: &[InferredTopics]) -> Result<Vec<f64>> {
    if weights.is_empty() {
        return Err(Error::invalid_input(
            "topic proportions need at least one document",
        ));
    }
    let k = weights[0].weights.len();
    let mut sums = vec![0.0f64; k];
    for doc in weights {
        for (acc, w) in sums.iter_mut().zip(&doc.weights) {
            *acc += w;
        }
    }
    let n = weights.len() as f64;
    Ok(sums.into_iter().map(|s| s / n * 100.0).collect())
}

/// Proportions over the model's own training documents.
pub fn model_topic_proportions(model: &TopicModel) -> Result<Vec<f64>> {
    if model.theta.is_empty() {
        return Err(Error::invalid_input("model has no training documents"));
    }
    let k = model.k;
    let mut sums = vec![0.0f64; k];
    for row in &model.theta {
        for (acc, w) in sums.iter_mut().zip(row) {
            *acc += w;
        }
    }
    let n = model.theta.len() as f64;
    Ok(sums.into_iter().map(|s| s / n * 100.0).collect())
}
