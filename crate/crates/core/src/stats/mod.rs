//! Rating distributions, correlation coefficients, and group statistics.

mod manova;
pub mod special;

pub use manova::{
    manova_pillai, permutation_test, GroupedTopicMatrix, ManovaMethod, ManovaResult,
    PermutationStatistic,
};

use std::collections::BTreeMap;

use serde::Serialize;

use crate::characterize::CourseProfile;
use crate::corpus::{Corpus, Rating};
use crate::error::{Error, Result};
use crate::sentiment::SentimentLabel;

/// Exact counts per half-star bucket.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatingHistogram {
    pub buckets: BTreeMap<Rating, usize>,
    pub total: usize,
}

impl RatingHistogram {
    pub fn count(&self, rating: Rating) -> usize {
        self.buckets.get(&rating).copied().unwrap_or(0)
    }

    pub fn percentage(&self, rating: Rating) -> f64 {
        100.0 * self.count(rating) as f64 / self.total as f64
    }

    /// `(rating value, count, percentage)` triples, ascending by rating.
    pub fn percentages(&self) -> Vec<(f64, usize, f64)> {
        self.buckets
            .iter()
            .map(|(r, &c)| (r.value(), c, 100.0 * c as f64 / self.total as f64))
            .collect()
    }
}

/// Count every review's rating. Empty corpus is an error.
pub fn rating_histogram(corpus: &Corpus) -> Result<RatingHistogram> {
    if corpus.review_count() == 0 {
        return Err(Error::invalid_input("empty corpus has no rating histogram"));
    }
    let mut buckets: BTreeMap<Rating, usize> = BTreeMap::new();
    for review in corpus.reviews() {
        *buckets.entry(review.rating).or_insert(0) += 1;
    }
    Ok(RatingHistogram {
        buckets,
        total: corpus.review_count(),
    })
}

/// Per-course mean ratings binned into `[edge_i, edge_{i+1})` intervals,
/// last bin closed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BinnedCounts {
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
    /// Means outside `[first_edge, last_edge]`.
    pub outside: usize,
}

pub fn course_mean_distribution(corpus: &Corpus, bin_edges: &[f64]) -> Result<BinnedCounts> {
    if bin_edges.len() < 2 || bin_edges.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid_input(
            "bin edges must be strictly increasing with at least two entries",
        ));
    }
    let mut counts = vec![0usize; bin_edges.len() - 1];
    let mut outside = 0usize;
    for course in corpus.courses() {
        let positions = corpus.review_positions(&course.course_id);
        if positions.is_empty() {
            return Err(Error::invalid_input(format!(
                "course {} has no rated reviews",
                course.course_id
            )));
        }
        let mean = positions
            .iter()
            .map(|&i| corpus.reviews()[i].rating.value())
            .sum::<f64>()
            / positions.len() as f64;
        match bin_index(bin_edges, mean) {
            Some(i) => counts[i] += 1,
            None => outside += 1,
        }
    }
    Ok(BinnedCounts {
        edges: bin_edges.to_vec(),
        counts,
        outside,
    })
}

fn bin_index(edges: &[f64], value: f64) -> Option<usize> {
    let last = edges.len() - 1;
    if value == edges[last] {
        return Some(last - 1); // last bin is closed
    }
    (0..last).find(|&i| value >= edges[i] && value < edges[i + 1])
}

/// Pearson product-moment correlation. Constant input is an explicit error.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::invalid_input("length mismatch"));
    }
    if x.len() < 2 {
        return Err(Error::invalid_input("need at least 2 observations"));
    }
    let n = x.len() as f64;
    let mean_x = x.iter().sum::<f64>() / n;
    let mean_y = y.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut var_x = 0.0;
    let mut var_y = 0.0;
    for (xi, yi) in x.iter().zip(y) {
        let dx = xi - mean_x;
        let dy = yi - mean_y;
        cov += dx * dy;
        var_x += dx * dx;
        var_y += dy * dy;
    }
    if var_x == 0.0 || var_y == 0.0 {
        return Err(Error::UndefinedCorrelation(
            "constant series has no correlation".into(),
        ));
    }
    Ok(cov / (var_x * var_y).sqrt())
}

/// Spearman rank correlation: Pearson over average-tie ranks.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::invalid_input("length mismatch"));
    }
    if x.len() < 2 {
        return Err(Error::invalid_input("need at least 2 observations"));
    }
    pearson(&average_ranks(x), &average_ranks(y))
}

/// Average (midrank) ranks, 1-based; ties share the mean of their ranks.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).expect("no NaN input"));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Mean topic-proportion vector per sentiment label, renormalized to 100.
/// Labels with zero courses are omitted and reported.
pub fn topic_distribution_by_sentiment(
    profiles: &[CourseProfile],
) -> (BTreeMap<SentimentLabel, Vec<f64>>, Vec<SentimentLabel>) {
    let rows: Vec<(SentimentLabel, &[f64])> = profiles
        .iter()
        .map(|p| (p.sentiment.majority_label, p.qual_topics.as_slice()))
        .collect();
    mean_distribution_by_label(&rows)
}

/// The same per-label averaging over bare (label, distribution) rows.
pub fn mean_distribution_by_label(
    rows: &[(SentimentLabel, &[f64])],
) -> (BTreeMap<SentimentLabel, Vec<f64>>, Vec<SentimentLabel>) {
    let mut sums: BTreeMap<SentimentLabel, (Vec<f64>, usize)> = BTreeMap::new();
    for (label, distribution) in rows {
        let entry = sums
            .entry(*label)
            .or_insert_with(|| (vec![0.0; distribution.len()], 0));
        for (acc, v) in entry.0.iter_mut().zip(distribution.iter()) {
            *acc += v;
        }
        entry.1 += 1;
    }
    let mut means = BTreeMap::new();
    for (label, (sum, n)) in sums {
        let mut mean: Vec<f64> = sum.iter().map(|s| s / n as f64).collect();
        let total: f64 = mean.iter().sum();
        if total > 0.0 {
            for v in &mut mean {
                *v *= 100.0 / total;
            }
        }
        means.insert(label, mean);
    }
    let omitted = [
        SentimentLabel::Positive,
        SentimentLabel::Neutral,
        SentimentLabel::Negative,
    ]
    .into_iter()
    .filter(|l| !means.contains_key(l))
    .collect();
    (means, omitted)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn corpus_with_ratings(specs: &[(&str, &[f64])]) -> Corpus {
        let mut reviews = Vec::new();
        let mut n = 0;
        for (course, ratings) in specs {
            for r in ratings.iter() {
                n += 1;
                reviews.push(
                    serde_json::from_str(&format!(
                        r#"{{"review_id":"r{n}","course_id":"{course}","rating":{r},"text":"t"}}"#
                    ))
                    .unwrap(),
                );
            }
        }
        Corpus::new(reviews, Vec::new()).0
    }

    #[test]
    fn histogram_counts_and_percentages() {
        let corpus = corpus_with_ratings(&[("c1", &[5.0, 5.0, 4.0])]);
        let hist = rating_histogram(&corpus).unwrap();
        assert_eq!(hist.count(Rating::from_value(5.0).unwrap()), 2);
        assert_eq!(hist.count(Rating::from_value(4.0).unwrap()), 1);
        assert_eq!(hist.total, 3);
        let pct = hist.percentages();
        assert_eq!(pct.len(), 2);
        assert!((pct[0].2 - 33.333333333333336).abs() < 1e-9);
        assert!((pct[1].2 - 66.66666666666667).abs() < 1e-9);

        let empty = Corpus::new(Vec::new(), Vec::new()).0;
        assert!(rating_histogram(&empty).is_err());
    }

    #[test]
    fn histogram_totals_match_input() {
        let corpus = corpus_with_ratings(&[("c1", &[1.0, 1.5, 2.0, 5.0]), ("c2", &[3.5, 4.5])]);
        let hist = rating_histogram(&corpus).unwrap();
        assert_eq!(hist.buckets.values().sum::<usize>(), hist.total);
        assert_eq!(hist.total, 6);
    }

    #[test]
    fn course_means_are_binned() {
        let corpus = corpus_with_ratings(&[("a", &[4.0, 5.0]), ("b", &[5.0]), ("c", &[1.0, 2.0])]);
        let bins = course_mean_distribution(&corpus, &[1.0, 2.5, 3.5, 4.5, 5.0]).unwrap();
        // a: mean 4.5 -> [4.5, 5.0] (last bin, closed); b: 5.0 -> last bin;
        // c: 1.5 -> first bin.
        assert_eq!(bins.counts, vec![1, 0, 0, 2]);
        assert_eq!(bins.outside, 0);

        // Mean exactly on an inner edge goes to the right bin (half-open).
        let corpus2 = corpus_with_ratings(&[("a", &[2.5])]);
        let bins2 = course_mean_distribution(&corpus2, &[1.0, 2.5, 5.0]).unwrap();
        assert_eq!(bins2.counts, vec![0, 1]);
    }

    #[test]
    fn course_mean_fixture_reproduces_52_percent_top_bin() {
        // 25 courses constructed so exactly 13 (52%) have a mean rating in
        // [4.5, 5.0] and the rest sit below 4.5.
        let mut spec: Vec<(String, Vec<f64>)> = Vec::new();
        for i in 0..13 {
            spec.push((format!("top{i}"), vec![4.5, 5.0]));
        }
        for i in 0..12 {
            spec.push((format!("mid{i}"), vec![3.5, 4.0]));
        }
        let spec_refs: Vec<(&str, &[f64])> = spec
            .iter()
            .map(|(id, ratings)| (id.as_str(), ratings.as_slice()))
            .collect();
        let corpus = corpus_with_ratings(&spec_refs);
        let bins = course_mean_distribution(&corpus, &[1.0, 3.5, 4.5, 5.0]).unwrap();
        let total: usize = bins.counts.iter().sum();
        assert_eq!(total, 25);
        let top_share = bins.counts[2] as f64 / total as f64;
        assert!((top_share - 0.52).abs() < 1e-12, "top bin share {top_share}");
    }

    #[test]
    fn pearson_trivial_and_hand_computed() {
        let x = [1.0, 2.0, 3.0];
        assert!((pearson(&x, &x).unwrap() - 1.0).abs() < 1e-15);
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        assert!((pearson(&x, &neg).unwrap() + 1.0).abs() < 1e-15);

        // (1,2,3) vs (2,4,7) by direct formula: deviations (-1,0,1) and
        // (-7/3,-1/3,8/3), cov = 5, var_x = 2, var_y = 38/3,
        // r = 5 / sqrt(76/3).
        let y = [2.0, 4.0, 7.0];
        let expected = 5.0 / (76.0f64 / 3.0).sqrt();
        assert!((pearson(&x, &y).unwrap() - expected).abs() < 1e-12);

        assert!(matches!(
            pearson(&[1.0, 1.0], &[1.0, 2.0]),
            Err(Error::UndefinedCorrelation(_))
        ));
    }

    #[test]
    fn spearman_monotone_and_tied() {
        let x = [1.0, 5.0, 9.0, 40.0];
        let y = [2.0, 3.0, 5.0, 8.0]; // strictly monotone with x
        assert!((spearman(&x, &y).unwrap() - 1.0).abs() < 1e-12);
        let rev: Vec<f64> = y.iter().rev().cloned().collect();
        assert!((spearman(&x, &rev).unwrap() + 1.0).abs() < 1e-12);

        // Tied data (1,2,2,3) vs (1,3,2,4): ranks x = (1, 2.5, 2.5, 4),
        // ranks y = (1, 3, 2, 4); hand computation gives 4.5 / sqrt(4.5 * 5).
        let xt = [1.0, 2.0, 2.0, 3.0];
        let yt = [1.0, 3.0, 2.0, 4.0];
        let expected = 4.5 / (4.5f64 * 5.0).sqrt();
        assert!((spearman(&xt, &yt).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn correlations_are_symmetric_and_invariant() {
        let x = [0.3, 1.8, 2.2, 5.0, 3.3];
        let y = [9.0, 4.0, 6.5, 1.0, 2.0];
        let r_xy = pearson(&x, &y).unwrap();
        let r_yx = pearson(&y, &x).unwrap();
        assert!((r_xy - r_yx).abs() < 1e-15);

        // Positive affine transform of either argument leaves Pearson alone.
        let x2: Vec<f64> = x.iter().map(|v| 3.0 * v + 7.0).collect();
        assert!((pearson(&x2, &y).unwrap() - r_xy).abs() < 1e-12);

        // Any strictly monotone transform leaves Spearman alone.
        let rho = spearman(&x, &y).unwrap();
        let x3: Vec<f64> = x.iter().map(|v| v.exp()).collect();
        assert!((spearman(&x3, &y).unwrap() - rho).abs() < 1e-12);
    }

    #[test]
    fn rank_computation_averages_ties() {
        assert_eq!(average_ranks(&[10.0, 20.0, 20.0, 30.0]), vec![1.0, 2.5, 2.5, 4.0]);
        assert_eq!(average_ranks(&[5.0, 5.0, 5.0]), vec![2.0, 2.0, 2.0]);
    }

    #[test]
    fn label_means_single_and_averaged() {
        use SentimentLabel::*;
        // One Positive course keeps its own distribution.
        let single: Vec<(SentimentLabel, &[f64])> = vec![(Positive, &[70.0, 30.0])];
        let (means, omitted) = mean_distribution_by_label(&single);
        assert_eq!(means[&Positive], vec![70.0, 30.0]);
        assert_eq!(omitted, vec![Neutral, Negative]);

        // Two Positive courses with opposite extremes average to 50/50.
        let pair: Vec<(SentimentLabel, &[f64])> =
            vec![(Positive, &[100.0, 0.0]), (Positive, &[0.0, 100.0])];
        let (means, _) = mean_distribution_by_label(&pair);
        assert_eq!(means[&Positive], vec![50.0, 50.0]);
    }

    #[test]
    fn label_means_match_naive_averaging() {
        use SentimentLabel::*;
        let rows: Vec<(SentimentLabel, Vec<f64>)> = (0..30)
            .map(|i| {
                let label = match i % 3 {
                    0 => Positive,
                    1 => Negative,
                    _ => Neutral,
                };
                let a = 10.0 + (i * 7 % 50) as f64;
                let b = 60.0 - (i * 3 % 40) as f64;
                (label, vec![a, b, 100.0 - a - b])
            })
            .collect();
        let borrowed: Vec<(SentimentLabel, &[f64])> =
            rows.iter().map(|(l, d)| (*l, d.as_slice())).collect();
        let (means, omitted) = mean_distribution_by_label(&borrowed);
        assert!(omitted.is_empty());

        // Oracle: naive per-label accumulation.
        for target in [Positive, Negative, Neutral] {
            let members: Vec<&Vec<f64>> = rows
                .iter()
                .filter(|(l, _)| *l == target)
                .map(|(_, d)| d)
                .collect();
            let mut naive = vec![0.0; 3];
            for d in &members {
                for (acc, v) in naive.iter_mut().zip(d.iter()) {
                    *acc += v;
                }
            }
            for v in &mut naive {
                *v /= members.len() as f64;
            }
            let total: f64 = naive.iter().sum();
            for v in &mut naive {
                *v *= 100.0 / total;
            }
            for (got, want) in means[&target].iter().zip(&naive) {
                assert!((got - want).abs() < 1e-9);
            }
            let sum: f64 = means[&target].iter().sum();
            assert!((sum - 100.0).abs() < 1e-6);
        }
    }
}
