//! MANOVA with Pillai's trace and a distribution-free permutation fallback.
//!
//! Topic-proportion rows are compositional (they sum to 100), which makes
//! the total scatter singular; the final column is dropped before testing.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use serde::Serialize;

use super::special::f_survival;
use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

/// Per-course topic proportion rows with group labels.
#[derive(Debug, Clone)]
pub struct GroupedTopicMatrix {
    rows: Vec<Vec<f64>>,
    groups: Vec<String>,
}

impl GroupedTopicMatrix {
    /// Rows must share a length, sum to 100 (±1e-6), and carry one group
    /// label each; at least two distinct groups are required.
    pub fn new(rows: Vec<Vec<f64>>, groups: Vec<String>) -> Result<Self> {
        if rows.len() != groups.len() {
            return Err(Error::invalid_input(format!(
                "{} rows but {} group labels",
                rows.len(),
                groups.len()
            )));
        }
        if rows.is_empty() {
            return Err(Error::invalid_input("empty topic matrix"));
        }
        let width = rows[0].len();
        for (i, row) in rows.iter().enumerate() {
            if row.len() != width {
                return Err(Error::invalid_input(format!(
                    "row {i} has length {} != {width}",
                    row.len()
                )));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 100.0).abs() > 1e-6 {
                return Err(Error::invalid_input(format!(
                    "row {i} sums to {sum}, expected 100"
                )));
            }
        }
        let mut distinct: Vec<&String> = groups.iter().collect();
        distinct.sort();
        distinct.dedup();
        if distinct.len() < 2 {
            return Err(Error::invalid_input("need at least 2 groups"));
        }
        Ok(GroupedTopicMatrix { rows, groups })
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn groups(&self) -> &[String] {
        &self.groups
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn width(&self) -> usize {
        self.rows[0].len()
    }

    fn group_ids(&self) -> (Vec<usize>, usize) {
        let mut names: Vec<&String> = self.groups.iter().collect();
        names.sort();
        names.dedup();
        let ids = self
            .groups
            .iter()
            .map(|g| names.binary_search(&g).expect("label present"))
            .collect();
        (ids, names.len())
    }

    /// Rows with the final column dropped (compositional reduction).
    fn reduced(&self) -> Vec<Vec<f64>> {
        self.rows
            .iter()
            .map(|r| r[..r.len() - 1].to_vec())
            .collect()
    }
}

/// How the reported p-value was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ManovaMethod {
    PillaiF,
    PermutationFallback,
}

#[derive(Debug, Clone, Serialize)]
pub struct ManovaResult {
    pub pillai: f64,
    /// F approximation; absent when the fallback path was taken.
    pub f_stat: Option<f64>,
    pub df: Option<(f64, f64)>,
    pub p_value: f64,
    pub method: ManovaMethod,
}

/// Between-group scatter H and within-group scatter E over reduced rows.
fn scatter_matrices(
    rows: &[Vec<f64>],
    group_ids: &[usize],
    n_groups: usize,
) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = rows.len();
    let p = rows[0].len();

    let mut grand = vec![0.0; p];
    let mut group_means = vec![vec![0.0; p]; n_groups];
    let mut group_sizes = vec![0usize; n_groups];
    for (row, &g) in rows.iter().zip(group_ids) {
        group_sizes[g] += 1;
        for (j, v) in row.iter().enumerate() {
            grand[j] += v;
            group_means[g][j] += v;
        }
    }
    for v in &mut grand {
        *v /= n as f64;
    }
    for (mean, &size) in group_means.iter_mut().zip(&group_sizes) {
        for v in mean.iter_mut() {
            *v /= size as f64;
        }
    }

    let mut h = DMatrix::zeros(p, p);
    for (mean, &size) in group_means.iter().zip(&group_sizes) {
        let diff = DMatrix::from_iterator(p, 1, mean.iter().zip(&grand).map(|(m, g)| m - g));
        h += size as f64 * &diff * diff.transpose();
    }
    let mut e = DMatrix::zeros(p, p);
    for (row, &g) in rows.iter().zip(group_ids) {
        let diff =
            DMatrix::from_iterator(p, 1, row.iter().zip(&group_means[g]).map(|(x, m)| x - m));
        e += &diff * diff.transpose();
    }
    (h, e)
}

/// Pillai's trace V = tr(H (H+E)^-1); `None` when H+E is singular.
fn pillai_trace(rows: &[Vec<f64>], group_ids: &[usize], n_groups: usize) -> Option<f64> {
    let (h, e) = scatter_matrices(rows, group_ids, n_groups);
    let total = &h + &e;
    let inv = total.try_inverse()?;
    let v = (h * inv).trace();
    v.is_finite().then_some(v)
}

/// Pillai's trace with a pseudo-inverse, defined even for singular H+E.
fn pillai_trace_pinv(rows: &[Vec<f64>], group_ids: &[usize], n_groups: usize) -> f64 {
    let (h, e) = scatter_matrices(rows, group_ids, n_groups);
    let total = &h + &e;
    let pinv = total
        .svd(true, true)
        .pseudo_inverse(1e-10)
        .expect("svd computed with u and v_t");
    (h * pinv).trace()
}

const FALLBACK_PERMUTATIONS: usize = 999;
const FALLBACK_SEED: u64 = 0x9e3779b9;

/// MANOVA over the grouped topic matrix with Pillai's trace and the
/// standard large-sample F transform. A singular H+E triggers the seeded
/// permutation fallback (999 replicates).
pub fn manova_pillai(matrix: &GroupedTopicMatrix) -> Result<ManovaResult> {
    let rows = matrix.reduced();
    let p = rows[0].len();
    if p == 0 {
        return Err(Error::invalid_input(
            "need at least 2 topic columns for MANOVA",
        ));
    }
    let (group_ids, n_groups) = matrix.group_ids();
    let mut sizes = vec![0usize; n_groups];
    for &g in &group_ids {
        sizes[g] += 1;
    }
    if let Some(&small) = sizes.iter().find(|&&s| s < p + 1) {
        return Err(Error::invalid_input(format!(
            "each group needs at least {} rows after reduction, found {small}",
            p + 1
        )));
    }

    match pillai_trace(&rows, &group_ids, n_groups) {
        Some(v) => {
            let n_total = rows.len() as f64;
            let g = n_groups as f64;
            let p = p as f64;
            let s = p.min(g - 1.0);
            let m = ((p - g + 1.0).abs() - 1.0) / 2.0;
            let n = (n_total - g - p - 1.0) / 2.0;
            let df1 = s * (2.0 * m + s + 1.0);
            let df2 = s * (2.0 * n + s + 1.0);
            let ratio = (v / s) / (1.0 - v / s);
            let f_stat = (2.0 * n + s + 1.0) / (2.0 * m + s + 1.0) * ratio;
            let p_value = if f_stat.is_finite() {
                f_survival(f_stat, df1, df2)
            } else {
                0.0
            };
            Ok(ManovaResult {
                pillai: v,
                f_stat: Some(f_stat),
                df: Some((df1, df2)),
                p_value,
                method: ManovaMethod::PillaiF,
            })
        }
        None => {
            let p_value = permutation_test(
                matrix,
                PermutationStatistic::Pillai,
                FALLBACK_PERMUTATIONS,
                FALLBACK_SEED,
            )?;
            let observed = pillai_trace_pinv(&rows, &group_ids, n_groups);
            Ok(ManovaResult {
                pillai: observed,
                f_stat: None,
                df: None,
                p_value,
                method: ManovaMethod::PermutationFallback,
            })
        }
    }
}

/// Statistic permuted by [`permutation_test`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PermutationStatistic {
    Pillai,
}

/// Seeded label-permutation test: p = (1 + #{permuted > observed}) / (1 + n).
///
/// Strictly-greater counting; permutations that reproduce the observed
/// grouping tie exactly and are not counted as exceedances.
pub fn permutation_test(
    matrix: &GroupedTopicMatrix,
    statistic: PermutationStatistic,
    n_perm: usize,
    seed: u64,
) -> Result<f64> {
    let PermutationStatistic::Pillai = statistic;
    if n_perm < 100 {
        return Err(Error::invalid_input("need at least 100 permutations"));
    }
    let rows = matrix.reduced();
    let (group_ids, n_groups) = matrix.group_ids();
    let observed = pillai_trace_pinv(&rows, &group_ids, n_groups);

    let mut rng = rng_from_seed(seed);
    let mut labels = group_ids.clone();
    let mut exceed = 0usize;
    for _ in 0..n_perm {
        labels.shuffle(&mut rng);
        if pillai_trace_pinv(&rows, &labels, n_groups) > observed {
            exceed += 1;
        }
    }
    Ok((1 + exceed) as f64 / (1 + n_perm) as f64)
}
