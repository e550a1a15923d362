//! Stochastic block model: edge probabilities derived from a (possibly
//! noisy) mixing matrix, and independent per-dyad sampling.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::AttributedGraph;
use crate::stats::StatKind;
use crate::PrivateRelease;

/// Fitted SBM: symmetric matrix of edge probabilities between attribute
/// groups.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SbmParams {
    pub attr: String,
    pub edge_prob: Vec<Vec<f64>>,
}

impl SbmParams {
    pub fn group_count(&self) -> usize {
        self.edge_prob.len()
    }
}

/// Number of distinct node pairs available between groups `i` and `j`:
/// `n_i * n_j` off the diagonal, `C(n_i, 2)` on it.
pub fn pair_count(group_sizes: &[usize], i: usize, j: usize) -> u64 {
    let (ni, nj) = (group_sizes[i] as u64, group_sizes[j] as u64);
    if i == j {
        ni * ni.saturating_sub(1) / 2
    } else {
        ni * nj
    }
}

/// Converts mixing-matrix edge counts into edge probabilities:
/// `P_ij = clamp(M_ij / n_ij, 0, 1)`, with `P = 0` where no pair exists.
/// Accepts noisy (real-valued) counts; clipping upstream guarantees they
/// are nonnegative.
pub fn fit_sbm(
    noisy_mixing: &[Vec<f64>],
    attr: &str,
    group_sizes: &[usize],
) -> Result<SbmParams> {
    let k = group_sizes.len();
    if noisy_mixing.len() != k || noisy_mixing.iter().any(|row| row.len() != k) {
        return Err(Error::SchemaMismatch {
            attr: attr.to_string(),
            expected: k,
            actual: noisy_mixing.len(),
        });
    }
    for i in 0..k {
        for j in 0..k {
            if noisy_mixing[i][j] < 0.0 {
                return Err(Error::InvalidModelSpec(format!(
                    "mixing matrix entry ({i},{j}) is negative"
                )));
            }
            if noisy_mixing[i][j] != noisy_mixing[j][i] {
                return Err(Error::InvalidModelSpec(format!(
                    "mixing matrix not symmetric at ({i},{j})"
                )));
            }
        }
    }
    let mut p = vec![vec![0.0; k]; k];
    for i in 0..k {
        for j in 0..k {
            let pairs = pair_count(group_sizes, i, j);
            p[i][j] = if pairs == 0 {
                0.0
            } else {
                (noisy_mixing[i][j] / pairs as f64).clamp(0.0, 1.0)
            };
        }
    }
    Ok(SbmParams { attr: attr.to_string(), edge_prob: p })
}

/// Reassembles the symmetric mixing matrix from the scalar entries of a
/// private release (entries are stored for `i <= j` only).
pub fn mixing_matrix_from_release(
    release: &PrivateRelease,
    attr: &str,
    k: usize,
) -> Result<Vec<Vec<f64>>> {
    mixing_matrix_from_stats(&release.statistics, &release.values, attr, k)
}

/// As [`mixing_matrix_from_release`], from parallel kind/value slices.
pub fn mixing_matrix_from_stats(
    kinds: &[StatKind],
    values: &[f64],
    attr: &str,
    k: usize,
) -> Result<Vec<Vec<f64>>> {
    let mut m = vec![vec![f64::NAN; k]; k];
    for (kind, &value) in kinds.iter().zip(values) {
        if let StatKind::MixingMatrixEntry { attr: a, i, j } = kind {
            if a == attr {
                if *i >= k || *j >= k {
                    return Err(Error::SchemaMismatch {
                        attr: attr.to_string(),
                        expected: k,
                        actual: i.max(j) + 1,
                    });
                }
                m[*i][*j] = value;
                m[*j][*i] = value;
            }
        }
    }
    for i in 0..k {
        for j in 0..k {
            if m[i][j].is_nan() {
                return Err(Error::InvalidModelSpec(format!(
                    "release is missing mixing matrix entry ({i},{j}) for `{attr}`"
                )));
            }
        }
    }
    Ok(m)
}

/// The ordered list of scalar statistics that fully describes the mixing
/// matrix of `attr` with `k` groups (upper triangle, row-major).
pub fn mixing_release_kinds(attr: &str, k: usize) -> Vec<StatKind> {
    let mut kinds = Vec::with_capacity(k * (k + 1) / 2);
    for i in 0..k {
        for j in i..k {
            kinds.push(StatKind::mixing_entry(attr, i, j));
        }
    }
    kinds
}

/// Samples a graph: each unordered node pair `(u, v)` is an edge
/// independently with probability `P[g(u)][g(v)]`. Node attributes are
/// copied from `population`.
pub fn sample_sbm(
    params: &SbmParams,
    population: &AttributedGraph,
    rng: &mut impl Rng,
) -> Result<AttributedGraph> {
    let labels = population.labels(&params.attr)?;
    let k = population.schema(&params.attr)?.category_count();
    if params.group_count() != k {
        return Err(Error::SchemaMismatch {
            attr: params.attr.clone(),
            expected: k,
            actual: params.group_count(),
        });
    }
    let n = population.node_count();
    let mut edges = Vec::new();
    for u in 0..n as u32 {
        let gu = labels[u as usize] as usize;
        for v in (u + 1)..n as u32 {
            let p = params.edge_prob[gu][labels[v as usize] as usize];
            if p > 0.0 && rng.gen::<f64>() < p {
                edges.push((u, v));
            }
        }
    }
    population.with_edges(edges)
}
