//! Exact network statistics: edge count, degree-threshold counts, mixing
//! matrices, nodematch/nodefactor counts, degree histograms, and the
//! relative-difference quality metrics used to compare synthetic networks
//! against an observed baseline.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::AttributedGraph;

/// Identifies one scalar network statistic.
///
/// Matrix- and vector-valued summaries (mixing matrix, per-group counts)
/// are addressed entry-wise so each scalar can be released, noised and
/// budgeted independently.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StatKind {
    /// Total number of edges.
    Edges,
    /// Number of nodes with degree at least `d`.
    MinDegreeCount { d: u32 },
    /// Entry `(i, j)` of the mixing matrix for `attr`; stored with `i <= j`.
    MixingMatrixEntry { attr: String, i: usize, j: usize },
    /// Number of edges with both endpoints in `group` of `attr`.
    NodematchPerGroup { attr: String, group: usize },
    /// Number of edges whose endpoints share their `attr` category.
    TotalNodematch { attr: String },
    /// Number of edges with at least one endpoint in `group` of `attr`.
    Nodefactor { attr: String, group: usize },
}

impl StatKind {
    pub fn mixing_entry(attr: impl Into<String>, i: usize, j: usize) -> Self {
        StatKind::MixingMatrixEntry {
            attr: attr.into(),
            i: i.min(j),
            j: i.max(j),
        }
    }

    /// Exact value of this statistic on `g`. All values are nonnegative
    /// integers; noisy counterparts become reals downstream.
    pub fn evaluate(&self, g: &AttributedGraph) -> Result<u64> {
        match self {
            StatKind::Edges => Ok(count_edges(g)),
            StatKind::MinDegreeCount { d } => Ok(count_nodes_with_min_degree(g, *d)),
            StatKind::MixingMatrixEntry { attr, i, j } => {
                let m = mixing_matrix(g, attr)?;
                check_group(g, attr, *i.max(j))?;
                Ok(m[*i][*j])
            }
            StatKind::NodematchPerGroup { attr, group } => {
                check_group(g, attr, *group)?;
                Ok(nodematch_per_group(g, attr)?[*group])
            }
            StatKind::TotalNodematch { attr } => total_nodematch(g, attr),
            StatKind::Nodefactor { attr, group } => {
                check_group(g, attr, *group)?;
                Ok(nodefactor(g, attr)?[*group])
            }
        }
    }

    /// Largest value this statistic can take on any simple graph over the
    /// given population (used to clamp noisy fit targets to feasible
    /// ranges). Group sizes are public, so this leaks nothing.
    pub fn max_value(&self, g: &AttributedGraph) -> Result<u64> {
        let n = g.node_count() as u64;
        let all_pairs = n * n.saturating_sub(1) / 2;
        match self {
            StatKind::Edges => Ok(all_pairs),
            StatKind::MinDegreeCount { .. } => Ok(n),
            StatKind::MixingMatrixEntry { attr, i, j } => {
                let sizes = g.group_sizes(attr)?;
                check_group(g, attr, *i.max(j))?;
                let (ni, nj) = (sizes[*i] as u64, sizes[*j] as u64);
                Ok(if i == j { ni * ni.saturating_sub(1) / 2 } else { ni * nj })
            }
            StatKind::NodematchPerGroup { attr, group } => {
                let sizes = g.group_sizes(attr)?;
                check_group(g, attr, *group)?;
                let ni = sizes[*group] as u64;
                Ok(ni * ni.saturating_sub(1) / 2)
            }
            StatKind::TotalNodematch { attr } => {
                let sizes = g.group_sizes(attr)?;
                Ok(sizes
                    .iter()
                    .map(|&s| (s as u64) * (s as u64).saturating_sub(1) / 2)
                    .sum())
            }
            StatKind::Nodefactor { attr, group } => {
                let sizes = g.group_sizes(attr)?;
                check_group(g, attr, *group)?;
                let rest = n - sizes[*group] as u64;
                // All pairs except those entirely outside the group.
                Ok(all_pairs - rest * rest.saturating_sub(1) / 2)
            }
        }
    }

    /// Compact human-readable form, used in CLI output and JSON summaries.
    pub fn label(&self) -> String {
        match self {
            StatKind::Edges => "edges".to_string(),
            StatKind::MinDegreeCount { d } => format!("deg_ge_{d}"),
            StatKind::MixingMatrixEntry { attr, i, j } => format!("mix[{attr}][{i},{j}]"),
            StatKind::NodematchPerGroup { attr, group } => format!("nodematch[{attr}][{group}]"),
            StatKind::TotalNodematch { attr } => format!("total_nodematch[{attr}]"),
            StatKind::Nodefactor { attr, group } => format!("nodefactor[{attr}][{group}]"),
        }
    }
}

fn check_group(g: &AttributedGraph, attr: &str, group: usize) -> Result<()> {
    let k = g.schema(attr)?.category_count();
    if group >= k {
        return Err(Error::SchemaMismatch {
            attr: attr.to_string(),
            expected: k,
            actual: group + 1,
        });
    }
    Ok(())
}

pub fn count_edges(g: &AttributedGraph) -> u64 {
    g.edge_count() as u64
}

/// Number of nodes with degree at least `d` (`d >= 1`).
pub fn count_nodes_with_min_degree(g: &AttributedGraph, d: u32) -> u64 {
    (0..g.node_count() as u32)
        .filter(|&v| g.degree(v) >= d as usize)
        .count() as u64
}

/// Symmetric k×k matrix whose `(i, j)` entry counts edges with one endpoint
/// in group `i` and the other in group `j`; the diagonal counts each
/// within-group edge once.
pub fn mixing_matrix(g: &AttributedGraph, attr: &str) -> Result<Vec<Vec<u64>>> {
    let labels = g.labels(attr)?;
    let k = g.schema(attr)?.category_count();
    let mut m = vec![vec![0u64; k]; k];
    for &(u, v) in g.edges() {
        let (a, b) = (labels[u as usize] as usize, labels[v as usize] as usize);
        m[a.min(b)][a.max(b)] += 1;
    }
    for i in 0..k {
        for j in (i + 1)..k {
            m[j][i] = m[i][j];
        }
    }
    Ok(m)
}

/// Diagonal of the mixing matrix: per-group within-group edge counts.
pub fn nodematch_per_group(g: &AttributedGraph, attr: &str) -> Result<Vec<u64>> {
    let labels = g.labels(attr)?;
    let k = g.schema(attr)?.category_count();
    let mut counts = vec![0u64; k];
    for &(u, v) in g.edges() {
        if labels[u as usize] == labels[v as usize] {
            counts[labels[u as usize] as usize] += 1;
        }
    }
    Ok(counts)
}

/// Trace of the mixing matrix: total number of within-group edges.
pub fn total_nodematch(g: &AttributedGraph, attr: &str) -> Result<u64> {
    Ok(nodematch_per_group(g, attr)?.iter().sum())
}

/// Per-group counts of edges with at least one endpoint in the group.
pub fn nodefactor(g: &AttributedGraph, attr: &str) -> Result<Vec<u64>> {
    let labels = g.labels(attr)?;
    let k = g.schema(attr)?.category_count();
    let mut counts = vec![0u64; k];
    for &(u, v) in g.edges() {
        let (a, b) = (labels[u as usize] as usize, labels[v as usize] as usize);
        counts[a] += 1;
        if a != b {
            counts[b] += 1;
        }
    }
    Ok(counts)
}

/// Node counts indexed by degree; entries sum to the node count.
pub fn degree_histogram(g: &AttributedGraph) -> Vec<u64> {
    let mut hist = vec![0u64; g.max_degree() + 1];
    for v in 0..g.node_count() as u32 {
        hist[g.degree(v)] += 1;
    }
    hist
}

/// One comparison metric: relative percent difference of a synthetic
/// network's statistic against the observed network's. `None` when the
/// observed value is zero (the ratio is undefined there).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityMetric {
    pub name: String,
    pub value: Option<f64>,
}

/// Relative percent difference `100 * (syn - obs) / obs` for each headline
/// comparison metric: edge count, concurrency (nodes with degree >= 2) and
/// per-attribute homophily (total nodematch).
pub fn quality_metrics(
    synthetic: &AttributedGraph,
    observed: &AttributedGraph,
    attrs: &[&str],
) -> Result<Vec<QualityMetric>> {
    if !synthetic.same_population(observed) {
        return Err(Error::GraphMismatch(
            "quality metrics require identical node counts and schemas".into(),
        ));
    }
    let rel = |s: u64, o: u64| -> Option<f64> {
        if o == 0 {
            None
        } else {
            Some(100.0 * (s as f64 - o as f64) / o as f64)
        }
    };
    let mut out = vec![
        QualityMetric {
            name: "edges".into(),
            value: rel(count_edges(synthetic), count_edges(observed)),
        },
        QualityMetric {
            name: "concurrent".into(),
            value: rel(
                count_nodes_with_min_degree(synthetic, 2),
                count_nodes_with_min_degree(observed, 2),
            ),
        },
    ];
    for attr in attrs {
        out.push(QualityMetric {
            name: format!("homophily_{attr}"),
            value: rel(total_nodematch(synthetic, attr)?, total_nodematch(observed, attr)?),
        });
    }
    Ok(out)
}
