//! Node-differentially-private release of network statistics.
//!
//! The release path: project the graph to a degree-capped version (bounding
//! every statistic's global sensitivity), compute the exact statistics on
//! the projected graph, add Laplace noise with the budget split across
//! statistics in proportion to their sensitivities, then clip negatives to
//! zero. An infinite budget skips the noise entirely and returns exact
//! values on the projected graph.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::graph::AttributedGraph;
use crate::stats::StatKind;

/// Privacy budget. The infinite budget is an explicit branch, never a huge
/// float, so the no-noise baseline is exact.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Epsilon {
    Finite(f64),
    Infinite,
}

impl Epsilon {
    pub fn is_finite(self) -> bool {
        matches!(self, Epsilon::Finite(_))
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            Epsilon::Finite(x) => Some(x),
            Epsilon::Infinite => None,
        }
    }
}

impl fmt::Display for Epsilon {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Epsilon::Finite(x) => write!(f, "{x}"),
            Epsilon::Infinite => write!(f, "inf"),
        }
    }
}

impl FromStr for Epsilon {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        if s.eq_ignore_ascii_case("inf") || s.eq_ignore_ascii_case("infinity") {
            return Ok(Epsilon::Infinite);
        }
        let x: f64 = s.parse().map_err(|_| format!("invalid epsilon `{s}`"))?;
        if !x.is_finite() {
            return Ok(Epsilon::Infinite);
        }
        Ok(Epsilon::Finite(x))
    }
}

impl Serialize for Epsilon {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Epsilon::Finite(x) => serializer.serialize_f64(*x),
            Epsilon::Infinite => serializer.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Epsilon {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        struct EpsVisitor;
        impl Visitor<'_> for EpsVisitor {
            type Value = Epsilon;
            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a number or the string \"inf\"")
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> std::result::Result<Epsilon, E> {
                Ok(Epsilon::Finite(v))
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<Epsilon, E> {
                Ok(Epsilon::Finite(v as f64))
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<Epsilon, E> {
                Ok(Epsilon::Finite(v as f64))
            }
            fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<Epsilon, E> {
                Epsilon::from_str(v).map_err(E::custom)
            }
        }
        deserializer.deserialize_any(EpsVisitor)
    }
}

/// What to release: an ordered list of scalar statistics, the total privacy
/// budget, and the truncation degree applied before anything is computed.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReleaseSpec {
    pub statistics: Vec<StatKind>,
    pub epsilon: Epsilon,
    pub delta_cap: u32,
}

impl ReleaseSpec {
    pub fn new(statistics: Vec<StatKind>, epsilon: Epsilon, delta_cap: u32) -> Self {
        Self { statistics, epsilon, delta_cap }
    }

    pub fn validate(&self) -> Result<()> {
        if self.statistics.is_empty() {
            return Err(Error::InvalidReleaseSpec("statistics list is empty".into()));
        }
        if self.delta_cap < 1 {
            return Err(Error::InvalidReleaseSpec("delta_cap must be >= 1".into()));
        }
        if let Epsilon::Finite(x) = self.epsilon {
            let valid = x.is_finite() && x > 0.0;
            if !valid {
                return Err(Error::InvalidReleaseSpec(format!(
                    "epsilon must be positive or infinite, got {x}"
                )));
            }
        }
        Ok(())
    }
}

/// Result of a private release: one noisy (or exact, for infinite budget)
/// value per requested statistic, plus the allocation metadata needed to
/// interpret it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PrivateRelease {
    pub statistics: Vec<StatKind>,
    pub values: Vec<f64>,
    pub epsilon: Epsilon,
    /// Per-statistic budget share; `None` when the total budget is infinite.
    pub per_statistic_epsilon: Option<Vec<f64>>,
    /// Global sensitivity of each statistic at `delta_cap`.
    pub sensitivities: Vec<u64>,
    pub delta_cap: u32,
    /// Label of the random stream that produced the noise, if any.
    #[serde(default)]
    pub seed_path: Option<String>,
    /// Optional creation stamp. Left unset by default so that identical
    /// inputs produce identical files.
    #[serde(default)]
    pub timestamp: Option<String>,
}

impl PrivateRelease {
    pub fn with_seed_path(mut self, path: impl Into<String>) -> Self {
        self.seed_path = Some(path.into());
        self
    }

    pub fn with_timestamp(mut self, ts: impl Into<String>) -> Self {
        self.timestamp = Some(ts.into());
        self
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Caps every node degree at `delta_cap` by a greedy pass over the stable
/// canonical edge ordering: an edge is kept iff both endpoints still have
/// spare degree in the partially built output. Output node set equals the
/// input's; kept edges are a subset of the input's; the pass is
/// deterministic and idempotent.
pub fn truncate_degree(g: &AttributedGraph, delta_cap: u32) -> AttributedGraph {
    assert!(delta_cap >= 1, "delta_cap must be >= 1");
    let cap = delta_cap as usize;
    let mut deg = vec![0usize; g.node_count()];
    let mut kept = Vec::with_capacity(g.edge_count());
    for &(u, v) in g.edges() {
        if deg[u as usize] < cap && deg[v as usize] < cap {
            deg[u as usize] += 1;
            deg[v as usize] += 1;
            kept.push((u, v));
        }
    }
    g.with_edges(kept).expect("kept edges are a subset of a valid edge list")
}

/// Global sensitivity of a statistic over the family of graphs with maximum
/// degree `delta_cap`, under node neighbors (one node plus all its edges).
pub fn global_sensitivity(kind: &StatKind, delta_cap: u32) -> u64 {
    let d = delta_cap as u64;
    match kind {
        StatKind::Edges => d,
        StatKind::MinDegreeCount { .. } => d + 1,
        StatKind::MixingMatrixEntry { .. } => d,
        StatKind::NodematchPerGroup { .. } => d,
        StatKind::TotalNodematch { .. } => d,
        StatKind::Nodefactor { .. } => 2 * d,
    }
}

/// Inverse CDF of the Laplace distribution with mean 0 and scale `b`,
/// evaluated at `u` in (0, 1). `u = 0.5` maps to the median 0.
pub fn laplace_inverse_cdf(u: f64, scale: f64) -> f64 {
    debug_assert!(u > 0.0 && u < 1.0);
    let p = u - 0.5;
    -scale * p.signum() * (1.0 - 2.0 * p.abs()).ln()
}

/// One draw from Lap(scale) via inverse-CDF applied to a uniform draw.
pub fn sample_laplace(rng: &mut impl Rng, scale: f64) -> f64 {
    assert!(scale > 0.0, "laplace scale must be positive");
    // Open-interval uniform: rejects the measure-zero endpoint draws that
    // would hit ln(0).
    let mut u: f64 = rng.gen();
    while u <= 0.0 {
        u = rng.gen();
    }
    laplace_inverse_cdf(u, scale)
}

/// Per-statistic budget shares proportional to global sensitivities, which
/// makes every statistic's Laplace scale equal to `sum(GS) / epsilon`.
#[derive(Debug, Clone, PartialEq)]
pub struct BudgetAllocation {
    pub shares: Vec<f64>,
    pub sensitivities: Vec<u64>,
    /// The single noise scale shared by all statistics.
    pub common_noise_scale: f64,
}

pub fn allocate_budget(
    kinds: &[StatKind],
    epsilon: f64,
    delta_cap: u32,
) -> Result<BudgetAllocation> {
    if kinds.is_empty() {
        return Err(Error::InvalidReleaseSpec("cannot allocate over an empty list".into()));
    }
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::InvalidReleaseSpec(format!(
            "allocation requires a finite positive epsilon, got {epsilon}"
        )));
    }
    let sensitivities: Vec<u64> = kinds.iter().map(|k| global_sensitivity(k, delta_cap)).collect();
    let total: u64 = sensitivities.iter().sum();
    let shares = sensitivities
        .iter()
        .map(|&s| epsilon * s as f64 / total as f64)
        .collect();
    Ok(BudgetAllocation {
        shares,
        sensitivities,
        common_noise_scale: total as f64 / epsilon,
    })
}

/// Runs the full release: truncate once at the spec's degree cap, compute
/// each statistic exactly on the truncated graph, then (for finite budgets)
/// add Laplace noise at the allocation's common scale and clip at zero.
/// The composed release satisfies `epsilon`-node-DP.
pub fn release_statistics(
    g: &AttributedGraph,
    spec: &ReleaseSpec,
    rng: &mut impl Rng,
) -> Result<PrivateRelease> {
    spec.validate()?;
    let truncated = truncate_degree(g, spec.delta_cap);
    let exact: Vec<u64> = spec
        .statistics
        .iter()
        .map(|k| k.evaluate(&truncated))
        .collect::<Result<_>>()?;

    match spec.epsilon {
        Epsilon::Infinite => Ok(PrivateRelease {
            statistics: spec.statistics.clone(),
            values: exact.iter().map(|&v| v as f64).collect(),
            epsilon: Epsilon::Infinite,
            per_statistic_epsilon: None,
            sensitivities: spec
                .statistics
                .iter()
                .map(|k| global_sensitivity(k, spec.delta_cap))
                .collect(),
            delta_cap: spec.delta_cap,
            seed_path: None,
            timestamp: None,
        }),
        Epsilon::Finite(eps) => {
            let alloc = allocate_budget(&spec.statistics, eps, spec.delta_cap)?;
            let values = exact
                .iter()
                .map(|&v| (v as f64 + sample_laplace(rng, alloc.common_noise_scale)).max(0.0))
                .collect();
            Ok(PrivateRelease {
                statistics: spec.statistics.clone(),
                values,
                epsilon: spec.epsilon,
                per_statistic_epsilon: Some(alloc.shares),
                sensitivities: alloc.sensitivities,
                delta_cap: spec.delta_cap,
                seed_path: None,
                timestamp: None,
            })
        }
    }
}
