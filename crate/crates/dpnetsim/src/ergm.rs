//! Exponential random graph models: term specification, change statistics,
//! Metropolis–Hastings sampling over single-dyad toggles, and fitting by
//! stochastic-approximation moment matching.
//!
//! The model places probability proportional to `exp(theta . f(G))` on
//! graphs `G`, where `f` concatenates the statistics named by the spec.
//! Fitting drives the long-run simulated means of `f` toward a target
//! vector, which may come from a private release rather than an observed
//! graph.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::AttributedGraph;
use crate::stats::StatKind;

/// Ordered list of model terms. At least the edge-count term must be
/// present (it plays the role of an intercept); terms must be distinct.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErgmSpec {
    terms: Vec<StatKind>,
}

impl ErgmSpec {
    pub fn new(terms: Vec<StatKind>) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::InvalidModelSpec("term list is empty".into()));
        }
        if !terms.contains(&StatKind::Edges) {
            return Err(Error::InvalidModelSpec("the edges term is required".into()));
        }
        for (i, t) in terms.iter().enumerate() {
            if terms[..i].contains(t) {
                return Err(Error::InvalidModelSpec(format!(
                    "duplicate term {}",
                    t.label()
                )));
            }
        }
        Ok(Self { terms })
    }

    pub fn terms(&self) -> &[StatKind] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn edges_index(&self) -> usize {
        self.terms
            .iter()
            .position(|t| *t == StatKind::Edges)
            .expect("validated at construction")
    }
}

/// The working two-attribute term set: edges, degree-threshold counts for
/// 2 and 4, per-group homophily on the first attribute, total homophily on
/// the second, and nodefactor terms for both. With `exclude_reference` the
/// first group of each attribute is dropped from the nodefactor terms to
/// avoid collinearity with the edges term.
pub fn standard_terms(
    first_attr: &str,
    first_groups: usize,
    second_attr: &str,
    second_groups: usize,
    exclude_reference: bool,
) -> Vec<StatKind> {
    let start = usize::from(exclude_reference);
    let mut terms = vec![
        StatKind::Edges,
        StatKind::MinDegreeCount { d: 2 },
        StatKind::MinDegreeCount { d: 4 },
    ];
    for g in 0..first_groups {
        terms.push(StatKind::NodematchPerGroup { attr: first_attr.into(), group: g });
    }
    terms.push(StatKind::TotalNodematch { attr: second_attr.into() });
    for g in start..first_groups {
        terms.push(StatKind::Nodefactor { attr: first_attr.into(), group: g });
    }
    for g in start..second_groups {
        terms.push(StatKind::Nodefactor { attr: second_attr.into(), group: g });
    }
    terms
}

/// Coefficient vector aligned with an [`ErgmSpec`]'s terms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErgmParams {
    pub theta: Vec<f64>,
}

impl ErgmParams {
    pub fn new(theta: Vec<f64>) -> Self {
        Self { theta }
    }
}

/// Chain-length parameters for the single-dyad-toggle sampler, in units of
/// proposals. The scaled defaults grow with the dyad count so that one
/// thinning interval is one expected sweep over all dyads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McmcConfig {
    pub burn_in: u64,
    pub thinning: u64,
    pub chain_length: u64,
}

impl McmcConfig {
    /// Defaults scaled to the population size: burn-in of ten sweeps,
    /// thinning and chain length of one sweep each.
    pub fn scaled(node_count: usize) -> Self {
        let dyads = (node_count * node_count.saturating_sub(1) / 2).max(1) as u64;
        Self { burn_in: 10 * dyads, thinning: dyads, chain_length: dyads }
    }

    pub fn validate(&self) -> Result<()> {
        if self.burn_in == 0 || self.thinning == 0 || self.chain_length == 0 {
            return Err(Error::InvalidModelSpec(
                "mcmc burn_in, thinning and chain_length must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Exact statistic vector `f(G)` for the spec's terms, in term order.
pub fn ergm_statistics(g: &AttributedGraph, spec: &ErgmSpec) -> Result<Vec<f64>> {
    spec.terms.iter().map(|t| Ok(t.evaluate(g)? as f64)).collect()
}

/// Change statistics of a dyad: `f(G + uv) - f(G - uv)`, computed in
/// O(terms) from labels and degrees, without copying the graph.
pub fn ergm_change_statistics(
    g: &AttributedGraph,
    spec: &ErgmSpec,
    u: u32,
    v: u32,
) -> Result<Vec<f64>> {
    if u == v {
        return Err(Error::InvalidModelSpec(format!("dyad ({u},{u}) is a self-loop")));
    }
    let present = g.neighbors(u).contains(&v);
    let sub = usize::from(present);
    let du = (g.degree(u) - sub) as u32;
    let dv = (g.degree(v) - sub) as u32;
    let compiled = compile_terms(spec, g)?;
    Ok(compiled
        .iter()
        .map(|t| t.change_on(g, du, dv, u as usize, v as usize))
        .collect())
}

/// Term with attribute names resolved to indices, so the inner sampling
/// loop does no string work.
#[derive(Debug, Clone)]
enum CompiledTerm {
    Edges,
    MinDegree { d: u32 },
    Mixing { attr: usize, i: u16, j: u16 },
    Nodematch { attr: usize, group: u16 },
    TotalNodematch { attr: usize },
    Nodefactor { attr: usize, group: u16 },
}

impl CompiledTerm {
    /// Contribution of toggling the dyad on, given endpoint degrees with
    /// the dyad absent.
    #[inline]
    fn change_on(&self, g: &AttributedGraph, du: u32, dv: u32, u: usize, v: usize) -> f64 {
        match *self {
            CompiledTerm::Edges => 1.0,
            CompiledTerm::MinDegree { d } => {
                ((du + 1 == d) as u32 + (dv + 1 == d) as u32) as f64
            }
            CompiledTerm::Mixing { attr, i, j } => {
                let labels = g.labels_by_index(attr);
                let (a, b) = (labels[u], labels[v]);
                ((a.min(b) == i && a.max(b) == j) as u32) as f64
            }
            CompiledTerm::Nodematch { attr, group } => {
                let labels = g.labels_by_index(attr);
                ((labels[u] == group && labels[v] == group) as u32) as f64
            }
            CompiledTerm::TotalNodematch { attr } => {
                let labels = g.labels_by_index(attr);
                ((labels[u] == labels[v]) as u32) as f64
            }
            CompiledTerm::Nodefactor { attr, group } => {
                let labels = g.labels_by_index(attr);
                ((labels[u] == group || labels[v] == group) as u32) as f64
            }
        }
    }
}

fn compile_terms(spec: &ErgmSpec, g: &AttributedGraph) -> Result<Vec<CompiledTerm>> {
    spec.terms
        .iter()
        .map(|t| {
            Ok(match t {
                StatKind::Edges => CompiledTerm::Edges,
                StatKind::MinDegreeCount { d } => CompiledTerm::MinDegree { d: *d },
                StatKind::MixingMatrixEntry { attr, i, j } => CompiledTerm::Mixing {
                    attr: g.attribute_index(attr)?,
                    i: *i.min(j) as u16,
                    j: *i.max(j) as u16,
                },
                StatKind::NodematchPerGroup { attr, group } => CompiledTerm::Nodematch {
                    attr: g.attribute_index(attr)?,
                    group: *group as u16,
                },
                StatKind::TotalNodematch { attr } => CompiledTerm::TotalNodematch {
                    attr: g.attribute_index(attr)?,
                },
                StatKind::Nodefactor { attr, group } => CompiledTerm::Nodefactor {
                    attr: g.attribute_index(attr)?,
                    group: *group as u16,
                },
            })
        })
        .collect()
}

/// Metropolis–Hastings chain over single-dyad toggles. The chain owns its
/// adjacency state (a triangular bitset) and maintains the statistic
/// vector incrementally; the stationary distribution is the ERGM at the
/// current coefficients.
///
/// Every term except the degree-threshold counts depends only on the two
/// endpoint label tuples, so the chain folds those contributions into a
/// per-label-pair-type table and touches individual terms only on accept.
pub struct ErgmChain<'a> {
    population: &'a AttributedGraph,
    theta: Vec<f64>,
    n: usize,
    adj: Vec<u64>,
    degrees: Vec<u32>,
    stats: Vec<f64>,
    change_buf: Vec<f64>,
    /// Mixed-radix label tuple per node; `type_count` distinct values.
    node_type: Vec<u32>,
    type_count: usize,
    /// Change vector of the label-dependent terms per (type_u, type_v)
    /// pair, flattened to `type_count^2 * terms.len()`.
    type_change: Vec<f64>,
    /// Dot product of `theta` with each pair type's change vector;
    /// refreshed by `set_theta`.
    type_dot: Vec<f64>,
    /// Indices of degree-threshold terms, with their thresholds.
    degree_terms: Vec<(usize, u32)>,
}

impl<'a> ErgmChain<'a> {
    /// Starts a chain from the empty graph over `population`'s nodes.
    pub fn new(
        spec: &ErgmSpec,
        params: &ErgmParams,
        population: &'a AttributedGraph,
    ) -> Result<Self> {
        if params.theta.len() != spec.len() {
            return Err(Error::InvalidModelSpec(format!(
                "theta has {} entries for {} terms",
                params.theta.len(),
                spec.len()
            )));
        }
        let terms = compile_terms(spec, population)?;
        let n = population.node_count();
        let dyads = n * n.saturating_sub(1) / 2;

        let type_count: usize = population
            .schemas()
            .iter()
            .map(|s| s.category_count())
            .product::<usize>()
            .max(1);
        let mut node_type = vec![0u32; n];
        for v in 0..n {
            let mut t = 0usize;
            for (a, schema) in population.schemas().iter().enumerate() {
                t = t * schema.category_count() + population.labels_by_index(a)[v] as usize;
            }
            node_type[v] = t as u32;
        }

        // Change vectors per pair type: evaluate the label-dependent terms
        // on one representative node pair per type combination. Degree
        // terms stay out of the table (their entries are zero here) and
        // are added per proposal.
        let degree_terms: Vec<(usize, u32)> = terms
            .iter()
            .enumerate()
            .filter_map(|(i, t)| match t {
                CompiledTerm::MinDegree { d } => Some((i, *d)),
                _ => None,
            })
            .collect();
        let mut representative = vec![usize::MAX; type_count];
        for v in 0..n {
            representative[node_type[v] as usize] = v;
        }
        let d = terms.len();
        let mut type_change = vec![0.0; type_count * type_count * d];
        for tu in 0..type_count {
            for tv in 0..type_count {
                let (ru, rv) = (representative[tu], representative[tv]);
                if ru == usize::MAX || rv == usize::MAX {
                    continue; // type unused by any node: never proposed
                }
                let base = (tu * type_count + tv) * d;
                for (i, term) in terms.iter().enumerate() {
                    if matches!(term, CompiledTerm::MinDegree { .. }) {
                        continue;
                    }
                    type_change[base + i] = term.change_on(population, 0, 0, ru, rv);
                }
            }
        }

        let mut chain = Self {
            population,
            theta: params.theta.clone(),
            stats: vec![0.0; d],
            change_buf: vec![0.0; d],
            n,
            adj: vec![0u64; dyads.div_ceil(64)],
            degrees: vec![0; n],
            node_type,
            type_count,
            type_change,
            type_dot: vec![0.0; type_count * type_count],
            degree_terms,
        };
        chain.refresh_type_dot();
        Ok(chain)
    }

    fn refresh_type_dot(&mut self) {
        let d = self.theta.len();
        for pair in 0..self.type_count * self.type_count {
            let base = pair * d;
            self.type_dot[pair] = self.type_change[base..base + d]
                .iter()
                .zip(&self.theta)
                .map(|(c, t)| c * t)
                .sum();
        }
    }

    pub fn set_theta(&mut self, theta: &[f64]) {
        self.theta.copy_from_slice(theta);
        self.refresh_type_dot();
    }

    /// Current statistic vector of the chain state.
    pub fn stats(&self) -> &[f64] {
        &self.stats
    }

    pub fn edge_count(&self) -> u64 {
        self.adj.iter().map(|w| w.count_ones() as u64).sum()
    }

    /// Whether the chain's current state has the edge `(u, v)`.
    pub fn has_edge_between(&self, u: u32, v: u32) -> bool {
        let (u, v) = ((u.min(v)) as usize, (u.max(v)) as usize);
        self.has_edge(self.dyad_index(u, v))
    }

    #[inline]
    fn dyad_index(&self, u: usize, v: usize) -> usize {
        // u < v
        u * self.n - u * (u + 1) / 2 + (v - u - 1)
    }

    #[inline]
    fn has_edge(&self, idx: usize) -> bool {
        self.adj[idx / 64] >> (idx % 64) & 1 == 1
    }

    /// Runs `proposals` single-dyad Metropolis–Hastings steps.
    pub fn advance(&mut self, proposals: u64, rng: &mut impl Rng) {
        for _ in 0..proposals {
            let u = rng.gen_range(0..self.n);
            let mut v = rng.gen_range(0..self.n - 1);
            if v >= u {
                v += 1;
            }
            let (u, v) = (u.min(v), u.max(v));
            let idx = self.dyad_index(u, v);
            let present = self.has_edge(idx);
            let sub = u32::from(present);
            let du = self.degrees[u] - sub;
            let dv = self.degrees[v] - sub;

            let pair = self.node_type[u] as usize * self.type_count + self.node_type[v] as usize;
            let mut delta = self.type_dot[pair];
            for &(i, d) in &self.degree_terms {
                delta += self.theta[i] * ((du + 1 == d) as u32 + (dv + 1 == d) as u32) as f64;
            }
            let log_accept = if present { -delta } else { delta };
            if log_accept >= 0.0 || rng.gen::<f64>() < log_accept.exp() {
                let d_len = self.theta.len();
                let base = pair * d_len;
                self.change_buf.copy_from_slice(&self.type_change[base..base + d_len]);
                for &(i, d) in &self.degree_terms {
                    self.change_buf[i] = ((du + 1 == d) as u32 + (dv + 1 == d) as u32) as f64;
                }
                self.adj[idx / 64] ^= 1 << (idx % 64);
                if present {
                    self.degrees[u] -= 1;
                    self.degrees[v] -= 1;
                    for (s, c) in self.stats.iter_mut().zip(&self.change_buf) {
                        *s -= c;
                    }
                } else {
                    self.degrees[u] += 1;
                    self.degrees[v] += 1;
                    for (s, c) in self.stats.iter_mut().zip(&self.change_buf) {
                        *s += c;
                    }
                }
            }
        }
    }

    /// Materializes the current state as a graph sharing the population's
    /// attributes.
    pub fn to_graph(&self) -> AttributedGraph {
        let mut edges = Vec::new();
        for u in 0..self.n {
            for v in (u + 1)..self.n {
                if self.has_edge(self.dyad_index(u, v)) {
                    edges.push((u as u32, v as u32));
                }
            }
        }
        self.population
            .with_edges(edges)
            .expect("chain state is a valid simple graph")
    }
}

/// Draws one graph: runs the chain for `burn_in + chain_length` proposals
/// and returns the final state. Node attributes are copied from
/// `population`.
pub fn sample_ergm(
    params: &ErgmParams,
    spec: &ErgmSpec,
    population: &AttributedGraph,
    mcmc: &McmcConfig,
    rng: &mut impl Rng,
) -> Result<AttributedGraph> {
    mcmc.validate()?;
    let mut chain = ErgmChain::new(spec, params, population)?;
    chain.advance(mcmc.burn_in + mcmc.chain_length, rng);
    Ok(chain.to_graph())
}

/// Knobs for the moment-matching fit: a decaying gain sequence, phase
/// lengths (variance pilot, updates per round, evaluation samples), the
/// convergence tolerance in estimated MCMC standard errors, and the hard
/// coefficient cap.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub gain_init: f64,
    pub gain_decay: f64,
    pub pilot_samples: usize,
    pub update_steps: usize,
    pub eval_samples: usize,
    pub tolerance_se: f64,
    pub max_rounds: usize,
    pub theta_cap: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            gain_init: 0.5,
            gain_decay: 0.025,
            pilot_samples: 25,
            update_steps: 200,
            eval_samples: 50,
            tolerance_se: 2.5,
            max_rounds: 5,
            theta_cap: 20.0,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = self.gain_init > 0.0
            && self.gain_decay > 0.0
            && self.pilot_samples > 0
            && self.update_steps > 0
            && self.eval_samples > 1
            && self.tolerance_se > 0.0
            && self.max_rounds > 0
            && self.theta_cap > 0.0;
        if !positive {
            return Err(Error::InvalidModelSpec("fit config fields must be positive".into()));
        }
        Ok(())
    }
}

/// A target that had to be pulled back into its combinatorially feasible
/// range before fitting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetAdjustment {
    pub term_index: usize,
    pub original: f64,
    pub clamped: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitDiagnostics {
    pub converged: bool,
    /// Total phase-2 updates performed.
    pub iterations: usize,
    /// Final |simulated mean - target| in units of the MCMC standard error,
    /// per term.
    pub residuals_se: Vec<f64>,
    pub clamped: Vec<TargetAdjustment>,
    /// Targets remained mutually inconsistent even after clamping (e.g. a
    /// zero edge target with a positive homophily target). The fit still
    /// runs on the clamped values.
    pub infeasible: bool,
    pub warnings: Vec<String>,
}

const VARIANCE_FLOOR: f64 = 0.25;
/// Residuals at or below half a count are accepted regardless of the SE:
/// all targets are counts, so half a count is exact for practical purposes.
const ABSOLUTE_RESIDUAL_FLOOR: f64 = 0.5;
/// Coefficient updates run every `thinning / UPDATE_INTERVAL_DIVISOR`
/// proposals: the gradient draws may be correlated, but the decaying gain
/// absorbs that, and updates get five times cheaper. Pilot and evaluation
/// samples still use the full thinning interval.
const UPDATE_INTERVAL_DIVISOR: u64 = 5;

struct SampleMoments {
    mean: Vec<f64>,
    var: Vec<f64>,
    /// Batch-means MCMC standard error of each mean (robust to residual
    /// autocorrelation between thinned draws).
    se: Vec<f64>,
}

fn collect_samples(
    chain: &mut ErgmChain,
    thinning: u64,
    count: usize,
    rng: &mut impl Rng,
) -> SampleMoments {
    let d = chain.stats().len();
    let batches = count.clamp(1, 10);
    let batch_size = count / batches;
    let used = batches * batch_size;
    let mut sum = vec![0.0; d];
    let mut sumsq = vec![0.0; d];
    let mut batch_means = vec![vec![0.0; batches]; d];
    for s in 0..used {
        chain.advance(thinning, rng);
        for (i, &x) in chain.stats().iter().enumerate() {
            sum[i] += x;
            sumsq[i] += x * x;
            batch_means[i][s / batch_size] += x / batch_size as f64;
        }
    }
    let m = used as f64;
    let mean: Vec<f64> = sum.iter().map(|s| s / m).collect();
    let var: Vec<f64> = sumsq
        .iter()
        .zip(&mean)
        .map(|(sq, mu)| (sq / m - mu * mu).max(0.0) * m / (m - 1.0).max(1.0))
        .collect();
    let se: Vec<f64> = batch_means
        .iter()
        .zip(&mean)
        .map(|(bm, mu)| {
            if batches < 2 {
                return f64::INFINITY;
            }
            let v = bm.iter().map(|b| (b - mu) * (b - mu)).sum::<f64>() / (batches - 1) as f64;
            (v / batches as f64).sqrt()
        })
        .collect();
    SampleMoments { mean, var, se }
}

/// Fits coefficients so that the long-run simulated means of the spec's
/// statistics match `targets`.
///
/// Targets are first clamped to their combinatorial ranges (noise can push
/// a released count past what any graph realizes); remaining cross-target
/// inconsistencies are flagged but do not stop the fit. The update rule is
/// `theta <- theta - a_t * D^{-1} (f_sim - targets)` with `D` the diagonal
/// of simulated variances and `a_t` a decaying gain, iterated in rounds
/// until an evaluation run puts every simulated mean within
/// `tolerance_se` standard errors of its target (or half a count).
pub fn fit_ergm(
    targets: &[f64],
    spec: &ErgmSpec,
    population: &AttributedGraph,
    fit: &FitConfig,
    mcmc: &McmcConfig,
    rng: &mut impl Rng,
) -> Result<(ErgmParams, FitDiagnostics)> {
    fit.validate()?;
    mcmc.validate()?;
    let d = spec.len();
    if targets.len() != d {
        return Err(Error::InvalidModelSpec(format!(
            "{} targets for {} terms",
            targets.len(),
            d
        )));
    }

    // Clamp targets into feasible ranges.
    let mut clamped = Vec::with_capacity(d);
    let mut adjustments = Vec::new();
    let mut warnings = Vec::new();
    for (i, (kind, &t)) in spec.terms().iter().zip(targets).enumerate() {
        let max = kind.max_value(population)? as f64;
        let c = t.clamp(0.0, max);
        if c != t {
            adjustments.push(TargetAdjustment { term_index: i, original: t, clamped: c });
        }
        clamped.push(c);
    }

    // Cross-target feasibility: every edge-subset statistic is bounded by
    // the edge count, and a node of degree >= d needs d edge endpoints.
    let edges_idx = spec.edges_index();
    let edge_target = clamped[edges_idx];
    let mut infeasible = false;
    for (i, kind) in spec.terms().iter().enumerate() {
        let bound = match kind {
            StatKind::Edges => continue,
            StatKind::MinDegreeCount { d } => 2.0 * edge_target / *d as f64,
            _ => edge_target,
        };
        if clamped[i] > bound + 1e-9 {
            infeasible = true;
            warnings.push(format!(
                "target for {} ({}) exceeds what {} edges allow",
                kind.label(),
                clamped[i],
                edge_target
            ));
        }
    }

    // Start from the dyad-independent density solution: the edges
    // coefficient at the logit of the target density, everything else 0.
    let n = population.node_count();
    let pairs = (n * n.saturating_sub(1) / 2) as f64;
    let cap = fit.theta_cap;
    let rho = if pairs > 0.0 { edge_target / pairs } else { 0.0 };
    let mut theta = vec![0.0; d];
    theta[edges_idx] = if rho <= 0.0 {
        -cap
    } else if rho >= 1.0 {
        cap
    } else {
        (rho / (1.0 - rho)).ln().clamp(-cap, cap)
    };

    let mut chain = ErgmChain::new(spec, &ErgmParams::new(theta.clone()), population)?;
    chain.advance(mcmc.burn_in, rng);

    let pilot = collect_samples(&mut chain, mcmc.thinning, fit.pilot_samples, rng);
    let mut scale: Vec<f64> = pilot.var.iter().map(|&v| v.max(VARIANCE_FLOOR)).collect();

    let mut total_updates = 0usize;
    let mut converged = false;
    let mut best_theta = theta.clone();
    let mut best_residuals = vec![f64::INFINITY; d];
    let mut best_worst = f64::INFINITY;
    let update_interval = (mcmc.thinning / UPDATE_INTERVAL_DIVISOR).max(1);
    for _round in 0..fit.max_rounds {
        // Polyak averaging over the second half of the round's iterates:
        // the averaged coefficients shed most of the single-draw noise.
        let mut theta_sum = vec![0.0; d];
        let mut averaged = 0usize;
        for step in 0..fit.update_steps {
            chain.advance(update_interval, rng);
            let gain = fit.gain_init / (1.0 + fit.gain_decay * total_updates as f64);
            for i in 0..d {
                theta[i] -= gain * (chain.stats()[i] - clamped[i]) / scale[i];
                theta[i] = theta[i].clamp(-cap, cap);
            }
            chain.set_theta(&theta);
            total_updates += 1;
            if step >= fit.update_steps / 2 {
                for i in 0..d {
                    theta_sum[i] += theta[i];
                }
                averaged += 1;
            }
        }
        if averaged > 0 {
            for i in 0..d {
                theta[i] = (theta_sum[i] / averaged as f64).clamp(-cap, cap);
            }
            chain.set_theta(&theta);
        }

        // Let the chain settle at the averaged coefficients, then measure.
        chain.advance(3 * mcmc.thinning, rng);
        let eval = collect_samples(&mut chain, mcmc.thinning, fit.eval_samples, rng);
        let mut round_residuals = vec![0.0; d];
        let mut worst = 0.0f64;
        for i in 0..d {
            let resid = (eval.mean[i] - clamped[i]).abs();
            round_residuals[i] = if eval.se[i] > 0.0 {
                resid / eval.se[i]
            } else if resid == 0.0 {
                0.0
            } else {
                f64::INFINITY
            };
            // Residuals at or below the absolute floor count as met even
            // when the SE is tiny.
            let effective = if resid <= ABSOLUTE_RESIDUAL_FLOOR { 0.0 } else { round_residuals[i] };
            worst = worst.max(effective);
        }
        if worst < best_worst {
            best_worst = worst;
            best_theta.copy_from_slice(&theta);
            best_residuals = round_residuals;
        }
        if best_worst <= fit.tolerance_se {
            converged = true;
            break;
        }
        scale = eval.var.iter().map(|&v| v.max(VARIANCE_FLOOR)).collect();
    }
    if !converged {
        warnings.push(format!(
            "no convergence after {total_updates} updates; worst residual {best_worst:.2} SE"
        ));
    }

    Ok((
        ErgmParams::new(best_theta),
        FitDiagnostics {
            converged,
            iterations: total_updates,
            residuals_se: best_residuals,
            clamped: adjustments,
            infeasible,
            warnings,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::testutil::{random_graph, shapes_graph};
    use crate::graph::{AttributeSchema, AttributedGraph};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn two_group_population(n: usize) -> AttributedGraph {
        let schema = AttributeSchema::new("grp", vec!["x".into(), "y".into()]);
        let labels: Vec<u16> = (0..n).map(|i| (i % 2) as u16).collect();
        AttributedGraph::new(n, vec![schema], vec![labels], vec![]).unwrap()
    }

    #[test]
    fn spec_validation() {
        assert!(ErgmSpec::new(vec![]).is_err());
        assert!(ErgmSpec::new(vec![StatKind::MinDegreeCount { d: 2 }]).is_err());
        assert!(ErgmSpec::new(vec![StatKind::Edges, StatKind::Edges]).is_err());
        assert!(ErgmSpec::new(vec![StatKind::Edges, StatKind::MinDegreeCount { d: 2 }]).is_ok());
    }

    #[test]
    fn standard_terms_shape() {
        let terms = standard_terms("age", 3, "race", 2, true);
        // edges + deg2 + deg4 + 3 nodematch + 1 total nodematch
        // + 2 age nodefactor + 1 race nodefactor.
        assert_eq!(terms.len(), 10);
        assert!(terms.contains(&StatKind::Edges));
        assert!(!terms.contains(&StatKind::Nodefactor { attr: "age".into(), group: 0 }));
        let full = standard_terms("age", 3, "race", 2, false);
        assert_eq!(full.len(), 12);
    }

    #[test]
    fn statistics_of_worked_example() {
        let g = shapes_graph();
        let spec = ErgmSpec::new(vec![
            StatKind::Edges,
            StatKind::TotalNodematch { attr: "shape".into() },
        ])
        .unwrap();
        assert_eq!(ergm_statistics(&g, &spec).unwrap(), vec![8.0, 4.0]);

        let empty = g.with_edges(vec![]).unwrap();
        assert_eq!(ergm_statistics(&empty, &spec).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn change_statistics_simple_cases() {
        // Two isolated same-group nodes: adding the edge adds one edge and
        // one matched edge.
        let pop = two_group_population(4);
        let spec = ErgmSpec::new(vec![
            StatKind::Edges,
            StatKind::NodematchPerGroup { attr: "grp".into(), group: 0 },
        ])
        .unwrap();
        let c = ergm_change_statistics(&pop, &spec, 0, 2).unwrap();
        assert_eq!(c, vec![1.0, 1.0]);

        // Degree-threshold term: u has degree 1, v degree 3; toggling on a
        // fresh dyad pushes u over the threshold, v is already above it.
        let schema = AttributeSchema::new("grp", vec!["x".into()]);
        let g = AttributedGraph::new(
            6,
            vec![schema],
            vec![vec![0; 6]],
            vec![(0, 2), (1, 3), (1, 4), (1, 5)],
        )
        .unwrap();
        let spec = ErgmSpec::new(vec![StatKind::Edges, StatKind::MinDegreeCount { d: 2 }]).unwrap();
        let c = ergm_change_statistics(&g, &spec, 0, 1).unwrap();
        assert_eq!(c, vec![1.0, 1.0]);

        assert!(ergm_change_statistics(&g, &spec, 3, 3).is_err());
    }

    /// Toggle the dyad in a copied graph and recompute from scratch.
    fn brute_force_change(
        g: &AttributedGraph,
        spec: &ErgmSpec,
        u: u32,
        v: u32,
    ) -> Vec<f64> {
        let mut with_edge: Vec<(u32, u32)> = g.edges().to_vec();
        let key = (u.min(v), u.max(v));
        if !with_edge.contains(&key) {
            with_edge.push(key);
        }
        let without: Vec<(u32, u32)> = with_edge.iter().copied().filter(|&e| e != key).collect();
        let on = ergm_statistics(&g.with_edges(with_edge).unwrap(), spec).unwrap();
        let off = ergm_statistics(&g.with_edges(without).unwrap(), spec).unwrap();
        on.iter().zip(&off).map(|(a, b)| a - b).collect()
    }

    #[test]
    fn change_statistics_match_brute_force_exhaustively() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..20 {
            let g = random_graph(&mut rng, 6, 0.4, &[2, 3]);
            let spec = ErgmSpec::new(vec![
                StatKind::Edges,
                StatKind::MinDegreeCount { d: 2 },
                StatKind::MinDegreeCount { d: 4 },
                StatKind::mixing_entry("attr0", 0, 1),
                StatKind::NodematchPerGroup { attr: "attr0".into(), group: 1 },
                StatKind::TotalNodematch { attr: "attr1".into() },
                StatKind::Nodefactor { attr: "attr1".into(), group: 2 },
            ])
            .unwrap();
            for u in 0..6u32 {
                for v in (u + 1)..6u32 {
                    let fast = ergm_change_statistics(&g, &spec, u, v).unwrap();
                    let brute = brute_force_change(&g, &spec, u, v);
                    assert_eq!(fast, brute, "dyad ({u},{v})");
                }
            }
        }
    }

    #[test]
    fn chain_incremental_stats_match_full_recomputation() {
        // The table fast path must agree with evaluating the statistics on
        // the materialized graph.
        let mut rng = ChaCha8Rng::seed_from_u64(55);
        let pop = random_graph(&mut rng, 40, 0.0, &[3, 2]);
        let spec = ErgmSpec::new(vec![
            StatKind::Edges,
            StatKind::MinDegreeCount { d: 2 },
            StatKind::MinDegreeCount { d: 4 },
            StatKind::mixing_entry("attr0", 0, 2),
            StatKind::NodematchPerGroup { attr: "attr0".into(), group: 1 },
            StatKind::TotalNodematch { attr: "attr1".into() },
            StatKind::Nodefactor { attr: "attr1".into(), group: 0 },
        ])
        .unwrap();
        let params = ErgmParams::new(vec![-1.5, 0.4, -0.2, 0.3, 0.2, 0.5, -0.1]);
        let mut chain = ErgmChain::new(&spec, &params, &pop).unwrap();
        for _ in 0..5 {
            chain.advance(3_000, &mut rng);
            let g = chain.to_graph();
            assert_eq!(chain.stats(), ergm_statistics(&g, &spec).unwrap().as_slice());
            assert_eq!(chain.edge_count(), g.edge_count() as u64);
        }
    }

    #[test]
    fn zero_theta_gives_half_density() {
        let pop = two_group_population(20);
        let spec = ErgmSpec::new(vec![StatKind::Edges]).unwrap();
        let params = ErgmParams::new(vec![0.0]);
        let mut chain = ErgmChain::new(&spec, &params, &pop).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        chain.advance(20_000, &mut rng);
        let mut sum = 0.0;
        let samples = 2_000;
        for _ in 0..samples {
            chain.advance(190, &mut rng); // one sweep of C(20,2) dyads
            sum += chain.stats()[0];
        }
        let density = sum / samples as f64 / 190.0;
        assert!((density - 0.5).abs() < 0.02, "density {density}");
    }

    #[test]
    fn capped_negative_edges_theta_empties_graph() {
        let pop = two_group_population(30);
        let spec = ErgmSpec::new(vec![StatKind::Edges]).unwrap();
        let params = ErgmParams::new(vec![-20.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let g = sample_ergm(&params, &spec, &pop, &McmcConfig::scaled(30), &mut rng).unwrap();
        assert_eq!(g.edge_count(), 0);
    }

    /// Exact Boltzmann distribution over all graphs on 4 nodes for a
    /// two-term model, compared against the chain's empirical distribution.
    #[test]
    fn sampler_matches_exact_distribution_on_four_nodes() {
        let pop = two_group_population(4);
        let spec = ErgmSpec::new(vec![
            StatKind::Edges,
            StatKind::TotalNodematch { attr: "grp".into() },
        ])
        .unwrap();
        let theta = [0.5, 0.8];

        // Enumerate all 2^6 graphs; dyad order (0,1),(0,2),(0,3),(1,2),(1,3),(2,3).
        let dyads = [(0u32, 1u32), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];
        let mut weights = [0.0f64; 64];
        for mask in 0..64usize {
            let edges: Vec<(u32, u32)> = dyads
                .iter()
                .enumerate()
                .filter(|(b, _)| mask >> b & 1 == 1)
                .map(|(_, &e)| e)
                .collect();
            let g = pop.with_edges(edges).unwrap();
            let f = ergm_statistics(&g, &spec).unwrap();
            weights[mask] = (theta[0] * f[0] + theta[1] * f[1]).exp();
        }
        let z: f64 = weights.iter().sum();

        let params = ErgmParams::new(theta.to_vec());
        let mut chain = ErgmChain::new(&spec, &params, &pop).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        chain.advance(600, &mut rng);
        let samples = 200_000usize;
        let mut counts = [0u64; 64];
        for _ in 0..samples {
            chain.advance(6, &mut rng);
            let mut mask = 0usize;
            for (b, &(u, v)) in dyads.iter().enumerate() {
                if chain.has_edge(chain.dyad_index(u as usize, v as usize)) {
                    mask |= 1 << b;
                }
            }
            counts[mask] += 1;
        }
        let tv: f64 = (0..64)
            .map(|m| (counts[m] as f64 / samples as f64 - weights[m] / z).abs())
            .sum::<f64>()
            / 2.0;
        assert!(tv < 0.03, "total variation {tv}");
    }

    #[test]
    fn fit_recovers_bernoulli_logit() {
        let pop = two_group_population(100);
        let spec = ErgmSpec::new(vec![StatKind::Edges]).unwrap();
        let pairs = 100.0 * 99.0 / 2.0;
        let target = 0.1 * pairs;
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let (params, diag) = fit_ergm(
            &[target],
            &spec,
            &pop,
            &FitConfig::default(),
            &McmcConfig::scaled(100),
            &mut rng,
        )
        .unwrap();
        assert!(diag.converged, "diagnostics: {diag:?}");
        let expected = (0.1f64 / 0.9).ln();
        assert!(
            (params.theta[0] - expected).abs() < 0.05,
            "theta {} vs logit(0.1) {expected}",
            params.theta[0]
        );
    }

    #[test]
    fn fit_zero_edges_target_hits_negative_cap() {
        let pop = two_group_population(30);
        let spec = ErgmSpec::new(vec![StatKind::Edges]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (params, diag) = fit_ergm(
            &[0.0],
            &spec,
            &pop,
            &FitConfig::default(),
            &McmcConfig::scaled(30),
            &mut rng,
        )
        .unwrap();
        assert!(diag.converged);
        assert_eq!(params.theta[0], -20.0);
        let g = sample_ergm(&params, &spec, &pop, &McmcConfig::scaled(30), &mut rng).unwrap();
        assert_eq!(g.edge_count(), 0);
    }

    #[test]
    fn fit_flags_clamps_and_infeasible_targets() {
        let pop = two_group_population(10);
        let spec = ErgmSpec::new(vec![
            StatKind::Edges,
            StatKind::TotalNodematch { attr: "grp".into() },
        ])
        .unwrap();
        // Edges target 0 with positive homophily target, plus a homophily
        // value beyond its combinatorial maximum (C(5,2)*2 = 20).
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (_, diag) = fit_ergm(
            &[0.0, 120.0],
            &spec,
            &pop,
            &FitConfig { max_rounds: 1, update_steps: 10, ..FitConfig::default() },
            &McmcConfig::scaled(10),
            &mut rng,
        )
        .unwrap();
        assert!(diag.infeasible);
        assert_eq!(diag.clamped.len(), 1);
        assert_eq!(diag.clamped[0].term_index, 1);
        assert_eq!(diag.clamped[0].clamped, 20.0);
        assert!(!diag.warnings.is_empty());
    }

    #[test]
    fn fit_round_trip_small() {
        // Sample a graph at known theta, fit to its exact statistics, and
        // check the refit reproduces the targets within tolerance.
        let pop = two_group_population(60);
        let spec = ErgmSpec::new(vec![
            StatKind::Edges,
            StatKind::TotalNodematch { attr: "grp".into() },
        ])
        .unwrap();
        let truth = ErgmParams::new(vec![-3.0, 1.0]);
        let mcmc = McmcConfig::scaled(60);
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let observed = sample_ergm(&truth, &spec, &pop, &mcmc, &mut rng).unwrap();
        let targets = ergm_statistics(&observed, &spec).unwrap();

        let (params, diag) =
            fit_ergm(&targets, &spec, &pop, &FitConfig::default(), &mcmc, &mut rng).unwrap();
        assert!(diag.converged, "diagnostics: {diag:?}");

        // Independent evaluation run at the fitted coefficients, at the
        // same budget the fit's convergence check uses.
        let mut chain = ErgmChain::new(&spec, &params, &pop).unwrap();
        chain.advance(mcmc.burn_in, &mut rng);
        let eval = collect_samples(&mut chain, mcmc.thinning, FitConfig::default().eval_samples, &mut rng);
        for i in 0..2 {
            let resid = (eval.mean[i] - targets[i]).abs();
            assert!(
                resid <= 3.0 * eval.se[i].max(0.5),
                "term {i}: mean {} vs target {} (se {})",
                eval.mean[i],
                targets[i],
                eval.se[i]
            );
        }
    }
}
