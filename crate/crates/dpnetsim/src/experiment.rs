//! Factorial experiment over privacy budgets and truncation degrees.
//!
//! One plan covers one model family and one transmission setting. The run
//! walks three conditions: simulations on the observed (ground-truth)
//! network, a model fitted on exact statistics (no DP), and a grid of
//! `(epsilon, delta)` cells with several private releases each. Every
//! random draw comes from a stream derived from the master seed and the
//! task's position in the tree, so output bytes do not depend on worker
//! count or scheduling.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dp::{release_statistics, Epsilon, ReleaseSpec};
use crate::ergm::{
    fit_ergm, sample_ergm, ErgmParams, ErgmSpec, FitConfig, FitDiagnostics, McmcConfig,
};
use crate::error::{Error, Result};
use crate::graph::{AttributeSchema, AttributedGraph};
use crate::results::{Condition, ResultRow};
use crate::sbm::{fit_sbm, mixing_matrix_from_stats, mixing_release_kinds, sample_sbm, SbmParams};
use crate::seed::{derive_seed, path_label};
use crate::sim::{
    incidence_rate_ratio, prevalence_ratio, run_sis, summarize, EpidemicSummary, Scenario,
    SimConfig,
};
use crate::stats::{degree_histogram, quality_metrics, StatKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelFamily {
    Sbm,
    Ergm,
}

impl ModelFamily {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelFamily::Sbm => "sbm",
            ModelFamily::Ergm => "ergm",
        }
    }
}

/// One node attribute of the synthetic population: category labels and the
/// fraction of nodes per category.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeSpec {
    pub name: String,
    pub categories: Vec<String>,
    pub proportions: Vec<f64>,
}

/// Ground-truth model for the observed network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum GeneratorModel {
    Sbm { attr: String, edge_prob: Vec<Vec<f64>> },
    Ergm { terms: Vec<StatKind>, theta: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub node_count: usize,
    pub attributes: Vec<AttributeSpec>,
    pub model: GeneratorModel,
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.node_count == 0 {
            return Err(Error::InvalidPlan("generator node_count must be positive".into()));
        }
        if self.attributes.is_empty() {
            return Err(Error::InvalidPlan("at least one attribute is required".into()));
        }
        for attr in &self.attributes {
            if attr.categories.is_empty() || attr.categories.len() != attr.proportions.len() {
                return Err(Error::InvalidPlan(format!(
                    "attribute `{}`: categories and proportions must align",
                    attr.name
                )));
            }
            let total: f64 = attr.proportions.iter().sum();
            if attr.proportions.iter().any(|&p| p < 0.0) || (total - 1.0).abs() > 1e-6 {
                return Err(Error::InvalidPlan(format!(
                    "attribute `{}`: proportions must be nonnegative and sum to 1",
                    attr.name
                )));
            }
        }
        Ok(())
    }
}

/// Largest-remainder rounding of proportions to counts summing to `n`.
fn proportions_to_counts(proportions: &[f64], n: usize) -> Vec<usize> {
    let mut counts: Vec<usize> = proportions.iter().map(|p| (p * n as f64).floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut remainders: Vec<(usize, f64)> = proportions
        .iter()
        .enumerate()
        .map(|(i, p)| (i, p * n as f64 - (p * n as f64).floor()))
        .collect();
    remainders.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    for k in 0..(n - assigned) {
        counts[remainders[k % remainders.len()].0] += 1;
    }
    counts
}

/// Samples the synthetic ground-truth network: node attributes are
/// assigned by proportion (largest remainder, then shuffled), and the edge
/// set is drawn from the configured model.
pub fn generate_observed_network(
    config: &GeneratorConfig,
    rng: &mut impl Rng,
) -> Result<AttributedGraph> {
    config.validate()?;
    let n = config.node_count;
    let mut schemas = Vec::new();
    let mut labels = Vec::new();
    for attr in &config.attributes {
        schemas.push(AttributeSchema::new(&attr.name, attr.categories.clone()));
        let counts = proportions_to_counts(&attr.proportions, n);
        let mut lab: Vec<u16> = Vec::with_capacity(n);
        for (c, &count) in counts.iter().enumerate() {
            lab.extend(std::iter::repeat_n(c as u16, count));
        }
        use rand::seq::SliceRandom;
        lab.shuffle(rng);
        labels.push(lab);
    }
    let population = AttributedGraph::new(n, schemas, labels, vec![])?;
    match &config.model {
        GeneratorModel::Sbm { attr, edge_prob } => {
            let params = SbmParams { attr: attr.clone(), edge_prob: edge_prob.clone() };
            sample_sbm(&params, &population, rng)
        }
        GeneratorModel::Ergm { terms, theta } => {
            let spec = ErgmSpec::new(terms.clone())?;
            let params = ErgmParams::new(theta.clone());
            sample_ergm(&params, &spec, &population, &McmcConfig::scaled(n), rng)
        }
    }
}

/// One transmission setting; a plan usually carries a high and a low one
/// in [`ExperimentPlan::settings`] and selects via `active_setting`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SettingConfig {
    pub p_inf: f64,
    pub p_recov: f64,
    pub initial_prevalence: f64,
    pub burn_in: usize,
    pub analytic_window: usize,
    pub test_rate: f64,
    pub test_duration: u32,
    pub p_recov_treated: f64,
}

impl SettingConfig {
    pub fn sim_config(&self, scenario: Scenario) -> SimConfig {
        SimConfig {
            p_inf: self.p_inf,
            p_recov: self.p_recov,
            initial_prevalence: self.initial_prevalence,
            burn_in: self.burn_in,
            analytic_window: self.analytic_window,
            scenario,
        }
    }

    pub fn intervention_scenario(&self) -> Scenario {
        Scenario::TestAndTreat {
            test_rate: self.test_rate,
            test_duration: self.test_duration,
            p_recov_treated: self.p_recov_treated,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentPlan {
    pub model_family: ModelFamily,
    pub epsilons: Vec<Epsilon>,
    pub delta_caps: Vec<u32>,
    pub releases_per_cell: usize,
    pub networks_per_release: usize,
    pub sims_per_scenario: usize,
    /// Named transmission settings; `active_setting` picks the one this
    /// run uses (the results schema carries no setting column).
    pub settings: BTreeMap<String, SettingConfig>,
    pub active_setting: String,
    pub master_seed: u64,
    pub generator: GeneratorConfig,
    /// Attribute whose mixing matrix parameterizes the SBM.
    pub mixing_attr: String,
    /// Term list fitted by the ERGM family.
    pub ergm_terms: Vec<StatKind>,
    /// Degree histogram rows are emitted for degrees `0..max`, plus one
    /// final bucket counting everything at or above `max`, so row counts
    /// are a closed-form function of the plan.
    pub degree_hist_max: u32,
    #[serde(default)]
    pub fit: Option<FitConfig>,
    #[serde(default)]
    pub mcmc: Option<McmcConfig>,
}

impl ExperimentPlan {
    pub fn validate(&self) -> Result<()> {
        if self.epsilons.is_empty() || self.delta_caps.is_empty() {
            return Err(Error::InvalidPlan("epsilon and delta lists must be non-empty".into()));
        }
        if self.releases_per_cell < 1 || self.networks_per_release < 1 || self.sims_per_scenario < 1
        {
            return Err(Error::InvalidPlan("R, N and M must all be at least 1".into()));
        }
        for e in &self.epsilons {
            if let Epsilon::Finite(x) = e {
                let valid = x.is_finite() && *x > 0.0;
                if !valid {
                    return Err(Error::InvalidPlan(format!("epsilon {x} must be positive")));
                }
            }
        }
        if self.delta_caps.iter().any(|&d| d < 1) {
            return Err(Error::InvalidPlan("delta caps must be >= 1".into()));
        }
        self.generator.validate()?;
        if !self.settings.contains_key(&self.active_setting) {
            return Err(Error::InvalidPlan(format!(
                "active_setting `{}` is not defined",
                self.active_setting
            )));
        }
        if !self.generator.attributes.iter().any(|a| a.name == self.mixing_attr) {
            return Err(Error::InvalidPlan(format!(
                "mixing_attr `{}` is not a generator attribute",
                self.mixing_attr
            )));
        }
        ErgmSpec::new(self.ergm_terms.clone())?;
        for setting in self.settings.values() {
            setting.sim_config(Scenario::Baseline).validate()?;
            setting.sim_config(setting.intervention_scenario()).validate()?;
        }
        Ok(())
    }

    pub fn active(&self) -> &SettingConfig {
        &self.settings[&self.active_setting]
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    /// Exact number of rows [`run_experiment`] emits for this plan.
    pub fn expected_row_count(&self) -> usize {
        let groups = 1 + self
            .generator
            .attributes
            .iter()
            .map(|a| a.categories.len())
            .sum::<usize>();
        // Two scenarios x two mean metrics, plus two ratio metrics.
        let per_pair = 6 * groups;
        let per_network =
            (2 + self.generator.attributes.len()) + (self.degree_hist_max as usize + 1);
        let (r, n, m) = (self.releases_per_cell, self.networks_per_release, self.sims_per_scenario);
        let per_release = n * per_network + n * m * per_pair;
        let cells = self.epsilons.len() * self.delta_caps.len();
        m * per_pair + per_release + cells * r * per_release
    }

    fn fit_config(&self) -> FitConfig {
        self.fit.clone().unwrap_or_default()
    }

    fn mcmc_config(&self) -> McmcConfig {
        self.mcmc
            .clone()
            .unwrap_or_else(|| McmcConfig::scaled(self.generator.node_count))
    }

    /// Statistics released (and fitted) for the plan's model family.
    pub fn release_kinds(&self) -> Result<Vec<StatKind>> {
        match self.model_family {
            ModelFamily::Sbm => {
                let attr = self
                    .generator
                    .attributes
                    .iter()
                    .find(|a| a.name == self.mixing_attr)
                    .ok_or_else(|| Error::UnknownAttribute(self.mixing_attr.clone()))?;
                Ok(mixing_release_kinds(&self.mixing_attr, attr.categories.len()))
            }
            ModelFamily::Ergm => Ok(self.ergm_terms.clone()),
        }
    }
}

/// A model fitted to (noisy or exact) statistics, as serialized by the
/// `fit` command and consumed by `sample`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum FittedModel {
    Sbm {
        params: SbmParams,
    },
    Ergm {
        terms: Vec<StatKind>,
        params: ErgmParams,
        diagnostics: FitDiagnostics,
    },
}

impl FittedModel {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn converged(&self) -> bool {
        match self {
            FittedModel::Sbm { .. } => true,
            FittedModel::Ergm { diagnostics, .. } => diagnostics.converged,
        }
    }

    /// Samples one synthetic network over `population`'s nodes.
    pub fn sample(
        &self,
        population: &AttributedGraph,
        mcmc: &McmcConfig,
        rng: &mut impl Rng,
    ) -> Result<AttributedGraph> {
        match self {
            FittedModel::Sbm { params } => sample_sbm(params, population, rng),
            FittedModel::Ergm { terms, params, .. } => {
                let spec = ErgmSpec::new(terms.clone())?;
                sample_ergm(params, &spec, population, mcmc, rng)
            }
        }
    }
}

/// Fits the plan's model family to a target vector aligned with
/// [`ExperimentPlan::release_kinds`].
pub fn fit_model(
    plan: &ExperimentPlan,
    observed: &AttributedGraph,
    kinds: &[StatKind],
    targets: &[f64],
    rng: &mut impl Rng,
) -> Result<FittedModel> {
    match plan.model_family {
        ModelFamily::Sbm => {
            let sizes = observed.group_sizes(&plan.mixing_attr)?;
            let matrix = mixing_matrix_from_stats(kinds, targets, &plan.mixing_attr, sizes.len())?;
            Ok(FittedModel::Sbm { params: fit_sbm(&matrix, &plan.mixing_attr, &sizes)? })
        }
        ModelFamily::Ergm => {
            let spec = ErgmSpec::new(plan.ergm_terms.clone())?;
            let (params, diagnostics) = fit_ergm(
                targets,
                &spec,
                observed,
                &plan.fit_config(),
                &plan.mcmc_config(),
                rng,
            )?;
            Ok(FittedModel::Ergm { terms: plan.ergm_terms.clone(), params, diagnostics })
        }
    }
}

fn rng_at(master: u64, path: &[String]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, path))
}

struct RowCtx<'a> {
    plan: &'a ExperimentPlan,
    observed: &'a AttributedGraph,
    condition: Condition,
    epsilon: Option<Epsilon>,
    delta: Option<u32>,
    release: Option<usize>,
    base_flags: String,
    seed_prefix: Vec<String>,
}

impl RowCtx<'_> {
    #[allow(clippy::too_many_arguments)]
    fn row(
        &self,
        network: Option<usize>,
        sim: Option<usize>,
        scenario: &str,
        metric: &str,
        group: &str,
        value: Option<f64>,
        extra_flag: Option<&str>,
    ) -> ResultRow {
        let mut flags = self.base_flags.clone();
        if let Some(f) = extra_flag {
            if !flags.is_empty() {
                flags.push(';');
            }
            flags.push_str(f);
        }
        ResultRow {
            model: self.plan.model_family.as_str().to_string(),
            condition: self.condition,
            epsilon: self.epsilon,
            delta: self.delta,
            release: self.release,
            network,
            sim,
            scenario: scenario.to_string(),
            metric: metric.to_string(),
            group: group.to_string(),
            value,
            flags,
        }
    }

    fn seed_path(&self, suffix: &[String]) -> Vec<String> {
        let mut path = self.seed_prefix.clone();
        path.extend_from_slice(suffix);
        path
    }
}

/// Group labels in emission order: ALL, then `attr=category` for every
/// attribute and category.
fn group_labels(g: &AttributedGraph) -> Vec<String> {
    let mut labels = vec!["ALL".to_string()];
    for schema in g.schemas() {
        for cat in &schema.categories {
            labels.push(format!("{}={cat}", schema.name));
        }
    }
    labels
}

fn summary_values(summary: &EpidemicSummary, pick: fn(&crate::sim::SummaryStats) -> f64) -> Vec<f64> {
    let mut out = vec![pick(&summary.population)];
    for (_, groups) in &summary.per_group {
        out.extend(groups.iter().map(pick));
    }
    out
}

fn ratio_values(ratio: &crate::sim::RatioSummary) -> Vec<Option<f64>> {
    let mut out = vec![ratio.population];
    for (_, groups) in &ratio.per_group {
        out.extend(groups.iter().copied());
    }
    out
}

/// Runs the paired baseline/intervention simulations for one simulation
/// index and emits all per-simulation metric rows.
fn paired_sim_rows(
    ctx: &RowCtx,
    graph: &AttributedGraph,
    network: Option<usize>,
    sim_idx: usize,
    rows: &mut Vec<ResultRow>,
) -> Result<()> {
    let setting = ctx.plan.active();
    let baseline_cfg = setting.sim_config(Scenario::Baseline);
    let intervention_cfg = setting.sim_config(setting.intervention_scenario());

    let mut sim_suffix = Vec::new();
    if let Some(j) = network {
        sim_suffix.push(format!("network={j}"));
    }
    sim_suffix.push(format!("sim={sim_idx}"));

    let mut base_path = ctx.seed_path(&sim_suffix);
    base_path.push("baseline".into());
    let mut int_path = ctx.seed_path(&sim_suffix);
    int_path.push("intervention".into());

    let baseline = summarize(
        &run_sis(graph, &baseline_cfg, &mut rng_at(ctx.plan.master_seed, &base_path))?,
        &baseline_cfg,
    )?;
    let intervention = summarize(
        &run_sis(graph, &intervention_cfg, &mut rng_at(ctx.plan.master_seed, &int_path))?,
        &intervention_cfg,
    )?;

    let groups = group_labels(graph);
    for (scenario, summary) in [("baseline", &baseline), ("intervention", &intervention)] {
        let prev = summary_values(summary, |s| s.prevalence_mean);
        let inc = summary_values(summary, |s| s.incidence_rate_mean);
        for (g, label) in groups.iter().enumerate() {
            rows.push(ctx.row(
                network,
                Some(sim_idx),
                scenario,
                "prevalence_mean",
                label,
                Some(prev[g]),
                None,
            ));
            rows.push(ctx.row(
                network,
                Some(sim_idx),
                scenario,
                "incidence_rate_mean",
                label,
                Some(inc[g]),
                None,
            ));
        }
    }

    let pr = prevalence_ratio(&intervention, &baseline)?;
    let irr = incidence_rate_ratio(&intervention, &baseline)?;
    for (metric, ratio) in [("prevalence_ratio", &pr), ("incidence_rate_ratio", &irr)] {
        for (g, label) in groups.iter().enumerate() {
            let v = ratio_values(ratio)[g];
            let flag = if v.is_none() { Some("extinct") } else { None };
            rows.push(ctx.row(network, Some(sim_idx), "ratio", metric, label, v, flag));
        }
    }
    Ok(())
}

/// Quality metrics and the fixed-width degree histogram for one synthetic
/// network.
fn network_rows(
    ctx: &RowCtx,
    synthetic: &AttributedGraph,
    network: usize,
    rows: &mut Vec<ResultRow>,
) -> Result<()> {
    let attrs: Vec<&str> = ctx.observed.schemas().iter().map(|s| s.name.as_str()).collect();
    for metric in quality_metrics(synthetic, ctx.observed, &attrs)? {
        let flag = if metric.value.is_none() { Some("undefined_baseline") } else { None };
        rows.push(ctx.row(
            Some(network),
            None,
            "",
            &format!("quality_{}_pct", metric.name),
            "ALL",
            metric.value,
            flag,
        ));
    }
    let hist = degree_histogram(synthetic);
    let n = synthetic.node_count() as f64;
    let max = ctx.plan.degree_hist_max as usize;
    for d in 0..=max {
        let count: u64 = if d < max {
            hist.get(d).copied().unwrap_or(0)
        } else {
            hist.iter().skip(max).sum()
        };
        let label = if d < max { d.to_string() } else { format!("{max}+") };
        rows.push(ctx.row(
            Some(network),
            None,
            "",
            "degree_proportion",
            &label,
            Some(count as f64 / n),
            None,
        ));
    }
    Ok(())
}

/// Samples the N networks for one fitted model and runs all paired
/// simulations on each.
fn model_subtree_rows(ctx: &RowCtx, model: &FittedModel) -> Result<Vec<ResultRow>> {
    let mut rows = Vec::new();
    let mcmc = ctx.plan.mcmc_config();
    for j in 0..ctx.plan.networks_per_release {
        let net_path = ctx.seed_path(&[format!("network={j}"), "sample".into()]);
        let synthetic =
            model.sample(ctx.observed, &mcmc, &mut rng_at(ctx.plan.master_seed, &net_path))?;
        network_rows(ctx, &synthetic, j, &mut rows)?;
        for k in 0..ctx.plan.sims_per_scenario {
            paired_sim_rows(ctx, &synthetic, Some(j), k, &mut rows)?;
        }
    }
    Ok(rows)
}

enum Task {
    Observed,
    NoDp,
    Dp { epsilon: Epsilon, delta: u32, release: usize },
}

fn run_task(
    plan: &ExperimentPlan,
    observed: &AttributedGraph,
    kinds: &[StatKind],
    task: &Task,
) -> Result<Vec<ResultRow>> {
    let family = plan.model_family.as_str().to_string();
    match task {
        Task::Observed => {
            let ctx = RowCtx {
                plan,
                observed,
                condition: Condition::Observed,
                epsilon: None,
                delta: None,
                release: None,
                base_flags: String::new(),
                seed_prefix: vec![family, "observed".into()],
            };
            let mut rows = Vec::new();
            for k in 0..plan.sims_per_scenario {
                paired_sim_rows(&ctx, observed, None, k, &mut rows)?;
            }
            Ok(rows)
        }
        Task::NoDp => {
            // Exact statistics of the observed network: no truncation, no noise.
            let targets: Vec<f64> = kinds
                .iter()
                .map(|k| Ok(k.evaluate(observed)? as f64))
                .collect::<Result<_>>()?;
            let fit_path = vec![family.clone(), "no_dp".into(), "fit".into()];
            let model =
                fit_model(plan, observed, kinds, &targets, &mut rng_at(plan.master_seed, &fit_path))?;
            let ctx = RowCtx {
                plan,
                observed,
                condition: Condition::NoDp,
                epsilon: None,
                delta: None,
                release: None,
                base_flags: if model.converged() { String::new() } else { "nonconverged".into() },
                seed_prefix: vec![family, "no_dp".into()],
            };
            model_subtree_rows(&ctx, &model)
        }
        Task::Dp { epsilon, delta, release } => {
            let prefix = vec![
                family,
                "dp".into(),
                format!("eps={epsilon}"),
                format!("delta={delta}"),
                format!("release={release}"),
            ];
            let mut release_path = prefix.clone();
            release_path.push("release_noise".into());
            let spec = ReleaseSpec::new(kinds.to_vec(), *epsilon, *delta);
            let released = release_statistics(
                observed,
                &spec,
                &mut rng_at(plan.master_seed, &release_path),
            )?
            .with_seed_path(path_label(&release_path));

            let mut fit_path = prefix.clone();
            fit_path.push("fit".into());
            let model = fit_model(
                plan,
                observed,
                kinds,
                &released.values,
                &mut rng_at(plan.master_seed, &fit_path),
            )?;
            let ctx = RowCtx {
                plan,
                observed,
                condition: Condition::Dp,
                epsilon: Some(*epsilon),
                delta: Some(*delta),
                release: Some(*release),
                base_flags: if model.converged() { String::new() } else { "nonconverged".into() },
                seed_prefix: prefix,
            };
            model_subtree_rows(&ctx, &model)
        }
    }
}

/// Runs the full sweep on the global thread pool.
pub fn run_experiment(plan: &ExperimentPlan) -> Result<Vec<ResultRow>> {
    run_experiment_with_jobs(plan, None)
}

/// Runs the full sweep on a dedicated pool of `jobs` workers (when given).
/// Output is identical regardless of `jobs`: every task draws only from
/// seed-derived streams, and rows are sorted before returning.
pub fn run_experiment_with_jobs(
    plan: &ExperimentPlan,
    jobs: Option<usize>,
) -> Result<Vec<ResultRow>> {
    plan.validate()?;
    let observed = generate_observed_network(
        &plan.generator,
        &mut rng_at(plan.master_seed, &["observed_network".to_string()]),
    )?;
    let kinds = plan.release_kinds()?;

    let mut tasks = vec![Task::Observed, Task::NoDp];
    for epsilon in &plan.epsilons {
        for delta in &plan.delta_caps {
            for release in 0..plan.releases_per_cell {
                tasks.push(Task::Dp { epsilon: *epsilon, delta: *delta, release });
            }
        }
    }

    let run_all = || -> Result<Vec<Vec<ResultRow>>> {
        tasks
            .par_iter()
            .map(|t| run_task(plan, &observed, &kinds, t))
            .collect()
    };
    let nested = match jobs {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::InvalidPlan(format!("cannot build worker pool: {e}")))?
            .install(run_all),
        None => run_all(),
    }?;

    let mut rows: Vec<ResultRow> = nested.into_iter().flatten().collect();
    rows.sort_by(|a, b| a.compare_key(b));
    debug_assert_eq!(rows.len(), plan.expected_row_count());
    Ok(rows)
}

/// Pulls the balanced value array for one metric cell out of the results,
/// ordered by (release, network, sim), ready for the nested variance
/// decomposition. Returns the inferred (R, N, M) alongside.
pub fn collect_balanced_values(
    rows: &[ResultRow],
) -> Result<(Vec<f64>, usize, usize, usize)> {
    let mut keyed: Vec<(usize, usize, usize, f64)> = Vec::new();
    for r in rows {
        let (Some(i), Some(j), Some(k)) = (r.release, r.network, r.sim) else {
            return Err(Error::InvalidPlan(
                "variance decomposition needs fully indexed (release, network, sim) rows".into(),
            ));
        };
        let Some(v) = r.value else {
            return Err(Error::InvalidPlan(format!(
                "missing value in cell at release={i} network={j} sim={k}"
            )));
        };
        keyed.push((i, j, k, v));
    }
    if keyed.is_empty() {
        return Err(Error::InvalidPlan("no rows matched the requested cell".into()));
    }
    keyed.sort_by_key(|x| (x.0, x.1, x.2));
    let r = keyed.iter().map(|x| x.0).max().unwrap() + 1;
    let n = keyed.iter().map(|x| x.1).max().unwrap() + 1;
    let m = keyed.iter().map(|x| x.2).max().unwrap() + 1;
    if keyed.len() != r * n * m {
        return Err(Error::UnbalancedDesign { expected: r * n * m, actual: keyed.len() });
    }
    Ok((keyed.into_iter().map(|x| x.3).collect(), r, n, m))
}

/// Desk-scale default plan: a 1,000-node ground-truth ERGM with age and
/// race attributes, the full budget/truncation grid, five releases per
/// cell, ten networks per release and ten paired simulations per network.
pub fn desk_plan(model_family: ModelFamily, setting: &str) -> ExperimentPlan {
    let mut settings = BTreeMap::new();
    settings.insert(
        "high".to_string(),
        SettingConfig {
            p_inf: 0.75,
            p_recov: 0.1,
            initial_prevalence: 0.2,
            burn_in: 500,
            analytic_window: 100,
            test_rate: 0.1,
            test_duration: 2,
            p_recov_treated: 0.5,
        },
    );
    settings.insert(
        "low".to_string(),
        SettingConfig {
            p_inf: 0.05,
            p_recov: 0.1,
            initial_prevalence: 0.2,
            burn_in: 500,
            analytic_window: 100,
            test_rate: 0.1,
            test_duration: 2,
            p_recov_treated: 0.5,
        },
    );
    ExperimentPlan {
        model_family,
        epsilons: vec![
            Epsilon::Finite(0.5),
            Epsilon::Finite(1.0),
            Epsilon::Finite(5.0),
            Epsilon::Finite(10.0),
            Epsilon::Infinite,
        ],
        delta_caps: vec![2, 3, 4, 5],
        releases_per_cell: 5,
        networks_per_release: 10,
        sims_per_scenario: 10,
        settings,
        active_setting: setting.to_string(),
        master_seed: 7,
        generator: desk_generator(1000),
        mixing_attr: "age".to_string(),
        ergm_terms: crate::ergm::standard_terms("age", 3, "race", 2, true),
        degree_hist_max: 8,
        fit: None,
        mcmc: None,
    }
}

/// Ground-truth generator used by the desk plan: an ERGM over age and race
/// with strong homophily and a concurrency penalty, calibrated to a mean
/// degree near 1.5 with very few degree-4+ nodes.
pub fn desk_generator(node_count: usize) -> GeneratorConfig {
    GeneratorConfig {
        node_count,
        attributes: vec![
            AttributeSpec {
                name: "age".into(),
                categories: vec!["18-24".into(), "25-34".into(), "35+".into()],
                proportions: vec![0.4, 0.35, 0.25],
            },
            AttributeSpec {
                name: "race".into(),
                categories: vec!["A".into(), "B".into()],
                proportions: vec![0.6, 0.4],
            },
        ],
        model: GeneratorModel::Ergm {
            terms: crate::ergm::standard_terms("age", 3, "race", 2, true),
            theta: desk_theta(),
        },
    }
}

/// Coefficients of the desk ground truth (see `desk_generator`).
pub fn desk_theta() -> Vec<f64> {
    vec![
        -7.4, // edges
        -1.0, // degree >= 2 (limits concurrency)
        -3.0, // degree >= 4 (suppresses high-degree nodes)
        1.2,  // age homophily, group 0
        1.2,  // age homophily, group 1
        1.2,  // age homophily, group 2
        0.9,  // race homophily (total nodematch)
        0.2,  // age nodefactor, group 1
        0.2,  // age nodefactor, group 2
        0.1,  // race nodefactor, group 1
    ]
}
