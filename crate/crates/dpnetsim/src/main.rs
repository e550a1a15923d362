//! File-in/file-out command line for the pipeline: generate a synthetic
//! ground truth, inspect statistics, release them under node-DP, fit and
//! sample network models, simulate epidemics, and run the full sweep.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use dpnetsim::anova::variance_decomposition;
use dpnetsim::dp::{release_statistics, Epsilon, ReleaseSpec};
use dpnetsim::ergm::ErgmSpec;
use dpnetsim::error::{Error, Result};
use dpnetsim::experiment::{
    collect_balanced_values, generate_observed_network, run_experiment_with_jobs, ExperimentPlan,
    FittedModel, GeneratorConfig, ModelFamily,
};
use dpnetsim::graph::{AttributeSchema, AttributedGraph};
use dpnetsim::io::{infer_schemas, load_graph, write_edges, write_nodes};
use dpnetsim::results::{export_plot_data, export_results, parse_results_csv, Condition, FigureKind};
use dpnetsim::sbm::{fit_sbm, mixing_matrix_from_stats, mixing_release_kinds};
use dpnetsim::sim::{run_sis, summarize, Scenario, SimConfig};
use dpnetsim::stats::{self, StatKind};

#[derive(Parser)]
#[command(name = "dpnetsim", version, about = "Differentially private network release, model fitting and SIS simulation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct GraphArgs {
    /// Node CSV (header: node_id plus one column per attribute).
    #[arg(long)]
    nodes: PathBuf,
    /// Edge CSV (header: u,v).
    #[arg(long)]
    edges: PathBuf,
    /// Attribute schema JSON; categories are inferred (sorted) when omitted.
    #[arg(long)]
    schema: Option<PathBuf>,
}

impl GraphArgs {
    fn load(&self) -> Result<AttributedGraph> {
        let schemas = match &self.schema {
            Some(path) => {
                let text = fs::read_to_string(path)
                    .map_err(|e| Error::io(path.display().to_string(), e))?;
                serde_json::from_str::<Vec<AttributeSchema>>(&text)?
            }
            None => infer_schemas(&self.nodes)?,
        };
        load_graph(&self.nodes, &self.edges, &schemas)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Sample a synthetic observed network from a generator config.
    Generate {
        /// Generator config JSON (node count, attributes, model).
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        nodes_out: PathBuf,
        #[arg(long)]
        edges_out: PathBuf,
    },
    /// Print exact statistics of a graph as JSON.
    Stats {
        #[command(flatten)]
        graph: GraphArgs,
    },
    /// Release statistics under node-differential privacy.
    Release {
        #[command(flatten)]
        graph: GraphArgs,
        /// Privacy budget: a positive number or `inf`.
        #[arg(long)]
        epsilon: Epsilon,
        /// Truncation degree applied before computing statistics.
        #[arg(long)]
        delta_cap: u32,
        #[arg(long)]
        seed: u64,
        /// Statistic list JSON; defaults to edges, degree>=2, degree>=4 and
        /// every mixing matrix entry of every attribute.
        #[arg(long)]
        kinds: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Stamp the release with the current UTC time (off by default so
        /// identical inputs write identical files).
        #[arg(long)]
        stamp: bool,
    },
    /// Fit a model to a private release or to exact statistics.
    Fit {
        #[command(flatten)]
        graph: GraphArgs,
        #[arg(long, value_parser = parse_family)]
        family: ModelFamily,
        /// Release JSON to fit on; exact statistics are used when omitted.
        #[arg(long)]
        release: Option<PathBuf>,
        /// Attribute for the SBM mixing matrix.
        #[arg(long, default_value = "age")]
        mixing_attr: String,
        /// ERGM term list JSON (required for an exact-statistics ERGM fit).
        #[arg(long)]
        terms: Option<PathBuf>,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Sample synthetic networks from a fitted model.
    Sample {
        #[command(flatten)]
        graph: GraphArgs,
        /// Fitted model JSON from `fit`.
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = 1)]
        count: usize,
        #[arg(long)]
        seed: u64,
        /// Edge CSVs are written to `<out-prefix><index>.csv`.
        #[arg(long)]
        out_prefix: String,
    },
    /// Run one epidemic scenario and write summary (and optional
    /// trajectory) CSVs.
    Simulate {
        #[command(flatten)]
        graph: GraphArgs,
        #[arg(long)]
        p_inf: f64,
        #[arg(long)]
        p_recov: f64,
        #[arg(long, default_value_t = 0.2)]
        initial_prevalence: f64,
        #[arg(long, default_value_t = 500)]
        burn_in: usize,
        #[arg(long, default_value_t = 100)]
        analytic_window: usize,
        /// `baseline` or `test_and_treat`.
        #[arg(long, default_value = "baseline")]
        scenario: String,
        #[arg(long, default_value_t = 0.1)]
        test_rate: f64,
        #[arg(long, default_value_t = 2)]
        test_duration: u32,
        #[arg(long, default_value_t = 0.5)]
        p_recov_treated: f64,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        summary_out: PathBuf,
        #[arg(long)]
        trajectory_out: Option<PathBuf>,
    },
    /// Run a full experiment plan and write the results CSV.
    Experiment {
        #[arg(long)]
        plan: PathBuf,
        /// Overrides the plan's master seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker pool size; the output does not depend on it.
        #[arg(long)]
        jobs: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Nested variance decomposition over one results cell.
    Anova {
        #[arg(long)]
        results: PathBuf,
        #[arg(long, default_value = "prevalence_mean")]
        metric: String,
        #[arg(long, default_value = "baseline")]
        scenario: String,
        #[arg(long, default_value = "ALL")]
        group: String,
        #[arg(long, default_value = "dp")]
        condition: String,
        #[arg(long)]
        model: Option<String>,
        #[arg(long)]
        epsilon: Option<Epsilon>,
        #[arg(long)]
        delta: Option<u32>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Figure-ready tidy CSVs from a results file.
    Plotdata {
        #[arg(long)]
        results: PathBuf,
        /// ratio_by_cell, group_panels, quality or variance.
        #[arg(long)]
        figure: String,
        #[arg(long)]
        out: PathBuf,
    },
}

fn parse_family(s: &str) -> std::result::Result<ModelFamily, String> {
    match s {
        "sbm" => Ok(ModelFamily::Sbm),
        "ergm" => Ok(ModelFamily::Ergm),
        other => Err(format!("unknown family `{other}` (expected sbm or ergm)")),
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &PathBuf) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    Ok(serde_json::from_str(&text)?)
}

/// Relative results paths (experiment, anova, plotdata outputs) land under
/// `DPNETSIM_RESULTS_DIR` when it is set; the only environment knob.
fn results_path(out: PathBuf) -> PathBuf {
    match std::env::var_os("DPNETSIM_RESULTS_DIR") {
        Some(dir) if out.is_relative() => PathBuf::from(dir).join(out),
        _ => out,
    }
}

fn write_text(path: &PathBuf, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path.display().to_string(), e))
}

fn default_release_kinds(g: &AttributedGraph) -> Vec<StatKind> {
    let mut kinds = vec![
        StatKind::Edges,
        StatKind::MinDegreeCount { d: 2 },
        StatKind::MinDegreeCount { d: 4 },
    ];
    for schema in g.schemas() {
        kinds.extend(mixing_release_kinds(&schema.name, schema.categories.len()));
    }
    kinds
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate { config, seed, nodes_out, edges_out } => {
            let config: GeneratorConfig = read_json(&config)?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let g = generate_observed_network(&config, &mut rng)?;
            write_nodes(&g, &nodes_out)?;
            write_edges(&g, &edges_out)?;
            eprintln!(
                "generated {} nodes, {} edges (max degree {})",
                g.node_count(),
                g.edge_count(),
                g.max_degree()
            );
            Ok(())
        }
        Command::Stats { graph } => {
            let g = graph.load()?;
            let mut doc = serde_json::Map::new();
            doc.insert("nodes".into(), g.node_count().into());
            doc.insert("edges".into(), stats::count_edges(&g).into());
            doc.insert("max_degree".into(), g.max_degree().into());
            doc.insert(
                "nodes_with_degree_ge_2".into(),
                stats::count_nodes_with_min_degree(&g, 2).into(),
            );
            doc.insert(
                "nodes_with_degree_ge_4".into(),
                stats::count_nodes_with_min_degree(&g, 4).into(),
            );
            doc.insert(
                "degree_histogram".into(),
                serde_json::to_value(stats::degree_histogram(&g))?,
            );
            for schema in g.schemas() {
                let attr = &schema.name;
                let mut section = serde_json::Map::new();
                section.insert("group_sizes".into(), serde_json::to_value(g.group_sizes(attr)?)?);
                section.insert(
                    "mixing_matrix".into(),
                    serde_json::to_value(stats::mixing_matrix(&g, attr)?)?,
                );
                section.insert(
                    "nodematch_per_group".into(),
                    serde_json::to_value(stats::nodematch_per_group(&g, attr)?)?,
                );
                section.insert(
                    "total_nodematch".into(),
                    stats::total_nodematch(&g, attr)?.into(),
                );
                section.insert("nodefactor".into(), serde_json::to_value(stats::nodefactor(&g, attr)?)?);
                doc.insert(attr.clone(), section.into());
            }
            println!("{}", serde_json::to_string_pretty(&serde_json::Value::Object(doc))?);
            Ok(())
        }
        Command::Release { graph, epsilon, delta_cap, seed, kinds, out, stamp } => {
            let g = graph.load()?;
            let kinds = match kinds {
                Some(path) => read_json::<Vec<StatKind>>(&path)?,
                None => default_release_kinds(&g),
            };
            let spec = ReleaseSpec::new(kinds, epsilon, delta_cap);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut release = release_statistics(&g, &spec, &mut rng)?
                .with_seed_path(format!("cli/seed={seed}"));
            if stamp {
                release = release.with_timestamp(now_utc());
            }
            write_text(&out, &release.to_json()?)
        }
        Command::Fit { graph, family, release, mixing_attr, terms, seed, out } => {
            let g = graph.load()?;
            let (kinds, values): (Vec<StatKind>, Vec<f64>) = match &release {
                Some(path) => {
                    let rel: dpnetsim::PrivateRelease = read_json(path)?;
                    (rel.statistics, rel.values)
                }
                None => {
                    let kinds = match family {
                        ModelFamily::Sbm => {
                            let k = g.schema(&mixing_attr)?.category_count();
                            mixing_release_kinds(&mixing_attr, k)
                        }
                        ModelFamily::Ergm => {
                            let path = terms.as_ref().ok_or_else(|| {
                                Error::InvalidModelSpec(
                                    "an exact-statistics ERGM fit needs --terms".into(),
                                )
                            })?;
                            read_json::<Vec<StatKind>>(path)?
                        }
                    };
                    let values = kinds
                        .iter()
                        .map(|k| Ok(k.evaluate(&g)? as f64))
                        .collect::<Result<Vec<f64>>>()?;
                    (kinds, values)
                }
            };
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let model = match family {
                ModelFamily::Sbm => {
                    let sizes = g.group_sizes(&mixing_attr)?;
                    let matrix = mixing_matrix_from_stats(&kinds, &values, &mixing_attr, sizes.len())?;
                    FittedModel::Sbm { params: fit_sbm(&matrix, &mixing_attr, &sizes)? }
                }
                ModelFamily::Ergm => {
                    let spec = ErgmSpec::new(kinds.clone())?;
                    let (params, diagnostics) = dpnetsim::ergm::fit_ergm(
                        &values,
                        &spec,
                        &g,
                        &dpnetsim::ergm::FitConfig::default(),
                        &dpnetsim::ergm::McmcConfig::scaled(g.node_count()),
                        &mut rng,
                    )?;
                    if !diagnostics.converged {
                        eprintln!("warning: fit did not converge: {:?}", diagnostics.warnings);
                    }
                    FittedModel::Ergm { terms: kinds, params, diagnostics }
                }
            };
            write_text(&out, &model.to_json()?)
        }
        Command::Sample { graph, model, count, seed, out_prefix } => {
            let g = graph.load()?;
            let model: FittedModel = read_json(&model)?;
            let mcmc = dpnetsim::ergm::McmcConfig::scaled(g.node_count());
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for i in 0..count {
                let sample = model.sample(&g, &mcmc, &mut rng)?;
                let path = PathBuf::from(format!("{out_prefix}{i:03}.csv"));
                write_edges(&sample, &path)?;
            }
            Ok(())
        }
        Command::Simulate {
            graph,
            p_inf,
            p_recov,
            initial_prevalence,
            burn_in,
            analytic_window,
            scenario,
            test_rate,
            test_duration,
            p_recov_treated,
            seed,
            summary_out,
            trajectory_out,
        } => {
            let g = graph.load()?;
            let scenario = match scenario.as_str() {
                "baseline" => Scenario::Baseline,
                "test_and_treat" => Scenario::TestAndTreat {
                    test_rate,
                    test_duration,
                    p_recov_treated,
                },
                other => {
                    return Err(Error::InvalidSimConfig(format!(
                        "unknown scenario `{other}` (expected baseline or test_and_treat)"
                    )))
                }
            };
            let cfg = SimConfig {
                p_inf,
                p_recov,
                initial_prevalence,
                burn_in,
                analytic_window,
                scenario,
            };
            for warning in cfg.validate()? {
                eprintln!("warning: {warning}");
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let traj = run_sis(&g, &cfg, &mut rng)?;
            let summary = summarize(&traj, &cfg)?;

            let scenario_name = cfg.scenario.name();
            let mut lines = vec!["scenario,metric,group,value".to_string()];
            lines.push(format!(
                "{scenario_name},prevalence_mean,ALL,{}",
                summary.population.prevalence_mean
            ));
            lines.push(format!(
                "{scenario_name},incidence_rate_mean,ALL,{}",
                summary.population.incidence_rate_mean
            ));
            for (attr, groups) in &summary.per_group {
                let schema = g.schema(attr)?;
                for (c, s) in groups.iter().enumerate() {
                    let label = &schema.categories[c];
                    lines.push(format!(
                        "{scenario_name},prevalence_mean,{attr}={label},{}",
                        s.prevalence_mean
                    ));
                    lines.push(format!(
                        "{scenario_name},incidence_rate_mean,{attr}={label},{}",
                        s.incidence_rate_mean
                    ));
                }
            }
            write_text(&summary_out, &(lines.join("\n") + "\n"))?;

            if let Some(path) = trajectory_out {
                let mut lines = vec!["step,scenario,metric,group,value".to_string()];
                for (t, (&p, &i)) in traj
                    .population
                    .prevalence
                    .iter()
                    .zip(&traj.population.incidence_rate)
                    .enumerate()
                {
                    lines.push(format!("{t},{scenario_name},prevalence,ALL,{p}"));
                    lines.push(format!("{t},{scenario_name},incidence_rate,ALL,{i}"));
                }
                for (attr, groups) in &traj.per_group {
                    let schema = g.schema(attr)?;
                    for (c, series) in groups.iter().enumerate() {
                        let label = format!("{attr}={}", schema.categories[c]);
                        for (t, (&p, &i)) in
                            series.prevalence.iter().zip(&series.incidence_rate).enumerate()
                        {
                            lines.push(format!("{t},{scenario_name},prevalence,{label},{p}"));
                            lines.push(format!("{t},{scenario_name},incidence_rate,{label},{i}"));
                        }
                    }
                }
                write_text(&path, &(lines.join("\n") + "\n"))?;
            }
            Ok(())
        }
        Command::Experiment { plan, seed, jobs, out } => {
            let mut plan: ExperimentPlan = read_json(&plan)?;
            if let Some(seed) = seed {
                plan.master_seed = seed;
            }
            let rows = run_experiment_with_jobs(&plan, jobs)?;
            export_results(&rows, results_path(out))?;
            eprintln!("wrote {} rows", rows.len());
            Ok(())
        }
        Command::Anova {
            results,
            metric,
            scenario,
            group,
            condition,
            model,
            epsilon,
            delta,
            out,
        } => {
            let condition = Condition::parse(&condition)?;
            let rows = parse_results_csv(&results)?;
            let cell: Vec<_> = rows
                .into_iter()
                .filter(|r| {
                    r.metric == metric
                        && r.scenario == scenario
                        && r.group == group
                        && r.condition == condition
                        && model.as_ref().is_none_or(|m| &r.model == m)
                        && epsilon.is_none_or(|e| r.epsilon == Some(e))
                        && delta.is_none_or(|d| r.delta == Some(d))
                })
                .collect();
            let (values, r, n, m) = collect_balanced_values(&cell)?;
            let decomposition = variance_decomposition(&values, r, n, m)?;
            let mut lines = vec!["source,df,ss,ms,var_pct".to_string()];
            for c in &decomposition.components {
                lines.push(format!("{},{},{},{},{}", c.source, c.df, c.ss, c.ms, c.var_pct));
            }
            write_text(&results_path(out), &(lines.join("\n") + "\n"))
        }
        Command::Plotdata { results, figure, out } => {
            let kind = FigureKind::parse(&figure)?;
            let rows = parse_results_csv(&results)?;
            export_plot_data(&rows, kind, results_path(out))
        }
    }
}

fn now_utc() -> String {
    // Seconds since the epoch; enough for a creation stamp without pulling
    // in a date-time dependency.
    let secs = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    format!("unix:{secs}")
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
