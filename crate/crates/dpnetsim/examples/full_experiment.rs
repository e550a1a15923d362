//! A small end-to-end factorial experiment with variance decomposition.
//!
//! Builds a reduced experiment plan (the desk-scale defaults shrunk to run
//! in under a minute), executes the observed / no-DP / DP conditions,
//! writes the results CSV and a plan JSON usable with the `dpnetsim`
//! command line, and decomposes one cell's variance into release, network
//! and simulation components.
//!
//! Run with: `cargo run --release --example full_experiment`

use dpnetsim::anova::variance_decomposition;
use dpnetsim::dp::Epsilon;
use dpnetsim::ergm::FitConfig;
use dpnetsim::experiment::{collect_balanced_values, desk_plan, run_experiment, ModelFamily};
use dpnetsim::results::{export_plot_data, export_results, Condition, FigureKind};

fn main() -> dpnetsim::Result<()> {
    let mut plan = desk_plan(ModelFamily::Ergm, "high");
    plan.generator.node_count = 500;
    plan.epsilons = vec![Epsilon::Finite(1.0), Epsilon::Finite(5.0), Epsilon::Infinite];
    plan.delta_caps = vec![3];
    plan.releases_per_cell = 2;
    plan.networks_per_release = 3;
    plan.sims_per_scenario = 3;
    plan.fit = Some(FitConfig {
        pilot_samples: 15,
        update_steps: 100,
        eval_samples: 25,
        max_rounds: 3,
        ..FitConfig::default()
    });

    let out_dir = std::path::Path::new("target/full_experiment");
    std::fs::create_dir_all(out_dir).expect("create output directory");
    std::fs::write(out_dir.join("plan.json"), plan.to_json()?).expect("write plan");

    println!("running {} rows...", plan.expected_row_count());
    let rows = run_experiment(&plan)?;
    export_results(&rows, out_dir.join("results.csv"))?;
    export_plot_data(&rows, FigureKind::RatioByCell, out_dir.join("ratios.csv"))?;
    export_plot_data(&rows, FigureKind::Variance, out_dir.join("variance_plot.csv"))?;
    println!("wrote plan.json, results.csv, ratios.csv and variance_plot.csv to {}", out_dir.display());

    // Condition summaries.
    for condition in [Condition::Observed, Condition::NoDp, Condition::Dp] {
        let values: Vec<f64> = rows
            .iter()
            .filter(|r| {
                r.condition == condition
                    && r.metric == "prevalence_mean"
                    && r.scenario == "baseline"
                    && r.group == "ALL"
            })
            .filter_map(|r| r.value)
            .collect();
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        println!(
            "{:<9} baseline prevalence: {mean:.4} over {} runs",
            condition.as_str(),
            values.len()
        );
    }

    // Variance decomposition of the epsilon = 1, delta = 3 cell.
    let cell: Vec<_> = rows
        .iter()
        .filter(|r| {
            r.condition == Condition::Dp
                && r.epsilon == Some(Epsilon::Finite(1.0))
                && r.delta == Some(3)
                && r.metric == "prevalence_mean"
                && r.scenario == "baseline"
                && r.group == "ALL"
        })
        .cloned()
        .collect();
    let (values, r, n, m) = collect_balanced_values(&cell)?;
    let decomposition = variance_decomposition(&values, r, n, m)?;
    println!("\nvariance decomposition at epsilon 1, delta 3 ({r} releases x {n} networks x {m} sims):");
    println!("  {:<32} {:>4} {:>12} {:>12} {:>8}", "source", "df", "ss", "ms", "var%");
    for c in &decomposition.components {
        println!(
            "  {:<32} {:>4} {:>12.6} {:>12.6} {:>8.2}",
            c.source, c.df, c.ss, c.ms, c.var_pct
        );
    }
    Ok(())
}
