//! SIS epidemic with a test-and-treat intervention.
//!
//! Runs paired baseline and intervention simulations on a synthetic
//! contact network and reports equilibrium prevalence, incidence rates and
//! the prevalence ratio, population-wide and per demographic group.
//!
//! Run with: `cargo run --example epidemic_simulation`

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use dpnetsim::experiment::{desk_generator, generate_observed_network};
use dpnetsim::sim::{prevalence_ratio, run_sis, summarize, Scenario, SimConfig};

fn main() -> dpnetsim::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let network = generate_observed_network(&desk_generator(1000), &mut rng)?;
    println!(
        "contact network: {} nodes, {} edges",
        network.node_count(),
        network.edge_count()
    );

    let baseline_cfg = SimConfig {
        p_inf: 0.75,
        p_recov: 0.1,
        initial_prevalence: 0.2,
        burn_in: 500,
        analytic_window: 100,
        scenario: Scenario::Baseline,
    };
    let intervention_cfg = SimConfig {
        scenario: Scenario::TestAndTreat {
            test_rate: 0.1,
            test_duration: 2,
            p_recov_treated: 0.5,
        },
        ..baseline_cfg.clone()
    };

    // Paired runs: same network, separate epidemic randomness.
    let mut rng_base = ChaCha8Rng::seed_from_u64(100);
    let mut rng_int = ChaCha8Rng::seed_from_u64(200);
    let baseline = summarize(&run_sis(&network, &baseline_cfg, &mut rng_base)?, &baseline_cfg)?;
    let intervention =
        summarize(&run_sis(&network, &intervention_cfg, &mut rng_int)?, &intervention_cfg)?;

    println!("\nanalytic-window means (last {} steps):", baseline_cfg.analytic_window);
    println!(
        "  baseline:     prevalence {:.4}, incidence rate {:.4}",
        baseline.population.prevalence_mean, baseline.population.incidence_rate_mean
    );
    println!(
        "  intervention: prevalence {:.4}, incidence rate {:.4}",
        intervention.population.prevalence_mean, intervention.population.incidence_rate_mean
    );

    let ratio = prevalence_ratio(&intervention, &baseline)?;
    println!(
        "\nprevalence ratio (intervention / baseline): {:.3}",
        ratio.population.expect("baseline did not go extinct")
    );
    for (attr, groups) in &ratio.per_group {
        let schema = network.schema(attr)?;
        for (c, r) in groups.iter().enumerate() {
            match r {
                Some(r) => println!("  {attr}={:<8} {r:.3}", schema.categories[c]),
                None => println!("  {attr}={:<8} undefined (extinct baseline)", schema.categories[c]),
            }
        }
    }
    Ok(())
}
