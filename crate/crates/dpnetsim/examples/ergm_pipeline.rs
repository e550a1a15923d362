//! ERGM fitting and sampling from a private release.
//!
//! Releases the full ERGM statistic vector of a synthetic observed network
//! under node-DP, fits coefficients by stochastic-approximation moment
//! matching, samples networks from the fitted model, and compares their
//! statistics against the released targets.
//!
//! Run with: `cargo run --release --example ergm_pipeline`
//! (the fit runs a few hundred million Metropolis-Hastings proposals;
//! release mode is worth it)

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use dpnetsim::dp::{release_statistics, Epsilon, ReleaseSpec};
use dpnetsim::ergm::{
    ergm_statistics, fit_ergm, sample_ergm, standard_terms, ErgmSpec, FitConfig, McmcConfig,
};
use dpnetsim::experiment::{desk_generator, generate_observed_network};

fn main() -> dpnetsim::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let observed = generate_observed_network(&desk_generator(1000), &mut rng)?;
    println!(
        "observed network: {} nodes, {} edges, max degree {}",
        observed.node_count(),
        observed.edge_count(),
        observed.max_degree()
    );

    // Same term set the ground truth uses: edges, degree thresholds, age
    // homophily per group, total race homophily, nodefactor terms with the
    // first group of each attribute excluded as reference.
    let terms = standard_terms("age", 3, "race", 2, true);
    let spec = ErgmSpec::new(terms.clone())?;

    let release_spec = ReleaseSpec::new(terms, Epsilon::Finite(5.0), 3);
    let release = release_statistics(&observed, &release_spec, &mut rng)?;
    println!("\nreleased targets (epsilon 5, delta 3):");
    for (kind, value) in release.statistics.iter().zip(&release.values) {
        println!("  {:<24} {value:.1}", kind.label());
    }

    let mcmc = McmcConfig::scaled(observed.node_count());
    let (params, diagnostics) = fit_ergm(
        &release.values,
        &spec,
        &observed,
        &FitConfig::default(),
        &mcmc,
        &mut rng,
    )?;
    println!(
        "\nfit: converged={} after {} updates; residuals (in MCMC standard errors):",
        diagnostics.converged, diagnostics.iterations
    );
    for (kind, r) in spec.terms().iter().zip(&diagnostics.residuals_se) {
        println!("  {:<24} {r:.2}", kind.label());
    }
    if !diagnostics.clamped.is_empty() {
        println!("  clamped targets: {:?}", diagnostics.clamped);
    }

    let synthetic = sample_ergm(&params, &spec, &observed, &mcmc, &mut rng)?;
    println!("\nsampled network: {} edges; statistics vs targets:", synthetic.edge_count());
    let stats = ergm_statistics(&synthetic, &spec)?;
    for ((kind, &got), &target) in spec.terms().iter().zip(&stats).zip(&release.values) {
        println!("  {:<24} {got:>7.1}  (target {target:.1})", kind.label());
    }
    Ok(())
}
