//! Discrete-time SIS agent-based simulation on a fixed contact network.
//!
//! Each step runs TEST (intervention only) → INFECT → RECOVER with
//! synchronous start-of-step states: newly infected agents neither
//! transmit nor recover within the step that infects them. Recovery
//! returns an agent to the susceptible state.
//!
//! The three phases draw from independent random streams derived from the
//! caller's generator, so an intervention with no effective parameters
//! (zero test rate, or treated recovery equal to baseline recovery)
//! reproduces the baseline trajectory byte for byte under the same seed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::AttributedGraph;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scenario", rename_all = "snake_case")]
pub enum Scenario {
    Baseline,
    TestAndTreat {
        /// Per-step probability that a test-eligible agent is selected.
        test_rate: f64,
        /// Treatment length in steps once an infected selectee is diagnosed.
        test_duration: u32,
        /// Per-step recovery probability while on treatment.
        p_recov_treated: f64,
    },
}

impl Scenario {
    pub fn name(&self) -> &'static str {
        match self {
            Scenario::Baseline => "baseline",
            Scenario::TestAndTreat { .. } => "intervention",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    /// Per-contact per-step transmission probability.
    pub p_inf: f64,
    /// Per-step recovery probability without treatment.
    pub p_recov: f64,
    /// Fraction of nodes infected at initialization.
    pub initial_prevalence: f64,
    pub burn_in: usize,
    pub analytic_window: usize,
    pub scenario: Scenario,
}

impl SimConfig {
    /// Checks field ranges. Returns warnings for configurations that are
    /// legal but depart from the intended intervention (a treated recovery
    /// rate below the baseline rate).
    pub fn validate(&self) -> Result<Vec<String>> {
        let prob = |x: f64| (0.0..=1.0).contains(&x);
        if !(prob(self.p_inf) && prob(self.p_recov) && prob(self.initial_prevalence)) {
            return Err(Error::InvalidSimConfig(
                "p_inf, p_recov and initial_prevalence must lie in [0, 1]".into(),
            ));
        }
        let mut warnings = Vec::new();
        if let Scenario::TestAndTreat { test_rate, p_recov_treated, .. } = self.scenario {
            if !(prob(test_rate) && prob(p_recov_treated)) {
                return Err(Error::InvalidSimConfig(
                    "test_rate and p_recov_treated must lie in [0, 1]".into(),
                ));
            }
            if p_recov_treated < self.p_recov {
                warnings.push(format!(
                    "treated recovery rate {} is below the baseline rate {}",
                    p_recov_treated, self.p_recov
                ));
            }
        }
        Ok(warnings)
    }

    pub fn total_steps(&self) -> usize {
        self.burn_in + self.analytic_window
    }
}

/// One recorded series: per-step prevalence and incidence rate.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Series {
    pub prevalence: Vec<f64>,
    pub incidence_rate: Vec<f64>,
}

/// Per-step output, population-wide and per group of every attribute.
#[derive(Debug, Clone, PartialEq)]
pub struct EpidemicTrajectory {
    pub population: Series,
    /// One entry per attribute: (attribute name, one series per category).
    pub per_group: Vec<(String, Vec<Series>)>,
}

impl EpidemicTrajectory {
    pub fn steps(&self) -> usize {
        self.population.prevalence.len()
    }
}

/// Analytic-window means of every series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats {
    pub prevalence_mean: f64,
    pub incidence_rate_mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpidemicSummary {
    pub population: SummaryStats,
    pub per_group: Vec<(String, Vec<SummaryStats>)>,
}

/// Intervention-to-baseline ratios; `None` marks a ratio left undefined by
/// an extinct (zero-mean) baseline.
#[derive(Debug, Clone, PartialEq)]
pub struct RatioSummary {
    pub population: Option<f64>,
    pub per_group: Vec<(String, Vec<Option<f64>>)>,
    /// Number of undefined ratios encountered (population and groups).
    pub extinct_baselines: usize,
}

/// Runs one SIS simulation and records per-step prevalence and incidence.
///
/// Initialization infects `floor(initial_prevalence * n)` uniformly chosen
/// nodes (rejected if that is zero). Each step then runs, synchronously
/// from start-of-step states:
///
/// 1. TEST (test-and-treat only): every agent with no remaining treatment
///    is selected independently with the test rate; infected selectees
///    start treatment for the test duration.
/// 2. INFECT: along every edge with exactly one endpoint infected at the
///    start of the step, the susceptible endpoint is infected with
///    probability `p_inf` (independently per edge, at most once per step).
/// 3. RECOVER: every agent infected at the start of the step recovers with
///    the treated rate if on treatment, the baseline rate otherwise;
///    recovery clears any treatment.
/// 4. Surviving treatment counters decrease by one; an agent whose counter
///    reaches zero while still infected reverts to the untreated recovery
///    rate and becomes test-eligible again.
/// 5. Prevalence and incidence are recorded (incidence divides new
///    infections by the susceptible count at the end of the previous
///    step).
pub fn run_sis(
    g: &AttributedGraph,
    cfg: &SimConfig,
    rng: &mut impl Rng,
) -> Result<EpidemicTrajectory> {
    cfg.validate()?;
    let n = g.node_count();
    let initial_infected = (cfg.initial_prevalence * n as f64).floor() as usize;
    if initial_infected < 1 {
        return Err(Error::InvalidSimConfig(format!(
            "initial_prevalence {} of {} nodes yields no index case",
            cfg.initial_prevalence, n
        )));
    }

    // Independent streams per phase. The test stream is drawn even for the
    // baseline scenario so that stream assignment never depends on the
    // scenario, only consumption does.
    let mut init_rng = ChaCha8Rng::seed_from_u64(rng.gen());
    let mut test_rng = ChaCha8Rng::seed_from_u64(rng.gen());
    let mut infect_rng = ChaCha8Rng::seed_from_u64(rng.gen());
    let mut recover_rng = ChaCha8Rng::seed_from_u64(rng.gen());

    let mut infected = vec![false; n];
    for idx in rand::seq::index::sample(&mut init_rng, n, initial_infected) {
        infected[idx] = true;
    }
    let mut infected_count = initial_infected;

    // Per-attribute bookkeeping, updated incrementally.
    let attrs: Vec<(usize, usize)> = g
        .schemas()
        .iter()
        .enumerate()
        .map(|(a, s)| (a, s.category_count()))
        .collect();
    let mut group_sizes: Vec<Vec<usize>> = Vec::new();
    let mut group_infected: Vec<Vec<usize>> = Vec::new();
    for &(a, k) in &attrs {
        let mut sizes = vec![0usize; k];
        let mut inf = vec![0usize; k];
        for v in 0..n {
            let c = g.labels_by_index(a)[v] as usize;
            sizes[c] += 1;
            if infected[v] {
                inf[c] += 1;
            }
        }
        group_sizes.push(sizes);
        group_infected.push(inf);
    }

    let steps = cfg.total_steps();
    let mut traj = EpidemicTrajectory {
        population: Series::default(),
        per_group: g
            .schemas()
            .iter()
            .map(|s| {
                (
                    s.name.clone(),
                    vec![Series::default(); s.categories.len()],
                )
            })
            .collect(),
    };

    let mut treatment = vec![0u32; n];
    let mut infected_start = vec![false; n];
    let mut newly = vec![false; n];
    let mut prev_susceptible = n - infected_count;
    let mut prev_group_susceptible: Vec<Vec<usize>> = group_sizes
        .iter()
        .zip(&group_infected)
        .map(|(sizes, inf)| sizes.iter().zip(inf).map(|(s, i)| s - i).collect())
        .collect();

    for _ in 0..steps {
        // TEST: population-wide selection among test-eligible agents; only
        // infected selectees start treatment.
        if let Scenario::TestAndTreat { test_rate, test_duration, .. } = cfg.scenario {
            for v in 0..n {
                if treatment[v] == 0 && test_rng.gen::<f64>() < test_rate && infected[v] {
                    treatment[v] = test_duration;
                }
            }
        }

        infected_start.copy_from_slice(&infected);

        // INFECT: per-edge independent transmission from start-of-step
        // states; a susceptible with several infected neighbors is hit
        // with probability 1 - (1 - p_inf)^k.
        newly.fill(false);
        for &(a, b) in g.edges() {
            let (a, b) = (a as usize, b as usize);
            let target = match (infected_start[a], infected_start[b]) {
                (true, false) => b,
                (false, true) => a,
                _ => continue,
            };
            if infect_rng.gen::<f64>() < cfg.p_inf {
                newly[target] = true;
            }
        }

        // RECOVER: only agents infected at the start of the step.
        for v in 0..n {
            if infected_start[v] {
                let p = match cfg.scenario {
                    Scenario::TestAndTreat { p_recov_treated, .. } if treatment[v] > 0 => {
                        p_recov_treated
                    }
                    _ => cfg.p_recov,
                };
                if recover_rng.gen::<f64>() < p {
                    infected[v] = false;
                    treatment[v] = 0;
                    infected_count -= 1;
                    for &(a, _) in &attrs {
                        group_infected[a][g.labels_by_index(a)[v] as usize] -= 1;
                    }
                }
            }
        }

        // Apply the new infections (disjoint from the recovery set).
        let mut new_count = 0usize;
        let mut new_per_group: Vec<Vec<usize>> =
            attrs.iter().map(|&(_, k)| vec![0usize; k]).collect();
        for v in 0..n {
            if newly[v] {
                debug_assert!(!infected_start[v]);
                infected[v] = true;
                infected_count += 1;
                new_count += 1;
                for &(a, _) in &attrs {
                    let c = g.labels_by_index(a)[v] as usize;
                    group_infected[a][c] += 1;
                    new_per_group[a][c] += 1;
                }
            }
        }

        // Treatment counters tick down after recovery; an agent still
        // infected at zero reverts to undiagnosed status.
        if matches!(cfg.scenario, Scenario::TestAndTreat { .. }) {
            for t in treatment.iter_mut() {
                if *t > 0 {
                    *t -= 1;
                }
            }
        }

        // Conservation: susceptible + infected = n, every step.
        let actual_infected = infected.iter().filter(|&&b| b).count();
        assert_eq!(actual_infected, infected_count, "infected count drifted");
        assert_eq!(
            actual_infected + infected.iter().filter(|&&b| !b).count(),
            n,
            "S + I != n"
        );

        // RECORD.
        debug_assert!(new_count <= prev_susceptible);
        traj.population.prevalence.push(infected_count as f64 / n as f64);
        traj.population.incidence_rate.push(if prev_susceptible == 0 {
            0.0
        } else {
            new_count as f64 / prev_susceptible as f64
        });
        for &(a, k) in &attrs {
            for c in 0..k {
                let series = &mut traj.per_group[a].1[c];
                let size = group_sizes[a][c];
                series.prevalence.push(if size == 0 {
                    0.0
                } else {
                    group_infected[a][c] as f64 / size as f64
                });
                let denom = prev_group_susceptible[a][c];
                series.incidence_rate.push(if denom == 0 {
                    0.0
                } else {
                    new_per_group[a][c] as f64 / denom as f64
                });
            }
        }

        prev_susceptible = n - infected_count;
        for &(a, k) in &attrs {
            for c in 0..k {
                prev_group_susceptible[a][c] = group_sizes[a][c] - group_infected[a][c];
            }
        }
    }

    Ok(traj)
}

/// Arithmetic means of every series over the final analytic window.
pub fn summarize(traj: &EpidemicTrajectory, cfg: &SimConfig) -> Result<EpidemicSummary> {
    let expected = cfg.total_steps();
    if traj.steps() != expected {
        return Err(Error::InvalidSimConfig(format!(
            "trajectory has {} steps, config implies {expected}",
            traj.steps()
        )));
    }
    let window = cfg.analytic_window;
    let mean_tail = |xs: &[f64]| -> f64 {
        if window == 0 {
            return 0.0;
        }
        let tail = &xs[xs.len() - window..];
        tail.iter().sum::<f64>() / window as f64
    };
    let series_summary = |s: &Series| SummaryStats {
        prevalence_mean: mean_tail(&s.prevalence),
        incidence_rate_mean: mean_tail(&s.incidence_rate),
    };
    Ok(EpidemicSummary {
        population: series_summary(&traj.population),
        per_group: traj
            .per_group
            .iter()
            .map(|(name, group)| (name.clone(), group.iter().map(series_summary).collect()))
            .collect(),
    })
}

fn ratio_of(
    intervention: &EpidemicSummary,
    baseline: &EpidemicSummary,
    pick: fn(&SummaryStats) -> f64,
) -> Result<RatioSummary> {
    if intervention.per_group.len() != baseline.per_group.len()
        || intervention
            .per_group
            .iter()
            .zip(&baseline.per_group)
            .any(|(a, b)| a.0 != b.0 || a.1.len() != b.1.len())
    {
        return Err(Error::GraphMismatch(
            "ratio requires summaries over the same groups".into(),
        ));
    }
    let mut extinct = 0usize;
    let mut ratio = |i: f64, b: f64| -> Option<f64> {
        if b == 0.0 {
            extinct += 1;
            None
        } else {
            Some(i / b)
        }
    };
    let population = ratio(pick(&intervention.population), pick(&baseline.population));
    let per_group = intervention
        .per_group
        .iter()
        .zip(&baseline.per_group)
        .map(|((name, is), (_, bs))| {
            (
                name.clone(),
                is.iter().zip(bs).map(|(i, b)| ratio(pick(i), pick(b))).collect(),
            )
        })
        .collect();
    Ok(RatioSummary { population, per_group, extinct_baselines: extinct })
}

/// Intervention-to-baseline prevalence ratio for a paired (network,
/// simulation) run; undefined entries (extinct baselines) come back as
/// `None` and are counted.
pub fn prevalence_ratio(
    intervention: &EpidemicSummary,
    baseline: &EpidemicSummary,
) -> Result<RatioSummary> {
    ratio_of(intervention, baseline, |s| s.prevalence_mean)
}

/// Incidence-rate analog of [`prevalence_ratio`].
pub fn incidence_rate_ratio(
    intervention: &EpidemicSummary,
    baseline: &EpidemicSummary,
) -> Result<RatioSummary> {
    ratio_of(intervention, baseline, |s| s.incidence_rate_mean)
}
