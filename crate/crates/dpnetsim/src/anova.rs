//! Nested ANOVA over the balanced release → network → simulation design:
//! exact partition of the total sum of squares into between-release,
//! between-network-within-release, and residual simulation components.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceComponent {
    pub source: String,
    pub df: u64,
    pub ss: f64,
    pub ms: f64,
    /// Share of the total sum of squares, in percent.
    pub var_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceDecomposition {
    /// Release, network-within-release, simulation residual, in that order.
    pub components: Vec<VarianceComponent>,
    pub ss_total: f64,
}

impl VarianceDecomposition {
    pub fn release(&self) -> &VarianceComponent {
        &self.components[0]
    }
    pub fn network(&self) -> &VarianceComponent {
        &self.components[1]
    }
    pub fn simulation(&self) -> &VarianceComponent {
        &self.components[2]
    }
}

/// Decomposes `values`, laid out as `values[i * n * m + j * m + k]` for
/// release `i`, network `j`, simulation `k`, into the three nested sums
/// of squares:
///
/// `SS_R  = N·M · Σ_i (ȳ_i·· − ȳ···)²`
/// `SS_N|R = M · Σ_{i,j} (ȳ_ij· − ȳ_i··)²`
/// `SS_E  = SS_total − SS_R − SS_N|R`
///
/// Degrees of freedom follow the nested convention: `R−1`, `R(N−1)`,
/// `RN(M−1)`. The percent column is each component's share of `SS_total`.
pub fn variance_decomposition(
    values: &[f64],
    r: usize,
    n: usize,
    m: usize,
) -> Result<VarianceDecomposition> {
    let expected = r * n * m;
    if expected == 0 {
        return Err(Error::InvalidPlan("R, N, M must all be positive".into()));
    }
    if values.len() != expected {
        return Err(Error::UnbalancedDesign { expected, actual: values.len() });
    }

    let grand_mean = values.iter().sum::<f64>() / expected as f64;
    let ss_total: f64 = values.iter().map(|y| (y - grand_mean).powi(2)).sum();

    let mut ss_release = 0.0;
    let mut ss_network = 0.0;
    for i in 0..r {
        let block = &values[i * n * m..(i + 1) * n * m];
        let release_mean = block.iter().sum::<f64>() / (n * m) as f64;
        ss_release += (release_mean - grand_mean).powi(2);
        for j in 0..n {
            let cell = &block[j * m..(j + 1) * m];
            let network_mean = cell.iter().sum::<f64>() / m as f64;
            ss_network += (network_mean - release_mean).powi(2);
        }
    }
    ss_release *= (n * m) as f64;
    ss_network *= m as f64;

    let ss_error = ss_total - ss_release - ss_network;
    assert!(
        ss_error >= -1e-9 * ss_total.max(1.0),
        "negative residual sum of squares: {ss_error}"
    );
    let ss_error = ss_error.max(0.0);

    let df = [
        (r - 1) as u64,
        (r * (n - 1)) as u64,
        (r * n * (m - 1)) as u64,
    ];
    let ss = [ss_release, ss_network, ss_error];
    let names = ["Release", "Network : Release", "Simulation : Network : Release"];
    let components = names
        .iter()
        .zip(df)
        .zip(ss)
        .map(|((&source, df), ss)| VarianceComponent {
            source: source.to_string(),
            df,
            ss,
            ms: if df == 0 { 0.0 } else { ss / df as f64 },
            var_pct: if ss_total == 0.0 { 0.0 } else { 100.0 * ss / ss_total },
        })
        .collect();

    Ok(VarianceDecomposition { components, ss_total })
}
