//! Long-format result rows, the results CSV, and figure-ready exports.

use std::cmp::Ordering;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dp::Epsilon;
use crate::error::{Error, Result};

/// Experimental condition a row belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    /// Simulations directly on the ground-truth network.
    Observed,
    /// Model fitted on exact statistics of the observed network.
    NoDp,
    /// Model fitted on a differentially private release.
    Dp,
}

impl Condition {
    pub fn as_str(self) -> &'static str {
        match self {
            Condition::Observed => "observed",
            Condition::NoDp => "no_dp",
            Condition::Dp => "dp",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "observed" => Ok(Condition::Observed),
            "no_dp" => Ok(Condition::NoDp),
            "dp" => Ok(Condition::Dp),
            other => Err(Error::InvalidPlan(format!("unknown condition `{other}`"))),
        }
    }

    fn rank(self) -> u8 {
        match self {
            Condition::Observed => 0,
            Condition::NoDp => 1,
            Condition::Dp => 2,
        }
    }
}

/// One recorded value of the sweep, keyed by the full nesting path.
/// Missing levels (e.g. the release index of the observed condition) stay
/// empty in the CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub model: String,
    pub condition: Condition,
    pub epsilon: Option<Epsilon>,
    pub delta: Option<u32>,
    pub release: Option<usize>,
    pub network: Option<usize>,
    pub sim: Option<usize>,
    pub scenario: String,
    pub metric: String,
    pub group: String,
    pub value: Option<f64>,
    pub flags: String,
}

pub const RESULTS_HEADER: &str =
    "model,condition,epsilon,delta,release,network,sim,scenario,metric,group,value,flags";

fn epsilon_rank(e: &Option<Epsilon>) -> (u8, u64) {
    match e {
        None => (0, 0),
        Some(Epsilon::Finite(x)) => (1, x.to_bits()),
        Some(Epsilon::Infinite) => (2, 0),
    }
}

fn opt_rank(v: &Option<usize>) -> i64 {
    v.map_or(-1, |x| x as i64)
}

impl ResultRow {
    pub fn compare_key(&self, other: &Self) -> Ordering {
        (
            &self.model,
            self.condition.rank(),
            epsilon_rank(&self.epsilon),
            self.delta.map_or(-1i64, |d| d as i64),
            opt_rank(&self.release),
            opt_rank(&self.network),
            opt_rank(&self.sim),
            &self.scenario,
            &self.metric,
            &self.group,
        )
            .cmp(&(
                &other.model,
                other.condition.rank(),
                epsilon_rank(&other.epsilon),
                other.delta.map_or(-1i64, |d| d as i64),
                opt_rank(&other.release),
                opt_rank(&other.network),
                opt_rank(&other.sim),
                &other.scenario,
                &other.metric,
                &other.group,
            ))
    }

    pub fn to_csv_line(&self) -> String {
        let opt_eps = self.epsilon.map(|e| e.to_string()).unwrap_or_default();
        let fmt_usize = |v: Option<usize>| v.map(|x| x.to_string()).unwrap_or_default();
        let value = self.value.map(|v| format!("{v}")).unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            self.model,
            self.condition.as_str(),
            opt_eps,
            self.delta.map(|d| d.to_string()).unwrap_or_default(),
            fmt_usize(self.release),
            fmt_usize(self.network),
            fmt_usize(self.sim),
            self.scenario,
            self.metric,
            self.group,
            value,
            self.flags
        )
    }
}

/// Writes the results CSV with a fixed column order and deterministic row
/// order (rows are expected to be pre-sorted by the runner; this sorts
/// again defensively so the file is a pure function of the row multiset).
pub fn export_results(rows: &[ResultRow], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut out = BufWriter::new(file);
    let mut sorted: Vec<&ResultRow> = rows.iter().collect();
    sorted.sort_by(|a, b| a.compare_key(b));
    writeln!(out, "{RESULTS_HEADER}").map_err(|e| Error::io(path.display().to_string(), e))?;
    for row in sorted {
        writeln!(out, "{}", row.to_csv_line())
            .map_err(|e| Error::io(path.display().to_string(), e))?;
    }
    Ok(())
}

/// Parses a results CSV produced by [`export_results`].
pub fn parse_results_csv(path: impl AsRef<Path>) -> Result<Vec<ResultRow>> {
    let path = path.as_ref();
    let label = path.display().to_string();
    let file = File::open(path).map_err(|e| Error::io(label.clone(), e))?;
    let mut reader = csv::Reader::from_reader(file);
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::Csv { path: label.clone(), source: e })?;
        let line = record.position().map_or(0, |p| p.line());
        let field = |i: usize| record.get(i).unwrap_or("");
        let parse_opt_usize = |i: usize| -> Result<Option<usize>> {
            let s = field(i);
            if s.is_empty() {
                Ok(None)
            } else {
                s.parse().map(Some).map_err(|_| {
                    Error::invalid_input(&label, line, format!("bad index `{s}`"))
                })
            }
        };
        let epsilon = if field(2).is_empty() {
            None
        } else {
            Some(
                field(2)
                    .parse::<Epsilon>()
                    .map_err(|e| Error::invalid_input(&label, line, e))?,
            )
        };
        let delta = if field(3).is_empty() {
            None
        } else {
            Some(field(3).parse::<u32>().map_err(|_| {
                Error::invalid_input(&label, line, format!("bad delta `{}`", field(3)))
            })?)
        };
        let value = if field(10).is_empty() {
            None
        } else {
            Some(field(10).parse::<f64>().map_err(|_| {
                Error::invalid_input(&label, line, format!("bad value `{}`", field(10)))
            })?)
        };
        rows.push(ResultRow {
            model: field(0).to_string(),
            condition: Condition::parse(field(1))?,
            epsilon,
            delta,
            release: parse_opt_usize(4)?,
            network: parse_opt_usize(5)?,
            sim: parse_opt_usize(6)?,
            scenario: field(7).to_string(),
            metric: field(8).to_string(),
            group: field(9).to_string(),
            value,
            flags: field(11).to_string(),
        });
    }
    Ok(rows)
}

/// Figure families supported by the tidy plot-data export.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FigureKind {
    /// Prevalence / incidence-rate ratios per (epsilon, delta) cell.
    RatioByCell,
    /// The same ratios, broken out per attribute group.
    GroupPanels,
    /// Network quality metrics and degree proportions per synthetic network.
    Quality,
    /// Nested means (overall / release / network / simulation) of the
    /// baseline mean prevalence, for variance plots.
    Variance,
}

impl FigureKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "ratio_by_cell" => Ok(FigureKind::RatioByCell),
            "group_panels" => Ok(FigureKind::GroupPanels),
            "quality" => Ok(FigureKind::Quality),
            "variance" => Ok(FigureKind::Variance),
            other => Err(Error::InvalidPlan(format!(
                "unknown figure kind `{other}` (expected ratio_by_cell, group_panels, quality, variance)"
            ))),
        }
    }
}

fn write_lines(path: &Path, header: &str, lines: &mut Vec<String>) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut out = BufWriter::new(file);
    writeln!(out, "{header}").map_err(|e| Error::io(path.display().to_string(), e))?;
    lines.sort();
    for line in lines {
        writeln!(out, "{line}").map_err(|e| Error::io(path.display().to_string(), e))?;
    }
    Ok(())
}

fn opt_string<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map(|x| x.to_string()).unwrap_or_default()
}

/// Emits a tidy, plot-ready CSV for one figure family. Rows come straight
/// from the results table, filtered and (for the variance figure)
/// aggregated; output order is deterministic.
pub fn export_plot_data(rows: &[ResultRow], kind: FigureKind, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    match kind {
        FigureKind::RatioByCell | FigureKind::GroupPanels => {
            let all_groups = kind == FigureKind::GroupPanels;
            let header = "model,condition,epsilon,delta,release,network,sim,metric,group,value";
            let mut lines: Vec<String> = rows
                .iter()
                .filter(|r| {
                    (r.metric == "prevalence_ratio" || r.metric == "incidence_rate_ratio")
                        && (all_groups || r.group == "ALL")
                })
                .map(|r| {
                    format!(
                        "{},{},{},{},{},{},{},{},{},{}",
                        r.model,
                        r.condition.as_str(),
                        opt_string(&r.epsilon),
                        opt_string(&r.delta),
                        opt_string(&r.release),
                        opt_string(&r.network),
                        opt_string(&r.sim),
                        r.metric,
                        r.group,
                        r.value.map(|v| v.to_string()).unwrap_or_default()
                    )
                })
                .collect();
            write_lines(path, header, &mut lines)
        }
        FigureKind::Quality => {
            let header = "model,condition,epsilon,delta,release,network,metric,group,value";
            let mut lines: Vec<String> = rows
                .iter()
                .filter(|r| r.metric.starts_with("quality_") || r.metric == "degree_proportion")
                .map(|r| {
                    format!(
                        "{},{},{},{},{},{},{},{},{}",
                        r.model,
                        r.condition.as_str(),
                        opt_string(&r.epsilon),
                        opt_string(&r.delta),
                        opt_string(&r.release),
                        opt_string(&r.network),
                        r.metric,
                        r.group,
                        r.value.map(|v| v.to_string()).unwrap_or_default()
                    )
                })
                .collect();
            write_lines(path, header, &mut lines)
        }
        FigureKind::Variance => {
            let header = "model,condition,epsilon,delta,level,release,network,sim,value";
            // Group baseline mean-prevalence values per cell, then emit the
            // nested means underlying a variance plot.
            use std::collections::BTreeMap;
            type CellKey = (String, String, String, String);
            let mut cells: BTreeMap<CellKey, Vec<&ResultRow>> = BTreeMap::new();
            for r in rows {
                if r.metric == "prevalence_mean"
                    && r.scenario == "baseline"
                    && r.group == "ALL"
                    && r.value.is_some()
                {
                    cells
                        .entry((
                            r.model.clone(),
                            r.condition.as_str().to_string(),
                            opt_string(&r.epsilon),
                            opt_string(&r.delta),
                        ))
                        .or_default()
                        .push(r);
                }
            }
            let mut lines = Vec::new();
            for ((model, condition, eps, delta), cell_rows) in &cells {
                let prefix = format!("{model},{condition},{eps},{delta}");
                let mean = |xs: &[f64]| xs.iter().sum::<f64>() / xs.len() as f64;
                let values: Vec<f64> = cell_rows.iter().filter_map(|r| r.value).collect();
                lines.push(format!("{prefix},overall,,,,{}", mean(&values)));

                let mut by_release: BTreeMap<i64, Vec<f64>> = BTreeMap::new();
                let mut by_network: BTreeMap<(i64, i64), Vec<f64>> = BTreeMap::new();
                for r in cell_rows {
                    let rel = r.release.map_or(-1, |x| x as i64);
                    let net = r.network.map_or(-1, |x| x as i64);
                    by_release.entry(rel).or_default().push(r.value.unwrap());
                    by_network.entry((rel, net)).or_default().push(r.value.unwrap());
                    lines.push(format!(
                        "{prefix},sim,{},{},{},{}",
                        opt_string(&r.release),
                        opt_string(&r.network),
                        opt_string(&r.sim),
                        r.value.unwrap()
                    ));
                }
                for (rel, vals) in &by_release {
                    let rel_s = if *rel < 0 { String::new() } else { rel.to_string() };
                    lines.push(format!("{prefix},release,{rel_s},,,{}", mean(vals)));
                }
                for ((rel, net), vals) in &by_network {
                    let rel_s = if *rel < 0 { String::new() } else { rel.to_string() };
                    let net_s = if *net < 0 { String::new() } else { net.to_string() };
                    lines.push(format!("{prefix},network,{rel_s},{net_s},,{}", mean(vals)));
                }
            }
            write_lines(path, header, &mut lines)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_row() -> ResultRow {
        ResultRow {
            model: "ergm".into(),
            condition: Condition::Dp,
            epsilon: Some(Epsilon::Finite(5.0)),
            delta: Some(3),
            release: Some(0),
            network: Some(2),
            sim: Some(4),
            scenario: "baseline".into(),
            metric: "prevalence_mean".into(),
            group: "ALL".into(),
            value: Some(0.125),
            flags: String::new(),
        }
    }

    #[test]
    fn csv_line_format() {
        assert_eq!(
            sample_row().to_csv_line(),
            "ergm,dp,5,3,0,2,4,baseline,prevalence_mean,ALL,0.125,"
        );
        let mut r = sample_row();
        r.condition = Condition::Observed;
        r.epsilon = None;
        r.delta = None;
        r.release = None;
        r.network = None;
        r.value = None;
        r.flags = "extinct".into();
        assert_eq!(
            r.to_csv_line(),
            "ergm,observed,,,,,4,baseline,prevalence_mean,ALL,,extinct"
        );
    }

    #[test]
    fn export_empty_rows_gives_header_only() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("results.csv");
        export_results(&[], &path).unwrap();
        let content = std::fs::read_to_string(&path).unwrap();
        assert_eq!(content, format!("{RESULTS_HEADER}\n"));

        for kind in [
            FigureKind::RatioByCell,
            FigureKind::GroupPanels,
            FigureKind::Quality,
            FigureKind::Variance,
        ] {
            let p = dir.path().join("plot.csv");
            export_plot_data(&[], kind, &p).unwrap();
            let content = std::fs::read_to_string(&p).unwrap();
            assert_eq!(content.lines().count(), 1, "{kind:?}");
        }
    }

    #[test]
    fn export_is_deterministic_and_parses_back() {
        let dir = tempfile::tempdir().unwrap();
        let mut rows = vec![sample_row()];
        let mut second = sample_row();
        second.sim = Some(1);
        second.epsilon = Some(Epsilon::Infinite);
        second.value = None;
        second.flags = "extinct".into();
        rows.push(second);

        let p1 = dir.path().join("a.csv");
        let p2 = dir.path().join("b.csv");
        export_results(&rows, &p1).unwrap();
        rows.reverse();
        export_results(&rows, &p2).unwrap();
        let b1 = std::fs::read(&p1).unwrap();
        let b2 = std::fs::read(&p2).unwrap();
        assert_eq!(b1, b2, "export depends on input order");

        let parsed = parse_results_csv(&p1).unwrap();
        assert_eq!(parsed.len(), 2);
        let mut expected = rows.clone();
        expected.sort_by(|a, b| a.compare_key(b));
        assert_eq!(parsed, expected);
    }

    #[test]
    fn ordering_puts_infinite_epsilon_last() {
        let mut inf = sample_row();
        inf.epsilon = Some(Epsilon::Infinite);
        let fin = sample_row();
        assert_eq!(fin.compare_key(&inf), Ordering::Less);
        let mut none = sample_row();
        none.epsilon = None;
        assert_eq!(none.compare_key(&fin), Ordering::Less);
    }
}
