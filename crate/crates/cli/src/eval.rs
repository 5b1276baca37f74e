//! Accuracy and runtime summaries over many runs.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::run::{RunResult, Timing};

/// Ranks at which top-x accuracy is reported.
pub const TOP_X: [usize; 5] = [1, 2, 3, 5, 10];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub name: String,
    pub n_vertices: usize,
    pub n_seeds: usize,
    pub converged: bool,
    /// 1-based rank of the true assignment, if it was reported.
    pub rank: Option<usize>,
    pub cost_ratio: Option<f64>,
    pub runtime_secs: f64,
}

impl Outcome {
    pub fn from_run(name: impl Into<String>, result: &RunResult, timing: &Timing) -> Self {
        Self {
            name: name.into(),
            n_vertices: result.vertex_labels.len(),
            n_seeds: result.manifest.as_ref().map_or(0, |m| m.options.seeds.len()),
            converged: result.converged_exactly,
            rank: result.truth.as_ref().and_then(|t| t.rank),
            cost_ratio: result.truth.as_ref().and_then(|t| t.cost_ratio),
            runtime_secs: timing.total_secs,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub runs: usize,
    pub converged: usize,
    /// Fraction of runs whose truth ranks at or above x.
    pub top_x: BTreeMap<usize, f64>,
    pub median_runtime_secs: Option<f64>,
    /// Over converged runs only.
    pub median_cost_ratio: Option<f64>,
}

pub fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    Some(if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    })
}

pub fn summarize<'a>(outcomes: impl IntoIterator<Item = &'a Outcome>) -> Summary {
    let outcomes: Vec<&Outcome> = outcomes.into_iter().collect();
    let runs = outcomes.len();
    let top_x = TOP_X
        .iter()
        .map(|&x| {
            let hits = outcomes.iter().filter(|o| o.rank.is_some_and(|r| r <= x)).count();
            (x, if runs == 0 { 0.0 } else { hits as f64 / runs as f64 })
        })
        .collect();
    let mut runtimes: Vec<f64> = outcomes.iter().map(|o| o.runtime_secs).collect();
    let mut ratios: Vec<f64> = outcomes
        .iter()
        .filter(|o| o.converged)
        .filter_map(|o| o.cost_ratio)
        .collect();
    Summary {
        runs,
        converged: outcomes.iter().filter(|o| o.converged).count(),
        top_x,
        median_runtime_secs: median(&mut runtimes),
        median_cost_ratio: median(&mut ratios),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub overall: Summary,
    pub by_vertices: BTreeMap<usize, Summary>,
    pub by_seeds: BTreeMap<usize, Summary>,
    pub outcomes: Vec<Outcome>,
}

impl EvaluationReport {
    pub fn new(outcomes: Vec<Outcome>) -> Self {
        let strata = |key: fn(&Outcome) -> usize| {
            let mut groups: BTreeMap<usize, Vec<&Outcome>> = BTreeMap::new();
            for o in &outcomes {
                groups.entry(key(o)).or_default().push(o);
            }
            groups
                .into_iter()
                .map(|(k, v)| (k, summarize(v)))
                .collect::<BTreeMap<_, _>>()
        };
        Self {
            overall: summarize(&outcomes),
            by_vertices: strata(|o| o.n_vertices),
            by_seeds: strata(|o| o.n_seeds),
            outcomes,
        }
    }
}

fn write_summary(f: &mut fmt::Formatter<'_>, label: &str, s: &Summary) -> fmt::Result {
    write!(f, "{label:<14} runs {:>4}  converged {:>4}", s.runs, s.converged)?;
    for (x, acc) in &s.top_x {
        write!(f, "  top{x} {:>5.1}%", acc * 100.0)?;
    }
    match s.median_runtime_secs {
        Some(t) => write!(f, "  median time {t:.3}s")?,
        None => write!(f, "  median time -")?,
    }
    match s.median_cost_ratio {
        Some(r) => writeln!(f, "  median CR {r:.2}"),
        None => writeln!(f, "  median CR -"),
    }
}

impl fmt::Display for EvaluationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_summary(f, "all", &self.overall)?;
        for (n, s) in &self.by_vertices {
            write_summary(f, &format!("n1={n}"), s)?;
        }
        for (n, s) in &self.by_seeds {
            write_summary(f, &format!("seeds={n}"), s)?;
        }
        Ok(())
    }
}
