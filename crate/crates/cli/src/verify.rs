//! Cross-checks the solver against exhaustive enumeration.

use std::fmt;

use ehgm::oracle::top_k_seeded;
use ehgm::{approx_eq_rel, solve, FullAssignment, HypergraphModel, PointSet, SearchConfig, VertexSet, COST_RTOL};
use serde::{Deserialize, Serialize};

use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Agree,
    /// 1-based rank of the first disagreement.
    Disagree { rank: usize },
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::Agree => f.write_str("AGREE"),
            Verdict::Disagree { rank } => write!(f, "DISAGREE at rank {rank}"),
        }
    }
}

/// Same mappings in the same order with matching costs.
pub fn compare(solver: &[FullAssignment], oracle: &[FullAssignment]) -> Verdict {
    for i in 0..solver.len().max(oracle.len()) {
        match (solver.get(i), oracle.get(i)) {
            (Some(a), Some(b)) if a.mapping == b.mapping && approx_eq_rel(a.cost, b.cost, COST_RTOL) => {}
            _ => return Verdict::Disagree { rank: i + 1 },
        }
    }
    Verdict::Agree
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub verdict: Verdict,
    pub solver: Vec<FullAssignment>,
    pub oracle: Vec<FullAssignment>,
}

/// Solves without a time limit and enumerates every mapping that honors the
/// configured seeds.
pub fn verify(
    vertices: &VertexSet,
    points: &PointSet,
    model: &HypergraphModel,
    config: &SearchConfig,
) -> Result<VerifyReport> {
    let mut config = config.clone();
    config.time_limit = None;
    let solver = solve(vertices, points, model, &config)?.solutions;
    let oracle = top_k_seeded(vertices, points, model, config.top_k, &config.seeds)?;
    Ok(VerifyReport {
        verdict: compare(&solver, &oracle),
        solver,
        oracle,
    })
}
