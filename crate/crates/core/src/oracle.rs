//! Exhaustive enumeration oracle for small instances.
//!
//! Built only on [`objective_eval`] and lexicographic enumeration of injective
//! mappings, so it shares no code path with the branch-and-bound search.

use crate::error::{Error, Result};
use crate::objective::objective_eval;
use crate::tensor::{for_each_injective_tuple, HypergraphModel};
use crate::types::{FullAssignment, PointSet, SeedSet, VertexSet};

/// Largest number of mappings the oracle will enumerate.
pub const ENUMERATION_LIMIT: u128 = 10_000_000;

/// `n_points! / (n_points - n_vertices)!`, saturating.
pub fn mapping_count(n_vertices: usize, n_points: usize) -> u128 {
    if n_vertices > n_points {
        return 0;
    }
    ((n_points - n_vertices + 1)..=n_points).fold(1u128, |acc, x| acc.saturating_mul(x as u128))
}

fn check_sizes(vertices: &VertexSet, points: &PointSet, model: &HypergraphModel) -> Result<()> {
    if vertices.len() != model.n_vertices() {
        return Err(Error::DimensionMismatch {
            expected: model.n_vertices(),
            actual: vertices.len(),
        });
    }
    if points.len() != model.n_points() {
        return Err(Error::DimensionMismatch {
            expected: model.n_points(),
            actual: points.len(),
        });
    }
    if points.len() < vertices.len() {
        return Err(Error::InfeasibleSize {
            n_vertices: vertices.len(),
            n_points: points.len(),
        });
    }
    let count = mapping_count(vertices.len(), points.len());
    if count > ENUMERATION_LIMIT {
        return Err(Error::TooLarge {
            count,
            limit: ENUMERATION_LIMIT,
        });
    }
    Ok(())
}

/// The single lowest-cost mapping, ties broken lexicographically.
pub fn exhaustive_solve(vertices: &VertexSet, points: &PointSet, model: &HypergraphModel) -> Result<FullAssignment> {
    Ok(top_k_exhaustive(vertices, points, model, 1)?
        .pop()
        .expect("a feasible instance has at least one mapping"))
}

/// The `top_k` lowest-cost mappings in ascending cost, ties broken
/// lexicographically.
pub fn top_k_exhaustive(
    vertices: &VertexSet,
    points: &PointSet,
    model: &HypergraphModel,
    top_k: usize,
) -> Result<Vec<FullAssignment>> {
    top_k_filtered(vertices, points, model, top_k, |_| true)
}

/// As [`top_k_exhaustive`], restricted to mappings that honor `seeds`.
pub fn top_k_seeded(
    vertices: &VertexSet,
    points: &PointSet,
    model: &HypergraphModel,
    top_k: usize,
    seeds: &SeedSet,
) -> Result<Vec<FullAssignment>> {
    let fixed: Vec<(usize, usize)> = seeds.iter().collect();
    top_k_filtered(vertices, points, model, top_k, |m| {
        fixed.iter().all(|&(v, p)| m[v] == p)
    })
}

fn top_k_filtered(
    vertices: &VertexSet,
    points: &PointSet,
    model: &HypergraphModel,
    top_k: usize,
    keep: impl Fn(&[usize]) -> bool,
) -> Result<Vec<FullAssignment>> {
    check_sizes(vertices, points, model)?;
    if top_k == 0 {
        return Err(Error::InvalidInput("top_k must be at least 1".into()));
    }
    let mut best: Vec<FullAssignment> = Vec::with_capacity(top_k + 1);
    let mut failure = None;
    for_each_injective_tuple(points.len(), vertices.len(), |mapping| {
        if failure.is_some() || !keep(mapping) {
            return;
        }
        let cost = match objective_eval(model, mapping) {
            Ok(c) => c,
            Err(e) => {
                failure = Some(e);
                return;
            }
        };
        // Enumeration is lexicographic, so an equal-cost later mapping ranks after.
        if best.len() == top_k && cost >= best[top_k - 1].cost {
            return;
        }
        let candidate = FullAssignment {
            mapping: mapping.to_vec(),
            cost,
        };
        let pos = best.partition_point(|b| b.rank_cmp(&candidate).is_le());
        best.insert(pos, candidate);
        best.truncate(top_k);
    });
    match failure {
        Some(e) => Err(e),
        None => Ok(best),
    }
}
