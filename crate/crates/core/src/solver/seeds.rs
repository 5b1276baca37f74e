use crate::error::{Error, Result};
use crate::types::{PartialAssignment, PointSet, SeedSet, VertexSet};

/// Turns seeds into the forced prefix of the search. Seeds must fix exactly
/// the vertices of whole leading branches.
pub fn apply_seeds(
    seeds: &SeedSet,
    vertices: &VertexSet,
    points: &PointSet,
    branch_size: usize,
) -> Result<PartialAssignment> {
    if branch_size == 0 {
        return Err(Error::InvalidInput("branch size must be positive".into()));
    }
    let mut committed = Vec::with_capacity(seeds.len());
    for (expected, (vertex, point)) in seeds.iter().enumerate() {
        if vertex >= vertices.len() {
            return Err(Error::SeedConflict(format!(
                "vertex {vertex} is outside the {} vertices",
                vertices.len()
            )));
        }
        if point >= points.len() {
            return Err(Error::SeedConflict(format!(
                "point {point} is outside the {} points",
                points.len()
            )));
        }
        if vertex != expected {
            return Err(Error::SeedNotPrefix(format!(
                "vertex {} is not seeded but vertex {} is",
                vertices.labels()[expected],
                vertices.labels()[vertex]
            )));
        }
        committed.push(point);
    }
    if committed.len() % branch_size != 0 {
        return Err(Error::SeedNotPrefix(format!(
            "{} seeds do not fill whole branches of size {branch_size}",
            committed.len()
        )));
    }
    PartialAssignment::new(committed, branch_size).map_err(|e| match e {
        Error::DuplicatePoint(p) => Error::SeedConflict(format!("point {p} seeded twice")),
        other => other,
    })
}
