//! Domain types shared by the objective, the solver, and the oracle.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashSet};

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;

/// Default minimum separation between candidate points, in micrometers.
pub const DEFAULT_MIN_SEPARATION: f64 = 1e-6;

/// The unlabeled candidate point cloud.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSet {
    points: Vec<Vec3>,
}

impl PointSet {
    pub fn new(points: Vec<Vec3>) -> Result<Self> {
        Self::with_min_separation(points, DEFAULT_MIN_SEPARATION)
    }

    /// Builds a point set, rejecting non-finite coordinates and pairs of points
    /// closer than `min_separation`.
    pub fn with_min_separation(points: Vec<Vec3>, min_separation: f64) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidInput("point set is empty".into()));
        }
        for (i, p) in points.iter().enumerate() {
            if !p.iter().all(|c| c.is_finite()) {
                return Err(Error::InvalidInput(format!("point {i} has a non-finite coordinate")));
            }
        }
        for i in 0..points.len() {
            for j in i + 1..points.len() {
                if (points[i] - points[j]).norm() < min_separation {
                    return Err(Error::InvalidInput(format!(
                        "points {i} and {j} are closer than {min_separation}"
                    )));
                }
            }
        }
        Ok(Self { points })
    }

    /// Point set for index-only problems where coordinates are irrelevant.
    pub fn placeholder(n: usize) -> Self {
        Self {
            points: (0..n).map(|i| Vec3::new(i as f64, 0.0, 0.0)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Vec3] {
        &self.points
    }

    pub fn get(&self, index: usize) -> Vec3 {
        self.points[index]
    }
}

/// Ordered, named vertices of the reference hypergraph. The order is the
/// branch order of the search.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VertexSet {
    labels: Vec<String>,
}

impl VertexSet {
    pub fn new(labels: Vec<String>) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::InvalidInput("vertex set is empty".into()));
        }
        let mut seen = HashSet::new();
        for l in &labels {
            if !seen.insert(l.as_str()) {
                return Err(Error::InvalidInput(format!("duplicate vertex label {l}")));
            }
        }
        Ok(Self { labels })
    }

    /// Vertices named `v0`, `v1`, ...
    pub fn anonymous(n: usize) -> Self {
        Self {
            labels: (0..n).map(|i| format!("v{i}")).collect(),
        }
    }

    /// Seam cell names ordered tail to head, left before right within a pair.
    /// Ten pairs give the 20-nucleus posture; eleven pairs insert the Q
    /// neuroblasts after V5.
    pub fn seam_cells(n_pairs: usize) -> Result<Self> {
        let names: &[&str] = match n_pairs {
            10 => &["T", "V6", "V5", "V4", "V3", "V2", "V1", "H2", "H1", "H0"],
            11 => &["T", "V6", "V5", "Q", "V4", "V3", "V2", "V1", "H2", "H1", "H0"],
            _ => {
                return Err(Error::InvalidInput(format!(
                    "seam cell postures have 10 or 11 pairs, got {n_pairs}"
                )))
            }
        };
        let labels = names
            .iter()
            .flat_map(|n| [format!("{n}L"), format!("{n}R")])
            .collect();
        Self::new(labels)
    }

    /// Generic paired names `P0L, P0R, P1L, ...` for postures of any length.
    pub fn pairs(n_pairs: usize) -> Self {
        Self {
            labels: (0..n_pairs)
                .flat_map(|i| [format!("P{i}L"), format!("P{i}R")])
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }
}

/// Fixed vertex to point correspondences supplied before the search.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedSet {
    fixed: BTreeMap<usize, usize>,
}

impl SeedSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a seed. Rejects a vertex seeded twice with different points and a
    /// point seeded to two vertices.
    pub fn insert(&mut self, vertex: usize, point: usize) -> Result<()> {
        if let Some(&p) = self.fixed.get(&vertex) {
            if p != point {
                return Err(Error::SeedConflict(format!(
                    "vertex {vertex} seeded to both {p} and {point}"
                )));
            }
            return Ok(());
        }
        if let Some((&v, _)) = self.fixed.iter().find(|(_, &p)| p == point) {
            return Err(Error::SeedConflict(format!(
                "point {point} seeded to vertices {v} and {vertex}"
            )));
        }
        self.fixed.insert(vertex, point);
        Ok(())
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut seeds = Self::new();
        for (v, p) in pairs {
            seeds.insert(v, p)?;
        }
        Ok(seeds)
    }

    pub fn len(&self) -> usize {
        self.fixed.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fixed.is_empty()
    }

    pub fn get(&self, vertex: usize) -> Option<usize> {
        self.fixed.get(&vertex).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.fixed.iter().map(|(&v, &p)| (v, p))
    }
}

/// The first `m * k` vertices committed to distinct points.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartialAssignment {
    committed: Vec<usize>,
    branch_size: usize,
}

impl PartialAssignment {
    pub fn empty(branch_size: usize) -> Self {
        Self {
            committed: Vec::new(),
            branch_size,
        }
    }

    pub fn new(committed: Vec<usize>, branch_size: usize) -> Result<Self> {
        if branch_size == 0 {
            return Err(Error::InvalidInput("branch size must be positive".into()));
        }
        if committed.len() % branch_size != 0 {
            return Err(Error::BranchOrderViolation {
                branch: committed.len() / branch_size + 1,
                expected: (committed.len() / branch_size + 1) * branch_size,
                actual: committed.len(),
            });
        }
        check_distinct(&committed)?;
        Ok(Self {
            committed,
            branch_size,
        })
    }

    pub fn committed(&self) -> &[usize] {
        &self.committed
    }

    pub fn branch_size(&self) -> usize {
        self.branch_size
    }

    /// Number of completed branches.
    pub fn branches(&self) -> usize {
        self.committed.len() / self.branch_size
    }

    pub fn contains(&self, point: usize) -> bool {
        self.committed.contains(&point)
    }

    /// Appends one branch worth of points.
    pub fn extend(&self, tuple: &[usize]) -> Result<Self> {
        if tuple.len() != self.branch_size {
            return Err(Error::DimensionMismatch {
                expected: self.branch_size,
                actual: tuple.len(),
            });
        }
        let mut committed = self.committed.clone();
        committed.extend_from_slice(tuple);
        check_distinct(&committed)?;
        Ok(Self {
            committed,
            branch_size: self.branch_size,
        })
    }
}

/// A complete one-to-one mapping from vertices to points with its objective value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FullAssignment {
    pub mapping: Vec<usize>,
    pub cost: f64,
}

impl FullAssignment {
    /// Ascending cost, ties broken lexicographically by mapping.
    pub fn rank_cmp(&self, other: &Self) -> Ordering {
        self.cost
            .total_cmp(&other.cost)
            .then_with(|| self.mapping.cmp(&other.mapping))
    }
}

pub(crate) fn check_distinct(points: &[usize]) -> Result<()> {
    for (i, p) in points.iter().enumerate() {
        if points[..i].contains(p) {
            return Err(Error::DuplicatePoint(*p));
        }
    }
    Ok(())
}
