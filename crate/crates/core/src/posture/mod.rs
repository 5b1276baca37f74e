//! Seam cell postures, their feature groups, and the hypergraph models built
//! from them.
//!
//! Vertex `2i` is the left nucleus of pair `i` and vertex `2i + 1` the right
//! one, pairs ordered tail to head. Each feature group lives on one hyperedge
//! and is scored as a single multivariate Gaussian against a template bin.

pub mod features;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fitting::TemplateBin;
use crate::tensor::{DissimilarityTensor, HyperedgeCost, HypergraphModel};
use crate::types::{PointSet, Vec3, VertexSet};

use features::*;

/// Cost given to a hypothesis whose features cannot be computed.
pub const DEFAULT_DEGENERATE_PENALTY: f64 = 1e12;

/// Handedness convention for the two twist features. `Left` flips their sign.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Chirality {
    #[default]
    Right,
    Left,
}

impl Chirality {
    fn sign(self) -> f64 {
        match self {
            Chirality::Right => 1.0,
            Chirality::Left => -1.0,
        }
    }
}

impl FromStr for Chirality {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "right" => Ok(Chirality::Right),
            "left" => Ok(Chirality::Left),
            _ => Err(Error::InvalidInput(format!("unknown chirality {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    /// Pair widths and side chords only.
    Sides,
    /// Sides plus features over two and three successive pairs.
    Pairs,
    /// Pairs plus posture-wide sums of every pair feature.
    Posture,
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::Sides => "sides",
            ModelKind::Pairs => "pairs",
            ModelKind::Posture => "posture",
        })
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sides" => Ok(ModelKind::Sides),
            "pairs" => Ok(ModelKind::Pairs),
            "posture" => Ok(ModelKind::Posture),
            _ => Err(Error::InvalidInput(format!("unknown model {s:?}"))),
        }
    }
}

/// A seam cell posture: left and right nuclei, tail to head.
#[derive(Debug, Clone, PartialEq)]
pub struct Posture {
    left: Vec<Vec3>,
    right: Vec<Vec3>,
}

impl Posture {
    pub fn new(left: Vec<Vec3>, right: Vec<Vec3>) -> Result<Self> {
        if left.len() != right.len() {
            return Err(Error::DimensionMismatch {
                expected: left.len(),
                actual: right.len(),
            });
        }
        if left.len() < 2 {
            return Err(Error::InvalidInput("a posture needs at least two pairs".into()));
        }
        if left.iter().chain(&right).any(|p| !p.iter().all(|c| c.is_finite())) {
            return Err(Error::InvalidInput("non-finite coordinate in posture".into()));
        }
        Ok(Self { left, right })
    }

    /// From coordinates in vertex order `L0, R0, L1, R1, ...`.
    pub fn from_interleaved(coords: &[Vec3]) -> Result<Self> {
        if coords.len() % 2 != 0 {
            return Err(Error::InvalidInput("odd number of posture nuclei".into()));
        }
        Self::new(
            coords.iter().step_by(2).copied().collect(),
            coords.iter().skip(1).step_by(2).copied().collect(),
        )
    }

    pub fn n_pairs(&self) -> usize {
        self.left.len()
    }

    pub fn left(&self) -> &[Vec3] {
        &self.left
    }

    pub fn right(&self) -> &[Vec3] {
        &self.right
    }

    pub fn midpoints(&self) -> Vec<Vec3> {
        self.left.iter().zip(&self.right).map(|(&l, &r)| midpoint(l, r)).collect()
    }

    pub fn interleaved(&self) -> Vec<Vec3> {
        self.left.iter().zip(&self.right).flat_map(|(&l, &r)| [l, r]).collect()
    }

    /// Applies `f` to every nucleus.
    pub fn map(&self, f: impl Fn(Vec3) -> Vec3) -> Self {
        Self {
            left: self.left.iter().map(|&p| f(p)).collect(),
            right: self.right.iter().map(|&p| f(p)).collect(),
        }
    }
}

/// The five features between pair `i` and pair `i + 1`: width ratio, midpoint
/// chord, side cosine, lateral twist, and axial twist.
pub fn pair_step(l: [Vec3; 2], r: [Vec3; 2], chirality: Chirality) -> Result<[f64; 5]> {
    let pdr = pair_distance_ratio(pair_distance(l[0], r[0]), pair_distance(l[1], r[1]))?;
    let md = midpoint_distance(midpoint(l[0], r[0]), midpoint(l[1], r[1]));
    let phi = side_cosine(l[0], l[1], r[0], r[1])?;
    let s = chirality.sign();
    let psi = s * lateral_twist(l[0], r[0], l[1], r[1])?;
    let tau = s * axial_twist(l[0], r[0], l[1], r[1])?;
    Ok([pdr, md, phi, psi, tau])
}

/// Midpoint bend and planar angle over pairs `i`, `i + 1`, `i + 2`.
pub fn triple_step(l: [Vec3; 3], r: [Vec3; 3]) -> Result<[f64; 2]> {
    let m: Vec<Vec3> = (0..3).map(|j| midpoint(l[j], r[j])).collect();
    Ok([midpoint_bend(m[0], m[1], m[2])?, planar_angle(l, r)?])
}

/// Posture-wide totals of the seven pair features, in the order of
/// [`SUM_NAMES`].
pub fn posture_sums(posture: &Posture, chirality: Chirality) -> Result<[f64; 7]> {
    let (l, r) = (posture.left(), posture.right());
    let mut sums = [0.0; 7];
    for i in 0..posture.n_pairs() - 1 {
        let step = pair_step([l[i], l[i + 1]], [r[i], r[i + 1]], chirality)?;
        for (s, v) in sums.iter_mut().zip(step) {
            *s += v;
        }
    }
    for i in 0..posture.n_pairs().saturating_sub(2) {
        let [theta, zeta] = triple_step([l[i], l[i + 1], l[i + 2]], [r[i], r[i + 1], r[i + 2]])?;
        sums[5] += theta;
        sums[6] += zeta;
    }
    Ok(sums)
}

pub const PAIR_STEP_NAMES: [&str; 5] = ["PDR", "MD", "phi", "psi", "tau"];
pub const TRIPLE_STEP_NAMES: [&str; 2] = ["Theta", "zeta"];
pub const SUM_NAMES: [&str; 7] = [
    "sum_PDR", "sum_MD", "sum_phi", "sum_psi", "sum_tau", "sum_Theta", "sum_zeta",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GroupKind {
    PairDistance(usize),
    LeftChord(usize),
    RightChord(usize),
    PairStep(usize),
    TripleStep(usize),
    PostureSums,
}

/// Features scored jointly on one hyperedge.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureGroup {
    pub kind: GroupKind,
    /// Template lookup key, e.g. `pair[3]`.
    pub key: String,
    pub names: Vec<String>,
    /// Hyperedge vertices, ascending.
    pub vertices: Vec<usize>,
}

impl FeatureGroup {
    fn new(kind: GroupKind, n_pairs: usize) -> Self {
        let indexed = |prefix: &str, names: &[&str], i: usize| {
            (
                format!("{prefix}[{i}]"),
                names.iter().map(|n| format!("{n}_{i}")).collect::<Vec<_>>(),
            )
        };
        let ((key, names), vertices): ((String, Vec<String>), Vec<usize>) = match kind {
            GroupKind::PairDistance(i) => (indexed("PD", &["PD"], i), vec![2 * i, 2 * i + 1]),
            GroupKind::LeftChord(i) => (indexed("Lchord", &["Lchord"], i), vec![2 * i, 2 * i + 2]),
            GroupKind::RightChord(i) => (indexed("Rchord", &["Rchord"], i), vec![2 * i + 1, 2 * i + 3]),
            GroupKind::PairStep(i) => (indexed("pair", &PAIR_STEP_NAMES, i), (2 * i..2 * i + 4).collect()),
            GroupKind::TripleStep(i) => (indexed("triple", &TRIPLE_STEP_NAMES, i), (2 * i..2 * i + 6).collect()),
            GroupKind::PostureSums => (
                ("posture".to_string(), SUM_NAMES.iter().map(|s| s.to_string()).collect()),
                (0..2 * n_pairs).collect(),
            ),
        };
        Self {
            kind,
            key,
            names,
            vertices,
        }
    }

    pub fn degree(&self) -> usize {
        self.vertices.len()
    }

    /// Feature values given the coordinates assigned to [`Self::vertices`].
    pub fn evaluate(&self, coords: &[Vec3], chirality: Chirality) -> Result<Vec<f64>> {
        if coords.len() != self.vertices.len() {
            return Err(Error::DimensionMismatch {
                expected: self.vertices.len(),
                actual: coords.len(),
            });
        }
        let c = coords;
        Ok(match self.kind {
            GroupKind::PairDistance(_) | GroupKind::LeftChord(_) | GroupKind::RightChord(_) => {
                vec![(c[1] - c[0]).norm()]
            }
            GroupKind::PairStep(_) => pair_step([c[0], c[2]], [c[1], c[3]], chirality)?.to_vec(),
            GroupKind::TripleStep(_) => triple_step([c[0], c[2], c[4]], [c[1], c[3], c[5]])?.to_vec(),
            GroupKind::PostureSums => posture_sums(&Posture::from_interleaved(c)?, chirality)?.to_vec(),
        })
    }
}

/// Every feature group of `model` on a posture with `n_pairs` pairs.
pub fn feature_groups(model: ModelKind, n_pairs: usize) -> Vec<FeatureGroup> {
    let mut kinds = Vec::new();
    kinds.extend((0..n_pairs).map(GroupKind::PairDistance));
    for i in 0..n_pairs.saturating_sub(1) {
        kinds.push(GroupKind::LeftChord(i));
        kinds.push(GroupKind::RightChord(i));
    }
    if model != ModelKind::Sides {
        kinds.extend((0..n_pairs.saturating_sub(1)).map(GroupKind::PairStep));
        kinds.extend((0..n_pairs.saturating_sub(2)).map(GroupKind::TripleStep));
    }
    if model == ModelKind::Posture {
        kinds.push(GroupKind::PostureSums);
    }
    kinds.into_iter().map(|k| FeatureGroup::new(k, n_pairs)).collect()
}

/// Feature values of every group of `model` on a known posture.
pub fn posture_features(
    model: ModelKind,
    posture: &Posture,
    chirality: Chirality,
) -> Result<Vec<(FeatureGroup, Vec<f64>)>> {
    let coords = posture.interleaved();
    feature_groups(model, posture.n_pairs())
        .into_iter()
        .map(|g| {
            let picked: Vec<Vec3> = g.vertices.iter().map(|&v| coords[v]).collect();
            let values = g.evaluate(&picked, chirality)?;
            Ok((g, values))
        })
        .collect()
}

/// How [`build_model`] turns a template bin into tensors.
#[derive(Debug, Clone, Copy)]
pub struct BuildOptions {
    /// Branch size of the intended search. Degrees up to twice this are
    /// materialized, higher degrees are evaluated on demand.
    pub branch_size: usize,
    pub chirality: Chirality,
    pub degenerate_penalty: f64,
}

impl Default for BuildOptions {
    fn default() -> Self {
        Self {
            branch_size: 2,
            chirality: Chirality::Right,
            degenerate_penalty: DEFAULT_DEGENERATE_PENALTY,
        }
    }
}

struct Scorer {
    group: FeatureGroup,
    mean: Vec<f64>,
    /// Row-major inverse covariance.
    inverse: Vec<f64>,
}

impl Scorer {
    fn mahalanobis(&self, values: &[f64]) -> f64 {
        let n = self.mean.len();
        let mut small = [0.0; 8];
        let mut large = Vec::new();
        let d = if n <= small.len() {
            &mut small[..n]
        } else {
            large.resize(n, 0.0);
            &mut large[..]
        };
        for (di, (v, m)) in d.iter_mut().zip(values.iter().zip(&self.mean)) {
            *di = v - m;
        }
        let mut total = 0.0;
        for (i, row) in self.inverse.chunks_exact(n).enumerate() {
            total += d[i] * row.iter().zip(d.iter()).map(|(a, b)| a * b).sum::<f64>();
        }
        total.max(0.0)
    }
}

struct PostureCost {
    points: Vec<Vec3>,
    scorers: Vec<Scorer>,
    by_edge: BTreeMap<Vec<usize>, Vec<usize>>,
    chirality: Chirality,
    penalty: f64,
}

impl HyperedgeCost for PostureCost {
    fn cost(&self, vertices: &[usize], points: &[usize]) -> f64 {
        let Some(groups) = self.by_edge.get(vertices) else {
            return 0.0;
        };
        let mut buf = [Vec3::zeros(); 8];
        let owned: Vec<Vec3>;
        let coords = if points.len() <= buf.len() {
            for (slot, &p) in buf.iter_mut().zip(points) {
                *slot = self.points[p];
            }
            &buf[..points.len()]
        } else {
            owned = points.iter().map(|&p| self.points[p]).collect();
            &owned[..]
        };
        let mut total = 0.0;
        for &g in groups {
            let s = &self.scorers[g];
            let c = match s.group.evaluate(coords, self.chirality) {
                Ok(values) => s.mahalanobis(&values),
                Err(_) => self.penalty,
            };
            total += if c.is_finite() { c.min(self.penalty) } else { self.penalty };
        }
        total
    }
}

/// Builds the hypergraph model that scores assignments of the posture
/// vertices in `vertices` onto `points` against one template bin.
pub fn build_model(
    model: ModelKind,
    vertices: &VertexSet,
    points: &PointSet,
    bin: &TemplateBin,
    options: &BuildOptions,
) -> Result<HypergraphModel> {
    if vertices.len() % 2 != 0 || vertices.len() < 4 {
        return Err(Error::InvalidInput(format!(
            "posture models need an even number of at least 4 vertices, got {}",
            vertices.len()
        )));
    }
    if options.branch_size == 0 {
        return Err(Error::InvalidInput("branch size must be positive".into()));
    }
    let n_pairs = vertices.len() / 2;
    let mut scorers = Vec::new();
    for group in feature_groups(model, n_pairs) {
        let stats = bin
            .groups
            .get(&group.key)
            .ok_or_else(|| Error::TemplateMismatch(format!("template has no group {}", group.key)))?;
        if stats.names != group.names {
            return Err(Error::TemplateMismatch(format!(
                "group {} has features {:?}, expected {:?}",
                group.key, stats.names, group.names
            )));
        }
        let n = group.names.len();
        if stats.mean.len() != n || stats.inverse.len() != n * n {
            return Err(Error::TemplateMismatch(format!("group {} has the wrong dimensions", group.key)));
        }
        scorers.push(Scorer {
            mean: stats.mean.clone(),
            inverse: stats.inverse.clone(),
            group,
        });
    }
    let mut by_edge: BTreeMap<Vec<usize>, Vec<usize>> = BTreeMap::new();
    for (i, s) in scorers.iter().enumerate() {
        by_edge.entry(s.group.vertices.clone()).or_default().push(i);
    }
    let mut by_degree: BTreeMap<usize, Vec<Vec<usize>>> = BTreeMap::new();
    for edge in by_edge.keys() {
        by_degree.entry(edge.len()).or_default().push(edge.clone());
    }
    let cost = Arc::new(PostureCost {
        points: points.points().to_vec(),
        scorers,
        by_edge,
        chirality: options.chirality,
        penalty: options.degenerate_penalty,
    });
    let mut tensors = Vec::new();
    for (degree, edges) in by_degree {
        tensors.push(if degree <= 2 * options.branch_size {
            DissimilarityTensor::materialize(degree, points.len(), edges, cost.as_ref())?
        } else {
            DissimilarityTensor::lazy(degree, points.len(), edges, cost.clone())?
        });
    }
    HypergraphModel::new(vertices.len(), points.len(), tensors)
}
