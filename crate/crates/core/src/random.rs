//! Random hypergraph models for cross-checking the solver against the oracle.

use std::collections::HashSet;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::Result;
use crate::tensor::{for_each_injective_tuple, DissimilarityTensor, HyperedgeCost, HypergraphModel};

/// Shape of a random model.
#[derive(Debug, Clone)]
pub struct RandomModelSpec {
    pub n_vertices: usize,
    pub n_points: usize,
    /// Highest tensor degree generated (clamped to `n_vertices`).
    pub max_degree: usize,
    /// Probability that a given vertex tuple becomes a hyperedge.
    pub edge_probability: f64,
    /// At most this many hyperedges per degree.
    pub max_edges_per_degree: usize,
    /// Fraction of injective point tuples given a nonzero cost in sparse tensors.
    pub entry_fraction: f64,
    /// Degrees at or above this value are lazy, fully dense hashed costs.
    pub lazy_from_degree: Option<usize>,
    /// Costs are drawn uniformly from `[0, cost_scale)`.
    pub cost_scale: f64,
}

impl RandomModelSpec {
    pub fn new(n_vertices: usize, n_points: usize) -> Self {
        Self {
            n_vertices,
            n_points,
            max_degree: n_vertices,
            edge_probability: 0.5,
            max_edges_per_degree: 12,
            entry_fraction: 0.5,
            lazy_from_degree: None,
            cost_scale: 1.0,
        }
    }
}

fn combinations(n: usize, d: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, d: usize, buf: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if buf.len() == d {
            out.push(buf.clone());
            return;
        }
        for v in start..n {
            buf.push(v);
            rec(v + 1, n, d, buf, out);
            buf.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, d, &mut Vec::with_capacity(d), &mut out);
    out
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Deterministic pseudo-random cost in `[0, scale)` for any hyperedge entry.
#[derive(Debug, Clone, Copy)]
pub struct HashedCost {
    pub seed: u64,
    pub scale: f64,
}

impl HashedCost {
    pub fn value(&self, vertices: &[usize], points: &[usize]) -> f64 {
        let mut h = splitmix(self.seed);
        for (&v, &p) in vertices.iter().zip(points) {
            h = splitmix(h ^ ((v as u64) << 32 | p as u64));
        }
        (h >> 11) as f64 / (1u64 << 53) as f64 * self.scale
    }
}

impl HyperedgeCost for HashedCost {
    fn cost(&self, vertices: &[usize], points: &[usize]) -> f64 {
        self.value(vertices, points)
    }

    fn memoize(&self) -> bool {
        false
    }
}

/// Draws a random model with nonnegative costs.
pub fn random_model<R: Rng + ?Sized>(spec: &RandomModelSpec, rng: &mut R) -> Result<HypergraphModel> {
    let mut tensors = Vec::new();
    for degree in 1..=spec.max_degree.min(spec.n_vertices) {
        let mut edges: Vec<Vec<usize>> = combinations(spec.n_vertices, degree)
            .into_iter()
            .filter(|_| rng.gen_bool(spec.edge_probability))
            .collect();
        edges.shuffle(rng);
        edges.truncate(spec.max_edges_per_degree);
        if edges.is_empty() {
            continue;
        }
        if spec.lazy_from_degree.is_some_and(|d| degree >= d) {
            let hashed = HashedCost {
                seed: rng.gen(),
                scale: spec.cost_scale,
            };
            tensors.push(DissimilarityTensor::lazy(
                degree,
                spec.n_points,
                edges,
                Arc::new(hashed),
            )?);
            continue;
        }
        let mut tensor = DissimilarityTensor::sparse(degree, spec.n_points);
        let total = injective_count(spec.n_points, degree);
        let wanted = ((total as f64 * spec.entry_fraction).ceil() as usize).clamp(1, 256);
        for vertices in edges {
            for points in sample_injective_tuples(spec.n_points, degree, wanted, total, rng) {
                let entry: Vec<(usize, usize)> = vertices.iter().copied().zip(points).collect();
                tensor.insert(&entry, rng.gen::<f64>() * spec.cost_scale)?;
            }
        }
        tensors.push(tensor);
    }
    HypergraphModel::new(spec.n_vertices, spec.n_points, tensors)
}

fn injective_count(n: usize, d: usize) -> usize {
    (n - d + 1..=n).product()
}

/// `wanted` distinct injective `d`-tuples over `0..n`, uniformly at random.
fn sample_injective_tuples<R: Rng + ?Sized>(n: usize, d: usize, wanted: usize, total: usize, rng: &mut R) -> Vec<Vec<usize>> {
    let wanted = wanted.min(total);
    if total <= 4 * wanted {
        let mut all = Vec::with_capacity(total);
        for_each_injective_tuple(n, d, |p| all.push(p.to_vec()));
        all.shuffle(rng);
        all.truncate(wanted);
        return all;
    }
    let mut seen = HashSet::with_capacity(wanted);
    let mut out = Vec::with_capacity(wanted);
    let mut pool: Vec<usize> = (0..n).collect();
    while out.len() < wanted {
        let (picked, _) = pool.partial_shuffle(rng, d);
        let tuple = picked.to_vec();
        if seen.insert(tuple.clone()) {
            out.push(tuple);
        }
    }
    out
}

/// Divisors of `n` in ascending order.
pub fn divisors(n: usize) -> Vec<usize> {
    (1..=n).filter(|d| n % d == 0).collect()
}
