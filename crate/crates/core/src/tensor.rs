//! Sparse dissimilarity tensors and the hypergraph model that bundles them.
//!
//! A tensor of degree `d` stores costs for a set of hyperedges, each a strictly
//! increasing tuple of `d` vertex indices. The cost of a hyperedge depends on
//! the `d` points assigned to its vertices. Hyperedges absent from a tensor
//! contribute nothing to the objective.
//!
//! Costs are either materialized before the search (a dense table over point
//! tuples, or a sparse map) or produced on demand by a [`HyperedgeCost`]
//! evaluator. On-demand costs go through a [`LazyCache`] that lives for the
//! duration of one solve.

use std::fmt;
use std::hash::BuildHasher;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use lru::LruCache;
use rustc_hash::{FxBuildHasher, FxHashMap};

use crate::error::{Error, Result};

/// Largest dense table stored for a single hyperedge, in entries.
const DENSE_LIMIT: usize = 1 << 20;

/// Default capacity of the lazy-entry cache.
pub const DEFAULT_CACHE_CAPACITY: usize = 1 << 24;

const CACHE_SHARDS: usize = 16;

/// Computes the cost of one hyperedge under a hypothesized point tuple.
///
/// `vertices` is the strictly increasing vertex tuple of the hyperedge and
/// `points[j]` the point assigned to `vertices[j]`. Returned costs must be
/// finite and nonnegative.
pub trait HyperedgeCost: Send + Sync {
    fn cost(&self, vertices: &[usize], points: &[usize]) -> f64;

    /// Whether results are worth caching. Evaluators about as cheap as a
    /// cache lookup should return false.
    fn memoize(&self) -> bool {
        true
    }
}

impl<F> HyperedgeCost for F
where
    F: Fn(&[usize], &[usize]) -> f64 + Send + Sync,
{
    fn cost(&self, vertices: &[usize], points: &[usize]) -> f64 {
        self(vertices, points)
    }
}

enum EdgeTable {
    Dense(Box<[f64]>),
    Sparse(FxHashMap<Box<[usize]>, f64>),
    Lazy,
}

struct Hyperedge {
    vertices: Box<[usize]>,
    table: EdgeTable,
}

/// Degree-`d` dissimilarity tensor.
pub struct DissimilarityTensor {
    degree: usize,
    n_points: usize,
    edges: Vec<Hyperedge>,
    evaluator: Option<Arc<dyn HyperedgeCost>>,
}

impl fmt::Debug for DissimilarityTensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DissimilarityTensor")
            .field("degree", &self.degree)
            .field("hyperedges", &self.edges.len())
            .field("lazy", &self.is_lazy())
            .finish()
    }
}

impl DissimilarityTensor {
    /// Empty sparse tensor over `n_points` candidate points.
    pub fn sparse(degree: usize, n_points: usize) -> Self {
        assert!(degree >= 1, "tensor degree must be positive");
        Self {
            degree,
            n_points,
            edges: Vec::new(),
            evaluator: None,
        }
    }

    /// Sets the cost of one entry, given as `(vertex, point)` pairs in any order.
    pub fn insert(&mut self, entry: &[(usize, usize)], cost: f64) -> Result<()> {
        if self.evaluator.is_some() {
            return Err(Error::InvalidInput("cannot insert into a lazy tensor".into()));
        }
        if entry.len() != self.degree {
            return Err(Error::DimensionMismatch {
                expected: self.degree,
                actual: entry.len(),
            });
        }
        check_cost(cost)?;
        let mut sorted = entry.to_vec();
        sorted.sort_unstable();
        let vertices: Vec<usize> = sorted.iter().map(|&(v, _)| v).collect();
        let points: Vec<usize> = sorted.iter().map(|&(_, p)| p).collect();
        if vertices.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidInput(format!(
                "entry repeats a vertex: {vertices:?}"
            )));
        }
        crate::types::check_distinct(&points)?;
        if let Some(&p) = points.iter().find(|&&p| p >= self.n_points) {
            return Err(Error::InvalidInput(format!(
                "point {p} out of range for {} points",
                self.n_points
            )));
        }
        let idx = match self
            .edges
            .binary_search_by(|e| e.vertices.as_ref().cmp(vertices.as_slice()))
        {
            Ok(i) => i,
            Err(i) => {
                self.edges.insert(
                    i,
                    Hyperedge {
                        vertices: vertices.into_boxed_slice(),
                        table: EdgeTable::Sparse(FxHashMap::default()),
                    },
                );
                i
            }
        };
        match &mut self.edges[idx].table {
            EdgeTable::Sparse(map) => {
                map.insert(points.into_boxed_slice(), cost);
            }
            _ => unreachable!("sparse tensors hold sparse tables"),
        }
        Ok(())
    }

    /// Tensor whose hyperedge costs are computed on demand during the search.
    pub fn lazy(
        degree: usize,
        n_points: usize,
        hyperedges: Vec<Vec<usize>>,
        evaluator: Arc<dyn HyperedgeCost>,
    ) -> Result<Self> {
        let vertex_tuples = normalize_hyperedges(degree, hyperedges)?;
        Ok(Self {
            degree,
            n_points,
            edges: vertex_tuples
                .into_iter()
                .map(|v| Hyperedge {
                    vertices: v.into_boxed_slice(),
                    table: EdgeTable::Lazy,
                })
                .collect(),
            evaluator: Some(evaluator),
        })
    }

    /// Evaluates `evaluator` on every injective point tuple of every hyperedge
    /// and stores the results.
    pub fn materialize(
        degree: usize,
        n_points: usize,
        hyperedges: Vec<Vec<usize>>,
        evaluator: &dyn HyperedgeCost,
    ) -> Result<Self> {
        let vertex_tuples = normalize_hyperedges(degree, hyperedges)?;
        let dense_len = n_points.checked_pow(degree as u32).filter(|&n| n <= DENSE_LIMIT);
        let mut edges = Vec::with_capacity(vertex_tuples.len());
        for vertices in vertex_tuples {
            let table = match dense_len {
                Some(len) => {
                    let mut values = vec![0.0; len].into_boxed_slice();
                    let mut failure = None;
                    for_each_injective_tuple(n_points, degree, |points| {
                        if failure.is_some() {
                            return;
                        }
                        let c = evaluator.cost(&vertices, points);
                        if let Err(e) = check_cost(c) {
                            failure = Some(e);
                        }
                        values[dense_index(points, n_points)] = c;
                    });
                    if let Some(e) = failure {
                        return Err(e);
                    }
                    EdgeTable::Dense(values)
                }
                None => {
                    let mut map = FxHashMap::default();
                    let mut failure = None;
                    for_each_injective_tuple(n_points, degree, |points| {
                        if failure.is_some() {
                            return;
                        }
                        let c = evaluator.cost(&vertices, points);
                        if let Err(e) = check_cost(c) {
                            failure = Some(e);
                        }
                        if c != 0.0 {
                            map.insert(points.to_vec().into_boxed_slice(), c);
                        }
                    });
                    if let Some(e) = failure {
                        return Err(e);
                    }
                    EdgeTable::Sparse(map)
                }
            };
            edges.push(Hyperedge {
                vertices: vertices.into_boxed_slice(),
                table,
            });
        }
        Ok(Self {
            degree,
            n_points,
            edges,
            evaluator: None,
        })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn is_lazy(&self) -> bool {
        self.evaluator.is_some()
    }

    pub fn hyperedge_count(&self) -> usize {
        self.edges.len()
    }

    /// Vertex tuples of all hyperedges, in lexicographic order.
    pub fn hyperedges(&self) -> impl Iterator<Item = &[usize]> + '_ {
        self.edges.iter().map(|e| e.vertices.as_ref())
    }

    pub(crate) fn edge_vertices(&self, edge: usize) -> &[usize] {
        &self.edges[edge].vertices
    }

    /// Cost of the entry `(vertices[j] -> points[j])`; zero when the hyperedge
    /// is not part of the tensor. Lazy entries are computed without caching.
    pub fn entry(&self, vertices: &[usize], points: &[usize]) -> f64 {
        match self.edges.binary_search_by(|e| e.vertices.as_ref().cmp(vertices)) {
            Ok(i) => self.edge_cost(i, points, None),
            Err(_) => 0.0,
        }
    }

    /// Cost of hyperedge `edge` under `points`, consulting `cache` for lazy entries.
    pub(crate) fn edge_cost(&self, edge: usize, points: &[usize], cache: Option<&LazyCache>) -> f64 {
        let e = &self.edges[edge];
        match &e.table {
            EdgeTable::Dense(values) => values[dense_index(points, self.n_points)],
            EdgeTable::Sparse(map) => map.get(points).copied().unwrap_or(0.0),
            EdgeTable::Lazy => {
                let evaluator = self.evaluator.as_ref().expect("lazy tensors carry an evaluator");
                match cache.filter(|_| evaluator.memoize()) {
                    Some(cache) => cache.get_or_compute(self.degree, edge, points, || {
                        evaluator.cost(&e.vertices, points)
                    }),
                    None => evaluator.cost(&e.vertices, points),
                }
            }
        }
    }
}

fn check_cost(cost: f64) -> Result<()> {
    if cost.is_finite() && cost >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidCost { value: cost })
    }
}

fn normalize_hyperedges(degree: usize, mut hyperedges: Vec<Vec<usize>>) -> Result<Vec<Vec<usize>>> {
    for h in &mut hyperedges {
        if h.len() != degree {
            return Err(Error::DimensionMismatch {
                expected: degree,
                actual: h.len(),
            });
        }
        h.sort_unstable();
        if h.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidInput(format!("hyperedge repeats a vertex: {h:?}")));
        }
    }
    hyperedges.sort();
    hyperedges.dedup();
    Ok(hyperedges)
}

#[inline]
fn dense_index(points: &[usize], n_points: usize) -> usize {
    points.iter().rev().fold(0, |acc, &p| acc * n_points + p)
}

/// Calls `f` on every ordered tuple of `len` distinct indices below `n`, in
/// lexicographic order.
pub fn for_each_injective_tuple(n: usize, len: usize, mut f: impl FnMut(&[usize])) {
    fn rec(n: usize, len: usize, used: &mut [bool], buf: &mut Vec<usize>, f: &mut impl FnMut(&[usize])) {
        if buf.len() == len {
            f(buf);
            return;
        }
        for p in 0..n {
            if !used[p] {
                used[p] = true;
                buf.push(p);
                rec(n, len, used, buf, f);
                buf.pop();
                used[p] = false;
            }
        }
    }
    if len > n {
        return;
    }
    let mut used = vec![false; n];
    let mut buf = Vec::with_capacity(len);
    rec(n, len, &mut used, &mut buf, &mut f);
}

/// The full set of dissimilarity tensors for an `n_vertices` to `n_points`
/// matching problem. At most one tensor per degree.
#[derive(Debug)]
pub struct HypergraphModel {
    n_vertices: usize,
    n_points: usize,
    tensors: Vec<DissimilarityTensor>,
}

impl HypergraphModel {
    pub fn new(n_vertices: usize, n_points: usize, mut tensors: Vec<DissimilarityTensor>) -> Result<Self> {
        if n_vertices == 0 {
            return Err(Error::InvalidInput("model has no vertices".into()));
        }
        tensors.sort_by_key(|t| t.degree);
        for w in tensors.windows(2) {
            if w[0].degree == w[1].degree {
                return Err(Error::InvalidInput(format!(
                    "more than one tensor of degree {}",
                    w[0].degree
                )));
            }
        }
        for t in &tensors {
            if t.degree > n_vertices {
                return Err(Error::DegreeOutOfRange {
                    degree: t.degree,
                    n_vertices,
                });
            }
            if t.n_points != n_points {
                return Err(Error::DimensionMismatch {
                    expected: n_points,
                    actual: t.n_points,
                });
            }
            if let Some(e) = t.edges.iter().find(|e| e.vertices.iter().any(|&v| v >= n_vertices)) {
                return Err(Error::InvalidInput(format!(
                    "hyperedge {:?} references a vertex beyond {n_vertices}",
                    e.vertices
                )));
            }
        }
        Ok(Self {
            n_vertices,
            n_points,
            tensors,
        })
    }

    pub fn n_vertices(&self) -> usize {
        self.n_vertices
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    /// Tensors in ascending degree.
    pub fn tensors(&self) -> &[DissimilarityTensor] {
        &self.tensors
    }

    pub fn tensor(&self, degree: usize) -> Option<&DissimilarityTensor> {
        self.tensors.iter().find(|t| t.degree == degree)
    }

    pub fn max_degree(&self) -> usize {
        self.tensors.iter().map(|t| t.degree).max().unwrap_or(0)
    }
}

#[derive(Clone, PartialEq, Eq, Hash)]
struct CacheKey {
    degree: usize,
    edge: usize,
    points: PackedTuple,
}

/// Point tuples of up to 16 indices below 255 are packed bytewise so that
/// the hot path does not allocate. The degree is part of the key, so packing
/// is unambiguous.
#[derive(Clone, PartialEq, Eq, Hash)]
enum PackedTuple {
    Inline(u128),
    Heap(Box<[usize]>),
}

impl PackedTuple {
    fn new(points: &[usize]) -> Self {
        if points.len() <= 16 && points.iter().all(|&p| p < 255) {
            let packed = points.iter().fold(0u128, |acc, &p| (acc << 8) | (p as u128 + 1));
            PackedTuple::Inline(packed)
        } else {
            PackedTuple::Heap(points.into())
        }
    }
}

/// Bounded, internally synchronized memo of lazily evaluated hyperedge costs.
pub struct LazyCache {
    shards: Vec<Mutex<LruCache<CacheKey, f64, FxBuildHasher>>>,
    shard_capacity: usize,
    misses: AtomicU64,
    hits: AtomicU64,
}

impl LazyCache {
    pub fn new(capacity: usize) -> Self {
        let shard_capacity = (capacity / CACHE_SHARDS).max(1);
        Self {
            shards: (0..CACHE_SHARDS)
                .map(|_| Mutex::new(LruCache::unbounded_with_hasher(FxBuildHasher)))
                .collect(),
            shard_capacity,
            misses: AtomicU64::new(0),
            hits: AtomicU64::new(0),
        }
    }

    fn get_or_compute(&self, degree: usize, edge: usize, points: &[usize], compute: impl FnOnce() -> f64) -> f64 {
        let key = CacheKey {
            degree,
            edge,
            points: PackedTuple::new(points),
        };
        let shard = &self.shards[(FxBuildHasher.hash_one(&key) >> 32) as usize % CACHE_SHARDS];
        if let Some(&v) = shard.lock().expect("cache lock").get(&key) {
            self.hits.fetch_add(1, Ordering::Relaxed);
            return v;
        }
        let value = compute();
        self.misses.fetch_add(1, Ordering::Relaxed);
        let mut guard = shard.lock().expect("cache lock");
        if guard.len() >= self.shard_capacity {
            guard.pop_lru();
        }
        guard.put(key, value);
        value
    }

    /// Number of lazy entries computed (cache misses).
    pub fn computed(&self) -> u64 {
        self.misses.load(Ordering::Relaxed)
    }

    pub fn hits(&self) -> u64 {
        self.hits.load(Ordering::Relaxed)
    }

    pub fn len(&self) -> usize {
        self.shards.iter().map(|s| s.lock().expect("cache lock").len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl Default for LazyCache {
    fn default() -> Self {
        Self::new(DEFAULT_CACHE_CAPACITY)
    }
}

#[allow(dead_code)]
fn assert_send_sync() {
    fn check<T: Send + Sync>() {}
    check::<HypergraphModel>();
    check::<LazyCache>();
}
