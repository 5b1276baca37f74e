//! The additive hypergraph matching objective and its stratification by branch.
//!
//! With branch size `k`, vertices are committed `k` at a time. Every hyperedge
//! is charged to the branch holding its highest vertex: to the selection cost
//! of that branch when its degree is at most `2k`, and to the aggregation cost
//! otherwise. Summing selection and aggregation costs over all branches
//! reproduces the full objective.

use crate::error::{Error, Result};
use crate::tensor::{HypergraphModel, LazyCache};
use crate::types::{check_distinct, PartialAssignment};

/// Relative tolerance used when comparing costs computed along different
/// accumulation orders.
pub const COST_RTOL: f64 = 1e-9;

/// `|a - b| <= rtol * max(|a|, |b|)`.
pub fn approx_eq_rel(a: f64, b: f64, rtol: f64) -> bool {
    a == b || (a - b).abs() <= rtol * a.abs().max(b.abs())
}

fn check_mapping(model: &HypergraphModel, mapping: &[usize]) -> Result<()> {
    if mapping.len() != model.n_vertices() {
        return Err(Error::DimensionMismatch {
            expected: model.n_vertices(),
            actual: mapping.len(),
        });
    }
    check_points(model, mapping)
}

fn check_points(model: &HypergraphModel, points: &[usize]) -> Result<()> {
    check_distinct(points)?;
    if let Some(&p) = points.iter().find(|&&p| p >= model.n_points()) {
        return Err(Error::InvalidInput(format!(
            "point {p} out of range for {} points",
            model.n_points()
        )));
    }
    Ok(())
}

/// Full objective value of a complete mapping (`mapping[v]` is the point
/// assigned to vertex `v`). Accumulates in ascending degree, then
/// lexicographic hyperedge order.
pub fn objective_eval(model: &HypergraphModel, mapping: &[usize]) -> Result<f64> {
    check_mapping(model, mapping)?;
    Ok(objective_unchecked(model, mapping, None))
}

pub(crate) fn objective_unchecked(model: &HypergraphModel, mapping: &[usize], cache: Option<&LazyCache>) -> f64 {
    let mut total = 0.0;
    let mut buf = Vec::with_capacity(model.max_degree());
    for tensor in model.tensors() {
        for edge in 0..tensor.hyperedge_count() {
            buf.clear();
            buf.extend(tensor.edge_vertices(edge).iter().map(|&v| mapping[v]));
            total += tensor.edge_cost(edge, &buf, cache);
        }
    }
    total
}

/// Which of the two per-branch rules a hyperedge is charged to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rule {
    /// Degree at most `2k`, precomputed before the search.
    Selection,
    /// Degree above `2k`, evaluated once the branch completes it.
    Aggregation,
}

/// A hyperedge of the model: tensor position and hyperedge position within it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EdgeRef {
    pub tensor: usize,
    pub edge: usize,
}

/// Per-branch hyperedge lists for a fixed branch size.
#[derive(Debug, Clone)]
pub struct Stratification {
    branch_size: usize,
    selection: Vec<Vec<EdgeRef>>,
    aggregation: Vec<Vec<EdgeRef>>,
}

impl Stratification {
    pub fn new(model: &HypergraphModel, branch_size: usize) -> Result<Self> {
        let n = model.n_vertices();
        if branch_size == 0 || n % branch_size != 0 {
            return Err(Error::KNotDivisor {
                k: branch_size,
                n_vertices: n,
            });
        }
        let branches = n / branch_size;
        let mut selection = vec![Vec::new(); branches];
        let mut aggregation = vec![Vec::new(); branches];
        for (ti, tensor) in model.tensors().iter().enumerate() {
            for edge in 0..tensor.hyperedge_count() {
                let last = *tensor.edge_vertices(edge).last().expect("hyperedges are nonempty");
                let branch = last / branch_size;
                let r = EdgeRef { tensor: ti, edge };
                if tensor.degree() <= 2 * branch_size {
                    selection[branch].push(r);
                } else {
                    aggregation[branch].push(r);
                }
            }
        }
        Ok(Self {
            branch_size,
            selection,
            aggregation,
        })
    }

    pub fn branch_size(&self) -> usize {
        self.branch_size
    }

    /// Number of branches `M = n / k`.
    pub fn branches(&self) -> usize {
        self.selection.len()
    }

    /// Hyperedges charged to `rule` at the zero-based `branch`.
    pub fn edges(&self, rule: Rule, branch: usize) -> &[EdgeRef] {
        match rule {
            Rule::Selection => &self.selection[branch],
            Rule::Aggregation => &self.aggregation[branch],
        }
    }

    /// Sum of `rule` costs at the zero-based `branch`. `assigned` holds the
    /// points of vertices `0..(branch + 1) * k` at least.
    pub fn branch_cost(
        &self,
        model: &HypergraphModel,
        rule: Rule,
        branch: usize,
        assigned: &[usize],
        cache: Option<&LazyCache>,
    ) -> f64 {
        self.branch_cost_observed(model, rule, branch, assigned, cache, &mut |_| {})
    }

    /// As [`Self::branch_cost`], reporting every hyperedge read to `observe`.
    pub fn branch_cost_observed(
        &self,
        model: &HypergraphModel,
        rule: Rule,
        branch: usize,
        assigned: &[usize],
        cache: Option<&LazyCache>,
        observe: &mut dyn FnMut(EdgeRef),
    ) -> f64 {
        let mut total = 0.0;
        let mut buf = [0usize; 16];
        let mut heap = Vec::new();
        for &r in self.edges(rule, branch) {
            let tensor = &model.tensors()[r.tensor];
            let vertices = tensor.edge_vertices(r.edge);
            observe(r);
            let points: &[usize] = if vertices.len() <= buf.len() {
                for (slot, &v) in buf.iter_mut().zip(vertices) {
                    *slot = assigned[v];
                }
                &buf[..vertices.len()]
            } else {
                heap.clear();
                heap.extend(vertices.iter().map(|&v| assigned[v]));
                &heap
            };
            total += tensor.edge_cost(r.edge, points, cache);
        }
        total
    }

    /// Selection and aggregation costs of every branch of a complete mapping.
    pub fn terms(&self, model: &HypergraphModel, mapping: &[usize]) -> Vec<(f64, f64)> {
        (0..self.branches())
            .map(|b| {
                (
                    self.branch_cost(model, Rule::Selection, b, mapping, None),
                    self.branch_cost(model, Rule::Aggregation, b, mapping, None),
                )
            })
            .collect()
    }
}

fn branch_context(
    model: &HypergraphModel,
    tuple: &[usize],
    prior: &PartialAssignment,
) -> Result<(Stratification, Vec<usize>, usize)> {
    let k = prior.branch_size();
    if tuple.len() != k {
        return Err(Error::DimensionMismatch {
            expected: k,
            actual: tuple.len(),
        });
    }
    let strat = Stratification::new(model, k)?;
    let branch = prior.branches();
    if branch >= strat.branches() {
        return Err(Error::BranchOrderViolation {
            branch: branch + 1,
            expected: (strat.branches() - 1) * k,
            actual: prior.committed().len(),
        });
    }
    let mut assigned = prior.committed().to_vec();
    assigned.extend_from_slice(tuple);
    check_points(model, &assigned)?;
    Ok((strat, assigned, branch))
}

/// Cost of the first branch: every hyperedge internal to vertices `0..k`.
pub fn h1_cost(model: &HypergraphModel, tuple: &[usize]) -> Result<f64> {
    let prior = PartialAssignment::empty(tuple.len().max(1));
    let (strat, assigned, _) = branch_context(model, tuple, &prior)?;
    Ok(strat.branch_cost(model, Rule::Selection, 0, &assigned, None))
}

/// Selection cost of committing `tuple` as the next branch after `prior`:
/// hyperedges of degree at most `2k` whose highest vertex lies in that branch.
pub fn hm_cost(model: &HypergraphModel, tuple: &[usize], prior: &PartialAssignment) -> Result<f64> {
    let (strat, assigned, branch) = branch_context(model, tuple, prior)?;
    Ok(strat.branch_cost(model, Rule::Selection, branch, &assigned, None))
}

/// Aggregation cost of committing `tuple` after `prior`: hyperedges of degree
/// above `2k` whose highest vertex lies in that branch.
pub fn im_cost(model: &HypergraphModel, tuple: &[usize], prior: &PartialAssignment) -> Result<f64> {
    let (strat, assigned, branch) = branch_context(model, tuple, prior)?;
    Ok(strat.branch_cost(model, Rule::Aggregation, branch, &assigned, None))
}

/// Whether the summed selection and aggregation costs of `mapping` agree with
/// [`objective_eval`] to [`COST_RTOL`].
pub fn decomposition_check(model: &HypergraphModel, mapping: &[usize], branch_size: usize) -> Result<bool> {
    let direct = objective_eval(model, mapping)?;
    let strat = Stratification::new(model, branch_size)?;
    let stratified: f64 = strat.terms(model, mapping).iter().map(|(h, i)| h + i).sum();
    Ok(approx_eq_rel(direct, stratified, COST_RTOL))
}
