//! Exact hypergraph matching by branch and bound.
//!
//! Vertices are committed `k` at a time in their canonical order. Each branch
//! queue holds the point-disjoint `k`-tuples ordered by their selection cost;
//! the aggregation cost of higher-degree hyperedges is added when a tuple is
//! committed. A branch is discarded as soon as its accumulated cost exceeds
//! the cost of the `top_k`-th best complete assignment found so far.
//!
//! With several workers, the candidates of the first open branch are handed
//! out from a shared cursor and every worker explores its subtrees
//! depth-first against the shared incumbent.

mod incumbent;
mod search;
mod seeds;

use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

pub use incumbent::{prunable, Incumbent};
pub use search::{backtrack, enqueue, BranchQueue, SearchContext, SearchState, TraceEvent};
pub use seeds::apply_seeds;

use crate::error::{Error, Result};
use crate::tensor::{HypergraphModel, DEFAULT_CACHE_CAPACITY};
use crate::types::{FullAssignment, PointSet, SeedSet, VertexSet};

/// Parameters of one solve.
#[derive(Debug, Clone)]
pub struct SearchConfig {
    pub branch_size: usize,
    /// Assignments costing more than this are never reported.
    pub initial_bound: f64,
    pub top_k: usize,
    pub time_limit: Option<Duration>,
    pub seeds: SeedSet,
    pub workers: usize,
    pub cache_capacity: usize,
    /// Record every enqueue, commit, leaf, and backtrack. Meant for one worker.
    pub record_trace: bool,
}

impl SearchConfig {
    pub fn new(branch_size: usize) -> Self {
        Self {
            branch_size,
            ..Self::default()
        }
    }

    pub fn with_top_k(mut self, top_k: usize) -> Self {
        self.top_k = top_k;
        self
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = workers;
        self
    }

    pub fn with_seeds(mut self, seeds: SeedSet) -> Self {
        self.seeds = seeds;
        self
    }

    pub fn with_time_limit(mut self, limit: Duration) -> Self {
        self.time_limit = Some(limit);
        self
    }

    fn validate(&self, n_vertices: usize) -> Result<()> {
        if self.branch_size == 0 || n_vertices % self.branch_size != 0 {
            return Err(Error::KNotDivisor {
                k: self.branch_size,
                n_vertices,
            });
        }
        if self.top_k == 0 {
            return Err(Error::InvalidInput("top_k must be at least 1".into()));
        }
        if self.workers == 0 {
            return Err(Error::InvalidInput("at least one worker is required".into()));
        }
        if self.initial_bound.is_nan() || self.initial_bound < 0.0 {
            return Err(Error::InvalidInput("initial bound must be nonnegative".into()));
        }
        Ok(())
    }
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            branch_size: 1,
            initial_bound: f64::INFINITY,
            top_k: 1,
            time_limit: None,
            seeds: SeedSet::new(),
            workers: 1,
            cache_capacity: DEFAULT_CACHE_CAPACITY,
            record_trace: false,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SolverStats {
    pub nodes_expanded: u64,
    pub candidates_pruned: u64,
    pub leaves_evaluated: u64,
    pub lazy_entries_computed: u64,
    pub wall_time_secs: f64,
    /// Pruning bound after every accepted complete assignment.
    pub bound_history: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct SolverResult {
    /// Up to `top_k` assignments, ascending cost, ties broken lexicographically.
    pub solutions: Vec<FullAssignment>,
    pub stats: SolverStats,
    /// False when the time limit cut the search short.
    pub converged_exactly: bool,
    pub trace: Option<Vec<TraceEvent>>,
}

/// Finds the `top_k` lowest-cost one-to-one assignments of `vertices` onto
/// `points` under `model`.
pub fn solve(
    vertices: &VertexSet,
    points: &PointSet,
    model: &HypergraphModel,
    config: &SearchConfig,
) -> Result<SolverResult> {
    let start = Instant::now();
    if points.len() < vertices.len() {
        return Err(Error::InfeasibleSize {
            n_vertices: vertices.len(),
            n_points: points.len(),
        });
    }
    if vertices.len() != model.n_vertices() || points.len() != model.n_points() {
        return Err(Error::InvalidInput(format!(
            "model is {}x{} but the instance is {}x{}",
            model.n_vertices(),
            model.n_points(),
            vertices.len(),
            points.len()
        )));
    }
    config.validate(vertices.len())?;
    let prefix = apply_seeds(&config.seeds, vertices, points, config.branch_size)?;

    let deadline = config.time_limit.map(|d| start + d);
    let ctx = SearchContext::new(
        model,
        config.branch_size,
        config.cache_capacity,
        deadline,
        config.record_trace,
    )?;
    let incumbent = Incumbent::new(config.top_k, config.initial_bound);
    let mut root = SearchState::from_prefix(&ctx, &prefix);

    if root.branches() == ctx.strat.branches() {
        search::visit_leaf(&ctx, &root, &incumbent);
    } else {
        let queue = enqueue(&ctx, &root, &incumbent);
        let cursor = AtomicUsize::new(0);
        let run = |state: &mut SearchState| loop {
            if ctx.interrupted() {
                break;
            }
            let i = cursor.fetch_add(1, Ordering::Relaxed);
            if i >= queue.len() {
                break;
            }
            let (tuple, selection) = queue.get(i);
            if search::try_commit(&ctx, state, &incumbent, tuple, selection) {
                search::explore(&ctx, state, &incumbent);
            }
        };
        let workers = config.workers.min(queue.len().max(1));
        if workers == 1 {
            run(&mut root);
        } else {
            std::thread::scope(|scope| {
                for _ in 0..workers {
                    let mut state = root.clone();
                    let run = &run;
                    scope.spawn(move || run(&mut state));
                }
            });
        }
    }

    let converged_exactly = !ctx.interrupted();
    let trace = ctx.take_trace();
    let stats_base = SolverStats {
        nodes_expanded: ctx.nodes.load(Ordering::Relaxed),
        candidates_pruned: ctx.pruned.load(Ordering::Relaxed),
        leaves_evaluated: ctx.leaves.load(Ordering::Relaxed),
        lazy_entries_computed: ctx.cache.computed(),
        wall_time_secs: 0.0,
        bound_history: Vec::new(),
    };
    let (solutions, bound_history) = incumbent.into_parts();
    Ok(SolverResult {
        solutions,
        stats: SolverStats {
            wall_time_secs: start.elapsed().as_secs_f64(),
            bound_history,
            ..stats_base
        },
        converged_exactly,
        trace,
    })
}
