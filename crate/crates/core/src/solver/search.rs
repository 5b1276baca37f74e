//! Depth-first branch-and-bound over `k`-tuples of points.

use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use crate::error::Result;
use crate::objective::{objective_unchecked, Rule, Stratification};
use crate::tensor::{for_each_injective_tuple, HypergraphModel, LazyCache};
use crate::types::PartialAssignment;

use super::incumbent::{prunable, Incumbent};

/// Search event, recorded when tracing is enabled. Branches are one-based.
#[derive(Debug, Clone, PartialEq)]
pub enum TraceEvent {
    Enqueue { branch: usize, candidates: Vec<Vec<usize>> },
    Commit { branch: usize, tuple: Vec<usize> },
    Leaf { mapping: Vec<usize>, cost: f64 },
    Backtrack { branch: usize },
}

/// Everything shared by the workers of one solve.
pub struct SearchContext<'a> {
    pub(crate) model: &'a HypergraphModel,
    pub(crate) strat: Stratification,
    pub(crate) cache: LazyCache,
    deadline: Option<Instant>,
    interrupted: AtomicBool,
    pub(crate) nodes: AtomicU64,
    pub(crate) pruned: AtomicU64,
    pub(crate) leaves: AtomicU64,
    trace: Option<Mutex<Vec<TraceEvent>>>,
}

impl<'a> SearchContext<'a> {
    pub fn new(
        model: &'a HypergraphModel,
        branch_size: usize,
        cache_capacity: usize,
        deadline: Option<Instant>,
        record_trace: bool,
    ) -> Result<Self> {
        Ok(Self {
            model,
            strat: Stratification::new(model, branch_size)?,
            cache: LazyCache::new(cache_capacity),
            deadline,
            interrupted: AtomicBool::new(false),
            nodes: AtomicU64::new(0),
            pruned: AtomicU64::new(0),
            leaves: AtomicU64::new(0),
            trace: record_trace.then(|| Mutex::new(Vec::new())),
        })
    }

    pub fn stratification(&self) -> &Stratification {
        &self.strat
    }

    pub fn interrupted(&self) -> bool {
        self.interrupted.load(Ordering::Relaxed)
    }

    /// Marks the search interrupted once the deadline has passed.
    fn check_deadline(&self) -> bool {
        if self.interrupted() {
            return true;
        }
        if self.deadline.is_some_and(|d| Instant::now() >= d) {
            self.interrupted.store(true, Ordering::Relaxed);
            return true;
        }
        false
    }

    fn record(&self, event: impl FnOnce() -> TraceEvent) {
        if let Some(t) = &self.trace {
            t.lock().expect("trace lock").push(event());
        }
    }

    pub(crate) fn take_trace(&self) -> Option<Vec<TraceEvent>> {
        self.trace
            .as_ref()
            .map(|t| std::mem::take(&mut *t.lock().expect("trace lock")))
    }
}

/// The committed prefix with the per-branch selection and aggregation costs
/// that produced it.
#[derive(Debug, Clone)]
pub struct SearchState {
    branch_size: usize,
    assigned: Vec<usize>,
    used: Vec<bool>,
    selection: Vec<f64>,
    aggregation: Vec<f64>,
    partial: f64,
}

impl SearchState {
    pub fn new(branch_size: usize, n_points: usize) -> Self {
        Self {
            branch_size,
            assigned: Vec::new(),
            used: vec![false; n_points],
            selection: Vec::new(),
            aggregation: Vec::new(),
            partial: 0.0,
        }
    }

    /// Commits every branch of `prefix`, charging its stratified costs.
    pub fn from_prefix(ctx: &SearchContext<'_>, prefix: &PartialAssignment) -> Self {
        let mut state = Self::new(ctx.strat.branch_size(), ctx.model.n_points());
        for tuple in prefix.committed().chunks(state.branch_size) {
            let branch = state.branches();
            state.assigned.extend_from_slice(tuple);
            let h = ctx.strat.branch_cost(ctx.model, Rule::Selection, branch, &state.assigned, Some(&ctx.cache));
            let i = ctx.strat.branch_cost(ctx.model, Rule::Aggregation, branch, &state.assigned, Some(&ctx.cache));
            state.assigned.truncate(branch * state.branch_size);
            state.commit(tuple, h, i);
        }
        state
    }

    /// Number of committed branches.
    pub fn branches(&self) -> usize {
        self.selection.len()
    }

    pub fn assigned(&self) -> &[usize] {
        &self.assigned
    }

    /// Accumulated cost of the committed branches.
    pub fn partial_cost(&self) -> f64 {
        self.partial
    }

    pub fn selection_costs(&self) -> &[f64] {
        &self.selection
    }

    pub fn aggregation_costs(&self) -> &[f64] {
        &self.aggregation
    }

    pub fn commit(&mut self, tuple: &[usize], selection: f64, aggregation: f64) {
        debug_assert_eq!(tuple.len(), self.branch_size);
        debug_assert_eq!(self.assigned.len(), self.branches() * self.branch_size);
        for &p in tuple {
            debug_assert!(!self.used[p]);
            self.used[p] = true;
        }
        self.assigned.extend_from_slice(tuple);
        self.selection.push(selection);
        self.aggregation.push(aggregation);
        self.partial = self.recompute();
    }

    /// Removes the last committed branch and restores the partial cost from
    /// the stored per-branch costs. Returns the removed tuple, or `None` when
    /// nothing is committed.
    pub fn backtrack(&mut self) -> Option<Vec<usize>> {
        if self.selection.is_empty() {
            return None;
        }
        let start = self.assigned.len() - self.branch_size;
        let tuple = self.assigned.split_off(start);
        for &p in &tuple {
            self.used[p] = false;
        }
        self.selection.pop();
        self.aggregation.pop();
        self.partial = self.recompute();
        Some(tuple)
    }

    fn recompute(&self) -> f64 {
        self.selection
            .iter()
            .zip(&self.aggregation)
            .fold(0.0, |acc, (h, i)| acc + h + i)
    }
}

/// Candidate tuples for one branch, ascending by selection cost and then
/// lexicographically by point tuple.
#[derive(Debug, Clone)]
pub struct BranchQueue {
    branch: usize,
    branch_size: usize,
    points: Vec<usize>,
    costs: Vec<f64>,
    cursor: usize,
}

impl BranchQueue {
    fn empty(branch: usize, branch_size: usize) -> Self {
        Self {
            branch,
            branch_size,
            points: Vec::new(),
            costs: Vec::new(),
            cursor: 0,
        }
    }

    /// One-based branch index.
    pub fn branch(&self) -> usize {
        self.branch
    }

    pub fn len(&self) -> usize {
        self.costs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.costs.is_empty()
    }

    /// All candidates with their selection costs, in queue order.
    pub fn candidates(&self) -> impl Iterator<Item = (&[usize], f64)> + '_ {
        self.points.chunks(self.branch_size).zip(self.costs.iter().copied())
    }

    pub fn get(&self, index: usize) -> (&[usize], f64) {
        let k = self.branch_size;
        (&self.points[index * k..(index + 1) * k], self.costs[index])
    }

    fn pop(&mut self) -> Option<(Vec<usize>, f64)> {
        if self.cursor >= self.costs.len() {
            return None;
        }
        let (t, c) = self.get(self.cursor);
        let out = (t.to_vec(), c);
        self.cursor += 1;
        Some(out)
    }
}

/// Builds the queue for the branch after `state`: every point-disjoint
/// `k`-tuple whose selection cost keeps the partial cost within the pruning
/// bound. Checks the deadline first and returns an empty queue once it has
/// passed.
pub fn enqueue(ctx: &SearchContext<'_>, state: &SearchState, incumbent: &Incumbent) -> BranchQueue {
    let branch = state.branches();
    let k = ctx.strat.branch_size();
    let mut queue = BranchQueue::empty(branch + 1, k);
    if ctx.check_deadline() || branch >= ctx.strat.branches() {
        return queue;
    }
    let bound = incumbent.bound();
    let base = state.partial_cost();
    let mut assigned = state.assigned.clone();
    let prefix = assigned.len();
    assigned.resize(prefix + k, usize::MAX);
    let free: Vec<usize> = (0..state.used.len()).filter(|&p| !state.used[p]).collect();
    let mut kept: Vec<(f64, Vec<usize>)> = Vec::new();
    let mut pruned = 0u64;
    // `free` is ascending, so tuples arrive in lexicographic order
    for_each_injective_tuple(free.len(), k, |idx| {
        for (slot, &i) in assigned[prefix..].iter_mut().zip(idx) {
            *slot = free[i];
        }
        let h = ctx
            .strat
            .branch_cost(ctx.model, Rule::Selection, branch, &assigned, Some(&ctx.cache));
        if prunable(base + h, bound) {
            pruned += 1;
        } else {
            kept.push((h, assigned[prefix..].to_vec()));
        }
    });
    ctx.pruned.fetch_add(pruned, Ordering::Relaxed);

    // stable sort keeps lexicographic order among equal costs
    kept.sort_by(|a, b| a.0.total_cmp(&b.0));
    for (h, tuple) in kept {
        queue.points.extend_from_slice(&tuple);
        queue.costs.push(h);
    }
    ctx.record(|| TraceEvent::Enqueue {
        branch: branch + 1,
        candidates: queue.candidates().map(|(t, _)| t.to_vec()).collect(),
    });
    queue
}

/// Undoes the last commit of `state` and records it. Returns `false` once
/// nothing is left to undo.
pub fn backtrack(ctx: &SearchContext<'_>, state: &mut SearchState) -> bool {
    let branch = state.branches();
    match state.backtrack() {
        Some(_) => {
            ctx.record(|| TraceEvent::Backtrack { branch });
            true
        }
        None => false,
    }
}

/// Tries to commit `tuple` (with precomputed selection cost) as the next
/// branch. Returns `false` when the branch is pruned.
pub(crate) fn try_commit(
    ctx: &SearchContext<'_>,
    state: &mut SearchState,
    incumbent: &Incumbent,
    tuple: &[usize],
    selection: f64,
) -> bool {
    let bound = incumbent.bound();
    let base = state.partial_cost();
    if prunable(base + selection, bound) {
        ctx.pruned.fetch_add(1, Ordering::Relaxed);
        return false;
    }
    let branch = state.branches();
    let prefix = state.assigned.len();
    state.assigned.extend_from_slice(tuple);
    let aggregation = ctx
        .strat
        .branch_cost(ctx.model, Rule::Aggregation, branch, &state.assigned, Some(&ctx.cache));
    state.assigned.truncate(prefix);
    if prunable(base + selection + aggregation, bound) {
        ctx.pruned.fetch_add(1, Ordering::Relaxed);
        return false;
    }
    state.commit(tuple, selection, aggregation);
    ctx.nodes.fetch_add(1, Ordering::Relaxed);
    ctx.record(|| TraceEvent::Commit {
        branch: branch + 1,
        tuple: tuple.to_vec(),
    });
    true
}

/// Scores a complete assignment with the canonical objective and offers it
/// to the incumbent.
pub(crate) fn visit_leaf(ctx: &SearchContext<'_>, state: &SearchState, incumbent: &Incumbent) {
    if prunable(state.partial_cost(), incumbent.bound()) {
        return;
    }
    ctx.leaves.fetch_add(1, Ordering::Relaxed);
    let cost = objective_unchecked(ctx.model, &state.assigned, Some(&ctx.cache));
    ctx.record(|| TraceEvent::Leaf {
        mapping: state.assigned.clone(),
        cost,
    });
    incumbent.offer(&state.assigned, cost);
}

/// Explores the subtree below the last committed branch of `state`, then
/// undoes that commit.
pub(crate) fn explore(ctx: &SearchContext<'_>, state: &mut SearchState, incumbent: &Incumbent) {
    let total = ctx.strat.branches();
    if state.branches() == total {
        visit_leaf(ctx, state, incumbent);
        backtrack(ctx, state);
        return;
    }
    let mut stack = vec![enqueue(ctx, state, incumbent)];
    while let Some(queue) = stack.last_mut() {
        let next = if ctx.interrupted() { None } else { queue.pop() };
        match next {
            None => {
                stack.pop();
                backtrack(ctx, state);
            }
            Some((tuple, selection)) => {
                // the queue is sorted by selection cost, so nothing after a
                // pruned selection can survive either
                if prunable(state.partial_cost() + selection, incumbent.bound()) {
                    let rest = (queue.len() - queue.cursor) as u64 + 1;
                    ctx.pruned.fetch_add(rest, Ordering::Relaxed);
                    queue.cursor = queue.len();
                    continue;
                }
                if !try_commit(ctx, state, incumbent, &tuple, selection) {
                    continue;
                }
                if state.branches() == total {
                    visit_leaf(ctx, state, incumbent);
                    backtrack(ctx, state);
                } else {
                    stack.push(enqueue(ctx, state, incumbent));
                }
            }
        }
    }
}
