use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;

use crate::types::FullAssignment;

/// Relative slack applied before pruning, so that costs accumulated along the
/// stratified path never prune an assignment tied with the bound.
pub(crate) const PRUNE_SLACK: f64 = 1e-10;

/// Whether a partial cost can be discarded against `bound`. Ties are kept.
#[inline]
pub fn prunable(partial: f64, bound: f64) -> bool {
    partial > bound + bound.abs() * PRUNE_SLACK
}

struct Best {
    solutions: Vec<FullAssignment>,
    history: Vec<f64>,
}

/// The best `top_k` complete assignments found so far.
///
/// The pruning bound is the cost of the `top_k`-th solution, or the initial
/// bound while fewer than `top_k` solutions are known. Readers see the bound
/// through an atomic; a stale read is only ever too large.
pub struct Incumbent {
    top_k: usize,
    initial_bound: f64,
    bound: AtomicU64,
    best: Mutex<Best>,
}

impl Incumbent {
    pub fn new(top_k: usize, initial_bound: f64) -> Self {
        assert!(top_k >= 1, "top_k must be at least 1");
        Self {
            top_k,
            initial_bound,
            bound: AtomicU64::new(initial_bound.to_bits()),
            best: Mutex::new(Best {
                solutions: Vec::with_capacity(top_k + 1),
                history: Vec::new(),
            }),
        }
    }

    pub fn bound(&self) -> f64 {
        f64::from_bits(self.bound.load(Ordering::Acquire))
    }

    /// Offers a complete assignment. Returns whether it entered the list.
    pub fn offer(&self, mapping: &[usize], cost: f64) -> bool {
        if cost > self.initial_bound {
            return false;
        }
        let candidate = FullAssignment {
            mapping: mapping.to_vec(),
            cost,
        };
        let mut best = self.best.lock().expect("incumbent lock");
        if best.solutions.len() == self.top_k
            && candidate.rank_cmp(&best.solutions[self.top_k - 1]).is_ge()
        {
            return false;
        }
        if best.solutions.iter().any(|s| s.mapping == candidate.mapping) {
            return false;
        }
        let pos = best
            .solutions
            .partition_point(|s| s.rank_cmp(&candidate).is_lt());
        best.solutions.insert(pos, candidate);
        best.solutions.truncate(self.top_k);
        let bound = if best.solutions.len() == self.top_k {
            best.solutions[self.top_k - 1].cost.min(self.initial_bound)
        } else {
            self.initial_bound
        };
        best.history.push(bound);
        self.bound.store(bound.to_bits(), Ordering::Release);
        true
    }

    pub fn solutions(&self) -> Vec<FullAssignment> {
        self.best.lock().expect("incumbent lock").solutions.clone()
    }

    /// Bound after every accepted offer, in order.
    pub fn history(&self) -> Vec<f64> {
        self.best.lock().expect("incumbent lock").history.clone()
    }

    pub(crate) fn into_parts(self) -> (Vec<FullAssignment>, Vec<f64>) {
        let best = self.best.into_inner().expect("incumbent lock");
        (best.solutions, best.history)
    }
}
