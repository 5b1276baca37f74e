mod common;

use std::sync::Arc;
use std::time::Duration;

use common::random_mapping;
use ehgm::oracle::{top_k_exhaustive, top_k_seeded};
use ehgm::random::divisors;
use ehgm::solver::{backtrack, enqueue, Incumbent, SearchContext, SearchState, TraceEvent};
use ehgm::{
    objective_eval, solve, DissimilarityTensor, Error, HypergraphModel, PartialAssignment, PointSet, SearchConfig,
    SeedSet, VertexSet,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn instance(n1: usize, n2: usize) -> (VertexSet, PointSet) {
    (VertexSet::anonymous(n1), PointSet::placeholder(n2))
}

fn mappings(sols: &[ehgm::FullAssignment]) -> Vec<Vec<usize>> {
    sols.iter().map(|s| s.mapping.clone()).collect()
}

#[test]
fn single_vertex_single_point() {
    let mut z1 = DissimilarityTensor::sparse(1, 1);
    z1.insert(&[(0, 0)], 0.7).unwrap();
    let model = HypergraphModel::new(1, 1, vec![z1]).unwrap();
    let (v, p) = instance(1, 1);
    let r = solve(&v, &p, &model, &SearchConfig::new(1)).unwrap();
    assert!(r.converged_exactly);
    assert_eq!(r.solutions.len(), 1);
    assert_eq!(r.solutions[0].mapping, vec![0]);
    assert_eq!(r.solutions[0].cost, 0.7);
}

#[test]
fn top_five_match_the_oracle_for_every_branch_size() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..10 {
        let model = common::model(4, 6, 4, Some(3), &mut rng);
        let (v, p) = instance(4, 6);
        let expected = top_k_exhaustive(&v, &p, &model, 5).unwrap();
        for k in [1, 2, 4] {
            let r = solve(&v, &p, &model, &SearchConfig::new(k).with_top_k(5)).unwrap();
            assert!(r.converged_exactly);
            assert_eq!(r.solutions, expected, "k={k}");
        }
    }
}

#[test]
fn solver_agrees_with_oracle_on_random_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    for i in 0..60 {
        let n1 = rng.gen_range(1..=5);
        let n2 = n1 + rng.gen_range(0..=2);
        let lazy = if i % 3 == 0 { Some(2) } else { None };
        let model = common::model(n1, n2, n1, lazy, &mut rng);
        let (v, p) = instance(n1, n2);
        let top_k = rng.gen_range(1..=10);
        let expected = top_k_exhaustive(&v, &p, &model, top_k).unwrap();
        for k in divisors(n1) {
            let r = solve(&v, &p, &model, &SearchConfig::new(k).with_top_k(top_k)).unwrap();
            assert_eq!(r.solutions, expected, "instance {i}, k={k}");
        }
    }
}

#[test]
fn ten_best_of_four_onto_five() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for _ in 0..5 {
        let model = common::model(4, 5, 4, None, &mut rng);
        let (v, p) = instance(4, 5);
        let expected = top_k_exhaustive(&v, &p, &model, 10).unwrap();
        let r = solve(&v, &p, &model, &SearchConfig::new(2).with_top_k(10)).unwrap();
        assert_eq!(r.solutions, expected);
        assert!(r.solutions.windows(2).all(|w| w[0].rank_cmp(&w[1]).is_lt()));
    }
}

#[test]
fn seeded_search_matches_seeded_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(24);
    for _ in 0..20 {
        let model = common::model(6, 7, 4, Some(3), &mut rng);
        let (v, p) = instance(6, 7);
        let a = rng.gen_range(0..7);
        let b = (a + rng.gen_range(1..7)) % 7;
        let seeds = SeedSet::from_pairs([(0, a), (1, b)]).unwrap();
        let expected = top_k_seeded(&v, &p, &model, 3, &seeds).unwrap();
        let r = solve(&v, &p, &model, &SearchConfig::new(2).with_top_k(3).with_seeds(seeds)).unwrap();
        assert_eq!(r.solutions, expected);
        assert!(r.solutions.iter().all(|s| s.mapping[0] == a && s.mapping[1] == b));
    }
}

#[test]
fn fully_seeded_search_returns_the_seeded_mapping() {
    let mut rng = ChaCha8Rng::seed_from_u64(25);
    let model = common::model(2, 3, 2, None, &mut rng);
    let (v, p) = instance(2, 3);
    let seeds = SeedSet::from_pairs([(0, 2), (1, 0)]).unwrap();
    let r = solve(&v, &p, &model, &SearchConfig::new(1).with_seeds(seeds)).unwrap();
    assert_eq!(mappings(&r.solutions), vec![vec![2, 0]]);
    assert_eq!(r.solutions[0].cost, objective_eval(&model, &[2, 0]).unwrap());
}

#[test]
fn bad_seeds_are_rejected() {
    let mut rng = ChaCha8Rng::seed_from_u64(26);
    let model = common::model(4, 4, 2, None, &mut rng);
    let (v, p) = instance(4, 4);
    let gap = SeedSet::from_pairs([(1, 0)]).unwrap();
    assert!(matches!(
        solve(&v, &p, &model, &SearchConfig::new(1).with_seeds(gap)),
        Err(Error::SeedNotPrefix(_))
    ));
    let half = SeedSet::from_pairs([(0, 0)]).unwrap();
    assert!(matches!(
        solve(&v, &p, &model, &SearchConfig::new(2).with_seeds(half)),
        Err(Error::SeedNotPrefix(_))
    ));
    let mut s = SeedSet::new();
    s.insert(0, 1).unwrap();
    assert!(matches!(s.insert(0, 2), Err(Error::SeedConflict(_))));
}

#[test]
fn invalid_configurations_are_rejected() {
    let mut rng = ChaCha8Rng::seed_from_u64(27);
    let model = common::model(4, 4, 2, None, &mut rng);
    let (v, p) = instance(4, 4);
    assert!(matches!(
        solve(&v, &p, &model, &SearchConfig::new(3)),
        Err(Error::KNotDivisor { k: 3, n_vertices: 4 })
    ));
    let (v5, p3) = instance(5, 3);
    let small = HypergraphModel::new(5, 3, vec![]).unwrap();
    assert!(matches!(
        solve(&v5, &p3, &small, &SearchConfig::new(1)),
        Err(Error::InfeasibleSize { .. })
    ));
}

#[test]
fn enqueue_lists_every_ordered_pair_of_four_points() {
    let mut rng = ChaCha8Rng::seed_from_u64(28);
    let model = common::model(4, 4, 2, None, &mut rng);
    let ctx = SearchContext::new(&model, 2, 1024, None, false).unwrap();
    let root = SearchState::new(2, 4);
    let queue = enqueue(&ctx, &root, &Incumbent::new(1, f64::INFINITY));
    assert_eq!(queue.branch(), 1);
    assert_eq!(queue.len(), 12);
    let costs: Vec<f64> = queue.candidates().map(|(_, c)| c).collect();
    assert!(costs.windows(2).all(|w| w[0] <= w[1]));
    for ((a, ca), (b, cb)) in queue.candidates().zip(queue.candidates().skip(1)) {
        if ca == cb {
            assert!(a < b);
        }
    }
}

#[test]
fn enqueue_with_zero_bound_keeps_only_free_tuples() {
    let mut z2 = DissimilarityTensor::sparse(2, 4);
    for_all_pairs(4, |a, b| {
        z2.insert(&[(0, a), (1, b)], 1.0 + a as f64).unwrap();
    });
    let model = HypergraphModel::new(2, 4, vec![z2]).unwrap();
    let ctx = SearchContext::new(&model, 2, 1024, None, false).unwrap();
    let queue = enqueue(&ctx, &SearchState::new(2, 4), &Incumbent::new(1, 0.0));
    assert!(queue.is_empty());
}

fn for_all_pairs(n: usize, mut f: impl FnMut(usize, usize)) {
    for a in 0..n {
        for b in 0..n {
            if a != b {
                f(a, b);
            }
        }
    }
}

#[test]
fn enqueue_after_a_commit_uses_the_remaining_points() {
    let mut rng = ChaCha8Rng::seed_from_u64(29);
    let model = common::model(4, 4, 4, None, &mut rng);
    let ctx = SearchContext::new(&model, 2, 1024, None, false).unwrap();
    let prefix = PartialAssignment::new(vec![2, 0], 2).unwrap();
    let state = SearchState::from_prefix(&ctx, &prefix);
    let queue = enqueue(&ctx, &state, &Incumbent::new(1, f64::INFINITY));
    assert_eq!(queue.branch(), 2);
    let mut tuples: Vec<Vec<usize>> = queue.candidates().map(|(t, _)| t.to_vec()).collect();
    tuples.sort();
    assert_eq!(tuples, vec![vec![1, 3], vec![3, 1]]);
}

#[test]
fn trace_of_a_two_by_two_search() {
    let mut z1 = DissimilarityTensor::sparse(1, 2);
    z1.insert(&[(0, 0)], 0.5).unwrap();
    z1.insert(&[(1, 1)], 0.5).unwrap();
    z1.insert(&[(0, 1)], 1.0).unwrap();
    z1.insert(&[(1, 0)], 1.0).unwrap();
    let model = HypergraphModel::new(2, 2, vec![z1]).unwrap();
    let (v, p) = instance(2, 2);
    let mut config = SearchConfig::new(1);
    config.record_trace = true;
    let r = solve(&v, &p, &model, &config).unwrap();
    use TraceEvent::*;
    assert_eq!(
        r.trace.unwrap(),
        vec![
            Enqueue { branch: 1, candidates: vec![vec![0], vec![1]] },
            Commit { branch: 1, tuple: vec![0] },
            Enqueue { branch: 2, candidates: vec![vec![1]] },
            Commit { branch: 2, tuple: vec![1] },
            Leaf { mapping: vec![0, 1], cost: 1.0 },
            Backtrack { branch: 2 },
            Backtrack { branch: 1 },
            Commit { branch: 1, tuple: vec![1] },
            Enqueue { branch: 2, candidates: vec![] },
            Backtrack { branch: 1 },
        ]
    );
    assert_eq!(mappings(&r.solutions), vec![vec![0, 1]]);
}

#[test]
fn backtrack_restores_the_stored_partial_cost() {
    let mut rng = ChaCha8Rng::seed_from_u64(30);
    let model = common::model(6, 6, 6, Some(3), &mut rng);
    let ctx = SearchContext::new(&model, 1, 1024, None, false).unwrap();
    let mapping = random_mapping(6, 6, &mut rng);
    let full = SearchState::from_prefix(&ctx, &PartialAssignment::new(mapping.clone(), 1).unwrap());
    let mut state = full.clone();
    for depth in (0..6).rev() {
        assert!(backtrack(&ctx, &mut state));
        let fresh = SearchState::from_prefix(&ctx, &PartialAssignment::new(mapping[..depth].to_vec(), 1).unwrap());
        assert_eq!(state.assigned(), fresh.assigned());
        assert_eq!(state.partial_cost(), fresh.partial_cost());
    }
    assert!(!backtrack(&ctx, &mut state));
    let total = objective_eval(&model, &mapping).unwrap();
    assert!((full.partial_cost() - total).abs() <= 1e-9 * total.max(1.0));
}

#[test]
fn worker_count_does_not_change_the_answer() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for _ in 0..8 {
        let model = common::model(6, 8, 4, Some(3), &mut rng);
        let (v, p) = instance(6, 8);
        let base = solve(&v, &p, &model, &SearchConfig::new(2).with_top_k(4)).unwrap();
        for workers in [2, 3, 8] {
            let r = solve(&v, &p, &model, &SearchConfig::new(2).with_top_k(4).with_workers(workers)).unwrap();
            assert_eq!(r.solutions, base.solutions, "workers={workers}");
        }
    }
}

#[test]
fn bound_history_never_increases() {
    let mut rng = ChaCha8Rng::seed_from_u64(32);
    for _ in 0..10 {
        let model = common::model(6, 7, 3, None, &mut rng);
        let (v, p) = instance(6, 7);
        let r = solve(&v, &p, &model, &SearchConfig::new(1).with_top_k(3)).unwrap();
        assert!(r.stats.bound_history.windows(2).all(|w| w[1] <= w[0]));
        assert!(r.stats.leaves_evaluated >= 3);
    }
}

#[test]
fn time_limit_returns_valid_assignments() {
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    let mut spec = ehgm::random::RandomModelSpec::new(12, 14);
    spec.max_degree = 3;
    spec.lazy_from_degree = Some(3);
    spec.edge_probability = 0.3;
    let model = ehgm::random::random_model(&spec, &mut rng).unwrap();
    let (v, p) = instance(12, 14);
    let config = SearchConfig::new(1).with_top_k(3).with_time_limit(Duration::from_millis(50));
    let r = solve(&v, &p, &model, &config).unwrap();
    assert!(!r.converged_exactly);
    assert!(!r.solutions.is_empty());
    for s in &r.solutions {
        assert_eq!(s.cost, objective_eval(&model, &s.mapping).unwrap());
    }
}

#[test]
fn finite_initial_bound_filters_solutions() {
    let mut rng = ChaCha8Rng::seed_from_u64(34);
    let model = common::model(4, 5, 3, None, &mut rng);
    let (v, p) = instance(4, 5);
    let all = top_k_exhaustive(&v, &p, &model, 20).unwrap();
    let cut = all[6].cost;
    let mut config = SearchConfig::new(2).with_top_k(20);
    config.initial_bound = cut;
    let r = solve(&v, &p, &model, &config).unwrap();
    let expected: Vec<_> = all.into_iter().filter(|s| s.cost <= cut).collect();
    assert_eq!(r.solutions, expected);
}

#[test]
fn lazy_cache_counts_computed_entries() {
    let hashed = ehgm::random::HashedCost { seed: 35, scale: 1.0 };
    let closure = move |v: &[usize], p: &[usize]| hashed.value(v, p);
    let z3 = DissimilarityTensor::lazy(3, 5, vec![vec![0, 1, 2], vec![1, 2, 3]], Arc::new(closure)).unwrap();
    let model = HypergraphModel::new(4, 5, vec![z3]).unwrap();
    let (v, p) = instance(4, 5);
    let r = solve(&v, &p, &model, &SearchConfig::new(1)).unwrap();
    assert!(r.stats.lazy_entries_computed > 0);

    // Cheap evaluators skip the cache but give the same answer.
    let z3 = DissimilarityTensor::lazy(3, 5, vec![vec![0, 1, 2], vec![1, 2, 3]], Arc::new(hashed)).unwrap();
    let uncached = HypergraphModel::new(4, 5, vec![z3]).unwrap();
    let u = solve(&v, &p, &uncached, &SearchConfig::new(1)).unwrap();
    assert_eq!(u.stats.lazy_entries_computed, 0);
    assert_eq!(u.solutions, r.solutions);
}
