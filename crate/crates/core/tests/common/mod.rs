#![allow(dead_code)]

use ehgm::random::{random_model, RandomModelSpec};
use ehgm::HypergraphModel;
use rand::Rng;

/// Full expansion of the objective: every degree, every strictly increasing
/// vertex tuple, every point tuple, weighted by the assignment indicator.
pub fn naive_objective(model: &HypergraphModel, mapping: &[usize]) -> f64 {
    naive_objective_truncated(model, mapping, usize::MAX, mapping.len())
}

/// As [`naive_objective`], restricted to degrees up to `max_degree` and to
/// vertices below `n_vertices`.
pub fn naive_objective_truncated(
    model: &HypergraphModel,
    mapping: &[usize],
    max_degree: usize,
    n_vertices: usize,
) -> f64 {
    let n2 = model.n_points();
    let x = |v: usize, p: usize| if mapping[v] == p { 1.0 } else { 0.0 };
    let mut total = 0.0;
    for degree in 1..=model.n_vertices().min(max_degree) {
        let Some(tensor) = model.tensor(degree) else { continue };
        let mut vs = vec![0usize; degree];
        let mut ps = vec![0usize; degree];
        fn vertex_tuples(start: usize, n: usize, vs: &mut Vec<usize>, depth: usize, f: &mut dyn FnMut(&[usize])) {
            if depth == vs.len() {
                f(vs);
                return;
            }
            for v in start..n {
                vs[depth] = v;
                vertex_tuples(v + 1, n, vs, depth + 1, f);
            }
        }
        vertex_tuples(0, n_vertices, &mut vs, 0, &mut |vt: &[usize]| {
            // all point tuples in n2^degree
            let mut idx = vec![0usize; degree];
            loop {
                ps.copy_from_slice(&idx);
                let w: f64 = vt.iter().zip(&ps).map(|(&v, &p)| x(v, p)).product();
                if w != 0.0 {
                    let distinct = (0..degree).all(|a| (0..a).all(|b| ps[a] != ps[b]));
                    if distinct {
                        total += tensor.entry(vt, &ps) * w;
                    }
                }
                let mut pos = 0;
                loop {
                    if pos == degree {
                        return;
                    }
                    idx[pos] += 1;
                    if idx[pos] < n2 {
                        break;
                    }
                    idx[pos] = 0;
                    pos += 1;
                }
            }
        });
    }
    total
}

pub fn random_mapping<R: Rng>(n1: usize, n2: usize, rng: &mut R) -> Vec<usize> {
    use rand::seq::SliceRandom;
    let mut p: Vec<usize> = (0..n2).collect();
    p.shuffle(rng);
    p.truncate(n1);
    p
}

pub fn model<R: Rng>(n1: usize, n2: usize, max_degree: usize, lazy_from: Option<usize>, rng: &mut R) -> HypergraphModel {
    let mut spec = RandomModelSpec::new(n1, n2);
    spec.max_degree = max_degree;
    spec.lazy_from_degree = lazy_from;
    random_model(&spec, rng).unwrap()
}

pub fn rel_close(a: f64, b: f64) -> bool {
    ehgm::approx_eq_rel(a, b, 1e-9)
}
