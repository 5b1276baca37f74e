//! Acceptance criteria, one PASS/FAIL line each. Runs without the libtest
//! harness so the verdicts are always printed.

use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use ehgm::fitting::{
    estimate_covariance, estimate_mean, fit_templates, mahalanobis_cost, normalize_time, regularize, CovNorm,
    FitConfig, TemplateStats,
};
use ehgm::oracle::{top_k_exhaustive, top_k_seeded};
use ehgm::posture::features::midpoint_bend;
use ehgm::posture::{build_model, pair_step, posture_features, BuildOptions, Chirality, ModelKind, Posture};
use ehgm::random::{divisors, random_model, RandomModelSpec};
use ehgm::synthetic::{generate_corpus, generate_worm, WormSpec};
use ehgm::{approx_eq_rel, decomposition_check, objective_eval, solve, PointSet, SearchConfig, SeedSet, Vec3, VertexSet};
use ehgm_cli::eval::{EvaluationReport, Outcome};
use ehgm_cli::io::{load_pointset, save_pointset, ColumnMap};
use ehgm_cli::run::{match_points, MatchOptions, RunResult, Timing};
use ehgm_cli::synth::{generate_instance, instance_from_posture, vertex_set, InstanceSpec};
use ehgm_cli::verify::{compare, Verdict};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<String, String>;

fn ensure(ok: bool, message: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(message())
    }
}

fn random_instance(rng: &mut ChaCha8Rng, n1: usize, n2: usize) -> Result<ehgm::HypergraphModel, String> {
    let mut spec = RandomModelSpec::new(n1, n2);
    spec.max_degree = n1;
    spec.lazy_from_degree = if rng.gen_bool(0.5) { Some(rng.gen_range(2..=n1.max(2))) } else { None };
    spec.cost_scale = [1.0, 10.0, 1000.0][rng.gen_range(0..3)];
    random_model(&spec, rng).map_err(|e| e.to_string())
}

fn oracle_exactness() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let count = 500;
    for i in 0..count {
        let n1 = rng.gen_range(2..=8);
        let n2 = rng.gen_range(n1..=9);
        let ks = divisors(n1);
        let k = ks[rng.gen_range(0..ks.len())];
        let top_k = [1, 3, 5][rng.gen_range(0..3)];
        let model = random_instance(&mut rng, n1, n2)?;
        let (v, p) = (VertexSet::anonymous(n1), PointSet::placeholder(n2));
        let config = SearchConfig::new(k).with_top_k(top_k);
        let got = solve(&v, &p, &model, &config).map_err(|e| e.to_string())?;
        let want = top_k_exhaustive(&v, &p, &model, top_k).map_err(|e| e.to_string())?;
        if let Verdict::Disagree { rank } = compare(&got.solutions, &want) {
            return Err(format!("instance {i} (n1={n1} n2={n2} k={k} top_k={top_k}) differs at rank {rank}"));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(secs < 120.0, || format!("took {secs:.1}s"))?;
    Ok(format!("{count} instances agree with enumeration in {secs:.1}s"))
}

fn decomposition() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let count = 1000;
    for i in 0..count {
        let n1 = rng.gen_range(1..=9);
        let n2 = rng.gen_range(n1..=10);
        let model = random_instance(&mut rng, n1, n2)?;
        let mut points: Vec<usize> = (0..n2).collect();
        points.shuffle(&mut rng);
        let mapping = &points[..n1];
        let ks = divisors(n1);
        let k = ks[rng.gen_range(0..ks.len())];
        let ok = decomposition_check(&model, mapping, k).map_err(|e| e.to_string())?;
        ensure(ok, || format!("triple {i} (n1={n1} k={k}) does not decompose"))?;
    }
    Ok(format!("{count} triples decompose in {:.1}s", start.elapsed().as_secs_f64()))
}

fn seeded_equivalence() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let count = 100;
    for i in 0..count {
        let n1 = rng.gen_range(2..=8);
        let n2 = rng.gen_range(n1..=9);
        let ks = divisors(n1);
        let k = ks[rng.gen_range(0..ks.len())];
        let branches = rng.gen_range(1..=n1 / k);
        let mut points: Vec<usize> = (0..n2).collect();
        points.shuffle(&mut rng);
        let seeds = SeedSet::from_pairs((0..branches * k).map(|v| (v, points[v]))).map_err(|e| e.to_string())?;
        let top_k = [1, 3, 5][rng.gen_range(0..3)];
        let model = random_instance(&mut rng, n1, n2)?;
        let (v, p) = (VertexSet::anonymous(n1), PointSet::placeholder(n2));
        let config = SearchConfig::new(k).with_top_k(top_k).with_seeds(seeds.clone());
        let got = solve(&v, &p, &model, &config).map_err(|e| e.to_string())?;
        let want = top_k_seeded(&v, &p, &model, top_k, &seeds).map_err(|e| e.to_string())?;
        if let Verdict::Disagree { rank } = compare(&got.solutions, &want) {
            return Err(format!("instance {i} (n1={n1} k={k} seeded branches={branches}) differs at rank {rank}"));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(secs < 60.0, || format!("took {secs:.1}s"))?;
    Ok(format!("{count} seeded instances agree in {secs:.1}s"))
}

fn worker_invariance() -> Check {
    let start = Instant::now();
    for i in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(400 + i);
        let n1 = [6, 8][i as usize % 2];
        let n2 = n1 + 1;
        let model = random_instance(&mut rng, n1, n2)?;
        let (v, p) = (VertexSet::anonymous(n1), PointSet::placeholder(n2));
        let ks = divisors(n1);
        let k = ks[(i as usize / 2) % ks.len()];
        let runs: Vec<_> = [1, 2, 4]
            .iter()
            .map(|&w| solve(&v, &p, &model, &SearchConfig::new(k).with_top_k(5).with_workers(w)))
            .collect::<Result<_, _>>()
            .map_err(|e| e.to_string())?;
        for (w, r) in [2, 4].iter().zip(&runs[1..]) {
            ensure(r.solutions == runs[0].solutions, || format!("instance {i} differs with {w} workers"))?;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(secs < 60.0, || format!("took {secs:.1}s"))?;
    Ok(format!("20 instances identical for 1, 2 and 4 workers in {secs:.1}s"))
}

fn random_posture(n_pairs: usize, rng: &mut ChaCha8Rng) -> Posture {
    let spec = WormSpec {
        n_pairs,
        variation: 0.2,
        ..WormSpec::default()
    };
    generate_worm(&spec, rng.gen(), 0.5, rng)
}

fn flat_features(model: ModelKind, p: &Posture, chirality: Chirality) -> Result<Vec<(String, f64)>, String> {
    Ok(posture_features(model, p, chirality)
        .map_err(|e| e.to_string())?
        .into_iter()
        .flat_map(|(g, values)| g.names.into_iter().zip(values))
        .collect())
}

fn is_twist(name: &str) -> bool {
    name.starts_with("psi") || name.starts_with("tau") || name == "sum_psi" || name == "sum_tau"
}

fn geometry() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut checked = 0;
    for _ in 0..100 {
        let n_pairs = rng.gen_range(3..=11);
        let p = random_posture(n_pairs, &mut rng);
        let base = flat_features(ModelKind::Posture, &p, Chirality::Right)?;

        let axis = Vec3::new(rng.gen(), rng.gen(), rng.gen::<f64>() + 0.1).normalize();
        let rot = rotation(axis, rng.gen_range(0.0..std::f64::consts::TAU));
        let shift = Vec3::new(rng.gen_range(-50.0..50.0), rng.gen_range(-50.0..50.0), rng.gen_range(-50.0..50.0));
        let moved = flat_features(ModelKind::Posture, &p.map(|q| rot(q) + shift), Chirality::Right)?;
        let mirrored = flat_features(ModelKind::Posture, &p.map(|q| Vec3::new(-q.x, q.y, q.z)), Chirality::Right)?;
        let flipped = flat_features(ModelKind::Posture, &p, Chirality::Left)?;

        for (((name, a), (_, b)), ((_, m), (_, f))) in base.iter().zip(&moved).zip(mirrored.iter().zip(&flipped)) {
            let tol = 1e-8 * a.abs().max(1.0);
            ensure((a - b).abs() <= tol, || format!("{name} changes under a rigid motion: {a} vs {b}"))?;
            let expected = if is_twist(name) { -a } else { *a };
            ensure((m - expected).abs() <= tol, || format!("{name} under reflection: {m}, expected {expected}"))?;
            ensure((f - expected).abs() <= tol, || format!("{name} under the chirality flag: {f}, expected {expected}"))?;
            let in_range = match name.split('_').next().unwrap() {
                "PD" | "Lchord" | "Rchord" | "PDR" | "MD" => *a >= 0.0,
                "phi" | "psi" | "tau" => (-1.0..=1.0).contains(a),
                "Theta" | "zeta" => (0.0..=180.0).contains(a),
                _ => a.is_finite(),
            };
            ensure(in_range, || format!("{name} = {a} is out of range"))?;
            checked += 1;
        }
    }

    let x = |v: f64| Vec3::new(v, 0.0, 0.0);
    let flat = midpoint_bend(x(0.0), x(1.0), x(2.0)).map_err(|e| e.to_string())?;
    let folded = midpoint_bend(x(0.0), x(1.0), Vec3::new(0.0, 1e-12, 0.0)).map_err(|e| e.to_string())?;
    ensure((flat - 180.0).abs() < 1e-9, || format!("straight midline bend is {flat}"))?;
    ensure(folded.abs() < 1e-6, || format!("fold-back bend is {folded}"))?;
    let straight = generate_worm(&WormSpec::straight(10), 0.5, 0.0, &mut rng);
    for (name, v) in flat_features(ModelKind::Posture, &straight, Chirality::Right)? {
        if is_twist(&name) {
            ensure(v.abs() < 1e-12, || format!("{name} = {v} on a straight worm"))?;
        }
        if name.starts_with("Theta") {
            ensure((v - 180.0).abs() < 1e-9, || format!("{name} = {v} on a straight worm"))?;
        }
    }
    let v = Vec3::new;
    let [_, _, _, psi, _] = pair_step(
        [v(0.0, 1.0, 0.0), v(1.0, 1.0, 0.0)],
        [v(0.0, 0.0, 0.0), v(0.0, 0.0, -1.0)],
        Chirality::Right,
    )
    .map_err(|e| e.to_string())?;
    ensure((psi - 0.5).abs() < 1e-12, || format!("quarter turn gives psi {psi}"))?;
    Ok(format!("{checked} feature values checked plus analytic cases"))
}

fn rotation(axis: Vec3, angle: f64) -> impl Fn(Vec3) -> Vec3 {
    // Rodrigues' formula
    move |v: Vec3| v * angle.cos() + axis.cross(&v) * angle.sin() + axis * axis.dot(&v) * (1.0 - angle.cos())
}

fn fitting() -> Check {
    let z0 = normalize_time(430.0, 430.0, 850.0).map_err(|e| e.to_string())?;
    let z1 = normalize_time(850.0, 430.0, 850.0).map_err(|e| e.to_string())?;
    ensure(z0 == 0.0 && z1 == 1.0, || format!("endpoints map to {z0} and {z1}"))?;

    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for trial in 0..50 {
        let dim = rng.gen_range(1..=7);
        let n = rng.gen_range(dim + 2..=40);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..dim).map(|j| rng.gen_range(-5.0..5.0) * (j + 1) as f64 + 10.0).collect())
            .collect();
        let mean = estimate_mean(&rows).map_err(|e| e.to_string())?;
        for (norm, divisor) in [(CovNorm::Sample, (n - 1) as f64), (CovNorm::Literal, 1.0)] {
            let cov = estimate_covariance(&rows, &mean, norm).map_err(|e| e.to_string())?;
            // one-pass raw moments, an independent route to the same matrix
            for a in 0..dim {
                for b in 0..dim {
                    let sab: f64 = rows.iter().map(|r| r[a] * r[b]).sum();
                    let (sa, sb): (f64, f64) = (rows.iter().map(|r| r[a]).sum(), rows.iter().map(|r| r[b]).sum());
                    let want = (sab - sa * sb / n as f64) / divisor;
                    ensure(approx_eq_rel(cov[(a, b)], want, 1e-9) || (cov[(a, b)] - want).abs() < 1e-9, || {
                        format!("trial {trial}: covariance ({a},{b}) {} vs {want}", cov[(a, b)])
                    })?;
                }
            }
            let (reg, inv) = regularize(&cov).map_err(|e| e.to_string())?;
            ensure(reg.clone().cholesky().is_some(), || format!("trial {trial}: regularized covariance is not SPD"))?;
            ensure(inv.clone().symmetric_eigenvalues().iter().all(|&e| e > 0.0), || {
                format!("trial {trial}: inverse is not positive definite")
            })?;
            let at_mean = mahalanobis_cost(&mean, &mean, &inv).map_err(|e| e.to_string())?;
            ensure(at_mean == 0.0, || format!("trial {trial}: cost at the mean is {at_mean}"))?;
            let off: Vec<f64> = mean.iter().map(|m| m + rng.gen_range(0.1..1.0)).collect();
            let c = mahalanobis_cost(&off, &mean, &inv).map_err(|e| e.to_string())?;
            ensure(c > 0.0, || format!("trial {trial}: cost away from the mean is {c}"))?;
        }
    }

    let corpus = generate_corpus(&WormSpec::default(), 12, 5, 0.3, &mut rng);
    let t = fit_templates(&corpus, &FitConfig::new(ModelKind::Posture), None).map_err(|e| e.to_string())?;
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let (a, b) = (dir.path().join("a.json"), dir.path().join("b.json"));
    t.save(&a).map_err(|e| e.to_string())?;
    let back = TemplateStats::load(&a).map_err(|e| e.to_string())?;
    back.save(&b).map_err(|e| e.to_string())?;
    ensure(back == t, || "template changed through a file".into())?;
    ensure(std::fs::read(&a).ok() == std::fs::read(&b).ok(), || "template file bytes changed".into())?;
    Ok("time normalization, covariance, Mahalanobis and template round trip hold".into())
}

fn fit_pairs(corpus: &[ehgm::fitting::AnnotatedSample]) -> Result<TemplateStats, String> {
    // one global bin: at this corpus size narrower bins leave the
    // five-feature covariances rank deficient
    let config = FitConfig {
        bin_width: 1.0,
        ..FitConfig::new(ModelKind::Pairs)
    };
    fit_templates(corpus, &config, None).map_err(|e| e.to_string())
}

fn end_to_end() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let corpus = generate_corpus(&WormSpec::default(), 50, 1, 0.3, &mut rng);
    let (train, test) = corpus.split_at(40);
    let template = fit_pairs(train)?;
    let mut outcomes = Vec::new();
    for (i, sample) in test.iter().enumerate() {
        let inst = instance_from_posture(sample.posture.clone(), 0, &mut rng).map_err(|e| e.to_string())?;
        let options = MatchOptions {
            model: Some(ModelKind::Pairs),
            z: sample.normalized_time().map_err(|e| e.to_string())?,
            k: 2,
            top_k: 10,
            workers: 4,
            time_limit_secs: Some(120.0),
            ..MatchOptions::default()
        };
        let (result, timing) = match_points(&inst.points, &template, None, &options).map_err(|e| e.to_string())?;
        outcomes.push(Outcome::from_run(format!("worm{i}"), &result, &timing));
    }
    let report = EvaluationReport::new(outcomes);
    let s = &report.overall;
    let top1 = s.top_x[&1];
    let secs = start.elapsed().as_secs_f64();
    let summary = format!(
        "top-1 {:.0}%, median CR {}, {} of {} converged, {secs:.1}s",
        top1 * 100.0,
        s.median_cost_ratio.map_or("-".into(), |c| format!("{c:.2}")),
        s.converged,
        s.runs
    );
    ensure(top1 >= 0.8, || format!("top-1 below 80%: {summary}"))?;
    let cr_ok = s.median_cost_ratio.is_some_and(|c| format!("{c:.2}") == "1.00");
    ensure(cr_ok, || format!("median cost ratio is not 1.00: {summary}"))?;
    ensure(secs < 600.0, || format!("over ten minutes: {summary}"))?;
    Ok(summary)
}

fn anytime() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let corpus = generate_corpus(&WormSpec::default(), 40, 1, 0.3, &mut rng);
    let template = fit_pairs(&corpus)?;
    let inst = generate_instance(&InstanceSpec {
        worm: WormSpec::default(),
        sigma: 0.3,
        z: 0.5,
        extra_points: 6,
        seed: 8,
    })
    .map_err(|e| e.to_string())?;
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let (points, tpath, out) = (dir.path().join("p.csv"), dir.path().join("t.json"), dir.path().join("r.json"));
    save_pointset(&points, &inst.points).map_err(|e| e.to_string())?;
    template.save(&tpath).map_err(|e| e.to_string())?;
    let limit = 0.1;
    let output = Command::new(env!("CARGO_BIN_EXE_ehgm"))
        .args(["match", "--top-k", "10", "--time-limit", &limit.to_string(), "--points"])
        .arg(&points)
        .arg("--template")
        .arg(&tpath)
        .arg("--out")
        .arg(&out)
        .output()
        .map_err(|e| e.to_string())?;
    let code = output.status.code();
    ensure(code == Some(3), || format!("exit code {code:?}: {}", String::from_utf8_lossy(&output.stderr)))?;

    let result: RunResult = serde_json::from_slice(&std::fs::read(&out).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    let timing: Timing = serde_json::from_slice(&std::fs::read(ehgm_cli::run::timing_path(&out)).map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())?;
    ensure(!result.converged_exactly, || "run claims convergence".into())?;
    ensure(!result.solutions.is_empty(), || "no assignments returned".into())?;
    ensure(timing.solve_secs < limit + 0.25, || format!("search ran {:.3}s", timing.solve_secs))?;

    let loaded = load_pointset(&points, &ColumnMap::default()).map_err(|e| e.to_string())?;
    let vertices = vertex_set(10);
    let model = build_model(ModelKind::Pairs, &vertices, &loaded.points, template.bin_for(0.5), &BuildOptions::default())
        .map_err(|e| e.to_string())?;
    for s in &result.solutions {
        let mut seen = s.mapping.clone();
        seen.sort_unstable();
        seen.dedup();
        ensure(seen.len() == 20 && seen.iter().all(|&p| p < loaded.len()), || format!("rank {} is not one-to-one", s.rank))?;
        let cost = objective_eval(&model, &s.mapping).map_err(|e| e.to_string())?;
        ensure(approx_eq_rel(cost, s.cost, 1e-9), || format!("rank {} reports {} but evaluates to {cost}", s.rank, s.cost))?;
    }
    Ok(format!(
        "exit 3 after {:.2}s of search with {} valid assignments on 20 vertices and {} points",
        timing.solve_secs,
        result.solutions.len(),
        loaded.len()
    ))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Check); 8] = [
        ("oracle exactness", oracle_exactness),
        ("decomposition identity", decomposition),
        ("seeded equivalence", seeded_equivalence),
        ("worker invariance", worker_invariance),
        ("geometry suite", geometry),
        ("model-fitting suite", fitting),
        ("synthetic end-to-end", end_to_end),
        ("anytime behavior", anytime),
    ];
    let only: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        if !only.is_empty() && !only.iter().any(|o| name.contains(o.as_str())) {
            continue;
        }
        let start = Instant::now();
        let verdict = std::panic::catch_unwind(run).unwrap_or_else(|_| Err("panicked".into()));
        let took = Duration::from_secs_f64(start.elapsed().as_secs_f64());
        match verdict {
            Ok(detail) => println!("PASS {} {name}: {detail} [{took:.1?}]", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {} {name}: {detail} [{took:.1?}]", i + 1)
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
