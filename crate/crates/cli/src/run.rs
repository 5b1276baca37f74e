//! One matching run: points and a template in, ranked assignments out.

use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use ehgm::fitting::{TemplateMode, TemplateStats};
use ehgm::posture::{build_model, BuildOptions, Chirality, ModelKind, Posture};
use ehgm::{objective_eval, solve, SearchConfig, SeedSet, SolverStats, VertexSet};
use serde::{Deserialize, Serialize};

use crate::error::{exit, CliError, Result};
use crate::io::{load_pointset, ColumnMap, LabeledPoints};
use crate::synth::vertex_set;

/// A vertex label fixed to a point id.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedSpec {
    pub vertex: String,
    pub point: String,
}

/// Parses `TL=3,TR=7`.
pub fn parse_seeds(text: &str) -> Result<Vec<SeedSpec>> {
    text.split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(|part| {
            let (vertex, point) = part
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("seed {part:?} is not LABEL=POINT_ID")))?;
            Ok(SeedSpec {
                vertex: vertex.trim().to_string(),
                point: point.trim().to_string(),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchOptions {
    /// Defaults to the template's model.
    pub model: Option<ModelKind>,
    /// Normalized developmental time of the image.
    pub z: f64,
    pub seeds: Vec<SeedSpec>,
    pub k: usize,
    pub top_k: usize,
    pub time_limit_secs: Option<f64>,
    pub workers: usize,
    /// Must agree with the template when given.
    pub chirality: Option<Chirality>,
}

impl Default for MatchOptions {
    fn default() -> Self {
        Self {
            model: None,
            z: 0.5,
            seeds: Vec::new(),
            k: 2,
            top_k: 1,
            time_limit_secs: None,
            workers: 1,
            chirality: None,
        }
    }
}

/// Everything needed to reproduce a `match` run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub points: PathBuf,
    pub template: PathBuf,
    /// Labeled previous frame, required by prior-frame templates.
    pub previous: Option<PathBuf>,
    pub columns: ColumnMap,
    pub options: MatchOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionRow {
    pub rank: usize,
    pub cost: f64,
    /// Point index of every vertex.
    pub mapping: Vec<usize>,
    /// Point id of every vertex.
    pub point_ids: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthRow {
    pub mapping: Vec<usize>,
    pub cost: f64,
    /// 1-based position among the reported solutions.
    pub rank: Option<usize>,
    /// Truth cost over best cost.
    pub cost_ratio: Option<f64>,
}

/// Counters that do not depend on timing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunStats {
    pub nodes_expanded: u64,
    pub candidates_pruned: u64,
    pub leaves_evaluated: u64,
    pub lazy_entries_computed: u64,
    /// Pruning bound after every accepted assignment; `None` while unbounded.
    pub bound_history: Vec<Option<f64>>,
}

impl From<&SolverStats> for RunStats {
    fn from(s: &SolverStats) -> Self {
        Self {
            nodes_expanded: s.nodes_expanded,
            candidates_pruned: s.candidates_pruned,
            leaves_evaluated: s.leaves_evaluated,
            lazy_entries_computed: s.lazy_entries_computed,
            bound_history: s.bound_history.iter().map(|b| b.is_finite().then_some(*b)).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub manifest: Option<RunManifest>,
    pub model: ModelKind,
    pub vertex_labels: Vec<String>,
    pub n_points: usize,
    pub solutions: Vec<SolutionRow>,
    pub converged_exactly: bool,
    pub stats: RunStats,
    pub truth: Option<TruthRow>,
}

impl RunResult {
    pub fn exit_code(&self) -> i32 {
        if self.converged_exactly {
            exit::OK
        } else {
            exit::TIME_LIMIT
        }
    }
}

/// Wall-clock figures, kept apart from the result so that results are
/// reproducible byte for byte.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub build_secs: f64,
    pub solve_secs: f64,
    pub total_secs: f64,
}

fn seed_set(seeds: &[SeedSpec], vertices: &VertexSet, points: &LabeledPoints) -> Result<SeedSet> {
    let mut set = SeedSet::new();
    for s in seeds {
        let v = vertices
            .index_of(&s.vertex)
            .ok_or_else(|| ehgm::Error::SeedConflict(format!("unknown vertex {:?}", s.vertex)))?;
        let p = points
            .index_of_id(&s.point)
            .ok_or_else(|| ehgm::Error::SeedConflict(format!("unknown point id {:?}", s.point)))?;
        set.insert(v, p)?;
    }
    Ok(set)
}

/// Matches `points` against `template`. `previous` is the prior frame for
/// prior-frame templates.
pub fn match_points(
    points: &LabeledPoints,
    template: &TemplateStats,
    previous: Option<&Posture>,
    options: &MatchOptions,
) -> Result<(RunResult, Timing)> {
    let start = Instant::now();
    let model = options.model.unwrap_or(template.model);
    if let Some(c) = options.chirality {
        if c != template.chirality {
            return Err(ehgm::Error::TemplateMismatch(format!(
                "template was fitted with {:?} chirality",
                template.chirality
            ))
            .into());
        }
    }
    let vertices = vertex_set(template.n_pairs);
    if points.len() < vertices.len() {
        return Err(ehgm::Error::InfeasibleSize {
            n_vertices: vertices.len(),
            n_points: points.len(),
        }
        .into());
    }
    let seeds = seed_set(&options.seeds, &vertices, points)?;
    let centered;
    let bin = match template.mode {
        TemplateMode::Corpus => template.bin_for(options.z),
        TemplateMode::PriorFrame => {
            let prev = previous.ok_or_else(|| {
                CliError::Usage("a prior-frame template needs the previous frame".into())
            })?;
            centered = template.centered_on(options.z, prev)?;
            &centered
        }
    };
    let build = BuildOptions {
        branch_size: options.k,
        chirality: template.chirality,
        ..BuildOptions::default()
    };
    let hypergraph = build_model(model, &vertices, &points.points, bin, &build)?;
    let build_secs = start.elapsed().as_secs_f64();

    let mut config = SearchConfig::new(options.k)
        .with_top_k(options.top_k)
        .with_workers(options.workers)
        .with_seeds(seeds);
    if let Some(t) = options.time_limit_secs {
        config = config.with_time_limit(Duration::from_secs_f64(t.max(0.0)));
    }
    let solved = solve(&vertices, &points.points, &hypergraph, &config)?;

    let solutions: Vec<SolutionRow> = solved
        .solutions
        .iter()
        .enumerate()
        .map(|(i, s)| SolutionRow {
            rank: i + 1,
            cost: s.cost,
            mapping: s.mapping.clone(),
            point_ids: s.mapping.iter().map(|&p| points.ids[p].clone()).collect(),
        })
        .collect();
    let truth = match points.ground_truth(vertices.labels()) {
        Some(mapping) => {
            let cost = objective_eval(&hypergraph, &mapping)?;
            let rank = solutions.iter().position(|s| s.mapping == mapping).map(|i| i + 1);
            let cost_ratio = solutions.first().and_then(|best| match (cost, best.cost) {
                (t, b) if b > 0.0 => Some(t / b),
                (t, _) if t == 0.0 => Some(1.0),
                _ => None,
            });
            Some(TruthRow {
                mapping,
                cost,
                rank,
                cost_ratio,
            })
        }
        None => None,
    };
    let result = RunResult {
        manifest: None,
        model,
        vertex_labels: vertices.labels().to_vec(),
        n_points: points.len(),
        solutions,
        converged_exactly: solved.converged_exactly,
        stats: RunStats::from(&solved.stats),
        truth,
    };
    let timing = Timing {
        build_secs,
        solve_secs: solved.stats.wall_time_secs,
        total_secs: start.elapsed().as_secs_f64(),
    };
    Ok((result, timing))
}

/// Labeled point file read back as a posture in vertex order.
pub fn load_posture(path: &Path, columns: &ColumnMap, n_pairs: usize) -> Result<Posture> {
    let points = load_pointset(path, columns)?;
    let vertices = vertex_set(n_pairs);
    let mapping = points.ground_truth(vertices.labels()).ok_or_else(|| CliError::Format {
        path: path.display().to_string(),
        message: "every vertex label must appear exactly once".into(),
    })?;
    let coords: Vec<_> = mapping.iter().map(|&p| points.points.get(p)).collect();
    Ok(Posture::from_interleaved(&coords)?)
}

pub fn run_manifest(manifest: &RunManifest) -> Result<(RunResult, Timing)> {
    let points = load_pointset(&manifest.points, &manifest.columns)?;
    let template = TemplateStats::load(&manifest.template)?;
    let previous = match &manifest.previous {
        Some(p) => Some(load_posture(p, &manifest.columns, template.n_pairs)?),
        None => None,
    };
    let (mut result, timing) = match_points(&points, &template, previous.as_ref(), &manifest.options)?;
    result.manifest = Some(manifest.clone());
    Ok((result, timing))
}

/// Path of the timing sidecar written next to a result file.
pub fn timing_path(result: &Path) -> PathBuf {
    let mut name = result.as_os_str().to_owned();
    name.push(".timing.json");
    PathBuf::from(name)
}
