//! Time-binned feature templates estimated from annotated postures.
//!
//! Image times are normalized per embryo so that 0 is the first twitch and 1
//! is hatching. Samples are binned by normalized time (values outside
//! `[0, 1]` fall into the end bins) and every feature group gets a mean and a
//! ridge-regularized covariance per bin. A bin with too few samples borrows
//! from its neighbours, widening symmetrically, and falls back to the whole
//! corpus when even that is not enough.

mod stats;

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

pub use stats::{
    estimate_covariance, estimate_mean, mahalanobis_cost, normalize_time, regularize, ridge, CovNorm,
};

use crate::error::{Error, Result};
use crate::posture::{posture_features, Chirality, ModelKind, Posture};

pub const TEMPLATE_VERSION: u32 = 1;

/// One annotated image of one embryo. Times are in minutes.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnotatedSample {
    pub embryo_id: String,
    pub image_time: f64,
    pub first_twitch: f64,
    pub hatch_time: f64,
    pub posture: Posture,
}

impl AnnotatedSample {
    pub fn normalized_time(&self) -> Result<f64> {
        normalize_time(self.image_time, self.first_twitch, self.hatch_time)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateMode {
    /// Means and covariances of the features themselves.
    #[default]
    Corpus,
    /// Statistics of frame-to-frame feature differences; at match time the
    /// previous frame's features serve as the means.
    PriorFrame,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig {
    pub model: ModelKind,
    pub bin_width: f64,
    /// Bins with fewer samples borrow from their neighbours.
    pub min_samples: usize,
    pub cov_norm: CovNorm,
    pub chirality: Chirality,
    pub mode: TemplateMode,
}

impl FitConfig {
    pub fn new(model: ModelKind) -> Self {
        Self {
            model,
            bin_width: 0.1,
            min_samples: 5,
            cov_norm: CovNorm::Sample,
            chirality: Chirality::Right,
            mode: TemplateMode::Corpus,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupStats {
    pub names: Vec<String>,
    pub mean: Vec<f64>,
    /// Regularized covariance, row-major.
    pub covariance: Vec<f64>,
    /// Inverse of `covariance`, row-major.
    pub inverse: Vec<f64>,
}

impl GroupStats {
    pub fn inverse_matrix(&self) -> DMatrix<f64> {
        let n = self.mean.len();
        DMatrix::from_row_slice(n, n, &self.inverse)
    }

    pub fn covariance_matrix(&self) -> DMatrix<f64> {
        let n = self.mean.len();
        DMatrix::from_row_slice(n, n, &self.covariance)
    }
}

/// Where a bin's statistics came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum BinSource {
    Own,
    /// Bins `first..=last` pooled together.
    Merged { first: usize, last: usize },
    Global,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemplateBin {
    pub lower: f64,
    pub upper: f64,
    pub source: BinSource,
    /// Rows behind the statistics.
    pub samples: usize,
    pub groups: BTreeMap<String, GroupStats>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemplateStats {
    pub version: u32,
    pub model: ModelKind,
    pub n_pairs: usize,
    pub chirality: Chirality,
    pub cov_norm: CovNorm,
    pub mode: TemplateMode,
    pub bin_edges: Vec<f64>,
    pub bins: Vec<TemplateBin>,
}

impl TemplateStats {
    /// Bin index for a normalized time, clamped to the end bins.
    pub fn bin_index(&self, z: f64) -> usize {
        bin_of(&self.bin_edges, z)
    }

    pub fn bin_for(&self, z: f64) -> &TemplateBin {
        &self.bins[self.bin_index(z)]
    }

    /// The bin for `z` with every mean replaced by the features of the
    /// previous frame. Meant for prior-frame templates.
    pub fn centered_on(&self, z: f64, previous: &Posture) -> Result<TemplateBin> {
        if previous.n_pairs() != self.n_pairs {
            return Err(Error::TemplateMismatch(format!(
                "template has {} pairs, previous frame has {}",
                self.n_pairs,
                previous.n_pairs()
            )));
        }
        let mut bin = self.bin_for(z).clone();
        for (group, values) in posture_features(self.model, previous, self.chirality)? {
            let stats = bin
                .groups
                .get_mut(&group.key)
                .ok_or_else(|| Error::TemplateMismatch(format!("template has no group {}", group.key)))?;
            stats.mean = values;
        }
        Ok(bin)
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::TemplateFormat(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let t: Self = serde_json::from_str(text).map_err(|e| Error::TemplateFormat(e.to_string()))?;
        if t.version != TEMPLATE_VERSION {
            return Err(Error::TemplateFormat(format!(
                "unsupported template version {}",
                t.version
            )));
        }
        if t.bins.is_empty() || t.bin_edges.len() != t.bins.len() + 1 {
            return Err(Error::TemplateFormat("bin edges do not match the bins".into()));
        }
        Ok(t)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()? + "\n").map_err(|e| Error::TemplateFormat(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::TemplateFormat(e.to_string()))?;
        Self::from_json(&text)
    }
}

fn bin_of(edges: &[f64], z: f64) -> usize {
    let n = edges.len() - 1;
    edges[1..n].partition_point(|&e| e <= z)
}

fn bin_edges(width: f64) -> Result<Vec<f64>> {
    if !(width > 0.0 && width <= 1.0) {
        return Err(Error::InvalidInput(format!("bin width {width} is outside (0, 1]")));
    }
    let n = (1.0 / width - 1e-9).ceil() as usize;
    Ok((0..=n).map(|i| (i as f64 * width).min(1.0)).collect())
}

/// One row per sample or frame pair: normalized time and the feature values
/// of every group, keyed by group.
struct Row {
    z: f64,
    values: Vec<Vec<f64>>,
}

fn sample_rows(
    samples: &[&AnnotatedSample],
    config: &FitConfig,
) -> Result<(Vec<(String, Vec<String>)>, Vec<Row>)> {
    let mut layout = None;
    let mut rows = Vec::new();
    let features = |s: &AnnotatedSample| posture_features(config.model, &s.posture, config.chirality);
    let mut push = |z: f64, groups: Vec<(crate::posture::FeatureGroup, Vec<f64>)>| {
        if layout.is_none() {
            layout = Some(groups.iter().map(|(g, _)| (g.key.clone(), g.names.clone())).collect());
        }
        rows.push(Row {
            z,
            values: groups.into_iter().map(|(_, v)| v).collect(),
        });
    };
    match config.mode {
        TemplateMode::Corpus => {
            for s in samples {
                push(s.normalized_time()?, features(s)?);
            }
        }
        TemplateMode::PriorFrame => {
            let mut by_embryo: BTreeMap<&str, Vec<&AnnotatedSample>> = BTreeMap::new();
            for s in samples {
                by_embryo.entry(&s.embryo_id).or_default().push(s);
            }
            for frames in by_embryo.values_mut() {
                frames.sort_by(|a, b| a.image_time.total_cmp(&b.image_time));
                for w in frames.windows(2) {
                    let before = features(w[0])?;
                    let mut after = features(w[1])?;
                    for ((_, a), (_, b)) in after.iter_mut().zip(&before) {
                        for (x, y) in a.iter_mut().zip(b) {
                            *x -= y;
                        }
                    }
                    push(w[1].normalized_time()?, after);
                }
            }
        }
    }
    let layout = layout.ok_or_else(|| Error::InsufficientData("no training rows".into()))?;
    Ok((layout, rows))
}

fn group_stats(
    layout: &[(String, Vec<String>)],
    rows: &[&Row],
    norm: CovNorm,
) -> Result<BTreeMap<String, GroupStats>> {
    let mut out = BTreeMap::new();
    for (g, (key, names)) in layout.iter().enumerate() {
        let values: Vec<Vec<f64>> = rows.iter().map(|r| r.values[g].clone()).collect();
        let mean = estimate_mean(&values)?;
        let n = mean.len();
        let raw = if values.len() >= 2 {
            estimate_covariance(&values, &mean, norm)?
        } else {
            DMatrix::zeros(n, n)
        };
        let (cov, inv) = regularize(&raw)?;
        let row_major = |m: &DMatrix<f64>| m.transpose().as_slice().to_vec();
        out.insert(
            key.clone(),
            GroupStats {
                names: names.clone(),
                mean,
                covariance: row_major(&cov),
                inverse: row_major(&inv),
            },
        );
    }
    Ok(out)
}

/// Fits a template from `corpus`, leaving out every sample of the embryo
/// `leave_out` when given.
pub fn fit_templates(corpus: &[AnnotatedSample], config: &FitConfig, leave_out: Option<&str>) -> Result<TemplateStats> {
    if let Some(w) = leave_out {
        let embryos: BTreeSet<&str> = corpus.iter().map(|s| s.embryo_id.as_str()).collect();
        if embryos.len() < 2 {
            return Err(Error::InsufficientData(format!(
                "leaving out {w:?} needs at least two embryos"
            )));
        }
    }
    let samples: Vec<&AnnotatedSample> = corpus
        .iter()
        .filter(|s| leave_out != Some(s.embryo_id.as_str()))
        .collect();
    let n_pairs = samples
        .first()
        .ok_or_else(|| Error::InsufficientData("empty training corpus".into()))?
        .posture
        .n_pairs();
    if let Some(s) = samples.iter().find(|s| s.posture.n_pairs() != n_pairs) {
        return Err(Error::InsufficientData(format!(
            "embryo {} has {} pairs, expected {n_pairs}",
            s.embryo_id,
            s.posture.n_pairs()
        )));
    }
    if config.min_samples == 0 {
        return Err(Error::InvalidInput("min_samples must be at least 1".into()));
    }
    let edges = bin_edges(config.bin_width)?;
    let (layout, rows) = sample_rows(&samples, config)?;
    let n_bins = edges.len() - 1;
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); n_bins];
    for (i, r) in rows.iter().enumerate() {
        members[bin_of(&edges, r.z)].push(i);
    }
    let all: Vec<&Row> = rows.iter().collect();
    let global = group_stats(&layout, &all, config.cov_norm)?;

    let mut bins = Vec::with_capacity(n_bins);
    for b in 0..n_bins {
        let mut source = BinSource::Global;
        let mut chosen: Vec<usize> = Vec::new();
        for radius in 0..n_bins {
            let (first, last) = (b.saturating_sub(radius), (b + radius).min(n_bins - 1));
            if first == 0 && last == n_bins - 1 && radius > 0 {
                break;
            }
            let mut idx: Vec<usize> = (first..=last).flat_map(|j| members[j].iter().copied()).collect();
            if idx.len() >= config.min_samples {
                idx.sort_unstable();
                chosen = idx;
                source = if radius == 0 {
                    BinSource::Own
                } else {
                    BinSource::Merged { first, last }
                };
                break;
            }
        }
        let (groups, count) = match source {
            BinSource::Global => (global.clone(), rows.len()),
            _ => {
                let picked: Vec<&Row> = chosen.iter().map(|&i| &rows[i]).collect();
                (group_stats(&layout, &picked, config.cov_norm)?, picked.len())
            }
        };
        bins.push(TemplateBin {
            lower: edges[b],
            upper: edges[b + 1],
            source,
            samples: count,
            groups,
        });
    }
    Ok(TemplateStats {
        version: TEMPLATE_VERSION,
        model: config.model,
        n_pairs,
        chirality: config.chirality,
        cov_norm: config.cov_norm,
        mode: config.mode,
        bin_edges: edges,
        bins,
    })
}
