//! Synthetic matching instances and annotated corpora on disk.

use ehgm::fitting::AnnotatedSample;
use ehgm::posture::Posture;
use ehgm::synthetic::{generate_worm, WormSpec};
use ehgm::{PointSet, Vec3, VertexSet};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};
use crate::io::{LabeledPoints, MIN_SEPARATION};

/// Distractors are kept at least this far from every other nucleus, µm.
pub const DISTRACTOR_CLEARANCE: f64 = 2.0;

/// Seam cell names for 10 or 11 pairs, generic pair names otherwise.
pub fn vertex_set(n_pairs: usize) -> VertexSet {
    VertexSet::seam_cells(n_pairs).unwrap_or_else(|_| VertexSet::pairs(n_pairs))
}

#[derive(Debug, Clone)]
pub struct InstanceSpec {
    pub worm: WormSpec,
    pub sigma: f64,
    pub z: f64,
    /// Unlabeled nuclei scattered around the worm.
    pub extra_points: usize,
    pub seed: u64,
}

/// A shuffled, labeled point set and the posture behind it.
#[derive(Debug, Clone)]
pub struct Instance {
    pub points: LabeledPoints,
    pub posture: Posture,
    /// Point index of every vertex.
    pub truth: Vec<usize>,
}

/// Deterministic for a given spec.
pub fn generate_instance(spec: &InstanceSpec) -> Result<Instance> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let posture = generate_worm(&spec.worm, spec.z, spec.sigma, &mut rng);
    instance_from_posture(posture, spec.extra_points, &mut rng)
}

/// Shuffles a known posture into a labeled point set, adding `extra_points`
/// distractors.
pub fn instance_from_posture<R: Rng + ?Sized>(posture: Posture, extra_points: usize, rng: &mut R) -> Result<Instance> {
    let vertices = vertex_set(posture.n_pairs());
    let mut coords = posture.interleaved();
    let mut labels: Vec<String> = vertices.labels().to_vec();

    let (lo, hi) = bounding_box(&coords, 5.0);
    let mut attempts = 0;
    while labels.len() < vertices.len() + extra_points {
        attempts += 1;
        if attempts > 100_000 {
            return Err(CliError::Usage("could not place the requested distractors".into()));
        }
        let p = Vec3::new(
            rng.gen_range(lo.x..hi.x),
            rng.gen_range(lo.y..hi.y),
            rng.gen_range(lo.z..hi.z),
        );
        if coords.iter().all(|q| (p - q).norm() >= DISTRACTOR_CLEARANCE) {
            coords.push(p);
            labels.push(String::new());
        }
    }

    let mut order: Vec<usize> = (0..coords.len()).collect();
    order.shuffle(rng);
    let mut truth = vec![0; vertices.len()];
    for (pos, &src) in order.iter().enumerate() {
        if src < vertices.len() {
            truth[src] = pos;
        }
    }
    let points = LabeledPoints {
        ids: (0..coords.len()).map(|i| i.to_string()).collect(),
        points: PointSet::with_min_separation(order.iter().map(|&i| coords[i]).collect(), MIN_SEPARATION)?,
        labels: Some(order.iter().map(|&i| labels[i].clone()).collect()),
    };
    Ok(Instance { points, posture, truth })
}

fn bounding_box(coords: &[Vec3], margin: f64) -> (Vec3, Vec3) {
    let mut lo = coords[0];
    let mut hi = coords[0];
    for p in coords {
        lo = lo.inf(p);
        hi = hi.sup(p);
    }
    let m = Vec3::repeat(margin);
    (lo - m, hi + m)
}

/// Annotated corpus file used by `fit`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusFile {
    pub samples: Vec<SampleRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub embryo_id: String,
    pub image_time: f64,
    pub first_twitch: f64,
    pub hatch_time: f64,
    /// Left nuclei, tail to head, µm.
    pub left: Vec<[f64; 3]>,
    pub right: Vec<[f64; 3]>,
}

impl From<&AnnotatedSample> for SampleRecord {
    fn from(s: &AnnotatedSample) -> Self {
        let arr = |v: &[Vec3]| v.iter().map(|p| [p.x, p.y, p.z]).collect();
        Self {
            embryo_id: s.embryo_id.clone(),
            image_time: s.image_time,
            first_twitch: s.first_twitch,
            hatch_time: s.hatch_time,
            left: arr(s.posture.left()),
            right: arr(s.posture.right()),
        }
    }
}

impl SampleRecord {
    pub fn to_sample(&self) -> Result<AnnotatedSample> {
        let vecs = |v: &[[f64; 3]]| v.iter().map(|p| Vec3::from(*p)).collect();
        Ok(AnnotatedSample {
            embryo_id: self.embryo_id.clone(),
            image_time: self.image_time,
            first_twitch: self.first_twitch,
            hatch_time: self.hatch_time,
            posture: Posture::new(vecs(&self.left), vecs(&self.right))?,
        })
    }
}

impl CorpusFile {
    pub fn from_samples(samples: &[AnnotatedSample]) -> Self {
        Self {
            samples: samples.iter().map(SampleRecord::from).collect(),
        }
    }

    pub fn to_samples(&self) -> Result<Vec<AnnotatedSample>> {
        self.samples.iter().map(SampleRecord::to_sample).collect()
    }
}
