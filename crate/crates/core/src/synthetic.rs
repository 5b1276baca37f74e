//! Synthetic coiled worms with known seam cell identities.
//!
//! The midline is a helix parameterized by arc length. Pairs sit at regular
//! steps along it, each rung tilted between the helix normal and binormal so
//! the two sides are not interchangeable. Worms get longer, tighter, and
//! slightly narrower toward the head as normalized time advances.

use std::f64::consts::PI;

use nalgebra::{Rotation3, Unit};
use rand::Rng;
use rand_distr::{Distribution, Normal, UnitSphere};

use crate::fitting::AnnotatedSample;
use crate::posture::Posture;
use crate::types::Vec3;

#[derive(Debug, Clone, PartialEq)]
pub struct WormSpec {
    pub n_pairs: usize,
    /// Arc length between successive pairs at the first twitch, µm.
    pub spacing: f64,
    /// Relative spacing growth by hatching.
    pub elongation: f64,
    /// Tail pair width, µm.
    pub width: f64,
    /// Relative width lost per pair toward the head.
    pub taper: f64,
    /// Helix radius at the first twitch, µm. Zero gives a straight worm.
    pub coil_radius: f64,
    /// Relative radius lost by hatching.
    pub tightening: f64,
    /// Axial advance per helix turn, µm.
    pub pitch: f64,
    /// Angle of the rungs from the helix normal toward the binormal, degrees.
    pub rung_tilt: f64,
    /// Relative spread of the per-worm shape parameters.
    pub variation: f64,
    /// Apply a random rotation and translation.
    pub random_pose: bool,
}

impl Default for WormSpec {
    fn default() -> Self {
        Self {
            n_pairs: 10,
            spacing: 5.0,
            elongation: 0.3,
            width: 4.0,
            taper: 0.04,
            coil_radius: 7.0,
            tightening: 0.2,
            pitch: 14.0,
            rung_tilt: 60.0,
            variation: 0.05,
            random_pose: true,
        }
    }
}

impl WormSpec {
    /// Straight, untwisted, unvarying worm along the x axis.
    pub fn straight(n_pairs: usize) -> Self {
        Self {
            n_pairs,
            coil_radius: 0.0,
            taper: 0.0,
            variation: 0.0,
            random_pose: false,
            ..Self::default()
        }
    }
}

fn jitter<R: Rng + ?Sized>(spread: f64, rng: &mut R) -> f64 {
    if spread == 0.0 {
        return 1.0;
    }
    1.0 + spread * Normal::new(0.0, 1.0).expect("unit normal").sample(rng)
}

/// One worm at normalized time `z` with Gaussian positional noise `sigma`.
pub fn generate_worm<R: Rng + ?Sized>(spec: &WormSpec, z: f64, sigma: f64, rng: &mut R) -> Posture {
    assert!(spec.n_pairs >= 2, "a worm needs at least two pairs");
    let zc = z.clamp(0.0, 1.0);
    let spacing = spec.spacing * (1.0 + spec.elongation * zc) * jitter(spec.variation, rng);
    let width = spec.width * jitter(spec.variation, rng);
    let radius = spec.coil_radius * (1.0 - spec.tightening * zc) * jitter(spec.variation, rng);
    let pitch = spec.pitch * jitter(spec.variation, rng);
    let tilt = (spec.rung_tilt * jitter(spec.variation, rng)).to_radians();

    let c = pitch / (2.0 * PI);
    let rho = (radius * radius + c * c).sqrt();
    let phase = if spec.random_pose { rng.gen::<f64>() * 2.0 * PI * rho } else { 0.0 };
    // midline position and rung direction at arc length s
    let frame = |s: f64| -> (Vec3, Vec3) {
        if radius == 0.0 {
            return (Vec3::new(s, 0.0, 0.0), Vec3::new(0.0, 1.0, 0.0));
        }
        let t = s / rho;
        let p = Vec3::new(radius * t.cos(), radius * t.sin(), c * t);
        let tangent = Vec3::new(-radius * t.sin(), radius * t.cos(), c) / rho;
        let normal = Vec3::new(-t.cos(), -t.sin(), 0.0);
        let binormal = tangent.cross(&normal);
        (p, normal * tilt.cos() + binormal * tilt.sin())
    };

    let (rotation, shift) = if spec.random_pose {
        let axis: [f64; 3] = UnitSphere.sample(rng);
        let angle = rng.gen::<f64>() * 2.0 * PI;
        let rot = Rotation3::from_axis_angle(&Unit::new_normalize(Vec3::from(axis)), angle);
        let shift = Vec3::new(rng.gen_range(-20.0..20.0), rng.gen_range(-20.0..20.0), rng.gen_range(-20.0..20.0));
        (rot, shift)
    } else {
        (Rotation3::identity(), Vec3::zeros())
    };
    let noise = Normal::new(0.0, sigma.max(0.0)).expect("valid sigma");
    let mut place = |p: Vec3| -> Vec3 {
        let q = rotation * p + shift;
        if sigma > 0.0 {
            q + Vec3::new(noise.sample(rng), noise.sample(rng), noise.sample(rng))
        } else {
            q
        }
    };

    let mut left = Vec::with_capacity(spec.n_pairs);
    let mut right = Vec::with_capacity(spec.n_pairs);
    for i in 0..spec.n_pairs {
        let (m, rung) = frame(phase + i as f64 * spacing);
        let half = 0.5 * width * (1.0 - spec.taper * i as f64);
        left.push(place(m + rung * half));
        right.push(place(m - rung * half));
    }
    Posture::new(left, right).expect("generated posture is valid")
}

/// `n_embryos` embryos with `frames` images each, spread evenly between first
/// twitch and hatching with a little jitter.
pub fn generate_corpus<R: Rng + ?Sized>(
    spec: &WormSpec,
    n_embryos: usize,
    frames: usize,
    sigma: f64,
    rng: &mut R,
) -> Vec<AnnotatedSample> {
    let mut out = Vec::with_capacity(n_embryos * frames);
    for e in 0..n_embryos {
        let first_twitch = rng.gen_range(400.0..500.0);
        let hatch_time = first_twitch + rng.gen_range(380.0..440.0);
        for f in 0..frames {
            let z = ((f as f64 + rng.gen::<f64>()) / frames as f64).clamp(0.0, 1.0);
            let image_time = first_twitch + z * (hatch_time - first_twitch);
            out.push(AnnotatedSample {
                embryo_id: format!("E{e:02}"),
                image_time,
                first_twitch,
                hatch_time,
                posture: generate_worm(spec, z, sigma, rng),
            });
        }
    }
    out
}
