//! Geometric features of hypothesized seam cell pairs.
//!
//! Pairs run tail to head. `L` and `R` are the left and right nuclei of a
//! pair and `M` its midpoint. Every feature is invariant under rigid motions;
//! the two twists change sign under reflection.

use crate::error::{Error, Result};
use crate::types::Vec3;

/// Shortest vector length, and smallest cross product of unit vectors, that
/// a feature accepts before reporting degenerate geometry.
pub const GEOMETRY_EPS: f64 = 1e-9;

fn unit(v: Vec3, what: &'static str) -> Result<Vec3> {
    let n = v.norm();
    if n < GEOMETRY_EPS || !n.is_finite() {
        return Err(Error::DegenerateGeometry(what));
    }
    Ok(v / n)
}

fn angle_degrees(a: Vec3, b: Vec3) -> f64 {
    a.dot(&b).clamp(-1.0, 1.0).acos().to_degrees()
}

/// Signed dihedral of the bond sequence `b1, b2, b3` about `b2`, in units of π.
fn dihedral(b1: Vec3, b2: Vec3, b3: Vec3) -> Result<f64> {
    let n1 = b1.cross(&b2);
    let n2 = b2.cross(&b3);
    if n1.norm() < GEOMETRY_EPS || n2.norm() < GEOMETRY_EPS {
        return Err(Error::DegenerateGeometry("parallel bonds in twist"));
    }
    Ok(n1.cross(&n2).dot(&b2).atan2(n1.dot(&n2)) / std::f64::consts::PI)
}

pub fn midpoint(l: Vec3, r: Vec3) -> Vec3 {
    (l + r) / 2.0
}

/// Width of the worm at one pair.
pub fn pair_distance(l: Vec3, r: Vec3) -> f64 {
    (l - r).norm()
}

/// Lengths of the chords between successive nuclei of one side.
pub fn side_chord_lengths(side: &[Vec3]) -> Vec<f64> {
    side.windows(2).map(|w| (w[1] - w[0]).norm()).collect()
}

/// Ratio of two successive pair distances.
pub fn pair_distance_ratio(pd: f64, pd_next: f64) -> Result<f64> {
    if pd_next < GEOMETRY_EPS {
        return Err(Error::DegenerateGeometry("zero pair distance in ratio"));
    }
    Ok(pd / pd_next)
}

pub fn midpoint_distance(m: Vec3, m_next: Vec3) -> f64 {
    (m_next - m).norm()
}

/// Cosine between the left and right side chords of two successive pairs.
pub fn side_cosine(l: Vec3, l_next: Vec3, r: Vec3, r_next: Vec3) -> Result<f64> {
    let a = unit(r_next - r, "zero right side chord")?;
    let b = unit(l_next - l, "zero left side chord")?;
    Ok(a.dot(&b).clamp(-1.0, 1.0))
}

/// Twist about the rung of the first pair, seen from the side, in `[-1, 1]`.
pub fn lateral_twist(l: Vec3, r: Vec3, l_next: Vec3, r_next: Vec3) -> Result<f64> {
    let b1 = unit(l_next - l, "zero left side chord")?;
    let b2 = unit(l - r, "zero pair distance")?;
    let b3 = unit(r - r_next, "zero right side chord")?;
    dihedral(b1, b2, b3)
}

/// Twist between the two rungs about the right side chord, in `[-1, 1]`.
pub fn axial_twist(l: Vec3, r: Vec3, l_next: Vec3, r_next: Vec3) -> Result<f64> {
    let b2 = unit(r - l, "zero pair distance")?;
    let b3 = unit(r_next - r, "zero right side chord")?;
    let b4 = unit(l_next - r_next, "zero pair distance")?;
    dihedral(b2, b3, b4)
}

/// Angle at the middle of three successive midpoints, in degrees. A straight
/// worm gives 180 and one folded back onto itself gives 0.
pub fn midpoint_bend(m0: Vec3, m1: Vec3, m2: Vec3) -> Result<f64> {
    let back = unit(m0 - m1, "coincident midpoints")?;
    let ahead = unit(m2 - m1, "coincident midpoints")?;
    Ok(angle_degrees(back, ahead))
}

/// Angle in degrees between the planes spanned by the middle rung and each
/// of the two midpoint chords around it.
pub fn planar_angle(l: [Vec3; 3], r: [Vec3; 3]) -> Result<f64> {
    let m: Vec<Vec3> = (0..3).map(|j| midpoint(l[j], r[j])).collect();
    let rung = r[1] - l[1];
    let n1 = unit(rung.cross(&(m[1] - m[0])), "rung parallel to midpoint chord")?;
    let n2 = unit(rung.cross(&(m[2] - m[1])), "rung parallel to midpoint chord")?;
    Ok(angle_degrees(n1, n2))
}
