//! Constant-curvature segment kinematics.
//!
//! A segment is a circular arc of length `L` that leaves its base along +z, bends by the
//! curvature angle `θ` inside the plane at angle `φ` about z, and neither twists nor
//! stretches. Angles are radians and lengths millimetres throughout.

use std::f64::consts::PI;

use nalgebra::{Matrix3, Vector3};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::pose::{rot_y, rot_z, Pose};

/// Below this curvature angle the tip is evaluated from its Taylor series.
pub const SERIES_THRESHOLD: f64 = 1e-4;

/// Default upper bound on the curvature angle.
pub const THETA_MAX: f64 = PI;

/// Configuration of one arc segment: bending plane `phi`, curvature angle `theta`, arc `length`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ArcParams {
    phi: f64,
    theta: f64,
    length: f64,
}

impl ArcParams {
    /// Validates and canonicalizes: `phi` is wrapped into (−π, π] and forced to 0 on a
    /// straight arc.
    pub fn new(phi: f64, theta: f64, length: f64) -> Result<Self> {
        Self::with_theta_max(phi, theta, length, THETA_MAX)
    }

    pub fn with_theta_max(phi: f64, theta: f64, length: f64, theta_max: f64) -> Result<Self> {
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::invalid("length", format!("must be > 0, got {length}")));
        }
        if !(theta.is_finite() && (0.0..=theta_max).contains(&theta)) {
            return Err(Error::invalid(
                "theta",
                format!("must lie in [0, {theta_max}], got {theta}"),
            ));
        }
        if !phi.is_finite() {
            return Err(Error::invalid("phi", "must be finite"));
        }
        let phi = if theta == 0.0 { 0.0 } else { wrap_angle(phi) };
        Ok(Self { phi, theta, length })
    }

    /// Straight arc of the given length.
    pub fn straight(length: f64) -> Result<Self> {
        Self::new(0.0, 0.0, length)
    }

    /// Builds an arc from its curvature vector `(θ cos φ, θ sin φ)`.
    pub fn from_curvature_vector(u: f64, v: f64, length: f64) -> Result<Self> {
        let theta = u.hypot(v);
        let phi = if theta == 0.0 { 0.0 } else { v.atan2(u) };
        Self::new(phi, theta, length)
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    /// `(θ cos φ, θ sin φ)`, smooth through the straight configuration.
    pub fn curvature_vector(&self) -> (f64, f64) {
        (self.theta * self.phi.cos(), self.theta * self.phi.sin())
    }

    /// The same arc cut into `n` equal pieces.
    pub fn subdivide(&self, n: usize) -> Vec<ArcParams> {
        let n = n.max(1);
        let piece = ArcParams {
            phi: self.phi,
            theta: self.theta / n as f64,
            length: self.length / n as f64,
        };
        vec![piece; n]
    }
}

/// Wraps an angle into (−π, π].
pub fn wrap_angle(a: f64) -> f64 {
    let mut w = a.rem_euclid(2.0 * PI);
    if w > PI {
        w -= 2.0 * PI;
    }
    w
}

/// Tip position of the arc relative to its base frame.
pub fn arc_tip_position(arc: &ArcParams) -> Vector3<f64> {
    let (s_phi, c_phi) = arc.phi.sin_cos();
    let (radial, axial) = radial_axial(arc.theta, arc.length);
    Vector3::new(c_phi * radial, s_phi * radial, axial)
}

/// In-plane tip offsets `(L(1 − cos θ)/θ, L sin θ / θ)`.
fn radial_axial(theta: f64, length: f64) -> (f64, f64) {
    if theta < SERIES_THRESHOLD {
        (length * theta / 2.0, length * (1.0 - theta * theta / 6.0))
    } else {
        // 1 − cos θ written as 2 sin²(θ/2) to avoid cancellation near the threshold.
        let half = (theta / 2.0).sin();
        (length * 2.0 * half * half / theta, length * theta.sin() / theta)
    }
}

/// Base-to-tip transform `[Rz(φ) Ry(θ) Rz(−φ) | p]`.
pub fn arc_transform(arc: &ArcParams) -> Pose {
    Pose {
        rotation: arc_rotation(arc.phi, arc.theta),
        translation: arc_tip_position(arc),
    }
}

fn arc_rotation(phi: f64, theta: f64) -> Matrix3<f64> {
    rot_z(phi) * rot_y(theta) * rot_z(-phi)
}

/// Left-to-right composition of a chain of poses.
pub fn compose(poses: &[Pose]) -> Result<Pose> {
    let (first, rest) = poses.split_first().ok_or(Error::EmptyComposition)?;
    Ok(rest.iter().fold(*first, |acc, p| acc.then(p)))
}

/// Point at arc length `s` along an arc given by its curvature vector `(u, v)` and length.
///
/// Smooth in `(u, v)` everywhere, including the straight configuration, which is what the
/// least-squares fit below needs.
pub fn arc_point(u: f64, v: f64, length: f64, s: f64) -> Vector3<f64> {
    let theta = u.hypot(v);
    let t = theta * s / length;
    let (f1, f2) = if t < SERIES_THRESHOLD {
        (0.5 - t * t / 24.0, 1.0 - t * t / 6.0)
    } else {
        let half = (t / 2.0).sin();
        (2.0 * half * half / (t * t), t.sin() / t)
    };
    let lateral = s * s / length * f1;
    Vector3::new(u * lateral, v * lateral, s * f2)
}

/// Result of fitting a constant-curvature arc to a point list.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ArcFit {
    pub arc: ArcParams,
    /// RMS distance between the points and equal-arc-length samples of the fitted arc, mm.
    pub residual: f64,
}

const FIT_MAX_ITERATIONS: usize = 200;

/// Fits `(φ, θ, L)` to an ordered point list whose first entry is the segment base.
///
/// Point `i` of `m + 1` is matched to the arc sample at `s = i·L/m`, and the RMS of the
/// distances is minimized with a Levenberg–Marquardt iteration over the curvature vector
/// and length. Collinear input yields a straight arc reaching the last point.
pub fn fit_arc(points: &[Vector3<f64>]) -> Result<ArcFit> {
    if points.len() < 3 {
        return Err(Error::TooFewPoints(points.len()));
    }
    let base = points[0];
    let rel: Vec<Vector3<f64>> = points.iter().map(|p| p - base).collect();
    let scale = rel.iter().map(|p| p.norm()).fold(0.0, f64::max);
    if scale <= 1e-12 {
        return Err(Error::DegeneratePoints("all points coincide"));
    }

    let last = *rel.last().expect("len >= 3");
    let chord = last.norm();
    if chord <= 1e-12 * scale {
        return Err(Error::DegeneratePoints("last point coincides with the base"));
    }
    let dir = last / chord;
    let collinear = rel
        .iter()
        .all(|p| (p - dir * p.dot(&dir)).norm() <= 1e-9 * scale);
    if collinear {
        let arc = ArcParams::straight(chord)?;
        let residual = rms(&rel, [0.0, 0.0, chord]);
        return Ok(ArcFit { arc, residual });
    }

    // Chord initialization: the chord leans θ/2 away from the base tangent.
    let theta0 = 2.0 * dir.z.clamp(-1.0, 1.0).acos();
    let phi0 = last.y.atan2(last.x);
    let half = theta0 / 2.0;
    let len0 = if half > 1e-6 { chord * half / half.sin() } else { chord };
    let mut params = [theta0 * phi0.cos(), theta0 * phi0.sin(), len0];

    let mut cost = sq_cost(&rel, params);
    let mut lambda = 1e-3;
    for _ in 0..FIT_MAX_ITERATIONS {
        let (jtj, jtr) = normal_equations(&rel, params);
        let mut improved = false;
        for _ in 0..30 {
            let mut a = jtj;
            for d in 0..3 {
                a[(d, d)] += lambda * jtj[(d, d)].max(1e-12);
            }
            let Some(step) = a.lu().solve(&(-jtr)) else {
                lambda *= 10.0;
                continue;
            };
            let trial = [params[0] + step[0], params[1] + step[1], params[2] + step[2]];
            if trial[2] <= 0.0 {
                lambda *= 10.0;
                continue;
            }
            let trial_cost = sq_cost(&rel, trial);
            if trial_cost <= cost {
                let rel_step = step.norm() / (1.0 + params[2].abs());
                params = trial;
                let gain = cost - trial_cost;
                cost = trial_cost;
                lambda = (lambda / 3.0).max(1e-12);
                improved = true;
                if rel_step < 1e-15 || gain <= 1e-30 {
                    return finish(&rel, params);
                }
                break;
            }
            lambda *= 4.0;
        }
        if !improved {
            break;
        }
    }
    finish(&rel, params)
}

fn finish(rel: &[Vector3<f64>], params: [f64; 3]) -> Result<ArcFit> {
    let arc = ArcParams::from_curvature_vector(params[0], params[1], params[2])?;
    Ok(ArcFit {
        arc,
        residual: rms(rel, params),
    })
}

fn sample_s(i: usize, m: usize, length: f64) -> f64 {
    length * i as f64 / m as f64
}

fn sq_cost(rel: &[Vector3<f64>], params: [f64; 3]) -> f64 {
    let m = rel.len() - 1;
    rel.iter()
        .enumerate()
        .map(|(i, p)| (p - arc_point(params[0], params[1], params[2], sample_s(i, m, params[2]))).norm_squared())
        .sum()
}

fn rms(rel: &[Vector3<f64>], params: [f64; 3]) -> f64 {
    (sq_cost(rel, params) / rel.len() as f64).sqrt()
}

fn normal_equations(rel: &[Vector3<f64>], params: [f64; 3]) -> (Matrix3<f64>, Vector3<f64>) {
    let m = rel.len() - 1;
    let steps = [1e-7, 1e-7, 1e-7 * params[2].max(1.0)];
    let mut jtj = Matrix3::zeros();
    let mut jtr = Vector3::zeros();
    for (i, p) in rel.iter().enumerate() {
        let eval = |q: [f64; 3]| arc_point(q[0], q[1], q[2], sample_s(i, m, q[2]));
        let r = eval(params) - p;
        let mut cols = [Vector3::zeros(); 3];
        for (d, col) in cols.iter_mut().enumerate() {
            let mut hi = params;
            let mut lo = params;
            hi[d] += steps[d];
            lo[d] -= steps[d];
            *col = (eval(hi) - eval(lo)) / (2.0 * steps[d]);
        }
        for a in 0..3 {
            jtr[a] += cols[a].dot(&r);
            for b in 0..3 {
                jtj[(a, b)] += cols[a].dot(&cols[b]);
            }
        }
    }
    (jtj, jtr)
}
