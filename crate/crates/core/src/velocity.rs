//! Planar ego-velocity from one Doppler frame.
//!
//! A static world seen from a sensor moving at `(vx, vy)` produces the radial
//! field `v_r(theta) = -(vx cos(theta) + vy sin(theta))`. The fit below solves
//! the unsigned model `v_r = a cos(theta) + b sin(theta)` and the public
//! estimate negates it, so callers always receive the sensor's own velocity.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{wrap_angle, TimeStamp, Vec2};
use crate::ingest::DopplerTarget;

/// Targets closer than this to the z-axis are dropped before fitting.
pub const DEFAULT_EPS_PLANAR: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialObservation {
    pub theta: f64,
    pub v_r: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BodyVelocity {
    pub vx: f64,
    pub vy: f64,
    pub t: TimeStamp,
    pub n_inliers: usize,
    pub residual_rms: f64,
}

impl BodyVelocity {
    pub fn vec(&self) -> Vec2 {
        Vec2::new(self.vx, self.vy)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RansacParams {
    pub max_iterations: usize,
    /// m/s
    pub inlier_threshold: f64,
    pub min_inliers: usize,
    pub seed: u64,
    /// Minimum distance from the z-axis for a target to be used, meters.
    pub eps_planar: f64,
}

impl Default for RansacParams {
    fn default() -> Self {
        Self {
            max_iterations: 100,
            inlier_threshold: 0.1,
            min_inliers: 5,
            seed: 0,
            eps_planar: DEFAULT_EPS_PLANAR,
        }
    }
}

impl RansacParams {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::InvalidParams("ransac.max_iterations must be > 0".into()));
        }
        if !(self.inlier_threshold > 0.0) {
            return Err(Error::InvalidParams("ransac.inlier_threshold must be > 0".into()));
        }
        if self.min_inliers < 2 {
            return Err(Error::InvalidParams("ransac.min_inliers must be >= 2".into()));
        }
        if !(self.eps_planar >= 0.0) {
            return Err(Error::InvalidParams("ransac.eps_planar must be >= 0".into()));
        }
        Ok(())
    }
}

/// Projects a target's Doppler speed onto the xy plane as
/// `v_r = (sqrt(x^2 + y^2) / r) * v_d`.
pub fn project_radial(target: &DopplerTarget, eps_planar: f64) -> Result<RadialObservation> {
    let (x, y) = (target.x as f64, target.y as f64);
    let planar = x.hypot(y);
    let r = target.range();
    if planar <= eps_planar || r <= 0.0 {
        return Err(Error::DegenerateProjection { planar });
    }
    Ok(RadialObservation {
        theta: wrap_angle(y.atan2(x)),
        v_r: planar / r * target.doppler as f64,
    })
}

/// Least-squares fit of `v_r = a cos(theta) + b sin(theta)`, returned as `(a, b)`.
///
/// Solved through the 2x2 normal equations; the determinant test doubles as
/// the rank check.
pub fn solve_velocity_lsq(obs: &[RadialObservation]) -> Result<Vec2> {
    let (mut scc, mut scs, mut sss, mut bc, mut bs) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for o in obs {
        let (s, c) = o.theta.sin_cos();
        scc += c * c;
        scs += c * s;
        sss += s * s;
        bc += c * o.v_r;
        bs += s * o.v_r;
    }
    let det = scc * sss - scs * scs;
    // relative to the trace squared so the test is scale free
    let scale = (scc + sss).powi(2);
    if obs.len() < 2 || !(det > 1e-12 * scale) {
        return Err(Error::DegenerateGeometry);
    }
    Ok(Vec2::new(
        (sss * bc - scs * bs) / det,
        (scc * bs - scs * bc) / det,
    ))
}

fn residual(model: Vec2, o: &RadialObservation) -> f64 {
    let (s, c) = o.theta.sin_cos();
    o.v_r - (model.x * c + model.y * s)
}

/// Exact fit through two observations; `None` when their azimuths are too
/// close to pin down both components.
fn fit_pair(a: &RadialObservation, b: &RadialObservation) -> Option<Vec2> {
    let (sa, ca) = a.theta.sin_cos();
    let (sb, cb) = b.theta.sin_cos();
    let det = ca * sb - sa * cb;
    if det.abs() < 1e-6 {
        return None;
    }
    Some(Vec2::new(
        (a.v_r * sb - b.v_r * sa) / det,
        (ca * b.v_r - cb * a.v_r) / det,
    ))
}

/// Projects and orders a frame so sampling does not depend on input order.
fn sorted_observations(frame: &[DopplerTarget], eps_planar: f64) -> Vec<RadialObservation> {
    let mut keyed: Vec<(f64, RadialObservation)> = frame
        .iter()
        .filter_map(|t| project_radial(t, eps_planar).ok().map(|o| (t.range(), o)))
        .collect();
    keyed.sort_by(|a, b| {
        a.1.theta
            .total_cmp(&b.1.theta)
            .then(a.0.total_cmp(&b.0))
            .then(a.1.v_r.total_cmp(&b.1.v_r))
    });
    keyed.into_iter().map(|(_, o)| o).collect()
}

/// Indices of the largest RANSAC consensus set over 2-point hypotheses.
pub fn ransac_consensus(obs: &[RadialObservation], params: &RansacParams) -> Vec<usize> {
    let n = obs.len();
    let mut best: Vec<usize> = Vec::new();
    if n < 2 {
        return best;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    for _ in 0..params.max_iterations {
        let i = rng.random_range(0..n);
        let mut j = rng.random_range(0..n - 1);
        if j >= i {
            j += 1;
        }
        let Some(model) = fit_pair(&obs[i], &obs[j]) else {
            continue;
        };
        let inliers: Vec<usize> = (0..n)
            .filter(|&k| residual(model, &obs[k]).abs() < params.inlier_threshold)
            .collect();
        if inliers.len() > best.len() {
            best = inliers;
        }
    }
    best
}

/// Estimates the sensor's planar velocity from one Doppler frame.
pub fn estimate_velocity(
    frame: &[DopplerTarget],
    t: TimeStamp,
    params: &RansacParams,
) -> Result<BodyVelocity> {
    params.validate()?;
    let obs = sorted_observations(frame, params.eps_planar);
    let consensus = ransac_consensus(&obs, params);
    if consensus.len() < params.min_inliers {
        return Err(Error::EstimationFailed {
            inliers: consensus.len(),
            required: params.min_inliers,
        });
    }
    let inliers: Vec<RadialObservation> = consensus.iter().map(|&k| obs[k]).collect();
    let field = solve_velocity_lsq(&inliers)?;
    let ss: f64 = inliers.iter().map(|o| residual(field, o).powi(2)).sum();
    Ok(BodyVelocity {
        vx: -field.x,
        vy: -field.y,
        t,
        n_inliers: inliers.len(),
        residual_rms: (ss / inliers.len() as f64).sqrt(),
    })
}

/// Velocity at the midpoint of the cascade interval, linearly interpolated
/// between two single-chip estimates.
pub fn interpolate_velocity(
    v_prev: &BodyVelocity,
    v_curr: &BodyVelocity,
    t_c_prev: TimeStamp,
    t_c_curr: TimeStamp,
) -> Result<Vec2> {
    let dt_s = v_curr.t - v_prev.t;
    if !(dt_s > 0.0) {
        return Err(Error::InvalidTimestamps(format!(
            "single-chip interval {dt_s} s must be positive"
        )));
    }
    let dt = (t_c_curr + t_c_prev) / 2.0 - v_prev.t;
    let slope = (v_curr.vec() - v_prev.vec()) * (1.0 / dt_s);
    Ok(slope * dt + v_prev.vec())
}

/// Picks the single-chip pair bracketing `midpoint`: the last frame at or
/// before it and the one after. Falls back to the first or last pair when
/// the midpoint lies outside the stream, which extrapolates.
pub fn bracket(times: &[TimeStamp], midpoint: TimeStamp) -> Option<(usize, usize)> {
    if times.len() < 2 {
        return None;
    }
    let after = times.partition_point(|&t| t <= midpoint);
    let prev = after.saturating_sub(1).min(times.len() - 2);
    Some((prev, prev + 1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn target(x: f32, y: f32, z: f32, doppler: f32) -> DopplerTarget {
        DopplerTarget {
            x,
            y,
            z,
            doppler,
            intensity: 1.0,
        }
    }

    fn bv(vx: f64, vy: f64, t: f64) -> BodyVelocity {
        BodyVelocity {
            vx,
            vy,
            t,
            n_inliers: 0,
            residual_rms: 0.0,
        }
    }

    #[test]
    fn projection_examples() {
        let o = project_radial(&target(1.0, 0.0, 0.0, 2.0), 0.05).unwrap();
        assert_eq!((o.theta, o.v_r), (0.0, 2.0));
        let o = project_radial(&target(1.0, 0.0, 1.0, 2.0), 0.05).unwrap();
        assert_eq!(o.theta, 0.0);
        assert!((o.v_r - 2.0 / 2f64.sqrt()).abs() < 1e-12);
        assert!(matches!(
            project_radial(&target(0.0, 0.0, 1.0, 2.0), 0.05),
            Err(Error::DegenerateProjection { .. })
        ));
    }

    #[test]
    fn lsq_examples() {
        let v = Vec2::new(1.0, 0.5);
        let obs: Vec<_> = [0.0f64, 45.0, 90.0]
            .iter()
            .map(|d| {
                let th = d.to_radians();
                RadialObservation {
                    theta: th,
                    v_r: v.x * th.cos() + v.y * th.sin(),
                }
            })
            .collect();
        let fit = solve_velocity_lsq(&obs).unwrap();
        assert!((fit - v).norm() < 1e-9);

        let zero: Vec<_> = [-0.5, 0.1, 0.9]
            .iter()
            .map(|&theta| RadialObservation { theta, v_r: 0.0 })
            .collect();
        assert_eq!(solve_velocity_lsq(&zero).unwrap(), Vec2::ZERO);

        let same = [
            RadialObservation { theta: 0.3, v_r: 1.0 },
            RadialObservation { theta: 0.3, v_r: 2.0 },
        ];
        assert!(matches!(solve_velocity_lsq(&same), Err(Error::DegenerateGeometry)));
    }

    #[test]
    fn interpolation_examples() {
        let v = interpolate_velocity(&bv(1.0, 0.0, 3.0), &bv(1.0, 0.0, 3.1), 0.0, 50.0).unwrap();
        assert_eq!(v, Vec2::new(1.0, 0.0));
        // cascade interval [0, 0.1] has midpoint 0.05
        let v = interpolate_velocity(&bv(0.0, 0.0, 0.0), &bv(2.0, 0.0, 0.1), 0.0, 0.1).unwrap();
        assert!((v - Vec2::new(1.0, 0.0)).norm() < 1e-12);
        // midpoint equal to the previous single-chip time
        let v = interpolate_velocity(&bv(0.3, -0.2, 1.0), &bv(2.0, 4.0, 1.1), 0.9, 1.1).unwrap();
        assert_eq!(v, Vec2::new(0.3, -0.2));
        assert!(matches!(
            interpolate_velocity(&bv(0.0, 0.0, 1.0), &bv(0.0, 0.0, 1.0), 0.0, 1.0),
            Err(Error::InvalidTimestamps(_))
        ));
    }

    #[test]
    fn bracket_policy() {
        let ts = [0.0, 0.1, 0.2, 0.3];
        assert_eq!(bracket(&ts, 0.15), Some((1, 2)));
        assert_eq!(bracket(&ts, 0.1), Some((1, 2)));
        assert_eq!(bracket(&ts, -1.0), Some((0, 1)));
        assert_eq!(bracket(&ts, 0.3), Some((2, 3)));
        assert_eq!(bracket(&ts, 9.0), Some((2, 3)));
        assert_eq!(bracket(&ts[..1], 0.0), None);
    }

    #[test]
    fn static_frame_recovers_ego_velocity() {
        let ego = Vec2::new(1.0, 0.5);
        let frame: Vec<_> = (0..50)
            .map(|i| {
                let th = -1.3 + 2.6 * i as f64 / 49.0;
                let r = 2.0 + (i % 7) as f64 * 0.7;
                let d = -(ego.x * th.cos() + ego.y * th.sin());
                target((r * th.cos()) as f32, (r * th.sin()) as f32, 0.0, d as f32)
            })
            .collect();
        let v = estimate_velocity(&frame, 0.0, &RansacParams::default()).unwrap();
        assert!((v.vec() - ego).norm() < 1e-6, "{v:?}");
        assert_eq!(v.n_inliers, 50);
    }

    #[test]
    fn rejects_invalid_params() {
        let p = RansacParams {
            min_inliers: 1,
            ..Default::default()
        };
        assert!(matches!(
            estimate_velocity(&[], 0.0, &p),
            Err(Error::InvalidParams(_))
        ));
        assert!(matches!(
            estimate_velocity(&[], 0.0, &RansacParams::default()),
            Err(Error::EstimationFailed { inliers: 0, .. })
        ));
    }

    #[test]
    fn pure_noise_frame_fails() {
        // 20 random dopplers spread over +-20 m/s: chance consensus of 5 is rare.
        let mut failures = 0;
        for seed in 0..50u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
            let frame: Vec<_> = (0..20)
                .map(|_| {
                    let th = rng.random_range(-1.3..1.3f64);
                    let r = rng.random_range(1.0..7.0f64);
                    let d = rng.random_range(-20.0..20.0f64);
                    target((r * th.cos()) as f32, (r * th.sin()) as f32, 0.0, d as f32)
                })
                .collect();
            let params = RansacParams {
                seed,
                ..Default::default()
            };
            if matches!(
                estimate_velocity(&frame, 0.0, &params),
                Err(Error::EstimationFailed { .. })
            ) {
                failures += 1;
            }
        }
        assert!(failures >= 47, "only {failures}/50 failed");
    }

    #[test]
    fn fit_pair_is_exact() {
        let m = Vec2::new(-0.7, 2.0);
        let mk = |theta: f64| RadialObservation {
            theta,
            v_r: m.x * theta.cos() + m.y * theta.sin(),
        };
        let fit = fit_pair(&mk(-PI / 3.0), &mk(0.4)).unwrap();
        assert!((fit - m).norm() < 1e-12);
        assert!(fit_pair(&mk(0.4), &mk(0.4)).is_none());
    }
}
