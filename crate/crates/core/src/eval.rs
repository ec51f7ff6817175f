//! Trajectory metrics: yaw RMSE, cumulative squared yaw error, SE(2)
//! relative pose error and Umeyama alignment.

use nalgebra::{Matrix2, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{wrap_angle, Pose2, TimeStamp, Vec2};
use crate::odometry::Trajectory;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlignedPair {
    pub est: Pose2,
    pub reference: Pose2,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Pairing {
    pub pairs: Vec<AlignedPair>,
    /// Estimates with no reference sample within tolerance.
    pub unmatched: usize,
}

/// Reference pose at time `t`, interpolated between bracketing samples
/// (linear in position, shortest arc in yaw).
fn interpolate(a: &Pose2, b: &Pose2, t: TimeStamp) -> Pose2 {
    let s = if b.t > a.t { (t - a.t) / (b.t - a.t) } else { 0.0 };
    Pose2::new(
        a.x + s * (b.x - a.x),
        a.y + s * (b.y - a.y),
        a.yaw + s * wrap_angle(b.yaw - a.yaw),
        t,
    )
}

/// Pairs each estimate with the reference at the same time. An estimate is
/// kept when its nearest reference sample lies within `tol` seconds.
pub fn pair_by_time(est: &Trajectory, reference: &Trajectory, tol: f64) -> Result<Pairing> {
    let refs = &reference.poses;
    let mut pairs = Vec::new();
    let mut unmatched = 0;
    for e in &est.poses {
        let after = refs.partition_point(|r| r.t < e.t);
        let nearest = [after.checked_sub(1), Some(after)]
            .into_iter()
            .flatten()
            .filter(|&i| i < refs.len())
            .map(|i| (refs[i].t - e.t).abs())
            .fold(f64::INFINITY, f64::min);
        if nearest > tol {
            unmatched += 1;
            continue;
        }
        let r = if after < refs.len() && refs[after].t == e.t {
            Pose2 { t: e.t, ..refs[after] }
        } else if after == 0 {
            Pose2 { t: e.t, ..refs[0] }
        } else if after == refs.len() {
            Pose2 { t: e.t, ..refs[after - 1] }
        } else {
            interpolate(&refs[after - 1], &refs[after], e.t)
        };
        pairs.push(AlignedPair { est: *e, reference: r });
    }
    if pairs.is_empty() {
        return Err(Error::NoOverlap);
    }
    Ok(Pairing { pairs, unmatched })
}

fn yaw_errors_deg(pairs: &[AlignedPair]) -> impl Iterator<Item = (TimeStamp, f64)> + '_ {
    pairs
        .iter()
        .map(|p| (p.est.t, wrap_angle(p.est.yaw - p.reference.yaw).to_degrees()))
}

/// Root mean square of the wrapped yaw error, degrees.
pub fn yaw_rmse(pairs: &[AlignedPair]) -> f64 {
    if pairs.is_empty() {
        return 0.0;
    }
    let ss: f64 = yaw_errors_deg(pairs).map(|(_, e)| e * e).sum();
    (ss / pairs.len() as f64).sqrt()
}

/// Running sum of squared yaw errors, deg^2.
pub fn cumulative_sq_yaw_error(pairs: &[AlignedPair]) -> Vec<(TimeStamp, f64)> {
    yaw_errors_deg(pairs)
        .scan(0.0, |acc, (t, e)| {
            *acc += e * e;
            Some((t, *acc))
        })
        .collect()
}

/// Relative pose error between consecutive pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelativePoseError {
    pub mean: f64,
    pub rmse: f64,
    pub sum: f64,
    /// (time of the later pose, translation norm of the error)
    pub series: Vec<(TimeStamp, f64)>,
}

/// For consecutive pairs `i, j = i + 1`:
/// `E = (ref_i^-1 ref_j)^-1 (est_i^-1 est_j)`, scored by its translation norm.
pub fn relative_pose_error(pairs: &[AlignedPair]) -> Result<RelativePoseError> {
    if pairs.len() < 2 {
        return Err(Error::InvalidParams(
            "relative pose error needs at least two pairs".into(),
        ));
    }
    let series: Vec<(TimeStamp, f64)> = pairs
        .windows(2)
        .map(|w| {
            let d_ref = w[0].reference.inverse().compose(&w[1].reference);
            let d_est = w[0].est.inverse().compose(&w[1].est);
            let e = d_ref.inverse().compose(&d_est);
            (w[1].est.t, e.translation().norm())
        })
        .collect();
    let n = series.len() as f64;
    let sum: f64 = series.iter().map(|s| s.1).sum();
    let ss: f64 = series.iter().map(|s| s.1 * s.1).sum();
    Ok(RelativePoseError {
        mean: sum / n,
        rmse: (ss / n).sqrt(),
        sum,
        series,
    })
}

/// Similarity (or rigid, with `scale == 1`) transform mapping the estimate
/// onto the reference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Alignment {
    pub rotation: f64,
    pub translation: Vec2,
    pub scale: f64,
}

impl Alignment {
    pub fn as_pose(&self) -> Pose2 {
        Pose2::new(self.translation.x, self.translation.y, self.rotation, 0.0)
    }

    pub fn apply_point(&self, p: Vec2) -> Vec2 {
        self.translation + p.rotated(self.rotation) * self.scale
    }

    pub fn apply(&self, traj: &Trajectory) -> Trajectory {
        Trajectory::new(
            traj.poses
                .iter()
                .map(|p| {
                    let q = self.apply_point(p.translation());
                    Pose2::new(q.x, q.y, p.yaw + self.rotation, p.t)
                })
                .collect(),
        )
    }
}

/// Closed-form least-squares alignment of paired positions
/// (`argmin sum |ref_i - (s R est_i + t)|^2`), rigid unless `with_scale`.
pub fn umeyama(est: &[Vec2], reference: &[Vec2], with_scale: bool) -> Result<Alignment> {
    if est.len() != reference.len() || est.len() < 2 {
        return Err(Error::InvalidParams(
            "alignment needs at least two paired positions".into(),
        ));
    }
    let n = est.len() as f64;
    let to_v = |p: &Vec2| Vector2::new(p.x, p.y);
    let mu_e = est.iter().map(to_v).sum::<Vector2<f64>>() / n;
    let mu_r = reference.iter().map(to_v).sum::<Vector2<f64>>() / n;
    let mut cov = Matrix2::zeros();
    let mut var_e = 0.0;
    for (e, r) in est.iter().zip(reference) {
        let de = to_v(e) - mu_e;
        cov += (to_v(r) - mu_r) * de.transpose();
        var_e += de.norm_squared();
    }
    cov /= n;
    var_e /= n;
    if var_e <= f64::EPSILON * (1.0 + mu_e.norm_squared()) {
        return Err(Error::DegenerateAlignment);
    }
    let svd = cov.svd(true, true);
    let (u, v_t) = (svd.u.unwrap(), svd.v_t.unwrap());
    let d = (u.determinant() * v_t.determinant()).signum();
    let s = Matrix2::new(1.0, 0.0, 0.0, d);
    let rot = u * s * v_t;
    let scale = if with_scale {
        (svd.singular_values[0] + d * svd.singular_values[1]) / var_e
    } else {
        1.0
    };
    let t = mu_r - rot * mu_e * scale;
    Ok(Alignment {
        rotation: rot[(1, 0)].atan2(rot[(0, 0)]),
        translation: Vec2::new(t.x, t.y),
        scale,
    })
}

/// Aligns `est` onto `reference` through time-paired positions and returns
/// the transform together with the transformed estimate.
pub fn umeyama_align_se2(
    est: &Trajectory,
    reference: &Trajectory,
    tol: f64,
    with_scale: bool,
) -> Result<(Alignment, Trajectory)> {
    let pairing = pair_by_time(est, reference, tol)?;
    let e: Vec<Vec2> = pairing.pairs.iter().map(|p| p.est.translation()).collect();
    let r: Vec<Vec2> = pairing
        .pairs
        .iter()
        .map(|p| p.reference.translation())
        .collect();
    let a = umeyama(&e, &r, with_scale)?;
    Ok((a, a.apply(est)))
}

/// Re-expresses `est` so that its first pose coincides with the reference
/// at the same time. Estimates start at identity; this removes the arbitrary
/// initial frame before comparing absolute headings.
pub fn anchor_to_reference(est: &Trajectory, reference: &Trajectory, tol: f64) -> Result<Trajectory> {
    let Some(first) = est.poses.first() else {
        return Err(Error::NoOverlap);
    };
    let head = Trajectory::new(vec![*first]);
    let p = pair_by_time(&head, reference, tol)?.pairs[0];
    let offset = p.reference.compose(&p.est.inverse());
    Ok(Trajectory::new(
        est.poses.iter().map(|q| offset.compose(q)).collect(),
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub yaw_rmse_deg: f64,
    pub cum_sq_yaw_err: Vec<(TimeStamp, f64)>,
    pub rpe_mean_m: f64,
    pub rpe_rmse_m: f64,
    pub rpe_sum_m: f64,
    pub rpe_series: Vec<(TimeStamp, f64)>,
    pub n_pairs: usize,
    pub n_unmatched: usize,
}

/// All metrics for one estimate. The estimate is anchored to the reference
/// at its first pose before pairing.
pub fn evaluate(est: &Trajectory, reference: &Trajectory, tol: f64) -> Result<MetricReport> {
    let anchored = anchor_to_reference(est, reference, tol)?;
    let pairing = pair_by_time(&anchored, reference, tol)?;
    let rpe = relative_pose_error(&pairing.pairs)?;
    Ok(MetricReport {
        yaw_rmse_deg: yaw_rmse(&pairing.pairs),
        cum_sq_yaw_err: cumulative_sq_yaw_error(&pairing.pairs),
        rpe_mean_m: rpe.mean,
        rpe_rmse_m: rpe.rmse,
        rpe_sum_m: rpe.sum,
        rpe_series: rpe.series,
        n_pairs: pairing.pairs.len(),
        n_unmatched: pairing.unmatched,
    })
}

/// Half the median sampling period of `traj`; the default pairing tolerance.
pub fn default_tolerance(traj: &Trajectory) -> f64 {
    let mut dts: Vec<f64> = traj.poses.windows(2).map(|w| w[1].t - w[0].t).collect();
    if dts.is_empty() {
        return 0.1;
    }
    dts.sort_by(f64::total_cmp);
    0.5 * dts[dts.len() / 2]
}

/// `t,value` CSV with a header row.
pub fn series_csv(series: &[(TimeStamp, f64)]) -> String {
    let mut out = String::from("t,value\n");
    for (t, v) in series {
        out.push_str(&format!("{t},{v}\n"));
    }
    out
}
