//! Rotation-only registration of two feature sets.
//!
//! The previous frame is first translated by the interpolated velocity
//! (rectification) so only a rotation about the sensor origin remains. Each
//! ICP iteration then labels the source points against the target using a
//! weighted polar error:
//!
//! * **Remove**: the closest target is farther than `eps_max`; the point is
//!   dropped for the rest of the run.
//! * **Neglect**: the closest target is nearer than `eps_min`, or the point
//!   left the region of interest; the point sits out this iteration only.
//! * **Match**: paired with the closest target.
//!
//! The rotation over the matched pairs is the intensity-weighted SVD
//! solution. Running the ICP in both directions and averaging gives the
//! two-way (mean) estimate.

use nalgebra::Matrix2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{cart_to_polar, wrap_angle, PolarPoint, Vec2};
use crate::preprocess::{FeatureSet, Roi};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplingParams {
    pub eps_min: f64,
    pub eps_max: f64,
    /// Weight on squared range error, 1/m^2.
    pub alpha: f64,
    /// Weight on squared azimuth error, 1/rad^2.
    pub beta: f64,
}

impl Default for SamplingParams {
    fn default() -> Self {
        Self {
            eps_min: 1e-6,
            eps_max: 0.15,
            alpha: 1.0,
            beta: 10.0,
        }
    }
}

impl SamplingParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.eps_min >= 0.0
            && self.eps_min < self.eps_max
            && self.alpha >= 0.0
            && self.beta >= 0.0
            && self.alpha + self.beta > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParams(format!(
                "sampling needs 0 <= eps_min < eps_max and non-negative alpha, beta with a positive sum: {self:?}"
            )))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IcpParams {
    pub max_iterations: usize,
    /// Stop once an iteration's yaw update falls below this, radians.
    pub rot_tolerance: f64,
    /// Region of interest for the Neglect test; unbounded when unset.
    pub roi: Option<Roi>,
    /// The ROI is shrunk by these before labelling, m and rad. Source points
    /// this close to the edge usually have no counterpart in the other frame.
    pub roi_margin_range: f64,
    pub roi_margin_azimuth: f64,
    /// Keep a per-iteration trace in the result.
    pub record_trace: bool,
}

impl Default for IcpParams {
    fn default() -> Self {
        Self {
            max_iterations: 20,
            rot_tolerance: 1e-4,
            roi: None,
            roi_margin_range: 0.3,
            roi_margin_azimuth: 6f64.to_radians(),
            record_trace: false,
        }
    }
}

impl IcpParams {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations < 1 || !(self.rot_tolerance > 0.0) {
            return Err(Error::InvalidParams(
                "icp needs max_iterations >= 1 and rot_tolerance > 0".into(),
            ));
        }
        if !(self.roi_margin_range >= 0.0 && self.roi_margin_azimuth >= 0.0) {
            return Err(Error::InvalidParams("roi margins must be non-negative".into()));
        }
        Ok(())
    }

    /// ROI used for labelling: the configured one minus the margins.
    pub fn labelling_roi(&self) -> Roi {
        match self.roi {
            None => Roi::UNBOUNDED,
            Some(r) => Roi {
                max_range: (r.max_range - self.roi_margin_range).max(0.0),
                max_azimuth: (r.max_azimuth - self.roi_margin_azimuth).max(0.0),
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Label {
    Remove,
    Neglect,
    Match(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Classification {
    pub labels: Vec<Label>,
}

impl Classification {
    pub fn matches(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.labels.iter().enumerate().filter_map(|(i, l)| match l {
            Label::Match(j) => Some((i, *j)),
            _ => None,
        })
    }

    pub fn count(&self, f: impl Fn(&Label) -> bool) -> usize {
        self.labels.iter().filter(|l| f(l)).count()
    }
}

/// Diagnostics for one ICP iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationTrace {
    pub iteration: usize,
    pub n_match: usize,
    pub n_neglect: usize,
    pub n_remove: usize,
    /// (source index, target index) of each match.
    pub pairs: Vec<(usize, usize)>,
    pub dyaw: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IcpResult {
    /// Rotation taking the source onto the target, radians.
    pub yaw: f64,
    pub iterations: usize,
    pub matched_pairs_final: usize,
    pub converged: bool,
    pub per_iteration_yaw: Vec<f64>,
    /// Set by the two-way run when only one direction succeeded.
    pub degraded: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub trace: Vec<IterationTrace>,
}

/// Translates the previous frame's features by `-v_c * dt_c`, moving the
/// recorded sensor origin with them.
/// Points that land exactly on the sensor origin are dropped.
pub fn rectify(prev: &FeatureSet, v_c: Vec2, dt_c: f64) -> Result<FeatureSet> {
    if !(dt_c > 0.0) {
        return Err(Error::InvalidTimestamps(format!("dt_c = {dt_c} must be positive")));
    }
    let shift = v_c * dt_c;
    let mut points = Vec::with_capacity(prev.points.len());
    for p in &prev.points {
        match cart_to_polar(p.to_cart() - shift, p.intensity) {
            Ok(q) => points.push(q),
            Err(_) => log::warn!("rectified feature at r={:.3} collapsed onto the origin", p.r),
        }
    }
    Ok(FeatureSet {
        points,
        method: prev.method,
        t: prev.t,
        origin: prev.origin - shift,
    })
}

/// `alpha * dr^2 + beta * dtheta^2` with a wrap-aware azimuth difference.
pub fn pair_error(a: &PolarPoint, b: &PolarPoint, p: &SamplingParams) -> f64 {
    let dr = a.r - b.r;
    let dt = wrap_angle(a.theta - b.theta);
    p.alpha * dr * dr + p.beta * dt * dt
}

/// Closest target by `pair_error`, lowest index on ties.
fn nearest(src: &PolarPoint, target: &[PolarPoint], p: &SamplingParams) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, t) in target.iter().enumerate() {
        let e = pair_error(src, t, p);
        if e < best.1 {
            best = (j, e);
        }
    }
    best
}

/// Labels one source point. The ROI is the wedge seen from the target's
/// sensor origin.
fn label_point(src: &PolarPoint, target: &FeatureSet, p: &SamplingParams, roi: &Roi) -> Label {
    if !roi.contains_from(src, target.origin) {
        return Label::Neglect;
    }
    let (j, e_min) = nearest(src, &target.points, p);
    if e_min > p.eps_max {
        Label::Remove
    } else if e_min < p.eps_min {
        Label::Neglect
    } else {
        Label::Match(j)
    }
}

pub fn classify(
    source: &FeatureSet,
    target: &FeatureSet,
    p: &SamplingParams,
    roi: &Roi,
) -> Result<Classification> {
    if target.is_empty() {
        return Err(Error::NoTargets);
    }
    Ok(Classification {
        labels: source
            .points
            .iter()
            .map(|s| label_point(s, target, p, roi))
            .collect(),
    })
}

/// Yaw of the proper rotation minimizing `sum w_i |y_i - R x_i|^2`.
///
/// Weights are normalized to sum to one. With `H = sum w_i x_i y_i^T = U D V^T`
/// the minimizer is `R = V diag(1, det(V U^T)) U^T`.
pub fn weighted_rotation(pairs: &[(Vec2, Vec2, f64)]) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::DegenerateWeights);
    }
    let total: f64 = pairs.iter().map(|p| p.2).sum();
    if pairs.iter().any(|p| !(p.2 >= 0.0)) || !(total > 0.0) || !total.is_finite() {
        return Err(Error::DegenerateWeights);
    }
    let mut h: Matrix2<f64> = Matrix2::zeros();
    for (x, y, w) in pairs {
        let w = w / total;
        h[(0, 0)] += w * x.x * y.x;
        h[(0, 1)] += w * x.x * y.y;
        h[(1, 0)] += w * x.y * y.x;
        h[(1, 1)] += w * x.y * y.y;
    }
    if h.norm() <= f64::MIN_POSITIVE {
        return Err(Error::UndefinedRotation);
    }
    let svd = h.svd(true, true);
    let (u, v_t) = (svd.u.unwrap(), svd.v_t.unwrap());
    let v = v_t.transpose();
    let d = (v * u.transpose()).determinant().signum();
    let r = v * Matrix2::new(1.0, 0.0, 0.0, d) * u.transpose();
    Ok(r[(1, 0)].atan2(r[(0, 0)]))
}

/// Per-frame intensity normalization so weights are comparable across frames.
fn normalized_intensity(points: &[PolarPoint]) -> Vec<f64> {
    let max = points.iter().map(|p| p.intensity).fold(0.0, f64::max);
    if max > 0.0 {
        points.iter().map(|p| p.intensity / max).collect()
    } else {
        vec![1.0; points.len()]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Correspondence {
    /// Remove / Neglect / Match labelling.
    Sampled,
    /// Every source point pairs with its nearest target.
    Nearest,
}

fn run_icp(
    source: &FeatureSet,
    target: &FeatureSet,
    sp: &SamplingParams,
    ip: &IcpParams,
    mode: Correspondence,
) -> Result<IcpResult> {
    sp.validate()?;
    ip.validate()?;
    if source.is_empty() || target.is_empty() {
        return Err(Error::NoTargets);
    }
    let src_w = normalized_intensity(&source.points);
    let tgt_w = normalized_intensity(&target.points);
    let tgt_cart: Vec<Vec2> = target.points.iter().map(|p| p.to_cart()).collect();
    let roi = ip.labelling_roi();

    let mut current = source.points.clone();
    let mut removed = vec![false; current.len()];
    let mut result = IcpResult {
        yaw: 0.0,
        iterations: 0,
        matched_pairs_final: 0,
        converged: false,
        per_iteration_yaw: Vec::new(),
        degraded: false,
        trace: Vec::new(),
    };

    for iteration in 1..=ip.max_iterations {
        result.iterations = iteration;
        let mut pairs = Vec::new();
        let mut matched = Vec::new();
        let (mut n_neglect, mut n_near, mut n_remove) = (0, 0, 0);
        for (i, s) in current.iter().enumerate() {
            if removed[i] {
                continue;
            }
            let label = match mode {
                Correspondence::Sampled => label_point(s, target, sp, &roi),
                Correspondence::Nearest => Label::Match(nearest(s, &target.points, sp).0),
            };
            match label {
                Label::Match(j) => {
                    pairs.push((s.to_cart(), tgt_cart[j], 0.5 * (src_w[i] + tgt_w[j])));
                    matched.push((i, j));
                }
                Label::Neglect => {
                    n_neglect += 1;
                    if roi.contains_from(s, target.origin) {
                        n_near += 1;
                    }
                }
                Label::Remove => {
                    n_remove += 1;
                    removed[i] = true;
                }
            }
        }

        let dyaw = if pairs.is_empty() {
            // Everything left is already within eps_min of a target: the
            // alignment is below the resolution of the sampling thresholds.
            if n_near == 0 {
                return Err(Error::NoMatches { iteration });
            }
            0.0
        } else {
            match weighted_rotation(&pairs) {
                Ok(d) => d,
                // all matched points have zero weight or sit on the origin
                Err(_) => return Err(Error::NoMatches { iteration }),
            }
        };

        if ip.record_trace {
            result.trace.push(IterationTrace {
                iteration,
                n_match: matched.len(),
                n_neglect,
                n_remove,
                pairs: matched.clone(),
                dyaw,
            });
        }
        result.matched_pairs_final = matched.len();
        result.per_iteration_yaw.push(dyaw);
        result.yaw = wrap_angle(result.yaw + dyaw);
        if dyaw != 0.0 {
            for p in current.iter_mut() {
                p.theta = wrap_angle(p.theta + dyaw);
            }
        }
        if dyaw.abs() < ip.rot_tolerance {
            result.converged = true;
            break;
        }
    }
    Ok(result)
}

/// Weighted ICP with Remove/Neglect/Match sampling. Returns the rotation
/// applied to `source` to align it with `target`.
pub fn one_way_wicp(
    source: &FeatureSet,
    target: &FeatureSet,
    sp: &SamplingParams,
    ip: &IcpParams,
) -> Result<IcpResult> {
    run_icp(source, target, sp, ip, Correspondence::Sampled)
}

/// Weighted ICP without sampling: every source point is paired with its
/// nearest target at every iteration.
pub fn one_way_wicp_unsampled(
    source: &FeatureSet,
    target: &FeatureSet,
    sp: &SamplingParams,
    ip: &IcpParams,
) -> Result<IcpResult> {
    run_icp(source, target, sp, ip, Correspondence::Nearest)
}

/// Mean of the forward (current onto previous) and backward (previous onto
/// current) rotations. A positive result is the counter-clockwise rotation
/// of the sensor between the two frames.
pub fn two_way_mwicp(
    prev_rect: &FeatureSet,
    curr: &FeatureSet,
    sp: &SamplingParams,
    ip: &IcpParams,
) -> Result<IcpResult> {
    let (fwd, bwd) = std::thread::scope(|s| {
        let bwd = s.spawn(|| one_way_wicp(prev_rect, curr, sp, ip));
        let fwd = one_way_wicp(curr, prev_rect, sp, ip);
        (fwd, bwd.join().expect("backward ICP panicked"))
    });
    match (fwd, bwd) {
        (Ok(f), Ok(b)) => Ok(IcpResult {
            yaw: wrap_angle(f.yaw + 0.5 * wrap_angle(-b.yaw - f.yaw)),
            iterations: f.iterations.max(b.iterations),
            matched_pairs_final: f.matched_pairs_final + b.matched_pairs_final,
            converged: f.converged && b.converged,
            per_iteration_yaw: f.per_iteration_yaw,
            degraded: false,
            trace: f.trace,
        }),
        (Ok(f), Err(e)) => {
            log::debug!("backward ICP failed: {e}");
            Ok(IcpResult { degraded: true, ..f })
        }
        (Err(e), Ok(b)) => {
            log::debug!("forward ICP failed: {e}");
            Ok(IcpResult {
                yaw: -b.yaw,
                degraded: true,
                per_iteration_yaw: b.per_iteration_yaw.iter().map(|d| -d).collect(),
                ..b
            })
        }
        (Err(e), Err(_)) => Err(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::preprocess::Method;
    use std::f64::consts::PI;

    fn fs(points: Vec<PolarPoint>) -> FeatureSet {
        FeatureSet {
            points,
            method: Method::TopK,
            t: 0.0,
            origin: Vec2::ZERO,
        }
    }

    fn scene() -> Vec<PolarPoint> {
        (0..24)
            .map(|i| {
                let theta = -1.2 + 0.1 * i as f64;
                let r = 1.5 + 0.35 * ((i * 7) % 11) as f64;
                PolarPoint::new(r, theta, 1.0)
            })
            .collect()
    }

    fn rotated(points: &[PolarPoint], a: f64) -> Vec<PolarPoint> {
        points
            .iter()
            .map(|p| PolarPoint::new(p.r, p.theta + a, p.intensity))
            .collect()
    }

    #[test]
    fn rectify_examples() {
        let prev = fs(scene());
        let same = rectify(&prev, Vec2::ZERO, 0.2).unwrap();
        for (a, b) in same.points.iter().zip(&prev.points) {
            assert!((a.r - b.r).abs() < 1e-12 && (a.theta - b.theta).abs() < 1e-12);
        }
        assert_eq!(same.points.len(), prev.points.len());

        let one = fs(vec![PolarPoint::new(2.0, 0.0, 1.0)]);
        let r = rectify(&one, Vec2::new(1.0, 0.0), 0.2).unwrap();
        assert!((r.points[0].r - 1.8).abs() < 1e-12);
        assert_eq!(r.points[0].theta, 0.0);

        // a point 0.1 m ahead passes behind the sensor and leaves the wedge
        let near = fs(vec![PolarPoint::new(0.1, 0.2, 1.0)]);
        let r = rectify(&near, Vec2::new(1.0, 0.0), 0.2).unwrap();
        assert!(r.points[0].theta.abs() > 76.3f64.to_radians());
        let roi = Roi {
            max_range: 7.6,
            max_azimuth: 76.3f64.to_radians(),
        };
        let c = classify(&r, &near, &SamplingParams::default(), &roi).unwrap();
        assert_eq!(c.labels, vec![Label::Neglect]);

        let on_origin = fs(vec![PolarPoint::new(0.2, 0.0, 1.0), PolarPoint::new(1.0, 0.0, 1.0)]);
        assert_eq!(rectify(&on_origin, Vec2::new(1.0, 0.0), 0.2).unwrap().len(), 1);
        assert!(rectify(&on_origin, Vec2::ZERO, 0.0).is_err());
    }

    #[test]
    fn pair_error_examples() {
        let p = SamplingParams::default();
        let a = PolarPoint::new(2.0, 0.3, 1.0);
        assert_eq!(pair_error(&a, &a, &p), 0.0);
        let range_only = SamplingParams {
            alpha: 1.0,
            beta: 0.0,
            ..p
        };
        assert_eq!(
            pair_error(&PolarPoint::new(1.0, 0.0, 1.0), &PolarPoint::new(3.0, 0.0, 1.0), &range_only),
            4.0
        );
        let az_only = SamplingParams {
            alpha: 0.0,
            beta: 1.0,
            ..p
        };
        let e = pair_error(
            &PolarPoint::new(1.0, 179f64.to_radians(), 1.0),
            &PolarPoint::new(1.0, -179f64.to_radians(), 1.0),
            &az_only,
        );
        assert!((e - 2f64.to_radians().powi(2)).abs() < 1e-12);
    }

    #[test]
    fn classify_examples() {
        let s = fs(scene());
        let exact = SamplingParams {
            eps_min: 0.0,
            ..Default::default()
        };
        let c = classify(&s, &s, &exact, &Roi::UNBOUNDED).unwrap();
        for (i, l) in c.labels.iter().enumerate() {
            assert_eq!(*l, Label::Match(i));
        }

        let far = fs(vec![PolarPoint::new(50.0, 0.0, 1.0)]);
        let c = classify(&far, &s, &exact, &Roi::UNBOUNDED).unwrap();
        assert_eq!(c.labels, vec![Label::Remove]);

        let roi = Roi {
            max_range: 7.6,
            max_azimuth: 1.3,
        };
        let beyond = fs(vec![PolarPoint::new(7.7, 0.0, 1.0)]);
        let tgt = fs(vec![PolarPoint::new(7.7, 0.0, 1.0)]);
        assert_eq!(classify(&beyond, &tgt, &exact, &roi).unwrap().labels, vec![Label::Neglect]);

        assert!(matches!(
            classify(&s, &fs(vec![]), &exact, &roi),
            Err(Error::NoTargets)
        ));

        // boundary values fall to Match
        let p = SamplingParams {
            eps_min: 1.0,
            eps_max: 4.0,
            alpha: 1.0,
            beta: 0.0,
        };
        let a = fs(vec![PolarPoint::new(2.0, 0.0, 1.0), PolarPoint::new(3.0, 0.0, 1.0)]);
        let b = fs(vec![PolarPoint::new(1.0, 0.0, 1.0)]);
        assert_eq!(
            classify(&a, &b, &p, &Roi::UNBOUNDED).unwrap().labels,
            vec![Label::Match(0), Label::Match(0)]
        );
    }

    #[test]
    fn rotation_examples() {
        let pts: Vec<Vec2> = scene().iter().map(|p| p.to_cart()).collect();
        let same: Vec<_> = pts.iter().map(|&x| (x, x, 2.0)).collect();
        assert!(weighted_rotation(&same).unwrap().abs() < 1e-12);

        let a = 5f64.to_radians();
        let rot: Vec<_> = pts.iter().map(|&x| (x, x.rotated(a), 1.0)).collect();
        assert!((weighted_rotation(&rot).unwrap() - a).abs() < 1e-9);

        let big = 170f64.to_radians();
        let rot: Vec<_> = pts.iter().map(|&x| (x, x.rotated(big), 1.0)).collect();
        assert!((weighted_rotation(&rot).unwrap() - big).abs() < 1e-9);

        assert!(matches!(
            weighted_rotation(&[(Vec2::new(1.0, 0.0), Vec2::new(0.0, 1.0), 0.0)]),
            Err(Error::DegenerateWeights)
        ));
        assert!(matches!(
            weighted_rotation(&[(Vec2::ZERO, Vec2::new(0.0, 1.0), 1.0)]),
            Err(Error::UndefinedRotation)
        ));
    }

    #[test]
    fn icp_identity_converges_immediately() {
        let s = fs(scene());
        let r = one_way_wicp(&s, &s, &SamplingParams::default(), &IcpParams::default()).unwrap();
        assert_eq!(r.yaw, 0.0);
        assert_eq!(r.iterations, 1);
        assert!(r.converged);

        let r = two_way_mwicp(&s, &s, &SamplingParams::default(), &IcpParams::default()).unwrap();
        assert_eq!(r.yaw, 0.0);
    }

    #[test]
    fn icp_recovers_three_degrees() {
        let src = fs(scene());
        let a = 3f64.to_radians();
        let tgt = fs(rotated(&src.points, a));
        let r = one_way_wicp(&src, &tgt, &SamplingParams::default(), &IcpParams::default()).unwrap();
        assert!((r.yaw - a).abs() < 1e-6, "{}", r.yaw.to_degrees());
        assert!(r.converged && r.iterations <= 2);

        let back = one_way_wicp(&tgt, &src, &SamplingParams::default(), &IcpParams::default()).unwrap();
        assert!((back.yaw + a).abs() < 1e-6);

        // prev -> curr for a sensor turning +a: landmarks move by -a
        let curr = fs(rotated(&src.points, -a));
        let m = two_way_mwicp(&src, &curr, &SamplingParams::default(), &IcpParams::default()).unwrap();
        assert!((m.yaw - a).abs() < 1e-6);
        assert!(!m.degraded);
    }

    #[test]
    fn icp_fails_without_matches() {
        let src = fs(vec![PolarPoint::new(1.0, 0.0, 1.0)]);
        let tgt = fs(vec![PolarPoint::new(6.0, PI / 2.0, 1.0)]);
        let err = one_way_wicp(&src, &tgt, &SamplingParams::default(), &IcpParams::default());
        assert!(matches!(err, Err(Error::NoMatches { iteration: 1 })));
        assert!(two_way_mwicp(&src, &tgt, &SamplingParams::default(), &IcpParams::default()).is_err());
    }

    #[test]
    fn two_way_degrades_to_surviving_direction() {
        // curr -> prev succeeds; prev -> curr has its only point out of ROI.
        let roi = Roi {
            max_range: 5.0,
            max_azimuth: 1.3,
        };
        let ip = IcpParams {
            roi: Some(roi),
            roi_margin_range: 0.0,
            roi_margin_azimuth: 0.0,
            ..Default::default()
        };
        let prev = fs(vec![PolarPoint::new(5.2, 0.0, 1.0)]);
        let curr = fs(vec![PolarPoint::new(4.9, -0.05, 1.0)]);
        let m = two_way_mwicp(&prev, &curr, &SamplingParams::default(), &ip).unwrap();
        assert!(m.degraded);
        assert!((m.yaw - 0.05).abs() < 1e-9);
    }

    #[test]
    fn margin_shrinks_labelling_roi() {
        let roi = Roi {
            max_range: 5.0,
            max_azimuth: 1.0,
        };
        let ip = IcpParams {
            roi: Some(roi),
            roi_margin_range: 0.5,
            roi_margin_azimuth: 0.1,
            ..Default::default()
        };
        assert_eq!(
            ip.labelling_roi(),
            Roi {
                max_range: 4.5,
                max_azimuth: 0.9
            }
        );
        assert_eq!(IcpParams::default().labelling_roi(), Roi::UNBOUNDED);
        // only the point inside the shrunk wedge can match
        let src = fs(vec![PolarPoint::new(4.8, 0.0, 1.0), PolarPoint::new(3.0, 0.0, 1.0)]);
        let tgt = fs(vec![PolarPoint::new(4.8, 0.02, 1.0), PolarPoint::new(3.0, 0.02, 1.0)]);
        let ip = IcpParams {
            record_trace: true,
            ..ip
        };
        let r = one_way_wicp(&src, &tgt, &SamplingParams::default(), &ip).unwrap();
        assert_eq!(r.trace[0].pairs, vec![(1, 1)]);
        assert!((r.yaw - 0.02).abs() < 1e-9);
    }

    #[test]
    fn rectify_moves_origin() {
        let prev = fs(vec![PolarPoint::new(2.0, 0.0, 1.0)]);
        let r = rectify(&prev, Vec2::new(1.0, 0.5), 0.2).unwrap();
        assert_eq!(r.origin, Vec2::new(-0.2, -0.1));
        // seen from the moved origin the point sits where it was observed
        let roi = Roi {
            max_range: 2.0,
            max_azimuth: 0.01,
        };
        assert!(roi.contains_from(&r.points[0], r.origin));
        assert!(!roi.contains(r.points[0].r, r.points[0].theta));
    }

    #[test]
    fn trace_records_iterations() {
        let src = fs(scene());
        let tgt = fs(rotated(&src.points, 0.04));
        let ip = IcpParams {
            record_trace: true,
            ..Default::default()
        };
        let r = one_way_wicp(&src, &tgt, &SamplingParams::default(), &ip).unwrap();
        assert_eq!(r.trace.len(), r.iterations);
        assert_eq!(r.trace[0].n_match, src.len());
        assert_eq!(r.trace[0].pairs[3], (3, 3));
    }
}
