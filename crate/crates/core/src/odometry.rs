//! Frame-by-frame pipeline: Doppler velocity, heatmap features,
//! rectification, registration and SE(2) integration.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{wrap_angle, Pose2, TimeStamp, Vec2};
use crate::ingest::{Dataset, Heatmap};
use crate::preprocess::{self, CfarParams, FeatureSet, Roi};
use crate::registration::{
    self, IcpParams, IcpResult, IterationTrace, SamplingParams,
};
use crate::velocity::{self, BodyVelocity, RansacParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Preprocessor {
    Cfar(CfarParams),
    TopK { k: usize },
    RayMax,
}

impl Preprocessor {
    pub const DEFAULT_K: usize = 200;

    pub fn name(&self) -> &'static str {
        match self {
            Preprocessor::Cfar(_) => "cfar",
            Preprocessor::TopK { .. } => "topk",
            Preprocessor::RayMax => "raymax",
        }
    }

    pub fn extract(&self, h: &Heatmap, roi: &Roi) -> Result<FeatureSet> {
        match self {
            Preprocessor::Cfar(p) => preprocess::extract_cfar(h, p, roi),
            Preprocessor::TopK { k } => Ok(preprocess::extract_topk(h, *k, roi)),
            Preprocessor::RayMax => Ok(preprocess::extract_raymax(h, roi)),
        }
    }
}

/// Which registration variant turns features into a yaw increment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IcpVariant {
    /// Weighted ICP, nearest-neighbor pairs, no sampling.
    Plain,
    /// Sampled weighted ICP, previous frame as source.
    OneWay,
    /// Mean of the sampled weighted ICP in both directions.
    TwoWay,
}

impl IcpVariant {
    pub const ALL: [IcpVariant; 3] = [IcpVariant::Plain, IcpVariant::OneWay, IcpVariant::TwoWay];

    pub fn name(&self) -> &'static str {
        match self {
            IcpVariant::Plain => "wicp",
            IcpVariant::OneWay => "sampling_wicp",
            IcpVariant::TwoWay => "sampling_mwicp",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FallbackPolicy {
    /// Reuse the last valid interpolated velocity.
    HoldLast,
    ZeroMotion,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub preprocessor: Preprocessor,
    pub icp_variant: IcpVariant,
    pub sampling: SamplingParams,
    /// The ROI defaults to the cascade sensor's wedge.
    pub icp: IcpParams,
    pub ransac: RansacParams,
    pub fallback_policy: FallbackPolicy,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            preprocessor: Preprocessor::TopK {
                k: Preprocessor::DEFAULT_K,
            },
            icp_variant: IcpVariant::TwoWay,
            sampling: SamplingParams::default(),
            icp: IcpParams::default(),
            ransac: RansacParams::default(),
            fallback_policy: FallbackPolicy::HoldLast,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.sampling.validate()?;
        self.icp.validate()?;
        self.ransac.validate()?;
        match self.preprocessor {
            Preprocessor::Cfar(p) => p.validate(),
            Preprocessor::TopK { k: 0 } => Err(Error::InvalidParams("top-k needs k >= 1".into())),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct FrameFlags {
    pub velocity_fallback: bool,
    pub icp_degraded: bool,
    pub icp_failed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameEstimate {
    pub t: TimeStamp,
    /// Body velocity at the interval midpoint, m/s.
    pub v: Vec2,
    pub dyaw: f64,
    pub dt: f64,
    pub flags: FrameFlags,
    pub n_features_prev: usize,
    pub n_features_curr: usize,
    pub icp_iterations: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub icp_trace: Vec<IterationTrace>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Trajectory {
    pub poses: Vec<Pose2>,
}

impl Trajectory {
    pub fn new(poses: Vec<Pose2>) -> Self {
        Self { poses }
    }

    pub fn len(&self) -> usize {
        self.poses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.poses.is_empty()
    }

    /// `t x y yaw` per line.
    pub fn to_text(&self) -> String {
        self.poses
            .iter()
            .map(|p| format!("{} {} {} {}\n", p.t, p.x, p.y, p.yaw))
            .collect()
    }

    pub fn from_text(text: &str, path: &Path) -> Result<Self> {
        let mut poses = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let vals: Option<Vec<f64>> = line.split_whitespace().map(|s| s.parse().ok()).collect();
            match vals.as_deref() {
                Some(&[t, x, y, yaw]) => poses.push(Pose2::new(x, y, yaw, t)),
                _ => {
                    return Err(Error::Parse {
                        path: path.to_path_buf(),
                        line: i + 1,
                        detail: "expected `t x y yaw`".into(),
                    })
                }
            }
        }
        if poses.windows(2).any(|w| w[1].t <= w[0].t) {
            return Err(Error::InvalidData {
                path: path.to_path_buf(),
                detail: "trajectory timestamps not strictly increasing".into(),
            });
        }
        Ok(Self { poses })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::MissingFile(path.to_path_buf()),
            _ => Error::Io(e),
        })?;
        Self::from_text(&text, path)
    }
}

/// Midpoint step: heading advances by `dyaw`, the translation uses the
/// heading halfway through the interval.
pub fn integrate_pose(prev: &Pose2, est: &FrameEstimate) -> Pose2 {
    let heading = prev.yaw + 0.5 * est.dyaw;
    let p = prev.translation() + est.v.rotated(heading) * est.dt;
    Pose2::new(p.x, p.y, wrap_angle(prev.yaw + est.dyaw), est.t)
}

/// Output of [`run_pipeline`].
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOutput {
    pub trajectory: Trajectory,
    pub estimates: Vec<FrameEstimate>,
}

/// Yaw increment of the sensor between `prev_rect` and `curr`.
pub fn register(
    variant: IcpVariant,
    prev_rect: &FeatureSet,
    curr: &FeatureSet,
    sp: &SamplingParams,
    ip: &IcpParams,
) -> Result<IcpResult> {
    // one-way runs take the previous frame as source; the rotation taking
    // it onto the current frame is the negated sensor yaw
    let flip = |r: IcpResult| IcpResult { yaw: -r.yaw, ..r };
    match variant {
        IcpVariant::Plain => {
            registration::one_way_wicp_unsampled(prev_rect, curr, sp, ip).map(flip)
        }
        IcpVariant::OneWay => registration::one_way_wicp(prev_rect, curr, sp, ip).map(flip),
        IcpVariant::TwoWay => registration::two_way_mwicp(prev_rect, curr, sp, ip),
    }
}

pub fn run_pipeline(ds: &Dataset, cfg: &PipelineConfig) -> Result<PipelineOutput> {
    cfg.validate()?;
    if ds.cascade_frames.len() < 2 || ds.singlechip_frames.len() < 2 {
        return Err(Error::DatasetTooShort(format!(
            "{} cascade and {} single-chip frames, need at least 2 of each",
            ds.cascade_frames.len(),
            ds.singlechip_frames.len()
        )));
    }
    let roi = Roi {
        max_range: ds.specs.cascade.max_range,
        max_azimuth: ds.specs.cascade.max_azimuth,
    };
    let mut icp = cfg.icp;
    icp.roi.get_or_insert(roi);

    let sc_times: Vec<f64> = ds.singlechip_frames.iter().map(|f| f.t).collect();
    let mut velocities: Vec<Option<Option<BodyVelocity>>> = vec![None; sc_times.len()];
    let mut velocity_at = |i: usize| -> Option<BodyVelocity> {
        *velocities[i].get_or_insert_with(|| {
            let f = &ds.singlechip_frames[i];
            velocity::estimate_velocity(&f.targets, f.t, &cfg.ransac)
                .map_err(|e| log::debug!("single-chip frame {i}: {e}"))
                .ok()
        })
    };

    let first = &ds.cascade_frames[0];
    let mut pose = Pose2::identity(first.t);
    let mut trajectory = vec![pose];
    let mut estimates = Vec::with_capacity(ds.cascade_frames.len() - 1);
    let mut prev_features = cfg.preprocessor.extract(first, &roi).map_err(|e| e.at_frame(0))?;
    let mut last_velocity: Option<Vec2> = None;

    for (k, curr_map) in ds.cascade_frames.iter().enumerate().skip(1) {
        let t_prev = ds.cascade_frames[k - 1].t;
        let t_curr = curr_map.t;
        let dt = t_curr - t_prev;
        let mut flags = FrameFlags::default();

        let midpoint = 0.5 * (t_prev + t_curr);
        let (a, b) = velocity::bracket(&sc_times, midpoint).expect("two single-chip frames");
        let v = match (velocity_at(a), velocity_at(b)) {
            (Some(va), Some(vb)) => Some(
                velocity::interpolate_velocity(&va, &vb, t_prev, t_curr)
                    .map_err(|e| e.at_frame(k))?,
            ),
            _ => None,
        };
        let v = match v {
            Some(v) => {
                last_velocity = Some(v);
                v
            }
            None => {
                flags.velocity_fallback = true;
                match cfg.fallback_policy {
                    FallbackPolicy::HoldLast => last_velocity.unwrap_or(Vec2::ZERO),
                    FallbackPolicy::ZeroMotion => Vec2::ZERO,
                }
            }
        };

        let curr_features = cfg.preprocessor.extract(curr_map, &roi).map_err(|e| e.at_frame(k))?;
        let prev_rect = registration::rectify(&prev_features, v, dt).map_err(|e| e.at_frame(k))?;
        let (dyaw, iterations, trace) =
            match register(cfg.icp_variant, &prev_rect, &curr_features, &cfg.sampling, &icp) {
                Ok(r) => {
                    flags.icp_degraded = r.degraded;
                    (r.yaw, r.iterations, r.trace)
                }
                Err(e) => {
                    log::debug!("cascade frame {k}: registration failed: {e}");
                    flags.icp_failed = true;
                    (0.0, 0, Vec::new())
                }
            };

        let est = FrameEstimate {
            t: t_curr,
            v,
            dyaw,
            dt,
            flags,
            n_features_prev: prev_features.len(),
            n_features_curr: curr_features.len(),
            icp_iterations: iterations,
            icp_trace: trace,
        };
        pose = integrate_pose(&pose, &est);
        trajectory.push(pose);
        estimates.push(est);
        prev_features = curr_features;
    }

    Ok(PipelineOutput {
        trajectory: Trajectory::new(trajectory),
        estimates,
    })
}

/// One JSON object per line.
pub fn write_estimates_jsonl(estimates: &[FrameEstimate], mut out: impl Write) -> Result<()> {
    for e in estimates {
        serde_json::to_writer(&mut out, e).map_err(std::io::Error::from)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}
