//! Synthetic scenes with known motion.
//!
//! A planar landmark map is observed by both radars along a piecewise
//! constant motion profile. Single-chip frames carry exact radial Doppler
//! (plus optional noise and moving-object outliers); cascade frames splat each
//! visible landmark into a 3x3 Gaussian patch of its (range, azimuth) bin.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Pose2, TimeStamp, Vec2};
use crate::ingest::{self, Dataset, DopplerFrame, DopplerTarget, Heatmap, SensorSpec, SensorSpecs};
use crate::odometry::Trajectory;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Landmark {
    pub x: f64,
    pub y: f64,
    pub reflectivity: f64,
}

impl Landmark {
    pub fn pos(&self) -> Vec2 {
        Vec2::new(self.x, self.y)
    }
}

/// Landmarks drawn uniformly in a box, keeping clear of the driven path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LandmarkField {
    pub count: usize,
    pub x_range: [f64; 2],
    pub y_range: [f64; 2],
    pub reflectivity_range: [f64; 2],
    /// Minimum distance from any point of the trajectory, meters.
    pub path_clearance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Scene {
    pub landmarks: Vec<Landmark>,
    pub random_landmarks: Option<LandmarkField>,
    /// Spurious heatmap returns per cascade frame.
    pub clutter_density: f64,
    /// Heatmap noise standard deviation as a fraction of the peak reflectivity.
    pub noise_sigma_intensity: f64,
    /// m/s
    pub doppler_noise_sigma: f64,
    /// Fraction of Doppler targets that are moving-object outliers.
    pub outlier_fraction: f64,
    pub seed: u64,
}

impl Default for Scene {
    fn default() -> Self {
        Self {
            landmarks: Vec::new(),
            random_landmarks: None,
            clutter_density: 0.0,
            noise_sigma_intensity: 0.0,
            doppler_noise_sigma: 0.0,
            outlier_fraction: 0.0,
            seed: 0,
        }
    }
}

impl Scene {
    pub fn validate(&self) -> Result<()> {
        let ok = self.clutter_density >= 0.0
            && self.noise_sigma_intensity >= 0.0
            && self.doppler_noise_sigma >= 0.0
            && (0.0..1.0).contains(&self.outlier_fraction)
            && self.landmarks.iter().all(|l| l.reflectivity >= 0.0);
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParams(
                "scene densities, sigmas and reflectivities must be non-negative, outlier_fraction in [0, 1)".into(),
            ))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub duration: f64,
    /// Body-frame velocity, m/s.
    pub vx: f64,
    pub vy: f64,
    /// rad/s
    pub yaw_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MotionProfile {
    pub segments: Vec<Segment>,
}

impl MotionProfile {
    pub fn duration(&self) -> f64 {
        self.segments.iter().map(|s| s.duration).sum()
    }

    pub fn validate(&self) -> Result<()> {
        if self.segments.iter().all(|s| s.duration > 0.0 && s.duration.is_finite()) {
            Ok(())
        } else {
            Err(Error::InvalidParams("motion segment durations must be positive".into()))
        }
    }

    fn segment_at(&self, t: f64) -> Option<(usize, f64)> {
        let mut start = 0.0;
        for (i, s) in self.segments.iter().enumerate() {
            if t < start + s.duration || i + 1 == self.segments.len() {
                return Some((i, t - start));
            }
            start += s.duration;
        }
        None
    }

    /// Pose after `t` seconds from the identity, integrated in closed form.
    pub fn pose_at(&self, t: f64) -> Pose2 {
        let mut pose = Pose2::identity(0.0);
        let mut elapsed = 0.0;
        for s in &self.segments {
            let tau = (t - elapsed).clamp(0.0, s.duration);
            pose = pose.compose(&segment_motion(s, tau));
            elapsed += s.duration;
            if t <= elapsed {
                break;
            }
        }
        Pose2 { t, ..pose }
    }

    /// Body-frame velocity and yaw rate at `t`.
    pub fn twist_at(&self, t: f64) -> (Vec2, f64) {
        match self.segment_at(t) {
            Some((i, _)) if t <= self.duration() => {
                let s = &self.segments[i];
                (Vec2::new(s.vx, s.vy), s.yaw_rate)
            }
            _ => (Vec2::ZERO, 0.0),
        }
    }
}

/// Displacement after moving for `tau` seconds with constant body twist.
fn segment_motion(s: &Segment, tau: f64) -> Pose2 {
    let v = Vec2::new(s.vx, s.vy);
    let w = s.yaw_rate;
    let th = w * tau;
    let p = if (w * tau).abs() < 1e-9 {
        v * tau
    } else {
        // integral of R(w u) v du over [0, tau]
        let (sn, cs) = th.sin_cos();
        Vec2::new(
            (sn * v.x - (1.0 - cs) * v.y) / w,
            ((1.0 - cs) * v.x + sn * v.y) / w,
        )
    };
    Pose2::new(p.x, p.y, th, 0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AzimuthSpacing {
    Uniform,
    /// Uniform in sin(theta), as produced by an FFT over a linear array.
    Sine,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HeatmapGeometry {
    pub n_azimuth: usize,
    pub n_elevation: usize,
    pub spacing: AzimuthSpacing,
    /// Standard deviation of the landmark splat, in bins.
    pub spread: f64,
}

impl Default for HeatmapGeometry {
    fn default() -> Self {
        Self {
            n_azimuth: 256,
            n_elevation: 1,
            spacing: AzimuthSpacing::Sine,
            spread: 0.6,
        }
    }
}

impl HeatmapGeometry {
    pub fn azimuth_angles(&self, max_azimuth: f64) -> Vec<f32> {
        let n = self.n_azimuth.max(2);
        let lin = |lo: f64, hi: f64, i: usize| lo + (hi - lo) * i as f64 / (n - 1) as f64;
        (0..n)
            .map(|i| match self.spacing {
                AzimuthSpacing::Uniform => lin(-max_azimuth, max_azimuth, i) as f32,
                AzimuthSpacing::Sine => {
                    let s = max_azimuth.sin();
                    lin(-s, s, i).asin() as f32
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub scene: Scene,
    pub motion: MotionProfile,
    pub sensors: SensorSpecs,
    pub heatmap: HeatmapGeometry,
    pub start_time: f64,
    /// Delay of the first single-chip frame after the first cascade frame.
    pub singlechip_offset: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            scene: Scene::default(),
            motion: MotionProfile::default(),
            sensors: SensorSpecs::default(),
            heatmap: HeatmapGeometry::default(),
            start_time: 0.0,
            singlechip_offset: -0.03,
        }
    }
}

impl SimConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::InvalidParams(format!("sim config: {e}")))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::InvalidParams(format!("sim config: {e}")))
    }

    /// Explicit landmarks plus any drawn from the random field.
    pub fn landmarks(&self) -> Vec<Landmark> {
        let mut out = self.scene.landmarks.clone();
        let Some(field) = self.scene.random_landmarks else {
            return out;
        };
        let path: Vec<Vec2> = {
            let d = self.motion.duration();
            let n = (d / 0.05).ceil() as usize;
            (0..=n)
                .map(|i| self.motion.pose_at(d * i as f64 / n.max(1) as f64).translation())
                .collect()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(self.scene.seed);
        rng.set_stream(u64::MAX);
        let mut placed = 0;
        let mut attempts = 0;
        while placed < field.count && attempts < field.count * 1000 {
            attempts += 1;
            let p = Vec2::new(
                rng.random_range(field.x_range[0]..=field.x_range[1]),
                rng.random_range(field.y_range[0]..=field.y_range[1]),
            );
            let refl = rng.random_range(field.reflectivity_range[0]..=field.reflectivity_range[1]);
            if path.iter().any(|q| (*q - p).norm() < field.path_clearance) {
                continue;
            }
            out.push(Landmark {
                x: p.x,
                y: p.y,
                reflectivity: refl,
            });
            placed += 1;
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimOutput {
    pub dataset: Dataset,
    pub ground_truth: Trajectory,
}

fn in_wedge(p: Vec2, spec: &SensorSpec, min_range: f64) -> bool {
    let r = p.norm();
    r >= min_range && r <= spec.max_range && p.y.atan2(p.x).abs() <= spec.max_azimuth
}

fn frame_rng(seed: u64, stream: u64, k: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (stream << 56));
    rng.set_stream(k as u64);
    rng
}

fn sample_in_wedge(rng: &mut ChaCha8Rng, spec: &SensorSpec, min_range: f64) -> Vec2 {
    // uniform over the annular sector
    let u: f64 = rng.random();
    let r = (min_range.powi(2) + u * (spec.max_range.powi(2) - min_range.powi(2))).sqrt();
    let th = rng.random_range(-spec.max_azimuth..=spec.max_azimuth);
    Vec2::new(r * th.cos(), r * th.sin())
}

const MIN_RANGE: f64 = 0.3;

/// Single-chip frame `k` at absolute time `t`, without rendering any heatmap.
pub fn doppler_frame(cfg: &SimConfig, landmarks: &[Landmark], k: usize, t: f64) -> DopplerFrame {
    let spec = &cfg.sensors.singlechip;
    let scene = &cfg.scene;
    let local_t = t - cfg.start_time;
    let pose = cfg.motion.pose_at(local_t);
    let (v, _) = cfg.motion.twist_at(local_t);
    let world_to_body = pose.inverse();
    let mut rng = frame_rng(scene.seed, 1, k);
    let noise = Normal::new(0.0, scene.doppler_noise_sigma.max(0.0)).unwrap();

    // rotation adds no radial component about the sensor origin
    let radial = |p: Vec2| -v.dot(p) / p.norm();
    let mut targets: Vec<DopplerTarget> = Vec::new();
    for l in landmarks {
        let p = world_to_body.transform_point(l.pos());
        if !in_wedge(p, spec, MIN_RANGE) {
            continue;
        }
        let d = radial(p) + noise.sample(&mut rng);
        targets.push(DopplerTarget {
            x: p.x as f32,
            y: p.y as f32,
            z: 0.0,
            doppler: d as f32,
            intensity: l.reflectivity as f32,
        });
    }
    let f = scene.outlier_fraction;
    let n_out = (targets.len() as f64 * f / (1.0 - f)).round() as usize;
    for _ in 0..n_out {
        let p = sample_in_wedge(&mut rng, spec, MIN_RANGE);
        let bias = rng.random_range(0.5..3.0) * if rng.random::<bool>() { 1.0 } else { -1.0 };
        targets.push(DopplerTarget {
            x: p.x as f32,
            y: p.y as f32,
            z: 0.0,
            doppler: (radial(p) + bias) as f32,
            intensity: rng.random_range(0.2..1.0),
        });
    }
    DopplerFrame { t, targets }
}

struct Grid {
    n_range: usize,
    azimuths: Vec<f32>,
}

impl Grid {
    fn new(cfg: &SimConfig) -> Self {
        let spec = &cfg.sensors.cascade;
        Grid {
            n_range: (spec.max_range / spec.range_res).floor() as usize,
            azimuths: cfg.heatmap.azimuth_angles(spec.max_azimuth),
        }
    }

    fn azimuth_width(&self, ia: usize) -> f64 {
        let n = self.azimuths.len();
        let lo = self.azimuths[ia.saturating_sub(1)] as f64;
        let hi = self.azimuths[(ia + 1).min(n - 1)] as f64;
        (hi - lo) / ((ia + 1).min(n - 1) - ia.saturating_sub(1)) as f64
    }

    fn nearest_azimuth(&self, th: f64) -> usize {
        let i = self.azimuths.partition_point(|&a| (a as f64) < th);
        if i == 0 {
            0
        } else if i == self.azimuths.len() {
            i - 1
        } else if th - self.azimuths[i - 1] as f64 <= self.azimuths[i] as f64 - th {
            i - 1
        } else {
            i
        }
    }
}

fn splat(h: &mut Heatmap, grid: &Grid, spread: f64, p: Vec2, reflectivity: f64) {
    let r = p.norm();
    let th = p.y.atan2(p.x);
    let ir0 = (r / h.range_res).floor() as isize;
    let ia0 = grid.nearest_azimuth(th) as isize;
    let sigma_r = spread * h.range_res;
    let sigma_a = spread * grid.azimuth_width(ia0 as usize);
    let ec = h.n_elevation / 2;
    for dr in -1..=1 {
        for da in -1..=1 {
            let (ir, ia) = (ir0 + dr, ia0 + da);
            if ir < 0 || ia < 0 || ir as usize >= h.n_range || ia as usize >= h.n_azimuth {
                continue;
            }
            let (ir, ia) = (ir as usize, ia as usize);
            let er = (h.range_center(ir) - r) / sigma_r;
            let ea = (h.azimuth(ia) - th) / sigma_a;
            let w = reflectivity * (-0.5 * (er * er + ea * ea)).exp();
            for ie in 0..h.n_elevation {
                let fall = 0.5f64.powi((ie as i32 - ec as i32).abs());
                let idx = h.index(ir, ia, ie);
                h.intensity[idx] += (w * fall) as f32;
            }
        }
    }
}

fn heatmap_frame(
    cfg: &SimConfig,
    grid: &Grid,
    landmarks: &[Landmark],
    peak: f64,
    k: usize,
    t: f64,
) -> Heatmap {
    let spec = &cfg.sensors.cascade;
    let scene = &cfg.scene;
    let pose = cfg.motion.pose_at(t - cfg.start_time);
    let world_to_body = pose.inverse();
    let mut rng = frame_rng(scene.seed, 2, k);
    let n_el = cfg.heatmap.n_elevation.max(1);
    let mut h = Heatmap {
        n_range: grid.n_range,
        n_azimuth: grid.azimuths.len(),
        n_elevation: n_el,
        range_res: spec.range_res,
        azimuth_angles: grid.azimuths.clone(),
        intensity: vec![0.0; grid.n_range * grid.azimuths.len() * n_el],
        t,
    };
    for l in landmarks {
        let p = world_to_body.transform_point(l.pos());
        if in_wedge(p, spec, MIN_RANGE) {
            splat(&mut h, grid, cfg.heatmap.spread, p, l.reflectivity);
        }
    }
    let n_clutter = scene.clutter_density.round() as usize;
    for _ in 0..n_clutter {
        let p = sample_in_wedge(&mut rng, spec, MIN_RANGE);
        let refl = peak * rng.random_range(0.05..0.25);
        splat(&mut h, grid, cfg.heatmap.spread, p, refl);
    }
    if scene.noise_sigma_intensity > 0.0 {
        let noise = Normal::new(0.0, scene.noise_sigma_intensity * peak).unwrap();
        for v in h.intensity.iter_mut() {
            *v = (*v as f64 + noise.sample(&mut rng)).max(0.0) as f32;
        }
    }
    h
}

/// Generates both sensor streams and the ground truth sampled at the
/// cascade timestamps.
pub fn simulate(cfg: &SimConfig) -> Result<SimOutput> {
    cfg.scene.validate()?;
    cfg.motion.validate()?;
    cfg.sensors
        .cascade
        .validate()
        .and_then(|_| cfg.sensors.singlechip.validate())
        .map_err(Error::InvalidParams)?;
    let landmarks = cfg.landmarks();
    let peak = landmarks
        .iter()
        .map(|l| l.reflectivity)
        .fold(0.0, f64::max)
        .max(1e-6);
    let duration = cfg.motion.duration();
    let grid = Grid::new(cfg);

    let times = |rate: f64, offset: f64| -> Vec<TimeStamp> {
        let dt = 1.0 / rate;
        let first = (-offset / dt).ceil() as i64;
        (first..)
            .map(|i| offset + i as f64 * dt)
            .take_while(|t| *t <= duration + 1e-9)
            .map(|t| cfg.start_time + t)
            .collect()
    };
    let cascade_t = times(cfg.sensors.cascade.framerate, 0.0);
    let sc_t = times(cfg.sensors.singlechip.framerate, cfg.singlechip_offset.rem_euclid(1.0 / cfg.sensors.singlechip.framerate));

    let cascade_frames = cascade_t
        .iter()
        .enumerate()
        .map(|(k, &t)| heatmap_frame(cfg, &grid, &landmarks, peak, k, t))
        .collect();
    let singlechip_frames = sc_t
        .iter()
        .enumerate()
        .map(|(k, &t)| doppler_frame(cfg, &landmarks, k, t))
        .collect();
    let gt: Vec<Pose2> = cascade_t
        .iter()
        .map(|&t| Pose2 {
            t,
            ..cfg.motion.pose_at(t - cfg.start_time)
        })
        .collect();
    Ok(SimOutput {
        dataset: Dataset {
            singlechip_frames,
            cascade_frames,
            ground_truth: Some(gt.clone()),
            specs: cfg.sensors,
        },
        ground_truth: Trajectory::new(gt),
    })
}

/// Writes a simulated dataset in the native container layout.
pub fn write_dataset(ds: &Dataset, root: &Path) -> Result<()> {
    ingest::write_dataset(ds, root)
}

/// Named scenes used by the tests and the CLI.
pub mod fixtures {
    use super::*;

    pub const NAMES: [&str; 9] = [
        "stationary",
        "straight",
        "rotation",
        "square",
        "square-moderate",
        "square-noisy",
        "two-cluster",
        "clutter-field",
        "narrow-corridor",
    ];

    fn field(count: usize, lo: f64, hi: f64) -> LandmarkField {
        LandmarkField {
            count,
            x_range: [lo, hi],
            y_range: [lo, hi],
            reflectivity_range: [0.5, 2.0],
            path_clearance: 0.8,
        }
    }

    fn forward(duration: f64, speed: f64) -> Segment {
        Segment {
            duration,
            vx: speed,
            vy: 0.0,
            yaw_rate: 0.0,
        }
    }

    fn turn(duration: f64, rate: f64) -> Segment {
        Segment {
            duration,
            vx: 0.0,
            vy: 0.0,
            yaw_rate: rate,
        }
    }

    /// Fine enough that cell quantization stays below the yaw tolerances.
    pub const FIXTURE_AZIMUTH_BINS: usize = 2048;

    fn geometry() -> HeatmapGeometry {
        HeatmapGeometry {
            n_azimuth: FIXTURE_AZIMUTH_BINS,
            ..Default::default()
        }
    }

    fn base(seed: u64, motion: Vec<Segment>, random: LandmarkField) -> SimConfig {
        SimConfig {
            scene: Scene {
                random_landmarks: Some(random),
                seed,
                ..Default::default()
            },
            motion: MotionProfile { segments: motion },
            heatmap: geometry(),
            ..Default::default()
        }
    }

    /// 5 m sides at 1 m/s with 90 deg turns in place at 22.5 deg/s.
    pub fn square_motion() -> Vec<Segment> {
        let rate = 22.5f64.to_radians();
        (0..4).flat_map(|_| [forward(5.0, 1.0), turn(4.0, rate)]).collect()
    }

    pub fn stationary(seed: u64) -> SimConfig {
        base(seed, vec![forward(10.0, 0.0)], field(60, -6.0, 6.0))
    }

    pub fn straight(seed: u64) -> SimConfig {
        let mut cfg = base(seed, vec![forward(10.0, 1.0)], field(120, -4.0, 18.0));
        if let Some(f) = cfg.scene.random_landmarks.as_mut() {
            f.y_range = [-7.0, 7.0];
        }
        cfg
    }

    pub fn rotation(seed: u64) -> SimConfig {
        base(seed, vec![turn(6.0, 30f64.to_radians())], field(70, -7.0, 7.0))
    }

    pub fn square(seed: u64) -> SimConfig {
        base(seed, square_motion(), field(300, -3.5, 8.5))
    }

    /// Square path with heatmap noise at 5 % of peak and 0.05 m/s Doppler
    /// noise.
    pub fn square_moderate(seed: u64) -> SimConfig {
        let mut cfg = square(seed);
        cfg.scene.noise_sigma_intensity = 0.05;
        cfg.scene.doppler_noise_sigma = 0.05;
        cfg
    }

    /// [`square_moderate`] plus clutter and moving-object outliers.
    pub fn square_noisy(seed: u64) -> SimConfig {
        let mut cfg = square_moderate(seed);
        cfg.scene.clutter_density = 30.0;
        cfg.scene.outlier_fraction = 0.1;
        cfg
    }

    /// Two landmark clusters rotating past a stationary sensor.
    pub fn two_cluster(seed: u64) -> SimConfig {
        let mut landmarks = Vec::new();
        for (cx, cy) in [(4.0, 1.5), (3.0, -2.0)] {
            for i in 0..6 {
                let a = i as f64 * 1.1;
                landmarks.push(Landmark {
                    x: cx + 0.4 * a.cos(),
                    y: cy + 0.4 * a.sin(),
                    reflectivity: 1.0 + 0.1 * i as f64,
                });
            }
        }
        SimConfig {
            scene: Scene {
                landmarks,
                seed,
                ..Default::default()
            },
            motion: MotionProfile {
                segments: vec![turn(2.0, 10f64.to_radians())],
            },
            heatmap: geometry(),
            ..Default::default()
        }
    }

    /// Many small objects of equal reflectivity and no dominant reflector.
    pub fn clutter_field(seed: u64) -> SimConfig {
        let mut cfg = base(seed, square_motion(), field(250, -3.5, 8.5));
        if let Some(f) = cfg.scene.random_landmarks.as_mut() {
            f.reflectivity_range = [1.0, 1.0];
            f.path_clearance = 0.5;
        }
        cfg.scene.clutter_density = 60.0;
        cfg.scene.noise_sigma_intensity = 0.05;
        cfg
    }

    /// Dense close-range walls on both sides of a straight drive.
    pub fn narrow_corridor(seed: u64) -> SimConfig {
        let mut landmarks = Vec::new();
        let mut x = -2.0;
        while x < 16.0 {
            for y in [-0.8, 0.8] {
                landmarks.push(Landmark {
                    x,
                    y,
                    reflectivity: 1.0,
                });
            }
            x += 0.15;
        }
        SimConfig {
            scene: Scene {
                landmarks,
                seed,
                ..Default::default()
            },
            motion: MotionProfile {
                segments: vec![forward(3.0, 1.0), turn(2.0, 15f64.to_radians()), forward(3.0, 1.0)],
            },
            heatmap: geometry(),
            ..Default::default()
        }
    }

    pub fn by_name(name: &str, seed: u64) -> Option<SimConfig> {
        Some(match name {
            "stationary" => stationary(seed),
            "straight" => straight(seed),
            "rotation" => rotation(seed),
            "square" => square(seed),
            "square-moderate" => square_moderate(seed),
            "square-noisy" => square_noisy(seed),
            "two-cluster" => two_cluster(seed),
            "clutter-field" => clutter_field(seed),
            "narrow-corridor" => narrow_corridor(seed),
            _ => return None,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn closed_form_motion() {
        let m = MotionProfile {
            segments: vec![
                Segment { duration: 2.0, vx: 1.0, vy: 0.0, yaw_rate: 0.0 },
                Segment { duration: 1.0, vx: 0.0, vy: 0.0, yaw_rate: FRAC_PI_2 },
                Segment { duration: 3.0, vx: 1.0, vy: 0.0, yaw_rate: 0.0 },
            ],
        };
        let p = m.pose_at(6.0);
        assert!((p.x - 2.0).abs() < 1e-12 && (p.y - 3.0).abs() < 1e-12);
        assert!((p.yaw - FRAC_PI_2).abs() < 1e-12);
        let half = m.pose_at(2.5);
        assert!((half.yaw - FRAC_PI_2 / 2.0).abs() < 1e-12);

        // a circular arc: v = 1, w = 1 for pi/2 seconds ends at (1, 1)
        let arc = MotionProfile {
            segments: vec![Segment { duration: FRAC_PI_2, vx: 1.0, vy: 0.0, yaw_rate: 1.0 }],
        };
        let p = arc.pose_at(FRAC_PI_2);
        assert!((p.x - 1.0).abs() < 1e-12 && (p.y - 1.0).abs() < 1e-12);
    }

    #[test]
    fn forward_motion_closes_on_landmark_ahead() {
        let cfg = SimConfig {
            scene: Scene {
                landmarks: vec![Landmark { x: 5.0, y: 0.0, reflectivity: 1.0 }],
                ..Default::default()
            },
            motion: MotionProfile {
                segments: vec![Segment { duration: 1.0, vx: 1.0, vy: 0.0, yaw_rate: 0.0 }],
            },
            ..Default::default()
        };
        let out = simulate(&cfg).unwrap();
        for f in &out.dataset.singlechip_frames {
            assert_eq!(f.targets.len(), 1);
            assert!((f.targets[0].doppler + 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn pure_rotation_has_zero_doppler() {
        let out = simulate(&fixtures::rotation(3)).unwrap();
        let all: Vec<f32> = out
            .dataset
            .singlechip_frames
            .iter()
            .flat_map(|f| f.targets.iter().map(|t| t.doppler))
            .collect();
        assert!(!all.is_empty());
        assert!(all.iter().all(|d| d.abs() < 1e-6));
    }

    #[test]
    fn stationary_heatmaps_repeat() {
        let out = simulate(&fixtures::stationary(1)).unwrap();
        let frames = &out.dataset.cascade_frames;
        assert!(frames.len() > 10);
        assert!(frames.windows(2).all(|w| w[0].intensity == w[1].intensity));
        assert!(out
            .dataset
            .singlechip_frames
            .iter()
            .all(|f| f.targets.iter().all(|t| t.doppler.abs() < 1e-6)));
    }

    #[test]
    fn streams_and_rates() {
        let cfg = fixtures::square(0);
        let out = simulate(&cfg).unwrap();
        let ds = &out.dataset;
        assert_eq!(ds.cascade_frames.len(), 36 * 5 + 1);
        assert!(ds.singlechip_frames.len() >= 360);
        assert_eq!(out.ground_truth.len(), ds.cascade_frames.len());
        ds.validate(&Default::default()).unwrap();
        let end = out.ground_truth.poses.last().unwrap();
        assert!(end.translation().norm() < 1e-9 && end.yaw.abs() < 1e-9);
    }

    #[test]
    fn seeded_runs_are_bit_identical() {
        let a = simulate(&fixtures::square_noisy(5)).unwrap();
        let b = simulate(&fixtures::square_noisy(5)).unwrap();
        assert_eq!(a, b);
        let c = simulate(&fixtures::square_noisy(6)).unwrap();
        assert_ne!(a.dataset.cascade_frames[3], c.dataset.cascade_frames[3]);
    }

    #[test]
    fn config_round_trips_through_toml() {
        let cfg = fixtures::square_noisy(9);
        let text = cfg.to_toml().unwrap();
        assert_eq!(SimConfig::from_toml(&text).unwrap(), cfg);
    }

    #[test]
    fn elevation_spread() {
        let mut cfg = fixtures::two_cluster(0);
        cfg.heatmap.n_elevation = 5;
        let out = simulate(&cfg).unwrap();
        let h = &out.dataset.cascade_frames[0];
        assert_eq!(h.n_elevation, 5);
        let flat = crate::preprocess::collapse_elevation(h);
        let (mut ir, mut ia) = (0, 0);
        for r in 0..flat.n_range {
            for a in 0..flat.n_azimuth {
                if flat.at(r, a, 0) > flat.at(ir, ia, 0) {
                    (ir, ia) = (r, a);
                }
            }
        }
        assert_eq!(flat.at(ir, ia, 0), h.at(ir, ia, 2));
        assert_eq!(h.at(ir, ia, 0), h.at(ir, ia, 2) * 0.25);
    }
}
