//! On-disk sensor streams.
//!
//! Container layout under a dataset root:
//!
//! ```text
//! index.txt          <stream> <timestamp_seconds> <relative_path>   (stream: singlechip | cascade)
//! sensors.toml       [cascade] / [singlechip] tables: range_res, max_range, max_azimuth, framerate
//! groundtruth.txt    optional, `t x y z qx qy qz qw` per line
//! cascade/*.bin      heatmap frames
//! singlechip/*.bin   Doppler point cloud frames
//! ```
//!
//! Heatmap frame: 4 x u32 LE header (n_range, n_azimuth, n_elevation, 0), the
//! azimuth table as n_azimuth f32 LE, then intensities as f32 LE ordered
//! range-major, then azimuth, then elevation.
//!
//! Doppler frame: u32 LE count, then count x 5 f32 LE (x, y, z, doppler, intensity).
//!
//! Payload arrays are kept as `f32` in memory so that write-then-load is
//! bitwise exact.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Pose2, TimeStamp};

pub const INDEX_FILE: &str = "index.txt";
pub const SENSORS_FILE: &str = "sensors.toml";
pub const GROUND_TRUTH_FILE: &str = "groundtruth.txt";

const HEATMAP_HEADER_BYTES: usize = 16;

/// One single-chip detection in the sensor frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DopplerTarget {
    pub x: f32,
    pub y: f32,
    pub z: f32,
    /// Radial speed, positive when receding.
    pub doppler: f32,
    pub intensity: f32,
}

impl DopplerTarget {
    pub fn range(&self) -> f64 {
        let (x, y, z) = (self.x as f64, self.y as f64, self.z as f64);
        (x * x + y * y + z * z).sqrt()
    }

    fn check(&self) -> std::result::Result<(), String> {
        let all = [self.x, self.y, self.z, self.doppler, self.intensity];
        if all.iter().any(|v| !v.is_finite()) {
            return Err("non-finite target field".into());
        }
        if self.intensity < 0.0 {
            return Err("negative target intensity".into());
        }
        if self.range() <= 0.0 {
            return Err("target at the sensor origin".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DopplerFrame {
    pub t: TimeStamp,
    pub targets: Vec<DopplerTarget>,
}

/// Dense range x azimuth x elevation intensity grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Heatmap {
    pub n_range: usize,
    pub n_azimuth: usize,
    pub n_elevation: usize,
    /// Meters per range bin.
    pub range_res: f64,
    /// Azimuth of each column in radians, strictly increasing.
    pub azimuth_angles: Vec<f32>,
    /// Linear intensities, index `(ir * n_azimuth + ia) * n_elevation + ie`.
    pub intensity: Vec<f32>,
    pub t: TimeStamp,
}

impl Heatmap {
    pub fn new(
        n_range: usize,
        n_azimuth: usize,
        n_elevation: usize,
        range_res: f64,
        azimuth_angles: Vec<f32>,
        intensity: Vec<f32>,
        t: TimeStamp,
    ) -> Result<Self> {
        let h = Heatmap {
            n_range,
            n_azimuth,
            n_elevation,
            range_res,
            azimuth_angles,
            intensity,
            t,
        };
        h.validate().map_err(Error::InvalidParams)?;
        Ok(h)
    }

    pub fn validate(&self) -> std::result::Result<(), String> {
        if self.n_elevation == 0 {
            return Err("n_elevation must be at least 1".into());
        }
        let cells = self.n_range * self.n_azimuth * self.n_elevation;
        if self.intensity.len() != cells {
            return Err(format!(
                "grid holds {} values, dims require {cells}",
                self.intensity.len()
            ));
        }
        if self.azimuth_angles.len() != self.n_azimuth {
            return Err(format!(
                "{} azimuth angles for {} azimuth bins",
                self.azimuth_angles.len(),
                self.n_azimuth
            ));
        }
        if !(self.range_res > 0.0 && self.range_res.is_finite()) {
            return Err(format!("range_res {} must be positive", self.range_res));
        }
        if !self.t.is_finite() {
            return Err("non-finite timestamp".into());
        }
        for a in &self.azimuth_angles {
            if !a.is_finite() || (*a as f64).abs() > PI {
                return Err(format!("azimuth angle {a} outside [-pi, pi]"));
            }
        }
        if self.azimuth_angles.windows(2).any(|w| w[1] <= w[0]) {
            return Err("azimuth angles not strictly increasing".into());
        }
        if let Some(v) = self
            .intensity
            .iter()
            .find(|v| !v.is_finite() || **v < 0.0)
        {
            return Err(format!("intensity {v} is negative or non-finite"));
        }
        Ok(())
    }

    #[inline]
    pub fn index(&self, ir: usize, ia: usize, ie: usize) -> usize {
        (ir * self.n_azimuth + ia) * self.n_elevation + ie
    }

    #[inline]
    pub fn at(&self, ir: usize, ia: usize, ie: usize) -> f32 {
        self.intensity[self.index(ir, ia, ie)]
    }

    /// Range of the center of bin `ir`.
    pub fn range_center(&self, ir: usize) -> f64 {
        (ir as f64 + 0.5) * self.range_res
    }

    pub fn azimuth(&self, ia: usize) -> f64 {
        self.azimuth_angles[ia] as f64
    }
}

/// Per-sensor geometry and rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorSpec {
    pub range_res: f64,
    pub max_range: f64,
    /// Half field of view, radians.
    pub max_azimuth: f64,
    pub framerate: f64,
}

impl SensorSpec {
    /// MMWCAS-RF-EVM cascade radar as used on ColoRadar.
    pub fn cascade() -> Self {
        Self {
            range_res: 0.06,
            max_range: 7.6,
            max_azimuth: 76.3f64.to_radians(),
            framerate: 5.0,
        }
    }

    /// AWR1843BOOST single-chip radar as used on ColoRadar.
    pub fn singlechip() -> Self {
        Self {
            range_res: 0.125,
            max_range: 8.0,
            max_azimuth: 78.3f64.to_radians(),
            framerate: 10.0,
        }
    }

    pub fn validate(&self) -> std::result::Result<(), String> {
        let fields = [
            ("range_res", self.range_res),
            ("max_range", self.max_range),
            ("max_azimuth", self.max_azimuth),
            ("framerate", self.framerate),
        ];
        for (name, v) in fields {
            if !(v > 0.0 && v.is_finite()) {
                return Err(format!("{name} must be positive, got {v}"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorSpecs {
    pub cascade: SensorSpec,
    pub singlechip: SensorSpec,
}

impl Default for SensorSpecs {
    fn default() -> Self {
        Self {
            cascade: SensorSpec::cascade(),
            singlechip: SensorSpec::singlechip(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub singlechip_frames: Vec<DopplerFrame>,
    pub cascade_frames: Vec<Heatmap>,
    pub ground_truth: Option<Vec<Pose2>>,
    pub specs: SensorSpecs,
}

impl Dataset {
    pub fn empty(specs: SensorSpecs) -> Self {
        Self {
            singlechip_frames: Vec::new(),
            cascade_frames: Vec::new(),
            ground_truth: None,
            specs,
        }
    }

    /// Checks stream ordering and heatmap invariants; warns about rates
    /// that disagree with the declared sensor specs.
    pub fn validate(&self, opts: &LoadOptions) -> Result<()> {
        self.specs
            .cascade
            .validate()
            .and_then(|_| self.specs.singlechip.validate())
            .map_err(Error::InvalidParams)?;
        check_monotone("singlechip", self.singlechip_frames.iter().map(|f| f.t))?;
        check_monotone("cascade", self.cascade_frames.iter().map(|h| h.t))?;
        if let Some(gt) = &self.ground_truth {
            check_monotone("groundtruth", gt.iter().map(|p| p.t))?;
        }
        for (i, h) in self.cascade_frames.iter().enumerate() {
            h.validate().map_err(|detail| {
                Error::InvalidParams(format!("cascade frame {i}: {detail}"))
            })?;
        }
        warn_rate(
            "cascade",
            self.cascade_frames.iter().map(|h| h.t),
            self.specs.cascade.framerate,
            opts.rate_tolerance,
        );
        warn_rate(
            "singlechip",
            self.singlechip_frames.iter().map(|f| f.t),
            self.specs.singlechip.framerate,
            opts.rate_tolerance,
        );
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoadOptions {
    /// Relative deviation of the measured frame rate from the declared one
    /// that triggers a warning.
    pub rate_tolerance: f64,
}

impl Default for LoadOptions {
    fn default() -> Self {
        Self {
            rate_tolerance: 0.2,
        }
    }
}

fn check_monotone(stream: &str, ts: impl Iterator<Item = f64>) -> Result<()> {
    let mut prev = f64::NEG_INFINITY;
    for (index, t) in ts.enumerate() {
        if !t.is_finite() || t <= prev {
            return Err(Error::NonMonotone {
                stream: stream.to_string(),
                index,
            });
        }
        prev = t;
    }
    Ok(())
}

fn warn_rate(stream: &str, ts: impl Iterator<Item = f64>, declared: f64, tol: f64) {
    let ts: Vec<f64> = ts.collect();
    if ts.len() < 2 {
        return;
    }
    let measured = (ts.len() - 1) as f64 / (ts[ts.len() - 1] - ts[0]);
    if ((measured - declared) / declared).abs() > tol {
        log::warn!("{stream}: measured frame rate {measured:.2} Hz, declared {declared:.2} Hz");
    }
}

// ---------------------------------------------------------------------------
// Native container

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Stream {
    SingleChip,
    Cascade,
}

impl Stream {
    fn parse(s: &str) -> Option<Stream> {
        match s {
            "singlechip" => Some(Stream::SingleChip),
            "cascade" => Some(Stream::Cascade),
            _ => None,
        }
    }
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingFile(path.to_path_buf()),
        _ => Error::Io(e),
    })
}

fn read_text(path: &Path) -> Result<String> {
    let bytes = read_file(path)?;
    String::from_utf8(bytes).map_err(|_| Error::InvalidData {
        path: path.to_path_buf(),
        detail: "not valid UTF-8".into(),
    })
}

pub fn load_sensor_specs(path: &Path) -> Result<SensorSpecs> {
    let text = read_text(path)?;
    let specs: SensorSpecs = toml::from_str(&text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        line: 0,
        detail: e.to_string(),
    })?;
    specs
        .cascade
        .validate()
        .and_then(|_| specs.singlechip.validate())
        .map_err(|detail| Error::InvalidData {
            path: path.to_path_buf(),
            detail,
        })?;
    Ok(specs)
}

/// Loads a dataset written in the native container layout.
pub fn load_dataset(root: &Path, opts: &LoadOptions) -> Result<Dataset> {
    if !root.is_dir() {
        return Err(Error::MissingFile(root.to_path_buf()));
    }
    let specs = load_sensor_specs(&root.join(SENSORS_FILE))?;
    let index_path = root.join(INDEX_FILE);
    let index = read_text(&index_path)?;

    let mut ds = Dataset::empty(specs);
    for (lineno, line) in index.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let parse_err = |detail: String| Error::Parse {
            path: index_path.clone(),
            line: lineno + 1,
            detail,
        };
        let mut fields = line.split_whitespace();
        let (Some(stream), Some(t), Some(rel), None) =
            (fields.next(), fields.next(), fields.next(), fields.next())
        else {
            return Err(parse_err(
                "expected `<stream> <timestamp> <path>`".to_string(),
            ));
        };
        let stream =
            Stream::parse(stream).ok_or_else(|| parse_err(format!("unknown stream `{stream}`")))?;
        let t: f64 = t
            .parse()
            .map_err(|_| parse_err(format!("bad timestamp `{t}`")))?;
        let path = root.join(rel);
        match stream {
            Stream::Cascade => {
                let bytes = read_file(&path)?;
                ds.cascade_frames.push(decode_heatmap(
                    &bytes,
                    ds.specs.cascade.range_res,
                    t,
                    &path,
                )?);
            }
            Stream::SingleChip => {
                let bytes = read_file(&path)?;
                ds.singlechip_frames.push(DopplerFrame {
                    t,
                    targets: decode_doppler(&bytes, &path)?,
                });
            }
        }
    }

    let gt_path = root.join(GROUND_TRUTH_FILE);
    if gt_path.exists() {
        ds.ground_truth = Some(parse_ground_truth(&read_text(&gt_path)?, &gt_path)?);
    }
    ds.validate(opts)?;
    Ok(ds)
}

fn u32_at(bytes: &[u8], off: usize) -> u32 {
    u32::from_le_bytes(bytes[off..off + 4].try_into().unwrap())
}

fn f32s_le(bytes: &[u8]) -> impl Iterator<Item = f32> + '_ {
    bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
}

pub fn decode_heatmap(bytes: &[u8], range_res: f64, t: f64, path: &Path) -> Result<Heatmap> {
    let mismatch = |detail: String| Error::DimensionMismatch {
        path: path.to_path_buf(),
        detail,
    };
    if bytes.len() < HEATMAP_HEADER_BYTES {
        return Err(mismatch(format!("{} bytes, header needs 16", bytes.len())));
    }
    let n_range = u32_at(bytes, 0) as usize;
    let n_azimuth = u32_at(bytes, 4) as usize;
    let n_elevation = u32_at(bytes, 8) as usize;
    let reserved = u32_at(bytes, 12);
    if reserved != 0 {
        return Err(Error::InvalidData {
            path: path.to_path_buf(),
            detail: format!("reserved header word is {reserved}, expected 0"),
        });
    }
    let cells = n_range
        .checked_mul(n_azimuth)
        .and_then(|c| c.checked_mul(n_elevation))
        .ok_or_else(|| mismatch("header dimensions overflow".into()))?;
    let expected = HEATMAP_HEADER_BYTES + 4 * (n_azimuth + cells);
    if bytes.len() != expected {
        return Err(mismatch(format!(
            "header {n_range}x{n_azimuth}x{n_elevation} needs {expected} bytes, file has {}",
            bytes.len()
        )));
    }
    let az_end = HEATMAP_HEADER_BYTES + 4 * n_azimuth;
    let h = Heatmap {
        n_range,
        n_azimuth,
        n_elevation,
        range_res,
        azimuth_angles: f32s_le(&bytes[HEATMAP_HEADER_BYTES..az_end]).collect(),
        intensity: f32s_le(&bytes[az_end..]).collect(),
        t,
    };
    h.validate().map_err(|detail| Error::InvalidData {
        path: path.to_path_buf(),
        detail,
    })?;
    Ok(h)
}

pub fn encode_heatmap(h: &Heatmap) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEATMAP_HEADER_BYTES + 4 * (h.n_azimuth + h.intensity.len()));
    for v in [h.n_range, h.n_azimuth, h.n_elevation, 0] {
        out.extend_from_slice(&(v as u32).to_le_bytes());
    }
    for v in h.azimuth_angles.iter().chain(&h.intensity) {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_doppler(bytes: &[u8], path: &Path) -> Result<Vec<DopplerTarget>> {
    let mismatch = |detail: String| Error::DimensionMismatch {
        path: path.to_path_buf(),
        detail,
    };
    if bytes.len() < 4 {
        return Err(mismatch("missing target count".into()));
    }
    let count = u32_at(bytes, 0) as usize;
    let expected = count
        .checked_mul(20)
        .and_then(|n| n.checked_add(4))
        .ok_or_else(|| mismatch("target count overflows".into()))?;
    if bytes.len() != expected {
        return Err(mismatch(format!(
            "count {count} needs {expected} bytes, file has {}",
            bytes.len()
        )));
    }
    let values: Vec<f32> = f32s_le(&bytes[4..]).collect();
    targets_from_values(&values, path)
}

fn targets_from_values(values: &[f32], path: &Path) -> Result<Vec<DopplerTarget>> {
    values
        .chunks_exact(5)
        .enumerate()
        .map(|(i, c)| {
            let t = DopplerTarget {
                x: c[0],
                y: c[1],
                z: c[2],
                doppler: c[3],
                intensity: c[4],
            };
            t.check().map(|_| t).map_err(|detail| Error::InvalidData {
                path: path.to_path_buf(),
                detail: format!("target {i}: {detail}"),
            })
        })
        .collect()
}

pub fn encode_doppler(targets: &[DopplerTarget]) -> Vec<u8> {
    let mut out = Vec::with_capacity(4 + 20 * targets.len());
    out.extend_from_slice(&(targets.len() as u32).to_le_bytes());
    for t in targets {
        for v in [t.x, t.y, t.z, t.doppler, t.intensity] {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

/// Heading of a quaternion; scale invariant so unnormalized input is fine.
pub fn yaw_from_quaternion(qx: f64, qy: f64, qz: f64, qw: f64) -> f64 {
    (2.0 * (qw * qz + qx * qy)).atan2(qw * qw + qx * qx - qy * qy - qz * qz)
}

/// Parses `t x y z qx qy qz qw` lines and projects each pose to SE(2).
pub fn parse_ground_truth(text: &str, path: &Path) -> Result<Vec<Pose2>> {
    let mut poses = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let vals = parse_floats(line).ok_or_else(|| Error::Parse {
            path: path.to_path_buf(),
            line: lineno + 1,
            detail: "expected 8 numbers `t x y z qx qy qz qw`".into(),
        })?;
        let [t, x, y, _z, qx, qy, qz, qw] = vals[..] else {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: lineno + 1,
                detail: format!("expected 8 numbers, found {}", vals.len()),
            });
        };
        let pose = Pose2::new(x, y, yaw_from_quaternion(qx, qy, qz, qw), t);
        if !pose.is_finite() {
            return Err(Error::InvalidData {
                path: path.to_path_buf(),
                detail: format!("line {}: non-finite pose", lineno + 1),
            });
        }
        poses.push(pose);
    }
    Ok(poses)
}

fn parse_floats(line: &str) -> Option<Vec<f64>> {
    line.split_whitespace().map(|s| s.parse().ok()).collect()
}

pub fn format_ground_truth(poses: &[Pose2]) -> String {
    let mut out = String::new();
    for p in poses {
        let (qz, qw) = (p.yaw / 2.0).sin_cos();
        writeln!(out, "{} {} {} 0 0 0 {} {}", p.t, p.x, p.y, qz, qw).unwrap();
    }
    out
}

/// Writes `ds` in the native container layout. Inverse of [`load_dataset`].
pub fn write_dataset(ds: &Dataset, root: &Path) -> Result<()> {
    fs::create_dir_all(root.join("cascade"))?;
    fs::create_dir_all(root.join("singlechip"))?;
    let specs = toml::to_string(&ds.specs)
        .map_err(|e| Error::InvalidParams(format!("cannot serialize sensor specs: {e}")))?;
    fs::write(root.join(SENSORS_FILE), specs)?;

    // Interleave both streams by time so the index reads chronologically.
    let mut entries: Vec<(f64, String)> = Vec::new();
    for (i, f) in ds.singlechip_frames.iter().enumerate() {
        let rel = format!("singlechip/{i:06}.bin");
        fs::write(root.join(&rel), encode_doppler(&f.targets))?;
        entries.push((f.t, format!("singlechip {} {rel}", f.t)));
    }
    for (i, h) in ds.cascade_frames.iter().enumerate() {
        let rel = format!("cascade/{i:06}.bin");
        fs::write(root.join(&rel), encode_heatmap(h))?;
        entries.push((h.t, format!("cascade {} {rel}", h.t)));
    }
    entries.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut index = String::new();
    for (_, line) in entries {
        index.push_str(&line);
        index.push('\n');
    }
    fs::write(root.join(INDEX_FILE), index)?;
    if let Some(gt) = &ds.ground_truth {
        fs::write(root.join(GROUND_TRUTH_FILE), format_ground_truth(gt))?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// ColoRadar-style raw binaries

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Endianness {
    Little,
    Big,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    Range,
    Azimuth,
    Elevation,
}

/// Layout of the raw cascade heatmap binaries. Every field is required;
/// they are optional here only so missing keys can be reported together.
#[derive(Debug, Clone, Default, Deserialize)]
pub struct CascadeAdapter {
    pub timestamps: Option<PathBuf>,
    pub data_dir: Option<PathBuf>,
    /// File name with `{}` standing for the frame index.
    pub file_pattern: Option<String>,
    pub n_range: Option<usize>,
    pub n_azimuth: Option<usize>,
    pub n_elevation: Option<usize>,
    /// Values stored per voxel (e.g. 2 for intensity + doppler).
    pub values_per_cell: Option<usize>,
    pub intensity_channel: Option<usize>,
    /// Axes from outermost to innermost.
    pub axis_order: Option<Vec<Axis>>,
    pub range_res: Option<f64>,
    pub azimuth_angles: Option<Vec<f64>>,
    /// Alternative to `azimuth_angles`: whitespace-separated radians.
    pub azimuth_angles_file: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Deserialize)]
pub struct SingleChipAdapter {
    pub timestamps: Option<PathBuf>,
    pub data_dir: Option<PathBuf>,
    pub file_pattern: Option<String>,
    /// Per-point field names in storage order; must contain
    /// x, y, z, doppler and intensity, other names are skipped.
    pub fields: Option<Vec<String>>,
    #[serde(default)]
    pub negate_doppler: bool,
}

#[derive(Debug, Clone, Default, Deserialize)]
pub struct GroundTruthAdapter {
    pub timestamps: Option<PathBuf>,
    /// `x y z qx qy qz qw` per line, aligned with `timestamps`.
    pub poses: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Deserialize)]
pub struct AdapterConfig {
    pub endianness: Option<Endianness>,
    /// Intensities are stored in dB and converted with `10^(v/10)`.
    pub log_input: Option<bool>,
    /// Max-collapse elevation at load time to bound memory.
    #[serde(default = "default_true")]
    pub collapse_elevation: bool,
    pub cascade: Option<CascadeAdapter>,
    pub singlechip: Option<SingleChipAdapter>,
    pub groundtruth: Option<GroundTruthAdapter>,
    pub sensors: Option<SensorSpecs>,
}

fn default_true() -> bool {
    true
}

impl AdapterConfig {
    pub fn from_toml_file(path: &Path) -> Result<Self> {
        let text = read_text(path)?;
        toml::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: 0,
            detail: e.to_string(),
        })
    }

    fn missing_keys(&self) -> Vec<String> {
        let mut missing = Vec::new();
        let mut need = |present: bool, key: &str| {
            if !present {
                missing.push(key.to_string());
            }
        };
        need(self.endianness.is_some(), "endianness");
        need(self.log_input.is_some(), "log_input");
        match &self.cascade {
            None => need(false, "cascade"),
            Some(c) => {
                need(c.timestamps.is_some(), "cascade.timestamps");
                need(c.data_dir.is_some(), "cascade.data_dir");
                need(c.file_pattern.is_some(), "cascade.file_pattern");
                need(c.n_range.is_some(), "cascade.n_range");
                need(c.n_azimuth.is_some(), "cascade.n_azimuth");
                need(c.n_elevation.is_some(), "cascade.n_elevation");
                need(c.values_per_cell.is_some(), "cascade.values_per_cell");
                need(c.intensity_channel.is_some(), "cascade.intensity_channel");
                need(c.axis_order.is_some(), "cascade.axis_order");
                need(c.range_res.is_some(), "cascade.range_res");
                need(
                    c.azimuth_angles.is_some() || c.azimuth_angles_file.is_some(),
                    "cascade.azimuth_angles",
                );
            }
        }
        match &self.singlechip {
            None => need(false, "singlechip"),
            Some(s) => {
                need(s.timestamps.is_some(), "singlechip.timestamps");
                need(s.data_dir.is_some(), "singlechip.data_dir");
                need(s.file_pattern.is_some(), "singlechip.file_pattern");
                need(s.fields.is_some(), "singlechip.fields");
            }
        }
        if let Some(g) = &self.groundtruth {
            need(g.timestamps.is_some(), "groundtruth.timestamps");
            need(g.poses.is_some(), "groundtruth.poses");
        }
        missing
    }
}

fn read_timestamps(path: &Path) -> Result<Vec<f64>> {
    let text = read_text(path)?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            l.trim().parse::<f64>().map_err(|_| Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                detail: format!("bad timestamp `{}`", l.trim()),
            })
        })
        .collect()
}

fn decode_f32s(bytes: &[u8], endianness: Endianness) -> Vec<f32> {
    bytes
        .chunks_exact(4)
        .map(|c| {
            let b: [u8; 4] = c.try_into().unwrap();
            match endianness {
                Endianness::Little => f32::from_le_bytes(b),
                Endianness::Big => f32::from_be_bytes(b),
            }
        })
        .collect()
}

/// Loads raw ColoRadar-style binaries described by `cfg` into a [`Dataset`].
pub fn load_coloradar_adapter(
    root: &Path,
    cfg: &AdapterConfig,
    opts: &LoadOptions,
) -> Result<Dataset> {
    let missing = cfg.missing_keys();
    if !missing.is_empty() {
        return Err(Error::ConfigIncomplete(missing));
    }
    if !root.is_dir() {
        return Err(Error::MissingFile(root.to_path_buf()));
    }
    let endianness = cfg.endianness.unwrap();
    let log_input = cfg.log_input.unwrap();
    let c = cfg.cascade.as_ref().unwrap();
    let s = cfg.singlechip.as_ref().unwrap();
    let mut specs = cfg.sensors.unwrap_or_default();
    specs.cascade.range_res = c.range_res.unwrap();

    let (n_range, n_azimuth, n_elevation) =
        (c.n_range.unwrap(), c.n_azimuth.unwrap(), c.n_elevation.unwrap());
    let values_per_cell = c.values_per_cell.unwrap();
    let channel = c.intensity_channel.unwrap();
    let order = c.axis_order.clone().unwrap();
    let mut sorted = order.clone();
    sorted.sort_by_key(|a| *a as u8);
    if sorted != [Axis::Range, Axis::Azimuth, Axis::Elevation] || channel >= values_per_cell {
        return Err(Error::InvalidParams(
            "axis_order must list range, azimuth and elevation once; intensity_channel < values_per_cell".into(),
        ));
    }
    let azimuth_angles: Vec<f32> = match (&c.azimuth_angles, &c.azimuth_angles_file) {
        (Some(a), _) => a.iter().map(|v| *v as f32).collect(),
        (None, Some(file)) => {
            let path = root.join(file);
            parse_floats(&read_text(&path)?)
                .ok_or_else(|| Error::Parse {
                    path,
                    line: 0,
                    detail: "azimuth table must be whitespace-separated numbers".into(),
                })?
                .into_iter()
                .map(|v| v as f32)
                .collect()
        }
        (None, None) => unreachable!(),
    };

    let dim = |a: Axis| match a {
        Axis::Range => n_range,
        Axis::Azimuth => n_azimuth,
        Axis::Elevation => n_elevation,
    };
    let cells = n_range * n_azimuth * n_elevation;
    let mut ds = Dataset::empty(specs);

    let data_dir = root.join(c.data_dir.as_ref().unwrap());
    let pattern = c.file_pattern.as_ref().unwrap();
    for (i, t) in read_timestamps(&root.join(c.timestamps.as_ref().unwrap()))?
        .into_iter()
        .enumerate()
    {
        let path = data_dir.join(pattern.replace("{}", &i.to_string()));
        let bytes = read_file(&path)?;
        if bytes.len() != 4 * cells * values_per_cell {
            return Err(Error::DimensionMismatch {
                path,
                detail: format!(
                    "{n_range}x{n_azimuth}x{n_elevation}x{values_per_cell} f32 needs {} bytes, file has {}",
                    4 * cells * values_per_cell,
                    bytes.len()
                ),
            });
        }
        let raw = decode_f32s(&bytes, endianness);
        let mut grid = vec![0f32; cells];
        let mut idx = [0usize; 3];
        for (flat, slot) in raw.chunks_exact(values_per_cell).enumerate() {
            let mut rem = flat;
            for k in (0..3).rev() {
                let d = dim(order[k]);
                idx[k] = rem % d;
                rem /= d;
            }
            let at = |a: Axis| idx[order.iter().position(|o| *o == a).unwrap()];
            let (ir, ia, ie) = (at(Axis::Range), at(Axis::Azimuth), at(Axis::Elevation));
            let v = slot[channel];
            grid[(ir * n_azimuth + ia) * n_elevation + ie] = if log_input {
                10f32.powf(v / 10.0)
            } else {
                v
            };
        }
        let mut h = Heatmap {
            n_range,
            n_azimuth,
            n_elevation,
            range_res: c.range_res.unwrap(),
            azimuth_angles: azimuth_angles.clone(),
            intensity: grid,
            t,
        };
        h.validate()
            .map_err(|detail| Error::InvalidData { path, detail })?;
        if cfg.collapse_elevation && n_elevation > 1 {
            h = crate::preprocess::collapse_elevation(&h);
        }
        ds.cascade_frames.push(h);
    }

    let fields = s.fields.as_ref().unwrap();
    let slot_of = |name: &str| {
        fields
            .iter()
            .position(|f| f == name)
            .ok_or_else(|| Error::ConfigIncomplete(vec![format!("singlechip.fields.{name}")]))
    };
    let slots = [
        slot_of("x")?,
        slot_of("y")?,
        slot_of("z")?,
        slot_of("doppler")?,
        slot_of("intensity")?,
    ];
    let data_dir = root.join(s.data_dir.as_ref().unwrap());
    let pattern = s.file_pattern.as_ref().unwrap();
    let stride = fields.len();
    for (i, t) in read_timestamps(&root.join(s.timestamps.as_ref().unwrap()))?
        .into_iter()
        .enumerate()
    {
        let path = data_dir.join(pattern.replace("{}", &i.to_string()));
        let bytes = read_file(&path)?;
        if bytes.len() % (4 * stride) != 0 {
            return Err(Error::DimensionMismatch {
                path,
                detail: format!("{} bytes is not a multiple of {stride} f32 fields", bytes.len()),
            });
        }
        let raw = decode_f32s(&bytes, endianness);
        let mut values = Vec::with_capacity(raw.len() / stride * 5);
        for point in raw.chunks_exact(stride) {
            values.extend(slots.iter().map(|&k| point[k]));
            if s.negate_doppler {
                let n = values.len();
                values[n - 2] = -values[n - 2];
            }
        }
        ds.singlechip_frames.push(DopplerFrame {
            t,
            targets: targets_from_values(&values, &path)?,
        });
    }

    if let Some(g) = &cfg.groundtruth {
        let ts = read_timestamps(&root.join(g.timestamps.as_ref().unwrap()))?;
        let pose_path = root.join(g.poses.as_ref().unwrap());
        let text = read_text(&pose_path)?;
        let lines: Vec<&str> = text.lines().filter(|l| !l.trim().is_empty()).collect();
        if lines.len() != ts.len() {
            return Err(Error::DimensionMismatch {
                path: pose_path,
                detail: format!("{} poses for {} timestamps", lines.len(), ts.len()),
            });
        }
        let stamped: String = ts
            .iter()
            .zip(&lines)
            .map(|(t, l)| format!("{t} {l}\n"))
            .collect();
        ds.ground_truth = Some(parse_ground_truth(&stamped, &pose_path)?);
    }

    ds.validate(opts)?;
    Ok(ds)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_heatmap(t: f64) -> Heatmap {
        Heatmap::new(
            3,
            2,
            1,
            0.06,
            vec![-0.5, 0.5],
            vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0],
            t,
        )
        .unwrap()
    }

    #[test]
    fn heatmap_validation() {
        let mut h = small_heatmap(0.0);
        h.azimuth_angles = vec![0.5, -0.5];
        assert!(h.validate().is_err());
        let mut h = small_heatmap(0.0);
        h.intensity[3] = -1.0;
        assert!(h.validate().is_err());
        let mut h = small_heatmap(0.0);
        h.intensity.pop();
        assert!(h.validate().is_err());
    }

    #[test]
    fn heatmap_codec_round_trip() {
        let h = small_heatmap(1.25);
        let bytes = encode_heatmap(&h);
        assert_eq!(bytes.len(), 16 + 4 * (2 + 6));
        let back = decode_heatmap(&bytes, 0.06, 1.25, Path::new("x")).unwrap();
        assert_eq!(back, h);
    }

    #[test]
    fn heatmap_header_payload_mismatch() {
        // header claims 128 azimuth bins, payload carries 127 rows
        let h = Heatmap::new(
            4,
            127,
            1,
            0.06,
            (0..127).map(|i| -1.0 + i as f32 * 0.01).collect(),
            vec![1.0; 4 * 127],
            0.0,
        )
        .unwrap();
        let mut bytes = encode_heatmap(&h);
        bytes[4..8].copy_from_slice(&128u32.to_le_bytes());
        let err = decode_heatmap(&bytes, 0.06, 0.0, Path::new("f.bin")).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { .. }), "{err}");
    }

    #[test]
    fn truncated_inputs_are_typed_errors() {
        let h = encode_heatmap(&small_heatmap(0.0));
        for n in 0..h.len() {
            assert!(decode_heatmap(&h[..n], 0.06, 0.0, Path::new("f")).is_err());
        }
        let targets = [DopplerTarget {
            x: 1.0,
            y: 0.0,
            z: 0.0,
            doppler: -1.0,
            intensity: 2.0,
        }];
        let d = encode_doppler(&targets);
        assert_eq!(decode_doppler(&d, Path::new("f")).unwrap(), targets);
        for n in 0..d.len() {
            assert!(decode_doppler(&d[..n], Path::new("f")).is_err());
        }
    }

    #[test]
    fn quaternion_heading() {
        for yaw in [-3.0, -1.0, 0.0, 0.7, 3.1] {
            let (s, c) = (yaw / 2.0f64).sin_cos();
            assert!((yaw_from_quaternion(0.0, 0.0, s, c) - yaw).abs() < 1e-12);
            // scaled quaternion
            assert!((yaw_from_quaternion(0.0, 0.0, 3.0 * s, 3.0 * c) - yaw).abs() < 1e-12);
        }
        let gt = parse_ground_truth("0 1 2 3 0 0 0 1\n", Path::new("g")).unwrap();
        assert_eq!(gt[0], Pose2::new(1.0, 2.0, 0.0, 0.0));
    }

    #[test]
    fn monotone_check() {
        assert!(check_monotone("s", [0.0, 1.0, 2.0].into_iter()).is_ok());
        let err = check_monotone("s", [0.0, 1.0, 1.0].into_iter()).unwrap_err();
        assert!(matches!(err, Error::NonMonotone { index: 2, .. }));
    }

    #[test]
    fn adapter_reports_every_missing_key() {
        let cfg: AdapterConfig = toml::from_str("endianness = \"little\"\n[cascade]\nn_range = 4\n").unwrap();
        let Err(Error::ConfigIncomplete(keys)) =
            load_coloradar_adapter(Path::new("/nonexistent"), &cfg, &LoadOptions::default())
        else {
            panic!("expected incomplete config");
        };
        assert!(keys.contains(&"log_input".to_string()));
        assert!(keys.contains(&"cascade.n_azimuth".to_string()));
        assert!(keys.contains(&"singlechip".to_string()));
        assert!(!keys.contains(&"cascade.n_range".to_string()));
    }
}
