//! Heatmap to feature points: CFAR, Top-k and Ray-max.
//!
//! Every extractor works on the elevation-collapsed map, emits bin centers
//! (`r = (i + 0.5) * range_res`, `theta` from the azimuth table) and skips
//! cells outside the region of interest.

use std::borrow::Cow;
use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{PolarPoint, TimeStamp, Vec2};
use crate::ingest::Heatmap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    Cfar,
    TopK,
    RayMax,
}

/// Observable wedge of a sensor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Roi {
    pub max_range: f64,
    pub max_azimuth: f64,
}

impl Roi {
    pub const UNBOUNDED: Roi = Roi {
        max_range: f64::INFINITY,
        max_azimuth: std::f64::consts::PI,
    };

    pub fn contains(&self, r: f64, theta: f64) -> bool {
        r <= self.max_range && theta.abs() <= self.max_azimuth
    }

    /// Whether `p` lies in the wedge of a sensor sitting at `origin` (same
    /// heading as the frame of `p`).
    pub fn contains_from(&self, p: &PolarPoint, origin: Vec2) -> bool {
        if origin == Vec2::ZERO {
            return self.contains(p.r, p.theta);
        }
        let d = p.to_cart() - origin;
        self.contains(d.norm(), d.y.atan2(d.x))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSet {
    pub points: Vec<PolarPoint>,
    pub method: Method,
    pub t: TimeStamp,
    /// Position of the observing sensor in the frame of `points`. Zero for
    /// extracted features, moved by rectification.
    #[serde(default)]
    pub origin: Vec2,
}

impl FeatureSet {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CfarParams {
    /// Training cells on each side of the cell under test.
    pub train_cells: usize,
    /// Guard cells on each side of the cell under test.
    pub guard_cells: usize,
    pub threshold_factor: f64,
}

impl Default for CfarParams {
    fn default() -> Self {
        Self {
            train_cells: 8,
            guard_cells: 4,
            threshold_factor: 3.0,
        }
    }
}

impl CfarParams {
    pub fn validate(&self) -> Result<()> {
        if self.train_cells < 1 {
            return Err(Error::InvalidParams("cfar.train_cells must be >= 1".into()));
        }
        if !(self.threshold_factor > 0.0) {
            return Err(Error::InvalidParams("cfar.threshold_factor must be > 0".into()));
        }
        Ok(())
    }
}

/// Max over elevation for every (range, azimuth) cell.
pub fn collapse_elevation(h: &Heatmap) -> Heatmap {
    if h.n_elevation == 1 {
        return h.clone();
    }
    let intensity = h
        .intensity
        .chunks_exact(h.n_elevation)
        .map(|col| col.iter().copied().fold(0f32, f32::max))
        .collect();
    Heatmap {
        n_elevation: 1,
        intensity,
        azimuth_angles: h.azimuth_angles.clone(),
        ..*h
    }
}

fn planar(h: &Heatmap) -> Cow<'_, Heatmap> {
    if h.n_elevation == 1 {
        Cow::Borrowed(h)
    } else {
        Cow::Owned(collapse_elevation(h))
    }
}

fn point(h: &Heatmap, ir: usize, ia: usize) -> PolarPoint {
    PolarPoint::new(h.range_center(ir), h.azimuth(ia), h.at(ir, ia, 0) as f64)
}

/// Range bins and azimuth columns whose centers fall inside `roi`.
fn roi_extent(h: &Heatmap, roi: &Roi) -> (usize, Vec<usize>) {
    let n_range = (0..h.n_range)
        .take_while(|&ir| h.range_center(ir) <= roi.max_range)
        .count();
    let cols = (0..h.n_azimuth)
        .filter(|&ia| h.azimuth(ia).abs() <= roi.max_azimuth)
        .collect();
    (n_range, cols)
}

/// Ranking used by Top-k: brighter first, then lower range bin, then lower
/// azimuth bin.
fn rank(a: &(f32, usize, usize), b: &(f32, usize, usize)) -> Ordering {
    b.0.total_cmp(&a.0)
        .then(a.1.cmp(&b.1))
        .then(a.2.cmp(&b.2))
}

/// The `k` brightest cells (all of them if fewer exist).
pub fn extract_topk(h: &Heatmap, k: usize, roi: &Roi) -> FeatureSet {
    let h = planar(h);
    let (n_range, cols) = roi_extent(&h, roi);
    let mut cells: Vec<(f32, usize, usize)> = Vec::with_capacity(n_range * cols.len());
    for ir in 0..n_range {
        for &ia in &cols {
            cells.push((h.at(ir, ia, 0), ir, ia));
        }
    }
    if k < cells.len() && k > 0 {
        cells.select_nth_unstable_by(k - 1, rank);
        cells.truncate(k);
    }
    cells.truncate(k);
    cells.sort_unstable_by(rank);
    FeatureSet {
        points: cells.iter().map(|&(_, ir, ia)| point(&h, ir, ia)).collect(),
        method: Method::TopK,
        t: h.t,
        origin: Vec2::ZERO,
    }
}

/// The brightest range bin of every azimuth column (lowest bin on ties).
/// All-zero columns still contribute a point at bin 0.
pub fn extract_raymax(h: &Heatmap, roi: &Roi) -> FeatureSet {
    let h = planar(h);
    let (n_range, cols) = roi_extent(&h, roi);
    let mut points = Vec::with_capacity(cols.len());
    if n_range > 0 {
        for &ia in &cols {
            let mut best = 0;
            for ir in 1..n_range {
                if h.at(ir, ia, 0) > h.at(best, ia, 0) {
                    best = ir;
                }
            }
            points.push(point(&h, best, ia));
        }
    }
    FeatureSet {
        points,
        method: Method::RayMax,
        t: h.t,
        origin: Vec2::ZERO,
    }
}

/// 1D cell-averaging CFAR along range, per azimuth column.
///
/// A cell is a detection iff its intensity exceeds `threshold_factor` times
/// the mean of its training cells; guard cells are skipped and the window is
/// truncated at the ends of the column. Detections are ordered by column,
/// then range.
pub fn extract_cfar(h: &Heatmap, p: &CfarParams, roi: &Roi) -> Result<FeatureSet> {
    p.validate()?;
    let half = p.train_cells + p.guard_cells;
    if h.n_range <= 2 * half {
        return Err(Error::InvalidParams(format!(
            "CFAR window of {} cells does not fit {} range bins",
            2 * half + 1,
            h.n_range
        )));
    }
    let h = planar(h);
    let (n_range, cols) = roi_extent(&h, roi);
    let mut points = Vec::new();
    let mut column = vec![0f64; h.n_range];
    // prefix[i] = sum of column[..i]
    let mut prefix = vec![0f64; h.n_range + 1];
    for &ia in &cols {
        for ir in 0..h.n_range {
            column[ir] = h.at(ir, ia, 0) as f64;
            prefix[ir + 1] = prefix[ir] + column[ir];
        }
        let sum = |lo: usize, hi: usize| if hi > lo { prefix[hi] - prefix[lo] } else { 0.0 };
        for ir in 0..n_range {
            // leading cells [ir - half, ir - guard), lagging (ir + guard, ir + half]
            let lead_lo = ir.saturating_sub(half);
            let lead_hi = ir.saturating_sub(p.guard_cells);
            let lag_lo = (ir + p.guard_cells + 1).min(h.n_range);
            let lag_hi = (ir + half + 1).min(h.n_range);
            let count = lead_hi.saturating_sub(lead_lo) + lag_hi.saturating_sub(lag_lo);
            let noise = (sum(lead_lo, lead_hi) + sum(lag_lo, lag_hi)) / count as f64;
            if column[ir] > p.threshold_factor * noise {
                points.push(point(&h, ir, ia));
            }
        }
    }
    Ok(FeatureSet {
        points,
        method: Method::Cfar,
        t: h.t,
        origin: Vec2::ZERO,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn map(n_range: usize, n_azimuth: usize, values: Vec<f32>) -> Heatmap {
        let az = (0..n_azimuth)
            .map(|i| -1.0 + 2.0 * i as f32 / n_azimuth.max(2) as f32)
            .collect();
        Heatmap::new(n_range, n_azimuth, 1, 0.06, az, values, 0.0).unwrap()
    }

    #[test]
    fn collapse_identity_and_single_voxel() {
        let h = map(3, 2, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        assert_eq!(collapse_elevation(&h), h);

        let mut v = vec![0f32; 3 * 2 * 4];
        let mut h3 = Heatmap::new(3, 2, 4, 0.06, vec![-0.1, 0.1], v.clone(), 0.0).unwrap();
        let idx = h3.index(2, 1, 3);
        v[idx] = 7.0;
        h3.intensity = v;
        let c = collapse_elevation(&h3);
        assert_eq!(c.n_elevation, 1);
        for ir in 0..3 {
            for ia in 0..2 {
                let want = if (ir, ia) == (2, 1) { 7.0 } else { 0.0 };
                assert_eq!(c.at(ir, ia, 0), want);
            }
        }
    }

    #[test]
    fn topk_examples() {
        let h = map(2, 2, vec![0.0, 3.0, 1.0, 2.0]);
        assert_eq!(extract_topk(&h, 10, &Roi::UNBOUNDED).len(), 4);

        let mut v = vec![0f32; 5 * 4];
        v[3] = 1.0;
        v[9] = 5.0;
        v[17] = 2.0;
        let h = map(5, 4, v);
        let f = extract_topk(&h, 3, &Roi::UNBOUNDED);
        let got: Vec<f64> = f.points.iter().map(|p| p.intensity).collect();
        assert_eq!(got, vec![5.0, 2.0, 1.0]);
        assert_eq!(f.points[0].r, h.range_center(2));
        assert_eq!(f.points[0].theta, h.azimuth(1));
    }

    #[test]
    fn topk_tie_break_prefers_lower_bins() {
        let h = map(3, 3, vec![1.0; 9]);
        let f = extract_topk(&h, 2, &Roi::UNBOUNDED);
        assert_eq!(f.points[0].r, h.range_center(0));
        assert_eq!(f.points[0].theta, h.azimuth(0));
        assert_eq!(f.points[1].theta, h.azimuth(1));
    }

    #[test]
    fn raymax_examples() {
        let az: Vec<f32> = (0..128).map(|i| -1.3 + i as f32 * 0.02).collect();
        let values: Vec<f32> = (0..10 * 128).map(|i| (i % 17) as f32).collect();
        let h = Heatmap::new(10, 128, 1, 0.06, az, values, 0.0).unwrap();
        assert_eq!(extract_raymax(&h, &Roi::UNBOUNDED).len(), 128);

        let h = map(4, 2, vec![0.0, 1.0, 0.0, 3.0, 0.0, 3.0, 0.0, 0.0]);
        let f = extract_raymax(&h, &Roi::UNBOUNDED);
        assert_eq!(f.points[0].r, h.range_center(0));
        assert_eq!(f.points[0].intensity, 0.0);
        assert_eq!(f.points[1].r, h.range_center(1));
    }

    #[test]
    fn cfar_examples() {
        let p = CfarParams::default();
        let h = map(40, 3, vec![2.5; 120]);
        assert!(extract_cfar(&h, &p, &Roi::UNBOUNDED).unwrap().is_empty());

        let mut v = vec![0f32; 120];
        v[17 * 3 + 2] = 4.0;
        let h = map(40, 3, v);
        let f = extract_cfar(&h, &p, &Roi::UNBOUNDED).unwrap();
        assert_eq!(f.len(), 1);
        assert_eq!(f.points[0].r, h.range_center(17));
        assert_eq!(f.points[0].theta, h.azimuth(2));

        let small = map(24, 1, vec![1.0; 24]);
        assert!(matches!(
            extract_cfar(&small, &p, &Roi::UNBOUNDED),
            Err(Error::InvalidParams(_))
        ));
        assert!(extract_cfar(&map(25, 1, vec![1.0; 25]), &p, &Roi::UNBOUNDED).is_ok());
    }

    #[test]
    fn roi_clips_cells() {
        let h = map(10, 4, vec![1.0; 40]);
        let roi = Roi {
            max_range: h.range_center(4),
            max_azimuth: 0.6,
        };
        let f = extract_topk(&h, 1000, &roi);
        // azimuths -1.0, -0.5, 0.0, 0.5 -> three inside
        assert_eq!(f.len(), 5 * 3);
        assert!(f.points.iter().all(|p| roi.contains(p.r, p.theta)));
        assert_eq!(extract_raymax(&h, &roi).len(), 3);
    }
}
