use proptest::prelude::*;

use radar_ego::ingest::Heatmap;
use radar_ego::preprocess::{
    collapse_elevation, extract_cfar, extract_raymax, extract_topk, CfarParams, FeatureSet, Roi,
};

fn heatmap() -> impl Strategy<Value = Heatmap> {
    (20usize..40, 2usize..12, 1usize..4).prop_flat_map(|(nr, na, ne)| {
        prop::collection::vec(prop_oneof![Just(0.0f32), 0.0f32..10.0], nr * na * ne).prop_map(
            move |values| {
                let az = (0..na)
                    .map(|i| (-1.3 + 2.6 * i as f64 / (na - 1) as f64) as f32)
                    .collect();
                Heatmap::new(nr, na, ne, 0.06, az, values, 0.0).unwrap()
            },
        )
    })
}

fn roi() -> impl Strategy<Value = Roi> {
    (0.2..3.0f64, 0.1..1.4f64).prop_map(|(max_range, max_azimuth)| Roi {
        max_range,
        max_azimuth,
    })
}

fn cfar() -> impl Strategy<Value = CfarParams> {
    (1usize..5, 0usize..3, 1.0..4.0f64).prop_map(|(train_cells, guard_cells, threshold_factor)| {
        CfarParams {
            train_cells,
            guard_cells,
            threshold_factor,
        }
    })
}

fn scaled(h: &Heatmap, c: f32) -> Heatmap {
    Heatmap {
        intensity: h.intensity.iter().map(|v| v * c).collect(),
        ..h.clone()
    }
}

fn cells(f: &FeatureSet) -> Vec<(u64, u64)> {
    f.points.iter().map(|p| (p.r.to_bits(), p.theta.to_bits())).collect()
}

fn roi_cells(h: &Heatmap, roi: &Roi) -> (usize, usize) {
    let rows = (0..h.n_range).filter(|&i| h.range_center(i) <= roi.max_range).count();
    let cols = (0..h.n_azimuth).filter(|&i| h.azimuth(i).abs() <= roi.max_azimuth).count();
    (rows, cols)
}

proptest! {
    #[test]
    fn selection_is_scale_invariant(h in heatmap(), r in roi(), p in cfar(), k in 1usize..60, e in -8i32..8) {
        // powers of two scale every value and sum exactly
        let c = 2f32.powi(e);
        let hs = scaled(&h, c);
        let (a, b) = (extract_topk(&h, k, &r), extract_topk(&hs, k, &r));
        prop_assert_eq!(cells(&a), cells(&b));
        for (pa, pb) in a.points.iter().zip(&b.points) {
            prop_assert_eq!(pa.intensity * c as f64, pb.intensity);
        }
        prop_assert_eq!(cells(&extract_raymax(&h, &r)), cells(&extract_raymax(&hs, &r)));
        prop_assert_eq!(
            cells(&extract_cfar(&h, &p, &r).unwrap()),
            cells(&extract_cfar(&hs, &p, &r).unwrap())
        );
    }

    #[test]
    fn counts_and_roi(h in heatmap(), r in roi(), p in cfar(), k in 1usize..60) {
        let (rows, cols) = roi_cells(&h, &r);
        let top = extract_topk(&h, k, &r);
        prop_assert_eq!(top.len(), k.min(rows * cols));
        let ray = extract_raymax(&h, &r);
        prop_assert_eq!(ray.len(), if rows > 0 { cols } else { 0 });
        let det = extract_cfar(&h, &p, &r).unwrap();
        for f in [&top, &ray, &det] {
            for q in &f.points {
                prop_assert!(r.contains(q.r, q.theta));
                prop_assert!(q.intensity >= 0.0 && q.intensity.is_finite());
            }
        }
    }

    #[test]
    fn unbounded_raymax_has_one_point_per_ray(h in heatmap()) {
        prop_assert_eq!(extract_raymax(&h, &Roi::UNBOUNDED).len(), h.n_azimuth);
    }

    #[test]
    fn collapse_matches_direct_scan(h in heatmap()) {
        let c = collapse_elevation(&h);
        prop_assert_eq!(c.n_elevation, 1);
        for ir in 0..h.n_range {
            for ia in 0..h.n_azimuth {
                let mut m = 0f32;
                for ie in 0..h.n_elevation {
                    m = m.max(h.at(ir, ia, ie));
                }
                prop_assert_eq!(c.at(ir, ia, 0), m);
            }
        }
    }
}

#[test]
fn raymax_has_128_points_on_a_128_ray_map() {
    let az: Vec<f32> = (0..128).map(|i| -1.3 + 2.6 * i as f32 / 127.0).collect();
    let values = (0..64 * 128).map(|i| (i % 17) as f32).collect();
    let h = Heatmap::new(64, 128, 1, 0.06, az, values, 0.0).unwrap();
    assert_eq!(extract_raymax(&h, &Roi::UNBOUNDED).len(), 128);
}
