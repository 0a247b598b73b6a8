mod common;

use common::*;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;
use segstudio::analysis::{dice, discrepancy_map};
use segstudio::contour::{rasterize_contours, Contour, ContourSet};
use segstudio::dicom::{generate_phantom, parse_series, PhantomShape, PhantomSpec};
use segstudio::exchange::{decode_segmentation, encode_segmentation};
use segstudio::geometry::Spacing;
use segstudio::mask::{
    apply_brush, mask_stats, rle_decode, rle_encode, BrushMode, BrushShape, BrushStroke, Source,
};
use segstudio::{
    ContinuousIndex, Provenance, Roi, SegmentationSet, VolumeGrid, VoxelIndex, VoxelMask,
    WorldPoint,
};

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig {
        cases,
        ..ProptestConfig::default()
    }
}

fn random_stroke(rng: &mut impl Rng, grid: &VolumeGrid) -> BrushStroke {
    let c = ContinuousIndex {
        i: rng.random_range(-1.5..grid.cols() as f64 + 0.5),
        j: rng.random_range(-1.5..grid.rows() as f64 + 0.5),
        k: rng.random_range(-1.5..grid.slices() as f64 + 0.5),
    };
    BrushStroke {
        center: grid.index_to_world(c),
        radius: rng.random_range(0.0..6.0),
        shape: if rng.random_bool(0.5) {
            BrushShape::Sphere
        } else {
            BrushShape::Disk {
                slice: rng.random_range(0..grid.slices()),
            }
        },
        mode: if rng.random_bool(0.5) {
            BrushMode::Paint
        } else {
            BrushMode::Erase
        },
    }
}

proptest! {
    #![proptest_config(config(64))]

    #[test]
    fn world_voxel_roundtrip_for_any_valid_grid(seed in any::<u64>()) {
        let mut r = rng(seed);
        let o = random_orientation(&mut r);
        let d = random_dims(&mut r, 6);
        let grid = VolumeGrid::new(
            d[0], d[1], d[2],
            Spacing::new(r.random_range(0.1..5.0), r.random_range(0.1..5.0), r.random_range(0.1..5.0)),
            WorldPoint::new(r.random_range(-500.0..500.0), r.random_range(-500.0..500.0), r.random_range(-500.0..500.0)),
            o,
        ).unwrap();
        for n in 0..grid.voxel_count() {
            let v = grid.index_of(n);
            let c = grid.world_to_voxel(grid.voxel_to_world(v).unwrap());
            prop_assert!((c.i - v.i as f64).abs() <= 1e-6);
            prop_assert!((c.j - v.j as f64).abs() <= 1e-6);
            prop_assert!((c.k - v.k as f64).abs() <= 1e-6);
            prop_assert_eq!(grid.nearest_voxel(grid.voxel_to_world(v).unwrap()).unwrap(), v);
        }
        // Continuous points too, including off-grid ones.
        for _ in 0..20 {
            let c = ContinuousIndex { i: r.random_range(-3.0..9.0), j: r.random_range(-3.0..9.0), k: r.random_range(-3.0..9.0) };
            let back = grid.world_to_voxel(grid.index_to_world(c));
            prop_assert!((back.i - c.i).abs() <= 1e-6 && (back.j - c.j).abs() <= 1e-6 && (back.k - c.k).abs() <= 1e-6);
        }
    }

    #[test]
    fn voxel_to_world_is_injective(seed in any::<u64>()) {
        let mut r = rng(seed);
        let o = random_orientation(&mut r);
        let d = random_dims(&mut r, 4);
        let s = Spacing::new(r.random_range(0.1..5.0), r.random_range(0.1..5.0), r.random_range(0.1..5.0));
        let grid = VolumeGrid::new(d[0], d[1], d[2], s, WorldPoint::new(1.0, 2.0, 3.0), o).unwrap();
        let min_pitch = s.row.min(s.col).min(s.slice);
        let pts: Vec<WorldPoint> = (0..grid.voxel_count()).map(|n| grid.voxel_to_world(grid.index_of(n)).unwrap()).collect();
        for a in 0..pts.len() {
            for b in a + 1..pts.len() {
                prop_assert!(pts[a].distance(&pts[b]) >= min_pitch * (1.0 - 1e-9));
            }
        }
    }

    #[test]
    fn rle_roundtrip_is_identity_and_canonical(seed in any::<u64>()) {
        let mut r = rng(seed);
        let grid = random_grid(&mut r, 16);
        let m = random_mask(&mut r, &grid);
        let runs = rle_encode(&m);
        prop_assert!(runs.is_canonical());
        prop_assert_eq!(runs.total(), grid.voxel_count() as u64);
        prop_assert_eq!(rle_decode(&runs, &grid).unwrap(), m);
    }

    #[test]
    fn brush_paint_and_erase_are_idempotent_and_monotone(seed in any::<u64>()) {
        let mut r = rng(seed);
        let grid = random_grid(&mut r, 10);
        let m = random_mask(&mut r, &grid);
        let stroke = random_stroke(&mut r, &grid);
        let once = apply_brush(&m, &stroke).unwrap();
        let twice = apply_brush(&once, &stroke).unwrap();
        prop_assert_eq!(&once, &twice);
        let u = once.union(&m).unwrap();
        let i = once.intersection(&m).unwrap();
        match stroke.mode {
            BrushMode::Paint => prop_assert_eq!(&u, &once),
            BrushMode::Erase => prop_assert_eq!(&i, &once),
        }
    }

    #[test]
    fn brush_footprint_matches_distance_enumeration(seed in any::<u64>()) {
        let mut r = rng(seed);
        let grid = random_grid(&mut r, 10);
        let mut stroke = random_stroke(&mut r, &grid);
        stroke.shape = BrushShape::Sphere;
        stroke.mode = BrushMode::Paint;
        let painted = apply_brush(&VoxelMask::new(grid.clone()), &stroke).unwrap();
        let oracle = ball_oracle(&grid, stroke.center, stroke.radius);
        prop_assert_eq!(painted.to_bits(), oracle);
    }

    #[test]
    fn stats_volume_is_linear_in_count(seed in any::<u64>()) {
        let mut r = rng(seed);
        let grid = random_grid(&mut r, 12);
        let m = random_mask(&mut r, &grid);
        let s = mask_stats(&m);
        prop_assert_eq!(s.voxel_count, m.to_bits().iter().filter(|b| **b).count());
        prop_assert!((s.volume_mm3 - s.voxel_count as f64 * grid.voxel_volume()).abs() <= 1e-9 * s.volume_mm3.max(1.0));
    }

    #[test]
    fn dice_and_xor_algebra(seed in any::<u64>()) {
        let mut r = rng(seed);
        let grid = random_grid(&mut r, 12);
        let a = random_mask(&mut r, &grid);
        let b = random_mask(&mut r, &grid);
        let empty = VoxelMask::new(grid.clone());
        prop_assert_eq!(dice(&a, &b).unwrap(), dice(&b, &a).unwrap());
        if a.count() > 0 {
            prop_assert_eq!(dice(&a, &a).unwrap().value, 1.0);
            prop_assert_eq!(dice(&a, &empty).unwrap().value, 0.0);
        }
        let d = dice(&a, &b).unwrap().value;
        prop_assert!((0.0..=1.0).contains(&d));
        prop_assert_eq!(discrepancy_map(&a, &b).unwrap(), discrepancy_map(&b, &a).unwrap());
        prop_assert_eq!(discrepancy_map(&a, &a).unwrap().count(), 0);
        prop_assert_eq!(discrepancy_map(&discrepancy_map(&a, &b).unwrap(), &b).unwrap(), a);
    }

    #[test]
    fn exchange_roundtrip_is_bit_exact(seed in any::<u64>()) {
        let mut r = rng(seed);
        let grid = random_grid(&mut r, 12);
        let mut set = SegmentationSet::new("1.2.840.1", grid.clone(), Provenance::now(Source::Manual));
        set.version = r.random_range(1..100);
        for n in 1..=r.random_range(0..4u32) {
            set.add_roi(Roi::new(n * 3, format!("roi{n}"), [n as u8, 2, 3]), random_mask(&mut r, &grid)).unwrap();
        }
        let back = decode_segmentation(&encode_segmentation(&set)).unwrap();
        prop_assert_eq!(back, set);
    }
}

fn polygon_set(grid: &VolumeGrid, k: usize, polys: &[Vec<(f64, f64)>]) -> ContourSet {
    let z = grid.voxel_to_world(VoxelIndex::new(0, 0, k)).unwrap().z;
    ContourSet::new(
        "s",
        vec![Roi::new(1, "r", [1, 2, 3])],
        polys
            .iter()
            .map(|p| Contour {
                roi_number: 1,
                vertices: p.iter().map(|&(x, y)| WorldPoint::new(x, y, z)).collect(),
            })
            .collect(),
    )
    .unwrap()
}

proptest! {
    #![proptest_config(config(48))]

    #[test]
    fn rasterization_ignores_vertex_order(seed in any::<u64>()) {
        let mut r = rng(seed);
        let grid = VolumeGrid::axial([24, 24, 2], Spacing::new(0.8, 1.1, 2.0), WorldPoint::new(-3.0, 4.0, 0.0)).unwrap();
        let poly = random_simple_polygon(&mut r, -3.0, 20.0);
        let mut rev = poly.clone();
        rev.reverse();
        let a = rasterize_contours(&polygon_set(&grid, 1, &[poly]), &grid).unwrap();
        let b = rasterize_contours(&polygon_set(&grid, 1, &[rev]), &grid).unwrap();
        prop_assert_eq!(&a.rois()[0].mask, &b.rois()[0].mask);
    }

    #[test]
    fn translating_by_one_pitch_shifts_the_mask(seed in any::<u64>()) {
        let mut r = rng(seed);
        let s = Spacing::new(r.random_range(0.5..1.5), r.random_range(0.5..1.5), 1.0);
        let grid = VolumeGrid::axial([32, 32, 1], s, WorldPoint::new(0.0, 0.0, 0.0)).unwrap();
        // Keep the polygon well inside so the shifted copy stays on the grid.
        let lo = 2.0 * s.col.max(s.row);
        let hi = 28.0 * s.col.min(s.row);
        let poly = random_simple_polygon(&mut r, lo, hi);
        let (di, dj) = (r.random_range(-1i64..=1), r.random_range(-1i64..=1));
        let moved: Vec<(f64, f64)> = poly.iter().map(|&(x, y)| (x + di as f64 * s.col, y + dj as f64 * s.row)).collect();
        let a = rasterize_contours(&polygon_set(&grid, 0, &[poly]), &grid).unwrap();
        let b = rasterize_contours(&polygon_set(&grid, 0, &[moved]), &grid).unwrap();
        let (a, b) = (&a.rois()[0].mask, &b.rois()[0].mask);
        prop_assert_eq!(a.count(), b.count());
        for n in a.iter_set() {
            let v = grid.index_of(n);
            let w = VoxelIndex::new((v.i as i64 + di) as usize, (v.j as i64 + dj) as usize, v.k);
            prop_assert!(b.get(w));
        }
    }
}

fn random_phantom_spec(r: &mut impl Rng, uid: &str) -> PhantomSpec {
    let d = random_dims(r, 10);
    let grid = VolumeGrid::axial(
        [d[0].max(2), d[1].max(2), d[2].max(2)],
        Spacing::new(
            r.random_range(0.5..2.0),
            r.random_range(0.5..2.0),
            r.random_range(0.5..3.0),
        ),
        WorldPoint::new(
            r.random_range(-50.0..50.0),
            r.random_range(-50.0..50.0),
            r.random_range(-50.0..50.0),
        ),
    )
    .unwrap();
    let mut spec = PhantomSpec::new(grid.clone(), r.random_range(-1000..0), uid);
    let sp = grid.spacing();
    let pitch = [sp.col, sp.row, sp.slice];
    let dims = grid.dims();
    for n in 0..r.random_range(0..4) {
        let ci: [f64; 3] = std::array::from_fn(|a| r.random_range(0.0..(dims[a] - 1) as f64));
        let c = grid.index_to_world(ContinuousIndex {
            i: ci[0],
            j: ci[1],
            k: ci[2],
        });
        // Room (mm) from the centre to the grid extent on each side.
        let below: [f64; 3] = std::array::from_fn(|a| (ci[a] + 0.5) * pitch[a]);
        let above: [f64; 3] = std::array::from_fn(|a| (dims[a] as f64 - 0.5 - ci[a]) * pitch[a]);
        let shape = if r.random_bool(0.5) {
            let room = below
                .iter()
                .chain(&above)
                .fold(f64::INFINITY, |m, v| m.min(*v));
            PhantomShape::Sphere {
                center: c,
                radius: r.random_range(0.0..room * 0.99),
                intensity: r.random_range(1..3000),
                roi_name: format!("s{n}"),
            }
        } else {
            let size = std::array::from_fn(|a| r.random_range(0.0..above[a] * 0.99));
            PhantomShape::Box {
                corner: c,
                size,
                intensity: r.random_range(1..3000),
                roi_name: format!("b{n}"),
            }
        };
        spec = spec.with_shape(shape);
    }
    spec
}

proptest! {
    #![proptest_config(config(24))]

    #[test]
    fn phantom_files_parse_back_bit_exactly_in_any_order(seed in any::<u64>()) {
        let mut r = rng(seed);
        let spec = random_phantom_spec(&mut r, "1.2.826.0.1");
        let p = generate_phantom(&spec).unwrap();
        let parsed = parse_series(&p.files).unwrap();
        prop_assert_eq!(&parsed, &p.series);
        let mut shuffled = p.files.clone();
        shuffled.shuffle(&mut r);
        prop_assert_eq!(parse_series(&shuffled).unwrap(), parsed);
        // Each ground-truth voxel carries its shape's intensity.
        for roi in p.ground_truth.rois() {
            let shape = spec.shapes.iter().rev().find(|s| s.roi_name() == roi.roi.name).unwrap();
            for n in roi.mask.iter_set() {
                prop_assert_eq!(p.series.voxels[n], shape.intensity());
            }
        }
    }
}
