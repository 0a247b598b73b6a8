//! Worked examples whose expected values come from independent oracles in
//! this file (enumeration, brute-force counting, plain arithmetic). The
//! oracle output is frozen next to each check.

mod common;

use std::collections::BTreeSet;
use std::sync::Arc;
use std::time::Duration;

use common::{ball_oracle, brute_counts, brute_dice, point_in_polygon};
use segstudio::analysis::{dice, discrepancy_map};
use segstudio::contour::{rasterize_contours, Contour, ContourSet};
use segstudio::dicom::{generate_phantom, PhantomSpec};
use segstudio::export::{export_active_learning_bundle, ExportRequest};
use segstudio::geometry::Spacing;
use segstudio::mask::{apply_brush, mask_stats, BrushMode, BrushShape, BrushStroke, Source};
use segstudio::orchestrator::{
    Executor, JobState, LocalExecutor, ModelManifest, Orchestrator, OrchestratorConfig,
};
use segstudio::store::{PurgeScope, Store};
use segstudio::{Provenance, Roi, SegmentationSet, VolumeGrid, VoxelIndex, VoxelMask, WorldPoint};

fn sphere_stroke(center: WorldPoint, radius: f64) -> BrushStroke {
    BrushStroke {
        center,
        radius,
        shape: BrushShape::Sphere,
        mode: BrushMode::Paint,
    }
}

#[test]
fn unit_sphere_on_isotropic_grid_sets_seven_voxels() {
    let grid = VolumeGrid::identity(5, 5, 5).unwrap();
    let center = WorldPoint::new(2.0, 2.0, 2.0);
    let oracle = ball_oracle(&grid, center, 1.0);
    let expected = oracle.iter().filter(|b| **b).count();
    assert_eq!(expected, 7);
    let painted = apply_brush(&VoxelMask::new(grid.clone()), &sphere_stroke(center, 1.0)).unwrap();
    assert_eq!(painted.to_bits(), oracle);
}

#[test]
fn radius_zero_click_sets_exactly_one_voxel() {
    let grid = VolumeGrid::identity(4, 4, 4).unwrap();
    let painted = apply_brush(
        &VoxelMask::new(grid.clone()),
        &sphere_stroke(WorldPoint::new(1.0, 2.0, 3.0), 0.0),
    )
    .unwrap();
    assert_eq!(painted.count(), 1);
    assert!(painted.get(VoxelIndex::new(1, 2, 3)));
}

#[test]
fn voxel_volume_matches_direct_multiplication() {
    let (r, c, s) = (0.976562_f64, 0.976562_f64, 3.0_f64);
    let oracle = r * c * s;
    assert!((oracle - 2.861020019532).abs() < 1e-12);
    let grid = VolumeGrid::axial(
        [4, 4, 4],
        Spacing::new(r, c, s),
        WorldPoint::new(0.0, 0.0, 0.0),
    )
    .unwrap();
    assert!((grid.voxel_volume() - oracle).abs() < 1e-12);
}

#[test]
fn mask_stats_for_37_voxels() {
    let grid = VolumeGrid::axial(
        [10, 10, 2],
        Spacing::new(0.5, 0.5, 2.0),
        WorldPoint::new(0.0, 0.0, 0.0),
    )
    .unwrap();
    let mut mask = VoxelMask::new(grid);
    for n in 0..37 {
        mask.set_linear(n * 5, true);
    }
    let oracle_volume = 37.0 * 0.5 * 0.5 * 2.0;
    assert_eq!(oracle_volume, 18.5);
    let st = mask_stats(&mask);
    assert_eq!(st.voxel_count, 37);
    assert!((st.volume_mm3 - oracle_volume).abs() < 1e-12);
}

#[test]
fn phantom_sphere_ground_truth_matches_distance_enumeration() {
    let spec = PhantomSpec::sphere(32, 8.0, 1000, "1.2.3.32");
    let p = generate_phantom(&spec).unwrap();
    let c = WorldPoint::new(15.5, 15.5, 15.5);
    let oracle = ball_oracle(&p.series.grid, c, 8.0);
    let gt = &p.ground_truth.rois()[0].mask;
    assert_eq!(gt.to_bits(), oracle);
    // Voxel intensities follow the same footprint.
    for (n, inside) in oracle.iter().enumerate() {
        assert_eq!(p.series.voxels[n], if *inside { 1000 } else { 0 });
    }
}

fn square(z: f64, lo: f64, hi: f64) -> Vec<WorldPoint> {
    vec![
        WorldPoint::new(lo, lo, z),
        WorldPoint::new(hi, lo, z),
        WorldPoint::new(hi, hi, z),
        WorldPoint::new(lo, hi, z),
    ]
}

/// Pixel-center classification of `polys` on slice 0 with the even-odd rule.
fn even_odd_oracle(grid: &VolumeGrid, polys: &[Vec<WorldPoint>]) -> Vec<bool> {
    let mut out = vec![false; grid.slice_len()];
    for j in 0..grid.rows() {
        for i in 0..grid.cols() {
            let crossings = polys
                .iter()
                .filter(|p| {
                    let flat: Vec<(f64, f64)> = p.iter().map(|v| (v.x, v.y)).collect();
                    point_in_polygon(&flat, i as f64, j as f64)
                })
                .count();
            out[j * grid.cols() + i] = crossings % 2 == 1;
        }
    }
    out
}

#[test]
fn square_contour_covers_nine_voxels() {
    let grid = VolumeGrid::identity(5, 5, 1).unwrap();
    let poly = square(0.0, -0.25, 2.25);
    let oracle = even_odd_oracle(&grid, std::slice::from_ref(&poly));
    assert_eq!(oracle.iter().filter(|b| **b).count(), 9);
    let cs = ContourSet::new(
        "s",
        vec![Roi::new(1, "square", [255, 0, 0])],
        vec![Contour {
            roi_number: 1,
            vertices: poly,
        }],
    )
    .unwrap();
    let set = rasterize_contours(&cs, &grid).unwrap();
    assert_eq!(set.rois()[0].mask.slice_bits(0), oracle);
    for j in 0..3 {
        for i in 0..3 {
            assert!(set.rois()[0].mask.get(VoxelIndex::new(i, j, 0)));
        }
    }
}

#[test]
fn nested_squares_of_one_roi_form_a_ring() {
    let grid = VolumeGrid::identity(8, 8, 1).unwrap();
    let outer = square(0.0, -0.5, 6.5);
    let inner = square(0.0, 1.5, 4.5);
    let oracle = even_odd_oracle(&grid, &[outer.clone(), inner.clone()]);
    // 7x7 outer minus 3x3 hole.
    assert_eq!(oracle.iter().filter(|b| **b).count(), 40);
    let cs = ContourSet::new(
        "s",
        vec![Roi::new(1, "ring", [0, 255, 0])],
        vec![
            Contour {
                roi_number: 1,
                vertices: outer,
            },
            Contour {
                roi_number: 1,
                vertices: inner,
            },
        ],
    )
    .unwrap();
    let set = rasterize_contours(&cs, &grid).unwrap();
    let m = &set.rois()[0].mask;
    assert_eq!(m.slice_bits(0), oracle);
    assert!(!m.get(VoxelIndex::new(3, 3, 0)));
}

#[test]
fn dice_of_half_overlap_is_one_half() {
    let grid = VolumeGrid::identity(4, 4, 1).unwrap();
    let a_bits: Vec<bool> = (0..16).map(|n| n < 4).collect();
    let b_bits: Vec<bool> = (0..16).map(|n| (2..6).contains(&n)).collect();
    assert_eq!(brute_counts(&a_bits, &b_bits), (4, 4, 2));
    assert_eq!(brute_dice(&a_bits, &b_bits), 0.5);
    let a = VoxelMask::from_bits(grid.clone(), &a_bits).unwrap();
    let b = VoxelMask::from_bits(grid, &b_bits).unwrap();
    assert_eq!(dice(&a, &b).unwrap().value, 0.5);
    // |A xor B| = 4 + 4 - 2*2.
    assert_eq!(discrepancy_map(&a, &b).unwrap().count(), 4);
}

fn phantom_store() -> (tempfile::TempDir, Store, segstudio::dicom::Phantom, String) {
    let dir = tempfile::tempdir().unwrap();
    let store = Store::open(dir.path()).unwrap();
    let p = generate_phantom(&PhantomSpec::sphere(16, 5.0, 1000, "1.2.3.16")).unwrap();
    let id = store.put_series(&p.series).unwrap();
    (dir, store, p, id)
}

fn manual_set(series: &str, grid: &VolumeGrid, name: &str, mask: VoxelMask) -> SegmentationSet {
    let mut set = SegmentationSet::new(series, grid.clone(), Provenance::now(Source::Manual));
    set.add_roi(Roi::new(1, name, [255, 0, 0]), mask).unwrap();
    set
}

#[test]
fn stored_series_reads_back_byte_identical() {
    let (_dir, store, p, id) = phantom_store();
    let back = store.get_series(&id).unwrap();
    assert_eq!(back.voxels, p.series.voxels);
    assert_eq!(back.grid, p.series.grid);
}

#[test]
fn concurrent_puts_get_versions_two_and_three() {
    let (_dir, store, p, id) = phantom_store();
    assert_eq!(store.put_segmentation(&id, &p.ground_truth).unwrap(), 1);
    let mut handles = Vec::new();
    for radius in [3.0, 4.0] {
        let store = store.clone();
        let id = id.clone();
        let grid = p.series.grid.clone();
        handles.push(std::thread::spawn(move || {
            let mask = apply_brush(
                &VoxelMask::new(grid.clone()),
                &sphere_stroke(WorldPoint::new(7.5, 7.5, 7.5), radius),
            )
            .unwrap();
            let set = manual_set(&id, &grid, "sphere", mask.clone());
            (store.put_segmentation(&id, &set).unwrap(), mask)
        }));
    }
    let results: Vec<_> = handles.into_iter().map(|h| h.join().unwrap()).collect();
    let versions: BTreeSet<u64> = results.iter().map(|(v, _)| *v).collect();
    assert_eq!(versions, BTreeSet::from([2, 3]));
    let reopened = Store::open(store.root()).unwrap();
    for (v, mask) in results {
        assert_eq!(
            &reopened.get_segmentation(&id, v).unwrap().rois()[0].mask,
            &mask
        );
    }
}

#[test]
fn purge_receipt_lists_the_pre_purge_index() {
    let (_dir, store, p, id) = phantom_store();
    store.put_segmentation(&id, &p.ground_truth).unwrap();
    store
        .put_segmentation(&id, &store.get_segmentation(&id, 1).unwrap().derive_edit())
        .unwrap();
    let (report, _) = segstudio::analysis::evaluate(
        &store.get_segmentation(&id, 1).unwrap(),
        &store.get_segmentation(&id, 2).unwrap(),
    )
    .unwrap();
    store.put_report(&report).unwrap();

    let mut oracle: BTreeSet<String> = BTreeSet::from([store.series_summary(&id).unwrap().blob]);
    oracle.extend(
        store
            .list_versions(&id)
            .unwrap()
            .into_iter()
            .map(|v| v.blob),
    );
    oracle.extend(store.list_reports(&id).unwrap().into_iter().map(|r| r.blob));

    let receipt = store.purge_series(&id, PurgeScope::Everything).unwrap();
    let got: BTreeSet<String> = receipt.removed_blobs.iter().cloned().collect();
    assert_eq!(got, oracle);
    for b in &oracle {
        assert!(!store.root().join("blobs").join(b).exists());
    }
    assert!(store.get_series(&id).is_err());
}

#[test]
fn export_scores_match_brute_force_dice() {
    let (_dir, store, p, id) = phantom_store();
    let grid = p.series.grid.clone();
    let c = WorldPoint::new(7.5, 7.5, 7.5);
    let pred_mask = apply_brush(&VoxelMask::new(grid.clone()), &sphere_stroke(c, 3.0)).unwrap();
    let pred = manual_set(&id, &grid, "sphere", pred_mask.clone());
    assert_eq!(store.put_segmentation(&id, &pred).unwrap(), 1);
    let mut corrected = store.get_segmentation(&id, 1).unwrap().derive_edit();
    corrected.edit_roi(1, &[sphere_stroke(c, 4.5)]).unwrap();
    let corrected_mask = corrected.rois()[0].mask.clone();
    assert_eq!(store.put_segmentation(&id, &corrected).unwrap(), 2);
    assert_eq!(store.put_segmentation(&id, &p.ground_truth).unwrap(), 3);

    let gt_bits = p.ground_truth.rois()[0].mask.to_bits();
    let before = brute_dice(&pred_mask.to_bits(), &gt_bits);
    let after = brute_dice(&corrected_mask.to_bits(), &gt_bits);
    assert!(after > before);

    let (_, manifest) = export_active_learning_bundle(
        &store,
        &ExportRequest {
            series_id: id.clone(),
            pred_version: 1,
            corrected_version: 2,
            gt_version: Some(3),
            include_images: false,
        },
    )
    .unwrap();
    assert_eq!(manifest.reference, "gt");
    assert!((manifest.dice_before.unwrap() - before).abs() < 1e-12);
    assert!((manifest.dice_after.unwrap() - after).abs() < 1e-12);
}

#[test]
fn job_transition_timestamps_strictly_increase() {
    let (dir, store, p, id) = phantom_store();
    let ex: Arc<dyn Executor> = Arc::new(LocalExecutor::new("local-0", dir.path().join("ws")));
    let orch = Orchestrator::start(store.clone(), vec![ex], OrchestratorConfig::default()).unwrap();
    let m = orch
        .register_model(ModelManifest::threshold("thr", "1", "sphere", 500.0))
        .unwrap();
    let job = orch.submit_job(&m.model_id, &id, None).unwrap();
    let done = orch.wait_for(&job.job_id, Duration::from_secs(30)).unwrap();
    assert_eq!(done.state, JobState::Completed);
    let states: Vec<JobState> = done.history.iter().map(|t| t.state).collect();
    assert_eq!(
        states,
        [
            JobState::Queued,
            JobState::Provisioning,
            JobState::Running,
            JobState::Postprocessing,
            JobState::Completed
        ]
    );
    for w in done.history.windows(2) {
        assert!(w[0].at < w[1].at, "{:?} !< {:?}", w[0].at, w[1].at);
    }
    let stored = store
        .get_segmentation(&id, done.version().unwrap())
        .unwrap();
    assert_eq!(
        dice(&stored.rois()[0].mask, &p.ground_truth.rois()[0].mask)
            .unwrap()
            .value,
        1.0
    );
}
