//! Per-ROI DICE and the XOR discrepancy map between two segmentations.

use segstudio::analysis::evaluate;
use segstudio::mask::{apply_brush, BrushMode, BrushShape, BrushStroke, Source};
use segstudio::{Provenance, Roi, SegmentationSet, VolumeGrid, VoxelMask, WorldPoint};

fn ball(grid: &VolumeGrid, c: f64, r: f64) -> VoxelMask {
    let stroke = BrushStroke {
        center: WorldPoint::new(c, c, c),
        radius: r,
        shape: BrushShape::Sphere,
        mode: BrushMode::Paint,
    };
    apply_brush(&VoxelMask::new(grid.clone()), &stroke).unwrap()
}

pub fn main() -> Result<(), Box<dyn std::error::Error>> {
    let grid = VolumeGrid::identity(24, 24, 24)?;
    let mut gt = SegmentationSet::new("demo", grid.clone(), Provenance::now(Source::Manual));
    gt.add_roi(Roi::new(1, "liver", [200, 80, 60]), ball(&grid, 12.0, 7.0))?;
    gt.add_roi(Roi::new(2, "spleen", [60, 80, 200]), ball(&grid, 4.0, 2.0))?;
    let mut pred = SegmentationSet::new("demo", grid.clone(), Provenance::now(Source::Manual));
    pred.add_roi(Roi::new(1, "liver", [200, 80, 60]), ball(&grid, 11.0, 6.0))?;

    let (report, discrepancy) = evaluate(&pred, &gt)?;
    for e in &report.entries {
        println!(
            "{:<8} dice {:.4}  pred {:>5}  gt {:>5}  xor {:>5}  matched {}",
            e.roi_name, e.dice, e.pred_voxels, e.gt_voxels, e.discrepancy_voxels, e.matched
        );
    }
    println!("mean over matched ROIs: {:?}", report.mean_dice);
    println!(
        "discrepancy set provenance: {:?}",
        discrepancy.provenance.source
    );
    Ok(())
}
