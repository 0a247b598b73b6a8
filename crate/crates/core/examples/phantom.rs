//! Synthetic DICOM phantom: files, ground truth, and parsing them back.

use segstudio::dicom::{generate_phantom, parse_series, PhantomShape, PhantomSpec};
use segstudio::geometry::Spacing;
use segstudio::{VolumeGrid, WorldPoint};

pub fn main() -> Result<(), Box<dyn std::error::Error>> {
    let grid = VolumeGrid::axial(
        [32, 32, 12],
        Spacing::new(0.7, 0.7, 2.5),
        WorldPoint::new(-11.0, -11.0, 40.0),
    )?;
    let spec = PhantomSpec::new(grid, -1000, "1.2.826.0.1.3680043.9.1")
        .with_shape(PhantomShape::Sphere {
            center: WorldPoint::new(0.0, 0.0, 53.0),
            radius: 6.0,
            intensity: 60,
            roi_name: "liver".into(),
        })
        .with_shape(PhantomShape::Box {
            corner: WorldPoint::new(-9.0, -9.0, 45.0),
            size: [4.0, 4.0, 5.0],
            intensity: 400,
            roi_name: "bone".into(),
        });
    let phantom = generate_phantom(&spec)?;
    println!(
        "{} files, {} bytes",
        phantom.files.len(),
        phantom.files.iter().map(Vec::len).sum::<usize>()
    );
    for r in phantom.ground_truth.rois() {
        println!("ground truth {}: {} voxels", r.roi.name, r.mask.count());
    }
    let parsed = parse_series(&phantom.files)?;
    assert_eq!(parsed.voxels, phantom.series.voxels);
    assert_eq!(parsed.grid, phantom.series.grid);
    println!(
        "parsed back: series {} patient {}",
        parsed.series_id, parsed.patient_pseudonym
    );
    Ok(())
}
