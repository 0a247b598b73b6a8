//! Active-learning bundle: prediction, correction and ground truth.

use segstudio::dicom::{generate_phantom, PhantomSpec};
use segstudio::export::{export_active_learning_bundle, read_bundle, ExportRequest};
use segstudio::mask::{BrushMode, BrushShape, BrushStroke};
use segstudio::store::Store;
use segstudio::WorldPoint;

pub fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let store = Store::open(dir.path())?;
    let p = generate_phantom(&PhantomSpec::sphere(16, 5.0, 1000, "1.2.3.6"))?;
    let id = store.put_series(&p.series)?;

    // A poor "prediction": the ground truth with a bite taken out.
    let gt = store.put_segmentation(&id, &p.ground_truth)?;
    let bite = |radius, mode| BrushStroke {
        center: WorldPoint::new(7.5, 7.5, 7.5),
        radius,
        shape: BrushShape::Sphere,
        mode,
    };
    let mut pred = store.get_segmentation(&id, gt)?.derive_edit();
    pred.edit_roi(1, &[bite(3.0, BrushMode::Erase)])?;
    let pred = store.put_segmentation(&id, &pred)?;
    let mut fix = store.get_segmentation(&id, pred)?.derive_edit();
    fix.edit_roi(1, &[bite(2.0, BrushMode::Paint)])?;
    let fixed = store.put_segmentation(&id, &fix)?;

    let (tar, manifest) = export_active_learning_bundle(
        &store,
        &ExportRequest {
            series_id: id,
            pred_version: pred,
            corrected_version: fixed,
            gt_version: Some(gt),
            include_images: true,
        },
    )?;
    println!(
        "dice before {:?}, after {:?}",
        manifest.dice_before, manifest.dice_after
    );
    for (name, bytes) in read_bundle(&tar)? {
        println!("{name:<28} {:>7} bytes", bytes.len());
    }
    Ok(())
}
