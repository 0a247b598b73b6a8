//! Contours to voxel masks with the even-odd rule.

use segstudio::contour::{parse_structure_set, rasterize_contours};
use segstudio::VolumeGrid;

const DOC: &str = r#"{
  "format": "segstudio.structure-set/1",
  "series_ref": "demo",
  "rois": [{"number": 1, "name": "ring"}, {"number": 2, "name": "square"}],
  "contours": [
    {"roi_number": 1, "points": [[-0.5,-0.5,2],[6.5,-0.5,2],[6.5,6.5,2],[-0.5,6.5,2]]},
    {"roi_number": 1, "points": [[1.5,1.5,2],[4.5,1.5,2],[4.5,4.5,2],[1.5,4.5,2]]},
    {"roi_number": 2, "points": [[-0.25,-0.25,0],[2.25,-0.25,0],[2.25,2.25,0],[-0.25,2.25,0]]}
  ]
}"#;

pub fn main() -> Result<(), Box<dyn std::error::Error>> {
    let grid = VolumeGrid::identity(8, 8, 3)?;
    let contours = parse_structure_set(DOC.as_bytes())?;
    let set = rasterize_contours(&contours, &grid)?;
    for r in set.rois() {
        println!(
            "{} ({}): {} voxels",
            r.roi.name,
            r.roi.number,
            r.mask.count()
        );
    }
    let ring = &set.roi_by_name("ring").unwrap().mask;
    for j in 0..8 {
        let row: String = (0..8)
            .map(|i| {
                if ring.slice_bits(2)[j * 8 + i] {
                    '#'
                } else {
                    '.'
                }
            })
            .collect();
        println!("{row}");
    }
    Ok(())
}
