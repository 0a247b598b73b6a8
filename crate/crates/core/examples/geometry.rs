//! Voxel index <-> patient coordinates on an oblique grid.

use segstudio::geometry::{Orientation, Spacing};
use segstudio::{VolumeGrid, VoxelIndex, WorldPoint};

pub fn main() -> Result<(), Box<dyn std::error::Error>> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let grid = VolumeGrid::new(
        64,
        64,
        20,
        Spacing::new(0.8, 0.8, 2.5),
        WorldPoint::new(-25.0, -25.0, 100.0),
        Orientation {
            row: [s, s, 0.0],
            col: [-s, s, 0.0],
        },
    )?;
    println!(
        "voxel volume {:.4} mm3, normal {:?}",
        grid.voxel_volume(),
        grid.normal()
    );

    let v = VoxelIndex::new(10, 20, 5);
    let p = grid.voxel_to_world(v)?;
    let back = grid.world_to_voxel(p);
    println!(
        "{v:?} -> ({:.3}, {:.3}, {:.3}) mm -> {back:?}",
        p.x, p.y, p.z
    );
    assert_eq!(grid.nearest_voxel(p)?, v);

    // Outside the volume: no nearest voxel.
    let far = WorldPoint::new(1000.0, 0.0, 0.0);
    println!("far point: {}", grid.nearest_voxel(far).unwrap_err());
    Ok(())
}
