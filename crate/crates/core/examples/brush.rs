//! Painting and erasing with sphere and disk brushes.

use segstudio::mask::{apply_strokes, BrushMode, BrushShape, BrushStroke};
use segstudio::{VolumeGrid, VoxelMask, WorldPoint};

pub fn main() -> Result<(), Box<dyn std::error::Error>> {
    let grid = VolumeGrid::identity(16, 16, 16)?;
    let c = WorldPoint::new(8.0, 8.0, 8.0);
    let stroke = |radius, shape, mode| BrushStroke {
        center: c,
        radius,
        shape,
        mode,
    };

    let click = apply_strokes(
        &VoxelMask::new(grid.clone()),
        &[stroke(0.0, BrushShape::Sphere, BrushMode::Paint)],
    )?;
    let unit = apply_strokes(
        &VoxelMask::new(grid.clone()),
        &[stroke(1.0, BrushShape::Sphere, BrushMode::Paint)],
    )?;
    println!(
        "radius 0: {} voxel, radius 1: {} voxels",
        click.count(),
        unit.count()
    );

    let ball = apply_strokes(
        &VoxelMask::new(grid.clone()),
        &[
            stroke(5.0, BrushShape::Sphere, BrushMode::Paint),
            stroke(2.0, BrushShape::Disk { slice: 8 }, BrushMode::Erase),
        ],
    )?;
    let st = ball.stats();
    println!(
        "ball with a disk hole on slice 8: {} voxels, {} mm3",
        st.voxel_count, st.volume_mm3
    );
    Ok(())
}
