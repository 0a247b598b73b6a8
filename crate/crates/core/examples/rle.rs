//! Run-length encoding of a mask.

use segstudio::mask::{rle_decode, rle_encode};
use segstudio::{VolumeGrid, VoxelIndex, VoxelMask};

pub fn main() -> Result<(), Box<dyn std::error::Error>> {
    let grid = VolumeGrid::identity(4, 3, 2)?;
    let mask = VoxelMask::from_fn(grid.clone(), |v: VoxelIndex| v.k == 1 && v.j >= 1);
    let runs = rle_encode(&mask);
    println!(
        "runs {:?} (total {}, canonical {})",
        runs.0,
        runs.total(),
        runs.is_canonical()
    );
    assert_eq!(rle_decode(&runs, &grid)?, mask);

    let full = VoxelMask::from_fn(grid.clone(), |_| true);
    println!(
        "full mask starts with a zero-length clear run: {:?}",
        rle_encode(&full).0
    );
    Ok(())
}
