use rayon::prelude::*;

use super::tps::TpsTransform;
use crate::volume::{Grid, OutsidePolicy, Volume};
use crate::Result;

/// Pull-back warp: every output voxel center `x` takes the intensity of
/// `original` at `transform(x)`.
///
/// `transform` therefore maps output (new-shape) space into the original's
/// space, i.e. it is fitted with source = new correspondences and target =
/// the original's correspondences.
pub fn warp_volume(
    original: &Volume,
    transform: &TpsTransform,
    output: Grid,
    outside: OutsidePolicy,
) -> Result<Volume> {
    let [nx, ny, _] = output.dims;
    let slab = nx * ny;
    let mut data = vec![0.0f32; output.voxel_count()];
    data.par_chunks_mut(slab).enumerate().for_each(|(k, plane)| {
        for j in 0..ny {
            for i in 0..nx {
                let p = transform.apply(output.voxel_center(i, j, k));
                plane[i + nx * j] = original.sample_trilinear(p, outside) as f32;
            }
        }
    });
    Volume::new(output, data)
}
