//! Voxel downsampling and scattering per-cell values back to points.

use boxvote::oracle::{gen_scene, SceneGenParams};
use boxvote::scene::{voxelize, DEFAULT_CELL_SIZE};

fn main() -> boxvote::Result<()> {
    let (scene, _) = gen_scene(&SceneGenParams { seed: 7, ..Default::default() })?;
    for cell in [DEFAULT_CELL_SIZE, 0.05, 0.1] {
        let map = voxelize(&scene, cell)?;
        println!("cell {cell:>5} m: {} points -> {} voxels", scene.len(), map.len());
    }
    let map = voxelize(&scene, 0.05)?;
    let heights: Vec<f64> = map.representatives().iter().map(|&p| scene.positions[p].z).collect();
    let per_point = map.scatter(&heights);
    let max_err = per_point.iter().zip(&scene.positions).map(|(h, p)| (h - p.z).abs()).fold(0.0, f64::max);
    println!("height error after scatter: {max_err:.4} m");
    Ok(())
}
