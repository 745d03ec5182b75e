//! Regular-grid discretization. Each occupied cell is represented by the
//! scene point closest to the cell center (ties to the lower point index),
//! and every point remembers its cell so per-cell values can be spread back.

use std::collections::HashMap;

use super::SceneCloud;
use crate::error::{Error, Result};
use crate::geometry::Vec3;

/// 2 cm grid.
pub const DEFAULT_CELL_SIZE: f64 = 0.02;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VoxelCell {
    pub index: [i64; 3],
    pub representative: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VoxelMap {
    pub cell_size: f64,
    /// In order of first occupancy by point index.
    pub cells: Vec<VoxelCell>,
    /// Cell slot for each original point.
    pub point_cell: Vec<usize>,
}

impl VoxelMap {
    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn cell_center(&self, cell: &VoxelCell) -> Vec3 {
        let [i, j, k] = cell.index;
        Vec3::new(i as f64 + 0.5, j as f64 + 0.5, k as f64 + 0.5) * self.cell_size
    }

    pub fn representatives(&self) -> Vec<usize> {
        self.cells.iter().map(|c| c.representative).collect()
    }

    /// Picks the representative's value for every cell.
    pub fn gather<T: Clone>(&self, per_point: &[T]) -> Vec<T> {
        self.cells
            .iter()
            .map(|c| per_point[c.representative].clone())
            .collect()
    }

    /// Spreads per-cell values back to all original points.
    pub fn scatter<T: Clone>(&self, per_cell: &[T]) -> Vec<T> {
        assert_eq!(per_cell.len(), self.cells.len(), "one value per cell");
        self.point_cell.iter().map(|&c| per_cell[c].clone()).collect()
    }
}

pub(crate) fn cell_index(p: Vec3, cell_size: f64) -> [i64; 3] {
    [
        (p.x / cell_size).floor() as i64,
        (p.y / cell_size).floor() as i64,
        (p.z / cell_size).floor() as i64,
    ]
}

pub fn voxelize(scene: &SceneCloud, cell_size: f64) -> Result<VoxelMap> {
    voxelize_points(&scene.positions, cell_size)
}

pub(crate) fn voxelize_points(positions: &[Vec3], cell_size: f64) -> Result<VoxelMap> {
    if !(cell_size > 0.0 && cell_size.is_finite()) {
        return Err(Error::InvalidParam(format!(
            "cell size must be positive, got {cell_size}"
        )));
    }
    let mut map = VoxelMap {
        cell_size,
        cells: Vec::new(),
        point_cell: Vec::with_capacity(positions.len()),
    };
    let mut slots: HashMap<[i64; 3], usize> = HashMap::new();
    let mut best_dist: Vec<f64> = Vec::new();
    for (i, &p) in positions.iter().enumerate() {
        let index = cell_index(p, cell_size);
        let slot = *slots.entry(index).or_insert_with(|| {
            map.cells.push(VoxelCell {
                index,
                representative: i,
            });
            best_dist.push(f64::INFINITY);
            map.cells.len() - 1
        });
        map.point_cell.push(slot);
        let d = p.distance_squared(map.cell_center(&map.cells[slot]));
        // strict: an equally close later point never replaces an earlier one
        if d < best_dist[slot] {
            best_dist[slot] = d;
            map.cells[slot].representative = i;
        }
    }
    Ok(map)
}
