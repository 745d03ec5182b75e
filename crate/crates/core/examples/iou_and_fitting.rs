//! Box IoU, containment and fitting a box to a point set.

use boxvote::geometry::{fit_aabb, iou_aabb};
use boxvote::{Aabb, Vec3};

fn main() -> boxvote::Result<()> {
    let table = Aabb::new(Vec3::new(0.0, 0.0, 0.4), Vec3::new(1.6, 0.9, 0.8), 2)?;
    let chair = Aabb::new(Vec3::new(0.1, 0.0, 0.5), Vec3::new(0.5, 0.5, 1.0), 1)?;
    println!("IoU(table, chair) = {:.4}", iou_aabb(&table, &chair));
    println!("table contains (0,0,0.7): {}", table.contains(Vec3::new(0.0, 0.0, 0.7)));

    let points = [Vec3::new(0.0, 0.0, 0.0), Vec3::new(1.0, 2.0, 0.0), Vec3::new(0.5, 1.0, 0.0)];
    let fitted = fit_aabb(&points, 1)?;
    println!("fitted min {:?} max {:?} (flat extents padded)", fitted.min(), fitted.max());
    Ok(())
}
