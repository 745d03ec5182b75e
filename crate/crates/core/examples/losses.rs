//! Training losses on weak-label targets, with a perfect and a perturbed
//! prediction.

use boxvote::losses::{loss_breakdown, perfect_prediction};
use boxvote::oracle::{gen_scene, SceneGenParams};
use boxvote::weaklabel::{associate, make_targets, AssociationStrategy};
use boxvote::Vec3;

fn main() -> boxvote::Result<()> {
    let (scene, boxes) = gen_scene(&SceneGenParams {
        num_objects: 4,
        points_per_object: 500,
        background_points: 1000,
        seed: 3,
        ..Default::default()
    })?;
    let assoc = associate(&scene, &boxes, AssociationStrategy::SmallestBox);
    let targets = make_targets(&assoc, &scene, &boxes);
    let mut pred = perfect_prediction(&targets, &assoc, scene.num_classes());
    println!("perfect:   {:?}", loss_breakdown(&pred, &targets, &assoc, &scene, &boxes)?);

    for o in &mut pred.offsets {
        *o += Vec3::new(0.05, -0.02, 0.0);
    }
    for s in &mut pred.sizes {
        *s = *s * 1.1;
    }
    println!("perturbed: {:?}", loss_breakdown(&pred, &targets, &assoc, &scene, &boxes)?);
    Ok(())
}
