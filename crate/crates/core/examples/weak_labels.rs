//! Weak labels from box annotations under each association strategy.

use boxvote::oracle::{gen_scene, OverlapMode, SceneGenParams};
use boxvote::weaklabel::{associate, labels_to_masks, make_targets, undecided_fraction, AssociationStrategy};

fn main() -> boxvote::Result<()> {
    let params = SceneGenParams {
        num_objects: 6,
        points_per_object: 800,
        overlap_mode: OverlapMode::Nested,
        seed: 42,
        ..Default::default()
    };
    let (scene, boxes) = gen_scene(&params)?;
    println!("{} points, {} boxes", scene.len(), boxes.len());
    for strategy in AssociationStrategy::ALL {
        let assoc = associate(&scene, &boxes, strategy);
        let targets = make_targets(&assoc, &scene, &boxes);
        let with_offset = targets.offsets.iter().filter(|o| o.is_some()).count();
        let masks = labels_to_masks(&assoc, &boxes);
        println!(
            "{:<9} undecided {:>5.1}%  points with targets {:>5}  masks {}",
            strategy.name(),
            100.0 * undecided_fraction(&assoc),
            with_offset,
            masks.len()
        );
    }
    Ok(())
}
