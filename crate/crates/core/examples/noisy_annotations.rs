//! Weak-label quality as annotation boxes are dropped or jittered.

use boxvote::eval::{default_thresholds, label_quality};
use boxvote::oracle::{gen_scene, SceneGenParams};
use boxvote::weaklabel::{degrade_annotations, AssociationStrategy};

fn main() -> boxvote::Result<()> {
    let (scene, boxes) = gen_scene(&SceneGenParams { num_objects: 20, points_per_object: 500, seed: 5, ..Default::default() })?;
    let thresholds = default_thresholds();
    for (drop, jitter) in [(0.0, 0.0), (0.0, 0.1), (0.0, 0.2), (0.0, 0.3), (0.0, 0.5), (0.1, 0.0), (0.2, 0.0), (0.4, 0.0)] {
        let degraded = degrade_annotations(&boxes, drop, jitter, 9)?;
        let r = label_quality(&scene, &degraded, AssociationStrategy::SmallestBox, &thresholds)?;
        println!("drop {drop:>4}  jitter {jitter:>4} m  boxes {:>2}  mAP@50 {:.3}", degraded.len(), r.map50);
    }
    Ok(())
}
