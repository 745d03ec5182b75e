//! Detect-then-segment compared with clustering, on scenes with
//! interpenetrating objects.

use boxvote::eval::{evaluate, gt_masks};
use boxvote::instancer::detector_baseline;
use boxvote::oracle::{derive_seed, gen_scene, simulate_votes, OverlapMode, SceneGenParams, VoteNoise};
use boxvote::pipeline::{votes_to_masks, SegmentConfig};
use boxvote::weaklabel::{associate, AssociationStrategy};

fn main() -> boxvote::Result<()> {
    for i in 0..5 {
        let (scene, boxes) = gen_scene(&SceneGenParams {
            overlap_mode: OverlapMode::Touching,
            points_per_object: 800,
            seed: derive_seed(1, i),
            ..Default::default()
        })?;
        let assoc = associate(&scene, &boxes, AssociationStrategy::DecidedOnly);
        let noise = VoteNoise { center_sigma: 0.05, size_sigma: 0.05, seed: derive_seed(2, i), ..VoteNoise::zero(0) };
        let votes = simulate_votes(&scene, &boxes, &assoc, &noise)?;
        let gts = gt_masks(&scene)?;
        let ours = votes_to_masks(&votes, scene.segment_ids.as_deref(), &SegmentConfig::default())?;
        let theirs = detector_baseline(&votes, &scene, 0.25, AssociationStrategy::DecidedOnly);
        let a = evaluate(&ours, &gts, &[0.5], &scene.class_names).map50;
        let b = evaluate(&theirs, &gts, &[0.5], &scene.class_names).map50;
        println!("scene {i}: clustering mAP@50 {a:.3}  detector {b:.3}");
    }
    Ok(())
}
