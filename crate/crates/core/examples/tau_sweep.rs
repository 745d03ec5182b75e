//! Effect of the clustering threshold on noisy votes.

use boxvote::clustering::ClusterMethod;
use boxvote::eval::{evaluate, gt_masks};
use boxvote::oracle::{gen_scene, simulate_votes, OverlapMode, SceneGenParams, VoteNoise};
use boxvote::pipeline::{votes_to_masks, SegmentConfig};
use boxvote::weaklabel::{associate, AssociationStrategy};

fn main() -> boxvote::Result<()> {
    let (scene, boxes) = gen_scene(&SceneGenParams {
        overlap_mode: OverlapMode::Touching,
        points_per_object: 1000,
        seed: 21,
        ..Default::default()
    })?;
    let assoc = associate(&scene, &boxes, AssociationStrategy::SmallestBox);
    let noise = VoteNoise { center_sigma: 0.08, size_sigma: 0.1, score_noise_sigma: 0.05, sem_flip_prob: 0.0, seed: 22 };
    let votes = simulate_votes(&scene, &boxes, &assoc, &noise)?;
    let gts = gt_masks(&scene)?;
    println!("tau   mAP25  mAP50");
    for k in 1..10 {
        let tau = k as f64 / 10.0;
        let cfg = SegmentConfig { method: ClusterMethod::Nmc { tau }, ..SegmentConfig::default() };
        let masks = votes_to_masks(&votes, scene.segment_ids.as_deref(), &cfg)?;
        let r = evaluate(&masks, &gts, &[0.25, 0.5], &scene.class_names);
        println!("{tau:.1}   {:.3}  {:.3}", r.map25, r.map50);
    }
    Ok(())
}
