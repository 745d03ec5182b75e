//! Scene, weak labels, noisy votes, clustering and evaluation in one call.

use boxvote::eval::default_thresholds;
use boxvote::oracle::{gen_scene, OverlapMode, SceneGenParams, VoteNoise};
use boxvote::pipeline::{run_pipeline, SegmentConfig};
use boxvote::weaklabel::AssociationStrategy;

fn main() -> boxvote::Result<()> {
    let (scene, boxes) = gen_scene(&SceneGenParams {
        overlap_mode: OverlapMode::Touching,
        points_per_object: 1000,
        seed: 11,
        ..Default::default()
    })?;
    let noise = VoteNoise {
        center_sigma: 0.05,
        size_sigma: 0.05,
        score_noise_sigma: 0.02,
        sem_flip_prob: 0.0,
        seed: 12,
    };
    let run = run_pipeline(
        &scene,
        &boxes,
        AssociationStrategy::SmallestBox,
        &noise,
        &SegmentConfig::default(),
        &default_thresholds(),
    )?;
    println!("undecided fraction {:.3}, {} masks", run.undecided_fraction, run.masks.len());
    print!("{}", run.report.to_table());
    Ok(())
}
