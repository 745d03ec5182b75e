//! End-to-end chains shared by the command line, the examples and the tests.

use serde::Serialize;

use crate::clustering::{cluster_per_semantic, ClusterMethod, VoteSet, DEFAULT_TAU};
use crate::error::{Error, Result};
use crate::eval::{evaluate, gt_masks, EvalReport};
use crate::instancer::{back_project, filter_background, InstanceMask};
use crate::oracle::{simulate_votes, VoteNoise};
use crate::scene::{aggregate_votes_by_segment, vote_segment_ids, BoxAnnotationSet, SceneCloud};
use crate::weaklabel::{associate, AssociationStrategy};

/// How votes become masks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentConfig {
    pub method: ClusterMethod,
    pub per_semantic: bool,
    /// Average votes over the scene's segments before clustering.
    pub aggregate_segments: bool,
}

impl Default for SegmentConfig {
    fn default() -> Self {
        Self {
            method: ClusterMethod::Nmc { tau: DEFAULT_TAU },
            per_semantic: false,
            aggregate_segments: true,
        }
    }
}

impl SegmentConfig {
    pub fn validate(&self) -> Result<()> {
        match self.method {
            ClusterMethod::Nmc { tau } if !(tau > 0.0 && tau < 1.0) => {
                Err(Error::InvalidParam("tau must be in (0,1)".into()))
            }
            ClusterMethod::Spatial { radius } if !(radius > 0.0 && radius.is_finite()) => {
                Err(Error::InvalidParam("radius must be positive".into()))
            }
            _ => Ok(()),
        }
    }
}

/// Background filtering, optional segment averaging, clustering and
/// back-projection.
pub fn votes_to_masks(votes: &VoteSet, segment_ids: Option<&[i64]>, cfg: &SegmentConfig) -> Result<Vec<InstanceMask>> {
    cfg.validate()?;
    let mut kept = filter_background(votes);
    if cfg.aggregate_segments {
        let ids = vote_segment_ids(&kept, segment_ids)?;
        kept = aggregate_votes_by_segment(&kept, &ids)?;
    }
    let clustering = if cfg.per_semantic {
        cluster_per_semantic(&kept, &cfg.method)
    } else {
        cfg.method.run(&kept)
    };
    back_project(&clustering, &kept)
}

/// Everything one pipeline run produces.
#[derive(Debug, Clone, Serialize)]
pub struct PipelineRun {
    pub undecided_fraction: f64,
    pub masks: Vec<InstanceMask>,
    pub report: EvalReport,
}

/// Weak labels from `boxes`, simulated votes, segmentation and evaluation
/// against the scene's ground truth.
pub fn run_pipeline(
    scene: &SceneCloud,
    boxes: &BoxAnnotationSet,
    strategy: AssociationStrategy,
    noise: &VoteNoise,
    cfg: &SegmentConfig,
    thresholds: &[f64],
) -> Result<PipelineRun> {
    let assoc = associate(scene, boxes, strategy);
    let votes = simulate_votes(scene, boxes, &assoc, noise)?;
    let masks = votes_to_masks(&votes, scene.segment_ids.as_deref(), cfg)?;
    let report = evaluate(&masks, &gt_masks(scene)?, thresholds, &scene.class_names);
    Ok(PipelineRun {
        undecided_fraction: crate::weaklabel::undecided_fraction(&assoc),
        masks,
        report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::default_thresholds;
    use crate::oracle::{gen_scene, OverlapMode, SceneGenParams};
    use crate::weaklabel::labels_to_masks;

    #[test]
    fn noiseless_pipeline_reproduces_weak_labels() {
        let params = SceneGenParams {
            points_per_object: 400,
            background_points: 1000,
            overlap_mode: OverlapMode::None,
            seed: 21,
            ..Default::default()
        };
        let (scene, boxes) = gen_scene(&params).unwrap();
        let assoc = associate(&scene, &boxes, AssociationStrategy::DecidedOnly);
        let expected = labels_to_masks(&assoc, &boxes);
        for aggregate_segments in [false, true] {
            let cfg = SegmentConfig { aggregate_segments, ..Default::default() };
            let run = run_pipeline(
                &scene,
                &boxes,
                AssociationStrategy::DecidedOnly,
                &VoteNoise::zero(1),
                &cfg,
                &default_thresholds(),
            )
            .unwrap();
            let mut got: Vec<_> = run.masks.iter().map(|m| (m.point_indices.clone(), m.label)).collect();
            let mut want: Vec<_> = expected.iter().map(|m| (m.point_indices.clone(), m.label)).collect();
            got.sort();
            want.sort();
            assert_eq!(got, want);
            assert_eq!(run.report.map50, 1.0);
        }
    }

    #[test]
    fn tau_is_validated() {
        let cfg = SegmentConfig { method: ClusterMethod::Nmc { tau: 1.5 }, ..Default::default() };
        let err = votes_to_masks(&VoteSet::default(), None, &cfg).unwrap_err();
        assert_eq!(err.to_string(), "invalid parameter: tau must be in (0,1)");
    }
}
