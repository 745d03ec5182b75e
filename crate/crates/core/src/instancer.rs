//! From clustered votes to instance masks, plus the detect-then-segment
//! baseline and mask export.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::clustering::{Clustering, VoteSet};
use crate::error::{Error, Result};
use crate::geometry::{fit_aabb, Aabb, ClassId};
use crate::scene::{majority, write_colored_ply, BoxAnnotationSet, SceneCloud, BACKGROUND};
use crate::weaklabel::{associate, labels_to_masks, AssociationStrategy};

/// A predicted (or weak-label) instance: sorted original point indices, a
/// non-background class and a score in (0, 1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceMask {
    #[serde(rename = "points")]
    pub point_indices: Vec<usize>,
    pub label: ClassId,
    pub score: f64,
}

impl InstanceMask {
    pub fn len(&self) -> usize {
        self.point_indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.point_indices.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MaskFile {
    pub instances: Vec<InstanceMask>,
}

/// Drops votes predicted as background, with their expansions. Survivors
/// keep their relative order.
pub fn filter_background(votes: &VoteSet) -> VoteSet {
    let keep: Vec<usize> = (0..votes.len())
        .filter(|&i| votes.votes[i].semantic != BACKGROUND)
        .collect();
    votes.select(&keep)
}

/// One mask per cluster: the union of its members' expanded points.
///
/// The label is the majority of member semantics weighted by expansion size
/// (ties to the lowest class id); the score is the representative's score.
/// Clusters whose majority is background yield no mask, so callers normally
/// run [`filter_background`] first.
pub fn back_project(clustering: &Clustering, votes: &VoteSet) -> Result<Vec<InstanceMask>> {
    clustering.check_partition(votes.len())?;
    let mut masks = Vec::with_capacity(clustering.len());
    for c in &clustering.clusters {
        let label = majority(
            c.members
                .iter()
                .map(|&m| (votes.votes[m].semantic, votes.expansion[m].len())),
        );
        if label == BACKGROUND {
            continue;
        }
        let mut points: Vec<usize> = c
            .members
            .iter()
            .flat_map(|&m| votes.expansion[m].iter().copied())
            .collect();
        points.sort_unstable();
        masks.push(InstanceMask {
            point_indices: points,
            label,
            score: votes.votes[c.representative].score,
        });
    }
    Ok(masks)
}

/// Greedy non-maximum suppression. Returns kept indices in score order
/// (descending, ties by index). A box is kept iff its IoU with every kept
/// box is at most `iou_thresh`.
pub fn nms(boxes: &[(Aabb, f64)], iou_thresh: f64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..boxes.len()).collect();
    order.sort_by(|&a, &b| boxes[b].1.total_cmp(&boxes[a].1).then(a.cmp(&b)));
    let mut kept: Vec<usize> = Vec::new();
    for i in order {
        if kept
            .iter()
            .all(|&k| boxes[k].0.iou(&boxes[i].0) <= iou_thresh)
        {
            kept.push(i);
        }
    }
    kept
}

/// Detect-then-segment baseline: NMS over the non-background box votes, then
/// the detected boxes are treated as annotations and segmented with
/// [`associate`] and [`labels_to_masks`]. Each mask takes the score of its
/// detection.
pub fn detector_baseline(
    votes: &VoteSet,
    scene: &SceneCloud,
    nms_thresh: f64,
    strategy: AssociationStrategy,
) -> Vec<InstanceMask> {
    let fg = filter_background(votes);
    let scored: Vec<(Aabb, f64)> = fg.votes.iter().map(|v| (v.bbox, v.score)).collect();
    let kept = nms(&scored, nms_thresh);
    let detections = BoxAnnotationSet::new(kept.iter().map(|&i| fg.votes[i].bbox).collect());
    let scores: Vec<f64> = kept.iter().map(|&i| fg.votes[i].score).collect();
    let assoc = associate(scene, &detections, strategy);
    let mut masks = labels_to_masks(&assoc, &detections);
    // masks come out in box order, one per box that received points
    let mut used = vec![false; detections.len()];
    for b in assoc.foreground().map(|(_, b)| b) {
        used[b] = true;
    }
    let sources = (0..detections.len()).filter(|&b| used[b]);
    for (m, b) in masks.iter_mut().zip(sources) {
        m.score = scores[b];
    }
    masks
}

/// Axis-aligned box fitted to each mask's points, labelled with the mask
/// class.
pub fn masks_to_boxes(masks: &[InstanceMask], scene: &SceneCloud) -> Result<BoxAnnotationSet> {
    let boxes = masks
        .iter()
        .map(|m| {
            let pts: Vec<_> = m.point_indices.iter().map(|&i| scene.positions[i]).collect();
            fit_aabb(&pts, m.label)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BoxAnnotationSet::new(boxes))
}

pub fn read_masks(path: &Path) -> Result<Vec<InstanceMask>> {
    let file: MaskFile = crate::scene::parse_json_file(path)?;
    for (i, m) in file.instances.iter().enumerate() {
        if m.point_indices.is_empty() {
            return Err(Error::Schema(format!("instances[{i}].points is empty")));
        }
        if m.label == BACKGROUND {
            return Err(Error::Schema(format!("instances[{i}].label is the background class")));
        }
    }
    Ok(file.instances)
}

pub fn write_masks(path: &Path, masks: &[InstanceMask]) -> Result<()> {
    crate::scene::write_json_file(
        path,
        &MaskFile {
            instances: masks.to_vec(),
        },
    )
}

/// Colored PLY of the scene: one seeded random color per mask, grey for
/// points in no mask.
pub fn write_masks_ply(path: &Path, scene: &SceneCloud, masks: &[InstanceMask], seed: u64) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut colors = vec![[128u8, 128, 128]; scene.len()];
    for m in masks {
        let c: [u8; 3] = [rng.gen(), rng.gen(), rng.gen()];
        for &p in &m.point_indices {
            if p < colors.len() {
                colors[p] = c;
            }
        }
    }
    write_colored_ply(path, &scene.positions, &colors)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clustering::{nmc, Cluster, Vote};
    use crate::geometry::Vec3;

    fn vote(c: [f64; 3], s: f64, score: f64, sem: ClassId) -> Vote {
        Vote::new(Aabb::new(c.into(), Vec3::splat(s), sem).unwrap(), score, sem)
    }

    #[test]
    fn filter_cases() {
        let v = VoteSet::per_point(vec![vote([0.0; 3], 1.0, 0.5, 1), vote([1.0; 3], 1.0, 0.5, 2)]);
        assert_eq!(filter_background(&v), v);
        let bg = VoteSet::per_point(vec![vote([0.0; 3], 1.0, 0.5, 0); 3]);
        assert!(filter_background(&bg).is_empty());
        let mixed = VoteSet::per_point(vec![
            vote([0.0; 3], 1.0, 0.5, 0),
            vote([1.0; 3], 1.0, 0.5, 2),
            vote([2.0; 3], 1.0, 0.5, 0),
            vote([3.0; 3], 1.0, 0.5, 1),
        ]);
        let f = filter_background(&mixed);
        assert_eq!(f.len(), 2);
        assert_eq!(f.expansion, vec![vec![1], vec![3]]);
    }

    #[test]
    fn back_projection_cases() {
        let v = VoteSet::per_point(vec![
            vote([0.0; 3], 1.0, 0.9, 1),
            vote([0.0; 3], 1.0, 0.8, 1),
            vote([5.0; 3], 1.0, 0.7, 2),
        ]);
        let all = Clustering {
            clusters: vec![Cluster { representative: 0, members: vec![0, 1, 2] }],
        };
        let m = back_project(&all, &v).unwrap();
        assert_eq!(m.len(), 1);
        assert_eq!(m[0].point_indices, vec![0, 1, 2]);
        assert_eq!(m[0].score, 0.9);

        let c = nmc(&v, 0.3);
        let m = back_project(&c, &v).unwrap();
        assert_eq!(m.len(), 2);
        assert_eq!((m[0].point_indices.clone(), m[0].label), (vec![0, 1], 1));
        assert_eq!((m[1].point_indices.clone(), m[1].label, m[1].score), (vec![2], 2, 0.7));
    }

    #[test]
    fn majority_label() {
        let v = VoteSet::per_point(vec![
            vote([0.0; 3], 1.0, 0.5, 2),
            vote([0.0; 3], 1.0, 0.9, 1),
            vote([0.0; 3], 1.0, 0.5, 1),
            vote([0.0; 3], 1.0, 0.5, 2),
            vote([0.0; 3], 1.0, 0.5, 1),
        ]);
        let c = Clustering {
            clusters: vec![Cluster { representative: 1, members: vec![0, 1, 2, 3, 4] }],
        };
        assert_eq!(back_project(&c, &v).unwrap()[0].label, 1);
    }

    #[test]
    fn back_project_rejects_non_partition() {
        let v = VoteSet::per_point(vec![vote([0.0; 3], 1.0, 0.5, 1); 2]);
        let c = Clustering {
            clusters: vec![Cluster { representative: 0, members: vec![0] }],
        };
        assert!(matches!(back_project(&c, &v), Err(Error::NotPartition(_))));
    }

    #[test]
    fn nms_cases() {
        let unit = |x: f64| Aabb::new(Vec3::new(x, 0.0, 0.0), Vec3::splat(1.0), 1).unwrap();
        assert_eq!(nms(&[(unit(0.0), 0.5), (unit(5.0), 0.6)], 0.3), vec![1, 0]);
        assert_eq!(nms(&[(unit(0.0), 0.5), (unit(0.0), 0.6)], 0.3), vec![1]);
        let chain = [(unit(0.0), 0.9), (unit(1.0 / 3.0), 0.8), (unit(2.0 / 3.0), 0.7)];
        assert_eq!(nms(&chain, 0.3), vec![0, 2]);
    }

    #[test]
    fn boxes_from_masks() {
        let scene = SceneCloud::new(
            vec!["background".into(), "a".into()],
            vec![
                Vec3::new(0.0, 0.0, 0.0),
                Vec3::new(1.0, 0.0, 0.0),
                Vec3::new(0.0, 2.0, 0.0),
                Vec3::new(1.0, 2.0, 3.0),
                Vec3::new(0.2, 0.1, 0.0),
            ],
        );
        scene.validate().unwrap();
        let cuboid = InstanceMask { point_indices: vec![0, 3], label: 1, score: 1.0 };
        let single = InstanceMask { point_indices: vec![4], label: 1, score: 1.0 };
        // L shape in the xy plane: (0,0), (1,0), (0,2)
        let ell = InstanceMask { point_indices: vec![0, 1, 2], label: 1, score: 1.0 };
        let b = masks_to_boxes(&[cuboid, single, ell], &scene).unwrap();
        assert_eq!(b.boxes[0].center(), Vec3::new(0.5, 1.0, 1.5));
        assert_eq!(b.boxes[0].size(), Vec3::new(1.0, 2.0, 3.0));
        assert!((b.boxes[1].size() - Vec3::splat(1e-3)).norm() < 1e-15);
        assert!(b.boxes[1].contains(Vec3::new(0.2, 0.1, 0.0)));
        assert_eq!(b.boxes[2].min(), Vec3::new(0.0, 0.0, -5e-4));
        assert_eq!(b.boxes[2].max(), Vec3::new(1.0, 2.0, 5e-4));
    }
}
