//! Scene data model, file formats, voxel discretization and segment-level
//! vote aggregation.

mod json;
mod ply;
mod segments;
mod voxel;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Aabb, ClassId, Vec3};

pub use json::{load_scene_json, read_boxes, save_scene_json, scene_from_json_str, scene_to_json_string, write_boxes};
pub(crate) use json::{parse_json_file, write_json, write_json_file};
pub use ply::{read_ply, write_colored_ply, PlyCloud};
pub use segments::{aggregate_votes_by_segment, vote_segment_ids};
pub use voxel::{voxelize, VoxelCell, VoxelMap, DEFAULT_CELL_SIZE};

/// Reserved background class id; `class_names[0]` is always `"background"`.
pub const BACKGROUND: ClassId = 0;
pub const BACKGROUND_NAME: &str = "background";

/// GT instance id for points that belong to no instance.
pub const NO_INSTANCE: i64 = -1;

const NORMAL_TOLERANCE: f64 = 1e-3;

/// Immutable point set with optional per-point attributes and ground truth.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SceneCloud {
    pub class_names: Vec<String>,
    pub positions: Vec<Vec3>,
    pub colors: Option<Vec<[f64; 3]>>,
    pub normals: Option<Vec<Vec3>>,
    pub segment_ids: Option<Vec<i64>>,
    pub gt_instance_ids: Option<Vec<i64>>,
    pub gt_semantics: Option<Vec<ClassId>>,
}

impl SceneCloud {
    pub fn new(class_names: Vec<String>, positions: Vec<Vec3>) -> Self {
        Self {
            class_names,
            positions,
            ..Default::default()
        }
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn class_name(&self, class: ClassId) -> &str {
        self.class_names
            .get(class as usize)
            .map(String::as_str)
            .unwrap_or("?")
    }

    pub fn validate(&self) -> Result<()> {
        if self.class_names.first().map(String::as_str) != Some(BACKGROUND_NAME) {
            return Err(Error::Schema(format!(
                "class_names[0] must be \"{BACKGROUND_NAME}\""
            )));
        }
        let n = self.len();
        for (i, p) in self.positions.iter().enumerate() {
            if !p.is_finite() {
                return Err(Error::Schema(format!("points.position[{i}] is not finite")));
            }
        }
        check_len("points.color", self.colors.as_ref().map(Vec::len), n)?;
        check_len("points.normal", self.normals.as_ref().map(Vec::len), n)?;
        check_len("points.segment_id", self.segment_ids.as_ref().map(Vec::len), n)?;
        check_len("points.gt_instance_id", self.gt_instance_ids.as_ref().map(Vec::len), n)?;
        check_len("points.gt_semantic", self.gt_semantics.as_ref().map(Vec::len), n)?;

        if let Some(colors) = &self.colors {
            for (i, c) in colors.iter().enumerate() {
                if c.iter().any(|v| !(0.0..=1.0).contains(v)) {
                    return Err(Error::Schema(format!("points.color[{i}] outside [0,1]")));
                }
            }
        }
        if let Some(normals) = &self.normals {
            for (i, nrm) in normals.iter().enumerate() {
                if (nrm.norm() - 1.0).abs() > NORMAL_TOLERANCE {
                    return Err(Error::Schema(format!("points.normal[{i}] is not unit length")));
                }
            }
        }
        if let Some(sem) = &self.gt_semantics {
            if let Some(i) = sem.iter().position(|&c| c as usize >= self.num_classes()) {
                return Err(Error::Schema(format!(
                    "points.gt_semantic[{i}] = {} is not a known class",
                    sem[i]
                )));
            }
        }
        if let Some(ids) = &self.gt_instance_ids {
            if let Some(i) = ids.iter().position(|&id| id < NO_INSTANCE) {
                return Err(Error::Schema(format!("points.gt_instance_id[{i}] < -1")));
            }
        }
        if let (Some(ids), Some(sem)) = (&self.gt_instance_ids, &self.gt_semantics) {
            for (i, (&id, &c)) in ids.iter().zip(sem).enumerate() {
                if (id == NO_INSTANCE) != (c == BACKGROUND) {
                    return Err(Error::Schema(format!(
                        "point {i}: gt_instance_id {id} inconsistent with gt_semantic {c}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Ground-truth instances as (sorted point indices, class), ordered by
    /// instance id. The class of an instance is the majority of its points'
    /// GT semantics (background if absent).
    pub fn gt_instances(&self) -> Vec<(i64, Vec<usize>, ClassId)> {
        let Some(ids) = &self.gt_instance_ids else {
            return Vec::new();
        };
        let mut groups: std::collections::BTreeMap<i64, Vec<usize>> = Default::default();
        for (i, &id) in ids.iter().enumerate() {
            if id != NO_INSTANCE {
                groups.entry(id).or_default().push(i);
            }
        }
        groups
            .into_iter()
            .map(|(id, pts)| {
                let class = match &self.gt_semantics {
                    Some(sem) => majority(pts.iter().map(|&p| (sem[p], 1))),
                    None => BACKGROUND,
                };
                (id, pts, class)
            })
            .collect()
    }
}

/// Most frequent class by total weight, ties broken by lowest class id.
pub(crate) fn majority(items: impl IntoIterator<Item = (ClassId, usize)>) -> ClassId {
    let mut counts: std::collections::BTreeMap<ClassId, usize> = Default::default();
    for (c, w) in items {
        *counts.entry(c).or_default() += w;
    }
    let mut best = (BACKGROUND, 0usize);
    for (c, w) in counts {
        if w > best.1 {
            best = (c, w);
        }
    }
    best.0
}

fn check_len(field: &str, len: Option<usize>, n: usize) -> Result<()> {
    match len {
        Some(l) if l != n => Err(Error::Schema(format!(
            "{field} has {l} entries but there are {n} positions"
        ))),
        _ => Ok(()),
    }
}

/// Ordered list of annotation boxes for one scene.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct BoxAnnotationSet {
    pub boxes: Vec<Aabb>,
}

impl BoxAnnotationSet {
    pub fn new(boxes: Vec<Aabb>) -> Self {
        Self { boxes }
    }

    pub fn len(&self) -> usize {
        self.boxes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.boxes.is_empty()
    }

    /// Labels must be non-background and, when `num_classes` is given, known.
    pub fn validate(&self, num_classes: Option<usize>) -> Result<()> {
        for (i, b) in self.boxes.iter().enumerate() {
            if b.label == BACKGROUND {
                return Err(Error::Schema(format!("boxes[{i}].label is the background class")));
            }
            if let Some(n) = num_classes {
                if b.label as usize >= n {
                    return Err(Error::Schema(format!(
                        "boxes[{i}].label = {} is not a known class",
                        b.label
                    )));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SceneFormat {
    Json,
    Ply,
}

impl SceneFormat {
    pub fn from_path(path: &Path) -> SceneFormat {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("ply") => SceneFormat::Ply,
            _ => SceneFormat::Json,
        }
    }
}

/// Loads a scene. PLY files carry no class names or boxes; the scene gets a
/// single background class.
pub fn load_scene(path: &Path, format: SceneFormat) -> Result<(SceneCloud, Option<BoxAnnotationSet>)> {
    match format {
        SceneFormat::Json => load_scene_json(path),
        SceneFormat::Ply => {
            let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
            let cloud = read_ply(&bytes)?;
            let scene = SceneCloud {
                class_names: vec![BACKGROUND_NAME.to_string()],
                positions: cloud.positions,
                colors: cloud.colors,
                ..Default::default()
            };
            scene.validate()?;
            Ok((scene, None))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names() -> Vec<String> {
        vec!["background".into(), "chair".into()]
    }

    #[test]
    fn gt_consistency_checked() {
        let mut s = SceneCloud::new(names(), vec![Vec3::ZERO, Vec3::splat(1.0)]);
        s.gt_instance_ids = Some(vec![-1, 0]);
        s.gt_semantics = Some(vec![0, 1]);
        s.validate().unwrap();
        s.gt_semantics = Some(vec![1, 1]);
        assert!(s.validate().is_err());
    }

    #[test]
    fn background_name_required() {
        let s = SceneCloud::new(vec!["chair".into()], vec![Vec3::ZERO]);
        assert!(matches!(s.validate(), Err(Error::Schema(_))));
    }

    #[test]
    fn normals_must_be_unit() {
        let mut s = SceneCloud::new(names(), vec![Vec3::ZERO]);
        s.normals = Some(vec![Vec3::new(0.0, 0.0, 1.0005)]);
        s.validate().unwrap();
        s.normals = Some(vec![Vec3::new(0.0, 0.0, 1.01)]);
        assert!(s.validate().is_err());
    }

    #[test]
    fn majority_ties_to_lowest() {
        assert_eq!(majority([(3, 2), (2, 2), (5, 1)]), 2);
        assert_eq!(majority([(3, 3), (2, 2)]), 3);
    }

    #[test]
    fn gt_instances_grouped() {
        let mut s = SceneCloud::new(names(), vec![Vec3::ZERO; 4]);
        s.gt_instance_ids = Some(vec![2, -1, 0, 2]);
        s.gt_semantics = Some(vec![1, 0, 1, 1]);
        let inst = s.gt_instances();
        assert_eq!(inst, vec![(0, vec![2], 1), (2, vec![0, 3], 1)]);
    }

    #[test]
    fn box_labels_validated() {
        let b = Aabb::new(Vec3::ZERO, Vec3::splat(1.0), 0).unwrap();
        assert!(BoxAnnotationSet::new(vec![b]).validate(None).is_err());
        let b = b.with_label(4);
        assert!(BoxAnnotationSet::new(vec![b]).validate(Some(2)).is_err());
        BoxAnnotationSet::new(vec![b]).validate(Some(5)).unwrap();
    }
}
