//! The scene-json container: class names, per-point arrays and optional
//! annotation boxes in one UTF-8 document.

use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{de::DeserializeOwned, Deserialize, Serialize};

use super::{BoxAnnotationSet, SceneCloud};
use crate::error::{Error, Result};
use crate::geometry::{Aabb, ClassId, Vec3};

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SceneFile {
    class_names: Vec<String>,
    points: PointsBlock,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    boxes: Option<Vec<Aabb>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PointsBlock {
    position: Vec<Vec3>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    color: Option<Vec<[f64; 3]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    normal: Option<Vec<Vec3>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    segment_id: Option<Vec<i64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    gt_instance_id: Option<Vec<i64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    gt_semantic: Option<Vec<ClassId>>,
}

#[derive(Deserialize)]
struct BoxesOnly {
    #[serde(default)]
    boxes: Vec<Aabb>,
}

/// Deserializes `text`, reporting failures with the JSON path of the
/// offending field (for example `points.position[3]`).
pub(crate) fn parse_json<T: DeserializeOwned>(text: &str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| Error::Parse {
        at: match e.path().to_string() {
            p if p == "." => "document".to_string(),
            p => p,
        },
        msg: e.inner().to_string(),
    })
}

pub(crate) fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T, pretty: bool) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let res = if pretty {
        serde_json::to_writer_pretty(&mut w, value)
    } else {
        serde_json::to_writer(&mut w, value)
    };
    res.map_err(|e| Error::io(path, std::io::Error::other(e)))?;
    w.write_all(b"\n")
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

pub(crate) fn parse_json_file<T: DeserializeOwned>(path: &Path) -> Result<T> {
    parse_json(&read_text(path)?)
}

pub(crate) fn write_json_file<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_json(path, value, false)
}

pub fn scene_from_json_str(text: &str) -> Result<(SceneCloud, Option<BoxAnnotationSet>)> {
    let file: SceneFile = parse_json(text)?;
    let scene = SceneCloud {
        class_names: file.class_names,
        positions: file.points.position,
        colors: file.points.color,
        normals: file.points.normal,
        segment_ids: file.points.segment_id,
        gt_instance_ids: file.points.gt_instance_id,
        gt_semantics: file.points.gt_semantic,
    };
    scene.validate()?;
    let boxes = file.boxes.map(BoxAnnotationSet::new);
    if let Some(b) = &boxes {
        b.validate(Some(scene.num_classes()))?;
    }
    Ok((scene, boxes))
}

pub fn scene_to_json_string(scene: &SceneCloud, boxes: Option<&BoxAnnotationSet>) -> String {
    serde_json::to_string(&to_file(scene, boxes)).expect("scene serialization cannot fail")
}

fn to_file(scene: &SceneCloud, boxes: Option<&BoxAnnotationSet>) -> SceneFile {
    SceneFile {
        class_names: scene.class_names.clone(),
        points: PointsBlock {
            position: scene.positions.clone(),
            color: scene.colors.clone(),
            normal: scene.normals.clone(),
            segment_id: scene.segment_ids.clone(),
            gt_instance_id: scene.gt_instance_ids.clone(),
            gt_semantic: scene.gt_semantics.clone(),
        },
        boxes: boxes.map(|b| b.boxes.clone()),
    }
}

pub fn load_scene_json(path: &Path) -> Result<(SceneCloud, Option<BoxAnnotationSet>)> {
    scene_from_json_str(&read_text(path)?)
}

pub fn save_scene_json(path: &Path, scene: &SceneCloud, boxes: Option<&BoxAnnotationSet>) -> Result<()> {
    write_json(path, &to_file(scene, boxes), false)
}

/// Reads the `boxes` array of a boxes file or a scene-json file.
pub fn read_boxes(path: &Path) -> Result<BoxAnnotationSet> {
    let file: BoxesOnly = parse_json(&read_text(path)?)?;
    let set = BoxAnnotationSet::new(file.boxes);
    set.validate(None)?;
    Ok(set)
}

pub fn write_boxes(path: &Path, boxes: &BoxAnnotationSet) -> Result<()> {
    write_json(path, boxes, true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::BACKGROUND_NAME;

    #[test]
    fn minimal_scene() {
        let text = r#"{"class_names":["background","chair"],
            "points":{"position":[[0,0,0],[1,0,0],[0,1,0]]}}"#;
        let (scene, boxes) = scene_from_json_str(text).unwrap();
        assert_eq!(scene.len(), 3);
        assert!(boxes.is_none());
    }

    #[test]
    fn length_mismatch_is_schema_error() {
        let text = r#"{"class_names":["background"],
            "points":{"position":[[0,0,0],[1,0,0],[0,1,0],[1,1,1]],
                      "color":[[0,0,0],[1,1,1],[0.5,0.5,0.5]]}}"#;
        match scene_from_json_str(text) {
            Err(Error::Schema(msg)) => assert!(msg.contains("points.color"), "{msg}"),
            other => panic!("expected schema error, got {other:?}"),
        }
    }

    #[test]
    fn malformed_record_names_field_and_index() {
        let text = r#"{"class_names":["background"],
            "points":{"position":[[0,0,0],[1,0],[0,1,0]]}}"#;
        match scene_from_json_str(text) {
            Err(Error::Parse { at, .. }) => assert_eq!(at, "points.position[1]"),
            other => panic!("expected parse error, got {other:?}"),
        }
        let text = r#"{"class_names":["background","a"],"points":{"position":[]},
            "boxes":[{"center":[0,0,0],"size":[1,1,1],"label":1},{"center":[0,0,0],"size":[1,0,1],"label":1}]}"#;
        match scene_from_json_str(text) {
            Err(Error::Parse { at, .. }) => assert_eq!(at, "boxes[1]"),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn round_trip() {
        let mut scene = SceneCloud::new(
            vec![BACKGROUND_NAME.into(), "table".into()],
            vec![Vec3::new(0.1, 0.2, 0.3), Vec3::new(1.0 / 3.0, -2.5e-7, 7.0)],
        );
        scene.colors = Some(vec![[0.0, 0.5, 1.0], [0.25, 0.75, 0.1]]);
        scene.normals = Some(vec![Vec3::new(0.0, 0.0, 1.0), Vec3::new(0.6, 0.8, 0.0)]);
        scene.segment_ids = Some(vec![4, 9]);
        scene.gt_instance_ids = Some(vec![-1, 0]);
        scene.gt_semantics = Some(vec![0, 1]);
        let boxes = BoxAnnotationSet::new(vec![Aabb::new(Vec3::new(1.0 / 3.0, 0.0, 7.0), Vec3::splat(0.2), 1).unwrap()]);
        let text = scene_to_json_string(&scene, Some(&boxes));
        let (back, back_boxes) = scene_from_json_str(&text).unwrap();
        assert_eq!(back, scene);
        let bb = back_boxes.unwrap().boxes[0];
        assert!((bb.center() - boxes.boxes[0].center()).norm() < 1e-9);
        assert!((bb.size() - boxes.boxes[0].size()).norm() < 1e-9);
        assert_eq!(scene_to_json_string(&back, None), scene_to_json_string(&scene, None));
    }
}
