//! Instance segmentation metrics: greedy mask matching, interpolated AP,
//! mAP over IoU thresholds, precision/recall, weak-label quality and a
//! box-fitting detection proxy.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::ClassId;
use crate::instancer::{masks_to_boxes, InstanceMask};
use crate::scene::{BoxAnnotationSet, SceneCloud};
use crate::weaklabel::{associate, labels_to_masks, AssociationStrategy};

/// IoU threshold of the precision/recall summary.
pub const PR_THRESHOLD: f64 = 0.5;

/// 0.50, 0.55, ..., 0.95.
pub fn range_thresholds() -> Vec<f64> {
    (0..10).map(|i| (50 + 5 * i) as f64 / 100.0).collect()
}

/// 0.25 followed by [`range_thresholds`].
pub fn default_thresholds() -> Vec<f64> {
    std::iter::once(0.25).chain(range_thresholds()).collect()
}

/// `|a ∩ b| / |a ∪ b|` for sorted, duplicate-free index lists.
pub fn mask_iou(a: &[usize], b: &[usize]) -> Result<f64> {
    if a.is_empty() && b.is_empty() {
        return Err(Error::EmptyMasks);
    }
    let inter = sorted_intersection(a, b);
    Ok(inter as f64 / (a.len() + b.len() - inter) as f64)
}

fn sorted_intersection(a: &[usize], b: &[usize]) -> usize {
    let (mut i, mut j, mut n) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                n += 1;
                i += 1;
                j += 1;
            }
        }
    }
    n
}

/// Matching outcome for one class at one IoU threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMatch {
    pub ap: f64,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl ClassMatch {
    /// `tp / (tp + fp)`, 0 without predictions.
    pub fn precision(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp)
    }

    /// `tp / (tp + fn)`, 0 without ground truth.
    pub fn recall(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

/// Predictions of one class in ranking order: score descending, then larger
/// mask, then smaller first point index. Remaining ties are broken by the
/// full index list, so only identical masks keep their input order.
fn ranked(preds: &[InstanceMask], class: ClassId) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..preds.len()).filter(|&i| preds[i].label == class).collect();
    idx.sort_by(|&a, &b| {
        let (pa, pb) = (&preds[a], &preds[b]);
        pb.score
            .total_cmp(&pa.score)
            .then(pb.len().cmp(&pa.len()))
            .then(pa.point_indices.first().cmp(&pb.point_indices.first()))
            .then_with(|| pa.point_indices.cmp(&pb.point_indices))
            .then(a.cmp(&b))
    });
    idx
}

/// Greedy matching and AP from an IoU matrix whose rows are predictions in
/// ranking order and whose columns are the ground-truth instances.
fn greedy_ap(iou: &[Vec<f64>], num_gt: usize, thresh: f64) -> ClassMatch {
    if num_gt == 0 {
        let ap = if iou.is_empty() { 1.0 } else { 0.0 };
        return ClassMatch { ap, tp: 0, fp: iou.len(), fn_: 0 };
    }
    let mut matched = vec![false; num_gt];
    let mut hits = Vec::with_capacity(iou.len());
    for row in iou {
        let mut best: Option<usize> = None;
        for (g, &v) in row.iter().enumerate() {
            if !matched[g] && best.map_or(true, |b| v > row[b]) {
                best = Some(g);
            }
        }
        match best {
            Some(g) if row[g] >= thresh => {
                matched[g] = true;
                hits.push(true);
            }
            _ => hits.push(false),
        }
    }
    let tp = hits.iter().filter(|&&h| h).count();
    ClassMatch {
        ap: interpolated_ap(&hits, num_gt),
        tp,
        fp: hits.len() - tp,
        fn_: num_gt - tp,
    }
}

/// Area under the precision/recall curve of a ranked hit list, with
/// precision replaced by its running maximum from the right.
fn interpolated_ap(hits: &[bool], num_gt: usize) -> f64 {
    let mut precision = Vec::with_capacity(hits.len());
    let mut recall = Vec::with_capacity(hits.len());
    let mut tp = 0usize;
    for (k, &h) in hits.iter().enumerate() {
        tp += h as usize;
        precision.push(tp as f64 / (k + 1) as f64);
        recall.push(tp as f64 / num_gt as f64);
    }
    for k in (0..precision.len().saturating_sub(1)).rev() {
        precision[k] = precision[k].max(precision[k + 1]);
    }
    let mut ap = 0.0;
    let mut prev = 0.0;
    for k in 0..hits.len() {
        ap += (recall[k] - prev) * precision[k];
        prev = recall[k];
    }
    ap
}

fn mask_iou_matrix(preds: &[&InstanceMask], gts: &[&InstanceMask]) -> Vec<Vec<f64>> {
    preds
        .iter()
        .map(|p| {
            gts.iter()
                .map(|g| mask_iou(&p.point_indices, &g.point_indices).unwrap_or(0.0))
                .collect()
        })
        .collect()
}

/// Matches the predictions of `class` against its ground-truth instances and
/// computes AP at `iou_thresh`.
///
/// Predictions are taken in ranking order; each one claims the unmatched
/// ground truth of highest mask IoU when that IoU reaches the threshold.
pub fn match_and_ap(preds: &[InstanceMask], gts: &[InstanceMask], class: ClassId, iou_thresh: f64) -> ClassMatch {
    let p: Vec<&InstanceMask> = ranked(preds, class).into_iter().map(|i| &preds[i]).collect();
    let g: Vec<&InstanceMask> = gts.iter().filter(|m| m.label == class).collect();
    greedy_ap(&mask_iou_matrix(&p, &g), g.len(), iou_thresh)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassReport {
    pub class: ClassId,
    pub name: String,
    pub num_gt: usize,
    pub num_pred: usize,
    /// One entry per report threshold.
    pub matches: Vec<ClassMatch>,
    pub ap25: f64,
    pub ap50: f64,
    /// Mean AP over 0.50:0.05:0.95.
    pub ap: f64,
    pub precision: f64,
    pub recall: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub thresholds: Vec<f64>,
    /// Classes present in the ground truth, ascending.
    pub classes: Vec<ClassReport>,
    #[serde(rename = "mAP25")]
    pub map25: f64,
    #[serde(rename = "mAP50")]
    pub map50: f64,
    #[serde(rename = "mAP")]
    pub map: f64,
    #[serde(rename = "mPrec")]
    pub mprec: f64,
    #[serde(rename = "mRec")]
    pub mrec: f64,
    /// Set when there are no predictions at all; precision is then reported
    /// as 0.
    pub empty_predictions: bool,
}

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let (mut sum, mut n) = (0.0, 0usize);
    for x in v {
        sum += x;
        n += 1;
    }
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// Builds a report from any IoU function between predictions and ground
/// truth (mask IoU, box IoU, ...).
fn report_with(
    preds: &[InstanceMask],
    gts: &[InstanceMask],
    thresholds: &[f64],
    class_names: &[String],
    iou: impl Fn(usize, usize) -> f64,
) -> EvalReport {
    let classes: BTreeSet<ClassId> = gts.iter().map(|g| g.label).collect();
    let range = range_thresholds();
    let mut reports = Vec::with_capacity(classes.len());
    for class in classes {
        let order = ranked(preds, class);
        let gt_idx: Vec<usize> = (0..gts.len()).filter(|&g| gts[g].label == class).collect();
        let matrix: Vec<Vec<f64>> = order
            .iter()
            .map(|&p| gt_idx.iter().map(|&g| iou(p, g)).collect())
            .collect();
        let at = |t: f64| greedy_ap(&matrix, gt_idx.len(), t);
        let pr = at(PR_THRESHOLD);
        reports.push(ClassReport {
            class,
            name: class_names.get(class as usize).cloned().unwrap_or_else(|| class.to_string()),
            num_gt: gt_idx.len(),
            num_pred: order.len(),
            matches: thresholds.iter().map(|&t| at(t)).collect(),
            ap25: at(0.25).ap,
            ap50: pr.ap,
            ap: {
                let aps: Vec<f64> = range.iter().map(|&t| at(t).ap).collect();
                // summation rounding must not lift the mean above its largest term
                mean(aps.iter().copied()).min(aps.iter().copied().fold(0.0, f64::max))
            },
            precision: pr.precision(),
            recall: pr.recall(),
        });
    }
    EvalReport {
        thresholds: thresholds.to_vec(),
        map25: mean(reports.iter().map(|r| r.ap25)),
        map50: mean(reports.iter().map(|r| r.ap50)),
        map: mean(reports.iter().map(|r| r.ap)),
        mprec: mean(reports.iter().map(|r| r.precision)),
        mrec: mean(reports.iter().map(|r| r.recall)),
        empty_predictions: preds.is_empty(),
        classes: reports,
    }
}

/// Per-class AP at `thresholds` plus mAP@25, mAP@50, mAP over
/// 0.50:0.05:0.95 and precision/recall at 0.5. Means run over the classes
/// present in `gts`.
pub fn evaluate(preds: &[InstanceMask], gts: &[InstanceMask], thresholds: &[f64], class_names: &[String]) -> EvalReport {
    report_with(preds, gts, thresholds, class_names, |p, g| {
        mask_iou(&preds[p].point_indices, &gts[g].point_indices).unwrap_or(0.0)
    })
}

/// Ground-truth instance masks of a scene, ordered by instance id.
pub fn gt_masks(scene: &SceneCloud) -> Result<Vec<InstanceMask>> {
    if scene.gt_instance_ids.is_none() || scene.gt_semantics.is_none() {
        return Err(Error::Schema("scene has no ground-truth instances".into()));
    }
    Ok(scene
        .gt_instances()
        .into_iter()
        .map(|(_, points, label)| InstanceMask {
            point_indices: points,
            label,
            score: 1.0,
        })
        .collect())
}

/// Scores the weak-label masks obtained from `boxes` against the scene's
/// full ground truth.
pub fn label_quality(
    scene: &SceneCloud,
    boxes: &BoxAnnotationSet,
    strategy: AssociationStrategy,
    thresholds: &[f64],
) -> Result<EvalReport> {
    let gts = gt_masks(scene)?;
    let masks = labels_to_masks(&associate(scene, boxes, strategy), boxes);
    Ok(evaluate(&masks, &gts, thresholds, &scene.class_names))
}

/// Detection-style evaluation: boxes are fitted to predicted and
/// ground-truth masks and matched by box IoU.
pub fn detection_proxy(preds: &[InstanceMask], scene: &SceneCloud, thresholds: &[f64]) -> Result<EvalReport> {
    let gts = gt_masks(scene)?;
    let pred_boxes = masks_to_boxes(preds, scene)?;
    let gt_boxes = masks_to_boxes(&gts, scene)?;
    Ok(report_with(preds, &gts, thresholds, &scene.class_names, |p, g| {
        pred_boxes.boxes[p].iou(&gt_boxes.boxes[g])
    }))
}

/// Checks mask indices against the scene size.
pub fn check_masks(masks: &[InstanceMask], num_points: usize) -> Result<()> {
    for (i, m) in masks.iter().enumerate() {
        if let Some(&p) = m.point_indices.iter().find(|&&p| p >= num_points) {
            return Err(Error::Schema(format!(
                "instances[{i}] references point {p} but the scene has {num_points} points"
            )));
        }
        if m.point_indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Schema(format!("instances[{i}].points is not sorted and unique")));
        }
    }
    Ok(())
}

impl EvalReport {
    /// Aligned text table, one row per class and a closing mean row.
    pub fn to_table(&self) -> String {
        let width = self.classes.iter().map(|c| c.name.len()).max().unwrap_or(0).max(5);
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<width$}  {:>6}  {:>6}  {:>6}  {:>6}  {:>6}  {:>5}  {:>5}",
            "class", "AP25", "AP50", "AP", "prec", "rec", "gt", "pred"
        );
        for c in &self.classes {
            let _ = writeln!(
                out,
                "{:<width$}  {:>6.3}  {:>6.3}  {:>6.3}  {:>6.3}  {:>6.3}  {:>5}  {:>5}",
                c.name, c.ap25, c.ap50, c.ap, c.precision, c.recall, c.num_gt, c.num_pred
            );
        }
        let _ = writeln!(
            out,
            "{:<width$}  {:>6.3}  {:>6.3}  {:>6.3}  {:>6.3}  {:>6.3}",
            "mean", self.map25, self.map50, self.map, self.mprec, self.mrec
        );
        out
    }
}
