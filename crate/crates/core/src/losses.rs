//! Training losses over per-point predictions and weak-label targets.
//!
//! Offset, size and score losses average over foreground points; the
//! semantic loss averages over decided points, background included.
//! Undecided points never contribute. All means are summed in ascending
//! point order.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Aabb, Vec3};
use crate::scene::{BoxAnnotationSet, SceneCloud};
use crate::weaklabel::{Association, Tag, TrainingTargets};

/// Probabilities are clamped to `[PROB_EPS, 1 - PROB_EPS]` before logs.
pub const PROB_EPS: f64 = 1e-7;

/// Per-point network outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VotePrediction {
    pub offsets: Vec<Vec3>,
    pub sizes: Vec<Vec3>,
    pub ious: Vec<f64>,
    /// Probability over classes (background included) for each point.
    pub sem_probs: Vec<Vec<f64>>,
}

impl VotePrediction {
    pub fn len(&self) -> usize {
        self.offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.len();
        if self.sizes.len() != n || self.ious.len() != n || self.sem_probs.len() != n {
            return Err(Error::Schema("prediction arrays differ in length".into()));
        }
        for i in 0..n {
            if self.sizes[i].min_elem() <= 0.0 {
                return Err(Error::Schema(format!("sizes[{i}] must be positive")));
            }
            if !(self.ious[i] > 0.0 && self.ious[i] < 1.0) {
                return Err(Error::Schema(format!("ious[{i}] must lie in (0,1)")));
            }
            let total: f64 = self.sem_probs[i].iter().sum();
            if (total - 1.0).abs() > 1e-6 || self.sem_probs[i].iter().any(|&p| p < 0.0) {
                return Err(Error::Schema(format!("sem_probs[{i}] is not a distribution")));
            }
        }
        Ok(())
    }

    /// Predicted box of point `p` at `position`.
    pub fn predicted_box(&self, p: usize, position: Vec3) -> Result<Aabb> {
        Aabb::new(position + self.offsets[p], self.sizes[p], 0)
    }
}

/// Scales a non-negative score vector to sum to one. An all-zero vector
/// becomes uniform.
pub fn normalize_scores(scores: &[f64]) -> Vec<f64> {
    let total: f64 = scores.iter().map(|s| s.max(0.0)).sum();
    if total <= 0.0 {
        return vec![1.0 / scores.len() as f64; scores.len()];
    }
    scores.iter().map(|s| s.max(0.0) / total).collect()
}

/// Binary cross-entropy with soft target `t` and clamped prediction `q`.
pub fn bce(t: f64, q: f64) -> f64 {
    let q = q.clamp(PROB_EPS, 1.0 - PROB_EPS);
    -(t * q.ln() + (1.0 - t) * (1.0 - q).ln())
}

fn foreground(assoc: &Association) -> Result<Vec<(usize, usize)>> {
    let fg: Vec<_> = assoc.foreground().collect();
    if fg.is_empty() {
        return Err(Error::NoForeground);
    }
    Ok(fg)
}

fn decided(assoc: &Association) -> Result<Vec<usize>> {
    let d: Vec<usize> = (0..assoc.len()).filter(|&p| assoc.tags[p].is_decided()).collect();
    if d.is_empty() {
        return Err(Error::NoDecided);
    }
    Ok(d)
}

fn target<T: Copy>(v: &[Option<T>], p: usize, what: &str) -> Result<T> {
    v[p].ok_or_else(|| Error::Schema(format!("no {what} target for point {p}")))
}

/// Mean L1 distance between predicted and target offsets over foreground
/// points.
pub fn loss_offset(pred: &VotePrediction, targets: &TrainingTargets, assoc: &Association) -> Result<f64> {
    let fg = foreground(assoc)?;
    let mut sum = 0.0;
    for &(p, _) in &fg {
        sum += (target(&targets.offsets, p, "offset")? - pred.offsets[p]).norm_l1();
    }
    Ok(sum / fg.len() as f64)
}

pub fn loss_size(pred: &VotePrediction, targets: &TrainingTargets, assoc: &Association) -> Result<f64> {
    let fg = foreground(assoc)?;
    let mut sum = 0.0;
    for &(p, _) in &fg {
        sum += (target(&targets.sizes, p, "size")? - pred.sizes[p]).norm_l1();
    }
    Ok(sum / fg.len() as f64)
}

/// IoU between each foreground point's predicted box and its associated box.
pub fn score_targets(pred: &VotePrediction, assoc: &Association, scene: &SceneCloud, boxes: &BoxAnnotationSet) -> Result<Vec<(usize, f64)>> {
    foreground(assoc)?
        .into_iter()
        .map(|(p, b)| {
            let predicted = pred.predicted_box(p, scene.positions[p])?;
            Ok((p, predicted.iou(&boxes.boxes[b])))
        })
        .collect()
}

/// Mean BCE between predicted IoU score and the actual IoU of the predicted
/// box with the associated box.
pub fn loss_score(
    pred: &VotePrediction,
    _targets: &TrainingTargets,
    assoc: &Association,
    scene: &SceneCloud,
    boxes: &BoxAnnotationSet,
) -> Result<f64> {
    let t = score_targets(pred, assoc, scene, boxes)?;
    let sum: f64 = t.iter().map(|&(p, iou)| bce(iou, pred.ious[p])).sum();
    Ok(sum / t.len() as f64)
}

/// Mean categorical cross-entropy over decided points.
pub fn loss_sem(pred: &VotePrediction, targets: &TrainingTargets, assoc: &Association) -> Result<f64> {
    let d = decided(assoc)?;
    let mut sum = 0.0;
    for &p in &d {
        let class = target(&targets.semantics, p, "semantic")? as usize;
        sum -= pred.sem_probs[p][class].max(PROB_EPS).ln();
    }
    Ok(sum / d.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LossBreakdown {
    pub offset: f64,
    pub size: f64,
    pub score: f64,
    pub sem: f64,
    pub total: f64,
}

/// Unweighted sum of the four losses.
pub fn loss_total(
    pred: &VotePrediction,
    targets: &TrainingTargets,
    assoc: &Association,
    scene: &SceneCloud,
    boxes: &BoxAnnotationSet,
) -> Result<f64> {
    Ok(loss_breakdown(pred, targets, assoc, scene, boxes)?.total)
}

pub fn loss_breakdown(
    pred: &VotePrediction,
    targets: &TrainingTargets,
    assoc: &Association,
    scene: &SceneCloud,
    boxes: &BoxAnnotationSet,
) -> Result<LossBreakdown> {
    let offset = loss_offset(pred, targets, assoc)?;
    let size = loss_size(pred, targets, assoc)?;
    let score = loss_score(pred, targets, assoc, scene, boxes)?;
    let sem = loss_sem(pred, targets, assoc)?;
    Ok(LossBreakdown {
        offset,
        size,
        score,
        sem,
        total: offset + size + score + sem,
    })
}

/// Analytic (sub-)gradients of each loss with respect to its own prediction
/// head. The score gradient treats the IoU target as fixed. Entries for
/// points that do not enter a loss are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct LossGradients {
    pub offsets: Vec<Vec3>,
    pub sizes: Vec<Vec3>,
    pub ious: Vec<f64>,
    pub sem_probs: Vec<Vec<f64>>,
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

pub fn loss_gradients(
    pred: &VotePrediction,
    targets: &TrainingTargets,
    assoc: &Association,
    scene: &SceneCloud,
    boxes: &BoxAnnotationSet,
) -> Result<LossGradients> {
    let n = pred.len();
    let mut g = LossGradients {
        offsets: vec![Vec3::ZERO; n],
        sizes: vec![Vec3::ZERO; n],
        ious: vec![0.0; n],
        sem_probs: pred.sem_probs.iter().map(|v| vec![0.0; v.len()]).collect(),
    };
    let fg = foreground(assoc)?;
    let inv_f = 1.0 / fg.len() as f64;
    for &(p, _) in &fg {
        // d/dx |t - x| = -sign(t - x)
        let d = target(&targets.offsets, p, "offset")? - pred.offsets[p];
        g.offsets[p] = d.map(sign) * -inv_f;
        let d = target(&targets.sizes, p, "size")? - pred.sizes[p];
        g.sizes[p] = d.map(sign) * -inv_f;
    }
    for (p, t) in score_targets(pred, assoc, scene, boxes)? {
        let q = pred.ious[p];
        if (PROB_EPS..=1.0 - PROB_EPS).contains(&q) {
            g.ious[p] = inv_f * (-t / q + (1.0 - t) / (1.0 - q));
        }
    }
    let d = decided(assoc)?;
    let inv_d = 1.0 / d.len() as f64;
    for &p in &d {
        let class = target(&targets.semantics, p, "semantic")? as usize;
        let q = pred.sem_probs[p][class];
        if q >= PROB_EPS {
            g.sem_probs[p][class] = -inv_d / q;
        }
    }
    Ok(g)
}

/// Predictions that reproduce the targets: exact offsets and sizes, IoU
/// score at the upper clamp, one-hot semantics. Undecided points get
/// `fallback` as offset/size and a uniform class distribution.
pub fn perfect_prediction(targets: &TrainingTargets, assoc: &Association, num_classes: usize) -> VotePrediction {
    let n = assoc.len();
    let mut pred = VotePrediction {
        offsets: vec![Vec3::ZERO; n],
        sizes: vec![Vec3::splat(1.0); n],
        ious: vec![1.0 - PROB_EPS; n],
        sem_probs: vec![vec![1.0 / num_classes as f64; num_classes]; n],
    };
    for (p, tag) in assoc.tags.iter().enumerate() {
        if let Tag::Box(_) = tag {
            pred.offsets[p] = targets.offsets[p].unwrap_or(Vec3::ZERO);
            pred.sizes[p] = targets.sizes[p].unwrap_or(Vec3::splat(1.0));
        }
        if let Some(c) = targets.semantics[p] {
            let mut one_hot = vec![0.0; num_classes];
            one_hot[c as usize] = 1.0;
            pred.sem_probs[p] = one_hot;
        }
    }
    pred
}
