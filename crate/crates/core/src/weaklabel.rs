//! Weak labels from box annotations.
//!
//! A point in no box is background, a point in exactly one box belongs to
//! that box, and a point in several boxes is resolved by an
//! [`AssociationStrategy`]. Training targets, weak instance masks and
//! degraded annotation sets are derived from here.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Aabb, ClassId, Vec3, DEFAULT_MIN_EXTENT};
use crate::instancer::InstanceMask;
use crate::scene::{BoxAnnotationSet, SceneCloud, BACKGROUND};

/// How points inside several boxes are associated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum AssociationStrategy {
    /// Leave them undecided.
    #[value(name = "decided")]
    #[serde(rename = "decided")]
    DecidedOnly,
    /// Box whose center is nearest; ties by smaller volume, then lower index.
    #[value(name = "closest")]
    #[serde(rename = "closest")]
    ClosestBox,
    /// Box with the smallest volume; ties by nearer center, then lower index.
    #[value(name = "smallest")]
    #[serde(rename = "smallest")]
    SmallestBox,
}

impl AssociationStrategy {
    pub const ALL: [AssociationStrategy; 3] = [
        AssociationStrategy::DecidedOnly,
        AssociationStrategy::ClosestBox,
        AssociationStrategy::SmallestBox,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AssociationStrategy::DecidedOnly => "decided",
            AssociationStrategy::ClosestBox => "closest",
            AssociationStrategy::SmallestBox => "smallest",
        }
    }
}

/// Per-point association tag. Serialized as an integer: `-1` background,
/// `-2` undecided, otherwise the box index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "i64", try_from = "i64")]
pub enum Tag {
    Background,
    Box(usize),
    Undecided,
}

impl From<Tag> for i64 {
    fn from(t: Tag) -> i64 {
        match t {
            Tag::Background => -1,
            Tag::Undecided => -2,
            Tag::Box(i) => i as i64,
        }
    }
}

impl TryFrom<i64> for Tag {
    type Error = String;

    fn try_from(v: i64) -> Result<Tag, String> {
        match v {
            -1 => Ok(Tag::Background),
            -2 => Ok(Tag::Undecided),
            i if i >= 0 => Ok(Tag::Box(i as usize)),
            _ => Err(format!("invalid association tag {v}")),
        }
    }
}

impl Tag {
    pub fn box_index(self) -> Option<usize> {
        match self {
            Tag::Box(i) => Some(i),
            _ => None,
        }
    }

    pub fn is_foreground(self) -> bool {
        matches!(self, Tag::Box(_))
    }

    pub fn is_decided(self) -> bool {
        !matches!(self, Tag::Undecided)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Association {
    pub tags: Vec<Tag>,
}

impl Association {
    pub fn len(&self) -> usize {
        self.tags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tags.is_empty()
    }

    /// Indices of points associated with a box.
    pub fn foreground(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.tags
            .iter()
            .enumerate()
            .filter_map(|(p, t)| t.box_index().map(|b| (p, b)))
    }

    pub fn count_undecided(&self) -> usize {
        self.tags.iter().filter(|t| **t == Tag::Undecided).count()
    }
}

/// Uniform grid over the union of the box extents; each cell lists the boxes
/// overlapping it.
struct BoxGrid {
    lo: Vec3,
    hi: Vec3,
    cell: Vec3,
    dims: [usize; 3],
    cells: Vec<Vec<u32>>,
}

impl BoxGrid {
    const MAX_CELLS_PER_AXIS: usize = 64;

    fn new(boxes: &[Aabb]) -> Self {
        let lo = boxes.iter().fold(Vec3::splat(f64::INFINITY), |a, b| a.min(b.min()));
        let hi = boxes.iter().fold(Vec3::splat(f64::NEG_INFINITY), |a, b| a.max(b.max()));
        let extent = hi - lo;
        // roughly one cell per smallest-box extent, capped
        let typical = boxes.iter().map(|b| b.size().min_elem()).fold(f64::INFINITY, f64::min);
        let dims = [0, 1, 2].map(|a| {
            ((extent[a] / typical).ceil() as usize).clamp(1, Self::MAX_CELLS_PER_AXIS)
        });
        let cell = Vec3::new(
            extent.x / dims[0] as f64,
            extent.y / dims[1] as f64,
            extent.z / dims[2] as f64,
        );
        let mut grid = BoxGrid {
            lo,
            hi,
            cell,
            dims,
            cells: vec![Vec::new(); dims[0] * dims[1] * dims[2]],
        };
        for (bi, b) in boxes.iter().enumerate() {
            let a = grid.coords(b.min());
            let z = grid.coords(b.max());
            for i in a[0]..=z[0] {
                for j in a[1]..=z[1] {
                    for k in a[2]..=z[2] {
                        let slot = grid.slot([i, j, k]);
                        grid.cells[slot].push(bi as u32);
                    }
                }
            }
        }
        grid
    }

    fn coords(&self, p: Vec3) -> [usize; 3] {
        [0, 1, 2].map(|a| {
            let v = ((p[a] - self.lo[a]) / self.cell[a]).floor();
            (v.max(0.0) as usize).min(self.dims[a] - 1)
        })
    }

    fn slot(&self, [i, j, k]: [usize; 3]) -> usize {
        (i * self.dims[1] + j) * self.dims[2] + k
    }

    fn candidates(&self, p: Vec3) -> &[u32] {
        let inside = self.lo.x <= p.x
            && p.x <= self.hi.x
            && self.lo.y <= p.y
            && p.y <= self.hi.y
            && self.lo.z <= p.z
            && p.z <= self.hi.z;
        if !inside {
            return &[];
        }
        &self.cells[self.slot(self.coords(p))]
    }
}

/// Associates every scene point with background, one box, or undecided.
pub fn associate(scene: &SceneCloud, boxes: &BoxAnnotationSet, strategy: AssociationStrategy) -> Association {
    associate_points(&scene.positions, &boxes.boxes, strategy)
}

pub fn associate_points(positions: &[Vec3], boxes: &[Aabb], strategy: AssociationStrategy) -> Association {
    if boxes.is_empty() {
        return Association {
            tags: vec![Tag::Background; positions.len()],
        };
    }
    let grid = BoxGrid::new(boxes);
    let mut containing: Vec<usize> = Vec::with_capacity(8);
    let tags = positions
        .iter()
        .map(|&p| {
            containing.clear();
            containing.extend(
                grid.candidates(p)
                    .iter()
                    .map(|&b| b as usize)
                    .filter(|&b| boxes[b].contains(p)),
            );
            resolve(p, &containing, boxes, strategy)
        })
        .collect();
    Association { tags }
}

fn resolve(p: Vec3, containing: &[usize], boxes: &[Aabb], strategy: AssociationStrategy) -> Tag {
    match containing {
        [] => Tag::Background,
        [only] => Tag::Box(*only),
        _ => {
            let dist = |b: usize| p.distance_squared(boxes[b].center());
            let vol = |b: usize| boxes[b].volume();
            let pick = match strategy {
                AssociationStrategy::DecidedOnly => return Tag::Undecided,
                AssociationStrategy::ClosestBox => containing.iter().copied().min_by(|&a, &b| {
                    dist(a)
                        .total_cmp(&dist(b))
                        .then(vol(a).total_cmp(&vol(b)))
                        .then(a.cmp(&b))
                }),
                AssociationStrategy::SmallestBox => containing.iter().copied().min_by(|&a, &b| {
                    vol(a)
                        .total_cmp(&vol(b))
                        .then(dist(a).total_cmp(&dist(b)))
                        .then(a.cmp(&b))
                }),
            };
            Tag::Box(pick.expect("at least two containing boxes"))
        }
    }
}

/// Per-point regression and classification targets.
///
/// `offsets`/`sizes` are set on foreground points only; `semantics` on every
/// decided point (background class for background points).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingTargets {
    pub offsets: Vec<Option<Vec3>>,
    pub sizes: Vec<Option<Vec3>>,
    pub semantics: Vec<Option<ClassId>>,
}

pub fn make_targets(assoc: &Association, scene: &SceneCloud, boxes: &BoxAnnotationSet) -> TrainingTargets {
    make_targets_for_points(assoc, &scene.positions, &boxes.boxes)
}

pub fn make_targets_for_points(assoc: &Association, positions: &[Vec3], boxes: &[Aabb]) -> TrainingTargets {
    let n = assoc.len();
    let mut t = TrainingTargets {
        offsets: vec![None; n],
        sizes: vec![None; n],
        semantics: vec![None; n],
    };
    for (p, tag) in assoc.tags.iter().enumerate() {
        match *tag {
            Tag::Background => t.semantics[p] = Some(BACKGROUND),
            Tag::Box(b) => {
                let bx = &boxes[b];
                t.offsets[p] = Some(bx.center() - positions[p]);
                t.sizes[p] = Some(bx.size());
                t.semantics[p] = Some(bx.label);
            }
            Tag::Undecided => {}
        }
    }
    t
}

/// Share of points tagged undecided (0 for an empty scene).
pub fn undecided_fraction(assoc: &Association) -> f64 {
    if assoc.is_empty() {
        return 0.0;
    }
    assoc.count_undecided() as f64 / assoc.len() as f64
}

/// One mask per box that received at least one point, in box order. Masks
/// carry the box label and score 1.
pub fn labels_to_masks(assoc: &Association, boxes: &BoxAnnotationSet) -> Vec<InstanceMask> {
    let mut per_box: Vec<Vec<usize>> = vec![Vec::new(); boxes.len()];
    for (p, b) in assoc.foreground() {
        per_box[b].push(p);
    }
    per_box
        .into_iter()
        .enumerate()
        .filter(|(_, pts)| !pts.is_empty())
        .map(|(b, pts)| InstanceMask {
            point_indices: pts,
            label: boxes.boxes[b].label,
            score: 1.0,
        })
        .collect()
}

/// Drops boxes and perturbs corners to emulate imperfect annotation.
///
/// Draw order from a single ChaCha8 stream seeded with `seed`: first one
/// uniform draw per input box for the drop decision (dropped iff the draw is
/// below `drop_rate`), then for each surviving box, in order, six uniform
/// draws in `[-corner_jitter_max, corner_jitter_max]` added to
/// min.x, min.y, min.z, max.x, max.y, max.z. Corners are re-sorted and
/// extents padded to 1 mm. With zero jitter, surviving boxes are unchanged.
pub fn degrade_annotations(
    boxes: &BoxAnnotationSet,
    drop_rate: f64,
    corner_jitter_max: f64,
    seed: u64,
) -> Result<BoxAnnotationSet> {
    if !(0.0..=1.0).contains(&drop_rate) {
        return Err(Error::InvalidParam(format!("drop rate must be in [0,1], got {drop_rate}")));
    }
    if !(corner_jitter_max >= 0.0 && corner_jitter_max.is_finite()) {
        return Err(Error::InvalidParam(format!(
            "corner jitter must be a non-negative distance, got {corner_jitter_max}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let keep: Vec<bool> = boxes.boxes.iter().map(|_| rng.gen::<f64>() >= drop_rate).collect();
    let mut out = Vec::new();
    for (b, _) in boxes.boxes.iter().zip(&keep).filter(|(_, &k)| k) {
        if corner_jitter_max == 0.0 {
            out.push(*b);
            continue;
        }
        let j = corner_jitter_max;
        let mut d = [0.0; 6];
        for v in &mut d {
            *v = rng.gen_range(-j..=j);
        }
        let lo = b.min() + Vec3::new(d[0], d[1], d[2]);
        let hi = b.max() + Vec3::new(d[3], d[4], d[5]);
        out.push(Aabb::from_corners(lo, hi, b.label, DEFAULT_MIN_EXTENT)?);
    }
    Ok(BoxAnnotationSet::new(out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cube(c: [f64; 3], s: f64, label: ClassId) -> Aabb {
        Aabb::new(c.into(), Vec3::splat(s), label).unwrap()
    }

    #[test]
    fn eq2_cases() {
        let boxes = [cube([0.0; 3], 1.0, 1)];
        for s in AssociationStrategy::ALL {
            let a = associate_points(&[Vec3::splat(5.0), Vec3::ZERO], &boxes, s);
            assert_eq!(a.tags, vec![Tag::Background, Tag::Box(0)]);
        }
    }

    #[test]
    fn nested_boxes() {
        let boxes = [cube([0.0; 3], 2.0, 1), cube([0.0; 3], 0.5, 2)];
        let p = [Vec3::new(0.1, 0.0, 0.0)];
        assert_eq!(associate_points(&p, &boxes, AssociationStrategy::SmallestBox).tags, vec![Tag::Box(1)]);
        assert_eq!(associate_points(&p, &boxes, AssociationStrategy::DecidedOnly).tags, vec![Tag::Undecided]);
        // equal center distance: closest falls back to volume
        assert_eq!(associate_points(&p, &boxes, AssociationStrategy::ClosestBox).tags, vec![Tag::Box(1)]);
    }

    #[test]
    fn closest_prefers_nearer_center() {
        let boxes = [cube([0.0; 3], 2.0, 1), cube([0.4, 0.0, 0.0], 1.0, 2)];
        let p = [Vec3::new(0.0, 0.0, 0.0)];
        assert_eq!(associate_points(&p, &boxes, AssociationStrategy::ClosestBox).tags, vec![Tag::Box(0)]);
        assert_eq!(associate_points(&p, &boxes, AssociationStrategy::SmallestBox).tags, vec![Tag::Box(1)]);
    }

    #[test]
    fn targets() {
        let boxes = [Aabb::new(Vec3::ZERO, Vec3::new(2.0, 1.0, 3.0), 4).unwrap()];
        let pts = [Vec3::new(1.0, 0.0, 0.0), Vec3::new(0.0, 0.2, 0.0), Vec3::splat(9.0)];
        let a = associate_points(&pts, &boxes, AssociationStrategy::DecidedOnly);
        let t = make_targets_for_points(&a, &pts, &boxes);
        assert_eq!(t.offsets[0], Some(Vec3::new(-1.0, 0.0, 0.0)));
        assert_eq!(t.sizes[0], Some(Vec3::new(2.0, 1.0, 3.0)));
        assert_eq!(t.sizes[1], Some(Vec3::new(2.0, 1.0, 3.0)));
        assert_eq!(t.semantics[0], Some(4));
        assert_eq!((t.offsets[2], t.sizes[2], t.semantics[2]), (None, None, Some(BACKGROUND)));
    }

    #[test]
    fn undecided_fractions() {
        let boxes = [cube([0.0; 3], 1.0, 1), cube([5.0, 0.0, 0.0], 1.0, 1)];
        let pts: Vec<Vec3> = (0..10).map(|i| Vec3::new(i as f64 * 0.1, 0.0, 0.0)).collect();
        assert_eq!(undecided_fraction(&associate_points(&pts, &boxes, AssociationStrategy::DecidedOnly)), 0.0);

        let same = [cube([0.0; 3], 10.0, 1), cube([0.0; 3], 10.0, 2)];
        assert_eq!(undecided_fraction(&associate_points(&pts, &same, AssociationStrategy::DecidedOnly)), 1.0);

    }

    #[test]
    fn two_of_ten_undecided() {
        // A spans [-1, 1], B spans [0.8, 2.8] along x; points at x = 0.05, 0.15, ..., 0.95.
        // Only 0.85 and 0.95 fall in both.
        let boxes = [cube([0.0; 3], 2.0, 1), cube([1.8, 0.0, 0.0], 2.0, 2)];
        let pts: Vec<Vec3> = (0..10).map(|i| Vec3::new(i as f64 * 0.1 + 0.05, 0.0, 0.0)).collect();
        let a = associate_points(&pts, &boxes, AssociationStrategy::DecidedOnly);
        assert_eq!(undecided_fraction(&a), 0.2);
    }

    #[test]
    fn masks_from_labels() {
        let boxes = BoxAnnotationSet::new(vec![cube([0.0; 3], 1.0, 3)]);
        let pts: Vec<Vec3> = (0..8).map(|i| Vec3::new(i as f64 * 0.2 - 0.4, 0.0, 0.0)).collect();
        // x = -0.4 .. 1.0; inside [-0.5, 0.5]: -0.4, -0.2, 0, 0.2, 0.4
        let a = associate_points(&pts, &boxes.boxes, AssociationStrategy::DecidedOnly);
        let m = labels_to_masks(&a, &boxes);
        assert_eq!(m.len(), 1);
        assert_eq!(m[0].point_indices, vec![0, 1, 2, 3, 4]);
        assert_eq!((m[0].label, m[0].score), (3, 1.0));

        let empty = BoxAnnotationSet::default();
        assert!(labels_to_masks(&associate_points(&pts, &[], AssociationStrategy::DecidedOnly), &empty).is_empty());
    }

    #[test]
    fn nested_masks() {
        let boxes = BoxAnnotationSet::new(vec![cube([0.0; 3], 2.0, 1), cube([0.0; 3], 0.5, 2)]);
        // x = -0.9, -0.6, -0.3, 0, 0.3 ... ; inner [-0.25, 0.25] holds only x = 0
        let pts: Vec<Vec3> = (0..7).map(|i| Vec3::new(i as f64 * 0.3 - 0.9, 0.0, 0.0)).collect();
        let a = associate_points(&pts, &boxes.boxes, AssociationStrategy::SmallestBox);
        let m = labels_to_masks(&a, &boxes);
        assert_eq!(m.len(), 2);
        assert_eq!(m[0].point_indices, vec![0, 1, 2, 4, 5, 6]);
        assert_eq!(m[1].point_indices, vec![3]);
    }

    #[test]
    fn degrade_extremes() {
        let boxes = BoxAnnotationSet::new(vec![cube([0.0; 3], 1.0, 1), cube([2.0, 0.0, 0.0], 0.5, 2)]);
        assert_eq!(degrade_annotations(&boxes, 0.0, 0.0, 1).unwrap(), boxes);
        assert!(degrade_annotations(&boxes, 1.0, 0.0, 1).unwrap().is_empty());
        assert!(degrade_annotations(&boxes, 1.5, 0.0, 1).is_err());
        assert!(degrade_annotations(&boxes, 0.0, -0.1, 1).is_err());
        assert_eq!(
            degrade_annotations(&boxes, 0.5, 0.1, 42).unwrap(),
            degrade_annotations(&boxes, 0.5, 0.1, 42).unwrap()
        );
    }

    #[test]
    fn jitter_stays_bounded() {
        let boxes = BoxAnnotationSet::new(vec![
            cube([0.0; 3], 1.0, 1),
            Aabb::new(Vec3::new(3.0, 1.0, 0.5), Vec3::new(0.5, 2.0, 0.8), 2).unwrap(),
        ]);
        for seed in 0..1000 {
            let d = degrade_annotations(&boxes, 0.0, 0.2, seed).unwrap();
            assert_eq!(d.len(), 2);
            for (a, b) in boxes.boxes.iter().zip(&d.boxes) {
                for k in 0..3 {
                    assert!((a.min()[k] - b.min()[k]).abs() <= 0.2 + 1e-12);
                    assert!((a.max()[k] - b.max()[k]).abs() <= 0.2 + 1e-12);
                }
            }
        }
    }

    fn arb_boxes(overlap_free: bool) -> impl Strategy<Value = Vec<Aabb>> {
        prop::collection::vec((prop::array::uniform3(-3.0f64..3.0), prop::array::uniform3(0.1f64..2.0), 1u32..4), 0..6)
            .prop_map(move |v| {
                let mut out: Vec<Aabb> = Vec::new();
                for (c, s, l) in v {
                    let b = Aabb::new(c.into(), s.into(), l).unwrap();
                    if !overlap_free || out.iter().all(|o| !boxes_touch(o, &b)) {
                        out.push(b);
                    }
                }
                out
            })
    }

    fn boxes_touch(a: &Aabb, b: &Aabb) -> bool {
        (0..3).all(|k| a.min()[k] <= b.max()[k] && b.min()[k] <= a.max()[k])
    }

    fn arb_points() -> impl Strategy<Value = Vec<Vec3>> {
        prop::collection::vec(prop::array::uniform3(-4.0f64..4.0), 0..200)
            .prop_map(|v| v.into_iter().map(Vec3::from).collect())
    }

    proptest! {
        #[test]
        fn soundness_and_completeness(boxes in arb_boxes(false), pts in arb_points()) {
            for s in AssociationStrategy::ALL {
                let a = associate_points(&pts, &boxes, s);
                prop_assert_eq!(a.len(), pts.len());
                for (p, tag) in pts.iter().zip(&a.tags) {
                    let n_in = boxes.iter().filter(|b| b.contains(*p)).count();
                    match *tag {
                        Tag::Background => prop_assert_eq!(n_in, 0),
                        Tag::Box(i) => prop_assert!(boxes[i].contains(*p)),
                        Tag::Undecided => prop_assert!(s == AssociationStrategy::DecidedOnly && n_in >= 2),
                    }
                    if n_in == 0 {
                        prop_assert_eq!(*tag, Tag::Background);
                    }
                }
                let masks = labels_to_masks(&a, &BoxAnnotationSet::new(boxes.clone()));
                let mut covered: Vec<usize> = masks.iter().flat_map(|m| m.point_indices.iter().copied()).collect();
                let total = covered.len();
                covered.sort_unstable();
                covered.dedup();
                prop_assert_eq!(covered.len(), total);
                let fg: Vec<usize> = a.foreground().map(|(p, _)| p).collect();
                prop_assert_eq!(covered, fg);
            }
        }

        #[test]
        fn strategies_agree_without_overlap(boxes in arb_boxes(true), pts in arb_points()) {
            let d = associate_points(&pts, &boxes, AssociationStrategy::DecidedOnly);
            prop_assert_eq!(&d, &associate_points(&pts, &boxes, AssociationStrategy::ClosestBox));
            prop_assert_eq!(&d, &associate_points(&pts, &boxes, AssociationStrategy::SmallestBox));
        }

        #[test]
        fn smallest_picks_nested_inner(c in prop::array::uniform3(-2.0f64..2.0), s in 0.2f64..2.0, k in 0.1f64..0.9, u in prop::array::uniform3(-0.5f64..0.5)) {
            let outer = Aabb::new(c.into(), Vec3::splat(s), 1).unwrap();
            let inner = Aabb::new(c.into(), Vec3::splat(s * k), 2).unwrap();
            let p = Vec3::from(c) + Vec3::from(u) * (s * k);
            let a = associate_points(&[p], &[outer, inner], AssociationStrategy::SmallestBox);
            prop_assert_eq!(a.tags[0], Tag::Box(1));
        }
    }
}
