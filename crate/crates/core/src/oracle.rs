//! Synthetic scenes with ground truth, and a noisy vote simulator standing in
//! for a trained network.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::clustering::{Vote, VoteSet};
use crate::error::{Error, Result};
use crate::geometry::{fit_aabb, Aabb, ClassId, Vec3};
use crate::losses::PROB_EPS;
use crate::scene::{BoxAnnotationSet, SceneCloud, BACKGROUND, BACKGROUND_NAME, NO_INSTANCE};
use crate::weaklabel::{associate_points, Association, AssociationStrategy, Tag};

const PLACEMENT_RETRIES: usize = 2000;
const GAP: f64 = 0.1;
const LIFT: f64 = 0.02;
const SEGMENT_CELL: f64 = 0.25;
/// Edge length of the box voted by background points.
const BACKGROUND_VOTE_SIZE: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SizeRange {
    pub name: String,
    pub min: Vec3,
    pub max: Vec3,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OverlapMode {
    /// Pairwise separated objects.
    None,
    /// Objects come in pairs, the second strictly inside the first.
    Nested,
    /// Same-class pairs of a large and a small object whose boxes
    /// interpenetrate, like a chair pushed under a table.
    Touching,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneGenParams {
    /// Room spans `[0, room_extent]` on each axis; the floor is `z = 0`.
    pub room_extent: Vec3,
    pub num_objects: usize,
    /// Class `i + 1` is `size_ranges[i]`; class 0 is background.
    pub size_ranges: Vec<SizeRange>,
    pub points_per_object: usize,
    pub background_points: usize,
    pub overlap_mode: OverlapMode,
    pub seed: u64,
}

impl Default for SceneGenParams {
    fn default() -> Self {
        let range = |name: &str, min: [f64; 3], max: [f64; 3]| SizeRange {
            name: name.into(),
            min: min.into(),
            max: max.into(),
        };
        Self {
            room_extent: Vec3::new(10.0, 10.0, 3.0),
            num_objects: 10,
            size_ranges: vec![
                range("chair", [0.4, 0.4, 0.7], [0.6, 0.6, 1.0]),
                range("table", [1.0, 0.6, 0.7], [1.8, 1.0, 0.8]),
                range("cabinet", [0.4, 0.8, 0.8], [0.6, 1.4, 1.6]),
                range("sofa", [1.5, 0.8, 0.7], [2.2, 1.0, 0.9]),
            ],
            points_per_object: 2000,
            background_points: 5000,
            overlap_mode: OverlapMode::None,
            seed: 0,
        }
    }
}

impl SceneGenParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.room_extent.is_finite() && self.room_extent.min_elem() > 0.0) {
            return Err(Error::InvalidParam("room_extent must be positive".into()));
        }
        if self.num_objects > 0 && self.size_ranges.is_empty() {
            return Err(Error::InvalidParam("size_ranges is empty".into()));
        }
        if self.num_objects > 0 && self.points_per_object == 0 {
            return Err(Error::InvalidParam("points_per_object must be positive".into()));
        }
        for r in &self.size_ranges {
            if r.name == BACKGROUND_NAME {
                return Err(Error::InvalidParam(format!("class name \"{BACKGROUND_NAME}\" is reserved")));
            }
            if !(r.min.min_elem() > 0.0 && (r.max - r.min).min_elem() >= 0.0 && r.max.is_finite()) {
                return Err(Error::InvalidParam(format!("size range of {} is invalid", r.name)));
            }
        }
        Ok(())
    }

    pub fn class_names(&self) -> Vec<String> {
        std::iter::once(BACKGROUND_NAME.to_string())
            .chain(self.size_ranges.iter().map(|r| r.name.clone()))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VoteNoise {
    pub center_sigma: f64,
    /// Standard deviation of the log of the multiplicative size factor.
    pub size_sigma: f64,
    pub score_noise_sigma: f64,
    pub sem_flip_prob: f64,
    pub seed: u64,
}

impl VoteNoise {
    pub fn zero(seed: u64) -> Self {
        Self {
            center_sigma: 0.0,
            size_sigma: 0.0,
            score_noise_sigma: 0.0,
            sem_flip_prob: 0.0,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("center_sigma", self.center_sigma),
            ("size_sigma", self.size_sigma),
            ("score_noise_sigma", self.score_noise_sigma),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidParam(format!("{name} must be a finite value >= 0")));
            }
        }
        if !(0.0..=1.0).contains(&self.sem_flip_prob) {
            return Err(Error::InvalidParam("sem_flip_prob must be in [0,1]".into()));
        }
        Ok(())
    }
}

/// Seed of the `index`-th scene derived from a base seed (SplitMix64 step).
pub fn derive_seed(base: u64, index: u64) -> u64 {
    let mut z = base.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// One object to sample: its nominal box and a region its points avoid.
struct Blueprint {
    nominal: Aabb,
    class: ClassId,
    hole: Option<Aabb>,
}

fn uniform_in(rng: &mut ChaCha8Rng, lo: Vec3, hi: Vec3) -> Vec3 {
    let mut axis = |a: usize| if hi[a] > lo[a] { rng.gen_range(lo[a]..hi[a]) } else { lo[a] };
    Vec3::new(axis(0), axis(1), axis(2))
}

fn sample_size(rng: &mut ChaCha8Rng, r: &SizeRange) -> Vec3 {
    uniform_in(rng, r.min, r.max)
}

/// Object groups as (footprint size, blueprints relative to a footprint whose
/// min corner is the origin).
fn design_groups(params: &SceneGenParams, rng: &mut ChaCha8Rng) -> Result<Vec<(Vec3, Vec<Blueprint>)>> {
    let classes = params.size_ranges.len() as ClassId;
    let mut groups = Vec::new();
    let mut remaining = params.num_objects;
    while remaining > 0 {
        let class = rng.gen_range(1..=classes);
        let size = sample_size(rng, &params.size_ranges[class as usize - 1]);
        let outer = Aabb::from_corners(Vec3::ZERO, size, class, 0.0)?;
        if remaining == 1 || params.overlap_mode == OverlapMode::None {
            groups.push((size, vec![Blueprint { nominal: outer, class, hole: None }]));
            remaining -= 1;
            continue;
        }
        let inner = match params.overlap_mode {
            OverlapMode::Nested => {
                let inner_class = rng.gen_range(1..=classes);
                let want = sample_size(rng, &params.size_ranges[inner_class as usize - 1]);
                let inner_size = want.min(size * 0.5);
                let margin = size * 0.1;
                let lo = uniform_in(rng, margin, size - margin - inner_size);
                Aabb::from_corners(lo, lo + inner_size, inner_class, 0.0)?
            }
            OverlapMode::Touching => {
                let f = Vec3::new(rng.gen_range(0.4..0.6), rng.gen_range(0.4..0.6), rng.gen_range(1.1..1.3));
                let inner_size = size.mul_elem(f);
                let off = Vec3::new(
                    rng.gen_range(-0.08..0.08) * size.x,
                    rng.gen_range(-0.08..0.08) * size.y,
                    0.0,
                );
                let lo = Vec3::new(
                    0.5 * (size.x - inner_size.x) + off.x,
                    0.5 * (size.y - inner_size.y) + off.y,
                    0.0,
                );
                Aabb::from_corners(lo, lo + inner_size, class, 0.0)?
            }
            OverlapMode::None => unreachable!(),
        };
        let footprint = size.max(inner.max());
        groups.push((
            footprint,
            vec![
                Blueprint { nominal: outer, class, hole: Some(inner) },
                Blueprint { nominal: inner, class: inner.label, hole: None },
            ],
        ));
        remaining -= 2;
    }
    Ok(groups)
}

/// Generates a scene with ground-truth instances and its annotation boxes.
///
/// Object points are uniform inside their nominal boxes; each annotation box
/// is the box fitted to its object's points. Background points lie on the
/// floor and on the two walls through the origin, outside every box.
pub fn gen_scene(params: &SceneGenParams) -> Result<(SceneCloud, BoxAnnotationSet)> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let groups = design_groups(params, &mut rng)?;

    // place group footprints on the floor, pairwise separated by GAP
    let room = params.room_extent;
    let mut placed: Vec<Aabb> = Vec::new();
    let mut blueprints: Vec<Blueprint> = Vec::new();
    for (gi, (footprint, members)) in groups.into_iter().enumerate() {
        let lo_bound = Vec3::new(GAP, GAP, LIFT);
        let hi_bound = room - footprint - Vec3::new(GAP, GAP, GAP);
        if (hi_bound - lo_bound).min_elem() < 0.0 {
            return Err(Error::PlacementFailed(format!("object group {gi} does not fit in the room")));
        }
        let mut origin = None;
        for _ in 0..PLACEMENT_RETRIES {
            let mut o = uniform_in(&mut rng, lo_bound, hi_bound);
            o.z = LIFT;
            let candidate = Aabb::from_corners(o, o + footprint, 0, 0.0)?;
            let clear = placed.iter().all(|p| {
                (0..2).any(|a| candidate.min()[a] > p.max()[a] + GAP || p.min()[a] > candidate.max()[a] + GAP)
            });
            if clear {
                origin = Some(o);
                placed.push(candidate);
                break;
            }
        }
        let o = origin.ok_or_else(|| {
            Error::PlacementFailed(format!("no free spot for object group {gi} after {PLACEMENT_RETRIES} tries"))
        })?;
        for b in members {
            blueprints.push(Blueprint {
                nominal: b.nominal.translated(o),
                class: b.class,
                hole: b.hole.map(|h| h.translated(o)),
            });
        }
    }

    let mut positions = Vec::new();
    let mut instance_ids = Vec::new();
    let mut semantics = Vec::new();
    let mut boxes = Vec::new();
    for (id, b) in blueprints.iter().enumerate() {
        let start = positions.len();
        while positions.len() - start < params.points_per_object {
            let p = uniform_in(&mut rng, b.nominal.min(), b.nominal.max());
            if b.hole.is_some_and(|h| h.contains(p)) {
                continue;
            }
            positions.push(p);
        }
        boxes.push(fit_aabb(&positions[start..], b.class)?);
        instance_ids.extend(std::iter::repeat(id as i64).take(params.points_per_object));
        semantics.extend(std::iter::repeat(b.class).take(params.points_per_object));
    }

    let mut drawn = 0;
    let mut attempts = 0usize;
    while drawn < params.background_points {
        attempts += 1;
        if attempts > PLACEMENT_RETRIES.max(100 * params.background_points) {
            return Err(Error::PlacementFailed("background points cannot avoid the objects".into()));
        }
        let u: f64 = rng.gen();
        let mut p = uniform_in(&mut rng, Vec3::ZERO, room);
        if u < 0.6 {
            p.z = 0.0;
        } else if u < 0.8 {
            p.x = 0.0;
        } else {
            p.y = 0.0;
        }
        if boxes.iter().any(|b: &Aabb| b.contains(p)) {
            continue;
        }
        positions.push(p);
        instance_ids.push(NO_INSTANCE);
        semantics.push(BACKGROUND);
        drawn += 1;
    }

    let segment_ids = segment_grid(&positions, &instance_ids);
    let scene = SceneCloud {
        class_names: params.class_names(),
        positions,
        segment_ids: Some(segment_ids),
        gt_instance_ids: Some(instance_ids),
        gt_semantics: Some(semantics),
        ..Default::default()
    };
    scene.validate()?;
    Ok((scene, BoxAnnotationSet::new(boxes)))
}

/// Over-segmentation stand-in: points sharing an instance and a grid cell
/// form a segment. Ids are assigned in order of first occurrence.
fn segment_grid(positions: &[Vec3], instance_ids: &[i64]) -> Vec<i64> {
    let mut ids = std::collections::HashMap::new();
    positions
        .iter()
        .zip(instance_ids)
        .map(|(p, &inst)| {
            let cell = p.to_array().map(|v| (v / SEGMENT_CELL).floor() as i64);
            let next = ids.len() as i64;
            *ids.entry((inst, cell)).or_insert(next)
        })
        .collect()
}

/// Simulates per-point box votes from the association.
///
/// Foreground points vote their associated box with Gaussian center noise
/// and log-normal size noise; the score is the perturbed box's IoU with the
/// true box plus Gaussian noise, clamped to `[1e-7, 1 - 1e-7]`. Undecided
/// points vote as under the smallest-box strategy. Background points vote a
/// small box around themselves with background semantics.
pub fn simulate_votes(scene: &SceneCloud, boxes: &BoxAnnotationSet, assoc: &Association, noise: &VoteNoise) -> Result<VoteSet> {
    noise.validate()?;
    if assoc.len() != scene.len() {
        return Err(Error::InvalidParam(format!(
            "association covers {} points, scene has {}",
            assoc.len(),
            scene.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
    let center_noise = Normal::new(0.0, noise.center_sigma).map_err(|e| Error::InvalidParam(e.to_string()))?;
    let size_noise = Normal::new(0.0, noise.size_sigma).map_err(|e| Error::InvalidParam(e.to_string()))?;
    let score_noise = Normal::new(0.0, noise.score_noise_sigma).map_err(|e| Error::InvalidParam(e.to_string()))?;
    let num_fg_classes = scene.num_classes().saturating_sub(1) as ClassId;

    let undecided: Vec<usize> = (0..assoc.len()).filter(|&p| assoc.tags[p] == Tag::Undecided).collect();
    let undecided_pos: Vec<Vec3> = undecided.iter().map(|&p| scene.positions[p]).collect();
    let resolved = associate_points(&undecided_pos, &boxes.boxes, AssociationStrategy::SmallestBox);
    let mut owner: Vec<Option<usize>> = assoc.tags.iter().map(|t| t.box_index()).collect();
    for (k, &p) in undecided.iter().enumerate() {
        owner[p] = resolved.tags[k].box_index();
    }

    let mut votes = Vec::with_capacity(scene.len());
    for (p, &pos) in scene.positions.iter().enumerate() {
        let d = Vec3::new(center_noise.sample(&mut rng), center_noise.sample(&mut rng), center_noise.sample(&mut rng));
        let f = Vec3::new(size_noise.sample(&mut rng), size_noise.sample(&mut rng), size_noise.sample(&mut rng)).map(f64::exp);
        let e = score_noise.sample(&mut rng);
        let flip: f64 = rng.gen();
        let other: ClassId = if num_fg_classes > 1 { rng.gen_range(1..num_fg_classes) } else { 0 };
        let vote = match owner[p] {
            None => {
                let bbox = Aabb::new(pos + d, Vec3::splat(BACKGROUND_VOTE_SIZE).mul_elem(f), BACKGROUND)?;
                let score = (0.5 + e).clamp(PROB_EPS, 1.0 - PROB_EPS);
                Vote::new(bbox, score, BACKGROUND)
            }
            Some(b) => {
                let truth = boxes.boxes[b];
                let bbox = if d == Vec3::ZERO && f == Vec3::splat(1.0) {
                    truth
                } else {
                    Aabb::new(truth.center() + d, truth.size().mul_elem(f), truth.label)?
                };
                let score = (bbox.iou(&truth) + e).clamp(PROB_EPS, 1.0 - PROB_EPS);
                let mut sem = truth.label;
                if flip < noise.sem_flip_prob && num_fg_classes > 1 {
                    // uniform over the other foreground classes
                    sem = if other >= sem { other + 1 } else { other };
                }
                Vote::new(bbox, score, sem)
            }
        };
        votes.push(vote);
    }
    Ok(VoteSet::per_point(votes))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weaklabel::{associate, undecided_fraction};

    fn params(n: usize, mode: OverlapMode, seed: u64) -> SceneGenParams {
        SceneGenParams {
            num_objects: n,
            points_per_object: 300,
            background_points: 500,
            overlap_mode: mode,
            seed,
            ..Default::default()
        }
    }

    #[test]
    fn empty_room() {
        let (scene, boxes) = gen_scene(&params(0, OverlapMode::None, 1)).unwrap();
        assert!(boxes.is_empty());
        assert_eq!(scene.len(), 500);
        assert!(scene.gt_instances().is_empty());
    }

    #[test]
    fn separated_objects_have_no_undecided_points() {
        let (scene, boxes) = gen_scene(&params(2, OverlapMode::None, 2)).unwrap();
        assert_eq!(boxes.len(), 2);
        assert_eq!(boxes.boxes[0].iou(&boxes.boxes[1]), 0.0);
        let assoc = associate(&scene, &boxes, AssociationStrategy::DecidedOnly);
        assert_eq!(undecided_fraction(&assoc), 0.0);
        // background stays background
        let ids = scene.gt_instance_ids.as_ref().unwrap();
        for (p, tag) in assoc.tags.iter().enumerate() {
            assert_eq!(tag.box_index().map(|b| b as i64).unwrap_or(-1), ids[p]);
        }
    }

    #[test]
    fn boxes_are_fitted_to_object_points() {
        let (scene, boxes) = gen_scene(&params(6, OverlapMode::Touching, 3)).unwrap();
        for (id, pts, class) in scene.gt_instances() {
            let pos: Vec<Vec3> = pts.iter().map(|&p| scene.positions[p]).collect();
            let fitted = fit_aabb(&pos, class).unwrap();
            assert_eq!(fitted, boxes.boxes[id as usize]);
        }
    }

    #[test]
    fn nested_mode_has_points_in_two_boxes() {
        let (scene, boxes) = gen_scene(&params(4, OverlapMode::Nested, 4)).unwrap();
        let doubly = scene
            .positions
            .iter()
            .filter(|&&p| boxes.boxes.iter().filter(|b| b.contains(p)).count() >= 2)
            .count();
        assert!(doubly >= 1);
        // the inner box sits strictly inside the outer one
        let (outer, inner) = (boxes.boxes[0], boxes.boxes[1]);
        assert!((inner.min() - outer.min()).min_elem() > 0.0);
        assert!((outer.max() - inner.max()).min_elem() > 0.0);
    }

    #[test]
    fn touching_pairs_share_class_and_intersect() {
        let (_, boxes) = gen_scene(&params(4, OverlapMode::Touching, 5)).unwrap();
        for pair in boxes.boxes.chunks(2) {
            assert_eq!(pair[0].label, pair[1].label);
            let iou = pair[0].iou(&pair[1]);
            assert!(iou > 0.0 && iou < 0.3, "iou {iou}");
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let p = params(5, OverlapMode::Nested, 9);
        assert_eq!(gen_scene(&p).unwrap(), gen_scene(&p).unwrap());
        let mut q = p.clone();
        q.seed = 10;
        assert_ne!(gen_scene(&p).unwrap().0.positions, gen_scene(&q).unwrap().0.positions);
    }

    #[test]
    fn crowded_room_fails_placement() {
        let mut p = params(50, OverlapMode::None, 1);
        p.room_extent = Vec3::new(3.0, 3.0, 3.0);
        assert!(matches!(gen_scene(&p), Err(Error::PlacementFailed(_))));
    }

    #[test]
    fn noiseless_votes_are_exact() {
        let (scene, boxes) = gen_scene(&params(4, OverlapMode::Nested, 6)).unwrap();
        let assoc = associate(&scene, &boxes, AssociationStrategy::DecidedOnly);
        let votes = simulate_votes(&scene, &boxes, &assoc, &VoteNoise::zero(1)).unwrap();
        let smallest = associate(&scene, &boxes, AssociationStrategy::SmallestBox);
        for (p, v) in votes.votes.iter().enumerate() {
            match smallest.tags[p] {
                Tag::Box(b) => {
                    assert_eq!(v.bbox, boxes.boxes[b]);
                    assert_eq!(v.score, 1.0 - PROB_EPS);
                    assert_eq!(v.semantic, boxes.boxes[b].label);
                }
                _ => assert_eq!(v.semantic, BACKGROUND),
            }
        }
    }

    #[test]
    fn full_flip_never_keeps_class() {
        let (scene, boxes) = gen_scene(&params(6, OverlapMode::None, 7)).unwrap();
        let assoc = associate(&scene, &boxes, AssociationStrategy::DecidedOnly);
        let noise = VoteNoise { sem_flip_prob: 1.0, ..VoteNoise::zero(3) };
        let votes = simulate_votes(&scene, &boxes, &assoc, &noise).unwrap();
        let mut seen = std::collections::BTreeSet::new();
        for (p, b) in assoc.foreground() {
            let sem = votes.votes[p].semantic;
            assert_ne!(sem, boxes.boxes[b].label);
            assert_ne!(sem, BACKGROUND);
            seen.insert(sem);
        }
        assert!(seen.len() >= 2);
    }

    #[test]
    fn center_noise_matches_half_normal_mean() {
        let mut p = params(10, OverlapMode::None, 8);
        p.points_per_object = 1000;
        let (scene, boxes) = gen_scene(&p).unwrap();
        let assoc = associate(&scene, &boxes, AssociationStrategy::DecidedOnly);
        let sigma = 0.05;
        let noise = VoteNoise { center_sigma: sigma, ..VoteNoise::zero(4) };
        let votes = simulate_votes(&scene, &boxes, &assoc, &noise).unwrap();
        let fg: Vec<(usize, usize)> = assoc.foreground().collect();
        assert!(fg.len() >= 10_000);
        let total: f64 = fg
            .iter()
            .map(|&(p, b)| (votes.votes[p].center() - boxes.boxes[b].center()).norm_l1())
            .sum();
        let per_axis = total / (3 * fg.len()) as f64;
        let expected = sigma * (2.0 / std::f64::consts::PI).sqrt();
        assert!((per_axis / expected - 1.0).abs() < 0.1, "{per_axis} vs {expected}");
    }

    #[test]
    fn simulation_is_deterministic() {
        let (scene, boxes) = gen_scene(&params(4, OverlapMode::Touching, 2)).unwrap();
        let assoc = associate(&scene, &boxes, AssociationStrategy::DecidedOnly);
        let noise = VoteNoise {
            center_sigma: 0.05,
            size_sigma: 0.05,
            score_noise_sigma: 0.02,
            sem_flip_prob: 0.1,
            seed: 5,
        };
        let a = simulate_votes(&scene, &boxes, &assoc, &noise).unwrap();
        let b = simulate_votes(&scene, &boxes, &assoc, &noise).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn params_round_trip_json() {
        let p = params(3, OverlapMode::Touching, 1);
        let s = serde_json::to_string(&p).unwrap();
        assert!(s.contains("\"overlap_mode\":\"touching\""));
        assert_eq!(serde_json::from_str::<SceneGenParams>(&s).unwrap(), p);
        assert!(serde_json::from_str::<VoteNoise>(r#"{"center_sigma":0.1}"#).is_err());
    }

    #[test]
    fn derived_seeds_differ() {
        let s: std::collections::HashSet<u64> = (0..100).map(|i| derive_seed(7, i)).collect();
        assert_eq!(s.len(), 100);
    }
}
