//! Axis-aligned box primitives.
//!
//! Boxes are stored as center and size. Every overlap computation works on
//! the min/max corner intervals so that `iou(a, a)` is exactly one and the
//! result does not depend on the order of subtraction chains.

use std::ops::{Add, AddAssign, Div, Index, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Semantic class id. Class 0 is the reserved background class.
pub type ClassId = u32;

/// Minimum extent used to pad degenerate fitted boxes (1 mm).
pub const DEFAULT_MIN_EXTENT: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3::new(0.0, 0.0, 0.0);

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub const fn splat(v: f64) -> Self {
        Self::new(v, v, v)
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn dot(self, o: Vec3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn norm_l1(self) -> f64 {
        self.x.abs() + self.y.abs() + self.z.abs()
    }

    pub fn distance(self, o: Vec3) -> f64 {
        (self - o).norm()
    }

    pub fn distance_squared(self, o: Vec3) -> f64 {
        let d = self - o;
        d.dot(d)
    }

    pub fn min(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x.min(o.x), self.y.min(o.y), self.z.min(o.z))
    }

    pub fn max(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x.max(o.x), self.y.max(o.y), self.z.max(o.z))
    }

    pub fn mul_elem(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x * o.x, self.y * o.y, self.z * o.z)
    }

    pub fn map(self, f: impl Fn(f64) -> f64) -> Vec3 {
        Vec3::new(f(self.x), f(self.y), f(self.z))
    }

    pub fn min_elem(self) -> f64 {
        self.x.min(self.y).min(self.z)
    }

    pub fn max_elem(self) -> f64 {
        self.x.max(self.y).max(self.z)
    }
}

impl From<[f64; 3]> for Vec3 {
    fn from(a: [f64; 3]) -> Self {
        Vec3::new(a[0], a[1], a[2])
    }
}

impl From<Vec3> for [f64; 3] {
    fn from(v: Vec3) -> Self {
        v.to_array()
    }
}

impl Index<usize> for Vec3 {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        match i {
            0 => &self.x,
            1 => &self.y,
            2 => &self.z,
            _ => panic!("Vec3 index {i} out of range"),
        }
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl AddAssign for Vec3 {
    fn add_assign(&mut self, o: Vec3) {
        *self = *self + o;
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, k: f64) -> Vec3 {
        Vec3::new(self.x * k, self.y * k, self.z * k)
    }
}

impl Div<f64> for Vec3 {
    type Output = Vec3;
    fn div(self, k: f64) -> Vec3 {
        Vec3::new(self.x / k, self.y / k, self.z / k)
    }
}

/// Axis-aligned box with a semantic label.
///
/// Stored as its min/max corners; center and size (width, height, depth) are
/// derived. Serialized as `{"center": [..], "size": [..], "label": n}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "AabbRecord", into = "AabbRecord")]
pub struct Aabb {
    min: Vec3,
    max: Vec3,
    pub label: ClassId,
}

#[derive(Serialize, Deserialize)]
struct AabbRecord {
    center: Vec3,
    size: Vec3,
    label: ClassId,
}

impl TryFrom<AabbRecord> for Aabb {
    type Error = Error;

    fn try_from(r: AabbRecord) -> Result<Self> {
        Aabb::new(r.center, r.size, r.label)
    }
}

impl From<Aabb> for AabbRecord {
    fn from(b: Aabb) -> Self {
        AabbRecord {
            center: b.center(),
            size: b.size(),
            label: b.label,
        }
    }
}

impl Aabb {
    pub fn new(center: Vec3, size: Vec3, label: ClassId) -> Result<Self> {
        if !center.is_finite() || !size.is_finite() {
            return Err(Error::InvalidBox(format!(
                "non-finite center {:?} or size {:?}",
                center.to_array(),
                size.to_array()
            )));
        }
        if size.min_elem() <= 0.0 {
            return Err(Error::InvalidBox(format!(
                "size must be positive, got {:?}",
                size.to_array()
            )));
        }
        let half = size * 0.5;
        Self::checked(center - half, center + half, label)
    }

    /// Box spanning the given corners. Extents below `min_extent` are padded
    /// symmetrically around their midpoint.
    pub fn from_corners(a: Vec3, b: Vec3, label: ClassId, min_extent: f64) -> Result<Self> {
        let mut lo = a.min(b);
        let mut hi = a.max(b);
        for axis in 0..3 {
            if hi[axis] - lo[axis] < min_extent {
                let mid = 0.5 * (lo[axis] + hi[axis]);
                set_axis(&mut lo, axis, mid - 0.5 * min_extent);
                set_axis(&mut hi, axis, mid + 0.5 * min_extent);
            }
        }
        Self::checked(lo, hi, label)
    }

    fn checked(min: Vec3, max: Vec3, label: ClassId) -> Result<Self> {
        if !(min.is_finite() && max.is_finite()) || (max - min).min_elem() <= 0.0 {
            return Err(Error::InvalidBox(format!(
                "degenerate corners {:?} {:?}",
                min.to_array(),
                max.to_array()
            )));
        }
        Ok(Self { min, max, label })
    }

    pub fn min(&self) -> Vec3 {
        self.min
    }

    pub fn max(&self) -> Vec3 {
        self.max
    }

    pub fn center(&self) -> Vec3 {
        (self.min + self.max) * 0.5
    }

    pub fn size(&self) -> Vec3 {
        self.max - self.min
    }

    pub fn volume(&self) -> f64 {
        interval_volume(self.min, self.max)
    }

    pub fn diagonal(&self) -> f64 {
        self.size().norm()
    }

    /// Closed containment: points on the boundary count as inside.
    #[inline]
    pub fn contains(&self, p: Vec3) -> bool {
        let (lo, hi) = (self.min, self.max);
        lo.x <= p.x && p.x <= hi.x && lo.y <= p.y && p.y <= hi.y && lo.z <= p.z && p.z <= hi.z
    }

    pub fn translated(&self, t: Vec3) -> Aabb {
        Aabb {
            min: self.min + t,
            max: self.max + t,
            label: self.label,
        }
    }

    pub fn with_label(&self, label: ClassId) -> Aabb {
        Aabb { label, ..*self }
    }

    pub fn iou(&self, other: &Aabb) -> f64 {
        iou_aabb(self, other)
    }
}

fn set_axis(v: &mut Vec3, axis: usize, value: f64) {
    match axis {
        0 => v.x = value,
        1 => v.y = value,
        _ => v.z = value,
    }
}

fn interval_volume(lo: Vec3, hi: Vec3) -> f64 {
    (hi.x - lo.x).max(0.0) * (hi.y - lo.y).max(0.0) * (hi.z - lo.z).max(0.0)
}

/// Volumetric intersection-over-union of two boxes.
pub fn iou_aabb(a: &Aabb, b: &Aabb) -> f64 {
    let inter = interval_volume(a.min.max(b.min), a.max.min(b.max));
    if inter <= 0.0 {
        return 0.0;
    }
    let union = a.volume() + b.volume() - inter;
    (inter / union).clamp(0.0, 1.0)
}

pub fn contains(b: &Aabb, p: Vec3) -> bool {
    b.contains(p)
}

pub fn volume(b: &Aabb) -> f64 {
    b.volume()
}

/// Tightest box around `points`, padding degenerate extents to
/// [`DEFAULT_MIN_EXTENT`].
pub fn fit_aabb(points: &[Vec3], label: ClassId) -> Result<Aabb> {
    fit_aabb_with_min_extent(points, label, DEFAULT_MIN_EXTENT)
}

pub fn fit_aabb_with_min_extent(points: &[Vec3], label: ClassId, min_extent: f64) -> Result<Aabb> {
    let (first, rest) = points.split_first().ok_or(Error::EmptyPointSet)?;
    let (lo, hi) = rest
        .iter()
        .fold((*first, *first), |(lo, hi), &p| (lo.min(p), hi.max(p)));
    Aabb::from_corners(lo, hi, label, min_extent)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn unit_at(x: f64, y: f64, z: f64) -> Aabb {
        Aabb::new(Vec3::new(x, y, z), Vec3::splat(1.0), 1).unwrap()
    }

    /// Monte-Carlo estimate of IoU by uniform sampling of the joint
    /// bounding region. Returns (estimate, number of samples in the union).
    fn mc_iou(a: &Aabb, b: &Aabb, samples: usize, rng: &mut impl Rng) -> (f64, usize) {
        let lo = a.min().min(b.min());
        let hi = a.max().max(b.max());
        let (mut inter, mut union) = (0usize, 0usize);
        for _ in 0..samples {
            let p = Vec3::new(
                rng.gen_range(lo.x..hi.x),
                rng.gen_range(lo.y..hi.y),
                rng.gen_range(lo.z..hi.z),
            );
            let (ia, ib) = (a.contains(p), b.contains(p));
            if ia && ib {
                inter += 1;
            }
            if ia || ib {
                union += 1;
            }
        }
        (inter as f64 / union as f64, union)
    }

    #[test]
    fn iou_examples() {
        assert_eq!(iou_aabb(&unit_at(0.0, 0.0, 0.0), &unit_at(0.0, 0.0, 0.0)), 1.0);
        assert_eq!(iou_aabb(&unit_at(0.0, 0.0, 0.0), &unit_at(5.0, 0.0, 0.0)), 0.0);
        let half = iou_aabb(&unit_at(0.0, 0.0, 0.0), &unit_at(0.5, 0.0, 0.0));
        assert!((half - 1.0 / 3.0).abs() < 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let (mc, _) = mc_iou(&unit_at(0.0, 0.0, 0.0), &unit_at(0.5, 0.0, 0.0), 1_000_000, &mut rng);
        assert!((mc - 1.0 / 3.0).abs() < 1e-2);
    }

    #[test]
    fn contains_closed() {
        let b = unit_at(0.0, 0.0, 0.0);
        assert!(b.contains(Vec3::ZERO));
        assert!(b.contains(Vec3::new(0.5, 0.0, 0.0)));
        assert!(!b.contains(Vec3::new(0.6, 0.0, 0.0)));
    }

    #[test]
    fn fit_examples() {
        let b = fit_aabb(&[Vec3::ZERO, Vec3::splat(1.0)], 2).unwrap();
        assert_eq!(b.center(), Vec3::splat(0.5));
        assert_eq!(b.size(), Vec3::splat(1.0));
        assert_eq!(b.label, 2);

        let b = fit_aabb(&[Vec3::ZERO], 1).unwrap();
        assert_eq!(b.size(), Vec3::splat(DEFAULT_MIN_EXTENT));
        assert_eq!(b.center(), Vec3::ZERO);

        let b = fit_aabb(
            &[Vec3::ZERO, Vec3::new(2.0, 0.0, 0.0), Vec3::new(1.0, 3.0, 0.0)],
            1,
        )
        .unwrap();
        assert_eq!(b.center(), Vec3::new(1.0, 1.5, 0.0));
        assert_eq!(b.size(), Vec3::new(2.0, 3.0, DEFAULT_MIN_EXTENT));

        assert!(matches!(fit_aabb(&[], 1), Err(Error::EmptyPointSet)));
    }

    #[test]
    fn volume_examples() {
        assert_eq!(unit_at(0.0, 0.0, 0.0).volume(), 1.0);
        let b = Aabb::new(Vec3::ZERO, Vec3::new(2.0, 3.0, 4.0), 1).unwrap();
        assert_eq!(volume(&b), 24.0);
        let b = Aabb::new(Vec3::ZERO, Vec3::splat(0.1), 1).unwrap();
        assert!((b.volume() - 1e-3).abs() < 1e-15);
    }

    #[test]
    fn rejects_non_positive_size() {
        assert!(Aabb::new(Vec3::ZERO, Vec3::new(1.0, 0.0, 1.0), 1).is_err());
        assert!(Aabb::new(Vec3::new(f64::NAN, 0.0, 0.0), Vec3::splat(1.0), 1).is_err());
        let err = serde_json::from_str::<Aabb>(r#"{"center":[0,0,0],"size":[1,-1,1],"label":1}"#);
        assert!(err.is_err());
    }

    #[test]
    fn monte_carlo_agreement() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let a = random_box(&mut rng);
            let b = random_box(&mut rng);
            let exact = iou_aabb(&a, &b);
            let (est, n) = mc_iou(&a, &b, 20_000, &mut rng);
            let sigma = (exact * (1.0 - exact) / n as f64).sqrt();
            assert!((exact - est).abs() <= 3.0 * sigma + 1e-12, "exact {exact} mc {est} sigma {sigma}");
        }
    }

    fn random_box(rng: &mut impl Rng) -> Aabb {
        let c = Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let s = Vec3::new(rng.gen_range(0.2..2.0), rng.gen_range(0.2..2.0), rng.gen_range(0.2..2.0));
        Aabb::new(c, s, 1).unwrap()
    }

    fn arb_box() -> impl Strategy<Value = Aabb> {
        (
            prop::array::uniform3(-5.0f64..5.0),
            prop::array::uniform3(0.01f64..4.0),
        )
            .prop_map(|(c, s)| Aabb::new(c.into(), s.into(), 1).unwrap())
    }

    proptest! {
        #[test]
        fn iou_symmetric_and_bounded(a in arb_box(), b in arb_box()) {
            let ab = iou_aabb(&a, &b);
            prop_assert_eq!(ab, iou_aabb(&b, &a));
            prop_assert!((0.0..=1.0).contains(&ab));
            prop_assert_eq!(iou_aabb(&a, &a), 1.0);
        }

        #[test]
        fn iou_translation_invariant(a in arb_box(), b in arb_box(), t in prop::array::uniform3(-10.0f64..10.0)) {
            let t: Vec3 = t.into();
            let d = (iou_aabb(&a, &b) - iou_aabb(&a.translated(t), &b.translated(t))).abs();
            prop_assert!(d < 1e-12, "drift {}", d);
        }

        #[test]
        fn iou_scale_invariant(a in arb_box(), b in arb_box(), k in 0.1f64..10.0, o in prop::array::uniform3(-3.0f64..3.0)) {
            let o: Vec3 = o.into();
            let scale = |x: &Aabb| Aabb::new(o + (x.center() - o) * k, x.size() * k, x.label).unwrap();
            let d = (iou_aabb(&a, &b) - iou_aabb(&scale(&a), &scale(&b))).abs();
            prop_assert!(d < 1e-9, "drift {}", d);
        }

        #[test]
        fn fit_contains_inputs(pts in prop::collection::vec(prop::array::uniform3(-5.0f64..5.0), 1..40)) {
            let pts: Vec<Vec3> = pts.into_iter().map(Vec3::from).collect();
            let b = fit_aabb(&pts, 1).unwrap();
            for p in &pts {
                prop_assert!(b.contains(*p));
            }
        }
    }
}
