//! Core domain types: points, clouds, bounding boxes.

use crate::error::{LpcnError, Result};
use serde::Serialize;

/// A 3-D coordinate in model units. All components must be finite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Point3 {
    pub x: f32,
    pub y: f32,
    pub z: f32,
}

impl Point3 {
    pub fn new(x: f32, y: f32, z: f32) -> Self {
        debug_assert!(x.is_finite() && y.is_finite() && z.is_finite());
        Point3 { x, y, z }
    }

    /// Squared Euclidean distance, accumulated in f64 for stable ordering.
    pub fn dist2(&self, other: &Point3) -> f64 {
        let dx = self.x as f64 - other.x as f64;
        let dy = self.y as f64 - other.y as f64;
        let dz = self.z as f64 - other.z as f64;
        dx * dx + dy * dy + dz * dz
    }
}

/// One indexed point: id, position, opaque feature vector.
#[derive(Debug, Clone, PartialEq)]
pub struct PointRecord {
    pub id: u32,
    pub pos: Point3,
    pub feat: Vec<f32>,
}

/// An ordered point set. Ids are exactly 0..n-1 and every record carries
/// a feature vector of the same dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    pub records: Vec<PointRecord>,
    pub feat_dim: usize,
}

impl PointCloud {
    pub fn new(records: Vec<PointRecord>, feat_dim: usize) -> Result<Self> {
        if records.is_empty() {
            return Err(LpcnError::EmptySet("point cloud"));
        }
        for (i, r) in records.iter().enumerate() {
            if r.id as usize != i {
                return Err(LpcnError::InvalidConfig(format!(
                    "record {i} has id {}, expected contiguous ids",
                    r.id
                )));
            }
            if r.feat.len() != feat_dim {
                return Err(LpcnError::InvalidConfig(format!(
                    "record {i} has feature dim {}, expected {feat_dim}",
                    r.feat.len()
                )));
            }
        }
        Ok(PointCloud { records, feat_dim })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn pos(&self, id: u32) -> Point3 {
        self.records[id as usize].pos
    }
}

/// Axis-aligned bounding box with strictly positive extent on every axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: Point3,
    pub max: Point3,
}

impl Aabb {
    pub fn extent(&self) -> (f32, f32, f32) {
        (
            self.max.x - self.min.x,
            self.max.y - self.min.y,
            self.max.z - self.min.z,
        )
    }

    pub fn contains(&self, p: &Point3) -> bool {
        p.x >= self.min.x
            && p.x <= self.max.x
            && p.y >= self.min.y
            && p.y <= self.max.y
            && p.z >= self.min.z
            && p.z <= self.max.z
    }

    /// Squared distance from a point to this box (0 if inside).
    pub fn dist2_to(&self, p: &Point3) -> f64 {
        let clamp = |v: f32, lo: f32, hi: f32| v.max(lo).min(hi);
        let q = Point3::new(
            clamp(p.x, self.min.x, self.max.x),
            clamp(p.y, self.min.y, self.max.y),
            clamp(p.z, self.min.z, self.max.z),
        );
        q.dist2(p)
    }

    pub fn center(&self) -> Point3 {
        Point3::new(
            0.5 * (self.min.x + self.max.x),
            0.5 * (self.min.y + self.max.y),
            0.5 * (self.min.z + self.max.z),
        )
    }
}

/// Tight bounding box of a cloud. Degenerate axes are padded with
/// epsilon = 1e-6 * (max finite extent, or 1.0 if all axes degenerate)
/// so the box always has positive volume.
pub fn compute_bounds(cloud: &PointCloud) -> Aabb {
    let mut min = cloud.records[0].pos;
    let mut max = min;
    for r in &cloud.records {
        min.x = min.x.min(r.pos.x);
        min.y = min.y.min(r.pos.y);
        min.z = min.z.min(r.pos.z);
        max.x = max.x.max(r.pos.x);
        max.y = max.y.max(r.pos.y);
        max.z = max.z.max(r.pos.z);
    }
    let ext = [max.x - min.x, max.y - min.y, max.z - min.z];
    let scale = ext.iter().cloned().fold(0.0f32, f32::max);
    let eps = 1e-6 * if scale > 0.0 { scale } else { 1.0 };
    let pad = |lo: &mut f32, hi: &mut f32| {
        if *hi - *lo <= 0.0 {
            *lo -= eps;
            *hi += eps;
        }
    };
    pad(&mut min.x, &mut max.x);
    pad(&mut min.y, &mut max.y);
    pad(&mut min.z, &mut max.z);
    Aabb { min, max }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cloud_from(points: &[(f32, f32, f32)]) -> PointCloud {
        let records = points
            .iter()
            .enumerate()
            .map(|(i, &(x, y, z))| PointRecord {
                id: i as u32,
                pos: Point3::new(x, y, z),
                feat: vec![],
            })
            .collect();
        PointCloud::new(records, 0).unwrap()
    }

    #[test]
    fn single_point_bounds_are_padded() {
        let b = compute_bounds(&cloud_from(&[(1.0, 2.0, 3.0)]));
        let eps = 1e-6;
        assert!((b.min.x - (1.0 - eps)).abs() < 1e-9);
        assert!((b.max.z - (3.0 + eps)).abs() < 1e-9);
        let (ex, ey, ez) = b.extent();
        assert!(ex > 0.0 && ey > 0.0 && ez > 0.0);
    }

    #[test]
    fn two_point_bounds_exact() {
        let b = compute_bounds(&cloud_from(&[(0.0, 0.0, 0.0), (1.0, 1.0, 1.0)]));
        assert_eq!(b.min, Point3::new(0.0, 0.0, 0.0));
        assert_eq!(b.max, Point3::new(1.0, 1.0, 1.0));
    }

    #[test]
    fn random_cloud_bounds_contain_all_points() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let pts: Vec<(f32, f32, f32)> = (0..100)
            .map(|_| (rng.gen::<f32>(), rng.gen::<f32>(), rng.gen::<f32>()))
            .collect();
        let cloud = cloud_from(&pts);
        let b = compute_bounds(&cloud);
        // min/max scan oracle
        for r in &cloud.records {
            assert!(b.contains(&r.pos));
        }
        assert!(b.min.x >= 0.0 && b.max.x <= 1.0);
        assert!(b.min.y >= 0.0 && b.max.y <= 1.0);
        assert!(b.min.z >= 0.0 && b.max.z <= 1.0);
    }

    #[test]
    fn cloud_rejects_noncontiguous_ids() {
        let records = vec![PointRecord {
            id: 3,
            pos: Point3::new(0.0, 0.0, 0.0),
            feat: vec![],
        }];
        assert!(PointCloud::new(records, 0).is_err());
    }
}
