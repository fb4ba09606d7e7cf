//! Morton (Z-order) codes over a bounded volume.
//!
//! A code addresses one leaf cell of a 2^D x 2^D x 2^D grid. Cells are
//! half-open; points on the max face clamp into the last cell. Within each
//! 3-bit group the x bit is lowest, then y, then z.

use crate::cloud::{Aabb, Point3};
use crate::error::{LpcnError, Result};

pub const MAX_DEPTH: u32 = 21; // 3 * 21 = 63 bits in a u64

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MortonCode {
    pub bits: u64,
    pub depth: u32,
}

fn spread_bits(x: u32) -> u64 {
    let mut x = x as u64 & 0x1fffff;
    x = (x | (x << 32)) & 0x1f00000000ffff;
    x = (x | (x << 16)) & 0x1f0000ff0000ff;
    x = (x | (x << 8)) & 0x100f00f00f00f00f;
    x = (x | (x << 4)) & 0x10c30c30c30c30c3;
    x = (x | (x << 2)) & 0x1249249249249249;
    x
}

fn compact_bits(x: u64) -> u32 {
    let mut x = x & 0x1249249249249249;
    x = (x | (x >> 2)) & 0x10c30c30c30c30c3;
    x = (x | (x >> 4)) & 0x100f00f00f00f00f;
    x = (x | (x >> 8)) & 0x1f0000ff0000ff;
    x = (x | (x >> 16)) & 0x1f00000000ffff;
    x = (x | (x >> 32)) & 0x1fffff;
    x as u32
}

pub fn interleave(cx: u32, cy: u32, cz: u32) -> u64 {
    spread_bits(cx) | (spread_bits(cy) << 1) | (spread_bits(cz) << 2)
}

pub fn deinterleave(bits: u64) -> (u32, u32, u32) {
    (
        compact_bits(bits),
        compact_bits(bits >> 1),
        compact_bits(bits >> 2),
    )
}

/// Cell index of one coordinate: floor((v - min) / extent * 2^D),
/// clamped to 2^D - 1 for the max face.
fn cell_index(v: f32, min: f32, extent: f32, depth: u32) -> u32 {
    let cells = 1u64 << depth;
    let t = ((v as f64 - min as f64) / extent as f64 * cells as f64).floor();
    (t.max(0.0) as u64).min(cells - 1) as u32
}

pub fn encode_morton(p: &Point3, bounds: &Aabb, depth: u32) -> Result<MortonCode> {
    assert!(depth >= 1 && depth <= MAX_DEPTH);
    if !bounds.contains(p) {
        return Err(LpcnError::PointOutOfBounds(p.x, p.y, p.z));
    }
    let (ex, ey, ez) = bounds.extent();
    let cx = cell_index(p.x, bounds.min.x, ex, depth);
    let cy = cell_index(p.y, bounds.min.y, ey, depth);
    let cz = cell_index(p.z, bounds.min.z, ez, depth);
    Ok(MortonCode {
        bits: interleave(cx, cy, cz),
        depth,
    })
}

/// The voxel box of the leaf cell addressed by `code`.
pub fn decode_morton(code: MortonCode, bounds: &Aabb) -> Aabb {
    let (cx, cy, cz) = deinterleave(code.bits);
    let cells = (1u64 << code.depth) as f64;
    let (ex, ey, ez) = bounds.extent();
    let lo = |min: f32, e: f32, c: u32| (min as f64 + e as f64 * c as f64 / cells) as f32;
    let hi = |min: f32, e: f32, c: u32| (min as f64 + e as f64 * (c + 1) as f64 / cells) as f32;
    Aabb {
        min: Point3::new(
            lo(bounds.min.x, ex, cx),
            lo(bounds.min.y, ey, cy),
            lo(bounds.min.z, ez, cz),
        ),
        max: Point3::new(
            hi(bounds.min.x, ex, cx),
            hi(bounds.min.y, ey, cy),
            hi(bounds.min.z, ez, cz),
        ),
    }
}

/// Integer cell coordinates of a code.
pub fn cell_coords(code: MortonCode) -> (u32, u32, u32) {
    deinterleave(code.bits)
}
