//! Morton-addressed octree with linked-list child layout.
//!
//! Children are stored first-child/next-sibling so traversal cost matches
//! a linked-list search engine: descending one level walks the sibling
//! chain until the prefix matches. The tree never holds empty voxels.

use std::collections::HashMap;

use crate::cloud::{Aabb, Point3, PointCloud};
use crate::error::{LpcnError, Result};
use crate::morton::{self, MortonCode};

const NONE: u32 = u32::MAX;

#[derive(Debug, Clone)]
pub struct OctreeNode {
    /// Code bits of this node's voxel at its level (top 3*level bits of
    /// any descendant's code).
    pub prefix: u64,
    pub level: u32,
    first_child: u32,
    next_sibling: u32,
    /// Point ids, leaf nodes only (level == depth).
    pub points: Vec<u32>,
}

#[derive(Debug, Clone)]
pub struct Octree {
    nodes: Vec<OctreeNode>,
    depth: u32,
    bounds: Aabb,
    /// point id -> leaf node index
    point_index: HashMap<u32, u32>,
    /// point id -> full-depth code bits
    codes: HashMap<u32, u64>,
    /// leaf code bits -> leaf node index
    leaf_by_code: HashMap<u64, u32>,
}

impl Octree {
    pub fn empty(bounds: Aabb, depth: u32) -> Self {
        let root = OctreeNode {
            prefix: 0,
            level: 0,
            first_child: NONE,
            next_sibling: NONE,
            points: Vec::new(),
        };
        Octree {
            nodes: vec![root],
            depth,
            bounds,
            point_index: HashMap::new(),
            codes: HashMap::new(),
            leaf_by_code: HashMap::new(),
        }
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn bounds(&self) -> &Aabb {
        &self.bounds
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_points(&self) -> usize {
        self.point_index.len()
    }

    pub fn indexed_ids(&self) -> impl Iterator<Item = u32> + '_ {
        self.point_index.keys().copied()
    }

    pub fn code_of(&self, id: u32) -> Option<MortonCode> {
        self.codes.get(&id).map(|&bits| MortonCode {
            bits,
            depth: self.depth,
        })
    }

    /// Build from a cloud; records are inserted in id order.
    pub fn build(cloud: &PointCloud, bounds: Aabb, depth: u32) -> Result<Self> {
        let mut tree = Octree::empty(bounds, depth);
        for r in &cloud.records {
            let code = morton::encode_morton(&r.pos, &bounds, depth)?;
            tree.insert_code(r.id, code)?;
        }
        Ok(tree)
    }

    /// Insert a point with a precomputed code. Missing path nodes are
    /// created; duplicate ids are rejected.
    pub fn insert_code(&mut self, id: u32, code: MortonCode) -> Result<()> {
        debug_assert_eq!(code.depth, self.depth);
        if self.point_index.contains_key(&id) {
            return Err(LpcnError::DuplicatePoint(id));
        }
        let mut cur = 0u32;
        for level in 1..=self.depth {
            let prefix = code.bits >> (3 * (self.depth - level));
            cur = self.child_or_create(cur, prefix, level);
        }
        self.nodes[cur as usize].points.push(id);
        self.point_index.insert(id, cur);
        self.codes.insert(id, code.bits);
        self.leaf_by_code.insert(code.bits, cur);
        Ok(())
    }

    /// Insert a point by position (the tree-updating path).
    pub fn insert_point(&mut self, id: u32, pos: &Point3) -> Result<()> {
        let code = morton::encode_morton(pos, &self.bounds, self.depth)?;
        self.insert_code(id, code)
    }

    fn child_or_create(&mut self, parent: u32, prefix: u64, level: u32) -> u32 {
        let mut cur = self.nodes[parent as usize].first_child;
        let mut last = NONE;
        while cur != NONE {
            if self.nodes[cur as usize].prefix == prefix {
                return cur;
            }
            last = cur;
            cur = self.nodes[cur as usize].next_sibling;
        }
        let idx = self.nodes.len() as u32;
        self.nodes.push(OctreeNode {
            prefix,
            level,
            first_child: NONE,
            next_sibling: NONE,
            points: Vec::new(),
        });
        if last == NONE {
            self.nodes[parent as usize].first_child = idx;
        } else {
            self.nodes[last as usize].next_sibling = idx;
        }
        idx
    }

    /// Membership by Morton-path traversal. Steps count every node visited
    /// (sibling hops included) and are accumulated into `steps`.
    pub fn contains_code(&self, id: u32, code: MortonCode, steps: &mut u64) -> bool {
        let mut cur = 0u32;
        for level in 1..=self.depth {
            let prefix = code.bits >> (3 * (self.depth - level));
            let mut child = self.nodes[cur as usize].first_child;
            let mut found = NONE;
            while child != NONE {
                *steps += 1;
                if self.nodes[child as usize].prefix == prefix {
                    found = child;
                    break;
                }
                child = self.nodes[child as usize].next_sibling;
            }
            if found == NONE {
                return false;
            }
            cur = found;
        }
        self.nodes[cur as usize].points.contains(&id)
    }

    /// Membership query for an id whose position is known to the tree's
    /// coordinate frame (convenience over the flat index).
    pub fn contains_point(&self, cloud: &PointCloud, id: u32) -> bool {
        let Ok(code) = morton::encode_morton(&cloud.pos(id), &self.bounds, self.depth) else {
            return false;
        };
        let mut steps = 0;
        self.contains_code(id, code, &mut steps)
    }

    /// Number of levels descended to reach a leaf for `code` (for the
    /// traversal-depth bound); stops early when the path breaks off.
    pub fn traversal_depth(&self, code: MortonCode) -> u32 {
        let mut cur = 0u32;
        let mut depth = 0;
        for level in 1..=self.depth {
            let prefix = code.bits >> (3 * (self.depth - level));
            let mut child = self.nodes[cur as usize].first_child;
            let mut found = NONE;
            while child != NONE {
                if self.nodes[child as usize].prefix == prefix {
                    found = child;
                    break;
                }
                child = self.nodes[child as usize].next_sibling;
            }
            if found == NONE {
                break;
            }
            depth = level;
            cur = found;
        }
        depth
    }

    /// Prune to a subset of the indexed ids. The result indexes exactly
    /// `kept_ids`; nodes whose subtrees hold no kept point disappear.
    pub fn prune(&self, kept_ids: &[u32]) -> Result<Octree> {
        if kept_ids.is_empty() {
            return Err(LpcnError::EmptySet("prune kept_ids"));
        }
        let mut ids: Vec<u32> = kept_ids.to_vec();
        ids.sort_unstable();
        ids.dedup();
        let mut tree = Octree::empty(self.bounds, self.depth);
        for id in ids {
            let &bits = self
                .codes
                .get(&id)
                .ok_or(LpcnError::UnknownPoint(id))?;
            tree.insert_code(
                id,
                MortonCode {
                    bits,
                    depth: self.depth,
                },
            )?;
        }
        Ok(tree)
    }

    /// Standalone octree over a point subset, sharing this tree's bounds
    /// and depth. Same construction as prune; kept distinct because hub
    /// octrees are mutated afterwards.
    pub fn extract_hub_octree(&self, subset_ids: &[u32]) -> Result<Octree> {
        if subset_ids.is_empty() {
            return Err(LpcnError::EmptySet("hub octree subset"));
        }
        self.prune(subset_ids)
    }

    pub fn leaf_points(&self, node: u32) -> &[u32] {
        &self.nodes[node as usize].points
    }

    pub fn leaf_code(&self, node: u32) -> MortonCode {
        MortonCode {
            bits: self.nodes[node as usize].prefix,
            depth: self.depth,
        }
    }

    fn leaf_cells(&self) -> impl Iterator<Item = (u64, u32)> + '_ {
        self.leaf_by_code.iter().map(|(&c, &n)| (c, n))
    }

    /// Existing leaf nodes whose cell lies at exactly Chebyshev distance
    /// `ring` (in leaf-cell units) from the seed cell. Ring 0 is the seed
    /// cell itself. Results are sorted by code for determinism.
    pub fn adjacent_nodes(&self, seed_code: MortonCode, ring: u32) -> Vec<u32> {
        let (sx, sy, sz) = morton::cell_coords(seed_code);
        let cells = 1i64 << self.depth;
        let mut out: Vec<(u64, u32)> = Vec::new();
        if ring == 0 {
            if let Some(&n) = self.leaf_by_code.get(&seed_code.bits) {
                out.push((seed_code.bits, n));
            }
        } else {
            let r = ring as i64;
            let shell_cells = {
                let outer = (2 * r + 1).pow(3);
                let inner = (2 * r - 1).pow(3);
                (outer - inner) as usize
            };
            if shell_cells <= self.leaf_by_code.len() * 4 {
                // enumerate the shell and probe the code map
                let (sx, sy, sz) = (sx as i64, sy as i64, sz as i64);
                for dx in -r..=r {
                    let x = sx + dx;
                    if x < 0 || x >= cells {
                        continue;
                    }
                    for dy in -r..=r {
                        let y = sy + dy;
                        if y < 0 || y >= cells {
                            continue;
                        }
                        let on_face = dx.abs() == r || dy.abs() == r;
                        let mut dz = -r;
                        while dz <= r {
                            let z = sz + dz;
                            if z >= 0 && z < cells && (on_face || dz.abs() == r) {
                                let bits =
                                    morton::interleave(x as u32, y as u32, z as u32);
                                if let Some(&n) = self.leaf_by_code.get(&bits) {
                                    out.push((bits, n));
                                }
                            }
                            // interior rows only have the two +-r caps
                            dz += if on_face { 1 } else { 2 * r };
                        }
                    }
                }
            } else {
                // scan all leaves
                for (bits, n) in self.leaf_cells() {
                    let (x, y, z) = morton::deinterleave(bits);
                    let d = (x as i64 - sx as i64)
                        .abs()
                        .max((y as i64 - sy as i64).abs())
                        .max((z as i64 - sz as i64).abs());
                    if d == r {
                        out.push((bits, n));
                    }
                }
            }
        }
        out.sort_unstable_by_key(|&(c, _)| c);
        out.into_iter().map(|(_, n)| n).collect()
    }

    /// Superset of all ids within `radius` of `center`: the union of leaf
    /// sets of cells intersecting the query ball. Caller filters by exact
    /// distance. Sorted by id.
    pub fn radius_candidates(&self, center: &Point3, radius: f32) -> Vec<u32> {
        assert!(radius > 0.0);
        let r2 = (radius as f64) * (radius as f64);
        let mut out = Vec::new();
        for (bits, n) in self.leaf_cells() {
            let voxel = morton::decode_morton(
                MortonCode {
                    bits,
                    depth: self.depth,
                },
                &self.bounds,
            );
            if voxel.dist2_to(center) <= r2 {
                out.extend_from_slice(&self.nodes[n as usize].points);
            }
        }
        out.sort_unstable();
        out
    }

    /// One node per line, indented by level, for golden-file tests.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        self.dump_node(0, &mut out);
        out
    }

    fn dump_node(&self, node: u32, out: &mut String) {
        let n = &self.nodes[node as usize];
        for _ in 0..n.level {
            out.push_str("  ");
        }
        out.push_str(&format!("{:o}", n.prefix));
        if n.level == self.depth {
            let mut pts = n.points.clone();
            pts.sort_unstable();
            out.push_str(&format!(" [{}]", pts.iter().map(|p| p.to_string()).collect::<Vec<_>>().join(",")));
        }
        out.push('\n');
        // children in ascending prefix order regardless of chain order
        let mut children = Vec::new();
        let mut c = n.first_child;
        while c != NONE {
            children.push(c);
            c = self.nodes[c as usize].next_sibling;
        }
        children.sort_unstable_by_key(|&c| self.nodes[c as usize].prefix);
        for c in children {
            self.dump_node(c, out);
        }
    }
}
