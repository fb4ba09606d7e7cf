//! Octree-based islandization: hub selection, ring-by-ring gathering of
//! neighbor centrals on the sampled octree, and island formation.
//!
//! Gathering runs synchronized rounds: at round t every hub claims the
//! still-unclaimed leaf nodes on its Chebyshev ring t. Nodes are claimed
//! atomically (all centrals in a node go to one hub); a node contested in
//! the same round goes to the hub whose point is closest to the node-cell
//! center, then to the lower hub id.

use std::collections::HashMap;

use rand::seq::index::sample;

use crate::cloud::PointCloud;
use crate::config::{RunConfig, SeedStream};
use crate::error::{LpcnError, Result};
use crate::morton;
use crate::octree::Octree;
use crate::structuring::{PointSubset, StructuredCloud};

#[derive(Debug, Clone, PartialEq)]
pub struct HubList {
    pub hub_central_id: u32,
    /// (central id, gather round); the hub itself is first with round 0.
    pub members: Vec<(u32, u32)>,
}

#[derive(Debug, Clone)]
pub struct Island {
    pub island_id: usize,
    /// Hub subset first, then members in hub-list order.
    pub subsets: Vec<PointSubset>,
    pub source: HubList,
}

#[derive(Debug, Clone)]
pub struct IslandPartition {
    pub islands: Vec<Island>,
}

impl IslandPartition {
    pub fn total_subsets(&self) -> usize {
        self.islands.iter().map(|i| i.subsets.len()).sum()
    }

    /// One line per island: id, hub, members with rounds.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for island in &self.islands {
            out.push_str(&format!(
                "island {} hub {}:",
                island.island_id, island.source.hub_central_id
            ));
            for &(c, round) in &island.source.members {
                out.push_str(&format!(" {c}@{round}"));
            }
            out.push('\n');
        }
        out
    }
}

/// H = ceil(M / S) hubs drawn without replacement, output sorted by id.
pub fn select_hub_points(centrals: &[u32], island_size: usize, config: &RunConfig) -> Vec<u32> {
    assert!(island_size >= 1);
    let m = centrals.len();
    let h = m.div_ceil(island_size);
    let mut rng = config.rng(SeedStream::HubSelection);
    let mut hubs: Vec<u32> = sample(&mut rng, m, h)
        .into_iter()
        .map(|i| centrals[i])
        .collect();
    hubs.sort_unstable();
    hubs
}

/// Synchronized ring expansion of all hubs over the sampled octree.
pub fn gather_hub_lists(
    sampled_octree: &Octree,
    cloud: &PointCloud,
    hubs: &[u32],
) -> Result<Vec<HubList>> {
    if hubs.is_empty() {
        return Err(LpcnError::EmptySet("hub set"));
    }
    let total: usize = sampled_octree.num_points();
    let mut lists: Vec<HubList> = hubs
        .iter()
        .map(|&h| HubList {
            hub_central_id: h,
            members: vec![(h, 0)],
        })
        .collect();
    let mut claimed_central: HashMap<u32, ()> = hubs.iter().map(|&h| (h, ())).collect();
    let mut claimed_nodes: HashMap<u64, ()> = HashMap::new();
    let hub_codes: Vec<_> = hubs
        .iter()
        .map(|&h| sampled_octree.code_of(h).ok_or(LpcnError::UnknownPoint(h)))
        .collect::<Result<Vec<_>>>()?;
    let ring_cap = 1u32 << sampled_octree.depth();

    let mut round = 0u32;
    while claimed_central.len() < total {
        if round > ring_cap {
            return Err(LpcnError::RingCapExceeded(round));
        }
        // candidate winner per node: (distance to cell center, hub index)
        let mut winners: HashMap<u64, (f64, usize)> = HashMap::new();
        for (hi, &hub) in hubs.iter().enumerate() {
            let hub_pos = cloud.pos(hub);
            for node in sampled_octree.adjacent_nodes(hub_codes[hi], round) {
                let code = sampled_octree.leaf_code(node);
                if claimed_nodes.contains_key(&code.bits) {
                    continue;
                }
                let center = morton::decode_morton(code, sampled_octree.bounds()).center();
                let d = hub_pos.dist2(&center);
                let cand = (d, hi);
                winners
                    .entry(code.bits)
                    .and_modify(|best| {
                        if cand.0 < best.0 || (cand.0 == best.0 && hubs[cand.1] < hubs[best.1]) {
                            *best = cand;
                        }
                    })
                    .or_insert(cand);
            }
        }
        // deterministic claim order: per hub, nodes sorted by code
        let mut claims: Vec<(usize, u64)> =
            winners.into_iter().map(|(code, (_, hi))| (hi, code)).collect();
        claims.sort_unstable();
        for (hi, code_bits) in claims {
            claimed_nodes.insert(code_bits, ());
            let node = sampled_octree
                .adjacent_nodes(
                    crate::morton::MortonCode {
                        bits: code_bits,
                        depth: sampled_octree.depth(),
                    },
                    0,
                )
                .pop()
                .expect("claimed node exists");
            let mut centrals: Vec<u32> = sampled_octree.leaf_points(node).to_vec();
            centrals.sort_unstable();
            for c in centrals {
                if claimed_central.insert(c, ()).is_none() {
                    lists[hi].members.push((c, round));
                }
            }
        }
        round += 1;
    }
    Ok(lists)
}

/// One island per hub list; subsets looked up from the structured cloud in
/// list order. Errors if the lists do not cover every central exactly once.
pub fn form_islands(structured: &StructuredCloud, hub_lists: &[HubList]) -> Result<IslandPartition> {
    let subset_of: HashMap<u32, &PointSubset> = structured
        .subsets
        .iter()
        .map(|s| (s.central_id, s))
        .collect();
    let mut seen: HashMap<u32, ()> = HashMap::new();
    let mut islands = Vec::with_capacity(hub_lists.len());
    for (island_id, list) in hub_lists.iter().enumerate() {
        let mut subsets = Vec::with_capacity(list.members.len());
        for &(central, _) in &list.members {
            if seen.insert(central, ()).is_some() {
                return Err(LpcnError::CoverageViolation(central));
            }
            let s = subset_of
                .get(&central)
                .ok_or(LpcnError::CoverageViolation(central))?;
            subsets.push((*s).clone());
        }
        islands.push(Island {
            island_id,
            subsets,
            source: list.clone(),
        });
    }
    if seen.len() != structured.centrals.len() {
        let missing = structured
            .centrals
            .iter()
            .find(|c| !seen.contains_key(c))
            .copied()
            .unwrap_or(0);
        return Err(LpcnError::CoverageViolation(missing));
    }
    Ok(IslandPartition { islands })
}

/// Steps 1-4: select hubs, gather hub lists, form islands.
pub fn islandize(
    structured: &StructuredCloud,
    cloud: &PointCloud,
    config: &RunConfig,
) -> Result<IslandPartition> {
    let hubs = select_hub_points(&structured.centrals, config.island_size, config);
    let lists = gather_hub_lists(&structured.sampled_octree, cloud, &hubs)?;
    form_islands(structured, &lists)
}
