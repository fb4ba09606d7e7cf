//! Data structuring: farthest point sampling, neighbor gathering, and the
//! sampled-octree output.

use rand::Rng;

use crate::cloud::PointCloud;
use crate::config::{NeighborMethod, RunConfig, SeedStream};
use crate::error::{LpcnError, Result};
use crate::octree::Octree;

/// The K-point neighborhood around one central point. The central comes
/// first; underfull ball queries pad by repeating the central id.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSubset {
    pub central_id: u32,
    pub member_ids: Vec<u32>,
    pub k: usize,
}

impl PointSubset {
    /// Distinct member ids, ascending (padding duplicates collapse).
    pub fn distinct_ids(&self) -> Vec<u32> {
        let mut ids = self.member_ids.clone();
        ids.sort_unstable();
        ids.dedup();
        ids
    }
}

#[derive(Debug, Clone)]
pub struct StructuredCloud {
    pub centrals: Vec<u32>,
    pub subsets: Vec<PointSubset>,
    pub sampled_octree: Octree,
}

/// Farthest point sampling. The start point is drawn from the seeded
/// generator; each later pick maximizes min-distance to the chosen set,
/// ties broken by lower id. Output is in selection order.
pub fn farthest_point_sampling<R: Rng>(cloud: &PointCloud, m: usize, rng: &mut R) -> Vec<u32> {
    let n = cloud.len();
    assert!(m >= 1 && m <= n);
    let start = rng.gen_range(0..n) as u32;
    farthest_point_sampling_from(cloud, m, start)
}

pub fn farthest_point_sampling_from(cloud: &PointCloud, m: usize, start: u32) -> Vec<u32> {
    let n = cloud.len();
    let mut chosen = Vec::with_capacity(m);
    let mut is_chosen = vec![false; n];
    let mut min_d2 = vec![f64::INFINITY; n];
    let mut cur = start;
    chosen.push(cur);
    is_chosen[cur as usize] = true;
    for _ in 1..m {
        let cur_pos = cloud.pos(cur);
        let mut best = (f64::NEG_INFINITY, u32::MAX);
        for (i, d2) in min_d2.iter_mut().enumerate() {
            let d = cloud.records[i].pos.dist2(&cur_pos);
            if d < *d2 {
                *d2 = d;
            }
            // maximize min-distance, tie by lower id (first hit wins)
            if !is_chosen[i] && *d2 > best.0 {
                best = (*d2, i as u32);
            }
        }
        cur = best.1;
        chosen.push(cur);
        is_chosen[cur as usize] = true;
    }
    chosen
}

fn pad_to_k(central_id: u32, mut ids: Vec<u32>, k: usize) -> PointSubset {
    ids.truncate(k);
    while ids.len() < k {
        ids.push(central_id);
    }
    PointSubset {
        central_id,
        member_ids: ids,
        k,
    }
}

/// Order candidate ids by (distance to central, id), central forced first.
fn order_by_distance(cloud: &PointCloud, central_id: u32, ids: &[u32]) -> Vec<u32> {
    let central = cloud.pos(central_id);
    let mut rest: Vec<(f64, u32)> = ids
        .iter()
        .filter(|&&id| id != central_id)
        .map(|&id| (cloud.pos(id).dist2(&central), id))
        .collect();
    rest.sort_unstable_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
    let mut out = Vec::with_capacity(rest.len() + 1);
    out.push(central_id);
    out.extend(rest.into_iter().map(|(_, id)| id));
    out
}

/// First K ids within `radius` of the central, ascending distance (ties by
/// lower id), central first; padded with the central id when underfull.
pub fn ball_query(
    cloud: &PointCloud,
    octree: &Octree,
    central_id: u32,
    radius: f32,
    k: usize,
) -> PointSubset {
    let central = cloud.pos(central_id);
    let r2 = (radius as f64) * (radius as f64);
    let candidates = octree.radius_candidates(&central, radius);
    let within: Vec<u32> = candidates
        .into_iter()
        .filter(|&id| cloud.pos(id).dist2(&central) <= r2)
        .collect();
    pad_to_k(central_id, order_by_distance(cloud, central_id, &within), k)
}

/// K nearest by Euclidean distance (ties by lower id), central first.
/// Octree-accelerated via doubling-radius candidate gathering.
pub fn knn(cloud: &PointCloud, octree: &Octree, central_id: u32, k: usize) -> Result<PointSubset> {
    let n = cloud.len();
    if k > n {
        return Err(LpcnError::KnnTooLarge { k, n });
    }
    let central = cloud.pos(central_id);
    let (ex, ey, ez) = octree.bounds().extent();
    let diag = ((ex as f64).powi(2) + (ey as f64).powi(2) + (ez as f64).powi(2)).sqrt();
    let mut radius = (ex.min(ey).min(ez) as f64 / (1u64 << octree.depth()) as f64).max(1e-9);
    loop {
        let r2 = radius * radius;
        let within: Vec<u32> = octree
            .radius_candidates(&central, radius as f32)
            .into_iter()
            .filter(|&id| cloud.pos(id).dist2(&central) <= r2)
            .collect();
        // once k points fall inside radius r, the true k nearest all lie
        // within r, so the candidate set is complete
        if within.len() >= k || radius > diag {
            let ordered = order_by_distance(cloud, central_id, &within);
            return Ok(pad_to_k(central_id, ordered, k));
        }
        radius *= 2.0;
    }
}

/// The DSU pipeline: sample centrals, gather one subset per central, and
/// prune the input octree to the sampled octree.
pub fn structure(
    cloud: &PointCloud,
    input_octree: &Octree,
    config: &RunConfig,
) -> Result<StructuredCloud> {
    config.validate(cloud.len())?;
    let mut rng = config.rng(SeedStream::FpsStart);
    let centrals = farthest_point_sampling(cloud, config.num_centrals, &mut rng);
    let subsets: Vec<PointSubset> = centrals
        .iter()
        .map(|&c| match config.neighbor_method {
            NeighborMethod::BallQuery { radius } => {
                Ok(ball_query(cloud, input_octree, c, radius, config.subset_size))
            }
            NeighborMethod::Knn => knn(cloud, input_octree, c, config.subset_size),
        })
        .collect::<Result<_>>()?;
    let sampled_octree = input_octree.prune(&centrals)?;
    Ok(StructuredCloud {
        centrals,
        subsets,
        sampled_octree,
    })
}
