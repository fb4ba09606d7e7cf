//! Run configuration and seeded randomness.

use crate::error::{LpcnError, Result};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum NeighborMethod {
    BallQuery { radius: f32 },
    Knn,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ReuseMode {
    /// No reuse: every subset fully fetched and computed (the comparator).
    Baseline,
    /// Reuse cached results with weights-only delta compensation;
    /// exact for models without intermediate activations.
    ExactReuse,
    /// Reuse with delta compensation on nonlinear models (approximate).
    CompensatedReuse,
}

impl ReuseMode {
    pub fn reuses(&self) -> bool {
        !matches!(self, ReuseMode::Baseline)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// K: points per subset.
    pub subset_size: usize,
    /// M: number of sampled central points.
    pub num_centrals: usize,
    /// S: target subsets per island.
    pub island_size: usize,
    /// C: hub-cache capacity in entries.
    pub hub_cache_entries: usize,
    pub neighbor_method: NeighborMethod,
    pub octree_depth: u32,
    pub seed: u64,
    pub reuse_mode: ReuseMode,
}

/// Named sub-streams of the single run seed. Each consumer derives its own
/// ChaCha stream so concurrency never perturbs determinism.
#[derive(Debug, Clone, Copy)]
pub enum SeedStream {
    FpsStart = 1,
    HubSelection = 2,
}

impl RunConfig {
    pub fn new(subset_size: usize, num_centrals: usize, seed: u64) -> Self {
        RunConfig {
            subset_size,
            num_centrals,
            island_size: 32,
            hub_cache_entries: 2 * subset_size,
            neighbor_method: NeighborMethod::Knn,
            octree_depth: 5,
            seed,
            reuse_mode: ReuseMode::CompensatedReuse,
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.subset_size == 0 {
            return Err(LpcnError::InvalidConfig("subset size K must be >= 1".into()));
        }
        if self.num_centrals == 0 || self.num_centrals > n {
            return Err(LpcnError::InvalidConfig(format!(
                "num centrals M = {} must be in 1..={n}",
                self.num_centrals
            )));
        }
        if self.island_size == 0 {
            return Err(LpcnError::InvalidConfig("island size S must be >= 1".into()));
        }
        if self.hub_cache_entries < self.subset_size {
            return Err(LpcnError::InvalidConfig(format!(
                "cache entries C = {} must be >= K = {}",
                self.hub_cache_entries, self.subset_size
            )));
        }
        if self.octree_depth == 0 || self.octree_depth > crate::morton::MAX_DEPTH {
            return Err(LpcnError::InvalidConfig(format!(
                "octree depth {} must be in 1..={}",
                self.octree_depth,
                crate::morton::MAX_DEPTH
            )));
        }
        if let NeighborMethod::BallQuery { radius } = self.neighbor_method {
            if !(radius > 0.0) {
                return Err(LpcnError::InvalidConfig("ball-query radius must be > 0".into()));
            }
        }
        if let NeighborMethod::Knn = self.neighbor_method {
            if self.subset_size > n {
                return Err(LpcnError::KnnTooLarge {
                    k: self.subset_size,
                    n,
                });
            }
        }
        Ok(())
    }

    pub fn rng(&self, stream: SeedStream) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream as u64);
        rng
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_follow_island_and_cache_sizing() {
        let c = RunConfig::new(32, 512, 1);
        assert_eq!(c.island_size, 32);
        assert_eq!(c.hub_cache_entries, 64);
        assert!(c.validate(1024).is_ok());
    }

    #[test]
    fn cache_smaller_than_k_rejected() {
        let mut c = RunConfig::new(32, 8, 1);
        c.hub_cache_entries = 16;
        assert!(c.validate(64).is_err());
    }

    #[test]
    fn knn_k_larger_than_n_rejected() {
        let c = RunConfig::new(128, 8, 1);
        assert!(matches!(
            c.validate(64),
            Err(LpcnError::KnnTooLarge { .. })
        ));
    }

    #[test]
    fn seed_streams_are_independent_and_stable() {
        let c = RunConfig::new(8, 8, 42);
        use rand::Rng;
        let a: u64 = c.rng(SeedStream::FpsStart).gen();
        let b: u64 = c.rng(SeedStream::HubSelection).gen();
        let a2: u64 = c.rng(SeedStream::FpsStart).gen();
        assert_eq!(a, a2);
        assert_ne!(a, b);
    }
}
