//! Deterministic synthetic point-cloud generators.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::cloud::{Point3, PointCloud, PointRecord};
use crate::error::{LpcnError, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum CloudKind {
    UniformCube,
    SphereSurface,
    GaussianClusters { k: usize, sigma: f32 },
    Grid { nx: usize, ny: usize, nz: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct CloudSpec {
    pub kind: CloudKind,
    pub n: usize,
    pub feat_dim: usize,
    pub seed: u64,
}

impl CloudSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(LpcnError::InvalidConfig("cloud size n must be >= 1".into()));
        }
        match &self.kind {
            CloudKind::GaussianClusters { k, sigma } => {
                if *k == 0 || !(*sigma > 0.0) {
                    return Err(LpcnError::InvalidConfig(
                        "gaussian clusters need k >= 1 and sigma > 0".into(),
                    ));
                }
            }
            CloudKind::Grid { nx, ny, nz } => {
                if *nx == 0 || *ny == 0 || *nz == 0 {
                    return Err(LpcnError::InvalidConfig("grid dims must be positive".into()));
                }
                if nx * ny * nz != self.n {
                    return Err(LpcnError::InvalidConfig(format!(
                        "grid {}x{}x{} has {} points, spec says n = {}",
                        nx,
                        ny,
                        nz,
                        nx * ny * nz,
                        self.n
                    )));
                }
            }
            _ => {}
        }
        Ok(())
    }
}

fn gauss(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller; two uniforms per sample keeps the stream simple
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

pub fn generate(spec: &CloudSpec) -> Result<PointCloud> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let positions: Vec<Point3> = match &spec.kind {
        CloudKind::UniformCube => (0..spec.n)
            .map(|_| Point3::new(rng.gen(), rng.gen(), rng.gen()))
            .collect(),
        CloudKind::SphereSurface => (0..spec.n)
            .map(|_| {
                loop {
                    let (x, y, z) = (gauss(&mut rng), gauss(&mut rng), gauss(&mut rng));
                    let norm = (x * x + y * y + z * z).sqrt();
                    if norm > 1e-9 {
                        return Point3::new(
                            (x / norm) as f32,
                            (y / norm) as f32,
                            (z / norm) as f32,
                        );
                    }
                }
            })
            .collect(),
        CloudKind::GaussianClusters { k, sigma } => {
            let centers: Vec<(f64, f64, f64)> =
                (0..*k).map(|_| (rng.gen(), rng.gen(), rng.gen())).collect();
            (0..spec.n)
                .map(|i| {
                    let c = centers[i % k];
                    let s = *sigma as f64;
                    Point3::new(
                        (c.0 + s * gauss(&mut rng)) as f32,
                        (c.1 + s * gauss(&mut rng)) as f32,
                        (c.2 + s * gauss(&mut rng)) as f32,
                    )
                })
                .collect()
        }
        CloudKind::Grid { nx, ny, nz } => {
            let step = |i: usize, n: usize| {
                if n == 1 {
                    0.0
                } else {
                    i as f32 / (n - 1) as f32
                }
            };
            let mut pts = Vec::with_capacity(spec.n);
            for z in 0..*nz {
                for y in 0..*ny {
                    for x in 0..*nx {
                        pts.push(Point3::new(step(x, *nx), step(y, *ny), step(z, *nz)));
                    }
                }
            }
            pts
        }
    };
    let records = positions
        .into_iter()
        .enumerate()
        .map(|(i, pos)| PointRecord {
            id: i as u32,
            pos,
            feat: (0..spec.feat_dim).map(|_| rng.gen::<f32>()).collect(),
        })
        .collect();
    PointCloud::new(records, spec.feat_dim)
}
