//! Command-line driver: load or synthesize clouds, run the pipeline in
//! each reuse mode, and emit reports and plot data.

mod pointfile;
mod report;

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use lpcn_core::accounting::{
    self, brute_force_reuse_oracle, overlap_histogram, savings_report, BUCKET_LABELS,
};
use lpcn_core::cloud::{compute_bounds, PointCloud};
use lpcn_core::config::{NeighborMethod, ReuseMode, RunConfig};
use lpcn_core::feature::{parse_model_spec, Activation, MlpModel};
use lpcn_core::islandization::islandize;
use lpcn_core::octree::Octree;
use lpcn_core::scheduling::run_pipeline;
use lpcn_core::structuring::structure;
use lpcn_core::synth::{self, CloudKind, CloudSpec};

use report::*;

#[derive(Parser)]
#[command(name = "lpcn", version, about = "Locality-aware point-cloud pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonOpts {
    /// Plain-text point file (one `x y z f...` line per point).
    #[arg(long, conflicts_with = "synth")]
    input: Option<PathBuf>,
    /// Synthetic cloud spec, e.g. `sphere:n=1024,f=3,seed=7`,
    /// `cube:n=512,f=0,seed=1`, `clusters:n=600,k=4,sigma=0.05,f=2,seed=3`,
    /// `grid:nx=4,ny=4,nz=4,f=0,seed=0`.
    #[arg(long)]
    synth: Option<String>,
    /// Subset size K.
    #[arg(long, default_value_t = 32)]
    k: usize,
    /// Number of central points M.
    #[arg(long, default_value_t = 512)]
    centrals: usize,
    /// Target subsets per island S.
    #[arg(long, default_value_t = 32)]
    island_size: usize,
    /// Hub cache capacity in entries (default 2K).
    #[arg(long)]
    cache_entries: Option<usize>,
    /// Neighbor method: `knn` or `bq:<radius>`.
    #[arg(long, default_value = "knn")]
    neighbor: String,
    /// Octree depth.
    #[arg(long, default_value_t = 5)]
    depth: u32,
    /// Run seed; all randomness derives from it.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Reuse mode: baseline, exact, compensated.
    #[arg(long, default_value = "compensated")]
    mode: String,
    /// Model spec file (`seed N` + `layer d_in d_out relu|none` lines).
    #[arg(long)]
    model: Option<PathBuf>,
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Schedule islands on concurrent workers (outputs are identical).
    #[arg(long, default_value_t = false)]
    parallel_islands: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Sample centrals and gather subsets; print subset statistics.
    Structure {
        #[command(flatten)]
        common: CommonOpts,
        /// Also dump every subset's member ids.
        #[arg(long, default_value_t = false)]
        dump_subsets: bool,
    },
    /// Partition the subsets into islands and dump the partition.
    Islandize {
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Run the full pipeline in one reuse mode; emit counters and results.
    Run {
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Emit the overlap-vs-distance histogram as CSV.
    AnalyzeOverlap {
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Run baseline and reuse modes, report savings and reuse error.
    Compare {
        #[command(flatten)]
        common: CommonOpts,
        /// Sweep one parameter, e.g. `island-size=8,16,32,64` or
        /// `cache-entries=32,64,128`.
        #[arg(long)]
        sweep: Option<String>,
    },
}

fn parse_neighbor(s: &str) -> Result<NeighborMethod, String> {
    if s == "knn" {
        return Ok(NeighborMethod::Knn);
    }
    if let Some(r) = s.strip_prefix("bq:") {
        let radius: f32 = r.parse().map_err(|_| format!("bad ball-query radius `{r}`"))?;
        return Ok(NeighborMethod::BallQuery { radius });
    }
    Err(format!("unknown neighbor method `{s}` (use `knn` or `bq:<radius>`)"))
}

fn parse_mode(s: &str) -> Result<ReuseMode, String> {
    match s {
        "baseline" => Ok(ReuseMode::Baseline),
        "exact" => Ok(ReuseMode::ExactReuse),
        "compensated" => Ok(ReuseMode::CompensatedReuse),
        other => Err(format!("unknown mode `{other}`")),
    }
}

fn parse_synth(spec: &str) -> Result<CloudSpec, String> {
    let (kind_name, rest) = spec.split_once(':').unwrap_or((spec, ""));
    let mut kv = std::collections::HashMap::new();
    for pair in rest.split(',').filter(|p| !p.is_empty()) {
        let (k, v) = pair
            .split_once('=')
            .ok_or_else(|| format!("bad synth parameter `{pair}`"))?;
        kv.insert(k.trim(), v.trim());
    }
    let get_usize = |key: &str, default: usize| -> Result<usize, String> {
        kv.get(key)
            .map(|v| v.parse().map_err(|_| format!("bad `{key}` value")))
            .unwrap_or(Ok(default))
    };
    let get_f32 = |key: &str, default: f32| -> Result<f32, String> {
        kv.get(key)
            .map(|v| v.parse().map_err(|_| format!("bad `{key}` value")))
            .unwrap_or(Ok(default))
    };
    let n = get_usize("n", 1024)?;
    let feat_dim = get_usize("f", 0)?;
    let seed = get_usize("seed", 0)? as u64;
    let kind = match kind_name {
        "cube" | "uniform_cube" => CloudKind::UniformCube,
        "sphere" | "sphere_surface" => CloudKind::SphereSurface,
        "clusters" | "gaussian_clusters" => CloudKind::GaussianClusters {
            k: get_usize("k", 4)?,
            sigma: get_f32("sigma", 0.05)?,
        },
        "grid" => {
            let nx = get_usize("nx", 4)?;
            let ny = get_usize("ny", 4)?;
            let nz = get_usize("nz", 4)?;
            return Ok(CloudSpec {
                kind: CloudKind::Grid { nx, ny, nz },
                n: nx * ny * nz,
                feat_dim,
                seed,
            });
        }
        other => return Err(format!("unknown synth kind `{other}`")),
    };
    Ok(CloudSpec {
        kind,
        n,
        feat_dim,
        seed,
    })
}

struct Setup {
    cloud: PointCloud,
    config: RunConfig,
    model: MlpModel,
}

fn load_setup(common: &CommonOpts) -> Result<Setup, String> {
    let cloud = if let Some(path) = &common.input {
        let text = fs::read_to_string(path)
            .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
        pointfile::parse(&text).map_err(|e| format!("{}: {e}", path.display()))?
    } else if let Some(spec) = &common.synth {
        let spec = parse_synth(spec)?;
        synth::generate(&spec).map_err(|e| e.to_string())?
    } else {
        return Err("one of --input or --synth is required".into());
    };
    let mut config = RunConfig::new(common.k, common.centrals, common.seed);
    config.island_size = common.island_size;
    if let Some(c) = common.cache_entries {
        config.hub_cache_entries = c;
    }
    config.neighbor_method = parse_neighbor(&common.neighbor)?;
    config.octree_depth = common.depth;
    config.reuse_mode = parse_mode(&common.mode)?;
    config.validate(cloud.len()).map_err(|e| e.to_string())?;
    let model = match &common.model {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
            parse_model_spec(&text).map_err(|e| format!("{}: {e}", path.display()))?
        }
        None => default_model(cloud.feat_dim, common.seed),
    };
    if model.input_dim() != 3 + cloud.feat_dim {
        return Err(format!(
            "model input dim {} does not match 3 + feature dim {}",
            model.input_dim(),
            cloud.feat_dim
        ));
    }
    Ok(Setup {
        cloud,
        config,
        model,
    })
}

/// Two relu layers then a linear output, seeded from the run seed.
fn default_model(feat_dim: usize, seed: u64) -> MlpModel {
    MlpModel::seeded(
        &[
            (3 + feat_dim, 32, Activation::Relu),
            (32, 64, Activation::Relu),
            (64, 64, Activation::None),
        ],
        seed,
    )
}

fn emit(common: &CommonOpts, text: &str) -> Result<(), String> {
    match &common.out {
        Some(path) => fs::write(path, text)
            .map_err(|e| format!("cannot write {}: {e}", path.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn to_json<T: serde::Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serialization");
    s.push('\n');
    s
}

fn run(cli: Cli) -> Result<(), String> {
    match cli.command {
        Command::Structure { common, dump_subsets } => {
            let setup = load_setup(&common)?;
            let bounds = compute_bounds(&setup.cloud);
            let tree = Octree::build(&setup.cloud, bounds, setup.config.octree_depth)
                .map_err(|e| e.to_string())?;
            let s = structure(&setup.cloud, &tree, &setup.config).map_err(|e| e.to_string())?;
            let real_sizes: Vec<usize> = s
                .subsets
                .iter()
                .map(|sub| sub.distinct_ids().len())
                .collect();
            let rep = StructureReport {
                n: setup.cloud.len(),
                feat_dim: setup.cloud.feat_dim,
                m: s.centrals.len(),
                k: setup.config.subset_size,
                mean_real_members: real_sizes.iter().sum::<usize>() as f64
                    / real_sizes.len() as f64,
                min_real_members: *real_sizes.iter().min().unwrap(),
                max_real_members: *real_sizes.iter().max().unwrap(),
                centrals: s.centrals.clone(),
                subsets: dump_subsets.then(|| {
                    s.subsets
                        .iter()
                        .map(|sub| SubsetDump {
                            central: sub.central_id,
                            members: sub.member_ids.clone(),
                        })
                        .collect()
                }),
            };
            emit(&common, &to_json(&rep))
        }
        Command::Islandize { common } => {
            let setup = load_setup(&common)?;
            let bounds = compute_bounds(&setup.cloud);
            let tree = Octree::build(&setup.cloud, bounds, setup.config.octree_depth)
                .map_err(|e| e.to_string())?;
            let s = structure(&setup.cloud, &tree, &setup.config).map_err(|e| e.to_string())?;
            let partition =
                islandize(&s, &setup.cloud, &setup.config).map_err(|e| e.to_string())?;
            emit(&common, &partition.dump())
        }
        Command::Run { common } => {
            let setup = load_setup(&common)?;
            let out = run_pipeline(
                &setup.cloud,
                &setup.model,
                &setup.config,
                common.parallel_islands,
            )
            .map_err(|e| e.to_string())?;
            let (oracle_hits, oracle_misses) = brute_force_reuse_oracle(&out.partition);
            let rep = RunReport {
                mode: common.mode.clone(),
                n: setup.cloud.len(),
                m: setup.config.num_centrals,
                k: setup.config.subset_size,
                island_count: out.partition.islands.len(),
                counters: out.counters,
                oracle_hits,
                oracle_misses,
                pooled_checksum: checksum(&out.results),
                results: out
                    .results
                    .iter()
                    .map(|r| ResultSummary {
                        central: r.central_id,
                        pooled_l1: r.pooled.iter().map(|v| v.abs() as f64).sum(),
                    })
                    .collect(),
            };
            emit(&common, &to_json(&rep))
        }
        Command::AnalyzeOverlap { common } => {
            let setup = load_setup(&common)?;
            let bounds = compute_bounds(&setup.cloud);
            let tree = Octree::build(&setup.cloud, bounds, setup.config.octree_depth)
                .map_err(|e| e.to_string())?;
            let s = structure(&setup.cloud, &tree, &setup.config).map_err(|e| e.to_string())?;
            let hist =
                overlap_histogram(&setup.cloud, &s.subsets).map_err(|e| e.to_string())?;
            let mut csv = String::from("bucket,min_pct,mean_pct,max_pct,pairs\n");
            for (label, b) in BUCKET_LABELS.iter().zip(hist.buckets.iter()) {
                csv.push_str(&format!(
                    "{label},{:.4},{:.4},{:.4},{}\n",
                    b.min_pct, b.mean_pct, b.max_pct, b.pairs
                ));
            }
            emit(&common, &csv)
        }
        Command::Compare { common, sweep } => {
            let setup = load_setup(&common)?;
            let rows = match sweep {
                None => vec![compare_once(&setup.cloud, &setup.model, &setup.config, &common)?],
                Some(spec) => {
                    let (param, values) = spec
                        .split_once('=')
                        .ok_or_else(|| format!("bad sweep spec `{spec}`"))?;
                    let values: Vec<usize> = values
                        .split(',')
                        .map(|v| v.trim().parse().map_err(|_| format!("bad sweep value `{v}`")))
                        .collect::<Result<_, _>>()?;
                    let mut rows = Vec::new();
                    for v in values {
                        let mut config = setup.config.clone();
                        match param {
                            "island-size" => config.island_size = v,
                            "cache-entries" => config.hub_cache_entries = v,
                            other => return Err(format!("unknown sweep parameter `{other}`")),
                        }
                        rows.push(compare_once(&setup.cloud, &setup.model, &config, &common)?);
                    }
                    rows
                }
            };
            let rep = CompareReport { rows };
            emit(&common, &to_json(&rep))
        }
    }
}

fn compare_once(
    cloud: &PointCloud,
    model: &MlpModel,
    config: &RunConfig,
    common: &CommonOpts,
) -> Result<CompareRow, String> {
    let mut base_cfg = config.clone();
    base_cfg.reuse_mode = ReuseMode::Baseline;
    let mut opt_cfg = config.clone();
    if opt_cfg.reuse_mode == ReuseMode::Baseline {
        opt_cfg.reuse_mode = ReuseMode::CompensatedReuse;
    }
    let base = run_pipeline(cloud, model, &base_cfg, common.parallel_islands)
        .map_err(|e| e.to_string())?;
    let opt = run_pipeline(cloud, model, &opt_cfg, common.parallel_islands)
        .map_err(|e| e.to_string())?;
    let savings = savings_report(&base.counters, &opt.counters).map_err(|e| e.to_string())?;
    let err = accounting::reuse_error_report(cloud, model, config).map_err(|e| e.to_string())?;
    Ok(CompareRow {
        island_size: config.island_size,
        cache_entries: config.hub_cache_entries,
        baseline: base.counters,
        optimized: opt.counters,
        savings,
        max_rel_error: err.max_rel_error,
        mean_rel_error: err.mean_rel_error,
        hit_argmax_fraction: err.hit_argmax_fraction,
    })
}

fn checksum(results: &[lpcn_core::scheduling::SubsetResult]) -> String {
    // order-sensitive FNV-1a over the raw f32 bits
    let mut h: u64 = 0xcbf29ce484222325;
    for r in results {
        for &v in &r.pooled {
            for b in v.to_bits().to_le_bytes() {
                h ^= b as u64;
                h = h.wrapping_mul(0x100000001b3);
            }
        }
    }
    format!("{h:016x}")
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}
