//! JSON-shaped report structures emitted by the subcommands.

use serde::Serialize;

use lpcn_core::accounting::{SavingsReport, WorkloadCounters};

#[derive(Serialize)]
pub struct SubsetDump {
    pub central: u32,
    pub members: Vec<u32>,
}

#[derive(Serialize)]
pub struct StructureReport {
    pub n: usize,
    pub feat_dim: usize,
    pub m: usize,
    pub k: usize,
    pub mean_real_members: f64,
    pub min_real_members: usize,
    pub max_real_members: usize,
    pub centrals: Vec<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub subsets: Option<Vec<SubsetDump>>,
}

#[derive(Serialize)]
pub struct ResultSummary {
    pub central: u32,
    pub pooled_l1: f64,
}

#[derive(Serialize)]
pub struct RunReport {
    pub mode: String,
    pub n: usize,
    pub m: usize,
    pub k: usize,
    pub island_count: usize,
    pub counters: WorkloadCounters,
    pub oracle_hits: u64,
    pub oracle_misses: u64,
    pub pooled_checksum: String,
    pub results: Vec<ResultSummary>,
}

#[derive(Serialize)]
pub struct CompareRow {
    pub island_size: usize,
    pub cache_entries: usize,
    pub baseline: WorkloadCounters,
    pub optimized: WorkloadCounters,
    pub savings: SavingsReport,
    pub max_rel_error: f64,
    pub mean_rel_error: f64,
    pub hit_argmax_fraction: f64,
}

#[derive(Serialize)]
pub struct CompareReport {
    pub rows: Vec<CompareRow>,
}
