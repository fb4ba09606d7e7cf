//! Reference feature computation: per-point shared-weight MLP, max
//! pooling, subset normalization, and result-delta compensation.
//!
//! Compensation runs the delta through the weights-only linearization of
//! the model (no bias, no activation): for an activation-free chain this
//! reproduces w(P - P_G) = w(P - P_A) + w*Delta exactly; through
//! activations it is the documented approximation.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::cloud::PointCloud;
use crate::error::{LpcnError, Result};
use crate::structuring::PointSubset;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    None,
    Relu,
}

#[derive(Debug, Clone)]
pub struct Layer {
    /// Row-major D_in x D_out.
    pub weights: Vec<f32>,
    pub bias: Vec<f32>,
    pub activation: Activation,
    pub d_in: usize,
    pub d_out: usize,
}

#[derive(Debug, Clone)]
pub struct MlpModel {
    pub layers: Vec<Layer>,
}

/// Row-major K x D matrix of f32 values.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub rows: usize,
    pub cols: usize,
    pub values: Vec<f32>,
}

impl FeatureMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        FeatureMatrix {
            rows,
            cols,
            values: vec![0.0; rows * cols],
        }
    }

    pub fn row(&self, r: usize) -> &[f32] {
        &self.values[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f32] {
        &mut self.values[r * self.cols..(r + 1) * self.cols]
    }

    pub fn from_rows(rows: &[Vec<f32>]) -> Self {
        let cols = rows.first().map_or(0, |r| r.len());
        FeatureMatrix {
            rows: rows.len(),
            cols,
            values: rows.iter().flat_map(|r| r.iter().copied()).collect(),
        }
    }
}

impl MlpModel {
    pub fn input_dim(&self) -> usize {
        self.layers.first().map_or(0, |l| l.d_in)
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, |l| l.d_out)
    }

    /// Multiply-accumulate count of one point through all layers.
    pub fn per_point_macs(&self) -> u64 {
        self.layers.iter().map(|l| (l.d_in * l.d_out) as u64).sum()
    }

    /// Total weight values (weights + biases), fetched once per building
    /// block execution.
    pub fn weight_count(&self) -> u64 {
        self.layers
            .iter()
            .map(|l| (l.d_in * l.d_out + l.d_out) as u64)
            .sum()
    }

    /// True when no layer before the last applies an activation; reuse of
    /// pre-activation results is then exact.
    pub fn is_linear_before_output(&self) -> bool {
        self.layers
            .iter()
            .rev()
            .skip(1)
            .all(|l| l.activation == Activation::None)
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(LpcnError::InvalidConfig("model has no layers".into()));
        }
        for w in self.layers.windows(2) {
            if w[0].d_out != w[1].d_in {
                return Err(LpcnError::InvalidConfig(format!(
                    "layer dims do not chain: {} -> {}",
                    w[0].d_out, w[1].d_in
                )));
            }
        }
        for (i, l) in self.layers.iter().enumerate() {
            if l.weights.len() != l.d_in * l.d_out || l.bias.len() != l.d_out {
                return Err(LpcnError::InvalidConfig(format!(
                    "layer {i} has inconsistent weight/bias sizes"
                )));
            }
            if l.weights.iter().chain(l.bias.iter()).any(|v| !v.is_finite()) {
                return Err(LpcnError::InvalidConfig(format!("layer {i} has non-finite weights")));
            }
        }
        Ok(())
    }

    /// Seeded-random model: weights and biases uniform in [-0.5, 0.5]
    /// scaled by 1/sqrt(D_in).
    pub fn seeded(dims: &[(usize, usize, Activation)], seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = dims
            .iter()
            .map(|&(d_in, d_out, activation)| {
                let scale = 1.0 / (d_in as f32).sqrt();
                Layer {
                    weights: (0..d_in * d_out)
                        .map(|_| (rng.gen::<f32>() - 0.5) * scale)
                        .collect(),
                    bias: (0..d_out).map(|_| (rng.gen::<f32>() - 0.5) * scale).collect(),
                    activation,
                    d_in,
                    d_out,
                }
            })
            .collect();
        MlpModel { layers }
    }

    fn forward_row(&self, input: &[f32], skip_final_activation: bool) -> Vec<f32> {
        let last = self.layers.len() - 1;
        let mut cur: Vec<f32> = input.to_vec();
        for (li, layer) in self.layers.iter().enumerate() {
            let mut next = vec![0.0f32; layer.d_out];
            for (o, slot) in next.iter_mut().enumerate() {
                // accumulate in f64
                let mut acc = layer.bias[o] as f64;
                for (i, &v) in cur.iter().enumerate() {
                    acc += v as f64 * layer.weights[i * layer.d_out + o] as f64;
                }
                *slot = acc as f32;
            }
            let apply_act = !(skip_final_activation && li == last);
            if apply_act && layer.activation == Activation::Relu {
                for v in &mut next {
                    *v = v.max(0.0);
                }
            }
            cur = next;
        }
        cur
    }

    /// Per-row independent forward pass with all activations applied.
    pub fn mlp_forward(&self, fm: &FeatureMatrix) -> Result<FeatureMatrix> {
        if fm.cols != self.input_dim() {
            return Err(LpcnError::DimensionMismatch {
                got: fm.cols,
                expected: self.input_dim(),
            });
        }
        let rows: Vec<Vec<f32>> = (0..fm.rows)
            .map(|r| self.forward_row(fm.row(r), false))
            .collect();
        Ok(FeatureMatrix::from_rows(&rows))
    }

    /// Forward pass that leaves the final layer's activation off; the
    /// cacheable per-point result.
    pub fn forward_preact(&self, fm: &FeatureMatrix) -> Result<FeatureMatrix> {
        if fm.cols != self.input_dim() {
            return Err(LpcnError::DimensionMismatch {
                got: fm.cols,
                expected: self.input_dim(),
            });
        }
        let rows: Vec<Vec<f32>> = (0..fm.rows)
            .map(|r| self.forward_row(fm.row(r), true))
            .collect();
        Ok(FeatureMatrix::from_rows(&rows))
    }

    pub fn forward_preact_row(&self, row: &[f32]) -> Vec<f32> {
        self.forward_row(row, true)
    }

    /// Apply the final layer's activation to a pre-activation vector.
    pub fn final_activation(&self, v: &[f32]) -> Vec<f32> {
        match self.layers.last().map(|l| l.activation) {
            Some(Activation::Relu) => v.iter().map(|x| x.max(0.0)).collect(),
            _ => v.to_vec(),
        }
    }

    /// Weights-only forward (no bias, no activation) of a delta input
    /// [dx, dy, dz, 0, ..., 0].
    pub fn linearized_delta(&self, delta: [f32; 3]) -> Vec<f32> {
        let mut cur = vec![0.0f32; self.input_dim()];
        cur[..3].copy_from_slice(&delta);
        for layer in &self.layers {
            let mut next = vec![0.0f32; layer.d_out];
            for (o, slot) in next.iter_mut().enumerate() {
                let mut acc = 0.0f64;
                for (i, &v) in cur.iter().enumerate() {
                    acc += v as f64 * layer.weights[i * layer.d_out + o] as f64;
                }
                *slot = acc as f32;
            }
            cur = next;
        }
        cur
    }
}

/// cached + weights-only forward of the delta. Exact for activation-free
/// models, the documented approximation otherwise.
pub fn delta_compensate(cached: &[f32], model: &MlpModel, delta: [f32; 3]) -> Vec<f32> {
    let adj = model.linearized_delta(delta);
    apply_adjustment(cached, &adj)
}

pub fn apply_adjustment(cached: &[f32], adj: &[f32]) -> Vec<f32> {
    cached.iter().zip(adj).map(|(c, a)| c + a).collect()
}

/// Row per member: [x - x_c, y - y_c, z - z_c, f_1..f_F]. The central's
/// coordinate part is zero.
pub fn normalize_subset(cloud: &PointCloud, subset: &PointSubset) -> FeatureMatrix {
    let central = cloud.pos(subset.central_id);
    let cols = 3 + cloud.feat_dim;
    let mut fm = FeatureMatrix::zeros(subset.member_ids.len(), cols);
    for (r, &id) in subset.member_ids.iter().enumerate() {
        let rec = &cloud.records[id as usize];
        let row = fm.row_mut(r);
        row[0] = rec.pos.x - central.x;
        row[1] = rec.pos.y - central.y;
        row[2] = rec.pos.z - central.z;
        row[3..].copy_from_slice(&rec.feat);
    }
    fm
}

/// Normalize a single member id against a central position.
pub fn normalize_row(cloud: &PointCloud, central_id: u32, id: u32) -> Vec<f32> {
    let central = cloud.pos(central_id);
    let rec = &cloud.records[id as usize];
    let mut row = Vec::with_capacity(3 + cloud.feat_dim);
    row.push(rec.pos.x - central.x);
    row.push(rec.pos.y - central.y);
    row.push(rec.pos.z - central.z);
    row.extend_from_slice(&rec.feat);
    row
}

/// Columnwise maximum.
pub fn max_pool(fm: &FeatureMatrix) -> Vec<f32> {
    assert!(fm.rows >= 1);
    let mut out = fm.row(0).to_vec();
    for r in 1..fm.rows {
        for (o, &v) in fm.row(r).iter().enumerate() {
            if v > out[o] {
                out[o] = v;
            }
        }
    }
    out
}

/// Columnwise maximum plus the winning row per column (first row wins
/// ties, matching max_pool's strict-greater update).
pub fn max_pool_argmax(rows: &[Vec<f32>]) -> (Vec<f32>, Vec<usize>) {
    assert!(!rows.is_empty());
    let mut out = rows[0].clone();
    let mut arg = vec![0usize; out.len()];
    for (r, row) in rows.iter().enumerate().skip(1) {
        for (o, &v) in row.iter().enumerate() {
            if v > out[o] {
                out[o] = v;
                arg[o] = r;
            }
        }
    }
    (out, arg)
}

/// Parse a model spec: `seed N` line plus `layer D_in D_out relu|none`
/// lines. Comments start with '#'.
pub fn parse_model_spec(text: &str) -> Result<MlpModel> {
    let mut seed = 0u64;
    let mut dims: Vec<(usize, usize, Activation)> = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        let err = |msg: String| LpcnError::Parse {
            line: lineno + 1,
            msg,
        };
        match toks[0] {
            "seed" => {
                seed = toks
                    .get(1)
                    .and_then(|t| t.parse().ok())
                    .ok_or_else(|| err("expected `seed <u64>`".into()))?;
            }
            "layer" => {
                if toks.len() != 4 {
                    return Err(err("expected `layer <d_in> <d_out> <relu|none>`".into()));
                }
                let d_in = toks[1].parse().map_err(|_| err("bad d_in".into()))?;
                let d_out = toks[2].parse().map_err(|_| err("bad d_out".into()))?;
                let act = match toks[3] {
                    "relu" => Activation::Relu,
                    "none" => Activation::None,
                    other => return Err(err(format!("unknown activation `{other}`"))),
                };
                dims.push((d_in, d_out, act));
            }
            other => return Err(err(format!("unknown directive `{other}`"))),
        }
    }
    if dims.is_empty() {
        return Err(LpcnError::InvalidConfig("model spec has no layers".into()));
    }
    let model = MlpModel::seeded(&dims, seed);
    model.validate()?;
    Ok(model)
}
