use rand::Rng;
use serde::{Deserialize, Serialize};

use super::features::{Features, FEATURE_DIM};
use super::optim::ParamSet;
use crate::error::{Error, Result};
use crate::fusion::HeadOutputs;

/// One hidden ReLU layer shared by a semantic, a center and an offset head.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegModel {
    pub hidden: usize,
    pub n_classes: usize,
    /// Window radius used when featurizing inputs.
    pub radius: usize,
    /// Offsets are the raw head output times this.
    pub offset_scale: f64,
    pub params: ParamSet,
}

pub(crate) const HIDDEN_W: usize = 0;
pub(crate) const HIDDEN_B: usize = 1;
pub(crate) const SEM_W: usize = 2;
pub(crate) const SEM_B: usize = 3;
pub(crate) const CENTER_W: usize = 4;
pub(crate) const CENTER_B: usize = 5;
pub(crate) const OFFSET_W: usize = 6;
pub(crate) const OFFSET_B: usize = 7;

pub(crate) const BLOCK_NAMES: [&str; 8] = [
    "hidden.weight",
    "hidden.bias",
    "semantic.weight",
    "semantic.bias",
    "center.weight",
    "center.bias",
    "offset.weight",
    "offset.bias",
];

impl SegModel {
    /// Weights uniform in ±√(6/(fan_in+fan_out)), biases zero.
    pub fn init(hidden: usize, n_classes: usize, radius: usize, offset_scale: f64, rng: &mut impl Rng) -> Self {
        let mut glorot = |fan_in: usize, fan_out: usize| -> Vec<f64> {
            let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
            (0..fan_in * fan_out).map(|_| rng.random_range(-a..=a)).collect()
        };
        let blocks = [
            glorot(FEATURE_DIM, hidden),
            vec![0.0; hidden],
            glorot(hidden, n_classes),
            vec![0.0; n_classes],
            glorot(hidden, 1),
            vec![0.0; 1],
            glorot(hidden, 2),
            vec![0.0; 2],
        ];
        let mut params = ParamSet::default();
        for (name, data) in BLOCK_NAMES.iter().zip(blocks) {
            params.push(name, data);
        }
        SegModel {
            hidden,
            n_classes,
            radius,
            offset_scale,
            params,
        }
    }

    /// All parameters zero.
    pub fn zeros(hidden: usize, n_classes: usize, radius: usize, offset_scale: f64) -> Self {
        let mut m = SegModel::init(hidden, n_classes, radius, offset_scale, &mut crate::rng::seeded(0));
        m.params.scale(0.0);
        m
    }

    /// Checks block names and sizes against the declared shapes.
    pub fn check(&self) -> Result<()> {
        let (h, c) = (self.hidden, self.n_classes);
        let sizes = [FEATURE_DIM * h, h, c * h, c, h, 1, 2 * h, 2];
        let ok = self.params.blocks.len() == 8
            && self
                .params
                .blocks
                .iter()
                .zip(BLOCK_NAMES.iter().zip(sizes))
                .all(|(b, (name, n))| b.name == *name && b.data.len() == n);
        if !ok || h == 0 || c == 0 {
            return Err(Error::Format(format!("model parameters do not match hidden={h} classes={c}")));
        }
        if let Some(name) = self.params.first_non_finite() {
            return Err(Error::Numeric(format!("non-finite parameter in {name}")));
        }
        Ok(())
    }

    pub(crate) fn block(&self, b: usize) -> &[f64] {
        &self.params.blocks[b].data
    }
}

/// Forward activations kept for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardPass {
    pub width: usize,
    pub height: usize,
    pub n_classes: usize,
    /// Post-ReLU hidden activations, `n × hidden`.
    pub hidden: Vec<f64>,
    pub probs: Vec<f64>,
    pub log_probs: Vec<f64>,
    pub center: Vec<f64>,
    /// `(Δy, Δx)` per pixel, already scaled.
    pub offset: Vec<f64>,
}

impl ForwardPass {
    pub fn run(model: &SegModel, features: &Features) -> Result<Self> {
        model.check()?;
        let n = features.len();
        let (hd, c) = (model.hidden, model.n_classes);
        let w1 = model.block(HIDDEN_W);
        let b1 = model.block(HIDDEN_B);
        let ws = model.block(SEM_W);
        let bs = model.block(SEM_B);
        let wc = model.block(CENTER_W);
        let bc = model.block(CENTER_B)[0];
        let wo = model.block(OFFSET_W);
        let bo = model.block(OFFSET_B);
        let mut hidden = vec![0.0; n * hd];
        let mut probs = vec![0.0; n * c];
        let mut log_probs = vec![0.0; n * c];
        let mut center = vec![0.0; n];
        let mut offset = vec![0.0; 2 * n];
        for i in 0..n {
            let x = features.row(i);
            let h = &mut hidden[i * hd..(i + 1) * hd];
            for j in 0..hd {
                let row = &w1[j * FEATURE_DIM..(j + 1) * FEATURE_DIM];
                let a: f64 = b1[j] + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
                h[j] = a.max(0.0);
            }
            let z = &mut log_probs[i * c..(i + 1) * c];
            for k in 0..c {
                z[k] = bs[k] + dot(&ws[k * hd..(k + 1) * hd], h);
            }
            let zmax = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = zmax + z.iter().map(|v| (v - zmax).exp()).sum::<f64>().ln();
            for k in 0..c {
                z[k] -= lse;
                probs[i * c + k] = z[k].exp();
            }
            center[i] = sigmoid(bc + dot(wc, h));
            for d in 0..2 {
                offset[2 * i + d] = model.offset_scale * (bo[d] + dot(&wo[d * hd..(d + 1) * hd], h));
            }
        }
        let fp = ForwardPass {
            width: features.width,
            height: features.height,
            n_classes: c,
            hidden,
            probs,
            log_probs,
            center,
            offset,
        };
        if fp.probs.iter().chain(&fp.offset).chain(&fp.center).any(|v| !v.is_finite()) {
            return Err(Error::Numeric("forward pass produced non-finite outputs".into()));
        }
        Ok(fp)
    }

    pub fn to_heads(&self) -> Result<HeadOutputs> {
        let c = self.n_classes;
        let mut sem: Vec<f32> = self.probs.iter().map(|&p| p as f32).collect();
        // Narrowing to f32 can push a row sum past the tolerance.
        for row in sem.chunks_exact_mut(c) {
            let s: f32 = row.iter().sum();
            row.iter_mut().for_each(|p| *p /= s);
        }
        HeadOutputs::new(
            self.width,
            self.height,
            c,
            sem,
            self.center.iter().map(|&v| v as f32).collect(),
            self.offset.iter().map(|&v| v as f32).collect(),
        )
    }
}

/// Runs all three heads.
pub fn forward(model: &SegModel, features: &Features) -> Result<HeadOutputs> {
    ForwardPass::run(model, features)?.to_heads()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn sigmoid(a: f64) -> f64 {
    if a >= 0.0 {
        1.0 / (1.0 + (-a).exp())
    } else {
        let e = a.exp();
        e / (1.0 + e)
    }
}
