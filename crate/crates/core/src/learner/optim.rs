use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A named, flat parameter tensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamBlock {
    pub name: String,
    pub data: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ParamSet {
    pub blocks: Vec<ParamBlock>,
}

impl ParamSet {
    pub fn push(&mut self, name: &str, data: Vec<f64>) {
        self.blocks.push(ParamBlock {
            name: name.to_string(),
            data,
        });
    }

    pub fn zeros_like(&self) -> ParamSet {
        ParamSet {
            blocks: self
                .blocks
                .iter()
                .map(|b| ParamBlock {
                    name: b.name.clone(),
                    data: vec![0.0; b.data.len()],
                })
                .collect(),
        }
    }

    pub fn block(&self, name: &str) -> &[f64] {
        &self.blocks.iter().find(|b| b.name == name).expect("known block").data
    }

    pub fn len(&self) -> usize {
        self.blocks.iter().map(|b| b.data.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Flat view position → (block, offset).
    pub fn locate(&self, mut k: usize) -> (usize, usize) {
        for (b, block) in self.blocks.iter().enumerate() {
            if k < block.data.len() {
                return (b, k);
            }
            k -= block.data.len();
        }
        panic!("parameter index out of range");
    }

    pub fn get_flat(&self, k: usize) -> f64 {
        let (b, i) = self.locate(k);
        self.blocks[b].data[i]
    }

    pub fn set_flat(&mut self, k: usize, v: f64) {
        let (b, i) = self.locate(k);
        self.blocks[b].data[i] = v;
    }

    pub fn scale(&mut self, s: f64) {
        for b in &mut self.blocks {
            for v in &mut b.data {
                *v *= s;
            }
        }
    }

    pub fn add_assign(&mut self, other: &ParamSet) {
        for (a, b) in self.blocks.iter_mut().zip(&other.blocks) {
            for (x, y) in a.data.iter_mut().zip(&b.data) {
                *x += y;
            }
        }
    }

    /// Name of the first block holding a non-finite value.
    pub fn first_non_finite(&self) -> Option<&str> {
        self.blocks
            .iter()
            .find(|b| b.data.iter().any(|v| !v.is_finite()))
            .map(|b| b.name.as_str())
    }

    fn same_shape(&self, other: &ParamSet) -> bool {
        self.blocks.len() == other.blocks.len()
            && self
                .blocks
                .iter()
                .zip(&other.blocks)
                .all(|(a, b)| a.data.len() == b.data.len())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamHyper {
    pub lr_base: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamHyper {
    fn default() -> Self {
        AdamHyper {
            lr_base: 5e-5,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Adam moments and step counter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimState {
    pub m: ParamSet,
    pub v: ParamSet,
    pub step: u64,
    pub hyper: AdamHyper,
}

impl OptimState {
    pub fn new(params: &ParamSet, hyper: AdamHyper) -> Self {
        OptimState {
            m: params.zeros_like(),
            v: params.zeros_like(),
            step: 0,
            hyper,
        }
    }
}

/// One Adam update with bias correction and no weight decay, at learning
/// rate `lr`. Nothing is modified when a gradient is non-finite.
pub fn adam_step(params: &mut ParamSet, grads: &ParamSet, state: &mut OptimState, lr: f64) -> Result<()> {
    if !params.same_shape(grads) || !params.same_shape(&state.m) {
        return Err(Error::Input("parameter, gradient and moment shapes disagree".into()));
    }
    if let Some(name) = grads.first_non_finite() {
        return Err(Error::Numeric(format!("non-finite gradient in {name}")));
    }
    let AdamHyper { beta1, beta2, eps, .. } = state.hyper;
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - beta1.powi(t);
    let c2 = 1.0 - beta2.powi(t);
    for (b, block) in params.blocks.iter_mut().enumerate() {
        let g = &grads.blocks[b].data;
        let m = &mut state.m.blocks[b].data;
        let v = &mut state.v.blocks[b].data;
        for i in 0..block.data.len() {
            m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
            v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
            let m_hat = m[i] / c1;
            let v_hat = v[i] / c2;
            block.data[i] -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one(v: f64) -> ParamSet {
        let mut p = ParamSet::default();
        p.push("w", vec![v]);
        p
    }

    #[test]
    fn zero_gradient_is_a_no_op() {
        let mut p = one(0.7);
        let mut s = OptimState::new(&p, AdamHyper::default());
        for _ in 0..5 {
            adam_step(&mut p, &one(0.0), &mut s, 1e-3).unwrap();
        }
        assert_eq!(p, one(0.7));
        assert_eq!(s.step, 5);
    }

    #[test]
    fn zero_betas_give_normalised_gradient_step() {
        let hyper = AdamHyper { lr_base: 0.1, beta1: 0.0, beta2: 0.0, eps: 1e-8 };
        for g in [0.3, -2.0, 1e-3] {
            let mut p = one(0.0);
            let mut s = OptimState::new(&p, hyper);
            adam_step(&mut p, &one(g), &mut s, 0.1).unwrap();
            let expected = -0.1 * g / (g.abs() + 1e-8);
            assert!((p.blocks[0].data[0] - expected).abs() < 1e-15);
        }
    }

    #[test]
    fn constant_gradient_steps_approach_lr_sign() {
        let mut p = one(0.0);
        let mut s = OptimState::new(&p, AdamHyper::default());
        let mut prev = 0.0;
        let mut last = 0.0;
        for _ in 0..2000 {
            adam_step(&mut p, &one(-0.02), &mut s, 1e-3).unwrap();
            last = p.blocks[0].data[0] - prev;
            prev = p.blocks[0].data[0];
        }
        assert!((last - 1e-3).abs() < 1e-8, "{last}");
    }

    #[test]
    fn non_finite_gradient_names_the_block() {
        let mut p = one(1.0);
        let mut s = OptimState::new(&p, AdamHyper::default());
        let err = adam_step(&mut p, &one(f64::NAN), &mut s, 1e-3).unwrap_err();
        assert!(matches!(err, Error::Numeric(ref m) if m.contains('w')));
        assert_eq!(s.step, 0);
        assert_eq!(p, one(1.0));
    }
}
