use alloc::vec::Vec;

use crate::error::{invalid_arg, Result};
use crate::nn::ParamSet;
use crate::tensor::Scalar;

/// Adam over a group of parameter sets, with bias-corrected moments.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam<T> {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Number of updates applied so far.
    pub t: u64,
    pub m: Vec<ParamSet<T>>,
    pub v: Vec<ParamSet<T>>,
}

impl<T: Scalar> Adam<T> {
    /// Zero moments shaped like `sets`, with beta1 = 0.5 and beta2 = 0.999.
    pub fn new(sets: &[&ParamSet<T>], lr: f64) -> Result<Self> {
        if !(lr > 0.0 && lr.is_finite()) {
            return Err(invalid_arg!("learning rate must be positive, got {lr}"));
        }
        let m: Vec<_> = sets.iter().map(|s| s.zeros_like()).collect();
        Ok(Self { lr, beta1: 0.5, beta2: 0.999, eps: 1e-8, t: 0, v: m.clone(), m })
    }

    pub fn with_betas(mut self, beta1: f64, beta2: f64) -> Self {
        self.beta1 = beta1;
        self.beta2 = beta2;
        self
    }

    pub fn step(&mut self, params: &mut [&mut ParamSet<T>], grads: &[&ParamSet<T>]) {
        assert_eq!(params.len(), self.m.len(), "adam: parameter group size changed");
        assert_eq!(grads.len(), self.m.len(), "adam: gradient group size mismatch");
        self.t += 1;
        let t = self.t as i32;
        let bc1 = 1.0 - libm::pow(self.beta1, t as f64);
        let bc2 = 1.0 - libm::pow(self.beta2, t as f64);
        let (b1, b2) = (T::from_f64(self.beta1), T::from_f64(self.beta2));
        let (one_b1, one_b2) = (T::from_f64(1.0 - self.beta1), T::from_f64(1.0 - self.beta2));
        let step_size = T::from_f64(self.lr / bc1);
        let sqrt_bc2 = T::from_f64(libm::sqrt(bc2));
        let eps = T::from_f64(self.eps);
        for (((p, g), m), v) in params.iter_mut().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            for (((pt, gt), mt), vt) in p.tensors_mut().iter_mut().zip(g.tensors()).zip(m.tensors_mut()).zip(v.tensors_mut()) {
                assert_eq!(pt.dims(), gt.dims(), "adam: gradient shape mismatch");
                for (((pv, &gv), mv), vv) in pt.data_mut().iter_mut().zip(gt.data()).zip(mt.data_mut()).zip(vt.data_mut()) {
                    *mv = b1 * *mv + one_b1 * gv;
                    *vv = b2 * *vv + one_b2 * gv * gv;
                    let denom = vv.sqrt() / sqrt_bc2 + eps;
                    *pv -= step_size * *mv / denom;
                }
            }
        }
    }
}
