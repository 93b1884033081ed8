use alloc::vec::Vec;

use crate::tensor::{lit, Scalar, Tensor};

const INSTANCE_NORM_EPS: f64 = 1e-5;

/// Normalized activations and per-plane inverse deviations of an instance norm.
#[derive(Debug, Clone)]
pub struct NormCache<T> {
    xhat: Tensor<T>,
    inv_std: Vec<T>,
}

/// Non-affine instance normalization over each (sample, channel) plane.
pub fn instance_norm<T: Scalar>(x: &Tensor<T>) -> (Tensor<T>, NormCache<T>) {
    let plane = x.height() * x.width();
    let count = lit::<T>(plane as f64);
    let eps = lit::<T>(INSTANCE_NORM_EPS);
    let mut out = x.clone();
    let mut inv_std = Vec::with_capacity(x.batch() * x.channels());
    for chunk in out.data_mut().chunks_exact_mut(plane) {
        let mean = chunk.iter().fold(T::zero(), |a, &v| a + v) / count;
        let var = chunk.iter().fold(T::zero(), |a, &v| a + (v - mean) * (v - mean)) / count;
        let inv = T::one() / (var + eps).sqrt();
        for v in chunk.iter_mut() {
            *v = (*v - mean) * inv;
        }
        inv_std.push(inv);
    }
    let cache = NormCache { xhat: out.clone(), inv_std };
    (out, cache)
}

pub fn instance_norm_backward<T: Scalar>(cache: &NormCache<T>, grad_out: &Tensor<T>) -> Tensor<T> {
    let plane = grad_out.height() * grad_out.width();
    let count = lit::<T>(plane as f64);
    let mut gx = grad_out.clone();
    for ((g, xh), &inv) in gx
        .data_mut()
        .chunks_exact_mut(plane)
        .zip(cache.xhat.data().chunks_exact(plane))
        .zip(&cache.inv_std)
    {
        let mean_g = g.iter().fold(T::zero(), |a, &v| a + v) / count;
        let mean_gx = g.iter().zip(xh).fold(T::zero(), |a, (&gv, &xv)| a + gv * xv) / count;
        for (gv, &xv) in g.iter_mut().zip(xh) {
            *gv = inv * (*gv - mean_g - xv * mean_gx);
        }
    }
    gx
}

/// Nearest-neighbour 2x upsampling.
pub fn upsample2x<T: Scalar>(x: &Tensor<T>) -> Tensor<T> {
    let [n, c, h, w] = x.dims();
    let mut out = Tensor::zeros([n, c, 2 * h, 2 * w]);
    for (src, dst) in x.data().chunks_exact(h * w).zip(out.data_mut().chunks_exact_mut(4 * h * w)) {
        for y in 0..2 * h {
            let row = &src[(y / 2) * w..(y / 2 + 1) * w];
            for (xo, d) in dst[y * 2 * w..(y + 1) * 2 * w].iter_mut().enumerate() {
                *d = row[xo / 2];
            }
        }
    }
    out
}

pub fn upsample2x_backward<T: Scalar>(grad_out: &Tensor<T>) -> Tensor<T> {
    let [n, c, h2, w2] = grad_out.dims();
    let (h, w) = (h2 / 2, w2 / 2);
    let mut gx = Tensor::zeros([n, c, h, w]);
    for (src, dst) in grad_out.data().chunks_exact(h2 * w2).zip(gx.data_mut().chunks_exact_mut(h * w)) {
        for y in 0..h2 {
            for xo in 0..w2 {
                dst[(y / 2) * w + xo / 2] += src[y * w2 + xo];
            }
        }
    }
    gx
}
