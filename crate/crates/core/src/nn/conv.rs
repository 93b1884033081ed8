use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use super::params::{ParamId, ParamSet};
use crate::tensor::{Scalar, Tensor};

/// How a convolution extends its input beyond the border.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Padding {
    /// Mirror without repeating the edge sample (`dcb|abcd|cba`).
    Reflect,
    Zero,
}

/// Maps a padded coordinate to a source index, `None` when it reads zero.
#[inline]
fn source_index(i: isize, len: usize, mode: Padding) -> Option<usize> {
    let n = len as isize;
    if (0..n).contains(&i) {
        return Some(i as usize);
    }
    match mode {
        Padding::Zero => None,
        Padding::Reflect => {
            let r = if i < 0 { -i } else { 2 * (n - 1) - i };
            Some(r as usize)
        }
    }
}

/// 2-D convolution over NCHW tensors with square kernels.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv2d {
    pub weight: ParamId,
    pub bias: Option<ParamId>,
    pub in_ch: usize,
    pub out_ch: usize,
    pub kernel: usize,
    pub stride: usize,
    pub pad: usize,
    pub mode: Padding,
}

/// Saved forward input of a [`Conv2d`].
#[derive(Debug, Clone)]
pub struct ConvCache<T> {
    input: Tensor<T>,
}

/// Precomputed source offsets for one spatial axis: `map[k * out + o]`.
struct AxisMap {
    map: Vec<Option<usize>>,
}

impl AxisMap {
    fn new(len: usize, out: usize, kernel: usize, stride: usize, pad: usize, mode: Padding) -> Self {
        let mut map = Vec::with_capacity(kernel * out);
        for k in 0..kernel {
            for o in 0..out {
                let i = (o * stride + k) as isize - pad as isize;
                map.push(source_index(i, len, mode));
            }
        }
        Self { map }
    }

    #[inline]
    fn row(&self, k: usize, out: usize) -> &[Option<usize>] {
        &self.map[k * out..(k + 1) * out]
    }
}

impl Conv2d {
    /// Registers a convolution in `params`, initialized from
    /// `U(-1/sqrt(fan_in), 1/sqrt(fan_in))`.
    #[allow(clippy::too_many_arguments)]
    pub fn new<T: Scalar, R: Rng + ?Sized>(
        params: &mut ParamSet<T>,
        name: &str,
        in_ch: usize,
        out_ch: usize,
        kernel: usize,
        stride: usize,
        pad: usize,
        mode: Padding,
        bias: bool,
        rng: &mut R,
    ) -> Self {
        let fan_in = (in_ch * kernel * kernel) as f64;
        let bound = 1.0 / libm::sqrt(fan_in);
        let weight = params.push_uniform(format!("{name}.weight"), [out_ch, in_ch, kernel, kernel], bound, rng);
        let bias = bias.then(|| params.push_uniform(format!("{name}.bias"), [out_ch, 1, 1, 1], bound, rng));
        Self { weight, bias, in_ch, out_ch, kernel, stride, pad, mode }
    }

    /// Output spatial size for an `h x w` input, `None` when the input is too
    /// small for the kernel or for reflection padding.
    pub fn output_hw(&self, h: usize, w: usize) -> Option<(usize, usize)> {
        if self.mode == Padding::Reflect && (self.pad >= h || self.pad >= w) {
            return None;
        }
        let (hp, wp) = (h + 2 * self.pad, w + 2 * self.pad);
        if hp < self.kernel || wp < self.kernel {
            return None;
        }
        Some(((hp - self.kernel) / self.stride + 1, (wp - self.kernel) / self.stride + 1))
    }

    fn is_pointwise(&self) -> bool {
        self.kernel == 1 && self.stride == 1 && self.pad == 0
    }

    fn maps(&self, h: usize, w: usize, ho: usize, wo: usize) -> (AxisMap, AxisMap) {
        (
            AxisMap::new(h, ho, self.kernel, self.stride, self.pad, self.mode),
            AxisMap::new(w, wo, self.kernel, self.stride, self.pad, self.mode),
        )
    }

    fn im2col<T: Scalar>(&self, x: &[T], h: usize, w: usize, ym: &AxisMap, xm: &AxisMap, ho: usize, wo: usize, cols: &mut [T]) {
        let k = self.kernel;
        let p = ho * wo;
        for c in 0..self.in_ch {
            let plane = &x[c * h * w..(c + 1) * h * w];
            for ky in 0..k {
                let rows = ym.row(ky, ho);
                for kx in 0..k {
                    let cidx = xm.row(kx, wo);
                    let dst = &mut cols[((c * k + ky) * k + kx) * p..][..p];
                    for (oy, sy) in rows.iter().enumerate() {
                        let out = &mut dst[oy * wo..(oy + 1) * wo];
                        match sy {
                            None => out.fill(T::zero()),
                            Some(sy) => {
                                let src = &plane[sy * w..(sy + 1) * w];
                                for (o, sx) in out.iter_mut().zip(cidx) {
                                    *o = match sx {
                                        Some(sx) => src[*sx],
                                        None => T::zero(),
                                    };
                                }
                            }
                        }
                    }
                }
            }
        }
    }

    fn col2im<T: Scalar>(&self, cols: &[T], h: usize, w: usize, ym: &AxisMap, xm: &AxisMap, ho: usize, wo: usize, gx: &mut [T]) {
        let k = self.kernel;
        let p = ho * wo;
        for c in 0..self.in_ch {
            let plane = &mut gx[c * h * w..(c + 1) * h * w];
            for ky in 0..k {
                let rows = ym.row(ky, ho);
                for kx in 0..k {
                    let cidx = xm.row(kx, wo);
                    let src = &cols[((c * k + ky) * k + kx) * p..][..p];
                    for (oy, sy) in rows.iter().enumerate() {
                        let Some(sy) = sy else { continue };
                        let dst = &mut plane[sy * w..(sy + 1) * w];
                        for (g, sx) in src[oy * wo..(oy + 1) * wo].iter().zip(cidx) {
                            if let Some(sx) = sx {
                                dst[*sx] += *g;
                            }
                        }
                    }
                }
            }
        }
    }

    pub fn forward<T: Scalar>(&self, params: &ParamSet<T>, x: &Tensor<T>) -> (Tensor<T>, ConvCache<T>) {
        let [n, c, h, w] = x.dims();
        assert_eq!(c, self.in_ch, "conv: expected {} input channels, got {c}", self.in_ch);
        let (ho, wo) = self
            .output_hw(h, w)
            .unwrap_or_else(|| panic!("conv: input {h}x{w} too small for kernel {} pad {}", self.kernel, self.pad));
        let p = ho * wo;
        let ckk = c * self.kernel * self.kernel;
        let weight = params.get(self.weight).data();
        let mut out = Tensor::zeros([n, self.out_ch, ho, wo]);
        let mut cols = if self.is_pointwise() { Vec::new() } else { vec![T::zero(); ckk * p] };
        let (ym, xm) = self.maps(h, w, ho, wo);
        for s in 0..n {
            let xs = x.sample(s);
            let rhs: &[T] = if self.is_pointwise() {
                xs
            } else {
                self.im2col(xs, h, w, &ym, &xm, ho, wo, &mut cols);
                &cols
            };
            let dst = out.sample_mut(s);
            T::gemm(self.out_ch, ckk, p, T::one(), weight, ckk as isize, 1, rhs, p as isize, 1, T::zero(), dst, p as isize, 1);
            if let Some(b) = self.bias {
                let bias = params.get(b).data();
                for (o, &bv) in bias.iter().enumerate() {
                    for v in &mut dst[o * p..(o + 1) * p] {
                        *v += bv;
                    }
                }
            }
        }
        (out, ConvCache { input: x.clone() })
    }

    /// Accumulates weight/bias gradients into `grads`; returns the input
    /// gradient when `need_input` is set.
    pub fn backward<T: Scalar>(
        &self,
        params: &ParamSet<T>,
        grads: &mut ParamSet<T>,
        cache: &ConvCache<T>,
        grad_out: &Tensor<T>,
        need_input: bool,
    ) -> Option<Tensor<T>> {
        let x = &cache.input;
        let [n, c, h, w] = x.dims();
        let [gn, go, ho, wo] = grad_out.dims();
        assert_eq!((gn, go), (n, self.out_ch), "conv backward: gradient shape mismatch");
        let p = ho * wo;
        let ckk = c * self.kernel * self.kernel;
        let weight = params.get(self.weight).data();
        let (ym, xm) = self.maps(h, w, ho, wo);
        let mut cols = if self.is_pointwise() { Vec::new() } else { vec![T::zero(); ckk * p] };
        let mut gcols = if need_input && !self.is_pointwise() { vec![T::zero(); ckk * p] } else { Vec::new() };
        let mut gx = need_input.then(|| x.zeros_like());

        for s in 0..n {
            let gs = grad_out.sample(s);
            let xs = x.sample(s);
            let rhs: &[T] = if self.is_pointwise() {
                xs
            } else {
                self.im2col(xs, h, w, &ym, &xm, ho, wo, &mut cols);
                &cols
            };
            let gw = grads.get_mut(self.weight).data_mut();
            T::gemm(self.out_ch, p, ckk, T::one(), gs, p as isize, 1, rhs, 1, p as isize, T::one(), gw, ckk as isize, 1);
            if let Some(b) = self.bias {
                let gb = grads.get_mut(b).data_mut();
                for (o, g) in gb.iter_mut().enumerate() {
                    *g += gs[o * p..(o + 1) * p].iter().fold(T::zero(), |a, &v| a + v);
                }
            }
            if let Some(gx) = gx.as_mut() {
                let dst = gx.sample_mut(s);
                if self.is_pointwise() {
                    T::gemm(ckk, self.out_ch, p, T::one(), weight, 1, ckk as isize, gs, p as isize, 1, T::zero(), dst, p as isize, 1);
                } else {
                    T::gemm(ckk, self.out_ch, p, T::one(), weight, 1, ckk as isize, gs, p as isize, 1, T::zero(), &mut gcols, p as isize, 1);
                    self.col2im(&gcols, h, w, &ym, &xm, ho, wo, dst);
                }
            }
        }
        gx
    }
}
