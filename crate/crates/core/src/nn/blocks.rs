//! Building blocks of the encoders, generators and discriminators: the
//! convolution block, residual block, upsampling block and merge block.

use rand::Rng;

use super::conv::{Conv2d, ConvCache, Padding};
use super::layers::{instance_norm, instance_norm_backward, upsample2x, upsample2x_backward, NormCache};
use super::params::ParamSet;
use crate::tensor::{lit, Scalar, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Norm {
    None,
    Instance,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Act {
    None,
    Relu,
    LeakyRelu(f64),
    Tanh,
}

impl Act {
    fn apply<T: Scalar>(self, x: &mut Tensor<T>) {
        match self {
            Act::None => {}
            Act::Relu => x.data_mut().iter_mut().for_each(|v| *v = v.max(T::zero())),
            Act::LeakyRelu(slope) => {
                let s = lit::<T>(slope);
                x.data_mut().iter_mut().for_each(|v| {
                    if *v < T::zero() {
                        *v *= s
                    }
                })
            }
            Act::Tanh => x.data_mut().iter_mut().for_each(|v| *v = v.tanh()),
        }
    }

    /// Multiplies `grad` by the activation derivative, expressed through the output `y`.
    fn backward<T: Scalar>(self, y: &Tensor<T>, grad: &mut Tensor<T>) {
        match self {
            Act::None => {}
            Act::Relu => grad.data_mut().iter_mut().zip(y.data()).for_each(|(g, &y)| {
                if y <= T::zero() {
                    *g = T::zero()
                }
            }),
            Act::LeakyRelu(slope) => {
                let s = lit::<T>(slope);
                grad.data_mut().iter_mut().zip(y.data()).for_each(|(g, &y)| {
                    if y < T::zero() {
                        *g *= s
                    }
                })
            }
            Act::Tanh => grad.data_mut().iter_mut().zip(y.data()).for_each(|(g, &y)| *g *= T::one() - y * y),
        }
    }
}

/// Padding, convolution, optional instance norm and activation.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvBlock {
    pub conv: Conv2d,
    pub norm: Norm,
    pub act: Act,
}

#[derive(Debug, Clone)]
pub struct ConvBlockCache<T> {
    conv: ConvCache<T>,
    norm: Option<NormCache<T>>,
    out: Option<Tensor<T>>,
}

impl ConvBlock {
    /// Convolutions followed by instance norm carry no bias: the norm would
    /// cancel it and leave it without gradient.
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
        norm: Norm,
        act: Act,
        rng: &mut R,
    ) -> Self {
        let conv = Conv2d::new(params, name, in_ch, out_ch, kernel, stride, pad, mode, norm == Norm::None, rng);
        Self { conv, norm, act }
    }

    pub fn forward<T: Scalar>(&self, params: &ParamSet<T>, x: &Tensor<T>) -> (Tensor<T>, ConvBlockCache<T>) {
        let (mut y, conv) = self.conv.forward(params, x);
        let norm = match self.norm {
            Norm::None => None,
            Norm::Instance => {
                let (n, c) = instance_norm(&y);
                y = n;
                Some(c)
            }
        };
        self.act.apply(&mut y);
        let out = (self.act != Act::None).then(|| y.clone());
        (y, ConvBlockCache { conv, norm, out })
    }

    pub fn backward<T: Scalar>(
        &self,
        params: &ParamSet<T>,
        grads: &mut ParamSet<T>,
        cache: &ConvBlockCache<T>,
        grad_out: &Tensor<T>,
        need_input: bool,
    ) -> Option<Tensor<T>> {
        let mut g = grad_out.clone();
        if let Some(y) = &cache.out {
            self.act.backward(y, &mut g);
        }
        if let Some(nc) = &cache.norm {
            g = instance_norm_backward(nc, &g);
        }
        self.conv.backward(params, grads, &cache.conv, &g, need_input)
    }

    pub fn out_ch(&self) -> usize {
        self.conv.out_ch
    }
}

/// `x + conv_b(conv_a(x))` with two 3x3 convolutions.
#[derive(Debug, Clone, PartialEq)]
pub struct ResBlock {
    a: ConvBlock,
    b: ConvBlock,
}

#[derive(Debug, Clone)]
pub struct ResCache<T> {
    a: ConvBlockCache<T>,
    b: ConvBlockCache<T>,
}

impl ResBlock {
    pub fn new<T: Scalar, R: Rng + ?Sized>(params: &mut ParamSet<T>, name: &str, ch: usize, norm: Norm, mode: Padding, rng: &mut R) -> Self {
        let a = ConvBlock::new(params, &alloc::format!("{name}.conv1"), ch, ch, 3, 1, 1, mode, norm, Act::Relu, rng);
        let b = ConvBlock::new(params, &alloc::format!("{name}.conv2"), ch, ch, 3, 1, 1, mode, norm, Act::None, rng);
        Self { a, b }
    }

    pub fn forward<T: Scalar>(&self, params: &ParamSet<T>, x: &Tensor<T>) -> (Tensor<T>, ResCache<T>) {
        let (h, a) = self.a.forward(params, x);
        let (mut y, b) = self.b.forward(params, &h);
        y.add_assign(x);
        (y, ResCache { a, b })
    }

    pub fn backward<T: Scalar>(&self, params: &ParamSet<T>, grads: &mut ParamSet<T>, cache: &ResCache<T>, grad_out: &Tensor<T>) -> Tensor<T> {
        let gh = self.b.backward(params, grads, &cache.b, grad_out, true).expect("input gradient requested");
        let mut gx = self.a.backward(params, grads, &cache.a, &gh, true).expect("input gradient requested");
        gx.add_assign(grad_out);
        gx
    }
}

/// Nearest-neighbour 2x upsampling followed by a 5x5 convolution block.
#[derive(Debug, Clone, PartialEq)]
pub struct UpBlock {
    conv: ConvBlock,
}

impl UpBlock {
    #[allow(clippy::too_many_arguments)]
    pub fn new<T: Scalar, R: Rng + ?Sized>(
        params: &mut ParamSet<T>,
        name: &str,
        in_ch: usize,
        out_ch: usize,
        norm: Norm,
        mode: Padding,
        rng: &mut R,
    ) -> Self {
        Self { conv: ConvBlock::new(params, name, in_ch, out_ch, 5, 1, 2, mode, norm, Act::Relu, rng) }
    }

    pub fn forward<T: Scalar>(&self, params: &ParamSet<T>, x: &Tensor<T>) -> (Tensor<T>, ConvBlockCache<T>) {
        self.conv.forward(params, &upsample2x(x))
    }

    pub fn backward<T: Scalar>(&self, params: &ParamSet<T>, grads: &mut ParamSet<T>, cache: &ConvBlockCache<T>, grad_out: &Tensor<T>) -> Tensor<T> {
        let g = self.conv.backward(params, grads, cache, grad_out, true).expect("input gradient requested");
        upsample2x_backward(&g)
    }
}

/// Channel concatenation of a feature map with a side input, then a 1x1
/// convolution back to the feature map's width.
#[derive(Debug, Clone, PartialEq)]
pub struct MergeBlock {
    conv: ConvBlock,
    main_ch: usize,
}

#[derive(Debug, Clone)]
pub struct MergeCache<T>(ConvBlockCache<T>);

impl MergeBlock {
    pub fn new<T: Scalar, R: Rng + ?Sized>(params: &mut ParamSet<T>, name: &str, main_ch: usize, side_ch: usize, rng: &mut R) -> Self {
        let conv = ConvBlock::new(params, name, main_ch + side_ch, main_ch, 1, 1, 0, Padding::Zero, Norm::None, Act::Relu, rng);
        Self { conv, main_ch }
    }

    pub fn side_ch(&self) -> usize {
        self.conv.conv.in_ch - self.main_ch
    }

    pub fn forward<T: Scalar>(&self, params: &ParamSet<T>, x: &Tensor<T>, side: &Tensor<T>) -> (Tensor<T>, MergeCache<T>) {
        let (y, c) = self.conv.forward(params, &Tensor::concat_channels(x, side));
        (y, MergeCache(c))
    }

    /// Returns gradients for (main input, side input).
    pub fn backward<T: Scalar>(
        &self,
        params: &ParamSet<T>,
        grads: &mut ParamSet<T>,
        cache: &MergeCache<T>,
        grad_out: &Tensor<T>,
    ) -> (Tensor<T>, Tensor<T>) {
        let g = self.conv.backward(params, grads, &cache.0, grad_out, true).expect("input gradient requested");
        g.split_channels(self.main_ch)
    }
}
