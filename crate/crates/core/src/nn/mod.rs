//! A minimal convolutional engine with hand-written backward passes.
//!
//! Every layer's `forward` returns its output together with a cache; the
//! matching `backward` consumes the cache and the upstream gradient,
//! accumulates parameter gradients into a [`ParamSet`] of the same layout,
//! and optionally returns the gradient with respect to its input. A layer
//! used several times in one graph simply produces several caches.

mod blocks;
mod conv;
mod layers;
mod params;

pub use blocks::{Act, ConvBlock, ConvBlockCache, MergeBlock, MergeCache, Norm, ResBlock, ResCache, UpBlock};
pub use conv::{Conv2d, ConvCache, Padding};
pub use layers::{instance_norm, instance_norm_backward, upsample2x, upsample2x_backward, NormCache};
pub use params::{ParamId, ParamSet};
