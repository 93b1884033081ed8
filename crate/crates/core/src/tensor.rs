//! Dense NCHW tensors and the scalar abstraction shared by the network code.
//!
//! Training runs in `f32`; gradient checks run the same code in `f64`.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt::Debug;
use core::ops::{AddAssign, MulAssign, SubAssign};

use num_traits::Float;

/// Floating point element type usable by the network engine.
pub trait Scalar:
    Float + Default + Debug + AddAssign + SubAssign + MulAssign + Send + Sync + 'static
{
    /// `c = alpha * a * b + beta * c` for strided row/column layouts.
    ///
    /// `a` is `m x k`, `b` is `k x n` and `c` is `m x n`; strides are in
    /// elements.
    #[allow(clippy::too_many_arguments)]
    fn gemm(
        m: usize,
        k: usize,
        n: usize,
        alpha: Self,
        a: &[Self],
        rsa: isize,
        csa: isize,
        b: &[Self],
        rsb: isize,
        csb: isize,
        beta: Self,
        c: &mut [Self],
        rsc: isize,
        csc: isize,
    );

    fn from_f64(v: f64) -> Self;
    fn as_f64(self) -> f64;
}

fn span(rows: usize, cols: usize, rs: isize, cs: isize) -> usize {
    if rows == 0 || cols == 0 {
        return 0;
    }
    (rows - 1) * rs.unsigned_abs() + (cols - 1) * cs.unsigned_abs() + 1
}

macro_rules! impl_scalar {
    ($t:ty, $gemm:path) => {
        impl Scalar for $t {
            fn gemm(
                m: usize,
                k: usize,
                n: usize,
                alpha: Self,
                a: &[Self],
                rsa: isize,
                csa: isize,
                b: &[Self],
                rsb: isize,
                csb: isize,
                beta: Self,
                c: &mut [Self],
                rsc: isize,
                csc: isize,
            ) {
                assert!(rsa >= 0 && csa >= 0 && rsb >= 0 && csb >= 0 && rsc >= 0 && csc >= 0);
                assert!(a.len() >= span(m, k, rsa, csa), "gemm: lhs too short");
                assert!(b.len() >= span(k, n, rsb, csb), "gemm: rhs too short");
                assert!(c.len() >= span(m, n, rsc, csc), "gemm: output too short");
                if m == 0 || n == 0 {
                    return;
                }
                // SAFETY: every index touched by the kernel lies inside the
                // spans checked above and the strides are non-negative.
                unsafe {
                    $gemm(
                        m,
                        k,
                        n,
                        alpha,
                        a.as_ptr(),
                        rsa,
                        csa,
                        b.as_ptr(),
                        rsb,
                        csb,
                        beta,
                        c.as_mut_ptr(),
                        rsc,
                        csc,
                    );
                }
            }

            #[inline]
            fn from_f64(v: f64) -> Self {
                v as $t
            }

            #[inline]
            fn as_f64(self) -> f64 {
                self as f64
            }
        }
    };
}

impl_scalar!(f32, matrixmultiply::sgemm);
impl_scalar!(f64, matrixmultiply::dgemm);

/// Shorthand for a literal converted into the scalar type.
#[inline]
pub(crate) fn lit<T: Scalar>(v: f64) -> T {
    T::from_f64(v)
}

/// A 4-D tensor in (batch, channel, height, width) order.
#[derive(Clone, PartialEq)]
pub struct Tensor<T> {
    dims: [usize; 4],
    data: Vec<T>,
}

impl<T: Debug> Debug for Tensor<T> {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("Tensor").field("dims", &self.dims).finish_non_exhaustive()
    }
}

impl<T: Scalar> Tensor<T> {
    pub fn zeros(dims: [usize; 4]) -> Self {
        Self { dims, data: vec![T::zero(); dims.iter().product()] }
    }

    pub fn full(dims: [usize; 4], value: T) -> Self {
        Self { dims, data: vec![value; dims.iter().product()] }
    }

    /// Wraps `data`; panics when the length disagrees with `dims`.
    pub fn from_vec(dims: [usize; 4], data: Vec<T>) -> Self {
        assert_eq!(dims.iter().product::<usize>(), data.len(), "tensor data length does not match dims {dims:?}");
        Self { dims, data }
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.dims)
    }

    #[inline]
    pub fn dims(&self) -> [usize; 4] {
        self.dims
    }

    #[inline]
    pub fn batch(&self) -> usize {
        self.dims[0]
    }

    #[inline]
    pub fn channels(&self) -> usize {
        self.dims[1]
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.dims[2]
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.dims[3]
    }

    /// Number of elements in one (channel, height, width) sample.
    #[inline]
    pub fn sample_len(&self) -> usize {
        self.dims[1] * self.dims[2] * self.dims[3]
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn data(&self) -> &[T] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn sample(&self, n: usize) -> &[T] {
        let len = self.sample_len();
        &self.data[n * len..(n + 1) * len]
    }

    pub fn sample_mut(&mut self, n: usize) -> &mut [T] {
        let len = self.sample_len();
        &mut self.data[n * len..(n + 1) * len]
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self { dims: self.dims, data: self.data.iter().map(|&v| f(v)).collect() }
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(T, T) -> T) -> Self {
        assert_eq!(self.dims, other.dims, "zip_map: shape mismatch");
        Self {
            dims: self.dims,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        }
    }

    pub fn add_assign(&mut self, other: &Self) {
        assert_eq!(self.dims, other.dims, "add_assign: shape mismatch");
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn scale(&mut self, s: T) {
        for v in &mut self.data {
            *v *= s;
        }
    }

    pub fn fill(&mut self, value: T) {
        for v in &mut self.data {
            *v = value;
        }
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, &v| m.max(v.abs()))
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Element-type conversion through `f64`.
    pub fn cast<U: Scalar>(&self) -> Tensor<U> {
        Tensor { dims: self.dims, data: self.data.iter().map(|&v| U::from_f64(v.as_f64())).collect() }
    }

    /// Concatenates two tensors along the channel axis.
    pub fn concat_channels(a: &Self, b: &Self) -> Self {
        assert_eq!(a.dims[0], b.dims[0], "concat: batch mismatch");
        assert_eq!(&a.dims[2..], &b.dims[2..], "concat: spatial mismatch");
        let dims = [a.dims[0], a.dims[1] + b.dims[1], a.dims[2], a.dims[3]];
        let mut data = Vec::with_capacity(dims.iter().product());
        for n in 0..a.dims[0] {
            data.extend_from_slice(a.sample(n));
            data.extend_from_slice(b.sample(n));
        }
        Self { dims, data }
    }

    /// Splits along the channel axis at `at`; inverse of [`Tensor::concat_channels`].
    pub fn split_channels(&self, at: usize) -> (Self, Self) {
        assert!(at <= self.dims[1]);
        let plane = self.dims[2] * self.dims[3];
        let da = [self.dims[0], at, self.dims[2], self.dims[3]];
        let db = [self.dims[0], self.dims[1] - at, self.dims[2], self.dims[3]];
        let mut a = Vec::with_capacity(da.iter().product());
        let mut b = Vec::with_capacity(db.iter().product());
        for n in 0..self.dims[0] {
            let s = self.sample(n);
            a.extend_from_slice(&s[..at * plane]);
            b.extend_from_slice(&s[at * plane..]);
        }
        (Self { dims: da, data: a }, Self { dims: db, data: b })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gemm_matches_naive_product_with_transposed_rhs() {
        let a: Vec<f64> = (0..6).map(|v| v as f64).collect(); // 2x3
        let b: Vec<f64> = (0..12).map(|v| (v as f64) * 0.5 - 1.0).collect(); // stored 4x3, used as 3x4
        let mut c = vec![1.0; 8];
        f64::gemm(2, 3, 4, 1.0, &a, 3, 1, &b, 1, 3, 1.0, &mut c, 4, 1);
        for i in 0..2 {
            for j in 0..4 {
                let mut want = 1.0;
                for k in 0..3 {
                    want += a[i * 3 + k] * b[j * 3 + k];
                }
                assert!((c[i * 4 + j] - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn concat_then_split_restores_parts() {
        let a = Tensor::from_vec([2, 1, 2, 2], (0..8).map(|v| v as f32).collect());
        let b = Tensor::from_vec([2, 2, 2, 2], (0..16).map(|v| -(v as f32)).collect());
        let c = Tensor::concat_channels(&a, &b);
        assert_eq!(c.dims(), [2, 3, 2, 2]);
        assert_eq!(&c.sample(1)[..4], a.sample(1));
        let (a2, b2) = c.split_channels(1);
        assert_eq!(a2, a);
        assert_eq!(b2, b);
    }
}
