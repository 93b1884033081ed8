use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;

use crate::tensor::{Scalar, Tensor};

/// Index of a tensor inside a [`ParamSet`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParamId(pub(crate) usize);

/// Named, ordered collection of parameter tensors belonging to one network.
///
/// Gradients and optimizer moments use a `ParamSet` with the same layout,
/// obtained through [`ParamSet::zeros_like`].
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSet<T> {
    names: Vec<String>,
    tensors: Vec<Tensor<T>>,
}

impl<T: Scalar> Default for ParamSet<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> ParamSet<T> {
    pub fn new() -> Self {
        Self { names: Vec::new(), tensors: Vec::new() }
    }

    pub fn push(&mut self, name: String, tensor: Tensor<T>) -> ParamId {
        self.names.push(name);
        self.tensors.push(tensor);
        ParamId(self.tensors.len() - 1)
    }

    /// Adds a tensor drawn from `U(-bound, bound)`.
    pub fn push_uniform<R: Rng + ?Sized>(&mut self, name: String, dims: [usize; 4], bound: f64, rng: &mut R) -> ParamId {
        let n: usize = dims.iter().product();
        let data = (0..n).map(|_| T::from_f64(rng.random_range(-bound..bound))).collect();
        self.push(name, Tensor::from_vec(dims, data))
    }

    pub fn zeros_like(&self) -> Self {
        Self { names: self.names.clone(), tensors: self.tensors.iter().map(Tensor::zeros_like).collect() }
    }

    #[inline]
    pub fn get(&self, id: ParamId) -> &Tensor<T> {
        &self.tensors[id.0]
    }

    #[inline]
    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor<T> {
        &mut self.tensors[id.0]
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn tensors(&self) -> &[Tensor<T>] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [Tensor<T>] {
        &mut self.tensors
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor<T>)> {
        self.names.iter().map(String::as_str).zip(&self.tensors)
    }

    /// Total number of scalar parameters.
    pub fn count(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    pub fn fill_zero(&mut self) {
        for t in &mut self.tensors {
            t.fill(T::zero());
        }
    }

    pub fn all_finite(&self) -> bool {
        self.tensors.iter().all(Tensor::all_finite)
    }

    /// Replaces tensor `i`; the shape must match the existing one.
    pub fn replace(&mut self, i: usize, tensor: Tensor<T>) -> crate::Result<()> {
        let slot = self
            .tensors
            .get_mut(i)
            .ok_or_else(|| crate::error::invalid_arg!("parameter index {i} out of range"))?;
        if slot.dims() != tensor.dims() {
            return Err(crate::error::invalid_arg!(
                "parameter {} expects dims {:?}, got {:?}",
                self.names[i],
                slot.dims(),
                tensor.dims()
            ));
        }
        *slot = tensor;
        Ok(())
    }

    pub fn cast<U: Scalar>(&self) -> ParamSet<U> {
        ParamSet { names: self.names.clone(), tensors: self.tensors.iter().map(Tensor::cast).collect() }
    }
}
