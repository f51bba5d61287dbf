use crate::autodiff::{Scalar, Tensor};

/// Binary keep-mask over one layer's weight tensor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PruneMask {
    pub layer_id: usize,
    shape: Vec<usize>,
    keep: Vec<bool>,
    kept_count: usize,
}

impl PruneMask {
    pub fn new(layer_id: usize, shape: Vec<usize>, keep: Vec<bool>) -> Self {
        assert_eq!(shape.iter().product::<usize>(), keep.len(), "mask shape and length differ");
        let kept_count = keep.iter().filter(|&&k| k).count();
        PruneMask {
            layer_id,
            shape,
            keep,
            kept_count,
        }
    }

    pub fn all_ones(layer_id: usize, shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Self::new(layer_id, shape, vec![true; n])
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn keep(&self) -> &[bool] {
        &self.keep
    }

    pub fn kept_count(&self) -> usize {
        self.kept_count
    }

    pub fn len(&self) -> usize {
        self.keep.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keep.is_empty()
    }

    pub fn surviving_fraction(&self) -> f64 {
        if self.keep.is_empty() {
            1.0
        } else {
            self.kept_count as f64 / self.keep.len() as f64
        }
    }

    pub fn to_tensor<T: Scalar>(&self) -> Tensor<T> {
        let data = self
            .keep
            .iter()
            .map(|&k| if k { T::one() } else { T::zero() })
            .collect();
        Tensor::new(self.shape.clone(), data).expect("mask shape")
    }

    /// Multiplies `values` by the mask in place.
    pub fn apply<T: Scalar>(&self, values: &mut [T]) {
        for (v, &k) in values.iter_mut().zip(&self.keep) {
            *v = if k { *v * T::one() } else { *v * T::zero() };
        }
    }
}
