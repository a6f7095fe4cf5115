use super::{cast, Scalar};
use crate::error::{Error, Result};

/// Dense `(batch, channels, length)` array, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T> {
    shape: [usize; 3],
    data: Vec<T>,
}

impl<T: Scalar> Tensor<T> {
    pub fn new(shape: [usize; 3], data: Vec<T>) -> Result<Self> {
        if shape.iter().product::<usize>() != data.len() {
            return Err(Error::shape(format!(
                "shape {shape:?} needs {} values, got {}",
                shape.iter().product::<usize>(),
                data.len()
            )));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: [usize; 3]) -> Self {
        Self { shape, data: vec![T::zero(); shape.iter().product()] }
    }

    pub fn from_fn(shape: [usize; 3], mut f: impl FnMut(usize, usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(shape.iter().product());
        for b in 0..shape[0] {
            for c in 0..shape[1] {
                for t in 0..shape[2] {
                    data.push(f(b, c, t));
                }
            }
        }
        Self { shape, data }
    }

    /// Stacks equally shaped `(channels, length)` samples into a batch.
    pub fn stack(samples: &[&[T]], channels: usize, length: usize) -> Result<Self> {
        let mut data = Vec::with_capacity(samples.len() * channels * length);
        for s in samples {
            if s.len() != channels * length {
                return Err(Error::shape(format!(
                    "sample of {} values, expected {channels}x{length}",
                    s.len()
                )));
            }
            data.extend_from_slice(s);
        }
        Ok(Self { shape: [samples.len(), channels, length], data })
    }

    pub fn shape(&self) -> [usize; 3] {
        self.shape
    }

    pub fn batch(&self) -> usize {
        self.shape[0]
    }

    pub fn channels(&self) -> usize {
        self.shape[1]
    }

    pub fn length(&self) -> usize {
        self.shape[2]
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn at(&self, b: usize, c: usize, t: usize) -> T {
        self.data[(b * self.shape[1] + c) * self.shape[2] + t]
    }

    /// The `(channels × length)` block of one batch element.
    pub fn sample(&self, b: usize) -> &[T] {
        let n = self.shape[1] * self.shape[2];
        &self.data[b * n..(b + 1) * n]
    }

    /// One `(b, c)` row.
    pub fn row(&self, b: usize, c: usize) -> &[T] {
        let l = self.shape[2];
        let start = (b * self.shape[1] + c) * l;
        &self.data[start..start + l]
    }

    pub fn row_mut(&mut self, b: usize, c: usize) -> &mut [T] {
        let l = self.shape[2];
        let start = (b * self.shape[1] + c) * l;
        &mut self.data[start..start + l]
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self { shape: self.shape, data: self.data.iter().map(|&v| f(v)).collect() }
    }

    pub fn cast<U: Scalar>(&self) -> Tensor<U> {
        Tensor { shape: self.shape, data: self.data.iter().map(|&v| cast(v)).collect() }
    }

    pub fn check_finite(&self, what: &str) -> Result<()> {
        match self.data.iter().position(|v| !v.is_finite()) {
            Some(i) => Err(Error::NonFinite(format!("{what}: element {i}"))),
            None => Ok(()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_must_match() {
        assert!(Tensor::<f32>::new([1, 2, 3], vec![0.0; 5]).is_err());
        let t = Tensor::<f64>::from_fn([2, 2, 3], |b, c, t| (b * 100 + c * 10 + t) as f64);
        assert_eq!(t.at(1, 1, 2), 112.0);
        assert_eq!(t.row(1, 0), &[100.0, 101.0, 102.0]);
        assert_eq!(t.sample(0).len(), 6);
    }

    #[test]
    fn non_finite_detected() {
        let t = Tensor::new([1, 1, 2], vec![1.0f32, f32::INFINITY]).unwrap();
        assert!(t.check_finite("x").is_err());
    }
}
