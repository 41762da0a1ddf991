//! The universal perturbation δ and its `EUSP` file format.
//!
//! ```text
//! "EUSP" | version: u8 = 1 | epsilon: f64 | dims: 3 x u32 = (3, 64, 64) | values: f64 x 3*64*64
//! ```
//! All multi-byte fields little-endian; values in row-major `[channel][row][col]` order.

use std::path::Path;

use crate::binio::{put_f64, put_u32, read_file, write_file, Reader};
use crate::diffnum::Tensor;
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::tracker::SEARCH_SIZE;

pub const PERTURBATION_MAGIC: &[u8; 4] = b"EUSP";
pub const PERTURBATION_VERSION: u8 = 1;

/// Additive search-region perturbation with `max |δ| <= epsilon`.
#[derive(Clone, Debug, PartialEq)]
pub struct Perturbation<T: Real = f64> {
    values: Tensor<T>,
    epsilon: f64,
}

impl<T: Real> Perturbation<T> {
    pub fn shape() -> [usize; 3] {
        [3, SEARCH_SIZE, SEARCH_SIZE]
    }

    pub fn zeros(epsilon: f64) -> Self {
        Perturbation { values: Tensor::zeros(&Self::shape()), epsilon }
    }

    /// Rejects values outside the ε-ball rather than silently clipping them.
    pub fn new(values: Tensor<T>, epsilon: f64) -> Result<Self> {
        if values.shape() != Self::shape() {
            return Err(Error::shape(
                "perturbation",
                "shape",
                format!("{:?}", Self::shape()),
                format!("{:?}", values.shape()),
            ));
        }
        if !(0.0..=f64::MAX).contains(&epsilon) {
            return Err(Error::InvalidArgument(format!("epsilon must be >= 0, got {epsilon}")));
        }
        if values.data().iter().any(|v| !(0.0..=epsilon).contains(&v.abs().as_f64())) {
            return Err(Error::InvalidArgument(format!("perturbation exceeds epsilon {epsilon}")));
        }
        Ok(Perturbation { values, epsilon })
    }

    pub fn values(&self) -> &Tensor<T> {
        &self.values
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn linf(&self) -> f64 {
        self.values.max_abs().as_f64()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(4 + 1 + 8 + 12 + self.values.numel() * 8);
        out.extend_from_slice(PERTURBATION_MAGIC);
        out.push(PERTURBATION_VERSION);
        put_f64(&mut out, self.epsilon);
        for d in Self::shape() {
            put_u32(&mut out, d as u32);
        }
        for v in self.values.data() {
            put_f64(&mut out, v.as_f64());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<Self> {
        let mut r = Reader::new(bytes, path);
        r.magic(PERTURBATION_MAGIC)?;
        let version = r.u8("version")?;
        if version != PERTURBATION_VERSION {
            return Err(Error::format(path, format!("unsupported version {version}")));
        }
        let epsilon = r.f64("epsilon")?;
        let dims = [r.u32("dims")?, r.u32("dims")?, r.u32("dims")?].map(|d| d as usize);
        if dims != Self::shape() {
            return Err(Error::format(path, format!("dims {dims:?}, expected {:?}", Self::shape())));
        }
        let values = r.f64s(dims.iter().product(), "values")?;
        r.finish()?;
        let tensor = Tensor::new(&dims, values.into_iter().map(T::of).collect())?;
        Perturbation::new(tensor, epsilon).map_err(|e| Error::format(path, e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_file(path, &self.to_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&read_file(path)?, path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_values_outside_the_ball() {
        let t = Tensor::full(&[3, SEARCH_SIZE, SEARCH_SIZE], 16.5);
        assert!(Perturbation::<f64>::new(t, 16.0).is_err());
        let t = Tensor::full(&[3, 2, 2], 1.0);
        assert!(Perturbation::<f64>::new(t, 16.0).is_err());
    }

    #[test]
    fn byte_round_trip_is_exact() {
        let t = Tensor::from_fn(&[3, SEARCH_SIZE, SEARCH_SIZE], |i| ((i as f64) * 0.37).sin() * 16.0);
        let p = Perturbation::new(t, 16.0).unwrap();
        let bytes = p.to_bytes();
        assert_eq!(&bytes[..4], b"EUSP");
        let back = Perturbation::<f64>::from_bytes(&bytes, Path::new("mem")).unwrap();
        assert_eq!(back, p);
        assert_eq!(back.to_bytes(), bytes);
        let err = Perturbation::<f64>::from_bytes(&bytes[..bytes.len() - 3], Path::new("mem")).unwrap_err();
        assert!(err.to_string().contains("truncated"));
    }
}
