//! Projection measurements for one pose, with per-sample statistical weights.

use crate::error::{Error, Result};
use crate::geometry::ScanGeometry;

/// A stack of line-integral measurements over all views of one scan.
///
/// `data` and `weights` are laid out channel fastest, then row, then view
/// (see [`ScanGeometry::sample_index`]). Weights are the diagonal of the
/// noise-precision matrix; a weight of zero drops the sample from the fit.
#[derive(Debug, Clone, PartialEq)]
pub struct Sinogram {
    pub geometry: ScanGeometry,
    data: Vec<f64>,
    weights: Vec<f64>,
}

impl Sinogram {
    /// An all-zero sinogram with unit weights.
    pub fn zeros(geometry: ScanGeometry) -> Self {
        let n = geometry.num_samples();
        Sinogram {
            geometry,
            data: vec![0.0; n],
            weights: vec![1.0; n],
        }
    }

    pub fn new(geometry: ScanGeometry, data: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        let n = geometry.num_samples();
        if data.len() != n {
            return Err(Error::shape(
                "Sinogram::new",
                format!("{n} samples"),
                format!("{} data values", data.len()),
            ));
        }
        if weights.len() != n {
            return Err(Error::shape(
                "Sinogram::new",
                format!("{n} samples"),
                format!("{} weight values", weights.len()),
            ));
        }
        if !data.iter().all(|v| v.is_finite()) {
            return Err(Error::config("sinogram data contains non-finite values"));
        }
        if !weights.iter().all(|w| w.is_finite() && *w >= 0.0) {
            return Err(Error::config(
                "sinogram weights must be finite and nonnegative",
            ));
        }
        Ok(Sinogram {
            geometry,
            data,
            weights,
        })
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    pub fn set_uniform_weights(&mut self, w: f64) {
        for wi in self.weights.iter_mut() {
            *wi = w;
        }
    }

    pub fn num_samples(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn get(&self, view: usize, row: usize, channel: usize) -> f64 {
        self.data[self.geometry.sample_index(view, row, channel)]
    }

    pub fn norm2(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::ScanGeometry;

    #[test]
    fn rejects_mismatched_lengths() {
        let g = ScanGeometry::parallel3d(vec![0.0], 2, 2, 1.0).unwrap();
        assert!(Sinogram::new(g.clone(), vec![0.0; 3], vec![1.0; 4]).is_err());
        assert!(Sinogram::new(g, vec![0.0; 4], vec![1.0; 3]).is_err());
    }

    #[test]
    fn rejects_negative_weights() {
        let g = ScanGeometry::parallel3d(vec![0.0], 2, 2, 1.0).unwrap();
        assert!(Sinogram::new(g, vec![0.0; 4], vec![-1.0, 1.0, 1.0, 1.0]).is_err());
    }
}
