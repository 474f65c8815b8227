//! 3D attenuation volumes on a regular isotropic grid.
//!
//! Data layout is fixed crate-wide: x fastest, then y, then z
//! (`idx = i + nx * (j + ny * k)`). Samples are `f64` in memory so that
//! iterative solvers accumulate at full precision; the on-disk format
//! quantizes to `f32` (see [`crate::io`]).

use crate::error::{Error, Result};

/// A scalar attenuation field (1/mm) on a regular grid of cubic voxels.
///
/// Values are immutable by convention: every operation returns a new volume,
/// so volumes can be shared read-only across concurrent agent evaluations.
#[derive(Debug, Clone, PartialEq)]
pub struct Volume {
    dims: (usize, usize, usize),
    /// Edge length of a voxel in mm (isotropic).
    pub voxel_size: f64,
    /// World coordinates (mm) of the center of voxel (0, 0, 0).
    pub origin: [f64; 3],
    data: Vec<f64>,
}

/// Comparison metrics between a reconstruction and a reference volume.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VolumeStats {
    /// ‖recon − reference‖₂ / ‖reference‖₂, dimensionless.
    pub nrmse: f64,
    /// Root mean squared voxel difference, 1/mm.
    pub rmse: f64,
    /// Largest absolute voxel difference, 1/mm.
    pub max_abs_diff: f64,
}

impl Volume {
    /// A zero-filled volume. `voxel_size` must be positive.
    pub fn zeros(dims: (usize, usize, usize), voxel_size: f64, origin: [f64; 3]) -> Self {
        assert!(voxel_size > 0.0, "voxel_size must be positive");
        let n = dims.0 * dims.1 * dims.2;
        Volume {
            dims,
            voxel_size,
            origin,
            data: vec![0.0; n],
        }
    }

    /// A zero volume on the same grid as `self`.
    pub fn zeros_like(&self) -> Self {
        Volume::zeros(self.dims, self.voxel_size, self.origin)
    }

    /// Builds a volume from raw data in x-fastest order.
    pub fn from_data(
        dims: (usize, usize, usize),
        voxel_size: f64,
        origin: [f64; 3],
        data: Vec<f64>,
    ) -> Result<Self> {
        let n = dims.0 * dims.1 * dims.2;
        if data.len() != n {
            return Err(Error::shape(
                "Volume::from_data",
                format!("{} values for dims {:?}", n, dims),
                format!("{} values", data.len()),
            ));
        }
        if !(voxel_size > 0.0) {
            return Err(Error::config(format!(
                "voxel_size must be > 0, got {voxel_size}"
            )));
        }
        if !data.iter().all(|v| v.is_finite()) {
            return Err(Error::config("volume data contains non-finite values"));
        }
        Ok(Volume {
            dims,
            voxel_size,
            origin,
            data,
        })
    }

    /// A volume centered on the world origin: voxel (0,0,0) sits at
    /// `-voxel_size * (n-1)/2` along each axis.
    pub fn centered(dims: (usize, usize, usize), voxel_size: f64) -> Self {
        let origin = [
            -voxel_size * (dims.0 as f64 - 1.0) / 2.0,
            -voxel_size * (dims.1 as f64 - 1.0) / 2.0,
            -voxel_size * (dims.2 as f64 - 1.0) / 2.0,
        ];
        Volume::zeros(dims, voxel_size, origin)
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        self.dims
    }

    pub fn num_voxels(&self) -> usize {
        self.data.len()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        debug_assert!(i < self.dims.0 && j < self.dims.1 && k < self.dims.2);
        i + self.dims.0 * (j + self.dims.1 * k)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.data[self.index(i, j, k)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, k: usize, value: f64) {
        let idx = self.index(i, j, k);
        self.data[idx] = value;
    }

    /// World coordinates (mm) of the center of voxel (i, j, k).
    #[inline]
    pub fn voxel_center(&self, i: usize, j: usize, k: usize) -> [f64; 3] {
        [
            self.origin[0] + self.voxel_size * i as f64,
            self.origin[1] + self.voxel_size * j as f64,
            self.origin[2] + self.voxel_size * k as f64,
        ]
    }

    /// Geometric center of the grid in world coordinates (mm).
    pub fn grid_center(&self) -> [f64; 3] {
        [
            self.origin[0] + self.voxel_size * (self.dims.0 as f64 - 1.0) / 2.0,
            self.origin[1] + self.voxel_size * (self.dims.1 as f64 - 1.0) / 2.0,
            self.origin[2] + self.voxel_size * (self.dims.2 as f64 - 1.0) / 2.0,
        ]
    }

    /// True when `other` lives on the same grid (dims, spacing, origin).
    pub fn same_grid(&self, other: &Volume) -> bool {
        self.dims == other.dims
            && self.voxel_size == other.voxel_size
            && self.origin == other.origin
    }

    pub fn check_same_dims(&self, other: &Volume, op: &'static str) -> Result<()> {
        if self.dims != other.dims {
            return Err(Error::shape(
                op,
                format!("{:?}", self.dims),
                format!("{:?}", other.dims),
            ));
        }
        Ok(())
    }

    pub fn dot(&self, other: &Volume) -> f64 {
        debug_assert_eq!(self.dims, other.dims);
        self.data
            .iter()
            .zip(other.data.iter())
            .map(|(a, b)| a * b)
            .sum()
    }

    pub fn norm2(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Elementwise in-place `self += a * x`; used by the iterative solvers.
    pub fn axpy_inplace(&mut self, a: f64, x: &Volume) {
        debug_assert_eq!(self.dims, x.dims);
        for (s, v) in self.data.iter_mut().zip(x.data.iter()) {
            *s += a * v;
        }
    }

    pub fn scale_inplace(&mut self, a: f64) {
        for s in self.data.iter_mut() {
            *s *= a;
        }
    }
}

/// Returns `a*x + y` elementwise. Metadata (spacing, origin) is copied from `x`.
pub fn volume_axpy(a: f64, x: &Volume, y: &Volume) -> Result<Volume> {
    x.check_same_dims(y, "volume_axpy")?;
    let data = x
        .data
        .iter()
        .zip(y.data.iter())
        .map(|(xv, yv)| a * xv + yv)
        .collect();
    Ok(Volume {
        dims: x.dims,
        voxel_size: x.voxel_size,
        origin: x.origin,
        data,
    })
}

/// NRMSE / RMSE / max-abs-difference of `recon` against `reference`.
///
/// Fails when the reference is identically zero (the NRMSE denominator
/// vanishes).
pub fn nrmse(recon: &Volume, reference: &Volume) -> Result<VolumeStats> {
    recon.check_same_dims(reference, "nrmse")?;
    let mut diff_sq = 0.0;
    let mut ref_sq = 0.0;
    let mut max_abs_diff = 0.0f64;
    for (r, t) in recon.data.iter().zip(reference.data.iter()) {
        let d = r - t;
        diff_sq += d * d;
        ref_sq += t * t;
        max_abs_diff = max_abs_diff.max(d.abs());
    }
    if ref_sq == 0.0 {
        return Err(Error::config(
            "nrmse: reference volume is identically zero, so the normalized error is undefined",
        ));
    }
    let n = recon.num_voxels() as f64;
    Ok(VolumeStats {
        nrmse: (diff_sq / ref_sq).sqrt(),
        rmse: (diff_sq / n).sqrt(),
        max_abs_diff,
    })
}
