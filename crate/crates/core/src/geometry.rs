//! Scanner geometry: view angles and detector layout defining the system
//! operator.
//!
//! Conventions, fixed crate-wide:
//!
//! - The rotation axis is the world z axis and the iso-center is the world
//!   origin. Volumes used with a scanner are normally centered on the origin.
//! - At view angle 0 rays travel along +y; the detector channel axis is +x
//!   and the detector row axis is +z. A view at angle θ rotates the whole
//!   assembly about z by θ (counter-clockwise in the xy plane).
//! - One ray per detector pixel center, no subsampling.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GeometryMode {
    Parallel3d,
    Conebeam,
}

/// Source/detector/view-angle layout for one scan.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanGeometry {
    pub mode: GeometryMode,
    /// View angles in radians, one per view.
    pub view_angles: Vec<f64>,
    /// Detector rows (along the rotation axis).
    pub det_rows: usize,
    /// Detector channels (transaxial).
    pub det_channels: usize,
    /// Detector pixel pitch in mm (square pixels).
    pub det_pixel_size: f64,
    /// Source-to-isocenter distance in mm; cone-beam only.
    pub source_to_iso: f64,
    /// Source-to-detector distance in mm; cone-beam only.
    pub source_to_det: f64,
}

/// A single measurement ray: a point on the ray and a unit direction.
#[derive(Debug, Clone, Copy)]
pub struct Ray {
    pub point: [f64; 3],
    pub dir: [f64; 3],
}

impl ScanGeometry {
    pub fn parallel3d(
        view_angles: Vec<f64>,
        det_rows: usize,
        det_channels: usize,
        det_pixel_size: f64,
    ) -> Result<Self> {
        let g = ScanGeometry {
            mode: GeometryMode::Parallel3d,
            view_angles,
            det_rows,
            det_channels,
            det_pixel_size,
            source_to_iso: 0.0,
            source_to_det: 0.0,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn conebeam(
        view_angles: Vec<f64>,
        det_rows: usize,
        det_channels: usize,
        det_pixel_size: f64,
        source_to_iso: f64,
        source_to_det: f64,
    ) -> Result<Self> {
        let g = ScanGeometry {
            mode: GeometryMode::Conebeam,
            view_angles,
            det_rows,
            det_channels,
            det_pixel_size,
            source_to_iso,
            source_to_det,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if self.view_angles.is_empty() {
            return Err(Error::config("geometry: num_views must be >= 1"));
        }
        if !self.view_angles.iter().all(|a| a.is_finite()) {
            return Err(Error::config("geometry: view angles must be finite"));
        }
        if self.det_rows == 0 || self.det_channels == 0 {
            return Err(Error::config("geometry: detector must be non-empty"));
        }
        if !(self.det_pixel_size > 0.0) {
            return Err(Error::config(format!(
                "geometry: det_pixel_size must be > 0, got {}",
                self.det_pixel_size
            )));
        }
        if self.mode == GeometryMode::Conebeam
            && !(0.0 < self.source_to_iso && self.source_to_iso < self.source_to_det)
        {
            return Err(Error::config(format!(
                "geometry: cone-beam requires 0 < source_to_iso < source_to_det, got {} and {}",
                self.source_to_iso, self.source_to_det
            )));
        }
        Ok(())
    }

    /// Evenly spaced view angles covering `span` radians starting at 0
    /// (endpoint excluded, so a full turn has no duplicated view).
    pub fn even_angles(num_views: usize, span: f64) -> Vec<f64> {
        (0..num_views)
            .map(|v| span * v as f64 / num_views as f64)
            .collect()
    }

    pub fn num_views(&self) -> usize {
        self.view_angles.len()
    }

    /// Total number of detector samples over all views.
    pub fn num_samples(&self) -> usize {
        self.num_views() * self.det_rows * self.det_channels
    }

    /// Flat sample index; channel fastest, then row, then view.
    #[inline]
    pub fn sample_index(&self, view: usize, row: usize, channel: usize) -> usize {
        channel + self.det_channels * (row + self.det_rows * view)
    }

    /// Lateral detector offset of a channel from the central ray, mm.
    #[inline]
    fn channel_offset(&self, channel: usize) -> f64 {
        (channel as f64 - (self.det_channels as f64 - 1.0) / 2.0) * self.det_pixel_size
    }

    /// Axial detector offset of a row from the central plane, mm.
    #[inline]
    fn row_offset(&self, row: usize) -> f64 {
        (row as f64 - (self.det_rows as f64 - 1.0) / 2.0) * self.det_pixel_size
    }

    /// The measurement ray for one detector sample.
    #[inline]
    pub fn ray(&self, view: usize, row: usize, channel: usize) -> Ray {
        let theta = self.view_angles[view];
        let (sin_t, cos_t) = theta.sin_cos();
        // Central ray direction and in-plane channel axis at this view.
        let dir = [-sin_t, cos_t, 0.0];
        let chan_axis = [cos_t, sin_t, 0.0];
        let u = self.channel_offset(channel);
        let z = self.row_offset(row);
        match self.mode {
            GeometryMode::Parallel3d => Ray {
                point: [u * chan_axis[0], u * chan_axis[1], z],
                dir,
            },
            GeometryMode::Conebeam => {
                let src = [
                    -self.source_to_iso * dir[0],
                    -self.source_to_iso * dir[1],
                    0.0,
                ];
                let det = [
                    src[0] + self.source_to_det * dir[0] + u * chan_axis[0],
                    src[1] + self.source_to_det * dir[1] + u * chan_axis[1],
                    z,
                ];
                let d = [det[0] - src[0], det[1] - src[1], det[2] - src[2]];
                let len = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
                Ray {
                    point: src,
                    dir: [d[0] / len, d[1] / len, d[2] / len],
                }
            }
        }
    }
}
