//! Joint sparse-view CT reconstruction from multiple rigid poses of one object.
//!
//! The crate is organized around a small set of building blocks:
//!
//! - [`volume`] — 3D attenuation grids, arithmetic, metrics, binary I/O.
//! - [`projector`] — ray-driven forward projection and its exact adjoint
//!   for parallel-beam and cone-beam geometries.
//! - [`pose`] — rigid-body resampling (trilinear / cubic B-spline) with
//!   analytic inverses and composition.
//! - [`agents`] — data-fit proximal agents (conjugate-gradient inner solver),
//!   pose-conjugated variants, and slicewise denoiser agents.
//! - [`mace`] — the stacked-state consensus solver driven by Mann iterations.
//! - [`phantom`], [`simulate`], [`experiment`] — the end-to-end simulated
//!   multi-pose experiment: phantom, noisy sparse-view sinograms per pose,
//!   single-pose baselines and the fused reconstruction, NRMSE evaluation.
//!
//! Volumes hold `f64` samples in memory; the on-disk formats (`MPFV` volumes,
//! `MPFS` sinograms) store 32-bit floats.

pub mod agents;
pub mod config;
pub mod denoise;
pub mod dense;
pub mod error;
pub mod experiment;
pub mod geometry;
pub mod io;
pub mod mace;
pub mod phantom;
pub mod pose;
pub mod projector;
pub mod render;
pub mod simulate;
pub mod sinogram;
pub mod volume;

pub use error::{Error, Result};
pub use geometry::{GeometryMode, ScanGeometry};
pub use pose::{Interp, RigidPose};
pub use sinogram::Sinogram;
pub use volume::{Volume, VolumeStats};
