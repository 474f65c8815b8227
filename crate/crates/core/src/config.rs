//! Experiment configuration: a TOML file describing the phantom, scanner,
//! poses, noise, solver and outputs. Parse errors carry the offending line
//! and column; semantic checks name the field.

use crate::denoise::{DenoiserConfig, DenoiserMethod, Plane};
use crate::error::{Error, Result};
use crate::geometry::{GeometryMode, ScanGeometry};
use crate::mace::SolverConfig;
use crate::phantom::PhantomSpec;
use crate::pose::{Interp, RigidPose};
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub phantom: PhantomSpec,
    pub geometry: GeometrySection,
    pub noise: NoiseSection,
    /// Pose list; the first entry must be the identity pose.
    pub poses: Vec<PoseSection>,
    pub solver: SolverSection,
    #[serde(default)]
    pub render: RenderSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometrySection {
    pub mode: GeometryMode,
    pub num_views: usize,
    /// Angular span of the view set in degrees (endpoint excluded).
    #[serde(default = "default_span")]
    pub angle_span_deg: f64,
    pub det_rows: usize,
    pub det_channels: usize,
    pub det_pixel_size_mm: f64,
    #[serde(default)]
    pub source_to_iso_mm: f64,
    #[serde(default)]
    pub source_to_det_mm: f64,
}

fn default_span() -> f64 {
    360.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    /// Noise variance per sinogram sample; 0 disables noise.
    pub alpha: f64,
    /// RNG seed; required whenever alpha > 0.
    #[serde(default)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoseSection {
    #[serde(default)]
    pub rot_z_deg: f64,
    #[serde(default)]
    pub rot_x_deg: f64,
    #[serde(default)]
    pub translation_mm: [f64; 3],
    pub interp: Interp,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    pub rho: f64,
    pub beta: f64,
    pub max_iters: usize,
    pub conv_tol: f64,
    /// Proximal strength; omit to derive it from the scan (σ⁻² set to the
    /// mean diagonal of the weighted normal operator).
    #[serde(default)]
    pub sigma: Option<f64>,
    pub cg_tol: f64,
    pub cg_max_iters: usize,
    pub denoiser: DenoiserSection,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DenoiserSection {
    pub method: DenoiserMethod,
    pub strength: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RenderSection {
    /// Attenuation window (lo, hi) for slice PNGs.
    pub window: [f64; 2],
}

impl Default for RenderSection {
    fn default() -> Self {
        RenderSection {
            window: [0.0, 0.04],
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    /// Output directory; the CLI `--out` flag overrides it.
    #[serde(default)]
    pub dir: Option<String>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        let cfg: ExperimentConfig = toml::from_str(&text).map_err(|e| {
            Error::config(format!("{}: {}", path.display(), e.to_string().trim_end()))
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_str_validated(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::config(e.to_string().trim_end().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.poses.is_empty() {
            return Err(Error::config("poses: at least one pose is required"));
        }
        let first = &self.poses[0];
        if first.rot_z_deg != 0.0
            || first.rot_x_deg != 0.0
            || first.translation_mm != [0.0; 3]
        {
            return Err(Error::config(
                "poses: the first pose must be the identity (zero angles, zero translation)",
            ));
        }
        if self.noise.alpha < 0.0 {
            return Err(Error::config("noise.alpha must be >= 0"));
        }
        if self.noise.alpha > 0.0 && self.noise.seed.is_none() {
            return Err(Error::config(
                "noise.seed is required when noise.alpha > 0, for reproducibility",
            ));
        }
        if let Some(sigma) = self.solver.sigma {
            if !(sigma > 0.0) {
                return Err(Error::config("solver.sigma must be > 0 when given"));
            }
        }
        if self.solver.denoiser.strength < 0.0 {
            return Err(Error::config("solver.denoiser.strength must be >= 0"));
        }
        let [lo, hi] = self.render.window;
        if !(hi > lo) {
            return Err(Error::config("render.window must satisfy lo < hi"));
        }
        // Build the domain objects once; their constructors validate ranges.
        self.scan_geometry()?;
        self.rigid_poses()?;
        self.solver_config().validate()?;
        Ok(())
    }

    pub fn scan_geometry(&self) -> Result<ScanGeometry> {
        let g = &self.geometry;
        let angles = ScanGeometry::even_angles(g.num_views, g.angle_span_deg.to_radians());
        match g.mode {
            GeometryMode::Parallel3d => {
                ScanGeometry::parallel3d(angles, g.det_rows, g.det_channels, g.det_pixel_size_mm)
            }
            GeometryMode::Conebeam => ScanGeometry::conebeam(
                angles,
                g.det_rows,
                g.det_channels,
                g.det_pixel_size_mm,
                g.source_to_iso_mm,
                g.source_to_det_mm,
            ),
        }
    }

    pub fn rigid_poses(&self) -> Result<Vec<RigidPose>> {
        self.poses
            .iter()
            .map(|p| {
                RigidPose::from_euler_deg(p.rot_z_deg, p.rot_x_deg, p.translation_mm, p.interp)
            })
            .collect()
    }

    pub fn solver_config(&self) -> SolverConfig {
        SolverConfig {
            rho: self.solver.rho,
            beta: self.solver.beta,
            max_iters: self.solver.max_iters,
            conv_tol: self.solver.conv_tol,
            record_history: false,
        }
    }

    /// The three-plane prior agent configurations.
    pub fn prior_denoisers(&self) -> [DenoiserConfig; 3] {
        let d = &self.solver.denoiser;
        [
            DenoiserConfig::new(d.method, d.strength, Plane::Xy),
            DenoiserConfig::new(d.method, d.strength, Plane::Xz),
            DenoiserConfig::new(d.method, d.strength, Plane::Yz),
        ]
    }
}
