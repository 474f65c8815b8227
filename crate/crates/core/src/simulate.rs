//! Synthetic scan generation: pose the phantom, project it, add seeded
//! Gaussian noise.

use crate::error::{Error, Result};
use crate::geometry::ScanGeometry;
use crate::pose::{apply_pose, RigidPose};
use crate::projector::forward_project;
use crate::sinogram::Sinogram;
use crate::volume::Volume;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// Simulates one posed scan: `y = A(T(phantom)) + noise` with i.i.d.
/// Gaussian noise of variance `alpha` per sample drawn from `seed`
/// (ChaCha8, stable across platforms). Statistical weights are set to the
/// noise precision `1/alpha`, or 1 for a noiseless scan.
pub fn simulate_pose_scan(
    phantom: &Volume,
    pose: &RigidPose,
    g: &ScanGeometry,
    alpha: f64,
    seed: u64,
) -> Result<Sinogram> {
    if !(alpha >= 0.0) {
        return Err(Error::config(format!(
            "noise variance alpha must be >= 0, got {alpha}"
        )));
    }
    let posed = apply_pose(phantom, pose);
    let mut sino = forward_project(&posed, g);
    if alpha > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, alpha.sqrt())
            .map_err(|e| Error::config(format!("bad noise distribution: {e}")))?;
        for v in sino.data_mut() {
            *v += normal.sample(&mut rng);
        }
        sino.set_uniform_weights(1.0 / alpha);
    }
    Ok(sino)
}
