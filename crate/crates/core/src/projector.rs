//! Ray-driven system model: forward projection, matched adjoint back
//! projection, and the normal operator used by the proximal inner solver.
//!
//! Line integrals are computed by exact ray/voxel intersection-length
//! traversal, so `back_project` is the true matrix transpose of
//! `forward_project` (same traversal, same weights) up to rounding.

use crate::error::Result;
use crate::geometry::{Ray, ScanGeometry};
use crate::sinogram::Sinogram;
use crate::volume::Volume;
use rayon::prelude::*;

/// Axis-aligned voxel grid seen by the ray marcher.
#[derive(Debug, Clone, Copy)]
struct Grid {
    n: [usize; 3],
    h: f64,
    /// World coordinate of the low corner of voxel (0,0,0).
    bmin: [f64; 3],
}

impl Grid {
    fn of(v: &Volume) -> Self {
        let (nx, ny, nz) = v.dims();
        let h = v.voxel_size;
        Grid {
            n: [nx, ny, nz],
            h,
            bmin: [
                v.origin[0] - 0.5 * h,
                v.origin[1] - 0.5 * h,
                v.origin[2] - 0.5 * h,
            ],
        }
    }

    #[inline]
    fn flat(&self, idx: [usize; 3]) -> usize {
        idx[0] + self.n[0] * (idx[1] + self.n[1] * idx[2])
    }
}

/// Walks the ray through the grid, calling `visit(flat_index, length_mm)` for
/// every voxel crossed. The integral runs over the full infinite line.
fn traverse_ray<F: FnMut(usize, f64)>(grid: &Grid, ray: &Ray, mut visit: F) {
    let p = ray.point;
    let d = ray.dir;

    // Clip the line against the grid slab in each axis.
    let mut tmin = f64::NEG_INFINITY;
    let mut tmax = f64::INFINITY;
    for a in 0..3 {
        let lo = grid.bmin[a];
        let hi = grid.bmin[a] + grid.n[a] as f64 * grid.h;
        if d[a] == 0.0 {
            if p[a] < lo || p[a] > hi {
                return;
            }
        } else {
            let t1 = (lo - p[a]) / d[a];
            let t2 = (hi - p[a]) / d[a];
            tmin = tmin.max(t1.min(t2));
            tmax = tmax.min(t1.max(t2));
        }
    }
    if !(tmax > tmin) {
        return;
    }

    // Entry voxel and per-axis march state.
    let mut idx = [0usize; 3];
    let mut t_next = [f64::INFINITY; 3];
    let mut dt = [f64::INFINITY; 3];
    let mut step = [0isize; 3];
    for a in 0..3 {
        let q = p[a] + tmin * d[a];
        let mut i = ((q - grid.bmin[a]) / grid.h).floor() as isize;
        i = i.clamp(0, grid.n[a] as isize - 1);
        idx[a] = i as usize;
        if d[a] > 0.0 {
            step[a] = 1;
            let boundary = grid.bmin[a] + (i + 1) as f64 * grid.h;
            t_next[a] = (boundary - p[a]) / d[a];
            dt[a] = grid.h / d[a];
        } else if d[a] < 0.0 {
            step[a] = -1;
            let boundary = grid.bmin[a] + i as f64 * grid.h;
            t_next[a] = (boundary - p[a]) / d[a];
            dt[a] = grid.h / -d[a];
        }
    }

    let mut t_cur = tmin;
    loop {
        // Axis with the closest boundary crossing.
        let mut axis = 0;
        if t_next[1] < t_next[axis] {
            axis = 1;
        }
        if t_next[2] < t_next[axis] {
            axis = 2;
        }
        let t_stop = t_next[axis].min(tmax);
        let len = t_stop - t_cur;
        if len > 0.0 {
            visit(grid.flat(idx), len);
        }
        if t_next[axis] >= tmax {
            return;
        }
        t_cur = t_next[axis];
        let next = idx[axis] as isize + step[axis];
        if next < 0 || next >= grid.n[axis] as isize {
            return;
        }
        idx[axis] = next as usize;
        t_next[axis] += dt[axis];
    }
}

/// Projects a volume into a sinogram: each detector sample is the line
/// integral of attenuation along its ray. Rays that miss the grid read 0.
/// Weights of the returned sinogram are initialized to 1.
pub fn forward_project(v: &Volume, g: &ScanGeometry) -> Sinogram {
    let grid = Grid::of(v);
    let data = v.data();
    let mut sino = Sinogram::zeros(g.clone());
    let samples_per_view = g.det_rows * g.det_channels;
    let det_rows = g.det_rows;
    let det_channels = g.det_channels;
    sino.data_mut()
        .par_chunks_mut(samples_per_view)
        .enumerate()
        .for_each(|(view, out)| {
            for row in 0..det_rows {
                for channel in 0..det_channels {
                    let ray = g.ray(view, row, channel);
                    let mut acc = 0.0;
                    traverse_ray(&grid, &ray, |j, len| acc += len * data[j]);
                    out[channel + det_channels * row] = acc;
                }
            }
        });
    sino
}

/// Exact adjoint of [`forward_project`] under the same traversal. The output
/// grid (dims, spacing, origin) is taken from `template`; its data is ignored.
///
/// Views are back-projected into per-view partial volumes in parallel and
/// reduced in view order, so the result is independent of thread scheduling.
pub fn back_project(s: &Sinogram, template: &Volume) -> Volume {
    back_project_weighted(s, None, template)
}

/// `AᵀΛ y` for the sinogram's own data and weights: the right-hand side of
/// the weighted normal equations.
pub fn back_project_precision_weighted(s: &Sinogram, template: &Volume) -> Volume {
    back_project_weighted(s, Some(s.weights()), template)
}

/// Back projection of `diag(w) * data` when `w` is given, of `data` otherwise.
fn back_project_weighted(s: &Sinogram, w: Option<&[f64]>, template: &Volume) -> Volume {
    let g = &s.geometry;
    let grid = Grid::of(template);
    let n = template.num_voxels();
    let det_rows = g.det_rows;
    let det_channels = g.det_channels;

    let partials: Vec<Vec<f64>> = (0..g.num_views())
        .into_par_iter()
        .map(|view| {
            let mut part = vec![0.0; n];
            for row in 0..det_rows {
                for channel in 0..det_channels {
                    let i = g.sample_index(view, row, channel);
                    let mut val = s.data()[i];
                    if let Some(w) = w {
                        val *= w[i];
                    }
                    if val == 0.0 {
                        continue;
                    }
                    let ray = g.ray(view, row, channel);
                    traverse_ray(&grid, &ray, |j, len| part[j] += len * val);
                }
            }
            part
        })
        .collect();

    let mut out = template.zeros_like();
    let data = out.data_mut();
    for part in &partials {
        for (o, p) in data.iter_mut().zip(part.iter()) {
            *o += p;
        }
    }
    out
}

/// Applies `AᵀΛA v + v/σ²` on the grid of `v`, where Λ is the diagonal of
/// `weights` (one entry per detector sample) and A is defined by `g`.
pub fn apply_normal_operator(
    v: &Volume,
    weights: &[f64],
    g: &ScanGeometry,
    sigma: f64,
) -> Result<Volume> {
    assert!(sigma > 0.0, "sigma must be positive");
    let proj = forward_project(v, g);
    let mut out = back_project_weighted(&proj, Some(weights), v);
    out.axpy_inplace(1.0 / (sigma * sigma), v);
    Ok(out)
}

/// Exact diagonal of `AᵀΛA` on the template grid: `diag_j = Σ_i Λ_i w_ij²`
/// with `w_ij` the traversal lengths. Used to scale the proximal strength.
pub fn normal_operator_diag(weights: &[f64], g: &ScanGeometry, template: &Volume) -> Volume {
    let grid = Grid::of(template);
    let n = template.num_voxels();
    let det_rows = g.det_rows;
    let det_channels = g.det_channels;

    let partials: Vec<Vec<f64>> = (0..g.num_views())
        .into_par_iter()
        .map(|view| {
            let mut part = vec![0.0; n];
            for row in 0..det_rows {
                for channel in 0..det_channels {
                    let i = g.sample_index(view, row, channel);
                    let lam = weights[i];
                    if lam == 0.0 {
                        continue;
                    }
                    let ray = g.ray(view, row, channel);
                    traverse_ray(&grid, &ray, |j, len| part[j] += lam * len * len);
                }
            }
            part
        })
        .collect();

    let mut out = template.zeros_like();
    let data = out.data_mut();
    for part in &partials {
        for (o, p) in data.iter_mut().zip(part.iter()) {
            *o += p;
        }
    }
    out
}

/// Mean of the diagonal of `AᵀΛA`; `1/sqrt(mean)` is a reasonable default
/// proximal σ for the data agents.
pub fn normal_operator_diag_mean(weights: &[f64], g: &ScanGeometry, template: &Volume) -> f64 {
    let diag = normal_operator_diag(weights, g, template);
    diag.data().iter().sum::<f64>() / diag.num_voxels() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::ScanGeometry;

    fn single_view_parallel(det: usize) -> ScanGeometry {
        ScanGeometry::parallel3d(vec![0.0], det, det, 1.0).unwrap()
    }

    #[test]
    fn zero_volume_projects_to_zero() {
        let v = Volume::centered((4, 4, 4), 1.0);
        let g = ScanGeometry::parallel3d(ScanGeometry::even_angles(3, 1.0), 6, 6, 1.0).unwrap();
        let s = forward_project(&v, &g);
        assert!(s.data().iter().all(|&x| x == 0.0));
        assert!(s.weights().iter().all(|&w| w == 1.0));
    }

    #[test]
    fn single_voxel_hits_exactly_one_sample() {
        // 3x3x3 grid centered at the origin, unit voxel at the center.
        // At angle 0 the detector channel axis is x and rows run along z,
        // both with half-integer offsets relative to voxel centers for an
        // odd detector count, so the central ray passes through the voxel
        // center column.
        let mut v = Volume::centered((3, 3, 3), 1.0);
        v.set(1, 1, 1, 1.0);
        let g = single_view_parallel(3);
        let s = forward_project(&v, &g);
        for row in 0..3 {
            for channel in 0..3 {
                let val = s.get(0, row, channel);
                if row == 1 && channel == 1 {
                    assert!((val - 1.0).abs() < 1e-12, "central sample {val}");
                } else {
                    assert_eq!(val, 0.0, "sample ({row},{channel}) should miss");
                }
            }
        }
    }

    #[test]
    fn homogeneous_cube_full_chord() {
        // Unit-valued cube of side L voxels: axis-aligned rays through the
        // cube integrate to L * voxel_size.
        let l = 5usize;
        let h = 0.7;
        let mut v = Volume::centered((l, l, l), h);
        for val in v.data_mut() {
            *val = 1.0;
        }
        let g = ScanGeometry::parallel3d(vec![0.0], l, l, h).unwrap();
        let s = forward_project(&v, &g);
        for row in 0..l {
            for channel in 0..l {
                let val = s.get(0, row, channel);
                assert!(
                    (val - l as f64 * h).abs() < 1e-12,
                    "chord at ({row},{channel}) = {val}"
                );
            }
        }
    }

    #[test]
    fn ray_missing_grid_reads_zero() {
        let mut v = Volume::centered((2, 2, 2), 1.0);
        for val in v.data_mut() {
            *val = 1.0;
        }
        // Detector far wider than the volume: edge channels miss.
        let g = ScanGeometry::parallel3d(vec![0.3], 2, 12, 1.0).unwrap();
        let s = forward_project(&v, &g);
        assert_eq!(s.get(0, 0, 0), 0.0);
        assert_eq!(s.get(0, 1, 11), 0.0);
        assert!(s.get(0, 0, 6) > 0.0);
    }

    #[test]
    fn zero_sinogram_backprojects_to_zero() {
        let template = Volume::centered((4, 4, 4), 1.0);
        let g = ScanGeometry::parallel3d(ScanGeometry::even_angles(4, 2.0), 4, 4, 1.0).unwrap();
        let s = Sinogram::zeros(g);
        let v = back_project(&s, &template);
        assert!(v.data().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn single_sample_backprojects_along_its_ray() {
        let template = Volume::centered((3, 3, 3), 1.0);
        let g = single_view_parallel(3);
        let mut s = Sinogram::zeros(g.clone());
        let i = g.sample_index(0, 1, 1);
        s.data_mut()[i] = 2.0;
        let v = back_project(&s, &template);
        // The central ray crosses the middle column of voxels along y,
        // each with intersection length 1; value = 2 * 1.
        for k in 0..3 {
            for j in 0..3 {
                for ii in 0..3 {
                    let val = v.get(ii, j, k);
                    if ii == 1 && k == 1 {
                        assert!((val - 2.0).abs() < 1e-12);
                    } else {
                        assert_eq!(val, 0.0);
                    }
                }
            }
        }
    }

    #[test]
    fn adjoint_identity_small() {
        // <Ax, y> == <x, Aᵀy> for random-ish deterministic fillings.
        for mode in [0, 1] {
            let mut x = Volume::centered((8, 8, 8), 1.0);
            for (i, val) in x.data_mut().iter_mut().enumerate() {
                *val = ((i * 2654435761) % 1000) as f64 / 1000.0 - 0.3;
            }
            let angles = ScanGeometry::even_angles(5, std::f64::consts::TAU);
            let g = if mode == 0 {
                ScanGeometry::parallel3d(angles, 6, 6, 1.5).unwrap()
            } else {
                ScanGeometry::conebeam(angles, 6, 6, 1.5, 30.0, 60.0).unwrap()
            };
            let ax = forward_project(&x, &g);
            let mut y = Sinogram::zeros(g.clone());
            for (i, val) in y.data_mut().iter_mut().enumerate() {
                *val = ((i * 1103515245) % 997) as f64 / 997.0 - 0.5;
            }
            let aty = back_project(&y, &x);
            let lhs: f64 = ax.data().iter().zip(y.data()).map(|(a, b)| a * b).sum();
            let rhs = x.dot(&aty);
            let denom = ax.norm2() * y.norm2() + 1e-30;
            assert!(
                ((lhs - rhs) / denom).abs() < 1e-12,
                "mode {mode}: adjoint mismatch {lhs} vs {rhs}"
            );
        }
    }

    #[test]
    fn normal_operator_with_zero_weights_is_scaled_identity() {
        let mut v = Volume::centered((3, 3, 3), 1.0);
        v.set(0, 1, 2, 4.0);
        let g = single_view_parallel(3);
        let w = vec![0.0; g.num_samples()];
        let sigma = 0.5;
        let out = apply_normal_operator(&v, &w, &g, sigma).unwrap();
        for (o, i) in out.data().iter().zip(v.data().iter()) {
            assert!((o - i / (sigma * sigma)).abs() < 1e-12);
        }
    }

    #[test]
    fn normal_diag_matches_bruteforce() {
        let v = Volume::centered((3, 3, 2), 0.8);
        let g = ScanGeometry::parallel3d(ScanGeometry::even_angles(3, 2.0), 3, 4, 0.9).unwrap();
        let mut w = vec![0.0; g.num_samples()];
        for (i, wi) in w.iter_mut().enumerate() {
            *wi = 0.5 + (i % 3) as f64 * 0.25;
        }
        let diag = normal_operator_diag(&w, &g, &v);
        // Brute force via basis volumes: diag_j = (A e_j)ᵀ Λ (A e_j).
        for j in 0..v.num_voxels() {
            let mut e = v.zeros_like();
            e.data_mut()[j] = 1.0;
            let col = forward_project(&e, &g);
            let expect: f64 = col.data().iter().zip(w.iter()).map(|(c, wi)| wi * c * c).sum();
            let got = diag.data()[j];
            assert!(
                (got - expect).abs() <= 1e-12 * expect.max(1.0),
                "voxel {j}: {got} vs {expect}"
            );
        }
    }
}
