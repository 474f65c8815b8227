//! Deterministic analytic phantoms: superpositions of (optionally
//! soft-edged) ellipsoids plus thin plates carrying triangular through-holes
//! as high-contrast detail.

use crate::error::{Error, Result};
use crate::volume::Volume;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhantomSpec {
    /// Grid size (nx, ny, nz); the grid is centered on the world origin.
    pub dims: [usize; 3],
    pub voxel_size_mm: f64,
    #[serde(default)]
    pub ellipsoids: Vec<EllipsoidSpec>,
    #[serde(default)]
    pub plates: Vec<PlateSpec>,
    /// Final clamp range for attenuation values (1/mm).
    #[serde(default)]
    pub clamp: Option<[f64; 2]>,
}

/// Axis-aligned ellipsoid adding `value` inside its surface. `edge_mm > 0`
/// replaces the hard surface with a logistic ramp of roughly that width.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EllipsoidSpec {
    pub center_mm: [f64; 3],
    pub semi_axes_mm: [f64; 3],
    pub value: f64,
    #[serde(default)]
    pub edge_mm: f64,
}

/// Axis-aligned box of attenuation `value`, intended to be thin along one
/// axis. Triangular holes puncture the plate along its thinnest axis.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlateSpec {
    pub center_mm: [f64; 3],
    /// Full extents along x, y, z in mm.
    pub size_mm: [f64; 3],
    pub value: f64,
    #[serde(default)]
    pub edge_mm: f64,
    #[serde(default)]
    pub holes: Vec<TriangleHoleSpec>,
}

/// A triangular prism cut through the plate. Vertices are world-coordinate
/// pairs in the plane spanned by the plate's two larger axes, ordered by
/// axis index (for a plate thin along y the pairs are (x, z)).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TriangleHoleSpec {
    pub vertices_mm: [[f64; 2]; 3],
}

impl PlateSpec {
    /// Index of the thinnest axis; holes run along it.
    fn through_axis(&self) -> usize {
        let mut axis = 0;
        for a in 1..3 {
            if self.size_mm[a] < self.size_mm[axis] {
                axis = a;
            }
        }
        axis
    }

    fn aabb(&self) -> ([f64; 3], [f64; 3]) {
        let mut lo = [0.0; 3];
        let mut hi = [0.0; 3];
        for a in 0..3 {
            lo[a] = self.center_mm[a] - self.size_mm[a] / 2.0;
            hi[a] = self.center_mm[a] + self.size_mm[a] / 2.0;
        }
        (lo, hi)
    }
}

/// Logistic step: ~1 well inside (`d` large positive), ~0 well outside, with
/// a transition band of roughly `edge` mm. `edge == 0` gives a hard step.
#[inline]
fn soft_step(d: f64, edge: f64) -> f64 {
    if edge <= 0.0 {
        return if d >= 0.0 { 1.0 } else { 0.0 };
    }
    1.0 / (1.0 + (-4.0 * d / edge).exp())
}

#[inline]
fn point_in_triangle(p: [f64; 2], v: &[[f64; 2]; 3]) -> bool {
    let sign = |a: [f64; 2], b: [f64; 2], c: [f64; 2]| -> f64 {
        (a[0] - c[0]) * (b[1] - c[1]) - (b[0] - c[0]) * (a[1] - c[1])
    };
    let d1 = sign(p, v[0], v[1]);
    let d2 = sign(p, v[1], v[2]);
    let d3 = sign(p, v[2], v[0]);
    let has_neg = d1 < 0.0 || d2 < 0.0 || d3 < 0.0;
    let has_pos = d1 > 0.0 || d2 > 0.0 || d3 > 0.0;
    !(has_neg && has_pos)
}

fn validate(spec: &PhantomSpec) -> Result<()> {
    if spec.dims.iter().any(|&d| d == 0) {
        return Err(Error::config("phantom dims must be positive"));
    }
    if !(spec.voxel_size_mm > 0.0) {
        return Err(Error::config("phantom voxel_size_mm must be > 0"));
    }
    for e in &spec.ellipsoids {
        if e.semi_axes_mm.iter().any(|&s| !(s > 0.0)) {
            return Err(Error::config("ellipsoid semi-axes must be positive"));
        }
    }
    for p in &spec.plates {
        if p.size_mm.iter().any(|&s| !(s > 0.0)) {
            return Err(Error::config("plate sizes must be positive"));
        }
        let axis = p.through_axis();
        let mut plane_axes = [0usize; 2];
        let mut n = 0;
        for a in 0..3 {
            if a != axis {
                plane_axes[n] = a;
                n += 1;
            }
        }
        for hole in &p.holes {
            for v in &hole.vertices_mm {
                for (vi, &pa) in v.iter().zip(plane_axes.iter()) {
                    let lo = p.center_mm[pa] - p.size_mm[pa] / 2.0;
                    let hi = p.center_mm[pa] + p.size_mm[pa] / 2.0;
                    if *vi < lo - 1e-9 || *vi > hi + 1e-9 {
                        return Err(Error::config(format!(
                            "plate hole vertex {vi} falls outside the plate span [{lo}, {hi}]"
                        )));
                    }
                }
            }
        }
    }
    // Overlapping plates would make the union value ambiguous.
    for i in 0..spec.plates.len() {
        for j in i + 1..spec.plates.len() {
            let (lo_i, hi_i) = spec.plates[i].aabb();
            let (lo_j, hi_j) = spec.plates[j].aabb();
            let overlaps = (0..3).all(|a| lo_i[a] < hi_j[a] && lo_j[a] < hi_i[a]);
            if overlaps {
                return Err(Error::config(format!(
                    "plates {i} and {j} overlap; plate features must be disjoint"
                )));
            }
        }
    }
    if let Some([lo, hi]) = spec.clamp {
        if !(lo < hi) {
            return Err(Error::config("phantom clamp range must satisfy lo < hi"));
        }
    }
    Ok(())
}

/// Evaluates the phantom on its grid. Same spec, same volume, always.
pub fn generate_phantom(spec: &PhantomSpec) -> Result<Volume> {
    validate(spec)?;
    let dims = (spec.dims[0], spec.dims[1], spec.dims[2]);
    let mut v = Volume::centered(dims, spec.voxel_size_mm);
    let (nx, ny, nz) = dims;

    for k in 0..nz {
        for j in 0..ny {
            for i in 0..nx {
                let q = v.voxel_center(i, j, k);
                let mut val = 0.0;

                for e in &spec.ellipsoids {
                    let rho = (0..3)
                        .map(|a| ((q[a] - e.center_mm[a]) / e.semi_axes_mm[a]).powi(2))
                        .sum::<f64>()
                        .sqrt();
                    // Signed distance-ish measure in mm toward the inside.
                    let scale = e.semi_axes_mm.iter().cloned().fold(f64::MAX, f64::min);
                    let d = (1.0 - rho) * scale;
                    val += e.value * soft_step(d, e.edge_mm);
                }

                for p in &spec.plates {
                    let mut w: f64 = 1.0;
                    for a in 0..3 {
                        let d = p.size_mm[a] / 2.0 - (q[a] - p.center_mm[a]).abs();
                        w *= soft_step(d, p.edge_mm);
                    }
                    if w > 0.0 && !p.holes.is_empty() {
                        let axis = p.through_axis();
                        let mut plane_axes = [0usize; 2];
                        let mut n = 0;
                        for a in 0..3 {
                            if a != axis {
                                plane_axes[n] = a;
                                n += 1;
                            }
                        }
                        let pp = [q[plane_axes[0]], q[plane_axes[1]]];
                        if p.holes.iter().any(|hh| point_in_triangle(pp, &hh.vertices_mm)) {
                            w = 0.0;
                        }
                    }
                    val += p.value * w;
                }

                if let Some([lo, hi]) = spec.clamp {
                    val = val.clamp(lo, hi);
                }
                v.set(i, j, k, val);
            }
        }
    }
    Ok(v)
}
