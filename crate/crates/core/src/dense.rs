//! Small dense reference solvers.
//!
//! These assemble tiny instances of the system operator explicitly and solve
//! them by direct factorization. They share no code with the iterative paths
//! and exist so tests and diagnostics can cross-check the matrix-free
//! implementations against an independent route.

use crate::error::{Error, Result};
use crate::geometry::ScanGeometry;
use crate::projector::forward_project;
use crate::volume::Volume;

/// Row-major dense matrix, only as capable as the reference checks need.
#[derive(Debug, Clone)]
pub struct DenseMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseMatrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols);
        (0..self.rows)
            .map(|r| {
                let row = &self.data[r * self.cols..(r + 1) * self.cols];
                row.iter().zip(x).map(|(a, b)| a * b).sum()
            })
            .collect()
    }

    pub fn transpose_mul_vec(&self, y: &[f64]) -> Vec<f64> {
        assert_eq!(y.len(), self.rows);
        let mut out = vec![0.0; self.cols];
        for r in 0..self.rows {
            let row = &self.data[r * self.cols..(r + 1) * self.cols];
            for (o, a) in out.iter_mut().zip(row) {
                *o += a * y[r];
            }
        }
        out
    }
}

/// Materializes the projection operator for a tiny grid by pushing every unit
/// basis volume through the real forward projector: column j is `A e_j`.
pub fn assemble_projection_matrix(template: &Volume, g: &ScanGeometry) -> DenseMatrix {
    let n = template.num_voxels();
    let m = g.num_samples();
    let mut a = DenseMatrix::zeros(m, n);
    for j in 0..n {
        let mut e = template.zeros_like();
        e.data_mut()[j] = 1.0;
        let col = forward_project(&e, g);
        for (i, &v) in col.data().iter().enumerate() {
            a.set(i, j, v);
        }
    }
    a
}

/// Forms `AᵀΛA + I/σ²` densely from an assembled `A` and diagonal weights.
pub fn normal_matrix(a: &DenseMatrix, weights: &[f64], sigma: f64) -> DenseMatrix {
    assert_eq!(weights.len(), a.rows);
    assert!(sigma > 0.0);
    let n = a.cols;
    let mut h = DenseMatrix::zeros(n, n);
    for r in 0..a.rows {
        let row = &a.data[r * n..(r + 1) * n];
        let w = weights[r];
        if w == 0.0 {
            continue;
        }
        for i in 0..n {
            for j in 0..n {
                h.data[i * n + j] += w * row[i] * row[j];
            }
        }
    }
    let inv_s2 = 1.0 / (sigma * sigma);
    for i in 0..n {
        h.data[i * n + i] += inv_s2;
    }
    h
}

/// Solves `M x = b` by LU factorization with partial pivoting.
pub fn solve(m: &DenseMatrix, b: &[f64]) -> Result<Vec<f64>> {
    if m.rows != m.cols {
        return Err(Error::config(format!(
            "dense solve needs a square matrix, got {}x{}",
            m.rows, m.cols
        )));
    }
    if b.len() != m.rows {
        return Err(Error::config("dense solve: rhs length mismatch"));
    }
    let n = m.rows;
    let mut a = m.data.clone();
    let mut x: Vec<f64> = b.to_vec();

    for col in 0..n {
        // Pivot.
        let mut pivot = col;
        let mut best = a[col * n + col].abs();
        for r in col + 1..n {
            let v = a[r * n + col].abs();
            if v > best {
                best = v;
                pivot = r;
            }
        }
        if best == 0.0 {
            return Err(Error::Solver {
                reason: "dense solve: singular matrix".into(),
                trace: vec![],
            });
        }
        if pivot != col {
            for c in 0..n {
                a.swap(col * n + c, pivot * n + c);
            }
            x.swap(col, pivot);
        }
        // Eliminate below.
        let d = a[col * n + col];
        for r in col + 1..n {
            let f = a[r * n + col] / d;
            if f == 0.0 {
                continue;
            }
            a[r * n + col] = 0.0;
            for c in col + 1..n {
                a[r * n + c] -= f * a[col * n + c];
            }
            x[r] -= f * x[col];
        }
    }
    // Back substitution.
    for col in (0..n).rev() {
        x[col] /= a[col * n + col];
        for r in 0..col {
            x[r] -= a[r * n + col] * x[col];
        }
    }
    Ok(x)
}
