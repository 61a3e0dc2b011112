//! Banded Cholesky and Jacobi-preconditioned conjugate gradients for large
//! pinned Laplacians. Box vertex ids are lexicographic, so the bandwidth of a
//! `d`-dimensional box of side `L` is about `L^(d-1)`.

use super::SparsePinned;
use crate::error::{Error, Result};

/// Lower Cholesky factor stored by rows inside the band.
#[derive(Clone, Debug)]
pub struct BandedCholesky {
    n: usize,
    b: usize,
    // row i holds L[i][i-b ..= i] at offsets 0 ..= b
    rows: Vec<f64>,
}

impl BandedCholesky {
    pub(crate) fn new(a: &SparsePinned) -> Result<Self> {
        let n = a.dim();
        let b = a.bandwidth();
        let w = b + 1;
        let mut rows = vec![0.0; n * w];
        let at = |i: usize, j: usize| i * w + (j + b - i);
        for i in 0..n {
            rows[at(i, i)] = a.diag[i];
            for &(j, v) in &a.off[i] {
                if j < i {
                    rows[at(i, j)] += v;
                }
            }
        }
        for i in 0..n {
            let lo = i.saturating_sub(b);
            for j in lo..=i {
                let jlo = j.saturating_sub(b).max(lo);
                let mut s = rows[at(i, j)];
                for k in jlo..j {
                    s -= rows[at(i, k)] * rows[at(j, k)];
                }
                if j == i {
                    if !(s > 0.0) {
                        return Err(Error::Factorization(format!("non-positive pivot at row {i}")));
                    }
                    rows[at(i, i)] = s.sqrt();
                } else {
                    rows[at(i, j)] = s / rows[at(j, j)];
                }
            }
        }
        Ok(BandedCholesky { n, b, rows })
    }

    fn get(&self, i: usize, j: usize) -> f64 {
        self.rows[i * (self.b + 1) + (j + self.b - i)]
    }

    pub fn log_det(&self) -> f64 {
        2.0 * (0..self.n).map(|i| self.get(i, i).ln()).sum::<f64>()
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        self.backward(&self.forward(rhs))
    }

    /// `L⁻¹ rhs`.
    pub fn forward(&self, rhs: &[f64]) -> Vec<f64> {
        let mut y = rhs.to_vec();
        for i in 0..self.n {
            let mut s = y[i];
            for k in i.saturating_sub(self.b)..i {
                s -= self.get(i, k) * y[k];
            }
            y[i] = s / self.get(i, i);
        }
        y
    }

    /// `L⁻ᵀ rhs`.
    pub fn backward(&self, rhs: &[f64]) -> Vec<f64> {
        let mut y = rhs.to_vec();
        for i in (0..self.n).rev() {
            let mut s = y[i];
            for k in i + 1..(i + self.b + 1).min(self.n) {
                s -= self.get(k, i) * y[k];
            }
            y[i] = s / self.get(i, i);
        }
        y
    }
}

/// Jacobi-preconditioned conjugate gradients on the pinned system. Returns
/// the solution and the number of iterations used.
pub fn conjugate_gradient(
    mul: &dyn Fn(&[f64], &mut [f64]),
    diag: &[f64],
    rhs: &[f64],
    rel_tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, usize)> {
    let n = rhs.len();
    let norm_b = rhs.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mut x = vec![0.0; n];
    if norm_b == 0.0 {
        return Ok((x, 0));
    }
    let mut r = rhs.to_vec();
    let mut z: Vec<f64> = r.iter().zip(diag).map(|(a, d)| a / d).collect();
    let mut p = z.clone();
    let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
    let mut ap = vec![0.0; n];
    for it in 1..=max_iter {
        mul(&p, &mut ap);
        let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
        if !(pap > 0.0) {
            return Err(Error::Solve("matrix not positive definite along search direction".into()));
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let norm_r = r.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm_r <= rel_tol * norm_b {
            return Ok((x, it));
        }
        for i in 0..n {
            z[i] = r[i] / diag[i];
        }
        let rz_new: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::Solve(format!("conjugate gradients did not converge in {max_iter} iterations")))
}

#[cfg(test)]
mod tests {
    use super::super::{log_det_pinned_weights, pinned_index, SparsePinned};
    use super::*;
    use crate::graph::build_free_box;

    #[test]
    fn banded_matches_dense() {
        let g = build_free_box(2, 3).unwrap();
        let w: Vec<f64> = (0..g.n_edges()).map(|e| 1.0 + (e % 3) as f64).collect();
        let sp = SparsePinned::new(&g, &w, 0);
        let band = BandedCholesky::new(&sp).unwrap();
        let dense = log_det_pinned_weights(&g, &w, 0).unwrap();
        assert!((band.log_det() - dense).abs() < 1e-10 * dense.abs());
        let rhs: Vec<f64> = (0..sp.dim()).map(|i| (i as f64).sin()).collect();
        let x = band.solve(&rhs);
        let (y, _) = conjugate_gradient(&|a, b| sp.mul(a, b), &sp.diag, &rhs, 1e-13, 1000).unwrap();
        for (a, b) in x.iter().zip(&y) {
            assert!((a - b).abs() < 1e-9);
        }
        assert_eq!(pinned_index(5, 0), Some(4));
    }
}
