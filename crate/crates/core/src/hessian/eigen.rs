//! Cyclic Jacobi eigen-decomposition for small dense symmetric matrices.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)] // shadowed by inherent f64 methods whenever std is linked
use num_traits::Float;

use crate::error::{bail_validation, Error, Result};

#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    /// Ascending.
    pub values: Vec<f64>,
    /// Column `i` (row-major `n×n`, entry `[r*n + i]`) is the unit
    /// eigenvector of `values[i]`.
    pub vectors: Vec<f64>,
    pub n: usize,
}

impl SymmetricEigen {
    pub fn vector_component(&self, row: usize, col: usize) -> f64 {
        self.vectors[row * self.n + col]
    }
}

const MAX_SWEEPS: usize = 100;

pub fn symmetric_eigen(n: usize, matrix: &[f64]) -> Result<SymmetricEigen> {
    if matrix.len() != n * n {
        bail_validation!("{n}x{n} matrix needs {} entries, got {}", n * n, matrix.len());
    }
    let mut a = matrix.to_vec();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    let scale = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mut converged = n < 2 || scale == 0.0;
    for _ in 0..MAX_SWEEPS {
        if converged {
            break;
        }
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i * n + j] * a[i * n + j])
            .sum::<f64>()
            .sqrt();
        if off <= 1e-15 * scale {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq.abs() <= 1e-300 {
                    continue;
                }
                let (app, aqq) = (a[p * n + p], a[q * n + q]);
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k * n + p], a[k * n + q]);
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p * n + k], a[q * n + k]);
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let (vkp, vkq) = (v[k * n + p], v[k * n + q]);
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    if !converged {
        return Err(Error::Numeric("Jacobi eigen-decomposition did not converge".into()));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[i * n + i].total_cmp(&a[j * n + j]));
    let values = order.iter().map(|&i| a[i * n + i]).collect();
    let mut vectors = vec![0.0; n * n];
    for (new, &old) in order.iter().enumerate() {
        for r in 0..n {
            vectors[r * n + new] = v[r * n + old];
        }
    }
    Ok(SymmetricEigen { values, vectors, n })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_by_two() {
        let e = symmetric_eigen(2, &[3.0, 1.0, 1.0, 2.0]).unwrap();
        let s5 = 5.0f64.sqrt();
        assert!((e.values[0] - (5.0 - s5) / 2.0).abs() < 1e-14);
        assert!((e.values[1] - (5.0 + s5) / 2.0).abs() < 1e-14);
    }

    #[test]
    fn reconstructs_random_matrix() {
        let n = 7;
        let mut m = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let x = ((i * 31 + j * 17) % 13) as f64 - 6.0;
                m[i * n + j] = x;
                m[j * n + i] = x;
            }
        }
        let e = symmetric_eigen(n, &m).unwrap();
        for i in 0..n {
            for j in 0..n {
                let r: f64 = (0..n).map(|k| e.vector_component(i, k) * e.values[k] * e.vector_component(j, k)).sum();
                assert!((r - m[i * n + j]).abs() < 1e-10);
            }
        }
        let trace: f64 = (0..n).map(|i| m[i * n + i]).sum();
        assert!((e.values.iter().sum::<f64>() - trace).abs() < 1e-10);
    }
}
