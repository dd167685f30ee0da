use alloc::vec::Vec;


use super::eigen::symmetric_eigen;
use super::oracle::HvpOracle;
use crate::error::{bail_validation, Result};
use crate::math::{self, Rng64};

/// Tridiagonal projection from a Lanczos run.
#[derive(Debug, Clone)]
pub struct LanczosRun {
    pub alphas: Vec<f64>,
    /// Off-diagonal entries; `betas.len() == alphas.len() - 1`. A zero marks
    /// a restart after an invariant subspace was exhausted.
    pub betas: Vec<f64>,
}

impl LanczosRun {
    pub fn tridiagonal(&self) -> Vec<f64> {
        let m = self.alphas.len();
        let mut t = alloc::vec![0.0; m * m];
        for (i, a) in self.alphas.iter().enumerate() {
            t[i * m + i] = *a;
        }
        for (i, b) in self.betas.iter().enumerate() {
            t[i * m + i + 1] = *b;
            t[(i + 1) * m + i] = *b;
        }
        t
    }
}

fn random_unit(rng: &mut Rng64, n: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..n).map(|_| math::normal(rng)).collect();
    let nv = math::norm(&v);
    math::scale(&mut v, 1.0 / nv);
    v
}

fn orthogonalize(w: &mut [f64], basis: &[Vec<f64>]) {
    // two passes of classical Gram-Schmidt
    for _ in 0..2 {
        for q in basis {
            let c = math::dot(w, q);
            math::axpy(-c, q, w);
        }
    }
}

/// Lanczos with full reorthogonalization, up to `m` steps from `start`.
///
/// With `restart` set, a breakdown (invariant subspace found) continues
/// from a fresh random vector orthogonal to the basis; otherwise the run
/// stops there, which is what quadrature needs.
pub fn lanczos(oracle: &dyn HvpOracle, m: usize, start: &[f64], restart: bool, rng: &mut Rng64) -> Result<LanczosRun> {
    let n = oracle.dim();
    if start.len() != n || n == 0 {
        bail_validation!("start vector of length {} for a {}-dim operator", start.len(), n);
    }
    let sn = math::norm(start);
    if sn == 0.0 {
        bail_validation!("Lanczos start vector is zero");
    }
    let m = m.min(n);
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(m);
    basis.push(start.iter().map(|x| x / sn).collect());
    let mut alphas = Vec::with_capacity(m);
    let mut betas = Vec::with_capacity(m);
    let mut scale: f64 = 0.0;
    for j in 0..m {
        let mut w = oracle.apply(&basis[j])?;
        let alpha = math::dot(&w, &basis[j]);
        alphas.push(alpha);
        orthogonalize(&mut w, &basis);
        let beta = math::norm(&w);
        scale = scale.max(alpha.abs()).max(beta);
        if j + 1 == m {
            break;
        }
        if beta > 1e-10 * scale.max(f64::MIN_POSITIVE) {
            math::scale(&mut w, 1.0 / beta);
            betas.push(beta);
            basis.push(w);
            continue;
        }
        if !restart {
            break;
        }
        let mut fresh = random_unit(rng, n);
        orthogonalize(&mut fresh, &basis);
        let fnorm = math::norm(&fresh);
        if fnorm < 1e-8 {
            break;
        }
        math::scale(&mut fresh, 1.0 / fnorm);
        betas.push(0.0);
        basis.push(fresh);
    }
    Ok(LanczosRun { alphas, betas })
}

/// The `k` Ritz values of largest magnitude (signed), ordered by
/// descending magnitude, from an `m`-step run with a seeded Gaussian start.
pub fn lanczos_topk(oracle: &dyn HvpOracle, k: usize, m: usize, seed: u64) -> Result<Vec<f64>> {
    let n = oracle.dim();
    if k == 0 || k > n {
        bail_validation!("k = {k} must lie in 1..={n}");
    }
    if m < k {
        bail_validation!("need at least k = {k} Lanczos steps, got {m}");
    }
    let mut rng = math::rng(seed);
    let start = random_unit(&mut rng, n);
    let run = lanczos(oracle, m, &start, true, &mut rng)?;
    let size = run.alphas.len();
    let mut ritz = symmetric_eigen(size, &run.tridiagonal())?.values;
    ritz.sort_by(|a, b| b.abs().total_cmp(&a.abs()).then(b.total_cmp(a)));
    ritz.truncate(k);
    Ok(ritz)
}
