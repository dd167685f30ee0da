//! Eigenvalue spectral density by stochastic Lanczos quadrature.

use alloc::vec::Vec;

#[allow(unused_imports)] // shadowed by inherent f64 methods whenever std is linked
use num_traits::Float;

use super::eigen::symmetric_eigen;
use super::lanczos::lanczos;
use super::oracle::HvpOracle;
use crate::error::{bail_validation, Result};
use crate::math;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields, default))]
pub struct EsdConfig {
    pub probes: usize,
    pub lanczos_steps: usize,
    /// Gaussian kernel width; `None` uses 1% of the Ritz-value span.
    pub sigma: Option<f64>,
    pub grid: usize,
}

impl Default for EsdConfig {
    fn default() -> Self {
        Self { probes: 10, lanczos_steps: 50, sigma: None, grid: 512 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Esd {
    /// `(eigenvalue, density)` on a uniform grid; integrates to 1.
    pub points: Vec<(f64, f64)>,
    pub sigma: f64,
    /// Quadrature nodes and weights pooled over probes (weights sum to 1).
    pub nodes: Vec<(f64, f64)>,
}

impl Esd {
    pub fn integral(&self) -> f64 {
        trapezoid(&self.points)
    }
}

fn trapezoid(points: &[(f64, f64)]) -> f64 {
    points.windows(2).map(|w| 0.5 * (w[1].0 - w[0].0) * (w[0].1 + w[1].1)).sum()
}

pub fn esd(oracle: &dyn HvpOracle, config: &EsdConfig, seed: u64) -> Result<Esd> {
    if config.probes == 0 {
        bail_validation!("need at least one probe");
    }
    if config.lanczos_steps < 2 {
        bail_validation!("need at least two Lanczos steps, got {}", config.lanczos_steps);
    }
    if config.grid < 2 {
        bail_validation!("grid needs at least two points");
    }
    if let Some(s) = config.sigma {
        if !(s > 0.0) {
            bail_validation!("sigma must be positive, got {s}");
        }
    }
    let n = oracle.dim();
    let mut nodes = Vec::new();
    for p in 0..config.probes {
        let mut rng = math::rng(math::substream(seed, "slq", p as u64));
        let start: Vec<f64> = (0..n).map(|_| math::normal(&mut rng)).collect();
        let run = lanczos(oracle, config.lanczos_steps, &start, false, &mut rng)?;
        let size = run.alphas.len();
        let eig = symmetric_eigen(size, &run.tridiagonal())?;
        for i in 0..size {
            let tau = eig.vector_component(0, i);
            nodes.push((eig.values[i], tau * tau / config.probes as f64));
        }
    }
    let lo_node = nodes.iter().map(|n| n.0).fold(f64::INFINITY, f64::min);
    let hi_node = nodes.iter().map(|n| n.0).fold(f64::NEG_INFINITY, f64::max);
    let span = hi_node - lo_node;
    let degenerate = span <= 1e-12 * lo_node.abs().max(hi_node.abs()).max(1.0);
    let (lo, hi, sigma) = if degenerate {
        let c = 0.5 * (lo_node + hi_node);
        let sigma = config.sigma.unwrap_or(0.02);
        let half = 1.0f64.max(3.0 * sigma);
        (c - half, c + half, sigma)
    } else {
        let sigma = config.sigma.unwrap_or(0.01 * span);
        (lo_node - 3.0 * sigma, hi_node + 3.0 * sigma, sigma)
    };
    let norm = 1.0 / (sigma * (2.0 * core::f64::consts::PI).sqrt());
    let step = (hi - lo) / (config.grid - 1) as f64;
    let mut points: Vec<(f64, f64)> = (0..config.grid)
        .map(|i| {
            let x = lo + step * i as f64;
            let d = nodes
                .iter()
                .map(|&(l, w)| {
                    let z = (x - l) / sigma;
                    w * norm * (-0.5 * z * z).exp()
                })
                .sum::<f64>();
            (x, d)
        })
        .collect();
    let mass = trapezoid(&points);
    if mass > 0.0 {
        points.iter_mut().for_each(|p| p.1 /= mass);
    }
    Ok(Esd { points, sigma, nodes })
}
