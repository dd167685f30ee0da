//! Curvature of the loss landscape.
//!
//! Everything here works through an [`HvpOracle`], a matrix-free map
//! `v ↦ H·v`. For networks the products come from central differences of
//! the analytic gradient ([`FiniteDifferenceHvp`]); [`dense_hessian`]
//! materializes the full matrix column by column for small problems and
//! serves as the cross-check for the stochastic estimators.

mod eigen;
mod esd;
mod hutchinson;
mod lanczos;
mod oracle;

pub use eigen::{symmetric_eigen, SymmetricEigen};
pub use esd::{esd, Esd, EsdConfig};
pub use hutchinson::{hutchinson_trace, TraceEstimate};
pub use lanczos::{lanczos, lanczos_topk, LanczosRun};
pub use oracle::{
    dense_hessian, hvp, DenseHessian, DenseOperator, FiniteDifferenceHvp, GradientSource, HvpOracle, LossKind,
    NetLoss, QuadraticLoss, DEFAULT_HVP_EPS, DENSE_HESSIAN_LIMIT,
};

use alloc::vec::Vec;

use crate::error::Result;
use crate::math;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields, default))]
pub struct SpectrumConfig {
    pub top_k: usize,
    pub lanczos_steps: usize,
    pub trace_max_probes: usize,
    pub trace_rel_tol: f64,
    pub esd: EsdConfig,
    pub seed: u64,
}

impl Default for SpectrumConfig {
    fn default() -> Self {
        Self {
            top_k: 10,
            lanczos_steps: 50,
            trace_max_probes: 200,
            trace_rel_tol: 1e-3,
            esd: EsdConfig::default(),
            seed: 42,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumReport {
    /// Signed Ritz values ordered by descending magnitude.
    pub top_eigenvalues: Vec<f64>,
    pub trace_estimate: f64,
    pub trace_probes: usize,
    pub esd: Esd,
    pub dim: usize,
    pub config: SpectrumConfig,
}

/// Top eigenvalues, Hutchinson trace and ESD of one operator. Each
/// estimator draws from its own substream of `config.seed`.
pub fn spectrum_report(oracle: &dyn HvpOracle, config: &SpectrumConfig) -> Result<SpectrumReport> {
    let n = oracle.dim();
    let k = config.top_k.min(n);
    let m = config.lanczos_steps.clamp(k, n);
    let top = lanczos_topk(oracle, k, m, math::substream(config.seed, "lanczos", 0))?;
    let trace = hutchinson_trace(
        oracle,
        config.trace_max_probes,
        config.trace_rel_tol,
        math::substream(config.seed, "hutchinson", 0),
    )?;
    let density = esd(oracle, &config.esd, math::substream(config.seed, "esd", 0))?;
    Ok(SpectrumReport {
        top_eigenvalues: top,
        trace_estimate: trace.estimate,
        trace_probes: trace.probes,
        esd: density,
        dim: n,
        config: *config,
    })
}
