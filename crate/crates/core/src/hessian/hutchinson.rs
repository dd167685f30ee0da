use alloc::vec::Vec;


use super::oracle::HvpOracle;
use crate::error::{bail_validation, Result};
use crate::math;

/// Probes per convergence window.
const WINDOW: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceEstimate {
    pub estimate: f64,
    pub probes: usize,
}

/// Hutchinson estimate `mean(zᵀHz)` over Rademacher probes.
///
/// Stops early once the running means over the last 10 probes spread by
/// less than `rel_tol·|mean|`; `rel_tol = 0` always runs `max_probes`.
/// Probe `i` draws from substream `i` of `seed`, so the estimate does not
/// depend on evaluation order.
pub fn hutchinson_trace(oracle: &dyn HvpOracle, max_probes: usize, rel_tol: f64, seed: u64) -> Result<TraceEstimate> {
    if max_probes == 0 {
        bail_validation!("need at least one probe");
    }
    if !(rel_tol >= 0.0) {
        bail_validation!("rel_tol must be non-negative, got {rel_tol}");
    }
    let n = oracle.dim();
    let mut sum = 0.0;
    let mut means: Vec<f64> = Vec::with_capacity(max_probes);
    for i in 0..max_probes {
        let mut rng = math::rng(math::substream(seed, "probe", i as u64));
        let z = math::rademacher(&mut rng, n);
        let hz = oracle.apply(&z)?;
        sum += math::dot(&z, &hz);
        let mean = sum / (i + 1) as f64;
        means.push(mean);
        if rel_tol > 0.0 && means.len() >= WINDOW {
            let window = &means[means.len() - WINDOW..];
            let lo = window.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = window.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if hi - lo < rel_tol * mean.abs() {
                return Ok(TraceEstimate { estimate: mean, probes: i + 1 });
            }
        }
    }
    Ok(TraceEstimate { estimate: sum / max_probes as f64, probes: max_probes })
}
