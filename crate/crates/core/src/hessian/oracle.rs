use alloc::vec;
use alloc::vec::Vec;


use crate::error::{bail_validation, Error, Result};
use crate::kd::{self, KdParams};
use crate::math;
use crate::net::{self, ActivationPattern, NetworkSpec};
use crate::tensor::Tensor;

/// Relative finite-difference step; the absolute step is `eps·(1 + ‖θ‖)`.
pub const DEFAULT_HVP_EPS: f64 = 1e-4;
/// Largest parameter count [`dense_hessian`] will materialize.
pub const DENSE_HESSIAN_LIMIT: usize = 500;

/// Matrix-free symmetric operator `v ↦ H·v`.
pub trait HvpOracle {
    fn dim(&self) -> usize;
    fn apply(&self, v: &[f64]) -> Result<Vec<f64>>;
}

/// Dense row-major symmetric matrix as an oracle.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseOperator {
    n: usize,
    data: Vec<f64>,
}

impl DenseOperator {
    pub fn new(n: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * n {
            bail_validation!("{n}x{n} matrix needs {} entries, got {}", n * n, data.len());
        }
        Ok(Self { n, data })
    }

    pub fn diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        let mut data = vec![0.0; n * n];
        for (i, d) in diag.iter().enumerate() {
            data[i * n + i] = *d;
        }
        Self { n, data }
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }
}

impl HvpOracle for DenseOperator {
    fn dim(&self) -> usize {
        self.n
    }

    fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.n {
            bail_validation!("vector of length {} for a {}-dim operator", v.len(), self.n);
        }
        Ok(self.data.chunks_exact(self.n).map(|row| math::dot(row, v)).collect())
    }
}

/// Anything with parameters and a gradient of a scalar loss.
pub trait GradientSource {
    fn params(&self) -> &[f64];
    fn gradient(&self, params: &[f64]) -> Result<Vec<f64>>;
}

/// `L(θ) = ½ θᵀAθ`, whose Hessian is exactly `A`.
#[derive(Debug, Clone)]
pub struct QuadraticLoss {
    pub matrix: DenseOperator,
    pub theta: Vec<f64>,
}

impl GradientSource for QuadraticLoss {
    fn params(&self) -> &[f64] {
        &self.theta
    }

    fn gradient(&self, params: &[f64]) -> Result<Vec<f64>> {
        self.matrix.apply(params)
    }
}

#[derive(Debug, Clone)]
pub enum LossKind {
    CrossEntropy,
    /// Student objective against fixed teacher logits for the same batch.
    Distillation { teacher_logits: Tensor, kd: KdParams },
}

/// Network loss over a fixed batch, as a function of the parameters.
///
/// Gradients are taken with the activation pattern frozen at the base
/// parameters, which is the Hessian double backpropagation would give.
#[derive(Debug, Clone)]
pub struct NetLoss {
    spec: NetworkSpec,
    params: Vec<f64>,
    batch: Tensor,
    labels: Vec<usize>,
    loss: LossKind,
    pattern: ActivationPattern,
}

impl NetLoss {
    pub fn new(spec: NetworkSpec, params: Vec<f64>, batch: Tensor, labels: Vec<usize>, loss: LossKind) -> Result<Self> {
        let cache = net::forward_pass(&spec, &params, &batch)?;
        if labels.len() != batch.shape()[0] {
            bail_validation!("{} labels for a batch of {}", labels.len(), batch.shape()[0]);
        }
        if let LossKind::Distillation { teacher_logits, kd } = &loss {
            kd.validate()?;
            if teacher_logits.shape() != cache.logits().shape() {
                bail_validation!(
                    "teacher logits {:?} do not match student logits {:?}",
                    teacher_logits.shape(),
                    cache.logits().shape()
                );
            }
        }
        let pattern = cache.pattern().clone();
        Ok(Self { spec, params, batch, labels, loss, pattern })
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn loss_and_gradient(&self, params: &[f64]) -> Result<(f64, Vec<f64>)> {
        let cache = net::forward_pass_frozen(&self.spec, params, &self.batch, &self.pattern)?;
        let (loss, d_logits) = match &self.loss {
            LossKind::CrossEntropy => net::cross_entropy_batch(cache.logits(), &self.labels)?,
            LossKind::Distillation { teacher_logits, kd } => {
                kd::total_loss_batch(teacher_logits, cache.logits(), &self.labels, *kd)?
            }
        };
        let (grad, _) = net::backward_pass(&self.spec, params, &cache, &d_logits)?;
        Ok((loss, grad))
    }
}

impl GradientSource for NetLoss {
    fn params(&self) -> &[f64] {
        &self.params
    }

    fn gradient(&self, params: &[f64]) -> Result<Vec<f64>> {
        self.loss_and_gradient(params).map(|(_, g)| g)
    }
}

/// Central difference of gradients along `v`:
/// `(∇L(θ + εv̂) − ∇L(θ − εv̂))·‖v‖/(2ε)` with `v̂ = v/‖v‖` and
/// `ε = eps·(1 + ‖θ‖)`.
pub fn hvp<S: GradientSource + ?Sized>(source: &S, v: &[f64], eps: f64) -> Result<Vec<f64>> {
    let theta = source.params();
    if v.len() != theta.len() {
        bail_validation!("vector of length {} for {} parameters", v.len(), theta.len());
    }
    if !(eps > 0.0) {
        bail_validation!("finite-difference step must be positive, got {eps}");
    }
    let vn = math::norm(v);
    if vn == 0.0 {
        return Ok(vec![0.0; v.len()]);
    }
    let step = eps * (1.0 + math::norm(theta));
    let shifted = |sign: f64| -> Vec<f64> {
        theta.iter().zip(v).map(|(t, vi)| t + sign * step * vi / vn).collect()
    };
    let gp = source.gradient(&shifted(1.0))?;
    let gm = source.gradient(&shifted(-1.0))?;
    let out: Vec<f64> = gp.iter().zip(&gm).map(|(a, b)| (a - b) * vn / (2.0 * step)).collect();
    if out.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numeric("non-finite Hessian-vector product".into()));
    }
    Ok(out)
}

/// [`hvp`] packaged as an oracle.
#[derive(Debug, Clone)]
pub struct FiniteDifferenceHvp<S> {
    pub source: S,
    pub eps: f64,
}

impl<S> FiniteDifferenceHvp<S> {
    pub fn new(source: S) -> Self {
        Self { source, eps: DEFAULT_HVP_EPS }
    }
}

impl<S: GradientSource> HvpOracle for FiniteDifferenceHvp<S> {
    fn dim(&self) -> usize {
        self.source.params().len()
    }

    fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        hvp(&self.source, v, self.eps)
    }
}

#[derive(Debug, Clone)]
pub struct DenseHessian {
    /// Symmetrized `(H + Hᵀ)/2`.
    pub matrix: DenseOperator,
    /// `max |H_ij − H_ji|` before symmetrization.
    pub asymmetry: f64,
}

/// Materializes the operator column by column (`H e_j`).
pub fn dense_hessian(oracle: &dyn HvpOracle) -> Result<DenseHessian> {
    let n = oracle.dim();
    if n > DENSE_HESSIAN_LIMIT {
        bail_validation!("dense Hessian limited to {DENSE_HESSIAN_LIMIT} parameters, got {n}");
    }
    let mut cols = Vec::with_capacity(n);
    let mut e = vec![0.0; n];
    for j in 0..n {
        e[j] = 1.0;
        cols.push(oracle.apply(&e)?);
        e[j] = 0.0;
    }
    let mut data = vec![0.0; n * n];
    let mut asymmetry: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            // cols[j][i] = H_ij
            let (hij, hji) = (cols[j][i], cols[i][j]);
            asymmetry = asymmetry.max((hij - hji).abs());
            data[i * n + j] = 0.5 * (hij + hji);
        }
    }
    Ok(DenseHessian { matrix: DenseOperator { n, data }, asymmetry })
}
