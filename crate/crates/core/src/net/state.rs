use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)] // shadowed by inherent f64 methods whenever std is linked
use num_traits::Float;
use rand::Rng;

use super::layers::{self, ConvGeom};
use super::spec::{Layer, NetworkSpec, Shape};
use crate::error::{bail_validation, Error, Result};
use crate::kd;
use crate::math;
use crate::tensor::Tensor;

/// Per-layer outputs from one forward pass. `activations[0]` is the input
/// batch and `activations[i + 1]` the output of layer `i`.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    pub activations: Vec<Tensor>,
    pattern: ActivationPattern,
}

/// Which branch every piecewise-linear unit took: the ReLU masks and the
/// max-pool winners of one forward pass.
///
/// Replaying a pattern at nearby parameters (see [`forward_pass_frozen`])
/// gives a loss that is smooth in the parameters, so finite differences of
/// its gradient recover the almost-everywhere Hessian instead of spikes from
/// crossed kinks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActivationPattern {
    gates: Vec<Gate>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Gate {
    Open,
    Relu(Vec<bool>),
    Pool(Vec<usize>),
}

impl ForwardCache {
    pub fn logits(&self) -> &Tensor {
        self.activations.last().expect("cache always holds the input")
    }

    pub fn input(&self) -> &Tensor {
        &self.activations[0]
    }

    /// Output of layer `layer` for the whole batch.
    pub fn layer_output(&self, layer: usize) -> &Tensor {
        &self.activations[layer + 1]
    }

    pub fn pattern(&self) -> &ActivationPattern {
        &self.pattern
    }
}

/// Gradient of the backpropagated scalar with respect to a conv layer's output.
#[derive(Debug, Clone)]
pub struct FeatureGrad {
    pub layer: usize,
    pub grad: Tensor,
}

#[derive(Debug, Clone)]
pub struct Backward {
    pub loss: f64,
    pub grad: Vec<f64>,
    pub feature_grads: Vec<FeatureGrad>,
}

/// A network specification, its flat parameter vector and the cache of
/// the most recent forward pass.
#[derive(Debug, Clone)]
pub struct NetworkState {
    spec: NetworkSpec,
    params: Vec<f64>,
    cache: Option<ForwardCache>,
}

fn check_batch(shapes: &[Shape], batch: &Tensor) -> Result<usize> {
    let s = batch.shape();
    let expect = shapes[0].batched(s.first().copied().unwrap_or(0));
    if s.len() != 4 || s != expect.as_slice() {
        bail_validation!("batch shape {:?} does not match network input {:?}", s, expect);
    }
    Ok(s[0])
}

/// Pure forward pass.
pub fn forward_pass(spec: &NetworkSpec, params: &[f64], batch: &Tensor) -> Result<ForwardCache> {
    forward_impl(spec, params, batch, None)
}

/// Forward pass that routes every ReLU and max-pool unit as in `pattern`
/// instead of by the current values. The pattern must come from a pass over
/// a batch of the same shape.
pub fn forward_pass_frozen(
    spec: &NetworkSpec,
    params: &[f64],
    batch: &Tensor,
    pattern: &ActivationPattern,
) -> Result<ForwardCache> {
    forward_impl(spec, params, batch, Some(pattern))
}

fn forward_impl(
    spec: &NetworkSpec,
    params: &[f64],
    batch: &Tensor,
    frozen: Option<&ActivationPattern>,
) -> Result<ForwardCache> {
    let shapes = spec.shapes()?;
    if params.len() != spec.param_count() {
        bail_validation!("expected {} parameters, got {}", spec.param_count(), params.len());
    }
    let n = check_batch(&shapes, batch)?;
    let offsets = spec.param_offsets();
    let mut activations = Vec::with_capacity(spec.layers.len() + 1);
    if let Some(p) = frozen {
        if p.gates.len() != spec.layers.len() {
            bail_validation!("activation pattern covers {} layers, network has {}", p.gates.len(), spec.layers.len());
        }
    }
    let mut gates = Vec::with_capacity(spec.layers.len());
    activations.push(batch.clone());
    for (i, layer) in spec.layers.iter().enumerate() {
        let x = activations[i].data();
        let in_shape = shapes[i];
        let out_shape = shapes[i + 1];
        let mut out = vec![0.0; n * out_shape.len()];
        let mut gate = Gate::Open;
        let frozen_gate = frozen.map(|p| &p.gates[i]);
        let p = &params[offsets[i]..offsets[i] + layer.param_count()];
        match (*layer, in_shape, out_shape) {
            (
                Layer::Conv2d { in_channels, out_channels, kernel, stride, padding },
                Shape::Spatial { height, width, .. },
                Shape::Spatial { height: oh, width: ow, .. },
            ) => {
                let g = ConvGeom {
                    batch: n,
                    in_ch: in_channels,
                    out_ch: out_channels,
                    in_h: height,
                    in_w: width,
                    out_h: oh,
                    out_w: ow,
                    kernel,
                    stride,
                    pad: padding,
                };
                let nw = out_channels * in_channels * kernel * kernel;
                layers::conv_forward(&g, x, &p[..nw], &p[nw..], &mut out);
            }
            (Layer::Relu, _, _) => {
                let mask = match frozen_gate {
                    Some(Gate::Relu(m)) if m.len() == x.len() => m.clone(),
                    Some(_) => bail_validation!("activation pattern does not match layer {i}"),
                    None => x.iter().map(|&v| v > 0.0).collect(),
                };
                for ((o, &v), &on) in out.iter_mut().zip(x).zip(&mask) {
                    *o = if on { v } else { 0.0 };
                }
                gate = Gate::Relu(mask);
            }
            (
                Layer::MaxPool { kernel, stride },
                Shape::Spatial { channels, height, width },
                Shape::Spatial { height: oh, width: ow, .. },
            ) => {
                let idx = match frozen_gate {
                    Some(Gate::Pool(idx)) if idx.len() == out.len() => {
                        for (o, &j) in out.iter_mut().zip(idx) {
                            *o = x[j];
                        }
                        idx.clone()
                    }
                    Some(_) => bail_validation!("activation pattern does not match layer {i}"),
                    None => {
                        let mut idx = vec![0; out.len()];
                        layers::maxpool_forward(
                            x,
                            n * channels,
                            (height, width),
                            (oh, ow),
                            kernel,
                            stride,
                            &mut out,
                            &mut idx,
                        );
                        idx
                    }
                };
                gate = Gate::Pool(idx);
            }
            (Layer::GlobalAvgPool, Shape::Spatial { channels, height, width }, _) => {
                layers::gap_forward(x, n * channels, height * width, &mut out);
            }
            (Layer::Dense { inputs, outputs }, _, _) => {
                let nw = outputs * inputs;
                layers::dense_forward(x, n, inputs, outputs, &p[..nw], &p[nw..], &mut out);
            }
            _ => unreachable!("validated by NetworkSpec::shapes"),
        }
        activations.push(Tensor::new(out_shape.batched(n), out)?);
        gates.push(gate);
    }
    Ok(ForwardCache { activations, pattern: ActivationPattern { gates } })
}

/// Backpropagates `d_logits` (gradient of some scalar with respect to the
/// logits) through a cached forward pass.
pub fn backward_pass(
    spec: &NetworkSpec,
    params: &[f64],
    cache: &ForwardCache,
    d_logits: &Tensor,
) -> Result<(Vec<f64>, Vec<FeatureGrad>)> {
    let shapes = spec.shapes()?;
    if d_logits.shape() != cache.logits().shape() {
        bail_validation!(
            "logit gradient shape {:?} does not match logits {:?}",
            d_logits.shape(),
            cache.logits().shape()
        );
    }
    let n = cache.input().shape()[0];
    let offsets = spec.param_offsets();
    let mut grad = vec![0.0; params.len()];
    let mut features = Vec::new();
    let mut d = d_logits.data().to_vec();
    for (i, layer) in spec.layers.iter().enumerate().rev() {
        let x = cache.activations[i].data();
        let in_shape = shapes[i];
        let mut dx = vec![0.0; x.len()];
        let pc = layer.param_count();
        let p = &params[offsets[i]..offsets[i] + pc];
        let gp = &mut grad[offsets[i]..offsets[i] + pc];
        match (*layer, in_shape, shapes[i + 1]) {
            (
                Layer::Conv2d { in_channels, out_channels, kernel, stride, padding },
                Shape::Spatial { height, width, .. },
                out_shape @ Shape::Spatial { height: oh, width: ow, .. },
            ) => {
                features.push(FeatureGrad {
                    layer: i,
                    grad: Tensor::new(out_shape.batched(n), d.clone())?,
                });
                let g = ConvGeom {
                    batch: n,
                    in_ch: in_channels,
                    out_ch: out_channels,
                    in_h: height,
                    in_w: width,
                    out_h: oh,
                    out_w: ow,
                    kernel,
                    stride,
                    pad: padding,
                };
                let nw = out_channels * in_channels * kernel * kernel;
                let (gw, gb) = gp.split_at_mut(nw);
                layers::conv_backward(&g, x, &p[..nw], &d, gw, gb, &mut dx);
            }
            (Layer::Relu, _, _) => {
                let Gate::Relu(mask) = &cache.pattern.gates[i] else { unreachable!("relu layer records a mask") };
                for ((o, &on), &g) in dx.iter_mut().zip(mask).zip(&d) {
                    *o = if on { g } else { 0.0 };
                }
            }
            (Layer::MaxPool { .. }, _, _) => {
                let Gate::Pool(idx) = &cache.pattern.gates[i] else { unreachable!("pool layer records winners") };
                layers::maxpool_backward(&d, idx, &mut dx);
            }
            (Layer::GlobalAvgPool, Shape::Spatial { height, width, .. }, _) => {
                layers::gap_backward(&d, height * width, &mut dx);
            }
            (Layer::Dense { inputs, outputs }, _, _) => {
                let nw = outputs * inputs;
                let (gw, gb) = gp.split_at_mut(nw);
                layers::dense_backward(x, n, inputs, outputs, &p[..nw], &d, gw, gb, &mut dx);
            }
            _ => unreachable!("validated by NetworkSpec::shapes"),
        }
        d = dx;
    }
    features.reverse();
    Ok((grad, features))
}

/// Mean cross-entropy over the batch and its gradient with respect to the logits.
pub fn cross_entropy_batch(logits: &Tensor, labels: &[usize]) -> Result<(f64, Tensor)> {
    let n = logits.shape()[0];
    let k = logits.shape()[1];
    if labels.len() != n {
        bail_validation!("{} labels for a batch of {}", labels.len(), n);
    }
    let mut loss = 0.0;
    let mut d = Vec::with_capacity(n * k);
    for (b, &label) in labels.iter().enumerate() {
        let z = logits.outer(b);
        loss += kd::cross_entropy(z, label)?;
        let mut p = kd::softmax(z);
        p[label] -= 1.0;
        d.extend(p.into_iter().map(|v| v / n as f64));
    }
    Ok((loss / n as f64, Tensor::new(vec![n, k], d)?))
}

impl NetworkState {
    /// Builds a network with He-uniform weights and small uniform biases.
    /// Each layer draws from its own substream of `seed`.
    pub fn build(spec: NetworkSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let mut params = Vec::with_capacity(spec.param_count());
        for (i, layer) in spec.layers.iter().enumerate() {
            let (fan_in, weights, biases) = match *layer {
                Layer::Conv2d { in_channels, out_channels, kernel, .. } => (
                    in_channels * kernel * kernel,
                    out_channels * in_channels * kernel * kernel,
                    out_channels,
                ),
                Layer::Dense { inputs, outputs } => (inputs, inputs * outputs, outputs),
                _ => continue,
            };
            let mut rng = math::rng(math::substream(seed, "init", i as u64));
            let w_bound = (6.0 / fan_in as f64).sqrt();
            let b_bound = 1.0 / (fan_in as f64).sqrt();
            params.extend((0..weights).map(|_| rng.gen_range(-w_bound..w_bound)));
            params.extend((0..biases).map(|_| rng.gen_range(-b_bound..b_bound)));
        }
        Ok(Self { spec, params, cache: None })
    }

    pub fn from_params(spec: NetworkSpec, params: Vec<f64>) -> Result<Self> {
        spec.validate()?;
        if params.len() != spec.param_count() {
            bail_validation!("expected {} parameters, got {}", spec.param_count(), params.len());
        }
        if params.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("non-finite parameter".into()));
        }
        Ok(Self { spec, params, cache: None })
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    /// Mutable access to the parameters; drops any cached forward pass.
    pub fn params_mut(&mut self) -> &mut [f64] {
        self.cache = None;
        &mut self.params
    }

    pub fn cache(&self) -> Option<&ForwardCache> {
        self.cache.as_ref()
    }

    /// Computes `(batch, classes)` logits and caches every layer output.
    pub fn forward(&mut self, batch: &Tensor) -> Result<Tensor> {
        let cache = forward_pass(&self.spec, &self.params, batch)?;
        let logits = cache.logits().clone();
        self.cache = Some(cache);
        Ok(logits)
    }

    /// Logits without touching the cache.
    pub fn predict(&self, batch: &Tensor) -> Result<Tensor> {
        Ok(forward_pass(&self.spec, &self.params, batch)?.logits().clone())
    }

    /// Mean cross-entropy of the cached batch against `labels`, with the
    /// parameter gradient and per-conv-layer feature gradients.
    pub fn backward(&self, labels: &[usize]) -> Result<Backward> {
        let cache = self.require_cache()?;
        if let Some(&bad) = labels.iter().find(|&&l| l >= self.spec.classes) {
            bail_validation!("label {bad} out of range for {} classes", self.spec.classes);
        }
        let (loss, d_logits) = cross_entropy_batch(cache.logits(), labels)?;
        let (grad, feature_grads) = backward_pass(&self.spec, &self.params, cache, &d_logits)?;
        Ok(Backward { loss, grad, feature_grads })
    }

    /// Backpropagates an arbitrary logit gradient through the cached pass.
    pub fn backward_from(&self, d_logits: &Tensor) -> Result<(Vec<f64>, Vec<FeatureGrad>)> {
        backward_pass(&self.spec, &self.params, self.require_cache()?, d_logits)
    }

    fn require_cache(&self) -> Result<&ForwardCache> {
        self.cache
            .as_ref()
            .ok_or_else(|| Error::State("backward called before forward".into()))
    }
}
