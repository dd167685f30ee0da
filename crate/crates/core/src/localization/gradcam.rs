use alloc::vec;
use alloc::vec::Vec;

use super::heatmap::{upsample_bilinear_aligned, Heatmap};
use crate::error::{bail_validation, Error, Result};
use crate::net::{backward_pass, forward_pass, NetworkState, Shape};
use crate::tensor::Tensor;

/// Spatially averaged gradients of the target logit, one per channel of
/// the chosen convolution.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelWeights(pub Vec<f64>);

#[derive(Debug, Clone)]
pub struct GradCam {
    pub weights: ChannelWeights,
    /// `ReLU(Σ_k w_k·A_k)` at feature-map resolution, before upsampling.
    pub raw: Vec<f64>,
    pub raw_dims: (usize, usize),
    pub heatmap: Heatmap,
}

/// Grad-CAM heatmap of `target_class` for one image at the network's
/// input resolution.
pub fn gradcam(net: &NetworkState, image: &Tensor, target_class: usize, conv_layer: usize) -> Result<Heatmap> {
    gradcam_detailed(net, image, target_class, conv_layer).map(|g| g.heatmap)
}

pub fn gradcam_detailed(
    net: &NetworkState,
    image: &Tensor,
    target_class: usize,
    conv_layer: usize,
) -> Result<GradCam> {
    let spec = net.spec();
    match spec.layers.get(conv_layer) {
        Some(l) if l.is_conv() => {}
        _ => bail_validation!("layer {conv_layer} is not a Conv2d layer"),
    }
    if target_class >= spec.classes {
        bail_validation!("target class {target_class} out of range for {} classes", spec.classes);
    }
    let [c, h, w] = spec.input;
    let batch = match image.shape() {
        s if s == [c, h, w] => image.clone().reshape(&[1, c, h, w])?,
        s if s == [1, c, h, w] => image.clone(),
        s => bail_validation!("image shape {:?} does not match network input {:?}", s, spec.input),
    };
    let cache = forward_pass(spec, net.params(), &batch)?;
    let mut onehot = vec![0.0; spec.classes];
    onehot[target_class] = 1.0;
    let d_logits = Tensor::new(vec![1, spec.classes], onehot)?;
    let (_, feature_grads) = backward_pass(spec, net.params(), &cache, &d_logits)?;
    let fg = feature_grads
        .iter()
        .find(|f| f.layer == conv_layer)
        .ok_or_else(|| Error::State("missing feature gradient".into()))?;

    let (k, fh, fw) = match spec.shapes()?[conv_layer + 1] {
        Shape::Spatial { channels, height, width } => (channels, height, width),
        Shape::Flat(_) => unreachable!("conv output is spatial"),
    };
    let area = fh * fw;
    let acts = cache.layer_output(conv_layer).data();
    let grads = fg.grad.data();
    let weights: Vec<f64> =
        (0..k).map(|ch| grads[ch * area..(ch + 1) * area].iter().sum::<f64>() / area as f64).collect();
    let mut raw = vec![0.0; area];
    for (ch, wk) in weights.iter().enumerate() {
        for (r, a) in raw.iter_mut().zip(&acts[ch * area..(ch + 1) * area]) {
            *r += wk * a;
        }
    }
    raw.iter_mut().for_each(|v| *v = v.max(0.0));
    let up = upsample_bilinear_aligned(&raw, (fh, fw), (h, w));
    let heatmap = Heatmap::normalize(h, w, up)?;
    Ok(GradCam { weights: ChannelWeights(weights), raw, raw_dims: (fh, fw), heatmap })
}
