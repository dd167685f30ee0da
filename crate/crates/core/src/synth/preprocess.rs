use alloc::vec::Vec;

#[allow(unused_imports)] // shadowed by inherent f64 methods whenever std is linked
use num_traits::Float;

use crate::error::{bail_validation, Result};
use crate::tensor::Tensor;

/// Resize, centre crop and normalization settings.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct Preprocess {
    pub out_side: usize,
    pub crop_side: usize,
    pub mean: f64,
    pub std: f64,
}

impl Preprocess {
    pub fn apply(&self, image: &Tensor) -> Result<Tensor> {
        preprocess(image, self.out_side, self.crop_side, self.mean, self.std)
    }
}

/// Offset of a centred `crop` window inside `side`.
pub fn center_crop_offset(side: usize, crop: usize) -> usize {
    (side - crop) / 2
}

/// Bilinear resize of a `C×H×W` tensor with half-pixel centres and edge
/// clamping; resizing to the input size is the identity.
pub fn resize_bilinear(image: &Tensor, out_h: usize, out_w: usize) -> Result<Tensor> {
    let [c, h, w] = chw(image)?;
    if out_h == 0 || out_w == 0 {
        bail_validation!("resize target must be positive");
    }
    let coord = |dst: usize, src_len: usize, dst_len: usize| -> (usize, usize, f64) {
        let s = ((dst as f64 + 0.5) * src_len as f64 / dst_len as f64 - 0.5).clamp(0.0, (src_len - 1) as f64);
        let i0 = s.floor() as usize;
        let i1 = (i0 + 1).min(src_len - 1);
        (i0, i1, s - i0 as f64)
    };
    let rows: Vec<_> = (0..out_h).map(|y| coord(y, h, out_h)).collect();
    let cols: Vec<_> = (0..out_w).map(|x| coord(x, w, out_w)).collect();
    let src = image.data();
    let mut out = Vec::with_capacity(c * out_h * out_w);
    for ch in 0..c {
        let plane = &src[ch * h * w..(ch + 1) * h * w];
        for &(y0, y1, fy) in &rows {
            for &(x0, x1, fx) in &cols {
                let top = plane[y0 * w + x0] * (1.0 - fx) + plane[y0 * w + x1] * fx;
                let bottom = plane[y1 * w + x0] * (1.0 - fx) + plane[y1 * w + x1] * fx;
                out.push(top * (1.0 - fy) + bottom * fy);
            }
        }
    }
    Tensor::new(alloc::vec![c, out_h, out_w], out)
}

/// Resize to `out_side²`, centre crop to `crop_side²`, then `(x − mean)/std`.
pub fn preprocess(image: &Tensor, out_side: usize, crop_side: usize, mean: f64, std: f64) -> Result<Tensor> {
    let [c, h, w] = chw(image)?;
    if crop_side == 0 || crop_side > out_side || out_side > h.min(w) {
        bail_validation!("need 0 < crop ({crop_side}) <= resize ({out_side}) <= min side ({})", h.min(w));
    }
    if !(std > 0.0 && std.is_finite() && mean.is_finite()) {
        bail_validation!("normalization needs finite mean and positive std, got {mean}, {std}");
    }
    let resized = resize_bilinear(image, out_side, out_side)?;
    let off = center_crop_offset(out_side, crop_side);
    let src = resized.data();
    let mut out = Vec::with_capacity(c * crop_side * crop_side);
    for ch in 0..c {
        for y in off..off + crop_side {
            let row = (ch * out_side + y) * out_side;
            out.extend(src[row + off..row + off + crop_side].iter().map(|v| (v - mean) / std));
        }
    }
    Tensor::new(alloc::vec![c, crop_side, crop_side], out)
}

fn chw(image: &Tensor) -> Result<[usize; 3]> {
    match *image.shape() {
        [c, h, w] => Ok([c, h, w]),
        ref s => bail_validation!("expected a C×H×W image, got shape {s:?}"),
    }
}
