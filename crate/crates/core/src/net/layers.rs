//! Batched layer kernels over raw row-major slices.

#[derive(Debug, Clone, Copy)]
pub(crate) struct ConvGeom {
    pub batch: usize,
    pub in_ch: usize,
    pub out_ch: usize,
    pub in_h: usize,
    pub in_w: usize,
    pub out_h: usize,
    pub out_w: usize,
    pub kernel: usize,
    pub stride: usize,
    pub pad: usize,
}

/// Output indices `o` in `[lo, hi)` whose input tap `o*stride + k - pad`
/// lands inside `[0, in_len)`.
fn valid_range(k: usize, pad: usize, stride: usize, in_len: usize, out_len: usize) -> (usize, usize) {
    let lo = if k >= pad { 0 } else { (pad - k).div_ceil(stride) };
    if in_len + pad < k + 1 {
        return (0, 0);
    }
    let hi = ((in_len - 1 + pad - k) / stride + 1).min(out_len);
    (lo.min(hi), hi)
}

pub(crate) fn conv_forward(g: &ConvGeom, input: &[f64], weight: &[f64], bias: &[f64], out: &mut [f64]) {
    let (ih, iw, oh, ow, k) = (g.in_h, g.in_w, g.out_h, g.out_w, g.kernel);
    for b in 0..g.batch {
        for oc in 0..g.out_ch {
            let o_base = (b * g.out_ch + oc) * oh * ow;
            let plane = &mut out[o_base..o_base + oh * ow];
            plane.iter_mut().for_each(|v| *v = bias[oc]);
            for ic in 0..g.in_ch {
                let i_base = (b * g.in_ch + ic) * ih * iw;
                let x = &input[i_base..i_base + ih * iw];
                for ky in 0..k {
                    let (y0, y1) = valid_range(ky, g.pad, g.stride, ih, oh);
                    for kx in 0..k {
                        let wv = weight[((oc * g.in_ch + ic) * k + ky) * k + kx];
                        let (x0, x1) = valid_range(kx, g.pad, g.stride, iw, ow);
                        for oy in y0..y1 {
                            let iy = oy * g.stride + ky - g.pad;
                            let row = &x[iy * iw..(iy + 1) * iw];
                            let orow = &mut plane[oy * ow..(oy + 1) * ow];
                            for ox in x0..x1 {
                                orow[ox] += wv * row[ox * g.stride + kx - g.pad];
                            }
                        }
                    }
                }
            }
        }
    }
}

/// Accumulates weight and bias gradients and writes the input gradient.
pub(crate) fn conv_backward(
    g: &ConvGeom,
    input: &[f64],
    weight: &[f64],
    d_out: &[f64],
    d_weight: &mut [f64],
    d_bias: &mut [f64],
    d_input: &mut [f64],
) {
    let (ih, iw, oh, ow, k) = (g.in_h, g.in_w, g.out_h, g.out_w, g.kernel);
    d_input.iter_mut().for_each(|v| *v = 0.0);
    for b in 0..g.batch {
        for oc in 0..g.out_ch {
            let o_base = (b * g.out_ch + oc) * oh * ow;
            let dplane = &d_out[o_base..o_base + oh * ow];
            d_bias[oc] += dplane.iter().sum::<f64>();
            for ic in 0..g.in_ch {
                let i_base = (b * g.in_ch + ic) * ih * iw;
                let x = &input[i_base..i_base + ih * iw];
                let dx = &mut d_input[i_base..i_base + ih * iw];
                for ky in 0..k {
                    let (y0, y1) = valid_range(ky, g.pad, g.stride, ih, oh);
                    for kx in 0..k {
                        let widx = ((oc * g.in_ch + ic) * k + ky) * k + kx;
                        let wv = weight[widx];
                        let (x0, x1) = valid_range(kx, g.pad, g.stride, iw, ow);
                        let mut acc = 0.0;
                        for oy in y0..y1 {
                            let iy = oy * g.stride + ky - g.pad;
                            let drow = &dplane[oy * ow..(oy + 1) * ow];
                            for ox in x0..x1 {
                                let ix = iy * iw + ox * g.stride + kx - g.pad;
                                acc += drow[ox] * x[ix];
                                dx[ix] += wv * drow[ox];
                            }
                        }
                        d_weight[widx] += acc;
                    }
                }
            }
        }
    }
}

/// Max pooling; records the flat input index of each window's first maximum.
pub(crate) fn maxpool_forward(
    input: &[f64],
    planes: usize,
    (ih, iw): (usize, usize),
    (oh, ow): (usize, usize),
    kernel: usize,
    stride: usize,
    out: &mut [f64],
    argmax: &mut [usize],
) {
    for p in 0..planes {
        let base = p * ih * iw;
        for oy in 0..oh {
            for ox in 0..ow {
                let mut best = f64::NEG_INFINITY;
                let mut best_idx = 0;
                for ky in 0..kernel {
                    for kx in 0..kernel {
                        let idx = base + (oy * stride + ky) * iw + ox * stride + kx;
                        if input[idx] > best {
                            best = input[idx];
                            best_idx = idx;
                        }
                    }
                }
                let o = (p * oh + oy) * ow + ox;
                out[o] = best;
                argmax[o] = best_idx;
            }
        }
    }
}

pub(crate) fn maxpool_backward(d_out: &[f64], argmax: &[usize], d_input: &mut [f64]) {
    d_input.iter_mut().for_each(|v| *v = 0.0);
    for (d, &i) in d_out.iter().zip(argmax) {
        d_input[i] += d;
    }
}

pub(crate) fn gap_forward(input: &[f64], planes: usize, area: usize, out: &mut [f64]) {
    for p in 0..planes {
        out[p] = input[p * area..(p + 1) * area].iter().sum::<f64>() / area as f64;
    }
}

pub(crate) fn gap_backward(d_out: &[f64], area: usize, d_input: &mut [f64]) {
    for (p, d) in d_out.iter().enumerate() {
        let v = d / area as f64;
        d_input[p * area..(p + 1) * area].iter_mut().for_each(|x| *x = v);
    }
}

pub(crate) fn dense_forward(
    input: &[f64],
    batch: usize,
    inputs: usize,
    outputs: usize,
    weight: &[f64],
    bias: &[f64],
    out: &mut [f64],
) {
    for b in 0..batch {
        let x = &input[b * inputs..(b + 1) * inputs];
        for o in 0..outputs {
            let w = &weight[o * inputs..(o + 1) * inputs];
            out[b * outputs + o] = bias[o] + w.iter().zip(x).map(|(a, c)| a * c).sum::<f64>();
        }
    }
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn dense_backward(
    input: &[f64],
    batch: usize,
    inputs: usize,
    outputs: usize,
    weight: &[f64],
    d_out: &[f64],
    d_weight: &mut [f64],
    d_bias: &mut [f64],
    d_input: &mut [f64],
) {
    d_input.iter_mut().for_each(|v| *v = 0.0);
    for b in 0..batch {
        let x = &input[b * inputs..(b + 1) * inputs];
        let dx = &mut d_input[b * inputs..(b + 1) * inputs];
        for o in 0..outputs {
            let d = d_out[b * outputs + o];
            d_bias[o] += d;
            let w = &weight[o * inputs..(o + 1) * inputs];
            let dw = &mut d_weight[o * inputs..(o + 1) * inputs];
            for i in 0..inputs {
                dw[i] += d * x[i];
                dx[i] += d * w[i];
            }
        }
    }
}
