use alloc::vec::Vec;

use crate::error::{bail_validation, Error, Result};

/// Saliency grid with values in `[0, 1]`, row-major.
///
/// Maps built with [`Heatmap::normalize`] are min-max normalized: a
/// non-constant map has minimum 0 and maximum 1, a constant map is all
/// zeros.
#[derive(Debug, Clone, PartialEq)]
pub struct Heatmap {
    height: usize,
    width: usize,
    values: Vec<f64>,
}

impl Heatmap {
    /// Wraps values already inside `[0, 1]`.
    pub fn from_values(height: usize, width: usize, values: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 || values.len() != height * width {
            bail_validation!("heatmap {height}x{width} cannot hold {} values", values.len());
        }
        if values.iter().any(|v| !(0.0..=1.0).contains(v)) {
            bail_validation!("heatmap values must lie in [0, 1]");
        }
        Ok(Self { height, width, values })
    }

    /// Min-max normalizes a raw saliency map.
    pub fn normalize(height: usize, width: usize, raw: Vec<f64>) -> Result<Self> {
        if raw.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("raw saliency map has non-finite values".into()));
        }
        if height == 0 || width == 0 || raw.len() != height * width {
            bail_validation!("heatmap {height}x{width} cannot hold {} values", raw.len());
        }
        let min = raw.iter().copied().fold(f64::INFINITY, f64::min);
        let max = raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let span = max - min;
        let values = if span > 0.0 {
            raw.iter().map(|v| ((v - min) / span).clamp(0.0, 1.0)).collect()
        } else {
            alloc::vec![0.0; raw.len()]
        };
        Ok(Self { height, width, values })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, y: usize, x: usize) -> f64 {
        self.values[y * self.width + x]
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    height: usize,
    width: usize,
    bits: Vec<bool>,
}

impl BinaryMask {
    pub fn new(height: usize, width: usize, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != height * width {
            bail_validation!("mask {height}x{width} cannot hold {} bits", bits.len());
        }
        Ok(Self { height, width, bits })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn get(&self, y: usize, x: usize) -> bool {
        self.bits[y * self.width + x]
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }
}

/// Sets a bit wherever the heatmap value is strictly greater than `tau`.
pub fn threshold_mask(h: &Heatmap, tau: f64) -> Result<BinaryMask> {
    if !(0.0..=1.0).contains(&tau) {
        bail_validation!("threshold must lie in [0, 1], got {tau}");
    }
    BinaryMask::new(h.height, h.width, h.values.iter().map(|&v| v > tau).collect())
}

/// Bilinear resize on a corner-aligned grid: output corners sample input
/// corners exactly.
pub fn upsample_bilinear_aligned(
    src: &[f64],
    (src_h, src_w): (usize, usize),
    (dst_h, dst_w): (usize, usize),
) -> Vec<f64> {
    debug_assert_eq!(src.len(), src_h * src_w);
    let coord = |i: usize, src_len: usize, dst_len: usize| -> (usize, usize, f64) {
        if dst_len <= 1 || src_len <= 1 {
            return (0, 0, 0.0);
        }
        let pos = i as f64 * (src_len - 1) as f64 / (dst_len - 1) as f64;
        let lo = (pos as usize).min(src_len - 1);
        let hi = (lo + 1).min(src_len - 1);
        (lo, hi, pos - lo as f64)
    };
    let mut out = Vec::with_capacity(dst_h * dst_w);
    for y in 0..dst_h {
        let (y0, y1, fy) = coord(y, src_h, dst_h);
        for x in 0..dst_w {
            let (x0, x1, fx) = coord(x, src_w, dst_w);
            let top = src[y0 * src_w + x0] * (1.0 - fx) + src[y0 * src_w + x1] * fx;
            let bottom = src[y1 * src_w + x0] * (1.0 - fx) + src[y1 * src_w + x1] * fx;
            out.push(top * (1.0 - fy) + bottom * fy);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    #[test]
    fn threshold_is_strict() {
        let h = Heatmap::from_values(1, 4, vec![0.3, 0.7, 0.7, 0.3]).unwrap();
        assert_eq!(threshold_mask(&h, 0.5).unwrap().bits(), &[false, true, true, false]);
        let n = Heatmap::normalize(1, 3, vec![2.0, 5.0, 3.0]).unwrap();
        assert_eq!(threshold_mask(&n, 1.0).unwrap().count(), 0);
        assert!(threshold_mask(&n, 1.5).is_err());
        assert!(threshold_mask(&n, -0.1).is_err());
    }

    #[test]
    fn tau_zero_selects_support() {
        let vals = vec![0.0, 0.2, 0.0, 1.0, 0.0, 0.5];
        let h = Heatmap::from_values(2, 3, vals.clone()).unwrap();
        let support: Vec<bool> = vals.iter().map(|&v| v > 0.0).collect();
        assert_eq!(threshold_mask(&h, 0.0).unwrap().bits(), support.as_slice());
    }

    #[test]
    fn constant_map_normalizes_to_zero() {
        let h = Heatmap::normalize(2, 2, vec![3.5; 4]).unwrap();
        assert!(h.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn upsample_hits_corners_and_midpoints() {
        let src = vec![0.0, 1.0, 2.0, 3.0];
        let up = upsample_bilinear_aligned(&src, (2, 2), (3, 3));
        assert_eq!(up, vec![0.0, 0.5, 1.0, 1.0, 1.5, 2.0, 2.0, 2.5, 3.0]);
        assert_eq!(upsample_bilinear_aligned(&src, (2, 2), (2, 2)), src);
    }

    proptest! {
        #[test]
        fn normalization_invariant(raw in proptest::collection::vec(-5.0f64..5.0, 20)) {
            let h = Heatmap::normalize(4, 5, raw).unwrap();
            let min = h.values().iter().copied().fold(f64::INFINITY, f64::min);
            let max = h.values().iter().copied().fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(min == 0.0);
            prop_assert!(max == 1.0 || max == 0.0);
        }

        #[test]
        fn raising_tau_never_adds_pixels(raw in proptest::collection::vec(0.0f64..1.0, 30),
                                         a in 0.0f64..1.0, b in 0.0f64..1.0) {
            let h = Heatmap::normalize(5, 6, raw).unwrap();
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            prop_assert!(threshold_mask(&h, hi).unwrap().count() <= threshold_mask(&h, lo).unwrap().count());
        }
    }
}
