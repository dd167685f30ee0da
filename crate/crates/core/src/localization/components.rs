use alloc::vec;
use alloc::vec::Vec;

use super::bbox::BBox;
use super::heatmap::BinaryMask;

/// One 8-connected region of set pixels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Component {
    /// Row-major flat indices, in discovery order.
    pub pixels: Vec<usize>,
    pub bbox: BBox,
}

impl Component {
    pub fn pixel_count(&self) -> usize {
        self.pixels.len()
    }
}

/// Labels 8-connected components by flood fill. Components are ordered by
/// the raster position of their first (top-left-most) pixel.
pub fn connected_components(mask: &BinaryMask) -> Vec<Component> {
    let (h, w) = (mask.height(), mask.width());
    let bits = mask.bits();
    let mut seen = vec![false; h * w];
    let mut out = Vec::new();
    let mut stack = Vec::new();
    for start in 0..h * w {
        if !bits[start] || seen[start] {
            continue;
        }
        seen[start] = true;
        stack.push(start);
        let mut pixels = Vec::new();
        let (mut x0, mut y0, mut x1, mut y1) = (usize::MAX, usize::MAX, 0, 0);
        while let Some(p) = stack.pop() {
            let (y, x) = (p / w, p % w);
            pixels.push(p);
            x0 = x0.min(x);
            y0 = y0.min(y);
            x1 = x1.max(x + 1);
            y1 = y1.max(y + 1);
            for ny in y.saturating_sub(1)..=(y + 1).min(h - 1) {
                for nx in x.saturating_sub(1)..=(x + 1).min(w - 1) {
                    let q = ny * w + nx;
                    if bits[q] && !seen[q] {
                        seen[q] = true;
                        stack.push(q);
                    }
                }
            }
        }
        out.push(Component { pixels, bbox: BBox { x_min: x0, y_min: y0, x_max: x1, y_max: y1 } });
    }
    out
}
