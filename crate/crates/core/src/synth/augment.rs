use alloc::vec;

use rand::Rng;

use crate::math;
use crate::tensor::Tensor;

pub const BRIGHTNESS_STEP: f64 = 0.1;
pub const MAX_SHIFT: i32 = 2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AugmentOp {
    Identity,
    HorizontalFlip,
    /// Multiply by `scale`, then clamp to `[0, 1]`.
    Brightness { scale: f64 },
    /// Shift content by `(dy, dx)`; vacated pixels become zero.
    Translate { dy: i32, dx: i32 },
}

/// The op drawn for one image in one epoch.
pub fn augment_op(id: &str, epoch: u64, seed: u64) -> AugmentOp {
    let mut rng = math::rng(math::substream(math::substream(seed, "augment", epoch), id, 0));
    match rng.gen_range(0..4) {
        0 => AugmentOp::Identity,
        1 => AugmentOp::HorizontalFlip,
        2 => {
            let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            AugmentOp::Brightness { scale: 1.0 + sign * BRIGHTNESS_STEP }
        }
        _ => AugmentOp::Translate {
            dy: rng.gen_range(-MAX_SHIFT..=MAX_SHIFT),
            dx: rng.gen_range(-MAX_SHIFT..=MAX_SHIFT),
        },
    }
}

/// Applies `op` to every channel of a `C×H×W` image.
pub fn apply_op(image: &Tensor, op: AugmentOp) -> Tensor {
    let (h, w) = match *image.shape() {
        [_, h, w] => (h, w),
        _ => panic!("apply_op expects a C×H×W image"),
    };
    let src = image.data();
    match op {
        AugmentOp::Identity => image.clone(),
        AugmentOp::Brightness { scale } => image.map(|v| (v * scale).clamp(0.0, 1.0)),
        AugmentOp::HorizontalFlip => {
            let mut out = image.clone();
            for (dst, row) in out.data_mut().chunks_exact_mut(w).zip(src.chunks_exact(w)) {
                for (d, s) in dst.iter_mut().zip(row.iter().rev()) {
                    *d = *s;
                }
            }
            out
        }
        AugmentOp::Translate { dy, dx } => {
            let mut data = vec![0.0; src.len()];
            for (plane_out, plane_in) in data.chunks_exact_mut(h * w).zip(src.chunks_exact(h * w)) {
                for y in 0..h as i64 {
                    let sy = y - dy as i64;
                    if sy < 0 || sy >= h as i64 {
                        continue;
                    }
                    for x in 0..w as i64 {
                        let sx = x - dx as i64;
                        if sx >= 0 && sx < w as i64 {
                            plane_out[(y * w as i64 + x) as usize] = plane_in[(sy * w as i64 + sx) as usize];
                        }
                    }
                }
            }
            Tensor::new(image.shape().to_vec(), data).expect("same shape")
        }
    }
}

/// Seeded augmentation, deterministic per `(id, epoch, seed)`.
pub fn augment(image: &Tensor, id: &str, epoch: u64, seed: u64) -> Tensor {
    apply_op(image, augment_op(id, epoch, seed))
}
