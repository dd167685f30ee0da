use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use super::SyntheticSpec;
use crate::error::{Error, Result};
use crate::localization::BBox;
use crate::math::{self, Rng64};
use crate::metrics::{AnnotationSet, Label};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub id: String,
    /// `1×H×W`, values in `[0, 1]`.
    pub image: Tensor,
    pub label: Label,
    /// One tight box per painted blob; empty for negatives.
    pub gt_boxes: Vec<BBox>,
    pub has_token: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub train: Vec<Sample>,
    pub test: Vec<Sample>,
}

impl Dataset {
    pub fn split(&self, split: Split) -> &[Sample] {
        match split {
            Split::Train => &self.train,
            Split::Test => &self.test,
        }
    }

    pub fn annotations(&self, split: Split) -> Result<AnnotationSet> {
        let mut set = AnnotationSet::default();
        for s in self.split(split) {
            set.insert(s.id.clone(), s.gt_boxes.clone())?;
        }
        Ok(set)
    }
}

/// Deterministic in `spec.seed`; each sample draws from its own substream.
pub fn generate_dataset(spec: &SyntheticSpec) -> Result<Dataset> {
    spec.validate()?;
    let make = |split: Split, count: usize, p: f64| -> Result<Vec<Sample>> {
        (0..count).map(|i| generate_sample(spec, split, i, p)).collect()
    };
    Ok(Dataset {
        train: make(Split::Train, spec.train_samples, spec.p_train)?,
        test: make(Split::Test, spec.test_samples, spec.p_test)?,
    })
}

fn generate_sample(spec: &SyntheticSpec, split: Split, index: usize, p_token: f64) -> Result<Sample> {
    let id = format!("{}-{index:04}", split.name());
    let mut rng = math::rng(math::substream(spec.seed, split.name(), index as u64));
    let (h, w) = (spec.height, spec.width);
    let positive = rng.gen_bool(spec.positive_fraction);
    let mut pixels = vec![spec.background; h * w];
    let mut gt_boxes = Vec::new();
    if positive {
        let count = rng.gen_range(spec.blob.count.0..=spec.blob.count.1);
        for _ in 0..count {
            let (layer, expected) = paint_blob(spec, &mut rng);
            let found = painted_extent(&layer, h, w)
                .ok_or_else(|| Error::State(format!("{id}: blob painted no pixels")))?;
            if found != expected {
                return Err(Error::State(format!("{id}: painted extent {found:?} differs from {expected:?}")));
            }
            for (p, v) in pixels.iter_mut().zip(&layer) {
                *p += v;
            }
            gt_boxes.push(found);
        }
    }
    let has_token = positive && rng.gen_bool(p_token);
    if has_token {
        let (y0, x0, y1, x1) = spec.token_region();
        for y in y0..=y1 {
            for x in x0..=x1 {
                pixels[y * w + x] = spec.token.intensity;
            }
        }
    }
    for p in pixels.iter_mut() {
        *p = (*p + spec.noise * math::normal(&mut rng)).clamp(0.0, 1.0);
    }
    Ok(Sample {
        id,
        image: Tensor::new(vec![1, h, w], pixels)?,
        label: if positive { Label::Tb } else { Label::NonTb },
        gt_boxes,
        has_token,
    })
}

/// Paints one disc-shaped bump on an otherwise zero layer. Returns the
/// layer and the box implied by the geometry.
fn paint_blob(spec: &SyntheticSpec, rng: &mut Rng64) -> (Vec<f64>, BBox) {
    let (h, w) = (spec.height, spec.width);
    let r = rng.gen_range(spec.blob.radius.0..=spec.blob.radius.1);
    let (ylo, xlo, yhi, xhi) = spec.centre_region(r).expect("validated geometry");
    let cy = rng.gen_range(ylo..=yhi);
    let cx = rng.gen_range(xlo..=xhi);
    let peak = rng.gen_range(spec.blob.intensity.0..=spec.blob.intensity.1);
    let mut layer = vec![0.0; h * w];
    let r2 = (r * r) as f64;
    for y in cy - r..=cy + r {
        for x in cx - r..=cx + r {
            let dy = y as f64 - cy as f64;
            let dx = x as f64 - cx as f64;
            let d2 = dy * dy + dx * dx;
            if d2 <= r2 {
                layer[y * w + x] = peak * (1.0 - 0.5 * d2 / r2);
            }
        }
    }
    (layer, BBox { x_min: cx - r, y_min: cy - r, x_max: cx + r + 1, y_max: cy + r + 1 })
}

/// Tight extent of the non-zero pixels of a painted layer.
fn painted_extent(layer: &[f64], h: usize, w: usize) -> Option<BBox> {
    let mut b: Option<BBox> = None;
    for y in 0..h {
        for x in 0..w {
            if layer[y * w + x] > 0.0 {
                let e = b.get_or_insert(BBox { x_min: x, y_min: y, x_max: x + 1, y_max: y + 1 });
                e.x_min = e.x_min.min(x);
                e.y_min = e.y_min.min(y);
                e.x_max = e.x_max.max(x + 1);
                e.y_max = e.y_max.max(y + 1);
            }
        }
    }
    b
}

/// Population mean and standard deviation over every pixel of `samples`.
pub fn normalization_stats(samples: &[Sample]) -> (f64, f64) {
    let all: Vec<f64> = samples.iter().flat_map(|s| s.image.data().iter().copied()).collect();
    math::mean_std(&all)
}
