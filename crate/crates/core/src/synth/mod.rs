//! Synthetic shortcut benchmark.
//!
//! Positive images carry one or more bright blobs (the lesion, with a
//! ground-truth box) and, with probability `p` per split, a bright corner
//! token. Negatives are background and noise only. A model that keys on
//! the token scores well on the train split but localizes the wrong thing.

mod augment;
mod generate;
mod preprocess;

pub use augment::{apply_op, augment, augment_op, AugmentOp, BRIGHTNESS_STEP, MAX_SHIFT};
pub use generate::{generate_dataset, normalization_stats, Dataset, Sample, Split};
pub use preprocess::{center_crop_offset, preprocess, resize_bilinear, Preprocess};

use crate::error::{bail_validation, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Corner {
    TopLeft,
    TopRight,
    BottomLeft,
    BottomRight,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct BlobSpec {
    /// Peak added intensity, drawn uniformly from `[min, max]`.
    pub intensity: (f64, f64),
    /// Disc radius in pixels, inclusive range.
    pub radius: (usize, usize),
    /// Blobs per positive image, inclusive range.
    pub count: (usize, usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct TokenSpec {
    pub height: usize,
    pub width: usize,
    pub corner: Corner,
    /// Gap between the token and the image border.
    pub offset: usize,
    pub intensity: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields, default))]
pub struct SyntheticSpec {
    pub height: usize,
    pub width: usize,
    pub background: f64,
    pub blob: BlobSpec,
    pub token: TokenSpec,
    pub p_train: f64,
    pub p_test: f64,
    /// Probability that a sample is positive.
    pub positive_fraction: f64,
    pub train_samples: usize,
    pub test_samples: usize,
    /// Standard deviation of additive Gaussian noise.
    pub noise: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            height: 32,
            width: 32,
            background: 0.2,
            blob: BlobSpec { intensity: (0.5, 0.9), radius: (2, 4), count: (1, 2) },
            token: TokenSpec { height: 4, width: 4, corner: Corner::TopLeft, offset: 1, intensity: 1.0 },
            p_train: 0.95,
            p_test: 0.5,
            positive_fraction: 0.5,
            train_samples: 400,
            test_samples: 200,
            noise: 0.05,
            seed: 42,
        }
    }
}

/// Inclusive pixel rectangle `(y0, x0, y1, x1)` with `y0..=y1`, `x0..=x1`.
pub(crate) type Region = (usize, usize, usize, usize);

impl SyntheticSpec {
    /// Border band reserved for the token; blobs spawn strictly inside it.
    fn margin(&self) -> usize {
        self.token.offset + self.token.height.max(self.token.width)
    }

    /// Admissible blob centres for radius `r`.
    pub(crate) fn centre_region(&self, r: usize) -> Option<Region> {
        let m = self.margin();
        let lo = m + r;
        let (y_hi, x_hi) = (self.height.checked_sub(m + r + 1)?, self.width.checked_sub(m + r + 1)?);
        (lo <= y_hi && lo <= x_hi).then_some((lo, lo, y_hi, x_hi))
    }

    pub(crate) fn token_region(&self) -> Region {
        let t = &self.token;
        let y0 = match t.corner {
            Corner::TopLeft | Corner::TopRight => t.offset,
            _ => self.height - t.offset - t.height,
        };
        let x0 = match t.corner {
            Corner::TopLeft | Corner::BottomLeft => t.offset,
            _ => self.width - t.offset - t.width,
        };
        (y0, x0, y0 + t.height - 1, x0 + t.width - 1)
    }

    pub fn validate(&self) -> Result<()> {
        if self.height == 0 || self.width == 0 {
            bail_validation!("image size must be positive");
        }
        for (name, p) in [
            ("p_train", self.p_train),
            ("p_test", self.p_test),
            ("positive_fraction", self.positive_fraction),
        ] {
            if !(0.0..=1.0).contains(&p) {
                bail_validation!("{name} must lie in [0, 1], got {p}");
            }
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            bail_validation!("noise level must be finite and non-negative");
        }
        if !(0.0..=1.0).contains(&self.background) {
            bail_validation!("background must lie in [0, 1]");
        }
        let b = &self.blob;
        if !(b.intensity.0 > 0.0 && b.intensity.0 <= b.intensity.1 && b.intensity.1.is_finite()) {
            bail_validation!("blob intensity range must be positive and ordered");
        }
        if b.radius.0 == 0 || b.radius.0 > b.radius.1 {
            bail_validation!("blob radius range must be positive and ordered");
        }
        if b.count.0 == 0 || b.count.0 > b.count.1 {
            bail_validation!("blob count range must be positive and ordered");
        }
        let t = &self.token;
        if t.height == 0 || t.width == 0 {
            bail_validation!("token size must be positive");
        }
        if t.offset + t.height > self.height || t.offset + t.width > self.width {
            bail_validation!("token does not fit in a {}x{} image", self.height, self.width);
        }
        if !(0.0..=1.0).contains(&t.intensity) {
            bail_validation!("token intensity must lie in [0, 1]");
        }
        if self.centre_region(b.radius.1).is_none() {
            bail_validation!(
                "a blob of radius {} cannot fit in a {}x{} image outside the token band",
                b.radius.1,
                self.height,
                self.width
            );
        }
        Ok(())
    }
}
