//! Grad-CAM saliency and heatmap-to-box extraction.
//!
//! The box pipeline is: normalize the heatmap to `[0, 1]`, threshold it
//! strictly at `tau`, label 8-connected components, and keep the bounding
//! box of every component whose box area exceeds a minimum area.

mod bbox;
mod components;
mod gradcam;
mod heatmap;

pub use bbox::BBox;
pub use components::{connected_components, Component};
pub use gradcam::{gradcam, gradcam_detailed, ChannelWeights, GradCam};
pub use heatmap::{threshold_mask, upsample_bilinear_aligned, BinaryMask, Heatmap};

use alloc::vec::Vec;
#[allow(unused_imports)] // shadowed by inherent f64 methods whenever std is linked
use num_traits::Float;

use crate::error::{bail_validation, Result};
use crate::metrics::AnnotationSet;

pub const DEFAULT_TAU: f64 = 0.5;

/// Boxes of all connected components of `h > tau` whose bounding-box
/// area is strictly greater than `min_area`, in raster order of each
/// component's first pixel.
pub fn boxes_from_heatmap(h: &Heatmap, tau: f64, min_area: f64) -> Result<Vec<BBox>> {
    if !(min_area >= 0.0) {
        bail_validation!("min_area must be non-negative, got {min_area}");
    }
    let mask = threshold_mask(h, tau)?;
    Ok(connected_components(&mask)
        .into_iter()
        .map(|c| c.bbox)
        .filter(|b| b.area() as f64 > min_area)
        .collect())
}

/// Nearest-rank percentile of the ground-truth box areas.
pub fn min_area_from_annotations(ann: &AnnotationSet, percentile: f64) -> Result<f64> {
    if !(0.0..=100.0).contains(&percentile) {
        bail_validation!("percentile must lie in [0, 100], got {percentile}");
    }
    let mut areas: Vec<u64> = ann.iter().flat_map(|(_, boxes)| boxes.iter().map(BBox::area)).collect();
    if areas.is_empty() {
        bail_validation!("annotation set has no boxes");
    }
    areas.sort_unstable();
    let n = areas.len();
    let rank = ((percentile / 100.0 * n as f64).ceil() as usize).clamp(1, n);
    Ok(areas[rank - 1] as f64)
}
