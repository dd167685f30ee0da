//! Top-|GT| mean IoU.
//!
//! Per image, every (ground truth, prediction) pair is scored, the IoU
//! list is sorted in descending order and only the best `|GT|` entries are
//! kept (zero-padded when there are fewer). A prediction may count toward
//! several ground-truth boxes.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{bail_validation, Result};
use crate::localization::BBox;

/// Box lists keyed by image id, iterated in sorted id order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BoxSet {
    images: BTreeMap<String, Vec<BBox>>,
}

pub type AnnotationSet = BoxSet;
pub type PredictionSet = BoxSet;

impl BoxSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, id: impl Into<String>, boxes: Vec<BBox>) -> Result<()> {
        let id = id.into();
        for b in &boxes {
            b.validate()?;
        }
        if self.images.contains_key(&id) {
            bail_validation!("duplicate image id {id:?}");
        }
        self.images.insert(id, boxes);
        Ok(())
    }

    pub fn get(&self, id: &str) -> Option<&[BBox]> {
        self.images.get(id).map(Vec::as_slice)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[BBox])> {
        self.images.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    /// Only the images with at least one box.
    pub fn positives(&self) -> Self {
        Self { images: self.images.iter().filter(|(_, b)| !b.is_empty()).map(|(k, v)| (k.clone(), v.clone())).collect() }
    }
}

pub fn iou(a: &BBox, b: &BBox) -> f64 {
    let inter = a.intersection_area(b);
    let union = a.area() + b.area() - inter;
    if union == 0 {
        return 0.0;
    }
    inter as f64 / union as f64
}

/// IoU of every (gt, pred) pair, gt-major.
pub fn iou_list(gt: &[BBox], pred: &[BBox]) -> Vec<f64> {
    gt.iter().flat_map(|g| pred.iter().map(move |p| iou(p, g))).collect()
}

fn kept_entries(gt: &[BBox], pred: &[BBox]) -> Result<Vec<f64>> {
    if gt.is_empty() {
        bail_validation!("image has no ground-truth boxes");
    }
    let mut list = iou_list(gt, pred);
    list.sort_by(|a, b| b.total_cmp(a));
    list.resize(gt.len(), 0.0);
    Ok(list)
}

pub fn miou_image(gt: &[BBox], pred: &[BBox]) -> Result<f64> {
    let kept = kept_entries(gt, pred)?;
    Ok(kept.iter().sum::<f64>() / gt.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum MiouAggregation {
    /// Mean of kept entries per image, then unweighted mean over images.
    #[default]
    PerImage,
    /// Mean over all kept entries of all images.
    Pooled,
}

pub fn miou_dataset(ann: &AnnotationSet, pred: &PredictionSet) -> Result<f64> {
    miou_dataset_with(ann, pred, MiouAggregation::PerImage)
}

/// Dataset mIOU; images missing from `pred` score against an empty list.
pub fn miou_dataset_with(ann: &AnnotationSet, pred: &PredictionSet, agg: MiouAggregation) -> Result<f64> {
    if ann.is_empty() {
        bail_validation!("annotation set is empty");
    }
    let mut total = 0.0;
    let mut count = 0usize;
    for (id, gt) in ann.iter() {
        let p = pred.get(id).unwrap_or(&[]);
        match agg {
            MiouAggregation::PerImage => {
                total += miou_image(gt, p).map_err(|_| {
                    crate::Error::Validation(alloc::format!("image {id:?} has no ground-truth boxes"))
                })?;
                count += 1;
            }
            MiouAggregation::Pooled => {
                let kept = kept_entries(gt, p)?;
                count += kept.len();
                total += kept.iter().sum::<f64>();
            }
        }
    }
    Ok(total / count as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    fn b(x0: usize, y0: usize, x1: usize, y1: usize) -> BBox {
        BBox::new(x0, y0, x1, y1).unwrap()
    }

    #[test]
    fn iou_examples() {
        let a = b(0, 0, 10, 10);
        assert_eq!(iou(&a, &a), 1.0);
        assert_eq!(iou(&a, &b(10, 0, 20, 10)), 0.0);
        assert_eq!(iou(&a, &b(5, 5, 15, 15)), 25.0 / 175.0);
    }

    #[test]
    fn iou_list_is_full_cross_product() {
        let gt = [b(0, 0, 4, 4), b(2, 2, 6, 6)];
        let pred = [b(0, 0, 4, 4), b(1, 1, 3, 3), b(5, 5, 9, 9)];
        let l = iou_list(&gt, &pred);
        assert_eq!(l.len(), 6);
        assert_eq!(l[0], 1.0);
        assert_eq!(l[3], iou(&gt[1], &pred[0]));
        assert!(iou_list(&gt, &[]).is_empty());
    }

    #[test]
    fn miou_image_keeps_top_gt_count() {
        // one gt: IoUs {0.4, 0.1} → 0.4
        let gt = [b(0, 0, 10, 4)];
        let p1 = b(0, 0, 4, 4); // 16/40
        let p2 = b(0, 0, 1, 4); // 4/40
        assert_eq!(miou_image(&gt, &[p2, p1]).unwrap(), 16.0 / 40.0);
        // two gt, one pred with IoUs {0.5, 0.2}: both survive the top-2 cut
        let gt2 = [b(0, 0, 2, 1), b(0, 0, 5, 1)];
        let p = b(0, 0, 1, 1);
        assert_eq!(miou_image(&gt2, &[p]).unwrap(), (0.5 + 0.2) / 2.0);
        assert_eq!(miou_image(&gt2, &[]).unwrap(), 0.0);
        assert!(miou_image(&[], &[p]).is_err());
    }

    #[test]
    fn dataset_mean_over_images() {
        let mut ann = AnnotationSet::new();
        ann.insert("a", vec![b(0, 0, 2, 2)]).unwrap();
        ann.insert("b", vec![b(4, 4, 6, 6)]).unwrap();
        let mut pred = PredictionSet::new();
        pred.insert("a", vec![b(0, 0, 2, 2)]).unwrap();
        assert_eq!(miou_dataset(&ann, &pred).unwrap(), 0.5);
        assert!(miou_dataset(&AnnotationSet::new(), &pred).is_err());
        assert!(ann.insert("a", vec![]).is_err());

        let mut single = AnnotationSet::new();
        single.insert("x", vec![b(0, 0, 3, 3), b(1, 1, 5, 5)]).unwrap();
        let mut sp = PredictionSet::new();
        sp.insert("x", vec![b(0, 0, 2, 3)]).unwrap();
        assert_eq!(
            miou_dataset(&single, &sp).unwrap(),
            miou_image(single.get("x").unwrap(), sp.get("x").unwrap()).unwrap()
        );
    }

    #[test]
    fn pooled_weights_by_gt_count() {
        let mut ann = AnnotationSet::new();
        ann.insert("a", vec![b(0, 0, 2, 2)]).unwrap();
        ann.insert("b", vec![b(0, 0, 2, 2), b(5, 5, 7, 7), b(9, 9, 11, 11)]).unwrap();
        let mut pred = PredictionSet::new();
        pred.insert("a", vec![b(0, 0, 2, 2)]).unwrap();
        assert_eq!(miou_dataset_with(&ann, &pred, MiouAggregation::Pooled).unwrap(), 0.25);
        assert_eq!(miou_dataset(&ann, &pred).unwrap(), 0.5);
    }

    fn arb_box() -> impl Strategy<Value = BBox> {
        (0usize..20, 0usize..20, 1usize..10, 1usize..10).prop_map(|(x, y, w, h)| b(x, y, x + w, y + h))
    }

    proptest! {
        #[test]
        fn iou_symmetric_and_bounded(a in arb_box(), c in arb_box()) {
            let v = iou(&a, &c);
            prop_assert_eq!(v, iou(&c, &a));
            prop_assert!((0.0..=1.0).contains(&v));
            prop_assert_eq!(iou(&a, &a), 1.0);
        }

        #[test]
        fn miou_image_permutation_invariant(gt in proptest::collection::vec(arb_box(), 1..4),
                                            mut pred in proptest::collection::vec(arb_box(), 0..5)) {
            let v = miou_image(&gt, &pred).unwrap();
            pred.reverse();
            prop_assert_eq!(v, miou_image(&gt, &pred).unwrap());
            prop_assert!((0.0..=1.0).contains(&v));
        }

        #[test]
        fn perfect_predictions_score_one(gt in proptest::collection::vec(arb_box(), 1..4)) {
            let mut ann = AnnotationSet::new();
            ann.insert("img", gt.clone()).unwrap();
            let mut pred = PredictionSet::new();
            pred.insert("img", gt).unwrap();
            prop_assert_eq!(miou_dataset(&ann, &pred).unwrap(), 1.0);
        }
    }
}
