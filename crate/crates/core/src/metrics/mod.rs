//! Localization and classification metrics.

mod classification;
mod miou;

pub use classification::{
    auc, classification_report, confusion, ClassificationReport, ConfusionCounts, Label, ScoredLabel,
    DEFAULT_DECISION_THRESHOLD,
};
pub use miou::{
    iou, iou_list, miou_dataset, miou_dataset_with, miou_image, AnnotationSet, BoxSet, MiouAggregation,
    PredictionSet,
};
