//! The shared annotations document:
//! `{"images":[{"id":"…","label":"tb|non_tb","boxes":[{"x_min":…,…}]}]}`.
//! Boxes use pixel units with exclusive maxima.

use std::path::Path;

use kdloc_core::localization::BBox;
use kdloc_core::metrics::{BoxSet, Label};
use kdloc_core::synth::Sample;
use serde::{Deserialize, Serialize};

use crate::error::{self, Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImageAnnotation {
    pub id: String,
    pub label: Label,
    pub boxes: Vec<BBox>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnnotationFile {
    pub images: Vec<ImageAnnotation>,
}

impl AnnotationFile {
    pub fn from_samples<'a>(samples: impl IntoIterator<Item = &'a Sample>) -> Self {
        let images = samples
            .into_iter()
            .map(|s| ImageAnnotation { id: s.id.clone(), label: s.label, boxes: s.gt_boxes.clone() })
            .collect();
        Self { images }
    }

    /// Boxes keyed by id; rejects duplicate ids, degenerate boxes and boxes
    /// on negative images.
    pub fn box_set(&self) -> kdloc_core::Result<BoxSet> {
        let mut set = BoxSet::new();
        for img in &self.images {
            if img.label == Label::NonTb && !img.boxes.is_empty() {
                return Err(kdloc_core::Error::Validation(format!("non_tb image {:?} has boxes", img.id)));
            }
            set.insert(img.id.clone(), img.boxes.clone())?;
        }
        Ok(set)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file: Self = error::read_json(path)?;
        file.box_set().map_err(|e| Error::format(path, e))?;
        Ok(file)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        error::write_json(path, self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schema_matches_the_documented_shape() {
        let f = AnnotationFile {
            images: vec![
                ImageAnnotation { id: "a".into(), label: Label::Tb, boxes: vec![BBox::new(1, 2, 5, 6).unwrap()] },
                ImageAnnotation { id: "b".into(), label: Label::NonTb, boxes: vec![] },
            ],
        };
        let json = serde_json::to_string(&f).unwrap();
        assert_eq!(
            json,
            r#"{"images":[{"id":"a","label":"tb","boxes":[{"x_min":1,"y_min":2,"x_max":5,"y_max":6}]},{"id":"b","label":"non_tb","boxes":[]}]}"#
        );
        assert_eq!(serde_json::from_str::<AnnotationFile>(&json).unwrap(), f);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_boxes() {
        assert!(serde_json::from_str::<AnnotationFile>(r#"{"images":[],"extra":1}"#).is_err());
        let dup: AnnotationFile =
            serde_json::from_str(r#"{"images":[{"id":"a","label":"tb","boxes":[]},{"id":"a","label":"tb","boxes":[]}]}"#)
                .unwrap();
        assert!(dup.box_set().is_err());
        let neg: AnnotationFile = serde_json::from_str(
            r#"{"images":[{"id":"a","label":"non_tb","boxes":[{"x_min":0,"y_min":0,"x_max":1,"y_max":1}]}]}"#,
        )
        .unwrap();
        assert!(neg.box_set().is_err());
        let flat: AnnotationFile = serde_json::from_str(
            r#"{"images":[{"id":"a","label":"tb","boxes":[{"x_min":3,"y_min":0,"x_max":3,"y_max":1}]}]}"#,
        )
        .unwrap();
        assert!(flat.box_set().is_err());
    }
}
