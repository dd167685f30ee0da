//! Dataset directories: `manifest.json`, `annotations.json` and one PGM
//! per image under `images/`.

use std::collections::BTreeMap;
use std::path::Path;

use kdloc_core::metrics::Label;
use kdloc_core::synth::{Dataset, Sample, Split, SyntheticSpec};
use serde::{Deserialize, Serialize};

use crate::annotations::AnnotationFile;
use crate::error::{self, Error, Result};
use crate::formats::pgm;

pub const MANIFEST: &str = "manifest.json";
pub const ANNOTATIONS: &str = "annotations.json";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub id: String,
    pub split: Split,
    pub label: Label,
    /// Path relative to the dataset directory.
    pub image: String,
    #[serde(default)]
    pub has_token: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub format_version: u32,
    pub height: usize,
    pub width: usize,
    pub samples: Vec<ManifestEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synthetic: Option<SyntheticSpec>,
}

pub fn export_dataset(dataset: &Dataset, spec: Option<&SyntheticSpec>, dir: &Path) -> Result<Manifest> {
    let all: Vec<(Split, &Sample)> = dataset
        .train
        .iter()
        .map(|s| (Split::Train, s))
        .chain(dataset.test.iter().map(|s| (Split::Test, s)))
        .collect();
    let (height, width) = match all.first() {
        Some((_, s)) => (s.image.shape()[1], s.image.shape()[2]),
        None => return Err(Error::invalid("cannot export an empty dataset")),
    };
    let mut samples = Vec::with_capacity(all.len());
    for (split, s) in &all {
        let rel = format!("images/{}.pgm", s.id);
        pgm::save(&s.image, &dir.join(&rel))?;
        samples.push(ManifestEntry {
            id: s.id.clone(),
            split: *split,
            label: s.label,
            image: rel,
            has_token: s.has_token,
        });
    }
    AnnotationFile::from_samples(all.iter().map(|(_, s)| *s)).save(&dir.join(ANNOTATIONS))?;
    let manifest = Manifest { format_version: FORMAT_VERSION, height, width, samples, synthetic: spec.copied() };
    error::write_json(&dir.join(MANIFEST), &manifest)?;
    Ok(manifest)
}

pub fn import_dataset(dir: &Path) -> Result<Dataset> {
    let manifest_path = dir.join(MANIFEST);
    let manifest: Manifest = error::read_json(&manifest_path)?;
    if manifest.format_version != FORMAT_VERSION {
        return Err(Error::format(&manifest_path, format!("unsupported format version {}", manifest.format_version)));
    }
    let ann_path = dir.join(ANNOTATIONS);
    let ann = AnnotationFile::load(&ann_path)?;
    let mut by_id: BTreeMap<&str, _> = ann.images.iter().map(|a| (a.id.as_str(), a)).collect();
    let mut dataset = Dataset { train: Vec::new(), test: Vec::new() };
    for entry in &manifest.samples {
        let a = by_id
            .remove(entry.id.as_str())
            .ok_or_else(|| Error::format(&ann_path, format!("no annotation for {:?}", entry.id)))?;
        if a.label != entry.label {
            return Err(Error::format(&ann_path, format!("label of {:?} disagrees with the manifest", entry.id)));
        }
        let image_path = dir.join(&entry.image);
        let image = pgm::load(&image_path)?;
        if image.shape() != [1, manifest.height, manifest.width] {
            return Err(Error::format(&image_path, "image size disagrees with the manifest"));
        }
        if let Some(b) = a.boxes.iter().find(|b| !b.fits(manifest.width, manifest.height)) {
            return Err(Error::format(&ann_path, format!("box {b:?} of {:?} leaves the image", entry.id)));
        }
        let sample = Sample {
            id: entry.id.clone(),
            image,
            label: entry.label,
            gt_boxes: a.boxes.clone(),
            has_token: entry.has_token,
        };
        match entry.split {
            Split::Train => dataset.train.push(sample),
            Split::Test => dataset.test.push(sample),
        }
    }
    if let Some(id) = by_id.keys().next() {
        return Err(Error::format(&ann_path, format!("annotation for {id:?} has no manifest entry")));
    }
    Ok(dataset)
}

#[cfg(test)]
mod tests {
    use super::*;
    use kdloc_core::synth::generate_dataset;

    #[test]
    fn export_then_import_preserves_everything_but_quantization() {
        let spec = SyntheticSpec { train_samples: 6, test_samples: 4, ..SyntheticSpec::default() };
        let d = generate_dataset(&spec).unwrap();
        let dir = tempfile::tempdir().unwrap();
        export_dataset(&d, Some(&spec), dir.path()).unwrap();
        let back = import_dataset(dir.path()).unwrap();
        assert_eq!(back.train.len(), 6);
        assert_eq!(back.test.len(), 4);
        for (a, b) in d.train.iter().chain(&d.test).zip(back.train.iter().chain(&back.test)) {
            assert_eq!((&a.id, a.label, &a.gt_boxes, a.has_token), (&b.id, b.label, &b.gt_boxes, b.has_token));
            for (x, y) in a.image.data().iter().zip(b.image.data()) {
                assert!((x - y).abs() <= 0.5 / 255.0 + 1e-12);
            }
        }
        // re-exporting the imported copy reproduces the same files
        let again = tempfile::tempdir().unwrap();
        export_dataset(&back, Some(&spec), again.path()).unwrap();
        for f in [MANIFEST, ANNOTATIONS, "images/train-0003.pgm"] {
            assert_eq!(std::fs::read(dir.path().join(f)).unwrap(), std::fs::read(again.path().join(f)).unwrap());
        }
    }

    #[test]
    fn missing_manifest_is_an_io_error() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(import_dataset(dir.path()), Err(Error::Io { .. })));
    }
}
