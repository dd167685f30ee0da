//! Training, evaluation, localization and Hessian runs over a loaded dataset.

use std::path::Path;
use std::time::Instant;

use kdloc_core::hessian::{
    dense_hessian, spectrum_report, symmetric_eigen, FiniteDifferenceHvp, LossKind, NetLoss, SpectrumConfig,
    DENSE_HESSIAN_LIMIT,
};
use kdloc_core::kd::{self, KdParams};
use kdloc_core::localization::{boxes_from_heatmap, gradcam, min_area_from_annotations, BBox, Heatmap};
use kdloc_core::metrics::{classification_report, miou_dataset_with, AnnotationSet, Label, PredictionSet, ScoredLabel};
use kdloc_core::net::NetworkState;
use kdloc_core::synth::{self, Dataset, Preprocess, Sample, Split};
use kdloc_core::train::{self, Objective, Schedule, TrainItem};
use kdloc_core::Tensor;
use serde::{Deserialize, Serialize};

use crate::annotations::{AnnotationFile, ImageAnnotation};
use crate::config::{DatasetSource, LocalizationConfig, MinArea, RunConfig};
use crate::dataset::import_dataset;
use crate::error::{self, Error, Result};
use crate::formats::checkpoint::Checkpoint;
use crate::formats::hmap;
use crate::record::{MetricsReport, RoleName, RunRecord};

/// Images per forward pass when scoring a split.
const EVAL_BATCH: usize = 64;

/// A validated config with its dataset loaded and normalization fixed.
#[derive(Debug, Clone)]
pub struct Workspace {
    pub config: RunConfig,
    pub dataset: Dataset,
    pub prep: Preprocess,
}

pub fn load_dataset(source: &DatasetSource) -> Result<Dataset> {
    match source {
        DatasetSource::Synthetic(spec) => Ok(synth::generate_dataset(spec)?),
        DatasetSource::Path(dir) => import_dataset(dir),
    }
}

impl Workspace {
    pub fn open(config: RunConfig) -> Result<Self> {
        config.validate()?;
        let dataset = load_dataset(&config.dataset)?;
        Self::with_dataset(config, dataset)
    }

    pub fn with_dataset(config: RunConfig, dataset: Dataset) -> Result<Self> {
        config.validate()?;
        if dataset.train.is_empty() {
            return Err(Error::invalid("dataset has no training images"));
        }
        let (mean, std) = synth::normalization_stats(&dataset.train);
        let std = if std > 0.0 { std } else { 1.0 };
        let p = config.preprocess;
        let prep = Preprocess { out_side: p.out_side, crop_side: p.crop_side, mean, std };
        Ok(Self { config, dataset, prep })
    }

    pub fn train_items(&self) -> Vec<TrainItem<'_>> {
        self.dataset
            .train
            .iter()
            .map(|s| TrainItem { id: &s.id, image: &s.image, label: s.label.index() })
            .collect()
    }

    /// Preprocessed images of `samples`, without augmentation.
    pub fn batch(&self, samples: &[Sample]) -> Result<Tensor> {
        let images = samples.iter().map(|s| self.prep.apply(&s.image)).collect::<kdloc_core::Result<Vec<_>>>()?;
        Ok(Tensor::stack(&images)?)
    }

    /// Test images with at least one ground-truth box.
    pub fn annotated_test_positives(&self) -> Vec<&Sample> {
        self.dataset.test.iter().filter(|s| s.label == Label::Tb && !s.gt_boxes.is_empty()).collect()
    }

    pub fn annotations(&self, split: Split) -> Result<AnnotationSet> {
        Ok(self.dataset.annotations(split)?)
    }
}

#[derive(Debug, Clone, Copy)]
pub enum Role<'a> {
    Teacher,
    Student { teacher: &'a NetworkState },
}

#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub net: NetworkState,
    pub schedule: Schedule,
    pub seconds: f64,
}

pub fn train_model(ws: &Workspace, role: Role<'_>) -> Result<TrainedModel> {
    let items = ws.train_items();
    let objective = match role {
        Role::Teacher => Objective::CrossEntropy,
        Role::Student { teacher } => {
            if teacher.spec().input != ws.config.network.input {
                return Err(Error::invalid("teacher input shape differs from the configured network"));
            }
            Objective::Distill { teacher, kd: ws.config.kd }
        }
    };
    let start = Instant::now();
    let out = train::train(ws.config.network.clone(), &items, &ws.prep, &ws.config.train_config(), objective)?;
    Ok(TrainedModel { net: out.net, schedule: out.schedule, seconds: start.elapsed().as_secs_f64() })
}

/// Trains, then writes `<name>.ckpt` and `<name>_run.json` into `dir`.
pub fn train_and_save(
    ws: &Workspace,
    role: Role<'_>,
    teacher_checkpoint: Option<&str>,
    dir: &Path,
    name: &str,
) -> Result<(NetworkState, RunRecord)> {
    let model = train_model(ws, role)?;
    let checkpoint = format!("{name}.ckpt");
    Checkpoint::from_net(&model.net).save(&dir.join(&checkpoint))?;
    let metrics = evaluate(&model.net, ws, ws.config.decision_threshold)?;
    let record = RunRecord {
        role: match role {
            Role::Teacher => RoleName::Teacher,
            Role::Student { .. } => RoleName::Student,
        },
        config: ws.config.snapshot(),
        teacher_checkpoint: teacher_checkpoint.map(str::to_owned),
        epoch_losses: model.schedule.losses.clone(),
        stop_epoch: model.schedule.stop_epoch,
        stop_reason: model.schedule.reason,
        checkpoint,
        metrics,
        wall_clock_seconds: ws.config.record_timing.then_some(model.seconds),
    };
    record.save(&dir.join(format!("{name}_run.json")))?;
    Ok((model.net, record))
}

pub fn load_network(path: &Path) -> Result<NetworkState> {
    Checkpoint::load(path)?.into_net()
}

/// TB probability of every test image.
pub fn score_test_split(net: &NetworkState, ws: &Workspace) -> Result<Vec<ScoredLabel>> {
    check_input(net, ws)?;
    let mut scored = Vec::with_capacity(ws.dataset.test.len());
    for chunk in ws.dataset.test.chunks(EVAL_BATCH) {
        let logits = net.predict(&ws.batch(chunk)?)?;
        for (i, s) in chunk.iter().enumerate() {
            let p = kd::softmax(logits.outer(i));
            scored.push(ScoredLabel { score: p[Label::Tb.index()], label: s.label });
        }
    }
    Ok(scored)
}

pub fn evaluate(net: &NetworkState, ws: &Workspace, threshold: f64) -> Result<MetricsReport> {
    if ws.dataset.test.is_empty() {
        return Err(Error::invalid("dataset has no test images"));
    }
    if net.spec().classes != 2 {
        return Err(Error::invalid("classification metrics need a two-class network"));
    }
    let scored = score_test_split(net, ws)?;
    Ok(MetricsReport::new(&classification_report(&scored, threshold)?, threshold))
}

fn check_input(net: &NetworkState, ws: &Workspace) -> Result<()> {
    let side = ws.prep.crop_side;
    let [_, h, w] = net.spec().input;
    if h != side || w != side {
        return Err(Error::invalid(format!("network expects {h}x{w} inputs, preprocessing yields {side}x{side}")));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImageLocalization {
    pub id: String,
    /// At network input resolution.
    pub heatmap: Heatmap,
    /// In original image pixels.
    pub boxes: Vec<BBox>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LocalizationSummary {
    pub miou: f64,
    pub images: usize,
    pub predicted_boxes: usize,
    pub tau: f64,
    pub min_area: f64,
    pub conv_layer: usize,
    pub config: LocalizationConfig,
}

/// Maps a box on the preprocessed (resized and cropped) grid back to the
/// original `height × width` image.
pub fn map_box_to_image(b: &BBox, prep: &Preprocess, height: usize, width: usize) -> BBox {
    let off = synth::center_crop_offset(prep.out_side, prep.crop_side) as f64;
    let sy = height as f64 / prep.out_side as f64;
    let sx = width as f64 / prep.out_side as f64;
    let lo = |v: usize, s: f64| ((v as f64 + off) * s).floor() as usize;
    let hi = |v: usize, s: f64, max: usize| (((v as f64 + off) * s).ceil() as usize).min(max);
    BBox {
        x_min: lo(b.x_min, sx),
        y_min: lo(b.y_min, sy),
        x_max: hi(b.x_max, sx, width),
        y_max: hi(b.y_max, sy, height),
    }
}

pub fn resolve_min_area(ws: &Workspace, rule: MinArea) -> Result<f64> {
    match rule {
        MinArea::Fixed(a) => Ok(a),
        MinArea::Percentile(q) => Ok(min_area_from_annotations(&ws.annotations(Split::Train)?.positives(), q)?),
    }
}

/// Grad-CAM boxes for every annotated positive test image, scored with mIOU.
pub fn localize(
    net: &NetworkState,
    ws: &Workspace,
    cfg: &LocalizationConfig,
) -> Result<(Vec<ImageLocalization>, LocalizationSummary)> {
    check_input(net, ws)?;
    let positives = ws.annotated_test_positives();
    if positives.is_empty() {
        return Err(Error::invalid("test split has no annotated positive images"));
    }
    let conv_layer = net.spec().last_conv().ok_or_else(|| Error::invalid("network has no conv layer"))?;
    let min_area = resolve_min_area(ws, cfg.min_area)?;
    let mut results = Vec::with_capacity(positives.len());
    let mut gt = AnnotationSet::new();
    let mut pred = PredictionSet::new();
    for s in positives {
        let heatmap = gradcam(net, &ws.prep.apply(&s.image)?, cfg.target_class, conv_layer)?;
        let (h, w) = (s.image.shape()[1], s.image.shape()[2]);
        let boxes: Vec<BBox> = boxes_from_heatmap(&heatmap, cfg.tau, min_area)?
            .iter()
            .map(|b| map_box_to_image(b, &ws.prep, h, w))
            .collect();
        gt.insert(s.id.clone(), s.gt_boxes.clone())?;
        pred.insert(s.id.clone(), boxes.clone())?;
        results.push(ImageLocalization { id: s.id.clone(), heatmap, boxes });
    }
    let summary = LocalizationSummary {
        miou: miou_dataset_with(&gt, &pred, cfg.aggregation)?,
        images: results.len(),
        predicted_boxes: results.iter().map(|r| r.boxes.len()).sum(),
        tau: cfg.tau,
        min_area,
        conv_layer,
        config: *cfg,
    };
    Ok((results, summary))
}

/// `heatmaps/<id>.hmap`, `boxes/<id>.json`, `predictions.json` and
/// `localization.json` under `dir`.
pub fn write_localization(dir: &Path, results: &[ImageLocalization], summary: &LocalizationSummary) -> Result<()> {
    let mut all = AnnotationFile::default();
    for r in results {
        hmap::save(&r.heatmap, &dir.join("heatmaps").join(format!("{}.hmap", r.id)))?;
        let entry = ImageAnnotation { id: r.id.clone(), label: Label::Tb, boxes: r.boxes.clone() };
        AnnotationFile { images: vec![entry.clone()] }.save(&dir.join("boxes").join(format!("{}.json", r.id)))?;
        all.images.push(entry);
    }
    all.save(&dir.join("predictions.json"))?;
    error::write_json(&dir.join("localization.json"), summary)
}

#[derive(Debug, Clone, Copy)]
pub enum HessianLoss<'a> {
    CrossEntropy,
    Distillation { teacher: &'a NetworkState },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumMeta {
    pub params: usize,
    pub samples: usize,
    pub loss: String,
    pub kd: Option<KdParams>,
    pub hvp_eps: f64,
    pub trace_probes: usize,
    pub esd_sigma: f64,
    pub spectrum: SpectrumConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumFile {
    pub top_eigenvalues: Vec<f64>,
    pub trace: f64,
    /// `[eigenvalue, density]` pairs.
    pub esd: Vec<[f64; 2]>,
    pub meta: SpectrumMeta,
}

/// Dense-oracle comparison, only for small networks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DenseCheck {
    pub dense_top_eigenvalues: Vec<f64>,
    pub lanczos_top_eigenvalues: Vec<f64>,
    pub eigenvalue_rel_deltas: Vec<f64>,
    pub dense_trace: f64,
    pub eigenvalue_sum: f64,
    pub hutchinson_trace: f64,
    pub trace_rel_delta: f64,
    pub asymmetry: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HessianOutput {
    pub spectrum: SpectrumFile,
    pub dense: Option<DenseCheck>,
}

fn rel_delta(a: f64, reference: f64) -> f64 {
    (a - reference).abs() / reference.abs().max(f64::MIN_POSITIVE)
}

/// Spectrum of the training loss at `net` over the first
/// `hessian.max_samples` train images.
pub fn hessian_report(net: &NetworkState, ws: &Workspace, loss: HessianLoss<'_>) -> Result<HessianOutput> {
    check_input(net, ws)?;
    let hc = ws.config.hessian;
    let samples = &ws.dataset.train[..hc.max_samples.min(ws.dataset.train.len())];
    let batch = ws.batch(samples)?;
    let labels: Vec<usize> = samples.iter().map(|s| s.label.index()).collect();
    let (kind, name, kd) = match loss {
        HessianLoss::CrossEntropy => (LossKind::CrossEntropy, "ce", None),
        HessianLoss::Distillation { teacher } => {
            let teacher_logits = teacher.predict(&batch)?;
            (LossKind::Distillation { teacher_logits, kd: ws.config.kd }, "kd", Some(ws.config.kd))
        }
    };
    let source = NetLoss::new(net.spec().clone(), net.params().to_vec(), batch, labels, kind)?;
    let op = FiniteDifferenceHvp { source, eps: hc.eps };
    let n = net.params().len();
    let report = spectrum_report(&op, &hc.spectrum)?;
    let dense = if n <= DENSE_HESSIAN_LIMIT {
        let d = dense_hessian(&op)?;
        let mut values = symmetric_eigen(n, d.matrix.data())?.values;
        values.sort_by(|a, b| b.abs().total_cmp(&a.abs()).then(b.total_cmp(a)));
        let top: Vec<f64> = values.iter().copied().take(report.top_eigenvalues.len()).collect();
        let dense_trace = d.matrix.trace();
        Some(DenseCheck {
            eigenvalue_rel_deltas: report.top_eigenvalues.iter().zip(&top).map(|(a, b)| rel_delta(*a, *b)).collect(),
            dense_top_eigenvalues: top,
            lanczos_top_eigenvalues: report.top_eigenvalues.clone(),
            dense_trace,
            eigenvalue_sum: values.iter().sum(),
            hutchinson_trace: report.trace_estimate,
            trace_rel_delta: rel_delta(report.trace_estimate, dense_trace),
            asymmetry: d.asymmetry,
        })
    } else {
        None
    };
    let spectrum = SpectrumFile {
        top_eigenvalues: report.top_eigenvalues,
        trace: report.trace_estimate,
        esd: report.esd.points.iter().map(|&(x, d)| [x, d]).collect(),
        meta: SpectrumMeta {
            params: n,
            samples: samples.len(),
            loss: name.into(),
            kd,
            hvp_eps: hc.eps,
            trace_probes: report.trace_probes,
            esd_sigma: report.esd.sigma,
            spectrum: hc.spectrum,
        },
    };
    Ok(HessianOutput { spectrum, dense })
}

/// `spectrum.json`, `esd.csv` and, when available, `dense_check.json`.
pub fn write_hessian(dir: &Path, out: &HessianOutput) -> Result<()> {
    error::write_json(&dir.join("spectrum.json"), &out.spectrum)?;
    let mut csv = String::from("eigenvalue,density\n");
    for [x, d] in &out.spectrum.esd {
        csv.push_str(&format!("{x},{d}\n"));
    }
    error::write(&dir.join("esd.csv"), csv.as_bytes())?;
    if let Some(d) = &out.dense {
        error::write_json(&dir.join("dense_check.json"), d)?;
    }
    Ok(())
}
