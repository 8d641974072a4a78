//! Tool-level and LLM-level metric math.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::obb::{obb_iou, ObbDetection};
use super::EvalError;
use crate::raster::Mask;
use crate::script::{Outcome, RunRecord};

pub fn top1_accuracy(pred: &[u32], truth: &[u32]) -> Result<f64, EvalError> {
    if pred.len() != truth.len() {
        return Err(EvalError::LengthMismatch(pred.len(), truth.len()));
    }
    if pred.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let hits = pred.iter().zip(truth).filter(|(p, t)| p == t).count();
    Ok(hits as f64 / pred.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MiouResult {
    pub per_class: BTreeMap<u32, f64>,
    /// `None` when no class appears in either mask.
    pub mean: Option<f64>,
}

/// Per-class IoU and its mean over the classes present in either mask.
/// Classes `>= num_classes` are ignored when `num_classes` is given.
pub fn miou(pred: &Mask, truth: &Mask, num_classes: Option<u32>) -> Result<MiouResult, EvalError> {
    if !pred.same_shape(truth) {
        return Err(EvalError::ShapeMismatch);
    }
    let mut inter: BTreeMap<u32, usize> = BTreeMap::new();
    let mut union: BTreeMap<u32, usize> = BTreeMap::new();
    let keep = |c: u32| num_classes.is_none_or(|n| c < n);
    for i in 0..pred.len() {
        let (p, t) = (pred.get(i), truth.get(i));
        if p == t {
            if keep(p) {
                *inter.entry(p).or_default() += 1;
                *union.entry(p).or_default() += 1;
            }
        } else {
            if keep(p) {
                *union.entry(p).or_default() += 1;
            }
            if keep(t) {
                *union.entry(t).or_default() += 1;
            }
        }
    }
    let per_class: BTreeMap<u32, f64> = union
        .iter()
        .map(|(&c, &u)| (c, inter.get(&c).copied().unwrap_or(0) as f64 / u as f64))
        .collect();
    let mean = (!per_class.is_empty())
        .then(|| per_class.values().sum::<f64>() / per_class.len() as f64);
    Ok(MiouResult { per_class, mean })
}

/// IoU of the `true` pixels of two boolean masks. Two empty masks agree
/// perfectly and score 1.0.
pub fn binary_iou(pred: &Mask, truth: &Mask) -> Result<f64, EvalError> {
    if !pred.same_shape(truth) {
        return Err(EvalError::ShapeMismatch);
    }
    if !pred.is_boolean() || !truth.is_boolean() {
        return Err(EvalError::NotBoolean);
    }
    let (mut inter, mut union) = (0usize, 0usize);
    for i in 0..pred.len() {
        let (p, t) = (pred.get(i) == 1, truth.get(i) == 1);
        inter += (p && t) as usize;
        union += (p || t) as usize;
    }
    Ok(if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    })
}

/// All-point interpolated average precision from a ranked TP/FP sequence.
fn average_precision(tp_flags: &[bool], n_truth: usize) -> f64 {
    let mut recall = Vec::with_capacity(tp_flags.len());
    let mut precision = Vec::with_capacity(tp_flags.len());
    let (mut tp, mut fp) = (0usize, 0usize);
    for &hit in tp_flags {
        if hit {
            tp += 1;
        } else {
            fp += 1;
        }
        recall.push(tp as f64 / n_truth as f64);
        precision.push(tp as f64 / (tp + fp) as f64);
    }
    // monotone envelope, right to left
    for i in (0..precision.len().saturating_sub(1)).rev() {
        precision[i] = precision[i].max(precision[i + 1]);
    }
    let mut ap = 0.0;
    let mut prev_recall = 0.0;
    for (r, p) in recall.iter().zip(&precision) {
        ap += (r - prev_recall) * p;
        prev_recall = *r;
    }
    ap
}

/// Detections of one image: predictions and ground truth.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ImageDetections {
    pub preds: Vec<ObbDetection>,
    pub truths: Vec<ObbDetection>,
}

pub const MAP_IOU_THRESHOLD: f64 = 0.5;

/// mAP at rotated IoU ≥ 0.5 over several images. `None` when no class has
/// any ground truth.
pub fn map50_images(images: &[ImageDetections]) -> Result<Option<f64>, EvalError> {
    let mut truth_counts: BTreeMap<u32, usize> = BTreeMap::new();
    for img in images {
        for t in &img.truths {
            *truth_counts.entry(t.class_id).or_default() += 1;
        }
    }
    if truth_counts.is_empty() {
        return Ok(None);
    }
    let mut aps = Vec::with_capacity(truth_counts.len());
    for (&class, &n_truth) in &truth_counts {
        // (score, image index, prediction)
        let mut ranked: Vec<(f64, usize, &ObbDetection)> = images
            .iter()
            .enumerate()
            .flat_map(|(i, img)| {
                img.preds
                    .iter()
                    .filter(move |p| p.class_id == class)
                    .map(move |p| (p.score.unwrap_or(0.0), i, p))
            })
            .collect();
        ranked.sort_by(|a, b| b.0.total_cmp(&a.0));
        let mut matched: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); images.len()];
        let mut flags = Vec::with_capacity(ranked.len());
        for (_, img_idx, pred) in ranked {
            let mut best: Option<(usize, f64)> = None;
            for (ti, truth) in images[img_idx].truths.iter().enumerate() {
                if truth.class_id != class || matched[img_idx].contains(&ti) {
                    continue;
                }
                let iou = obb_iou(pred, truth)?;
                if iou >= MAP_IOU_THRESHOLD && best.is_none_or(|(_, b)| iou > b) {
                    best = Some((ti, iou));
                }
            }
            match best {
                Some((ti, _)) => {
                    matched[img_idx].insert(ti);
                    flags.push(true);
                }
                None => flags.push(false),
            }
        }
        aps.push(average_precision(&flags, n_truth));
    }
    Ok(Some(aps.iter().sum::<f64>() / aps.len() as f64))
}

/// mAP@50 for a single image.
pub fn map50(preds: &[ObbDetection], truths: &[ObbDetection]) -> Result<Option<f64>, EvalError> {
    map50_images(&[ImageDetections {
        preds: preds.to_vec(),
        truths: truths.to_vec(),
    }])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LlmLevel {
    pub execution_success_rate: f64,
    pub code_validity_rate: f64,
    pub runs: usize,
}

/// Code validity counts runs whose final verdict had every call resolved;
/// execution success counts runs that completed without error.
pub fn eval_llm_level(records: &[RunRecord]) -> Result<LlmLevel, EvalError> {
    if records.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let n = records.len() as f64;
    let valid = records.iter().filter(|r| r.verdict.calls_valid).count();
    let ok = records
        .iter()
        .filter(|r| matches!(r.outcome, Outcome::Success))
        .count();
    Ok(LlmLevel {
        execution_success_rate: ok as f64 / n,
        code_validity_rate: valid as f64 / n,
        runs: records.len(),
    })
}
