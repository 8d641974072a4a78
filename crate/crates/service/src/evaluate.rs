//! The three evaluation levels as file-driven commands.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context};
use geoscript_core::controller::Controller;
use geoscript_core::eval::{
    binary_iou, eval_final_answers, eval_llm_level, load_dataset, load_detections, map50_images, miou,
    top1_accuracy, EvalQuestion, FinalAnswers, ImageDetections, LlmLevel, ToolLevel,
};
use geoscript_core::raster::load_mask;
use geoscript_core::registry::{LocalCatalog, Registry, ToolCtx};

use crate::store::RunStore;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum ToolTask {
    /// Top-1 accuracy over JSON arrays of class ids.
    Cls,
    /// mIoU over class masks.
    Seg,
    /// mAP@50 over oriented-box detection files.
    Det,
    /// Binary IoU over burn-scar masks.
    Burn,
}

/// Loads every dataset file; question ids must be unique across files.
pub fn load_questions(datasets: &[PathBuf]) -> anyhow::Result<Vec<EvalQuestion>> {
    let mut out = Vec::new();
    let mut seen = BTreeSet::new();
    for d in datasets {
        for q in load_dataset(d)? {
            if !seen.insert(q.id.clone()) {
                bail!("question id {} appears twice", q.id);
            }
            out.push(q);
        }
    }
    Ok(out)
}

/// Runs the questions; records go to `runs_out` when given.
pub fn final_answers(
    questions: &[EvalQuestion],
    reg: &Registry,
    controller: &Controller,
    scenes: Option<Arc<LocalCatalog>>,
    runs_out: Option<&RunStore>,
    parallelism: usize,
) -> anyhow::Result<FinalAnswers> {
    let scratch = tempfile::tempdir()?;
    let scratch_path = scratch.path().to_path_buf();
    let make_ctx = move |q: &EvalQuestion| {
        let mut ctx = ToolCtx::new().with_artifacts_dir(scratch_path.join(&q.id));
        if let Some(s) = &scenes {
            ctx = ctx.with_read_root(s.root()).with_scenes(s.clone());
        }
        ctx
    };
    let fa = eval_final_answers(questions, reg, controller, &make_ctx, parallelism)?;
    if let Some(store) = runs_out {
        for r in &fa.records {
            store.persist(r)?;
        }
    }
    Ok(fa)
}

fn read_ids(path: &Path) -> anyhow::Result<Vec<u32>> {
    let text = std::fs::read_to_string(path).with_context(|| path.display().to_string())?;
    serde_json::from_str(&text).with_context(|| format!("{}: expected a JSON array of class ids", path.display()))
}

/// Scores one prediction file against its ground truth.
pub fn tool_level(task: ToolTask, pred: &Path, truth: &Path, set: &str) -> anyhow::Result<ToolLevel> {
    let mut t = ToolLevel::default();
    match task {
        ToolTask::Cls => {
            t.top1.insert(set.into(), top1_accuracy(&read_ids(pred)?, &read_ids(truth)?)?);
        }
        ToolTask::Seg => {
            let r = miou(&load_mask(pred)?, &load_mask(truth)?, None)?;
            t.miou.insert(set.into(), r.mean.unwrap_or(0.0));
        }
        ToolTask::Burn => {
            t.burn_iou = Some(binary_iou(&load_mask(pred)?, &load_mask(truth)?)?);
        }
        ToolTask::Det => {
            let preds = load_detections(pred)?;
            let truths = load_detections(truth)?;
            let mut images: Vec<ImageDetections> = Vec::new();
            for tf in &truths {
                let p = preds
                    .iter()
                    .filter(|p| p.image == tf.image)
                    .flat_map(|p| p.boxes.iter().copied())
                    .collect();
                images.push(ImageDetections {
                    preds: p,
                    truths: tf.boxes.clone(),
                });
            }
            // predictions on images without ground truth are all false positives
            for pf in preds.iter().filter(|p| !truths.iter().any(|t| t.image == p.image)) {
                images.push(ImageDetections {
                    preds: pf.boxes.clone(),
                    truths: Vec::new(),
                });
            }
            t.map50 = map50_images(&images)?;
        }
    }
    Ok(t)
}

/// Rates over every run record found in `dir`.
pub fn llm_level(dir: &Path) -> anyhow::Result<LlmLevel> {
    let records = RunStore::new(dir).records();
    eval_llm_level(&records).with_context(|| format!("no run records in {}", dir.display()))
}
