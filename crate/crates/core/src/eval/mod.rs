//! Evaluation at three levels: final answers to natural-language
//! questions, per-tool metrics, and rates over recorded runs.

mod answer;
mod dataset;
mod metrics;
mod obb;
mod report;

pub use answer::{score_answer, score_answer_for, NUMERIC_REL_TOL};
pub use dataset::{
    eval_final_answers, load_dataset, load_detections, parse_dataset, DetectionFile, EvalQuestion, FinalAnswers,
    QuestionVerdict, ScenarioScore,
};
pub use metrics::{
    binary_iou, eval_llm_level, map50, map50_images, miou, top1_accuracy, ImageDetections, LlmLevel, MiouResult,
    MAP_IOU_THRESHOLD,
};
pub use obb::{normalize_angle, obb_iou, ObbDetection};
pub use report::{EvalReport, ToolLevel};

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("length mismatch: {0} predictions vs {1} ground truths")]
    LengthMismatch(usize, usize),
    #[error("empty input")]
    EmptyInput,
    #[error("masks differ in shape")]
    ShapeMismatch,
    #[error("binary IoU needs boolean masks")]
    NotBoolean,
    #[error("degenerate box (zero area or non-finite)")]
    DegenerateBox,
    #[error("{file}:{line}: {message}")]
    DatasetParseError { file: String, line: usize, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    LandCover,
    WildfireBurn,
    WildfireObjects,
}

impl Scenario {
    pub const ALL: [Scenario; 3] = [Scenario::LandCover, Scenario::WildfireBurn, Scenario::WildfireObjects];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::LandCover => "land_cover",
            Scenario::WildfireBurn => "wildfire_burn",
            Scenario::WildfireObjects => "wildfire_objects",
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}
