use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::answer::score_answer_for;
use super::obb::ObbDetection;
use super::{EvalError, Scenario};
use crate::controller::Controller;
use crate::registry::{Registry, ToolCtx};
use crate::script::RunRecord;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalQuestion {
    pub id: String,
    pub query: String,
    /// Image paths, relative to the dataset file.
    #[serde(default)]
    pub attachments: Vec<PathBuf>,
    pub expected: String,
    pub scenario: Scenario,
}

fn parse_err(file: &str, line: usize, message: impl Into<String>) -> EvalError {
    EvalError::DatasetParseError {
        file: file.to_string(),
        line,
        message: message.into(),
    }
}

/// Parses JSON lines. Blank lines are skipped; ids must be unique and every
/// question in one file must share a scenario.
pub fn parse_dataset(text: &str, file: &str) -> Result<Vec<EvalQuestion>, EvalError> {
    let mut out: Vec<EvalQuestion> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let q: EvalQuestion = serde_json::from_str(line).map_err(|e| parse_err(file, i + 1, e.to_string()))?;
        if q.query.trim().is_empty() || q.expected.trim().is_empty() {
            return Err(parse_err(file, i + 1, "query and expected answer must be nonempty"));
        }
        if out.iter().any(|o| o.id == q.id) {
            return Err(parse_err(file, i + 1, format!("duplicate question id {}", q.id)));
        }
        if let Some(first) = out.first() {
            if first.scenario != q.scenario {
                return Err(parse_err(
                    file,
                    i + 1,
                    format!("scenario {} differs from {} in the same file", q.scenario, first.scenario),
                ));
            }
        }
        out.push(q);
    }
    Ok(out)
}

/// Loads a dataset and resolves attachment paths against its directory.
pub fn load_dataset(path: impl AsRef<Path>) -> Result<Vec<EvalQuestion>, EvalError> {
    let path = path.as_ref();
    let name = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|e| parse_err(&name, 0, e.to_string()))?;
    let base = path.parent().unwrap_or(Path::new("."));
    let mut qs = parse_dataset(&text, &name)?;
    for q in &mut qs {
        for a in &mut q.attachments {
            if a.is_relative() {
                *a = base.join(&*a);
            }
        }
    }
    Ok(qs)
}

/// Ground truth or predictions for one image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionFile {
    pub image: String,
    pub boxes: Vec<ObbDetection>,
}

/// Reads a JSON array of [`DetectionFile`] or a single object.
pub fn load_detections(path: impl AsRef<Path>) -> Result<Vec<DetectionFile>, EvalError> {
    let path = path.as_ref();
    let name = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|e| parse_err(&name, 0, e.to_string()))?;
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum OneOrMany {
        Many(Vec<DetectionFile>),
        One(DetectionFile),
    }
    match serde_json::from_str(&text).map_err(|e| parse_err(&name, e.line(), e.to_string()))? {
        OneOrMany::Many(v) => Ok(v),
        OneOrMany::One(d) => Ok(vec![d]),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuestionVerdict {
    pub id: String,
    pub scenario: Scenario,
    pub expected: String,
    pub actual: Option<String>,
    pub correct: bool,
    pub run_id: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenarioScore {
    pub correct: usize,
    pub total: usize,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinalAnswers {
    pub per_scenario: BTreeMap<Scenario, ScenarioScore>,
    /// Sorted by question id.
    pub questions: Vec<QuestionVerdict>,
    pub records: Vec<RunRecord>,
}

/// Runs every question through the controller, at most `parallelism` at a
/// time, and scores the last printed line of each run.
pub fn eval_final_answers(
    questions: &[EvalQuestion],
    reg: &Registry,
    controller: &Controller,
    make_ctx: &(dyn Fn(&EvalQuestion) -> ToolCtx + Sync),
    parallelism: usize,
) -> Result<FinalAnswers, EvalError> {
    if questions.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism.max(1))
        .build()
        .expect("thread pool");
    let mut runs: Vec<(QuestionVerdict, RunRecord)> = pool.install(|| {
        questions
            .par_iter()
            .map(|q| {
                let ctx = make_ctx(q).with_uploads(q.attachments.clone());
                let record = controller.handle_query(reg, &q.query, ctx);
                let actual = record
                    .outcome
                    .is_success()
                    .then(|| record.answer().map(str::to_string))
                    .flatten();
                let correct = actual
                    .as_deref()
                    .is_some_and(|a| score_answer_for(q.scenario, &q.expected, a));
                let v = QuestionVerdict {
                    id: q.id.clone(),
                    scenario: q.scenario,
                    expected: q.expected.clone(),
                    actual,
                    correct,
                    run_id: record.id.clone(),
                };
                (v, record)
            })
            .collect()
    });
    runs.sort_by(|a, b| a.0.id.cmp(&b.0.id));
    let mut per_scenario: BTreeMap<Scenario, ScenarioScore> = BTreeMap::new();
    for (v, _) in &runs {
        let s = per_scenario.entry(v.scenario).or_insert(ScenarioScore {
            correct: 0,
            total: 0,
            accuracy: 0.0,
        });
        s.total += 1;
        s.correct += v.correct as usize;
    }
    for s in per_scenario.values_mut() {
        s.accuracy = s.correct as f64 / s.total as f64;
    }
    let (questions, records) = runs.into_iter().unzip();
    Ok(FinalAnswers {
        per_scenario,
        questions,
        records,
    })
}
