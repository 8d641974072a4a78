use std::collections::BTreeMap;
use std::fmt::Write;

use serde::{Deserialize, Serialize};

use super::dataset::FinalAnswers;
use super::metrics::LlmLevel;
use super::Scenario;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ToolLevel {
    /// Classification set → top-1 accuracy.
    pub top1: BTreeMap<String, f64>,
    /// Segmentation set → mIoU.
    pub miou: BTreeMap<String, f64>,
    pub map50: Option<f64>,
    pub burn_iou: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_answers: Option<FinalAnswers>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tool_level: Option<ToolLevel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub llm_level: Option<LlmLevel>,
}

fn pct(v: f64) -> String {
    format!("{:.1}", v * 100.0)
}

impl EvalReport {
    /// Plain-text tables: tool-level scores, final-answer accuracy per
    /// scenario, and LLM-level rates, in percent.
    pub fn render_table(&self) -> String {
        let mut out = String::new();
        if let Some(t) = &self.tool_level {
            out.push_str("Tool level\n");
            let _ = writeln!(out, "  {:<28} {:>8}", "set / metric", "score");
            for (set, v) in &t.top1 {
                let _ = writeln!(out, "  {:<28} {:>8}", format!("{set} top-1 (%)"), pct(*v));
            }
            for (set, v) in &t.miou {
                let _ = writeln!(out, "  {:<28} {:>8}", format!("{set} mIoU (%)"), pct(*v));
            }
            if let Some(v) = t.map50 {
                let _ = writeln!(out, "  {:<28} {:>8}", "detection mAP@50 (%)", pct(v));
            }
            if let Some(v) = t.burn_iou {
                let _ = writeln!(out, "  {:<28} {:>8}", "burn scars IoU (%)", pct(v));
            }
        }
        if let Some(f) = &self.final_answers {
            out.push_str("Final answers\n");
            let _ = writeln!(out, "  {:<18} {:>8} {:>6} {:>10}", "scenario", "correct", "total", "accuracy");
            for s in Scenario::ALL {
                if let Some(score) = f.per_scenario.get(&s) {
                    let _ = writeln!(
                        out,
                        "  {:<18} {:>8} {:>6} {:>10}",
                        s.name(),
                        score.correct,
                        score.total,
                        pct(score.accuracy)
                    );
                }
            }
        }
        if let Some(l) = &self.llm_level {
            out.push_str("LLM level\n");
            let _ = writeln!(out, "  {:<28} {:>8}", "runs", l.runs);
            let _ = writeln!(out, "  {:<28} {:>8}", "execution success (%)", pct(l.execution_success_rate));
            let _ = writeln!(out, "  {:<28} {:>8}", "code validity (%)", pct(l.code_validity_rate));
        }
        out
    }
}
