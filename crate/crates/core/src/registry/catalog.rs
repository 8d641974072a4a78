use std::fmt::Write;

use super::{Registry, ToolCategory, ToolSpec};

fn render_tool(out: &mut String, spec: &ToolSpec) {
    let category = match spec.category {
        ToolCategory::Data => "data",
        ToolCategory::Model => "model",
    };
    let _ = writeln!(out, "### {} ({category} tool)", spec.name);
    let _ = writeln!(out, "General description: {}", spec.general_description.trim());
    let _ = writeln!(out, "Technical description: {}", spec.technical_description.trim());
    if let Some(sig) = spec.signature() {
        let _ = writeln!(out, "Signature: {sig}");
    }
    if let Some(sensors) = &spec.supported_sensors {
        let _ = writeln!(out, "Supported sensors:");
        if sensors.is_empty() {
            let _ = writeln!(out, "- any");
        }
        for s in sensors {
            let mapping: Vec<String> = s
                .band_mapping
                .iter()
                .map(|(from, to)| format!("{from} -> {to}"))
                .collect();
            let _ = writeln!(
                out,
                "- {}: {}; normalization: {}",
                s.sensor,
                mapping.join(", "),
                s.normalization
            );
        }
    }
    if let Some(example) = &spec.usage_example {
        let _ = writeln!(out, "Usage example:");
        for line in example.lines() {
            let _ = writeln!(out, "    {line}");
        }
    }
    if let Some(datasets) = &spec.training_datasets {
        let _ = writeln!(out, "Training datasets:");
        if datasets.is_empty() {
            let _ = writeln!(out, "- none (analytic formula)");
        }
        for d in datasets {
            let _ = writeln!(out, "- {}", d.name);
            let _ = writeln!(out, "  | id | label |");
            let _ = writeln!(out, "  |----|-------|");
            for (id, label) in &d.taxonomy {
                let _ = writeln!(out, "  | {id} | {label} |");
            }
        }
    }
}

/// Renders every tool, sorted by name, as the text block shown to the
/// language model. Equal registries render identical bytes.
pub fn render_prompt_catalog(reg: &Registry) -> String {
    let mut out = String::from("## Available tools\n");
    for spec in reg.specs() {
        out.push('\n');
        render_tool(&mut out, spec);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::registry::MockConfig;

    #[test]
    fn sorted_and_stable() {
        let reg = Registry::builtin().with_mock_model_tools(MockConfig::default());
        let a = render_prompt_catalog(&reg);
        assert_eq!(a, render_prompt_catalog(&reg.clone()));
        let evi = a.find("### evi ").unwrap();
        let ndvi = a.find("### ndvi ").unwrap();
        assert!(evi < ndvi);
    }

    #[test]
    fn taxonomy_table() {
        let reg = Registry::builtin().with_mock_model_tools(MockConfig::default());
        let text = render_prompt_catalog(&reg);
        assert!(text.contains("  | 11 | agricultural land |"));
        assert!(text.contains("get_uploaded_image_path(index: int = optional) -> str"));
    }
}
