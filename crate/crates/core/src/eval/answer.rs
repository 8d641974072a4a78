//! Final-answer matching.

use super::Scenario;

/// Relative tolerance for numeric answers.
pub const NUMERIC_REL_TOL: f64 = 0.01;

#[derive(Debug, PartialEq)]
enum Normalized {
    Bool(bool),
    Number(f64),
    Text(String),
}

fn normalize(s: &str) -> Normalized {
    let t = s.trim().trim_end_matches('.').trim().to_lowercase();
    match t.as_str() {
        "true" | "yes" => return Normalized::Bool(true),
        "false" | "no" => return Normalized::Bool(false),
        _ => {}
    }
    let numeric: String = t.chars().filter(|c| *c != ',' && *c != '_').collect();
    match numeric.parse::<f64>() {
        Ok(v) if v.is_finite() => Normalized::Number(v),
        _ => Normalized::Text(t),
    }
}

/// Compares an expected answer with a system answer.
///
/// Both sides are trimmed and lowercased; yes/true and no/false fall into
/// the same class; numbers match within 1% relative error.
pub fn score_answer(expected: &str, actual: &str) -> bool {
    match (normalize(expected), normalize(actual)) {
        (Normalized::Bool(a), Normalized::Bool(b)) => a == b,
        (Normalized::Number(e), Normalized::Number(a)) => {
            if e == 0.0 {
                a == 0.0
            } else {
                (a - e).abs() <= NUMERIC_REL_TOL * e.abs()
            }
        }
        (Normalized::Text(a), Normalized::Text(b)) => a == b,
        _ => false,
    }
}

/// Scenario-aware matching: object counts require an exact integer match.
pub fn score_answer_for(scenario: Scenario, expected: &str, actual: &str) -> bool {
    if scenario == Scenario::WildfireObjects {
        if let (Normalized::Number(e), Normalized::Number(a)) = (normalize(expected), normalize(actual)) {
            return e.fract() == 0.0 && e == a;
        }
    }
    score_answer(expected, actual)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn boolean_classes() {
        assert!(score_answer("True", "yes"));
        assert!(score_answer(" no ", "False"));
        assert!(!score_answer("True", "False"));
    }

    #[test]
    fn numeric_tolerance() {
        assert!(score_answer("12364", "12370"));
        assert!(!score_answer("12364", "12500"));
        assert!(score_answer("0", "0.0"));
        assert!(score_answer("1,000", "1000"));
    }

    #[test]
    fn text() {
        assert!(!score_answer("brushwood", "water"));
        assert!(score_answer("Brushwood", "brushwood"));
    }

    #[test]
    fn object_counts_exact() {
        assert!(score_answer_for(Scenario::WildfireObjects, "12", "12"));
        assert!(!score_answer_for(Scenario::WildfireObjects, "100", "101"));
        assert!(score_answer_for(Scenario::LandCover, "100", "101"));
    }
}
