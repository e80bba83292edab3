//! Prompt rendering and reply parsing.
//!
//! The evaluator, improvement and baseline templates are stored verbatim
//! under `prompts/` in Python `str.format` syntax (`{name}` placeholders,
//! doubled braces for literals) and rendered with the same semantics.
//! Parsers only extract; they never evaluate model output.

use serde_json::{Map, Value};

use crate::gateway::SYSTEM_PROMPT;
use crate::model::{CodeAssessment, QualityDimension, DIMENSION_COUNT, STATEMENTS_PER_DIMENSION};

const EVALUATOR_TEMPLATE: &str = include_str!("../prompts/evaluator.txt");
const IMPROVEMENT_TEMPLATE: &str = include_str!("../prompts/improvement.txt");
const BASELINE_TEMPLATE: &str = include_str!("../prompts/baseline.txt");

/// Fence tag the improvement template asks the model to use.
pub const IMPROVED_CODE_TAG: &str = "improved_code";

/// A rendered prompt: system and user message text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Prompt {
    pub system: String,
    pub user: String,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PromptError {
    #[error("expected {expected} {what}, got {actual}")]
    Arity {
        what: &'static str,
        expected: usize,
        actual: usize,
    },
    #[error("summary prompt needs at least one item")]
    EmptySummary,
}

/// Reply parse failures. All of them are retryable by the caller.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ParseError {
    #[error("no JSON object found in reply")]
    NoJson,
    #[error("reply JSON has the wrong shape: {0}")]
    BadShape(String),
    #[error("reply value out of range: {0}")]
    OutOfRange(String),
    #[error("no code block found in reply")]
    NoCodeBlock,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvaluationReply {
    pub insight: String,
    pub scores: Vec<i8>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImprovementReply {
    pub improvement_points: Vec<String>,
    pub explanation_report: Vec<String>,
    pub improved_code: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BaselineReply {
    pub insight: String,
    pub score: i8,
}

/// `str.format`-style substitution in a single pass, so substituted text is
/// never re-scanned for placeholders.
fn format_template(template: &str, values: &[(&str, &str)]) -> String {
    let mut out = String::with_capacity(template.len() + values.iter().map(|(_, v)| v.len()).sum::<usize>());
    let mut rest = template;
    while let Some(pos) = rest.find(['{', '}']) {
        out.push_str(&rest[..pos]);
        let tail = &rest[pos..];
        if let Some(after) = tail.strip_prefix("{{") {
            out.push('{');
            rest = after;
        } else if let Some(after) = tail.strip_prefix("}}") {
            out.push('}');
            rest = after;
        } else if tail.starts_with('{') {
            let end = tail.find('}').expect("template placeholders are closed");
            let name = &tail[1..end];
            let value = values
                .iter()
                .find(|(k, _)| *k == name)
                .map(|(_, v)| *v)
                .unwrap_or_else(|| panic!("template placeholder `{name}` has no value"));
            out.push_str(value);
            rest = &tail[end + 1..];
        } else {
            out.push('}');
            rest = &tail[1..];
        }
    }
    out.push_str(rest);
    out
}

fn prompt(user: String) -> Prompt {
    Prompt {
        system: SYSTEM_PROMPT.to_string(),
        user,
    }
}

/// Numbered statement list, one per line.
pub fn numbered_statements(statements: &[String]) -> String {
    statements
        .iter()
        .enumerate()
        .map(|(i, s)| format!("{}. {s}", i + 1))
        .collect::<Vec<_>>()
        .join("\n")
}

pub fn render_dimension_prompt(code: &str, dimension: &QualityDimension) -> Result<Prompt, PromptError> {
    if dimension.statements.len() != STATEMENTS_PER_DIMENSION {
        return Err(PromptError::Arity {
            what: "statements",
            expected: STATEMENTS_PER_DIMENSION,
            actual: dimension.statements.len(),
        });
    }
    let statements = numbered_statements(&dimension.statements);
    Ok(prompt(format_template(
        EVALUATOR_TEMPLATE,
        &[
            ("code", code),
            ("dimension_statements", &statements),
            ("quality_dimension", &dimension.id),
        ],
    )))
}

/// Scores as sent back to the model: integers stay integers, means keep two decimals.
pub fn feedback_score(score: f64) -> String {
    if score.fract() == 0.0 {
        format!("{}", score as i64)
    } else {
        let s = format!("{score:.2}");
        s.trim_end_matches('0').to_string()
    }
}

/// One block per dimension: name, score on the -5..5 scale, insight.
pub fn render_quality_insight(assessment: &CodeAssessment) -> String {
    assessment
        .dimensions
        .iter()
        .map(|d| {
            format!(
                "{}\n* Score: {}\n* Insights: {}",
                d.dimension,
                feedback_score(d.score),
                d.insight.trim()
            )
        })
        .collect::<Vec<_>>()
        .join("\n\n")
}

pub fn render_improvement_prompt(code: &str, assessment: &CodeAssessment) -> Result<Prompt, PromptError> {
    if assessment.dimensions.len() != DIMENSION_COUNT {
        return Err(PromptError::Arity {
            what: "dimension assessments",
            expected: DIMENSION_COUNT,
            actual: assessment.dimensions.len(),
        });
    }
    let insight = render_quality_insight(assessment);
    Ok(prompt(format_template(
        IMPROVEMENT_TEMPLATE,
        &[("code", code), ("quality_insight", &insight)],
    )))
}

pub fn render_baseline_prompt(code: &str) -> Prompt {
    prompt(format_template(BASELINE_TEMPLATE, &[("code", code)]))
}

/// Asks for one summary paragraph over labelled insights. Used for the
/// code-level summary and for merging self-consistency samples.
pub fn render_summary_prompt<L: AsRef<str>, T: AsRef<str>>(items: &[(L, T)]) -> Result<Prompt, PromptError> {
    if items.is_empty() {
        return Err(PromptError::EmptySummary);
    }
    let mut user = String::from("### INSIGHTS:\n");
    for (label, text) in items {
        user.push_str(&format!("[{}] {}\n", label.as_ref(), text.as_ref().trim()));
    }
    user.push_str(
        "\n### TASK:\n\
         Summarize the INSIGHTS above into a single concise paragraph about the \n\
         quality of the code. Keep every concrete strength and weakness they mention \n\
         and do not introduce new ones.\n\n\
         ### OUTPUT:\n\
         Return only the summary paragraph as plain text.",
    );
    Ok(prompt(user))
}

/// A fenced markdown block: info string and body, plus its byte span in the source.
#[derive(Debug, Clone, PartialEq, Eq)]
struct Fence {
    info: String,
    body: String,
    span: (usize, usize),
}

fn scan_fences(text: &str) -> Vec<Fence> {
    let mut fences = Vec::new();
    let mut open: Option<(String, usize, usize)> = None; // info, fence start, body start
    let mut offset = 0;
    for line in text.split_inclusive('\n') {
        let trimmed = line.trim();
        let line_end = offset + line.len();
        match &open {
            None => {
                if let Some(info) = trimmed.strip_prefix("```") {
                    // A one-line ```...``` block is not a fence opener.
                    if !(info.len() >= 3 && info.ends_with("```")) {
                        open = Some((info.trim().to_string(), offset, line_end));
                    }
                }
            }
            Some((info, start, body_start)) => {
                if trimmed == "```" {
                    fences.push(Fence {
                        info: info.clone(),
                        body: text[*body_start..offset].trim_end_matches(['\n', '\r']).to_string(),
                        span: (*start, line_end),
                    });
                    open = None;
                }
            }
        }
        offset = line_end;
    }
    if let Some((info, start, body_start)) = open {
        fences.push(Fence {
            info,
            body: text[body_start.min(text.len())..].trim_end().to_string(),
            span: (start, text.len()),
        });
    }
    fences
}

/// First `{` from which a complete JSON object parses.
fn first_json_object(text: &str) -> Option<Map<String, Value>> {
    for (pos, _) in text.match_indices('{') {
        let mut stream = serde_json::Deserializer::from_str(&text[pos..]).into_iter::<Value>();
        if let Some(Ok(Value::Object(map))) = stream.next() {
            return Some(map);
        }
    }
    None
}

fn string_field(map: &Map<String, Value>, key: &str) -> Result<String, ParseError> {
    match map.get(key) {
        Some(Value::String(s)) => Ok(s.clone()),
        Some(_) => Err(ParseError::BadShape(format!("`{key}` is not a string"))),
        None => Err(ParseError::BadShape(format!("missing `{key}`"))),
    }
}

fn integer(value: &Value) -> Option<i64> {
    value.as_i64().or_else(|| {
        value
            .as_f64()
            .filter(|f| f.fract() == 0.0 && f.abs() < 1e15)
            .map(|f| f as i64)
    })
}

fn string_list(map: &Map<String, Value>, key: &str) -> Result<Vec<String>, ParseError> {
    let items = map
        .get(key)
        .ok_or_else(|| ParseError::BadShape(format!("missing `{key}`")))?
        .as_array()
        .ok_or_else(|| ParseError::BadShape(format!("`{key}` is not a list")))?;
    items
        .iter()
        .map(|v| {
            v.as_str()
                .map(str::to_string)
                .ok_or_else(|| ParseError::BadShape(format!("`{key}` holds a non-string item")))
        })
        .collect()
}

pub fn parse_evaluation_reply(raw: &str) -> Result<EvaluationReply, ParseError> {
    let map = first_json_object(raw).ok_or(ParseError::NoJson)?;
    let insight = string_field(&map, "insight")?;
    let scores = map
        .get("scores")
        .ok_or_else(|| ParseError::BadShape("missing `scores`".into()))?
        .as_array()
        .ok_or_else(|| ParseError::BadShape("`scores` is not a list".into()))?;
    if scores.len() != STATEMENTS_PER_DIMENSION {
        return Err(ParseError::BadShape(format!(
            "expected {STATEMENTS_PER_DIMENSION} scores, got {}",
            scores.len()
        )));
    }
    let mut values = Vec::with_capacity(scores.len());
    for (i, s) in scores.iter().enumerate() {
        let v = integer(s).ok_or_else(|| ParseError::BadShape(format!("score {} is not an integer", i + 1)))?;
        if !(-1..=1).contains(&v) {
            return Err(ParseError::OutOfRange(format!(
                "score {} is {v}, expected -1, 0 or 1",
                i + 1
            )));
        }
        values.push(v as i8);
    }
    Ok(EvaluationReply {
        insight,
        scores: values,
    })
}

pub fn parse_improvement_reply(raw: &str) -> Result<ImprovementReply, ParseError> {
    let fences = scan_fences(raw);
    let code_fence = fences
        .iter()
        .find(|f| f.info == IMPROVED_CODE_TAG)
        .or_else(|| fences.iter().rev().find(|f| !f.info.eq_ignore_ascii_case("json")));

    let json_region = match code_fence {
        Some(f) => format!("{}{}", &raw[..f.span.0], &raw[f.span.1..]),
        None => raw.to_string(),
    };
    let map = first_json_object(&json_region).ok_or(ParseError::NoJson)?;
    let improvement_points = string_list(&map, "improvement_points")?;
    let explanation_report = string_list(&map, "explanation_report")?;

    let code = code_fence.ok_or(ParseError::NoCodeBlock)?;
    if code.body.trim().is_empty() {
        return Err(ParseError::BadShape("improved code block is empty".into()));
    }
    Ok(ImprovementReply {
        improvement_points,
        explanation_report,
        improved_code: code.body.clone(),
    })
}

pub fn parse_baseline_reply(raw: &str) -> Result<BaselineReply, ParseError> {
    let map = first_json_object(raw).ok_or(ParseError::NoJson)?;
    let insight = string_field(&map, "insight")?;
    let score = map
        .get("score")
        .ok_or_else(|| ParseError::BadShape("missing `score`".into()))?;
    let score = integer(score).ok_or_else(|| ParseError::BadShape("`score` is not an integer".into()))?;
    if !(-5..=5).contains(&score) {
        return Err(ParseError::OutOfRange(format!("score {score} is outside [-5, 5]")));
    }
    Ok(BaselineReply {
        insight,
        score: score as i8,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::StatementCatalog;
    use crate::model::DimensionAssessment;

    #[test]
    fn formatter_handles_escapes_and_does_not_rescan_values() {
        assert_eq!(format_template("a {x} {{y}} }}", &[("x", "{x}")]), "a {x} {y} }");
    }

    #[test]
    fn dimension_prompt_contains_markers_and_statements() {
        let catalog = StatementCatalog::builtin();
        let dim = catalog.dimension("Readability").unwrap();
        let p = render_dimension_prompt("x = 1", dim).unwrap();
        assert!(p
            .system
            .starts_with("You are a helpful and harmless AI software engineer."));
        assert!(p.user.contains("### STATEMENTS:"));
        assert!(p.user.contains("### TASK:"));
        assert!(p.user.contains("from a Readability perspective"));
        for (i, s) in dim.statements.iter().enumerate() {
            assert!(p.user.contains(&format!("{}. {s}", i + 1)));
        }
        assert!(p.user.contains("{  \"insight\""));
    }

    #[test]
    fn dimension_prompts_differ_only_in_dimension_parts() {
        let catalog = StatementCatalog::builtin();
        let a = catalog.dimension("Readability").unwrap();
        let b = catalog.dimension("Security").unwrap();
        let pa = render_dimension_prompt("code", a).unwrap().user;
        let pb = render_dimension_prompt("code", b).unwrap().user;
        let strip = |text: &str, d: &QualityDimension| {
            text.replace(&numbered_statements(&d.statements), "<S>")
                .replace(&format!("a {} perspective", d.id), "a <D> perspective")
        };
        assert_ne!(pa, pb);
        assert_eq!(strip(&pa, a), strip(&pb, b));
    }

    #[test]
    fn empty_statements_are_an_arity_error() {
        let dim = QualityDimension {
            id: "Readability".into(),
            statements: vec![],
        };
        assert!(matches!(
            render_dimension_prompt("x", &dim),
            Err(PromptError::Arity { actual: 0, .. })
        ));
    }

    fn assessment(n: usize) -> CodeAssessment {
        let dims = crate::model::DIMENSION_IDS
            .iter()
            .take(n)
            .map(|id| DimensionAssessment {
                dimension: id.to_string(),
                score: 10.0 / 3.0,
                insight: format!("{id} insight"),
                samples: vec![],
            })
            .collect();
        CodeAssessment {
            dimensions: dims,
            overall_score: 0.0,
            summary: String::new(),
        }
    }

    #[test]
    fn improvement_prompt_lists_ten_blocks() {
        let p = render_improvement_prompt("code", &assessment(10)).unwrap();
        assert!(p.user.contains("### Quality Dimensions Feedback:"));
        for id in crate::model::DIMENSION_IDS {
            assert!(p
                .user
                .contains(&format!("{id}\n* Score: 3.33\n* Insights: {id} insight")));
        }
        assert!(p.user.ends_with("```improved_code\n{improved_code_here}\n```"));
        assert_eq!(p, render_improvement_prompt("code", &assessment(10)).unwrap());
        assert!(render_improvement_prompt("code", &assessment(9)).is_err());
    }

    #[test]
    fn feedback_scores() {
        assert_eq!(feedback_score(3.0), "3");
        assert_eq!(feedback_score(-4.0), "-4");
        assert_eq!(feedback_score(0.5), "0.5");
        assert_eq!(feedback_score(10.0 / 3.0), "3.33");
    }

    #[test]
    fn baseline_prompt() {
        let p = render_baseline_prompt("print(1)");
        assert!(p.user.contains("scale from -5 to 5"));
        assert!(render_baseline_prompt("").user.contains("```\n\n```"));
        let a = render_baseline_prompt("a()").user;
        let b = render_baseline_prompt("b()").user;
        assert_eq!(a.replace("a()", "b()"), b);
    }

    #[test]
    fn summary_prompt() {
        let items: Vec<(String, String)> = crate::model::DIMENSION_IDS
            .iter()
            .map(|d| (d.to_string(), format!("about {d}")))
            .collect();
        let p = render_summary_prompt(&items).unwrap();
        for d in crate::model::DIMENSION_IDS {
            assert!(p.user.contains(&format!("[{d}] about {d}")));
        }
        assert!(render_summary_prompt(&[("Retry 1", "only")]).is_ok());
        let retries: Vec<(String, &str)> = (1..=5).map(|i| (format!("Retry {i}"), "x")).collect();
        assert!(render_summary_prompt(&retries).unwrap().user.contains("[Retry 5] x"));
        assert_eq!(render_summary_prompt::<&str, &str>(&[]), Err(PromptError::EmptySummary));
    }

    #[test]
    fn evaluation_reply_examples() {
        let r = parse_evaluation_reply("```json {\"insight\":\"ok\",\"scores\":[1,-1,0,1,1]} ```").unwrap();
        assert_eq!(r.insight, "ok");
        assert_eq!(r.scores, vec![1, -1, 0, 1, 1]);
        assert!(matches!(
            parse_evaluation_reply("{\"insight\":\"x\",\"scores\":[1,2,0,1,1]}"),
            Err(ParseError::OutOfRange(_))
        ));
        assert_eq!(parse_evaluation_reply("prose only, no braces"), Err(ParseError::NoJson));
        assert!(matches!(
            parse_evaluation_reply("{\"insight\":\"x\",\"scores\":[1,0,1,1]}"),
            Err(ParseError::BadShape(_))
        ));
        assert!(matches!(
            parse_evaluation_reply("{\"scores\":[1,0,1,1,1]}"),
            Err(ParseError::BadShape(_))
        ));
    }

    #[test]
    fn evaluation_reply_skips_unparseable_braces() {
        let raw = "Looking at {this}:\n```json\n{\"insight\": \"uses {} a lot\", \"scores\": [0,0,0,0,-1]}\n```";
        let r = parse_evaluation_reply(raw).unwrap();
        assert_eq!(r.insight, "uses {} a lot");
    }

    #[test]
    fn improvement_reply_tagged_and_fallback() {
        let tagged = "```json\n{\"improvement_points\": [\"a\"], \"explanation_report\": [\"b\"]}\n```\nThen:\n```improved_code\ndef f():\n    return {1: 2}\n```\n";
        let r = parse_improvement_reply(tagged).unwrap();
        assert_eq!(r.improvement_points, vec!["a"]);
        assert_eq!(r.explanation_report, vec!["b"]);
        assert_eq!(r.improved_code, "def f():\n    return {1: 2}");

        let untagged = "{\"improvement_points\": [], \"explanation_report\": []}\n```\nx = 1\n```";
        assert_eq!(parse_improvement_reply(untagged).unwrap().improved_code, "x = 1");

        let json_only = "```json\n{\"improvement_points\": [], \"explanation_report\": []}\n```";
        assert_eq!(parse_improvement_reply(json_only), Err(ParseError::NoCodeBlock));

        let no_json = "```improved_code\nx = 1\n```";
        assert_eq!(parse_improvement_reply(no_json), Err(ParseError::NoJson));

        let missing_key = "{\"improvement_points\": []}\n```improved_code\nx = 1\n```";
        assert!(matches!(
            parse_improvement_reply(missing_key),
            Err(ParseError::BadShape(_))
        ));
    }

    #[test]
    fn improvement_json_is_not_taken_from_code() {
        let raw =
            "```improved_code\nconst cfg = {\"improvement_points\": [\"bogus\"], \"explanation_report\": []};\n```";
        assert_eq!(parse_improvement_reply(raw), Err(ParseError::NoJson));
    }

    #[test]
    fn baseline_reply_examples() {
        let r = parse_baseline_reply("{\"insight\":\"lacks comments\",\"score\":2}").unwrap();
        assert_eq!(r.score, 2);
        assert!(matches!(
            parse_baseline_reply("{\"insight\":\"x\",\"score\":7}"),
            Err(ParseError::OutOfRange(_))
        ));
        let fenced = "```json\n{\n  \"insight\": \"fine\",\n  \"score\": -3\n}\n```";
        assert_eq!(parse_baseline_reply(fenced).unwrap().score, -3);
    }
}
