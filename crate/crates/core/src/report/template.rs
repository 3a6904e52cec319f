use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::ReportError;

/// A value supplied to a template.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RenderValue {
    Text(String),
    Number(f64),
    Table { columns: Vec<String>, rows: Vec<Vec<String>> },
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RenderContext {
    pub values: IndexMap<String, RenderValue>,
}

impl RenderContext {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn text(&mut self, key: &str, value: impl Into<String>) -> &mut Self {
        self.values.insert(key.into(), RenderValue::Text(value.into()));
        self
    }

    pub fn number(&mut self, key: &str, value: f64) -> &mut Self {
        self.values.insert(key.into(), RenderValue::Number(value));
        self
    }

    pub fn table(&mut self, key: &str, columns: &[&str], rows: Vec<Vec<String>>) -> &mut Self {
        self.values
            .insert(key.into(), RenderValue::Table { columns: columns.iter().map(|c| c.to_string()).collect(), rows });
        self
    }

    pub fn extend(&mut self, other: RenderContext) -> &mut Self {
        self.values.extend(other.values);
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Segment {
    Literal(String),
    Key(String),
    Table(String),
}

/// Text with `{{key}}` placeholders and `{{#table:name}}` blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportTemplate {
    body: String,
    segments: Vec<Segment>,
    required_keys: Vec<String>,
}

const CATALOGUE_TEMPLATE: &str = include_str!("../../templates/catalogue.md");
const STUDY_SUMMARY_TEMPLATE: &str = include_str!("../../templates/study_summary.md");

fn valid_key(k: &str) -> bool {
    !k.is_empty() && k.chars().all(|c| c.is_ascii_alphanumeric() || "_.-".contains(c))
}

impl ReportTemplate {
    pub fn parse(body: &str) -> Result<Self, ReportError> {
        let mut segments = vec![];
        let mut required: Vec<String> = vec![];
        let mut rest = body;
        let line_of = |rest: &str| body[..body.len() - rest.len()].matches('\n').count() + 1;
        while let Some(start) = rest.find("{{") {
            if start > 0 {
                segments.push(Segment::Literal(rest[..start].to_string()));
            }
            let after = &rest[start + 2..];
            let Some(end) = after.find("}}") else {
                return Err(ReportError::Template(format!("line {}: unterminated placeholder", line_of(&rest[start..]))));
            };
            let inner = after[..end].trim();
            let seg = match inner.strip_prefix("#table:") {
                Some(name) if valid_key(name.trim()) => Segment::Table(name.trim().to_string()),
                None if valid_key(inner) => Segment::Key(inner.to_string()),
                _ => {
                    return Err(ReportError::Template(format!(
                        "line {}: malformed placeholder '{{{{{}}}}}'",
                        line_of(&rest[start..]),
                        &after[..end]
                    )))
                }
            };
            let (Segment::Key(k) | Segment::Table(k)) = &seg else { unreachable!() };
            if !required.contains(k) {
                required.push(k.clone());
            }
            segments.push(seg);
            rest = &after[end + 2..];
        }
        if !rest.is_empty() {
            segments.push(Segment::Literal(rest.to_string()));
        }
        Ok(Self { body: body.to_string(), segments, required_keys: required })
    }

    /// Shipped template summarising a model catalogue.
    pub fn default_catalogue() -> Self {
        Self::parse(CATALOGUE_TEMPLATE).expect("shipped template parses")
    }

    /// Shipped study summary template (sample description plus models).
    pub fn default_study_summary() -> Self {
        Self::parse(STUDY_SUMMARY_TEMPLATE).expect("shipped template parses")
    }

    pub fn by_name(name: &str) -> Result<Self, ReportError> {
        match name {
            "catalogue" => Ok(Self::default_catalogue()),
            "study_summary" => Ok(Self::default_study_summary()),
            _ => Err(ReportError::Template(format!("no default template '{name}'; expected catalogue or study_summary"))),
        }
    }

    pub fn body(&self) -> &str {
        &self.body
    }

    /// Placeholder and table names, in order of first use.
    pub fn required_keys(&self) -> &[String] {
        &self.required_keys
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rendered {
    pub text: String,
    /// Context keys the template never used.
    pub warnings: Vec<String>,
}

fn cell(s: &str) -> String {
    s.replace('|', "\\|").replace('\n', " ")
}

/// Pipe-delimited Markdown table: header, rule, one line per row.
pub fn markdown_table(columns: &[String], rows: &[Vec<String>]) -> String {
    let line = |cells: &[String]| format!("| {} |", cells.iter().map(|c| cell(c)).collect::<Vec<_>>().join(" | "));
    let mut out = vec![line(columns), format!("|{}|", vec![" --- "; columns.len()].join("|"))];
    out.extend(rows.iter().map(|r| line(r)));
    out.join("\n")
}

pub fn render_template(t: &ReportTemplate, ctx: &RenderContext) -> Result<Rendered, ReportError> {
    let missing: Vec<String> = t.required_keys.iter().filter(|k| !ctx.values.contains_key(*k)).cloned().collect();
    if !missing.is_empty() {
        return Err(ReportError::MissingKeys(missing));
    }
    let mut text = String::with_capacity(t.body.len());
    for seg in &t.segments {
        match seg {
            Segment::Literal(s) => text.push_str(s),
            Segment::Key(k) => match &ctx.values[k] {
                RenderValue::Text(s) => text.push_str(s),
                RenderValue::Number(x) => text.push_str(&x.to_string()),
                RenderValue::Table { .. } => {
                    return Err(ReportError::Template(format!("'{k}' is a table; use {{{{#table:{k}}}}}")))
                }
            },
            Segment::Table(k) => match &ctx.values[k] {
                RenderValue::Table { columns, rows } => {
                    if let Some(r) = rows.iter().find(|r| r.len() != columns.len()) {
                        return Err(ReportError::Template(format!(
                            "table '{k}': row has {} cells, header has {}",
                            r.len(),
                            columns.len()
                        )));
                    }
                    text.push_str(&markdown_table(columns, rows));
                }
                _ => return Err(ReportError::Template(format!("'{k}' is not a table"))),
            },
        }
    }
    let warnings = ctx
        .values
        .keys()
        .filter(|k| !t.required_keys.contains(k))
        .map(|k| format!("unused key: {k}"))
        .collect();
    Ok(Rendered { text, warnings })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn substitution() {
        let t = ReportTemplate::parse("Study: {{title}}").unwrap();
        let mut ctx = RenderContext::new();
        ctx.text("title", "X");
        assert_eq!(render_template(&t, &ctx).unwrap().text, "Study: X");
    }

    #[test]
    fn missing_keys_are_listed() {
        let t = ReportTemplate::parse("{{a}} and {{b}} and {{#table:c}}").unwrap();
        assert_eq!(t.required_keys(), ["a", "b", "c"]);
        let mut ctx = RenderContext::new();
        ctx.number("a", 1.0);
        assert_eq!(render_template(&t, &ctx).unwrap_err().to_string(), "missing keys: b, c");
    }

    #[test]
    fn unused_keys_warn() {
        let t = ReportTemplate::parse("{{a}}").unwrap();
        let mut ctx = RenderContext::new();
        ctx.number("a", 1.5).text("z", "spare");
        let r = render_template(&t, &ctx).unwrap();
        assert_eq!(r.text, "1.5");
        assert_eq!(r.warnings, vec!["unused key: z".to_string()]);
    }

    #[test]
    fn two_by_two_table() {
        let t = ReportTemplate::parse("{{#table:t}}").unwrap();
        let mut ctx = RenderContext::new();
        ctx.table("t", &["a", "b"], vec![vec!["1".into(), "2".into()], vec!["3".into(), "x|y".into()]]);
        let text = render_template(&t, &ctx).unwrap().text;
        assert_eq!(text, "| a | b |\n| --- | --- |\n| 1 | 2 |\n| 3 | x\\|y |");
        assert_eq!(text.lines().count(), 4);
    }

    #[test]
    fn malformed_placeholders() {
        assert!(ReportTemplate::parse("ok {{bad key}}").is_err());
        assert!(ReportTemplate::parse("line\n{{open").unwrap_err().to_string().contains("line 2"));
        assert!(ReportTemplate::parse("{{#table:}}").is_err());
    }

    #[test]
    fn defaults_parse() {
        assert!(ReportTemplate::default_catalogue().required_keys().contains(&"performance".to_string()));
        assert!(ReportTemplate::default_study_summary().required_keys().contains(&"variables".to_string()));
    }
}
