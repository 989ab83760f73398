//! Report tree and its two renderings.
//!
//! The machine form is JSON with a fixed layout: two-space indentation, one
//! field per line, vectors on a single line and matrices one row per line.
//! Numbers go through [`format_number`] at the report's precision, so
//! parsing a machine report and emitting it again gives identical bytes.

use std::fmt::Write as _;

use serde_json::Value;

use crate::error::CliError;
use crate::number::{format_number, MAX_PRECISION};

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Int(u64),
    Num(f64),
    Text(String),
    List(Vec<Node>),
    Object(Vec<(String, Node)>),
}

impl Node {
    pub fn vector(values: impl IntoIterator<Item = f64>) -> Node {
        Node::List(values.into_iter().map(Node::Num).collect())
    }

    pub fn matrix(rows: &[Vec<f64>]) -> Node {
        Node::List(rows.iter().map(|row| Node::vector(row.iter().copied())).collect())
    }

    pub fn text(s: impl Into<String>) -> Node {
        Node::Text(s.into())
    }

    pub fn object(fields: Vec<(&str, Node)>) -> Node {
        Node::Object(fields.into_iter().map(|(k, v)| (k.to_string(), v)).collect())
    }

    fn is_scalar(&self) -> bool {
        matches!(self, Node::Int(_) | Node::Num(_) | Node::Text(_))
    }

    fn is_flat_list(&self) -> bool {
        matches!(self, Node::List(items) if items.iter().all(Node::is_scalar))
    }

    fn is_matrix(&self) -> bool {
        matches!(self, Node::List(items) if !items.is_empty() && items.iter().all(Node::is_flat_list))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    precision: usize,
    fields: Vec<(String, Node)>,
}

impl Report {
    /// Starts a report with its `kind` and `precision` fields.
    pub fn new(kind: &str, precision: usize) -> Self {
        Report {
            precision,
            fields: vec![
                ("kind".to_string(), Node::text(kind)),
                ("precision".to_string(), Node::Int(precision as u64)),
            ],
        }
    }

    pub fn push(&mut self, key: &str, value: Node) {
        self.fields.push((key.to_string(), value));
    }

    pub fn precision(&self) -> usize {
        self.precision
    }

    pub fn fields(&self) -> &[(String, Node)] {
        &self.fields
    }

    pub fn get(&self, key: &str) -> Option<&Node> {
        self.fields.iter().find(|(k, _)| k == key).map(|(_, v)| v)
    }

    pub fn to_machine(&self) -> String {
        let mut out = String::new();
        write_object(&mut out, &self.fields, 0, self.precision);
        out.push('\n');
        out
    }

    pub fn parse_machine(text: &str) -> Result<Report, CliError> {
        let value: Value = serde_json::from_str(text)
            .map_err(|e| CliError::validation("report", Some(e.line()), e.to_string()))?;
        let Node::Object(fields) = from_value(value)? else {
            return Err(CliError::validation("report", Some(1), "a report is a JSON object"));
        };
        let precision = match fields.iter().find(|(k, _)| k == "precision") {
            Some((_, Node::Int(p))) if (1..=MAX_PRECISION as u64).contains(p) => *p as usize,
            _ => {
                return Err(CliError::validation(
                    "precision",
                    None,
                    format!("reports carry an integer precision between 1 and {MAX_PRECISION}"),
                ))
            }
        };
        Ok(Report { precision, fields })
    }

    pub fn to_human(&self) -> String {
        let mut out = String::new();
        let kind = match self.get("kind") {
            Some(Node::Text(k)) => k.as_str(),
            _ => "",
        };
        let _ = writeln!(out, "errvar {kind} report");
        let width = self
            .fields
            .iter()
            .filter(|(k, v)| v.is_scalar() && k != "kind" && k != "precision")
            .map(|(k, _)| k.len())
            .max()
            .unwrap_or(0);
        let mut warnings = Vec::new();
        for (key, value) in &self.fields {
            if key == "kind" || key == "precision" {
                continue;
            }
            if key == "warnings" {
                if let Node::List(items) = value {
                    warnings.extend(items.iter().map(|w| scalar(w, self.precision)));
                }
                continue;
            }
            human_field(&mut out, key, value, 0, width, self.precision);
        }
        for w in warnings {
            let _ = writeln!(out, "warning: {w}");
        }
        out
    }
}

fn from_value(value: Value) -> Result<Node, CliError> {
    Ok(match value {
        Value::Number(n) => match n.as_u64() {
            Some(i) => Node::Int(i),
            None => Node::Num(n.as_f64().unwrap_or(f64::NAN)),
        },
        Value::String(s) => Node::Text(s),
        Value::Array(items) => Node::List(items.into_iter().map(from_value).collect::<Result<_, _>>()?),
        Value::Object(map) => Node::Object(
            map.into_iter()
                .map(|(k, v)| Ok((k, from_value(v)?)))
                .collect::<Result<_, CliError>>()?,
        ),
        Value::Null | Value::Bool(_) => {
            return Err(CliError::validation("report", None, "reports contain only numbers, strings, arrays and objects"))
        }
    })
}

fn quote(s: &str) -> String {
    serde_json::to_string(s).expect("strings always serialize")
}

fn json_scalar(node: &Node, precision: usize) -> String {
    match node {
        Node::Int(i) => i.to_string(),
        Node::Num(x) if x.is_finite() => format_number(*x, precision),
        Node::Num(x) => quote(&format_number(*x, precision)),
        Node::Text(s) => quote(s),
        _ => unreachable!("not a scalar"),
    }
}

fn indent(out: &mut String, level: usize) {
    for _ in 0..level {
        out.push_str("  ");
    }
}

fn write_inline_list(out: &mut String, items: &[Node], precision: usize) {
    out.push('[');
    for (i, item) in items.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        out.push_str(&json_scalar(item, precision));
    }
    out.push(']');
}

fn write_value(out: &mut String, value: &Node, level: usize, precision: usize) {
    match value {
        Node::Object(fields) => write_object(out, fields, level, precision),
        Node::List(items) if items.is_empty() => out.push_str("[]"),
        Node::List(items) if value.is_flat_list() => write_inline_list(out, items, precision),
        Node::List(items) => {
            out.push_str("[\n");
            for (i, item) in items.iter().enumerate() {
                indent(out, level + 1);
                write_value(out, item, level + 1, precision);
                if i + 1 < items.len() {
                    out.push(',');
                }
                out.push('\n');
            }
            indent(out, level);
            out.push(']');
        }
        scalar => out.push_str(&json_scalar(scalar, precision)),
    }
}

fn write_object(out: &mut String, fields: &[(String, Node)], level: usize, precision: usize) {
    if fields.is_empty() {
        out.push_str("{}");
        return;
    }
    out.push_str("{\n");
    for (i, (key, value)) in fields.iter().enumerate() {
        indent(out, level + 1);
        out.push_str(&quote(key));
        out.push_str(": ");
        write_value(out, value, level + 1, precision);
        if i + 1 < fields.len() {
            out.push(',');
        }
        out.push('\n');
    }
    indent(out, level);
    out.push('}');
}

fn scalar(node: &Node, precision: usize) -> String {
    match node {
        Node::Int(i) => i.to_string(),
        Node::Num(x) => format_number(*x, precision),
        Node::Text(s) => s.clone(),
        other => {
            let mut s = String::new();
            write_value(&mut s, other, 0, precision);
            s
        }
    }
}

fn human_field(out: &mut String, key: &str, value: &Node, level: usize, width: usize, precision: usize) {
    let pad = "  ".repeat(level);
    match value {
        v if v.is_scalar() => {
            let _ = writeln!(out, "{pad}{key:<width$}  {}", scalar(v, precision));
        }
        Node::List(items) if items.is_empty() => {
            let _ = writeln!(out, "{pad}{key}: (none)");
        }
        v if v.is_matrix() => {
            let _ = writeln!(out, "{pad}{key}:");
            let Node::List(rows) = v else { unreachable!() };
            let cells: Vec<Vec<String>> = rows
                .iter()
                .map(|r| match r {
                    Node::List(items) => items.iter().map(|c| scalar(c, precision)).collect(),
                    _ => Vec::new(),
                })
                .collect();
            let cell_width = cells.iter().flatten().map(String::len).max().unwrap_or(0);
            for row in cells {
                let line: Vec<String> = row.iter().map(|c| format!("{c:>cell_width$}")).collect();
                let _ = writeln!(out, "{pad}  {}", line.join("  "));
            }
        }
        Node::List(items) if value.is_flat_list() => {
            let _ = writeln!(out, "{pad}{key}:");
            let cells: Vec<String> = items.iter().map(|c| scalar(c, precision)).collect();
            let cell_width = cells.iter().map(String::len).max().unwrap_or(0);
            let index_width = items.len().to_string().len();
            for (i, c) in cells.iter().enumerate() {
                let _ = writeln!(out, "{pad}  [{:>index_width$}]  {c:>cell_width$}", i + 1);
            }
        }
        Node::List(items) => {
            let _ = writeln!(out, "{pad}{key}:");
            for (i, item) in items.iter().enumerate() {
                human_field(out, &format!("[{}]", i + 1), item, level + 1, 0, precision);
            }
        }
        Node::Object(fields) => {
            let _ = writeln!(out, "{pad}{key}:");
            let inner = fields
                .iter()
                .filter(|(_, v)| v.is_scalar())
                .map(|(k, _)| k.len())
                .max()
                .unwrap_or(0);
            for (k, v) in fields {
                human_field(out, k, v, level + 1, inner, precision);
            }
        }
        _ => unreachable!("all node shapes handled"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_with(warnings: Vec<Node>) -> Report {
        let mut r = Report::new("adjust", 9);
        r.push("measured_values", Node::vector([1.0, 2.0, 3.0]));
        r.push("sigma_unit", Node::Num(0.1 + 0.2));
        r.push("degrees_of_freedom", Node::Int(3));
        r.push("cofactor", Node::matrix(&[vec![0.4, -0.1], vec![-0.1, 0.4]]));
        r.push("density", Node::vector([f64::INFINITY, 0.5]));
        r.push("units", Node::object(vec![("observations", Node::text("µΩ \"ref\""))]));
        r.push("warnings", Node::List(warnings));
        r
    }

    fn sample() -> Report {
        sample_with(Vec::new())
    }

    #[test]
    fn machine_layout() {
        let text = sample().to_machine();
        assert!(text.contains("\"measured_values\": [1, 2, 3],"));
        assert!(text.contains("\"sigma_unit\": 0.3,"));
        assert!(text.contains("\"cofactor\": [\n    [0.4, -0.1],\n    [-0.1, 0.4]\n  ],"));
        assert!(text.contains("\"density\": [\"inf\", 0.5]"));
        assert!(text.contains("\"warnings\": []\n}"));
    }

    #[test]
    fn round_trip_is_byte_identical() {
        let text = sample().to_machine();
        let again = Report::parse_machine(&text).unwrap().to_machine();
        assert_eq!(text, again);
    }

    #[test]
    fn human_lists_warnings_last() {
        let text = sample_with(vec![Node::text("low degrees of freedom")]).to_human();
        assert!(text.starts_with("errvar adjust report\n"));
        assert!(text.trim_end().ends_with("warning: low degrees of freedom"));
    }
}
