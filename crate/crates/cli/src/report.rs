//! Table output as CSV or JSON lines.
//!
//! CSV: `# key=value` lines echoing the resolved configuration, a header
//! row, data rows, then `# summary key=value ...` trailer lines. Floats use
//! 17 significant digits in scientific notation.
//!
//! JSON lines: `{"config":{...}}`, one object per row, then
//! `{"summary":{...}}` per trailer.

use serde_json::{Map, Value};

use crate::CliError;

#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Float(f64),
    Int(i64),
    Bool(bool),
    Text(String),
    Empty,
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Float(x) => format_float(*x),
            Cell::Int(i) => i.to_string(),
            Cell::Bool(b) => b.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Empty => String::new(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Float(x) => serde_json::Number::from_f64(*x)
                .map(Value::Number)
                .unwrap_or(Value::Null),
            Cell::Int(i) => Value::from(*i),
            Cell::Bool(b) => Value::Bool(*b),
            Cell::Text(s) => Value::String(s.clone()),
            Cell::Empty => Value::Null,
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Float(x)
    }
}

impl From<usize> for Cell {
    fn from(x: usize) -> Self {
        Cell::Int(x as i64)
    }
}

impl From<bool> for Cell {
    fn from(b: bool) -> Self {
        Cell::Bool(b)
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.to_string())
    }
}

impl From<String> for Cell {
    fn from(s: String) -> Self {
        Cell::Text(s)
    }
}

impl<T: Into<Cell>> From<Option<T>> for Cell {
    fn from(v: Option<T>) -> Self {
        v.map(Into::into).unwrap_or(Cell::Empty)
    }
}

pub fn format_float(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        x.to_string()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Clone, Debug)]
pub struct Report {
    pub config: Vec<(String, String)>,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
    pub summaries: Vec<Vec<(&'static str, Cell)>>,
}

impl Report {
    pub fn new(config: Vec<(String, String)>, columns: &[&'static str]) -> Self {
        Self {
            config,
            columns: columns.to_vec(),
            rows: Vec::new(),
            summaries: Vec::new(),
        }
    }

    pub fn push_row(&mut self, row: Vec<Cell>) {
        assert_eq!(
            row.len(),
            self.columns.len(),
            "row width must match the header"
        );
        self.rows.push(row);
    }

    pub fn push_summary(&mut self, fields: Vec<(&'static str, Cell)>) {
        self.summaries.push(fields);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| *c == name)
    }

    pub fn render(&self, format: Format) -> Result<String, CliError> {
        match format {
            Format::Csv => self.render_csv(),
            Format::Json => self.render_json(),
        }
    }

    fn render_csv(&self) -> Result<String, CliError> {
        let mut out = String::new();
        for (k, v) in &self.config {
            out.push_str(&format!("# {k}={v}\n"));
        }
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        w.write_record(&self.columns).map_err(csv_error)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::csv))
                .map_err(csv_error)?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::Io(e.into_error()))?;
        out.push_str(std::str::from_utf8(&bytes).expect("csv writer emits utf-8"));
        for fields in &self.summaries {
            out.push_str("# summary");
            for (k, v) in fields {
                out.push_str(&format!(" {k}={}", v.csv()));
            }
            out.push('\n');
        }
        Ok(out)
    }

    fn render_json(&self) -> Result<String, CliError> {
        let mut out = String::new();
        let config: Map<String, Value> = self
            .config
            .iter()
            .map(|(k, v)| (k.clone(), Value::String(v.clone())))
            .collect();
        push_json_line(
            &mut out,
            Value::Object(Map::from_iter([(
                "config".to_string(),
                Value::Object(config),
            )])),
        );
        for row in &self.rows {
            let obj: Map<String, Value> = self
                .columns
                .iter()
                .zip(row)
                .map(|(c, v)| (c.to_string(), v.json()))
                .collect();
            push_json_line(&mut out, Value::Object(obj));
        }
        for fields in &self.summaries {
            let obj: Map<String, Value> = fields
                .iter()
                .map(|(k, v)| (k.to_string(), v.json()))
                .collect();
            push_json_line(
                &mut out,
                Value::Object(Map::from_iter([(
                    "summary".to_string(),
                    Value::Object(obj),
                )])),
            );
        }
        Ok(out)
    }
}

fn push_json_line(out: &mut String, v: Value) {
    out.push_str(&v.to_string());
    out.push('\n');
}

fn csv_error(e: csv::Error) -> CliError {
    CliError::Io(std::io::Error::other(e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Report {
        let mut r = Report::new(vec![("command".into(), "epr".into())], &["name", "p", "n"]);
        r.push_row(vec!["a,b".into(), 0.25.into(), 3usize.into()]);
        r.push_row(vec!["c".into(), Cell::Empty, Cell::Int(-1)]);
        r.push_summary(vec![("ok", true.into())]);
        r
    }

    #[test]
    fn float_has_seventeen_significant_digits() {
        assert_eq!(format_float(0.25), "2.5000000000000000e-1");
        let s = format_float(std::f64::consts::PI);
        let mantissa: String = s
            .split('e')
            .next()
            .unwrap()
            .chars()
            .filter(char::is_ascii_digit)
            .collect();
        assert_eq!(mantissa.len(), 17);
        assert_eq!(s.parse::<f64>().unwrap(), std::f64::consts::PI);
    }

    #[test]
    fn csv_layout() {
        let text = sample().render(Format::Csv).unwrap();
        assert_eq!(
            text,
            "# command=epr\nname,p,n\n\"a,b\",2.5000000000000000e-1,3\nc,,-1\n# summary ok=true\n"
        );
    }

    #[test]
    fn json_lines_layout() {
        let text = sample().render(Format::Json).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], r#"{"config":{"command":"epr"}}"#);
        assert_eq!(lines[1], r#"{"name":"a,b","p":0.25,"n":3}"#);
        assert_eq!(lines[2], r#"{"name":"c","p":null,"n":-1}"#);
        assert_eq!(lines[3], r#"{"summary":{"ok":true}}"#);
    }
}
