//! JSON and CSV report writers.
//!
//! Every float is printed as `{:.16e}` (17 significant digits) in both
//! formats, so repeated runs are byte-identical and the two formats carry the
//! same numeric text.

use std::io;

use serde_json::ser::{Formatter, PrettyFormatter};
use serde_json::{Map, Value};

use crate::conformal::ResidualReport;

pub const SCHEMA_VERSION: u64 = 1;

/// Fixed float notation shared by JSON and CSV output.
pub fn format_float(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        "null".to_string()
    }
}

struct FixedFloat<'a> {
    inner: PrettyFormatter<'a>,
}

impl Formatter for FixedFloat<'_> {
    fn write_f64<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        writer.write_all(format_float(value).as_bytes())
    }
    fn write_f32<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, f64::from(value))
    }
    fn begin_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.begin_array(w)
    }
    fn end_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_array(w)
    }
    fn begin_array_value<W: ?Sized + io::Write>(
        &mut self,
        w: &mut W,
        first: bool,
    ) -> io::Result<()> {
        self.inner.begin_array_value(w, first)
    }
    fn end_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_array_value(w)
    }
    fn begin_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.begin_object(w)
    }
    fn end_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_object(w)
    }
    fn begin_object_key<W: ?Sized + io::Write>(
        &mut self,
        w: &mut W,
        first: bool,
    ) -> io::Result<()> {
        self.inner.begin_object_key(w, first)
    }
    fn end_object_key<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_object_key(w)
    }
    fn begin_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.begin_object_value(w)
    }
    fn end_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_object_value(w)
    }
}

/// One cell of a per-point table.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(u64),
    Bool(bool),
    Text(String),
}

impl Cell {
    fn to_value(&self) -> Value {
        match self {
            Cell::Num(v) => num(*v),
            Cell::Int(v) => Value::from(*v),
            Cell::Bool(b) => Value::Bool(*b),
            Cell::Text(s) => Value::String(s.clone()),
        }
    }

    fn to_csv(&self) -> String {
        match self {
            Cell::Num(v) => format_float(*v),
            Cell::Int(v) => v.to_string(),
            Cell::Bool(b) => b.to_string(),
            Cell::Text(s) => csv_escape(s),
        }
    }
}

fn csv_escape(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// A JSON number, or `null` for non-finite values.
pub fn num(v: f64) -> Value {
    serde_json::Number::from_f64(v).map_or(Value::Null, Value::Number)
}

pub fn nums(vs: &[f64]) -> Value {
    Value::Array(vs.iter().map(|v| num(*v)).collect())
}

/// Per-point rows; a vector-valued quantity `p` becomes columns `p1, p2, …`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    columns: Vec<String>,
    /// `(name, width)` groups used to rebuild arrays for JSON.
    groups: Vec<(String, usize)>,
    rows: Vec<Vec<Cell>>,
}

impl Table {
    /// `groups` lists `(name, width)`; width 0 marks a scalar column.
    pub fn new(groups: &[(&str, usize)]) -> Self {
        let mut columns = Vec::new();
        for (name, width) in groups {
            if *width == 0 {
                columns.push(name.to_string());
            } else {
                columns.extend((1..=*width).map(|i| format!("{name}{i}")));
            }
        }
        Table {
            columns,
            groups: groups.iter().map(|(n, w)| (n.to_string(), *w)).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width");
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    fn to_json(&self) -> Value {
        let rows = self
            .rows
            .iter()
            .map(|row| {
                let mut obj = Map::new();
                let mut at = 0;
                for (name, width) in &self.groups {
                    if *width == 0 {
                        obj.insert(name.clone(), row[at].to_value());
                        at += 1;
                    } else {
                        let vals = row[at..at + width].iter().map(Cell::to_value).collect();
                        obj.insert(name.clone(), Value::Array(vals));
                        at += width;
                    }
                }
                Value::Object(obj)
            })
            .collect();
        Value::Array(rows)
    }
}

/// A report: metadata and aggregates in `header`, optional per-point table.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    header: Map<String, Value>,
    table: Option<Table>,
}

impl Report {
    pub fn new(command: &str) -> Self {
        let mut header = Map::new();
        header.insert("schema".into(), Value::from(SCHEMA_VERSION));
        header.insert("command".into(), Value::from(command));
        Report {
            header,
            table: None,
        }
    }

    pub fn set(&mut self, key: &str, value: Value) -> &mut Self {
        self.header.insert(key.to_string(), value);
        self
    }

    pub fn header(&self) -> &Map<String, Value> {
        &self.header
    }

    pub fn with_table(&mut self, table: Table) -> &mut Self {
        self.table = Some(table);
        self
    }

    pub fn table(&self) -> Option<&Table> {
        self.table.as_ref()
    }

    pub fn to_json(&self) -> String {
        let mut root = self.header.clone();
        if let Some(t) = &self.table {
            root.insert("points".into(), t.to_json());
        }
        let mut out = Vec::new();
        let mut ser = serde_json::Serializer::with_formatter(
            &mut out,
            FixedFloat {
                inner: PrettyFormatter::with_indent(b"  "),
            },
        );
        serde::Serialize::serialize(&Value::Object(root), &mut ser)
            .expect("serializing a Value cannot fail");
        out.push(b'\n');
        String::from_utf8(out).expect("JSON output is UTF-8")
    }

    /// Header entries become `# key,value` comment lines (nested values are
    /// flattened with dotted keys), followed by the table.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let mut flat = Vec::new();
        flatten("", &Value::Object(self.header.clone()), &mut flat);
        for (k, v) in flat {
            out.push_str(&format!("# {k},{v}\n"));
        }
        if let Some(t) = &self.table {
            out.push_str(&t.columns.join(","));
            out.push('\n');
            for row in &t.rows {
                let cells: Vec<String> = row.iter().map(Cell::to_csv).collect();
                out.push_str(&cells.join(","));
                out.push('\n');
            }
        }
        out
    }
}

fn scalar_text(v: &Value) -> String {
    match v {
        Value::Null => "null".into(),
        Value::Bool(b) => b.to_string(),
        Value::Number(n) => match n.as_f64() {
            Some(f) if n.is_f64() => format_float(f),
            _ => n.to_string(),
        },
        // Header lines stay single-line.
        Value::String(s) => csv_escape(&s.replace('\n', "\\n")),
        _ => unreachable!("containers are flattened"),
    }
}

fn flatten(prefix: &str, v: &Value, out: &mut Vec<(String, String)>) {
    let key = |k: &str| {
        if prefix.is_empty() {
            k.to_string()
        } else {
            format!("{prefix}.{k}")
        }
    };
    match v {
        Value::Object(m) => {
            for (k, v) in m {
                flatten(&key(k), v, out);
            }
        }
        Value::Array(items) => {
            for (i, v) in items.iter().enumerate() {
                flatten(&key(&(i + 1).to_string()), v, out);
            }
        }
        other => out.push((prefix.to_string(), scalar_text(other))),
    }
}

/// Fills a report from a grid residual report.
pub fn residual_report(report: &mut Report, r: &ResidualReport, tol: f64) {
    let g = &r.grid;
    let mut grid = Map::new();
    grid.insert("spec".into(), Value::from(g.to_string()));
    grid.insert("lo".into(), nums(g.lo()));
    grid.insert("hi".into(), nums(g.hi()));
    grid.insert(
        "resolution".into(),
        Value::Array(
            g.resolution()
                .iter()
                .map(|v| Value::from(*v as u64))
                .collect(),
        ),
    );
    grid.insert(
        "exclusion".into(),
        g.exclusion()
            .map_or(Value::Null, |e| Value::from(e.expr.to_string())),
    );
    report.set("grid", Value::Object(grid));

    let mut agg = Map::new();
    agg.insert("points".into(), Value::from(r.records.len() as u64));
    agg.insert("max_residual".into(), num(r.max_residual));
    agg.insert("rms_residual".into(), num(r.rms_residual));
    agg.insert(
        "degenerate_points".into(),
        Value::from(r.degenerate_points as u64),
    );
    let mut skipped = Map::new();
    skipped.insert("total".into(), Value::from(r.skipped.total() as u64));
    skipped.insert("excluded".into(), Value::from(r.skipped.excluded as u64));
    skipped.insert("domain".into(), Value::from(r.skipped.domain as u64));
    skipped.insert("singular".into(), Value::from(r.skipped.singular as u64));
    skipped.insert(
        "no_convergence".into(),
        Value::from(r.skipped.no_convergence as u64),
    );
    agg.insert("skipped".into(), Value::Object(skipped));
    agg.insert(
        "gradient_defect".into(),
        r.gradient_defect.map_or(Value::Null, num),
    );
    let prop = r.proportionality.map_or(Value::Null, |p| {
        let mut m = Map::new();
        m.insert("c".into(), num(p.c));
        m.insert("relative_residual".into(), num(p.relative_residual));
        Value::Object(m)
    });
    agg.insert("proportionality".into(), prop);
    report.set("aggregates", Value::Object(agg));
    report.set("tolerance", num(tol));
    report.set("passed", Value::Bool(r.passes(tol)));

    let n = g.dim();
    let mut table = Table::new(&[
        ("index", 0),
        ("x", n),
        ("p", n),
        ("s", n),
        ("residual", 0),
        ("degenerate", 0),
    ]);
    for rec in &r.records {
        let mut row = vec![Cell::Int(rec.index as u64)];
        row.extend(rec.point.iter().map(|v| Cell::Num(*v)));
        row.extend(rec.p.iter().map(|v| Cell::Num(*v)));
        row.extend(rec.s.iter().map(|v| Cell::Num(*v)));
        row.push(Cell::Num(rec.residual));
        row.push(Cell::Bool(rec.degenerate));
        table.push(row);
    }
    report.with_table(table);
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Report {
        let mut r = Report::new("demo");
        r.set("value", num(0.1))
            .set("nan", num(f64::NAN))
            .set("nested", nums(&[1.0, -2.5e-7]));
        let mut t = Table::new(&[("index", 0), ("x", 2), ("ok", 0)]);
        t.push(vec![
            Cell::Int(0),
            Cell::Num(1.0 / 3.0),
            Cell::Num(-0.0),
            Cell::Bool(true),
        ]);
        r.with_table(t);
        r
    }

    #[test]
    fn floats_use_seventeen_digits() {
        assert_eq!(format_float(0.1), "1.0000000000000001e-1");
        assert_eq!(format_float(1.0), "1.0000000000000000e0");
        let json = sample().to_json();
        assert!(json.contains("\"value\": 1.0000000000000001e-1"));
        assert!(json.contains("\"nan\": null"));
        assert!(json.contains("3.3333333333333331e-1"));
        let parsed: Value = serde_json::from_str(&json).unwrap();
        assert_eq!(parsed["schema"], 1);
        assert_eq!(parsed["points"][0]["x"][0].as_f64().unwrap(), 1.0 / 3.0);
    }

    #[test]
    fn csv_carries_the_same_numbers() {
        let r = sample();
        let csv = r.to_csv();
        assert!(csv.contains("# value,1.0000000000000001e-1\n"));
        assert!(
            csv.contains("# nested.2,-2.5000000000000002e-7\n")
                || csv.contains("# nested.2,-2.4999999999999999e-7\n")
        );
        assert!(
            csv.contains("index,x1,x2,ok\n0,3.3333333333333331e-1,-0.0000000000000000e0,true\n")
        );
        let json = r.to_json();
        for line in csv.lines().filter(|l| l.starts_with("# ")) {
            let v = line.split_once(',').unwrap().1;
            if v.contains('e') {
                assert!(json.contains(v), "{v}");
            }
        }
    }

    #[test]
    fn output_is_deterministic() {
        assert_eq!(sample().to_json(), sample().to_json());
        assert_eq!(sample().to_csv(), sample().to_csv());
    }
}
