//! Command output: a JSON document plus an optional table for CSV.

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::args::Format;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Table {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub body: Value,
    pub table: Table,
    pub seed: Option<u64>,
    /// Extra `key=value` pairs for the CSV metadata line.
    pub meta: Vec<(String, String)>,
    /// Property violations (for `verify`).
    pub violations: usize,
}

impl Report {
    pub fn csv(body: Value, table: Table, seed: Option<u64>) -> Self {
        Report {
            body,
            table,
            seed,
            meta: Vec::new(),
            violations: 0,
        }
    }

    pub fn with_meta(mut self, key: &str, value: impl ToString) -> Self {
        self.meta.push((key.to_string(), value.to_string()));
        self
    }

    pub fn render(&self, format: Option<Format>) -> String {
        match format {
            Some(Format::Json) => self.render_json(),
            Some(Format::Csv) | None => self.render_csv(&self.table),
        }
    }

    fn render_json(&self) -> String {
        let doc = json!({
            "seed": self.seed,
            "version": lelong_core::VERSION,
            "result": self.body,
        });
        let mut s = serde_json::to_string_pretty(&doc).expect("serializable");
        s.push('\n');
        s
    }

    fn render_csv(&self, t: &Table) -> String {
        let mut s = t.header.join(",");
        s.push('\n');
        for row in &t.rows {
            let cells: Vec<String> = row.iter().map(|c| escape(c)).collect();
            s.push_str(&cells.join(","));
            s.push('\n');
        }
        let seed = self.seed.map_or("none".to_string(), |x| x.to_string());
        s.push_str(&format!("# seed={seed} version={}", lelong_core::VERSION));
        for (k, v) in &self.meta {
            s.push_str(&format!(" {k}={v}"));
        }
        s.push('\n');
        s
    }
}

fn escape(c: &str) -> String {
    if c.contains([',', '"', '\n']) {
        format!("\"{}\"", c.replace('"', "\"\""))
    } else {
        c.to_string()
    }
}

/// Shortest round-trip representation; `inf`, `-inf`, `nan` spelled out.
pub fn num(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{x}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_has_header_and_trailing_meta() {
        let mut t = Table::new(&["a", "b"]);
        t.push(vec!["1".into(), "x,y".into()]);
        let r = Report::csv(json!({}), t, Some(7)).with_meta("nu", 0.5);
        let out = r.render(None);
        let lines: Vec<&str> = out.lines().collect();
        assert_eq!(lines[0], "a,b");
        assert_eq!(lines[1], "1,\"x,y\"");
        assert!(lines[2].starts_with("# seed=7 version="));
        assert!(lines[2].ends_with("nu=0.5"));
    }

    #[test]
    fn json_carries_seed() {
        let r = Report::csv(json!({"x": 1}), Table::new(&["x"]), None);
        let v: Value = serde_json::from_str(&r.render(Some(Format::Json))).unwrap();
        assert!(v.get("seed").unwrap().is_null());
        assert_eq!(v["result"]["x"], 1);
    }

    #[test]
    fn numbers() {
        assert_eq!(num(0.1), "0.1");
        assert_eq!(num(f64::INFINITY), "inf");
        assert_eq!(num(2.0), "2");
    }
}
