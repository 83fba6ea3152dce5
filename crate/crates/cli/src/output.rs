//! Delimited output with a `#`-prefixed metadata header.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::CliError;

#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

/// Shortest round-trip decimal, switching to exponent form for very large
/// or small magnitudes.
pub fn format_num(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    if !v.is_finite() {
        return format!("{v}");
    }
    let a = v.abs();
    if (1e-4..1e9).contains(&a) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Num(v) => format_num(*v),
            Cell::Int(i) => i.to_string(),
            Cell::Text(s) => s.clone(),
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Cell::Num(v) => Some(*v),
            Cell::Int(i) => Some(*i as f64),
            Cell::Text(_) => None,
        }
    }
}

/// One output file.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    /// File stem.
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
    /// Derived quantities reported in the header, in insertion order.
    pub notes: Vec<(String, String)>,
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Self {
            name: name.into(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            ..Default::default()
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn note(&mut self, key: &str, value: impl ToString) {
        self.notes.push((key.into(), value.to_string()));
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.columns.iter().position(|c| c == name)?;
        self.rows.iter().map(|r| r[k].as_f64()).collect()
    }

    /// Column header and rows, comma separated.
    pub fn data_section(&self) -> String {
        let mut s = self.columns.join(",");
        s.push('\n');
        for r in &self.rows {
            let line: Vec<String> = r.iter().map(Cell::render).collect();
            s.push_str(&line.join(","));
            s.push('\n');
        }
        s
    }
}

/// Run-level metadata shared by every file of one invocation.
#[derive(Clone, Debug)]
pub struct Metadata {
    pub command: String,
    pub seed: u64,
    pub scenario_source: String,
    pub layout_source: String,
    pub layout_sha256: String,
    /// Resolved scenario TOML.
    pub scenario: String,
}

pub fn render(table: &Table, meta: &Metadata) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# surftrap {}", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(s, "# command: {}", meta.command);
    let _ = writeln!(s, "# seed: {}", meta.seed);
    let _ = writeln!(s, "# scenario_source: {}", meta.scenario_source);
    let _ = writeln!(
        s,
        "# layout: {} sha256={}",
        meta.layout_source, meta.layout_sha256
    );
    for (k, v) in &table.notes {
        let _ = writeln!(s, "# {k}: {v}");
    }
    let _ = writeln!(s, "# scenario:");
    for line in meta.scenario.lines() {
        let _ = writeln!(s, "#   {line}");
    }
    s.push_str(&table.data_section());
    s
}

pub fn write_tables(
    dir: &Path,
    tables: &[Table],
    meta: &Metadata,
) -> Result<Vec<std::path::PathBuf>, CliError> {
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::config(format!("output directory {}: {e}", dir.display())))?;
    let mut written = Vec::new();
    for t in tables {
        let path = dir.join(format!("{}.csv", t.name));
        std::fs::write(&path, render(t, meta))
            .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
        written.push(path);
    }
    Ok(written)
}

/// Data section of a rendered file (everything after the `#` header).
pub fn strip_header(text: &str) -> String {
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| format!("{l}\n"))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_round_trip() {
        for v in [1.0, -0.1, 123456.789, 1e-12, 6.02e23, 2.0f64.sqrt()] {
            assert_eq!(format_num(v).parse::<f64>().unwrap(), v);
        }
        assert_eq!(format_num(0.0), "0");
        assert_eq!(format_num(-0.0), "0");
    }

    #[test]
    fn header_then_data() {
        let mut t = Table::new("t", &["a", "b"]);
        t.push(vec![1.0.into(), "x".into()]);
        t.note("fit", 0.5);
        let meta = Metadata {
            command: "modes".into(),
            seed: 3,
            scenario_source: "defaults".into(),
            layout_source: "builtin:reference".into(),
            layout_sha256: "00".into(),
            scenario: "seed = 3\n".into(),
        };
        let text = render(&t, &meta);
        assert!(text.starts_with("# surftrap"));
        assert!(text.contains("# fit: 0.5\n"));
        assert_eq!(strip_header(&text), "a,b\n1,x\n");
    }
}
