//! Plot-ready CSV tables, each led by `#` comment lines documenting its columns.

use std::fmt::Write;

#[derive(Clone, Debug, PartialEq)]
pub struct PlotTable {
    pub file: String,
    pub title: String,
    /// `(name, description)` per column.
    pub columns: Vec<(String, String)>,
    pub rows: Vec<Vec<String>>,
}

impl PlotTable {
    pub fn new(file: &str, title: &str, columns: &[(&str, &str)]) -> Self {
        Self {
            file: file.to_string(),
            title: title.to_string(),
            columns: columns
                .iter()
                .map(|(n, d)| (n.to_string(), d.to_string()))
                .collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# {}", self.title);
        for (name, desc) in &self.columns {
            let _ = writeln!(s, "# {name}: {desc}");
        }
        let names: Vec<&str> = self.columns.iter().map(|c| c.0.as_str()).collect();
        let _ = writeln!(s, "{}", names.join(","));
        for row in &self.rows {
            let _ = writeln!(s, "{}", row.join(","));
        }
        s
    }
}

/// Shortest round-trip decimal; `NaN` and infinities are spelled out.
pub fn num(x: f64) -> String {
    format!("{x}")
}

pub fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

/// Column name for a κ value: `1/3` becomes `geom_scale_k033`.
pub fn kappa_column(kappa: f64) -> String {
    format!("geom_scale_k{:03}", (kappa * 100.0).round() as i64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_table_is_header_only() {
        let t = PlotTable::new("x.csv", "nothing", &[("a", "first"), ("b", "second")]);
        assert_eq!(t.to_csv(), "# nothing\n# a: first\n# b: second\na,b\n");
    }

    #[test]
    fn kappa_names() {
        assert_eq!(kappa_column(1.0 / 3.0), "geom_scale_k033");
        assert_eq!(kappa_column(0.5), "geom_scale_k050");
    }
}
