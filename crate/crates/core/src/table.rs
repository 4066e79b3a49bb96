//! Minimal CSV tables with deterministic, round-trip float formatting.

use std::fmt::Write as _;

/// Shortest decimal that parses back to the same `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Self {
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        assert_eq!(row.len(), self.header.len(), "row width");
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[j]).collect())
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            for (j, v) in row.iter().enumerate() {
                if j > 0 {
                    out.push(',');
                }
                let _ = write!(out, "{}", fmt_f64(*v));
            }
            out.push('\n');
        }
        out
    }

    /// Inverse of [`Table::to_csv`].
    pub fn parse_csv(text: &str) -> Option<Self> {
        let mut lines = text.lines();
        let header = lines
            .next()?
            .split(',')
            .map(str::to_owned)
            .collect::<Vec<_>>();
        let mut rows = Vec::new();
        for line in lines {
            let row = line
                .split(',')
                .map(|f| f.parse::<f64>().ok())
                .collect::<Option<Vec<_>>>()?;
            if row.len() != header.len() {
                return None;
            }
            rows.push(row);
        }
        Some(Self { header, rows })
    }
}
