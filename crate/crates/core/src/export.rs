//! Plain-text table output shared by all modules.
//!
//! Tables are CSV with optional `# key: value` metadata lines on top. Floats
//! are written with 17 significant digits so a reader recovers the exact
//! binary value.

use std::fmt::Write as _;
use std::io::{self, Write};

/// Formats a float with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Parses a float written by [`fmt_f64`] (or any decimal notation).
pub fn parse_f64(s: &str) -> crate::Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|e| crate::Error::Parse(format!("bad float {s:?}: {e}")))
}

/// A CSV table with a metadata preamble.
#[derive(Debug, Clone, Default)]
pub struct Table {
    pub metadata: Vec<(String, String)>,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: AsRef<str>>(header: &[S]) -> Self {
        Self {
            metadata: Vec::new(),
            header: header.iter().map(|h| h.as_ref().to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn meta(&mut self, key: &str, value: impl ToString) -> &mut Self {
        self.metadata.push((key.to_string(), value.to_string()));
        self
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> io::Result<()> {
        w.write_all(self.to_string().as_bytes())
    }
}

impl std::fmt::Display for Table {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let mut out = String::new();
        for (k, v) in &self.metadata {
            writeln!(out, "# {k}: {v}")?;
        }
        writeln!(out, "{}", self.header.join(","))?;
        for row in &self.rows {
            writeln!(out, "{}", row.join(","))?;
        }
        f.write_str(&out)
    }
}

/// Non-comment lines of a CSV document.
pub fn data_lines(text: &str) -> impl Iterator<Item = &str> {
    text.lines().filter(|l| !l.starts_with('#') && !l.trim().is_empty())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits_round_trip() {
        for x in [0.1, 1.0 / 3.0, -2.718281828459045e-300, 6.02214076e23, f64::MIN_POSITIVE] {
            assert_eq!(parse_f64(&fmt_f64(x)).unwrap().to_bits(), x.to_bits());
        }
    }

    #[test]
    fn table_layout() {
        let mut t = Table::new(&["a", "b"]);
        t.meta("seed", 3);
        t.push(vec!["1".into(), "2".into()]);
        assert_eq!(t.to_string(), "# seed: 3\na,b\n1,2\n");
        assert_eq!(data_lines(&t.to_string()).count(), 2);
    }
}
