use std::fmt::Write as _;
use std::path::Path;

use crate::error::Result;

/// One CSV field. Reals are written with 17 significant digits.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(i64),
    Real(f64),
    Text(String),
}

impl std::fmt::Display for Cell {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Cell::Int(v) => write!(f, "{v}"),
            Cell::Real(v) => write!(f, "{v:.16e}"),
            Cell::Text(s) if s.contains([',', '"', '\n']) => {
                write!(f, "\"{}\"", s.replace('"', "\"\""))
            }
            Cell::Text(s) => write!(f, "{s}"),
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Real(v)
    }
}

impl From<i64> for Cell {
    fn from(v: i64) -> Self {
        Cell::Int(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

pub fn render_csv(header: &[&str], rows: &[Vec<Cell>]) -> String {
    let mut s = header.join(",");
    s.push('\n');
    for row in rows {
        let line: Vec<String> = row.iter().map(|c| c.to_string()).collect();
        let _ = writeln!(s, "{}", line.join(","));
    }
    s
}

pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<Cell>]) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)?;
        }
    }
    std::fs::write(path, render_csv(header, rows))?;
    Ok(())
}

/// Matplotlib script plotting `norm_v` and `norm_w` from `trace_csv` on a log
/// scale against `e^{-lambda t / 2}`.
pub fn plot_script(trace_csv: &str, lambda: f64) -> String {
    format!(
        r#"import csv
import math
import matplotlib.pyplot as plt

rows = list(csv.DictReader(open("{trace_csv}")))
t = [float(r["t"]) for r in rows]
v = [float(r["norm_v"]) for r in rows]
w = [float(r["norm_w"]) for r in rows]
lam = {lambda:?}
ref = [w[0] * math.exp(-lam * s / 2) for s in t]

plt.semilogy(t, v, label="||v||")
plt.semilogy(t, w, label="||w||")
plt.semilogy(t, ref, "k--", label="exp(-lambda t / 2)")
plt.xlabel("t")
plt.legend()
plt.savefig("{trace_csv}.png", dpi=150)
"#
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_and_precision() {
        let s = render_csv(&["j", "x"], &[vec![Cell::Int(-1), Cell::Real(0.1)]]);
        let mut lines = s.lines();
        assert_eq!(lines.next(), Some("j,x"));
        let row = lines.next().unwrap();
        let x: f64 = row.split(',').nth(1).unwrap().parse().unwrap();
        assert_eq!(x, 0.1);
        assert_eq!(row, "-1,1.0000000000000001e-1");
    }

    #[test]
    fn text_quoting() {
        assert_eq!(Cell::from("a,b \"c\"").to_string(), "\"a,b \"\"c\"\"\"");
        assert_eq!(Cell::from("plain").to_string(), "plain");
    }
}
