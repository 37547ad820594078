//! Text serialization of a [`KernelField`].
//!
//! ```text
//! # kdv-stab kernel cache
//! format_version = 1
//! length = ...
//! lambda = ...
//! modes = N
//! nx = n
//! checksum = <sha256 of every other line>
//! [coefficients]
//! j re im            (2N lines)
//! [kernel]
//! k(x_i, y_0) ...    (n + 1 lines)
//! [gain]
//! g(y_0) ...
//! [diagnostics]      (optional)
//! name value
//! ```

use std::path::Path;

use num_complex::Complex64;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::kernel::{GainCoefficients, KernelDiagnostics, KernelField};
use crate::Grid;

const VERSION: u32 = 1;

/// Parameters stored in the cache header.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CacheHeader {
    pub length: f64,
    pub lambda: f64,
    pub modes: usize,
    pub nx: usize,
}

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn checksum(body: &str) -> String {
    Sha256::digest(body.as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

fn diagnostic_fields(d: &KernelDiagnostics) -> [(&'static str, f64); 9] {
    [
        ("max_imag", d.max_imag),
        ("max_real", d.max_real),
        ("gain_max_imag", d.gain_max_imag),
        ("ky_edge_left", d.ky_edge_left),
        ("ky_edge_right", d.ky_edge_right),
        ("ky_norm", d.ky_norm),
        ("kx_row_sup", d.kx_row_sup),
        ("ky_col_sup", d.ky_col_sup),
        ("k_norm", d.k_norm),
    ]
}

pub fn render_kernel(k: &KernelField) -> String {
    let len = k.grid().len();
    let mut body = String::new();
    body.push_str(&format!("format_version = {VERSION}\n"));
    body.push_str(&format!("length = {}\n", num(k.length())));
    body.push_str(&format!("lambda = {}\n", num(k.lambda())));
    body.push_str(&format!("modes = {}\n", k.modes()));
    body.push_str(&format!("nx = {}\n", k.grid().intervals()));
    body.push_str("[coefficients]\n");
    let n = k.modes() as i32;
    let indices = (-n..0).chain(1..=n);
    for (j, c) in indices.zip(&k.coefficients().values) {
        body.push_str(&format!("{j} {} {}\n", num(c.re), num(c.im)));
    }
    body.push_str("[kernel]\n");
    for i in 0..len {
        let row: Vec<String> = k.row(i).iter().map(|&v| num(v)).collect();
        body.push_str(&row.join(" "));
        body.push('\n');
    }
    body.push_str("[gain]\n");
    let g: Vec<String> = k.gain().iter().map(|&v| num(v)).collect();
    body.push_str(&g.join(" "));
    body.push('\n');
    if let Some(d) = k.diagnostics() {
        body.push_str("[diagnostics]\n");
        for (name, v) in diagnostic_fields(d) {
            body.push_str(&format!("{name} {}\n", num(v)));
        }
    }

    let sum = checksum(&body);
    let (head, rest) = body.split_at(body.find("[coefficients]").unwrap_or(body.len()));
    format!("# kdv-stab kernel cache\n{head}checksum = {sum}\n{rest}")
}

pub fn parse_kernel(text: &str, path: &Path) -> Result<(CacheHeader, KernelField)> {
    let malformed = |reason: String| Error::CacheFormat {
        path: path.to_path_buf(),
        reason,
    };
    let mut stored_sum = None;
    let mut body = String::new();
    for line in text.lines() {
        if line.starts_with('#') {
            continue;
        }
        if let Some(s) = line.strip_prefix("checksum = ") {
            stored_sum = Some(s.trim().to_string());
            continue;
        }
        body.push_str(line);
        body.push('\n');
    }
    let stored = stored_sum.ok_or_else(|| malformed("missing checksum".into()))?;
    if stored != checksum(&body) {
        return Err(Error::ChecksumMismatch {
            path: path.to_path_buf(),
        });
    }

    let mut lines = body.lines();
    let mut field = |key: &str| -> Result<String> {
        let line = lines
            .next()
            .ok_or_else(|| malformed(format!("missing {key}")))?;
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| malformed(format!("expected {key} = ..., got {line:?}")))?;
        if k.trim() != key {
            return Err(malformed(format!("expected {key}, got {}", k.trim())));
        }
        Ok(v.trim().to_string())
    };
    let version: u32 = field("format_version")?
        .parse()
        .map_err(|_| malformed("bad format_version".into()))?;
    if version != VERSION {
        return Err(malformed(format!("unsupported format_version {version}")));
    }
    let pf = |s: String, what: &str| -> Result<f64> {
        s.parse().map_err(|_| malformed(format!("bad {what}: {s:?}")))
    };
    let pu = |s: String, what: &str| -> Result<usize> {
        s.parse().map_err(|_| malformed(format!("bad {what}: {s:?}")))
    };
    let header = CacheHeader {
        length: pf(field("length")?, "length")?,
        lambda: pf(field("lambda")?, "lambda")?,
        modes: pu(field("modes")?, "modes")?,
        nx: pu(field("nx")?, "nx")?,
    };
    drop(field);

    let rest: Vec<&str> = body.lines().skip(5).collect();
    let section = |name: &str| -> Result<usize> {
        rest.iter()
            .position(|l| *l == name)
            .ok_or_else(|| malformed(format!("missing section {name}")))
    };
    let (sc, sk, sg) = (section("[coefficients]")?, section("[kernel]")?, section("[gain]")?);
    if !(sc < sk && sk < sg) {
        return Err(malformed("sections out of order".into()));
    }
    let gain_end = rest.iter().position(|l| *l == "[diagnostics]").unwrap_or(rest.len());
    if gain_end != sg + 2 {
        return Err(malformed("gain section must hold exactly one line".into()));
    }
    let nums = |line: &str| -> Result<Vec<f64>> {
        line.split_whitespace()
            .map(|t| t.parse::<f64>().map_err(|_| malformed(format!("bad number {t:?}"))))
            .collect()
    };
    let mut coeffs = Vec::new();
    for line in &rest[sc + 1..sk] {
        let v = nums(line)?;
        if v.len() != 3 {
            return Err(malformed(format!("coefficient line {line:?}")));
        }
        coeffs.push(Complex64::new(v[1], v[2]));
    }
    if coeffs.len() != 2 * header.modes {
        return Err(malformed(format!("{} coefficients for N = {}", coeffs.len(), header.modes)));
    }
    let mut values = Vec::new();
    for line in &rest[sk + 1..sg] {
        values.extend(nums(line)?);
    }
    let gain = nums(rest.get(sg + 1).copied().unwrap_or(""))?;
    let diagnostics = match rest.iter().position(|l| *l == "[diagnostics]") {
        None => None,
        Some(sd) => {
            let mut d = KernelDiagnostics::default();
            let mut seen = 0;
            for line in &rest[sd + 1..] {
                let (name, v) = line
                    .split_once(' ')
                    .ok_or_else(|| malformed(format!("diagnostic line {line:?}")))?;
                let v: f64 = v
                    .trim()
                    .parse()
                    .map_err(|_| malformed(format!("bad diagnostic value {v:?}")))?;
                let slot = match name {
                    "max_imag" => &mut d.max_imag,
                    "max_real" => &mut d.max_real,
                    "gain_max_imag" => &mut d.gain_max_imag,
                    "ky_edge_left" => &mut d.ky_edge_left,
                    "ky_edge_right" => &mut d.ky_edge_right,
                    "ky_norm" => &mut d.ky_norm,
                    "kx_row_sup" => &mut d.kx_row_sup,
                    "ky_col_sup" => &mut d.ky_col_sup,
                    "k_norm" => &mut d.k_norm,
                    _ => return Err(malformed(format!("unknown diagnostic {name:?}"))),
                };
                *slot = v;
                seen += 1;
            }
            if seen != 9 {
                return Err(malformed(format!("{seen} of 9 diagnostics present")));
            }
            Some(d)
        }
    };

    let grid = Grid::new(header.length, header.nx).map_err(|e| malformed(e.to_string()))?;
    let kernel = KernelField::from_parts(
        grid,
        header.lambda,
        values,
        gain,
        GainCoefficients {
            lambda: header.lambda,
            values: coeffs,
            condition: 0.0,
            residual: 0.0,
        },
    )
    .map_err(|e| malformed(e.to_string()))?;
    let kernel = match diagnostics {
        Some(d) => kernel.with_diagnostics(d),
        None => kernel,
    };
    Ok((header, kernel))
}

pub fn save_kernel(path: &Path, k: &KernelField) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)?;
        }
    }
    std::fs::write(path, render_kernel(k))?;
    Ok(())
}

pub fn load_kernel(path: &Path) -> Result<(CacheHeader, KernelField)> {
    let text = std::fs::read_to_string(path)?;
    parse_kernel(&text, path)
}
