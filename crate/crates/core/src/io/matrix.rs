use serde::{Deserialize, Serialize};

use super::{format_f64, to_json};
use crate::error::{Error, Result};
use crate::linalg::{c64, CMatrix};

/// Largest dimension accepted from a file.
pub const MAX_DIM: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixFormat {
    /// `{"n": int, "re": [[...]], "im": [[...]]}`, rows first.
    Json,
    /// MatrixMarket `array` or `coordinate` with a complex, real or
    /// integer field.
    MatrixMarket,
}

impl MatrixFormat {
    /// Guesses the format from the first non-blank character.
    pub fn detect(text: &str) -> Self {
        if text.trim_start().starts_with('{') {
            MatrixFormat::Json
        } else {
            MatrixFormat::MatrixMarket
        }
    }
}

/// The JSON matrix schema; embeddable in larger reports.
#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct JsonMatrix {
    pub n: usize,
    pub re: Vec<Vec<f64>>,
    #[serde(default)]
    pub im: Option<Vec<Vec<f64>>>,
}

impl JsonMatrix {
    pub fn from_matrix(t: &CMatrix) -> Self {
        let n = t.nrows();
        let rows = |f: fn(&c64) -> f64| {
            (0..n)
                .map(|i| (0..n).map(|j| f(&t[(i, j)])).collect())
                .collect()
        };
        Self {
            n,
            re: rows(|z| z.re),
            im: Some(rows(|z| z.im)),
        }
    }
}

fn parse_err(msg: impl Into<String>) -> Error {
    Error::Parse(msg.into())
}

fn check_dim(n: usize) -> Result<()> {
    if n == 0 || n > MAX_DIM {
        return Err(parse_err(format!("dimension {n} outside 1..={MAX_DIM}")));
    }
    Ok(())
}

fn finite(x: f64) -> Result<f64> {
    if x.is_finite() {
        Ok(x)
    } else {
        Err(Error::NonFinite)
    }
}

/// Parses the JSON matrix schema; a missing `im` means a real matrix.
pub fn parse_matrix_json(text: &str) -> Result<CMatrix> {
    let raw: JsonMatrix = serde_json::from_str(text).map_err(|e| parse_err(e.to_string()))?;
    let n = raw.n;
    check_dim(n)?;
    let check_rows = |rows: &Vec<Vec<f64>>, what: &str| -> Result<()> {
        if rows.len() != n || rows.iter().any(|r| r.len() != n) {
            return Err(parse_err(format!(
                "`{what}` must be {n} rows of {n} entries"
            )));
        }
        Ok(())
    };
    check_rows(&raw.re, "re")?;
    if let Some(im) = &raw.im {
        check_rows(im, "im")?;
    }
    let mut m = CMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let im = raw.im.as_ref().map_or(0.0, |v| v[i][j]);
            m[(i, j)] = c64::new(finite(raw.re[i][j])?, finite(im)?);
        }
    }
    Ok(m)
}

pub fn matrix_to_json(t: &CMatrix) -> String {
    to_json(&JsonMatrix::from_matrix(t)).expect("matrix serializes")
}

#[derive(Clone, Copy, PartialEq)]
enum Field {
    Complex,
    Real,
}

#[derive(Clone, Copy, PartialEq)]
enum Symmetry {
    General,
    Symmetric,
    SkewSymmetric,
    Hermitian,
}

/// Parses a square MatrixMarket matrix (1-based, column-major for `array`).
pub fn parse_matrix_market(text: &str) -> Result<CMatrix> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| parse_err("empty file"))?;
    let words: Vec<String> = header
        .split_whitespace()
        .map(|w| w.to_ascii_lowercase())
        .collect();
    if words.len() != 5 || words[0] != "%%matrixmarket" || words[1] != "matrix" {
        return Err(parse_err(
            "expected `%%MatrixMarket matrix <format> <field> <symmetry>`",
        ));
    }
    let coordinate = match words[2].as_str() {
        "array" => false,
        "coordinate" => true,
        other => return Err(parse_err(format!("unknown format `{other}`"))),
    };
    let field = match words[3].as_str() {
        "complex" => Field::Complex,
        "real" | "integer" | "double" => Field::Real,
        other => return Err(parse_err(format!("unsupported field `{other}`"))),
    };
    let symmetry = match words[4].as_str() {
        "general" => Symmetry::General,
        "symmetric" => Symmetry::Symmetric,
        "skew-symmetric" => Symmetry::SkewSymmetric,
        "hermitian" => Symmetry::Hermitian,
        other => return Err(parse_err(format!("unknown symmetry `{other}`"))),
    };
    if symmetry == Symmetry::Hermitian && field != Field::Complex {
        return Err(parse_err("hermitian symmetry requires a complex field"));
    }
    let mut body = lines
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('%'));
    let size_line = body.next().ok_or_else(|| parse_err("missing size line"))?;
    let sizes: Vec<usize> = size_line
        .split_whitespace()
        .map(|w| w.parse().map_err(|_| parse_err(format!("bad size `{w}`"))))
        .collect::<Result<_>>()?;
    let (rows, cols, nnz) = match (coordinate, sizes.as_slice()) {
        (false, [r, c]) => (*r, *c, None),
        (true, [r, c, k]) => (*r, *c, Some(*k)),
        _ => return Err(parse_err("malformed size line")),
    };
    if rows != cols {
        return Err(Error::NotSquare { rows, cols });
    }
    let n = rows;
    check_dim(n)?;
    let per_entry = if field == Field::Complex { 2 } else { 1 };
    let parse_value = |ws: &[&str]| -> Result<c64> {
        let num = |w: &str| -> Result<f64> {
            finite(
                w.parse()
                    .map_err(|_| parse_err(format!("bad number `{w}`")))?,
            )
        };
        Ok(if field == Field::Complex {
            c64::new(num(ws[0])?, num(ws[1])?)
        } else {
            c64::new(num(ws[0])?, 0.0)
        })
    };
    let mirror = |z: c64| match symmetry {
        Symmetry::General => None,
        Symmetry::Symmetric => Some(z),
        Symmetry::SkewSymmetric => Some(-z),
        Symmetry::Hermitian => Some(z.conj()),
    };
    let mut m = CMatrix::zeros(n, n);
    let mut seen = 0usize;
    if let Some(nnz) = nnz {
        if nnz > n * n {
            return Err(parse_err(format!("{nnz} entries exceed {n}x{n}")));
        }
        for line in body {
            let ws: Vec<&str> = line.split_whitespace().collect();
            if ws.len() != 2 + per_entry {
                return Err(parse_err(format!("bad entry line `{line}`")));
            }
            let idx = |w: &str| -> Result<usize> {
                let k: usize = w
                    .parse()
                    .map_err(|_| parse_err(format!("bad index `{w}`")))?;
                if k == 0 || k > n {
                    return Err(parse_err(format!("index {k} outside 1..={n}")));
                }
                Ok(k - 1)
            };
            let (i, j) = (idx(ws[0])?, idx(ws[1])?);
            let z = parse_value(&ws[2..])?;
            if symmetry != Symmetry::General && i < j {
                return Err(parse_err("symmetric storage must use the lower triangle"));
            }
            m[(i, j)] = z;
            if i != j {
                if let Some(w) = mirror(z) {
                    m[(j, i)] = w;
                }
            }
            seen += 1;
        }
        if seen != nnz {
            return Err(parse_err(format!("expected {nnz} entries, found {seen}")));
        }
    } else {
        // Column-major; symmetric variants list the lower triangle only.
        let mut slots = Vec::with_capacity(n * n);
        for j in 0..n {
            let start = match symmetry {
                Symmetry::General => 0,
                Symmetry::Symmetric | Symmetry::Hermitian => j,
                Symmetry::SkewSymmetric => j + 1,
            };
            for i in start..n {
                slots.push((i, j));
            }
        }
        let values: Vec<&str> = body.flat_map(str::split_whitespace).collect();
        if values.len() != slots.len() * per_entry {
            return Err(parse_err(format!(
                "expected {} values, found {}",
                slots.len() * per_entry,
                values.len()
            )));
        }
        for (k, &(i, j)) in slots.iter().enumerate() {
            let z = parse_value(&values[k * per_entry..(k + 1) * per_entry])?;
            m[(i, j)] = z;
            if i != j {
                if let Some(w) = mirror(z) {
                    m[(j, i)] = w;
                }
            }
        }
    }
    if symmetry == Symmetry::Hermitian && (0..n).any(|i| m[(i, i)].im != 0.0) {
        return Err(parse_err("hermitian diagonal must be real"));
    }
    Ok(m)
}

/// Dense `array complex general` output, 17 significant digits.
pub fn matrix_to_matrix_market(t: &CMatrix) -> String {
    let n = t.nrows();
    let mut s = format!("%%MatrixMarket matrix array complex general\n{n} {n}\n");
    for j in 0..n {
        for i in 0..n {
            let z = t[(i, j)];
            s.push_str(&format!("{} {}\n", format_f64(z.re), format_f64(z.im)));
        }
    }
    s
}

/// Parses either format, detected from the content.
pub fn parse_matrix(text: &str) -> Result<CMatrix> {
    match MatrixFormat::detect(text) {
        MatrixFormat::Json => parse_matrix_json(text),
        MatrixFormat::MatrixMarket => parse_matrix_market(text),
    }
}

pub fn write_matrix(t: &CMatrix, format: MatrixFormat) -> String {
    match format {
        MatrixFormat::Json => matrix_to_json(t),
        MatrixFormat::MatrixMarket => matrix_to_matrix_market(t),
    }
}
