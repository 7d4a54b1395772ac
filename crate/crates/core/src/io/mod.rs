//! Matrix files, command-line mini-languages and deterministic JSON.
//!
//! Floating-point numbers are written with 17 significant digits
//! (`{:.16e}`), which round-trips every `f64` exactly and makes output
//! byte-identical across runs.

mod matrix;
mod spec;

use std::io;

use serde::Serialize;
use serde_json::ser::{Formatter, Serializer};

use crate::error::{Error, Result};

pub use matrix::{
    matrix_to_json, matrix_to_matrix_market, parse_matrix, parse_matrix_json, parse_matrix_market,
    write_matrix, JsonMatrix, MatrixFormat, MAX_DIM,
};
pub use spec::{parse_grid_spec, parse_path_spec, PathKind, PathSpec};

/// `x` with 17 significant digits.
pub fn format_f64(x: f64) -> String {
    format!("{x:.16e}")
}

struct Fixed17;

impl Formatter for Fixed17 {
    fn write_f64<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        w.write_all(format_f64(value).as_bytes())
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(w, value as f64)
    }
}

/// Compact JSON with floats in `{:.16e}` form; non-finite floats become
/// `null`.
pub fn to_json<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = Serializer::with_formatter(&mut buf, Fixed17);
    value
        .serialize(&mut ser)
        .map_err(|e| Error::Numerical(format!("serialization failed: {e}")))?;
    Ok(String::from_utf8(buf).expect("JSON is UTF-8"))
}

/// CSV `re,im,density` for a density grid.
pub fn density_csv(grid: &crate::brown::DensityGrid) -> String {
    let mut s = String::from("re,im,density\n");
    for (x, y, v) in grid.triples() {
        s.push_str(&format!(
            "{},{},{}\n",
            format_f64(x),
            format_f64(y),
            format_f64(v)
        ));
    }
    s
}
