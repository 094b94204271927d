//! Text file format for states and operators.
//!
//! ```json
//! {"dims": [2, 2], "matrix": {"re": [[...], ...], "im": [[...], ...]}}
//! ```
//!
//! Rows are row-major nested lists. Writers emit 17 significant digits so a
//! read-write cycle is bit-exact.

use std::fmt::Write as _;
use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::linalg::{index, CMat, C64};
use crate::state::DensityOperator;

#[derive(Deserialize)]
struct RawFile {
    dims: Vec<usize>,
    matrix: RawMatrix,
}

#[derive(Deserialize)]
struct RawMatrix {
    re: Vec<Vec<f64>>,
    im: Vec<Vec<f64>>,
}

/// Parse an operator document; no density-operator validation.
pub fn parse_operator(text: &str) -> Result<(Vec<usize>, CMat)> {
    let raw: RawFile = serde_json::from_str(text)
        .map_err(|e| Error::Format(format!("line {} column {}: {e}", e.line(), e.column())))?;
    if raw.dims.is_empty() || raw.dims.contains(&0) {
        return Err(Error::Format("field `dims`: must be a non-empty list of positive integers".into()));
    }
    let d = index::product(&raw.dims);
    for (name, rows) in [("re", &raw.matrix.re), ("im", &raw.matrix.im)] {
        if rows.len() != d {
            return Err(Error::Format(format!(
                "field `matrix.{name}`: {} rows, dims {:?} need {d}",
                rows.len(),
                raw.dims
            )));
        }
        if let Some((i, row)) = rows.iter().enumerate().find(|(_, r)| r.len() != d) {
            return Err(Error::Format(format!(
                "field `matrix.{name}` row {i}: {} entries, expected {d}",
                row.len()
            )));
        }
    }
    let m = CMat::from_fn(d, d, |i, j| C64::new(raw.matrix.re[i][j], raw.matrix.im[i][j]));
    Ok((raw.dims, m))
}

pub fn parse_state(text: &str) -> Result<DensityOperator> {
    let (dims, m) = parse_operator(text)?;
    DensityOperator::new(dims, m).map_err(|e| Error::Format(format!("field `matrix`: {e}")))
}

pub fn read_operator(path: impl AsRef<Path>) -> Result<(Vec<usize>, CMat)> {
    parse_operator(&std::fs::read_to_string(path)?)
}

pub fn read_state(path: impl AsRef<Path>) -> Result<DensityOperator> {
    parse_state(&std::fs::read_to_string(path)?)
}

fn fmt_f64(out: &mut String, x: f64) {
    // 17 significant digits; JSON has no inf/nan so those never reach here.
    let _ = write!(out, "{x:.16e}");
}

pub fn format_operator(dims: &[usize], m: &CMat) -> String {
    let mut out = String::new();
    out.push_str("{\n  \"dims\": [");
    for (i, d) in dims.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        let _ = write!(out, "{d}");
    }
    out.push_str("],\n  \"matrix\": {\n");
    for (k, part) in ["re", "im"].iter().enumerate() {
        let _ = writeln!(out, "    \"{part}\": [");
        for i in 0..m.nrows() {
            out.push_str("      [");
            for j in 0..m.ncols() {
                if j > 0 {
                    out.push_str(", ");
                }
                let z = m[(i, j)];
                fmt_f64(&mut out, if k == 0 { z.re } else { z.im });
            }
            out.push(']');
            if i + 1 < m.nrows() {
                out.push(',');
            }
            out.push('\n');
        }
        out.push_str("    ]");
        out.push_str(if k == 0 { ",\n" } else { "\n" });
    }
    out.push_str("  }\n}\n");
    out
}

pub fn format_state(state: &DensityOperator) -> String {
    format_operator(state.dims(), state.matrix())
}

pub fn write_operator(path: impl AsRef<Path>, dims: &[usize], m: &CMat) -> Result<()> {
    std::fs::write(path, format_operator(dims, m))?;
    Ok(())
}

pub fn write_state(path: impl AsRef<Path>, state: &DensityOperator) -> Result<()> {
    write_operator(path, state.dims(), state.matrix())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::{random_state, Ensemble};

    #[test]
    fn round_trip_is_bit_exact() {
        let s = random_state(&[2, 3], 9, Ensemble::HilbertSchmidtMixed).unwrap();
        let text = format_state(&s);
        let back = parse_state(&text).unwrap();
        assert_eq!(back.dims(), s.dims());
        assert_eq!(back.matrix(), s.matrix());
    }

    #[test]
    fn diagnostics_name_the_field() {
        let err = parse_operator("{\"dims\": [2], \"matrix\": {\"re\": [[1,0]], \"im\": [[0,0],[0,0]]}}")
            .unwrap_err()
            .to_string();
        assert!(err.contains("matrix.re"), "{err}");
        let err = parse_operator("{\"dims\": [2],\n \"matrix\": ").unwrap_err().to_string();
        assert!(err.contains("line 2"), "{err}");
        let err = parse_state("{\"dims\": [1], \"matrix\": {\"re\": [[2]], \"im\": [[0]]}}")
            .unwrap_err()
            .to_string();
        assert!(err.contains("trace"), "{err}");
    }
}
