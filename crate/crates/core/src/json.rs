//! Float encoding for versioned JSON documents: every double is written in
//! scientific notation with 17 significant digits.

use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// A double that serializes with 17 significant digits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Num(pub f64);

/// Decimal text of `x` with 17 significant digits; round-trips exactly.
pub fn format_f64(x: f64) -> String {
    format!("{x:.16e}")
}

impl Serialize for Num {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if !self.0.is_finite() {
            return Err(serde::ser::Error::custom("non-finite float"));
        }
        let n = serde_json::Number::from_str(&format_f64(self.0)).map_err(serde::ser::Error::custom)?;
        n.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Num {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        f64::deserialize(d).map(Num)
    }
}

pub fn nums(v: &[f64]) -> Vec<Num> {
    v.iter().copied().map(Num).collect()
}

pub fn values(v: &[Num]) -> Vec<f64> {
    v.iter().map(|n| n.0).collect()
}

pub fn matrix_rows(mat: &DMatrix<f64>) -> Vec<Vec<Num>> {
    mat.row_iter().map(|r| r.iter().copied().map(Num).collect()).collect()
}

/// Rebuilds an `nrows × ncols` matrix from nested rows.
pub fn rows_matrix(rows: &[Vec<Num>], nrows: usize, ncols: usize, what: &str) -> Result<DMatrix<f64>> {
    if rows.len() != nrows || rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::Format(format!("{what} must be {nrows}×{ncols}")));
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j].0))
}

/// Reads the `version` field and rejects anything but `expected`.
pub fn check_version(text: &str, expected: u64) -> Result<()> {
    #[derive(Deserialize)]
    struct Header {
        version: u64,
    }
    let h: Header = serde_json::from_str(text).map_err(|e| Error::Format(e.to_string()))?;
    if h.version != expected {
        return Err(Error::UnsupportedVersion(h.version));
    }
    Ok(())
}
