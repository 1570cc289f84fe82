//! JSON state files and matrix (de)serialisation helpers.
//!
//! Complex matrices travel as nested arrays of `[re, im]` pairs, row by row.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::density::DensityMatrix;
use crate::error::{Error, Result};
use crate::matlin::{c64, CMatrix, RMatrix};

pub fn complex_rows(m: &CMatrix) -> Vec<Vec<[f64; 2]>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
        .collect()
}

pub fn real_rows(m: &RMatrix) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

pub fn complex_from_rows(rows: &[Vec<[f64; 2]>]) -> Result<CMatrix> {
    let r = rows.len();
    let c = rows.first().map(|row| row.len()).unwrap_or(0);
    if let Some((i, row)) = rows.iter().enumerate().find(|(_, row)| row.len() != c) {
        return Err(Error::Parse(format!("matrix row {i} has {} entries, expected {c}", row.len())));
    }
    Ok(CMatrix::from_fn(r, c, |i, j| c64(rows[i][j][0], rows[i][j][1])))
}

/// `#[serde(with = ...)]` adapter for complex matrices.
pub mod cmatrix_serde {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(m: &CMatrix, s: S) -> std::result::Result<S::Ok, S::Error> {
        complex_rows(m).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<CMatrix, D::Error> {
        let rows = Vec::<Vec<[f64; 2]>>::deserialize(d)?;
        complex_from_rows(&rows).map_err(serde::de::Error::custom)
    }
}

/// `#[serde(with = ...)]` adapter for real matrices.
pub mod rmatrix_serde {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(m: &RMatrix, s: S) -> std::result::Result<S::Ok, S::Error> {
        real_rows(m).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<RMatrix, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        let r = rows.len();
        let c = rows.first().map(|row| row.len()).unwrap_or(0);
        if rows.iter().any(|row| row.len() != c) {
            return Err(serde::de::Error::custom("ragged matrix rows"));
        }
        Ok(RMatrix::from_fn(r, c, |i, j| rows[i][j]))
    }
}

/// On-disk representation of a bipartite state.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StateFile {
    pub dims: [usize; 2],
    #[serde(with = "cmatrix_serde")]
    pub matrix: CMatrix,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metadata: Option<serde_json::Value>,
}

impl StateFile {
    pub fn from_state(rho: &DensityMatrix, metadata: Option<serde_json::Value>) -> Self {
        let (a, b) = rho.dims();
        Self { dims: [a, b], matrix: rho.matrix().clone(), metadata }
    }

    pub fn to_state(&self) -> Result<DensityMatrix> {
        DensityMatrix::new(self.matrix.clone(), (self.dims[0], self.dims[1]))
    }

    /// Parses JSON text; syntax errors carry their line and column.
    pub fn parse(text: &str) -> Result<Self> {
        // serde_json's message already ends in "at line L column C".
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text).map_err(|e| match e {
            Error::Parse(msg) => Error::Parse(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text + "\n")?;
        Ok(())
    }
}

pub fn read_state(path: &Path) -> Result<DensityMatrix> {
    StateFile::read(path)?.to_state()
}
