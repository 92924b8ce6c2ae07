//! File formats: dense matrices as CSV (first line `rows,cols`, then one
//! row per line) and a JSON envelope `{dims, block_dims, block_norm, data}`.

use std::io::{BufRead, Write};
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::blockmodel::{BlockNorm, RepresentationStructure};
use crate::error::{Error, Result};

/// Serde adapter writing a matrix as a list of rows.
pub mod rows {
    use nalgebra::DMatrix;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(m: &DMatrix<f64>, s: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<Vec<f64>> = m.row_iter().map(|r| r.iter().copied().collect()).collect();
        rows.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DMatrix<f64>, D::Error> {
        let rows: Vec<Vec<f64>> = Vec::deserialize(d)?;
        super::from_rows(&rows).map_err(serde::de::Error::custom)
    }
}

/// Serde adapter writing a vector as a flat list.
pub mod vector {
    use nalgebra::DVector;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &DVector<f64>, s: S) -> Result<S::Ok, S::Error> {
        v.as_slice().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DVector<f64>, D::Error> {
        Ok(DVector::from_vec(Vec::deserialize(d)?))
    }
}

/// Builds a matrix from row vectors; an empty list gives a `0×0` matrix.
pub fn from_rows(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::Parse("ragged matrix rows".into()));
    }
    Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

pub fn write_matrix_csv<W: Write>(m: &DMatrix<f64>, w: &mut W) -> Result<()> {
    writeln!(w, "{},{}", m.nrows(), m.ncols())?;
    for row in m.row_iter() {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
        writeln!(w, "{}", cells.join(","))?;
    }
    Ok(())
}

pub fn read_matrix_csv<R: BufRead>(r: R) -> Result<DMatrix<f64>> {
    let mut lines = r.lines().filter(|l| l.as_ref().map_or(true, |s| !s.trim().is_empty()));
    let header = lines.next().ok_or_else(|| Error::Parse("empty matrix file".into()))??;
    let dims: Vec<usize> = header
        .split(',')
        .map(|t| t.trim().parse::<usize>().map_err(|e| Error::Parse(format!("bad header '{header}': {e}"))))
        .collect::<Result<_>>()?;
    if dims.len() != 2 {
        return Err(Error::Parse(format!("header must be 'rows,cols', got '{header}'")));
    }
    let mut rows = Vec::with_capacity(dims[0]);
    for line in lines {
        let line = line?;
        let row: Vec<f64> = line
            .split(',')
            .map(|t| t.trim().parse::<f64>().map_err(|e| Error::Parse(format!("bad entry '{t}': {e}"))))
            .collect::<Result<_>>()?;
        rows.push(row);
    }
    let m = from_rows(&rows)?;
    if m.nrows() != dims[0] || (dims[0] > 0 && m.ncols() != dims[1]) {
        return Err(Error::Parse(format!("header says {}×{}, data is {}×{}", dims[0], dims[1], m.nrows(), m.ncols())));
    }
    Ok(if dims[0] == 0 { DMatrix::zeros(0, dims[1]) } else { m })
}

/// Reads a matrix from `.csv` or `.json` (envelope) depending on the extension.
pub fn load_matrix(path: &Path) -> Result<DMatrix<f64>> {
    let file = std::fs::File::open(path)?;
    let reader = std::io::BufReader::new(file);
    if path.extension().is_some_and(|e| e == "json") {
        let env: Envelope = serde_json::from_reader(reader)?;
        env.matrix()
    } else {
        read_matrix_csv(reader)
    }
}

pub fn save_matrix_csv(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_matrix_csv(m, &mut f)?;
    f.flush()?;
    Ok(())
}

/// JSON envelope for matrices and block vectors.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Envelope {
    pub dims: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub block_dims: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub block_norm: Option<BlockNorm>,
    /// row-major entries
    pub data: Vec<f64>,
}

impl Envelope {
    pub fn from_matrix(m: &DMatrix<f64>) -> Self {
        Self {
            dims: vec![m.nrows(), m.ncols()],
            block_dims: None,
            block_norm: None,
            data: m.transpose().as_slice().to_vec(),
        }
    }

    /// Envelope for a representation vector under a structure.
    pub fn from_block_vector(w: &[f64], rs: &RepresentationStructure) -> Self {
        Self {
            dims: vec![w.len()],
            block_dims: Some(rs.block_dims().to_vec()),
            block_norm: rs.uniform_norm(),
            data: w.to_vec(),
        }
    }

    pub fn matrix(&self) -> Result<DMatrix<f64>> {
        let (r, c) = match self.dims.as_slice() {
            [n] => (*n, 1),
            [r, c] => (*r, *c),
            _ => return Err(Error::Parse(format!("unsupported dims {:?}", self.dims))),
        };
        if r * c != self.data.len() {
            return Err(Error::Parse(format!("dims {:?} do not match {} entries", self.dims, self.data.len())));
        }
        Ok(DMatrix::from_row_slice(r, c, &self.data))
    }
}
