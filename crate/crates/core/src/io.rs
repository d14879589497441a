//! File formats: Matrix Market coordinate files for sparse matrices,
//! headerless CSV columns for vectors, and raw little-endian f64 grids with a
//! small JSON sidecar header for 3-D fields.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gmrf::GridDims;
use crate::sparse::SparseSpd;

/// Reads a Matrix Market coordinate file. `symmetric` storage (one triangle)
/// is expanded to the full pattern; `general` files must already carry it.
pub fn read_matrix_market(path: &Path) -> Result<SparseSpd> {
    let file = BufReader::new(File::open(path)?);
    let mut lines = file.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Parse("empty Matrix Market file".into()))??;
    let fields: Vec<String> = header.split_whitespace().map(|s| s.to_lowercase()).collect();
    if fields.len() < 5 || fields[0] != "%%matrixmarket" || fields[1] != "matrix" {
        return Err(Error::Parse("not a Matrix Market matrix file".into()));
    }
    if fields[2] != "coordinate" || fields[3] != "real" {
        return Err(Error::Parse(format!(
            "unsupported Matrix Market flavor '{} {}': need coordinate real",
            fields[2], fields[3]
        )));
    }
    let symmetric = match fields[4].as_str() {
        "symmetric" => true,
        "general" => false,
        other => return Err(Error::Parse(format!("unsupported symmetry '{other}'"))),
    };
    let mut size_line: Option<String> = None;
    for line in lines.by_ref() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('%') {
            continue;
        }
        size_line = Some(trimmed.to_string());
        break;
    }
    let size_line = size_line.ok_or_else(|| Error::Parse("missing size line".into()))?;
    let dims: Vec<usize> = size_line
        .split_whitespace()
        .map(|t| t.parse::<usize>().map_err(|_| Error::Parse(format!("bad size entry '{t}'"))))
        .collect::<Result<_>>()?;
    if dims.len() != 3 {
        return Err(Error::Parse("size line must have rows cols nnz".into()));
    }
    let (rows, cols, nnz) = (dims[0], dims[1], dims[2]);
    if rows != cols {
        return Err(Error::Parse("matrix must be square".into()));
    }
    let mut triplets = Vec::with_capacity(if symmetric { 2 * nnz } else { nnz });
    let mut seen = 0usize;
    for line in lines {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('%') {
            continue;
        }
        let mut it = t.split_whitespace();
        let i: usize = it
            .next()
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| Error::Parse(format!("bad entry line '{t}'")))?;
        let j: usize = it
            .next()
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| Error::Parse(format!("bad entry line '{t}'")))?;
        let v: f64 = it
            .next()
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| Error::Parse(format!("bad entry line '{t}'")))?;
        if i == 0 || j == 0 || i > rows || j > cols {
            return Err(Error::Parse(format!("index out of range in '{t}'")));
        }
        triplets.push((i - 1, j - 1, v));
        if symmetric && i != j {
            triplets.push((j - 1, i - 1, v));
        }
        seen += 1;
    }
    if seen != nnz {
        return Err(Error::Parse(format!("expected {nnz} entries, found {seen}")));
    }
    SparseSpd::from_triplets(rows, &triplets)
}

/// Writes the lower triangle as Matrix Market `coordinate real symmetric`.
pub fn write_matrix_market(path: &Path, a: &SparseSpd) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    let mut entries = Vec::new();
    for i in 0..a.n() {
        for (j, v) in a.row(i) {
            if j <= i {
                entries.push((i, j, v));
            }
        }
    }
    writeln!(out, "%%MatrixMarket matrix coordinate real symmetric")?;
    writeln!(out, "{} {} {}", a.n(), a.n(), entries.len())?;
    for (i, j, v) in entries {
        writeln!(out, "{} {} {:.17e}", i + 1, j + 1, v)?;
    }
    Ok(())
}

/// Reads a headerless one-column CSV of floats.
pub fn read_vector_csv(path: &Path) -> Result<Vec<f64>> {
    let file = BufReader::new(File::open(path)?);
    let mut v = Vec::new();
    for line in file.lines() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        v.push(
            t.parse::<f64>()
                .map_err(|_| Error::Parse(format!("bad float '{t}' in {}", path.display())))?,
        );
    }
    Ok(v)
}

/// Writes a vector as a headerless one-column CSV.
pub fn write_vector_csv(path: &Path, v: &[f64]) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    for x in v {
        writeln!(out, "{:.17e}", x)?;
    }
    Ok(())
}

/// Sidecar header for raw f64 grid files.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct GridHeader {
    pub dims: Vec<usize>,
    pub spacing: Vec<f64>,
}

/// Writes `path` as raw little-endian f64 values plus `path.json` with dims
/// and spacing.
pub fn write_grid(path: &Path, dims: GridDims, values: &[f64]) -> Result<()> {
    if values.len() != dims.len() {
        return Err(Error::contract("grid value count does not match dims"));
    }
    let mut out = BufWriter::new(File::create(path)?);
    for v in values {
        out.write_all(&v.to_le_bytes())?;
    }
    out.flush()?;
    let header = GridHeader {
        dims: dims.to_vec(),
        spacing: vec![1.0 / dims.nx as f64, 1.0 / dims.ny as f64, 1.0 / dims.nz as f64],
    };
    let mut hpath = path.as_os_str().to_owned();
    hpath.push(".json");
    let hfile = File::create(Path::new(&hpath))?;
    serde_json::to_writer_pretty(hfile, &header)
        .map_err(|e| Error::Parse(format!("header write failed: {e}")))?;
    Ok(())
}

/// Reads a raw f64 grid and its JSON header.
pub fn read_grid(path: &Path) -> Result<(GridHeader, Vec<f64>)> {
    let mut hpath = path.as_os_str().to_owned();
    hpath.push(".json");
    let header: GridHeader = serde_json::from_reader(File::open(Path::new(&hpath))?)
        .map_err(|e| Error::Parse(format!("bad grid header: {e}")))?;
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;
    if bytes.len() % 8 != 0 {
        return Err(Error::Parse("grid file length is not a multiple of 8".into()));
    }
    let values: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let expected: usize = header.dims.iter().product();
    if values.len() != expected {
        return Err(Error::Parse(format!(
            "grid holds {} values, header says {expected}",
            values.len()
        )));
    }
    Ok((header, values))
}
