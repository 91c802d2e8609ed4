//! MatrixMarket coordinate format (`real general`) reader and writer.

use std::io::{BufRead, Write};

use super::sparse::SparseMatrix;
use crate::error::{Error, Result};

pub fn write_matrix_market<W: Write>(a: &SparseMatrix, mut w: W) -> Result<()> {
    writeln!(w, "%%MatrixMarket matrix coordinate real general")?;
    writeln!(w, "{} {} {}", a.nrows(), a.ncols(), a.nnz())?;
    for (i, j, v) in a.triplets() {
        writeln!(w, "{} {} {:e}", i + 1, j + 1, v)?;
    }
    Ok(())
}

/// Reads a coordinate-format matrix. `symmetric` and `skew-symmetric` files are expanded.
pub fn read_matrix_market<R: BufRead>(r: R) -> Result<SparseMatrix> {
    let mut lines = r.lines();
    let header = lines.next().ok_or_else(|| Error::Parse("empty MatrixMarket input".into()))??;
    let tokens: Vec<String> = header.split_whitespace().map(|t| t.to_ascii_lowercase()).collect();
    if tokens.len() < 5 || tokens[0] != "%%matrixmarket" || tokens[1] != "matrix" || tokens[2] != "coordinate" {
        return Err(Error::Parse(format!("unsupported MatrixMarket header: {header}")));
    }
    if tokens[3] != "real" && tokens[3] != "integer" {
        return Err(Error::Parse(format!("unsupported field type {}", tokens[3])));
    }
    let symmetry = tokens[4].clone();
    let mut size: Option<(usize, usize, usize)> = None;
    let mut triplets = Vec::new();
    for line in lines {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('%') {
            continue;
        }
        let parts: Vec<&str> = line.split_whitespace().collect();
        match size {
            None => {
                if parts.len() != 3 {
                    return Err(Error::Parse(format!("bad size line: {line}")));
                }
                let p = |s: &str| s.parse::<usize>().map_err(|e| Error::Parse(format!("{s}: {e}")));
                size = Some((p(parts[0])?, p(parts[1])?, p(parts[2])?));
            }
            Some((m, n, _)) => {
                if parts.len() != 3 {
                    return Err(Error::Parse(format!("bad entry line: {line}")));
                }
                let i: usize = parts[0].parse().map_err(|e| Error::Parse(format!("{line}: {e}")))?;
                let j: usize = parts[1].parse().map_err(|e| Error::Parse(format!("{line}: {e}")))?;
                let v: f64 = parts[2].parse().map_err(|e| Error::Parse(format!("{line}: {e}")))?;
                if i == 0 || j == 0 || i > m || j > n {
                    return Err(Error::Parse(format!("entry ({i}, {j}) outside {m}x{n}")));
                }
                triplets.push((i - 1, j - 1, v));
                if i != j {
                    match symmetry.as_str() {
                        "symmetric" => triplets.push((j - 1, i - 1, v)),
                        "skew-symmetric" => triplets.push((j - 1, i - 1, -v)),
                        _ => {}
                    }
                }
            }
        }
    }
    let (m, n, nnz) = size.ok_or_else(|| Error::Parse("missing size line".into()))?;
    let stored = if symmetry == "general" { triplets.len() } else { nnz };
    if symmetry == "general" && stored != nnz {
        return Err(Error::Parse(format!("expected {nnz} entries, found {stored}")));
    }
    Ok(SparseMatrix::from_triplets(m, n, &triplets))
}
