//! On-disk matrix formats and index-list sidecars.
//!
//! Two formats are supported:
//!
//! * **CSV** — a header line `rows,cols`, then a dimension line with the two
//!   counts, then one comma-separated line per matrix row. Values are
//!   printed with shortest round-trip precision.
//! * **Binary** — magic bytes `RMAT1`, rows and cols as little-endian
//!   64-bit unsigned integers, then the row-major entries as little-endian
//!   IEEE-754 doubles. Round-trips are bit-exact.
//!
//! Index lists (e.g. which original columns a sketch kept) are stored as
//! plain text, one decimal index per line.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::DenseMatrix;
use crate::error::{Error, Result};

const MAGIC: &[u8; 5] = b"RMAT1";

pub fn write_matrix_csv<P: AsRef<Path>>(path: P, m: &DenseMatrix) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "rows,cols")?;
    writeln!(w, "{},{}", m.rows(), m.cols())?;
    let mut line = String::new();
    for i in 0..m.rows() {
        line.clear();
        for j in 0..m.cols() {
            if j > 0 {
                line.push(',');
            }
            line.push_str(&format!("{}", m.get(i, j)));
        }
        writeln!(w, "{line}")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_matrix_csv<P: AsRef<Path>>(path: P) -> Result<DenseMatrix> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim() == "rows,cols" => {}
        other => {
            return Err(Error::Format(format!(
                "expected header line 'rows,cols', found {other:?}"
            )))
        }
    }
    let dims = lines
        .next()
        .ok_or_else(|| Error::Format("missing dimension line".into()))?;
    let mut it = dims.split(',');
    let parse_dim = |s: Option<&str>| -> Result<usize> {
        s.ok_or_else(|| Error::Format("dimension line needs two counts".into()))?
            .trim()
            .parse()
            .map_err(|e| Error::Format(format!("bad dimension: {e}")))
    };
    let rows = parse_dim(it.next())?;
    let cols = parse_dim(it.next())?;
    let mut data = Vec::with_capacity(rows.saturating_mul(cols));
    for (i, line) in lines.by_ref().take(rows).enumerate() {
        let mut count = 0;
        for field in line.split(',') {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|e| Error::Format(format!("row {i}: bad value {field:?}: {e}")))?;
            data.push(v);
            count += 1;
        }
        if count != cols {
            return Err(Error::Format(format!(
                "row {i} has {count} values, expected {cols}"
            )));
        }
    }
    if data.len() != rows * cols {
        return Err(Error::Format(format!(
            "expected {rows} data rows, found {}",
            data.len() / cols.max(1)
        )));
    }
    if lines.any(|l| !l.trim().is_empty()) {
        return Err(Error::Format("trailing content after matrix rows".into()));
    }
    DenseMatrix::new(rows, cols, data)
}

pub fn write_matrix_bin<P: AsRef<Path>>(path: P, m: &DenseMatrix) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&(m.rows() as u64).to_le_bytes())?;
    w.write_all(&(m.cols() as u64).to_le_bytes())?;
    for v in m.data() {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_matrix_bin<P: AsRef<Path>>(path: P) -> Result<DenseMatrix> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 5];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format(format!(
            "bad magic {magic:?}, expected {MAGIC:?}"
        )));
    }
    let mut u64buf = [0u8; 8];
    r.read_exact(&mut u64buf)?;
    let rows = u64::from_le_bytes(u64buf) as usize;
    r.read_exact(&mut u64buf)?;
    let cols = u64::from_le_bytes(u64buf) as usize;
    let count = rows
        .checked_mul(cols)
        .ok_or_else(|| Error::Format("dimension overflow".into()))?;
    let mut data = Vec::with_capacity(count);
    for _ in 0..count {
        r.read_exact(&mut u64buf)?;
        data.push(f64::from_le_bytes(u64buf));
    }
    if r.read(&mut [0u8; 1])? != 0 {
        return Err(Error::Format("trailing bytes after matrix data".into()));
    }
    DenseMatrix::new(rows, cols, data)
}

/// Reads either format, sniffing the binary magic bytes first.
pub fn read_matrix<P: AsRef<Path>>(path: P) -> Result<DenseMatrix> {
    let path = path.as_ref();
    let mut probe = [0u8; 5];
    let is_bin = {
        let mut f = File::open(path)?;
        matches!(f.read(&mut probe), Ok(5)) && &probe == MAGIC
    };
    if is_bin {
        read_matrix_bin(path)
    } else {
        read_matrix_csv(path)
    }
}

pub fn write_index_list<P: AsRef<Path>>(path: P, indices: &[usize]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for &i in indices {
        writeln!(w, "{i}")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_index_list<P: AsRef<Path>>(path: P) -> Result<Vec<usize>> {
    let r = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (lineno, line) in r.lines().enumerate() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        out.push(
            t.parse()
                .map_err(|e| Error::Format(format!("line {lineno}: bad index {t:?}: {e}")))?,
        );
    }
    Ok(out)
}
