//! Field serialization.
//!
//! **CSV**: header `i0,…,i{n-1},value`, then one row per node in row-major
//! order (last axis fastest), integer indices followed by the value in
//! shortest round-trip decimal form.
//!
//! **Binary** (all little-endian):
//!
//! | bytes | content |
//! |-------|---------|
//! | 4     | magic `AMGF` |
//! | 4     | `u32` format version (1) |
//! | 4     | `u32` dimension `n` |
//! | 24·n  | per axis: `f64` lower, `f64` upper, `u64` node count |
//! | 8·N   | `f64` values, row-major |

use std::io::{Read, Write};

use super::{Grid, GridField};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"AMGF";
pub const VERSION: u32 = 1;

/// Shortest round-trip decimal representation of a float.
pub fn format_f64(x: f64) -> String {
    let mut buf = ryu::Buffer::new();
    buf.format(x).to_string()
}

pub fn write_csv<W: Write>(field: &GridField, mut out: W) -> Result<()> {
    let g = field.grid();
    let n = g.dim();
    let header: Vec<String> = (0..n).map(|k| format!("i{k}")).collect();
    writeln!(out, "{},value", header.join(","))?;
    for (idx, v) in field.values().iter().enumerate() {
        let m = g.multi_index(idx);
        for k in 0..n {
            write!(out, "{},", m[k])?;
        }
        writeln!(out, "{}", format_f64(*v))?;
    }
    Ok(())
}

/// Reads a CSV field onto a known grid; every node must appear exactly once.
pub fn read_csv<R: Read>(grid: Grid, mut input: R) -> Result<GridField> {
    let mut text = String::new();
    input.read_to_string(&mut text)?;
    let n = grid.dim();
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| Error::Input("empty CSV".into()))?;
    if header.split(',').count() != n + 1 {
        return Err(Error::Input(format!("CSV header {header:?} does not match dimension {n}")));
    }
    let mut values = vec![f64::NAN; grid.len()];
    let mut seen = vec![false; grid.len()];
    for (line_no, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != n + 1 {
            return Err(Error::Input(format!("CSV line {} has {} columns", line_no + 2, cols.len())));
        }
        let mut m = [0usize; 3];
        for k in 0..n {
            m[k] = cols[k]
                .trim()
                .parse()
                .map_err(|_| Error::Input(format!("bad index on CSV line {}", line_no + 2)))?;
            if m[k] >= grid.counts()[k] {
                return Err(Error::Input(format!("index out of range on CSV line {}", line_no + 2)));
            }
        }
        let idx = grid.index(&m);
        if seen[idx] {
            return Err(Error::Input(format!("duplicate node on CSV line {}", line_no + 2)));
        }
        seen[idx] = true;
        values[idx] = cols[n]
            .trim()
            .parse()
            .map_err(|_| Error::Input(format!("bad value on CSV line {}", line_no + 2)))?;
    }
    if seen.iter().any(|s| !s) {
        return Err(Error::Input("CSV does not cover every node".into()));
    }
    GridField::new(grid, values)
}

pub fn write_binary<W: Write>(field: &GridField, mut out: W) -> Result<()> {
    let g = field.grid();
    out.write_all(MAGIC)?;
    out.write_all(&VERSION.to_le_bytes())?;
    out.write_all(&(g.dim() as u32).to_le_bytes())?;
    for k in 0..g.dim() {
        out.write_all(&g.lower()[k].to_le_bytes())?;
        out.write_all(&g.upper()[k].to_le_bytes())?;
        out.write_all(&(g.counts()[k] as u64).to_le_bytes())?;
    }
    for v in field.values() {
        out.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_binary<R: Read>(mut input: R) -> Result<GridField> {
    let mut word = [0u8; 4];
    input.read_exact(&mut word)?;
    if &word != MAGIC {
        return Err(Error::Input("not an AMGF field file".into()));
    }
    input.read_exact(&mut word)?;
    let version = u32::from_le_bytes(word);
    if version != VERSION {
        return Err(Error::Input(format!("unsupported AMGF version {version}")));
    }
    input.read_exact(&mut word)?;
    let dim = u32::from_le_bytes(word) as usize;
    if dim == 0 || dim > 3 {
        return Err(Error::Input(format!("bad dimension {dim} in AMGF header")));
    }
    let mut bounds = Vec::with_capacity(dim);
    let mut counts = Vec::with_capacity(dim);
    let mut eight = [0u8; 8];
    for _ in 0..dim {
        input.read_exact(&mut eight)?;
        let a = f64::from_le_bytes(eight);
        input.read_exact(&mut eight)?;
        let b = f64::from_le_bytes(eight);
        input.read_exact(&mut eight)?;
        bounds.push((a, b));
        counts.push(u64::from_le_bytes(eight) as usize);
    }
    let grid = Grid::new(&bounds, &counts)?;
    let mut values = Vec::with_capacity(grid.len());
    for _ in 0..grid.len() {
        input.read_exact(&mut eight)?;
        values.push(f64::from_le_bytes(eight));
    }
    GridField::new(grid, values)
}
