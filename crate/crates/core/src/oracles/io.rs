//! Field export.
//!
//! CSV: a header naming the grid axes then the value column, followed by one
//! row per grid point in row-major order. Numbers use Rust's shortest
//! round-trip formatting.
//!
//! Binary (all integers and floats little-endian):
//!
//! ```text
//! magic        4 bytes  "SCLF"
//! version      u32      1
//! n_axes       u32
//! per axis:    u32 name length, name bytes (UTF-8), f64 lo, f64 hi,
//!              u64 node count, u8 closed flag (1 = both endpoints)
//! value name   u32 length, bytes (UTF-8)
//! n_values     u64      product of node counts
//! values       n_values x f64, row-major, first axis slowest
//! ```

use std::io::{Read, Write};

use super::{EvalGrid, GridAxis, OracleError};

pub const FIELD_MAGIC: &[u8; 4] = b"SCLF";
pub const FIELD_VERSION: u32 = 1;

/// Field values on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldFile {
    pub grid: EvalGrid,
    pub value_name: String,
    pub values: Vec<f64>,
}

fn io_err(e: std::io::Error) -> OracleError {
    OracleError::Io(e.to_string())
}

fn check_len(grid: &EvalGrid, values: &[f64]) -> Result<(), OracleError> {
    if grid.len() != values.len() {
        return Err(OracleError::LengthMismatch { pred: values.len(), reference: grid.len() });
    }
    Ok(())
}

pub fn write_field_csv<W: Write>(
    mut out: W,
    grid: &EvalGrid,
    values: &[f64],
    value_name: &str,
) -> Result<(), OracleError> {
    check_len(grid, values)?;
    let header: Vec<&str> = grid.axes.iter().map(|a| a.name.as_str()).chain([value_name]).collect();
    writeln!(out, "{}", header.join(",")).map_err(io_err)?;
    let d = grid.dim();
    for (p, v) in grid.points().chunks(d).zip(values) {
        let mut line = String::new();
        for c in p {
            line.push_str(&format!("{c},"));
        }
        line.push_str(&format!("{v}"));
        writeln!(out, "{line}").map_err(io_err)?;
    }
    Ok(())
}

pub fn write_field_binary<W: Write>(
    mut out: W,
    grid: &EvalGrid,
    values: &[f64],
    value_name: &str,
) -> Result<(), OracleError> {
    check_len(grid, values)?;
    let mut buf = Vec::with_capacity(64 + 8 * values.len());
    buf.extend_from_slice(FIELD_MAGIC);
    buf.extend_from_slice(&FIELD_VERSION.to_le_bytes());
    buf.extend_from_slice(&(grid.dim() as u32).to_le_bytes());
    for a in &grid.axes {
        put_str(&mut buf, &a.name);
        buf.extend_from_slice(&a.lo.to_le_bytes());
        buf.extend_from_slice(&a.hi.to_le_bytes());
        buf.extend_from_slice(&(a.n as u64).to_le_bytes());
        buf.push(u8::from(a.closed));
    }
    put_str(&mut buf, value_name);
    buf.extend_from_slice(&(values.len() as u64).to_le_bytes());
    for v in values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    out.write_all(&buf).map_err(io_err)
}

fn put_str(buf: &mut Vec<u8>, s: &str) {
    buf.extend_from_slice(&(s.len() as u32).to_le_bytes());
    buf.extend_from_slice(s.as_bytes());
}

struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], OracleError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.data.len());
        let end = end.ok_or_else(|| OracleError::Io(format!("truncated field file at byte {}", self.pos)))?;
        let s = &self.data[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, OracleError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, OracleError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64, OracleError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn string(&mut self) -> Result<String, OracleError> {
        let n = self.u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|e| OracleError::Io(e.to_string()))
    }
}

pub fn read_field_binary<R: Read>(mut input: R) -> Result<FieldFile, OracleError> {
    let mut data = Vec::new();
    input.read_to_end(&mut data).map_err(io_err)?;
    let mut c = Cursor { data: &data, pos: 0 };
    if c.take(4)? != FIELD_MAGIC {
        return Err(OracleError::Io("bad magic".into()));
    }
    let version = c.u32()?;
    if version != FIELD_VERSION {
        return Err(OracleError::Io(format!("unsupported field version {version}")));
    }
    let n_axes = c.u32()? as usize;
    let mut axes = Vec::with_capacity(n_axes.min(16));
    for _ in 0..n_axes {
        let name = c.string()?;
        let lo = c.f64()?;
        let hi = c.f64()?;
        let n = c.u64()? as usize;
        let closed = match c.take(1)?[0] {
            0 => false,
            1 => true,
            b => return Err(OracleError::Io(format!("bad closed flag {b}"))),
        };
        axes.push(GridAxis { name, lo, hi, n, closed });
    }
    let grid = EvalGrid::new(axes)?;
    let value_name = c.string()?;
    let n_values = c.u64()? as usize;
    if n_values != grid.len() {
        return Err(OracleError::Io(format!("{n_values} values for a grid of {} points", grid.len())));
    }
    let values = (0..n_values).map(|_| c.f64()).collect::<Result<Vec<_>, _>>()?;
    if c.pos != data.len() {
        return Err(OracleError::Io("trailing bytes after values".into()));
    }
    Ok(FieldFile { grid, value_name, values })
}
