//! Chain files.
//!
//! CSV: comma separated, one row per iteration, optional header row detected
//! by a non-numeric first row. Binary: a 16-byte little-endian header
//! `{magic "CVK1", n: u64, p: u32}` followed by `n * p` row-major `f64`s.

use std::fs;
use std::io::{self, BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::ChainMatrix;

pub const BIN_MAGIC: [u8; 4] = *b"CVK1";
pub const BIN_HEADER_LEN: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Bin,
}

impl FromStr for Format {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "bin" => Ok(Format::Bin),
            _ => Err(Error::Config(format!("unknown format '{s}' (expected csv or bin)"))),
        }
    }
}

impl std::fmt::Display for Format {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Format::Csv => "csv",
            Format::Bin => "bin",
        })
    }
}

pub fn load_chain(path: impl AsRef<Path>, format: Format) -> Result<ChainMatrix> {
    let file = fs::File::open(path)?;
    read_chain(BufReader::new(file), format)
}

pub fn read_chain<R: Read>(reader: R, format: Format) -> Result<ChainMatrix> {
    match format {
        Format::Csv => read_csv(BufReader::new(reader)),
        Format::Bin => read_bin(reader),
    }
}

pub fn save_chain(path: impl AsRef<Path>, chain: &ChainMatrix, format: Format, header: bool) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    write_chain(&mut w, chain, format, header)?;
    w.flush()?;
    Ok(())
}

pub fn write_chain<W: Write>(w: &mut W, chain: &ChainMatrix, format: Format, header: bool) -> Result<()> {
    match format {
        Format::Csv => write_csv(w, chain, header),
        Format::Bin => write_bin(w, chain),
    }
}

/// Header is `y1,...,yp`. Values use Rust's shortest round-trip formatting,
/// so reading back is bit-exact.
pub fn write_csv<W: Write>(w: &mut W, chain: &ChainMatrix, header: bool) -> Result<()> {
    let p = chain.p();
    if header {
        let names: Vec<String> = (1..=p).map(|j| format!("y{j}")).collect();
        writeln!(w, "{}", names.join(","))?;
    }
    let mut line = String::new();
    for row in chain.rows() {
        line.clear();
        for (j, v) in row.iter().enumerate() {
            if j > 0 {
                line.push(',');
            }
            line.push_str(&format!("{v:?}"));
        }
        line.push('\n');
        w.write_all(line.as_bytes())?;
    }
    Ok(())
}

pub fn read_csv<R: BufRead>(reader: R) -> Result<ChainMatrix> {
    let mut data = Vec::new();
    let mut p = None;
    let mut n = 0usize;
    let mut first = true;
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        let line = line.strip_suffix('\r').unwrap_or(&line);
        if line.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        if first {
            first = false;
            if cells.iter().any(|c| c.parse::<f64>().is_err()) {
                p = Some(cells.len());
                continue;
            }
        }
        match p {
            None => p = Some(cells.len()),
            Some(w) if w != cells.len() => {
                return Err(Error::Parse {
                    line: lineno,
                    col: cells.len().min(w) + 1,
                    msg: format!("expected {w} fields, found {}", cells.len()),
                })
            }
            _ => {}
        }
        for (j, c) in cells.iter().enumerate() {
            let v: f64 = c.parse().map_err(|_| Error::Parse {
                line: lineno,
                col: j + 1,
                msg: format!("not a number: '{c}'"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse { line: lineno, col: j + 1, msg: format!("non-finite value '{c}'") });
            }
            data.push(v);
        }
        n += 1;
    }
    let p = p.ok_or_else(|| Error::Format("empty chain file".into()))?;
    ChainMatrix::new(data, n, p)
}

pub fn write_bin<W: Write>(w: &mut W, chain: &ChainMatrix) -> Result<()> {
    let p = u32::try_from(chain.p()).map_err(|_| Error::Format("p does not fit in u32".into()))?;
    w.write_all(&BIN_MAGIC)?;
    w.write_all(&(chain.n() as u64).to_le_bytes())?;
    w.write_all(&p.to_le_bytes())?;
    for v in chain.as_slice() {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_bin<R: Read>(mut reader: R) -> Result<ChainMatrix> {
    let mut header = [0u8; BIN_HEADER_LEN];
    reader.read_exact(&mut header).map_err(|e| match e.kind() {
        io::ErrorKind::UnexpectedEof => Error::Format("truncated header".into()),
        _ => Error::Io(e),
    })?;
    if header[..4] != BIN_MAGIC {
        return Err(Error::Format(format!("bad magic {:?}", &header[..4])));
    }
    let n = u64::from_le_bytes(header[4..12].try_into().unwrap()) as usize;
    let p = u32::from_le_bytes(header[12..16].try_into().unwrap()) as usize;
    let len = n
        .checked_mul(p)
        .and_then(|x| x.checked_mul(8))
        .ok_or_else(|| Error::Format("header size overflows".into()))?;
    let mut body = Vec::new();
    reader.take(len as u64 + 1).read_to_end(&mut body)?;
    if body.len() < len {
        return Err(Error::Format(format!("truncated body: expected {len} bytes, found {}", body.len())));
    }
    if body.len() > len {
        return Err(Error::Format("trailing bytes after body".into()));
    }
    let data = body.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    ChainMatrix::new(data, n, p)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn csv(s: &str) -> Result<ChainMatrix> {
        read_csv(s.as_bytes())
    }

    #[test]
    fn plain_and_header_csv() {
        let a = csv("1,2\n3,4\n5,6").unwrap();
        assert_eq!((a.n(), a.p()), (3, 2));
        assert_eq!(a.as_slice(), &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let b = csv("a,b\n1,2\n3,4\n5,6\n").unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn csv_errors_locate_the_cell() {
        match csv("1,2\n3\n") {
            Err(Error::Parse { line: 2, .. }) => {}
            other => panic!("{other:?}"),
        }
        match csv("1,2\n3,x\n") {
            Err(Error::Parse { line: 2, col: 2, .. }) => {}
            other => panic!("{other:?}"),
        }
        match csv("1,2\nNaN,1\n") {
            Err(Error::Parse { line: 2, col: 1, .. }) => {}
            other => panic!("{other:?}"),
        }
        match csv("1,2\n3,inf\n") {
            Err(Error::Parse { line: 2, col: 2, .. }) => {}
            other => panic!("{other:?}"),
        }
        assert!(csv("").is_err());
    }

    #[test]
    fn round_trips_are_bit_exact() {
        let data: Vec<f64> = (0..30).map(|i| (i as f64 * 0.731).sin() / 3.0 + 1e-300 * i as f64).collect();
        let chain = ChainMatrix::new(data, 10, 3).unwrap();
        for (fmt, header) in [(Format::Csv, true), (Format::Csv, false), (Format::Bin, false)] {
            let mut buf = Vec::new();
            write_chain(&mut buf, &chain, fmt, header).unwrap();
            let back = read_chain(buf.as_slice(), fmt).unwrap();
            assert_eq!(back, chain, "{fmt}");
        }
    }

    #[test]
    fn binary_header_layout_and_errors() {
        let chain = ChainMatrix::new(vec![1.0, 2.0, 3.0, 4.0], 2, 2).unwrap();
        let mut buf = Vec::new();
        write_bin(&mut buf, &chain).unwrap();
        assert_eq!(buf.len(), 16 + 32);
        assert_eq!(&buf[..4], b"CVK1");
        assert_eq!(u64::from_le_bytes(buf[4..12].try_into().unwrap()), 2);
        assert!(matches!(read_bin(&buf[..40]), Err(Error::Format(_))));
        assert!(matches!(read_bin(&buf[..10]), Err(Error::Format(_))));
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(matches!(read_bin(bad.as_slice()), Err(Error::Format(_))));
        let mut long = buf.clone();
        long.push(0);
        assert!(read_bin(long.as_slice()).is_err());
        let mut nan = buf;
        nan[16..24].copy_from_slice(&f64::NAN.to_le_bytes());
        assert!(matches!(read_bin(nan.as_slice()), Err(Error::NonFinite { row: 0, col: 0 })));
    }
}
