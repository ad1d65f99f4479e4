//! Raw matrix files: little-endian binary64, column-major, real plane first
//! and the imaginary plane after it. Shape and field live in a text sidecar
//! with the lines `rows=<int>`, `cols=<int>` and `field=real|complex`.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::matrix::{Field, Matrix};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Header {
    pub rows: usize,
    pub cols: usize,
    pub field: Field,
}

impl Header {
    pub fn of(m: &Matrix) -> Self {
        Header { rows: m.rows(), cols: m.cols(), field: m.field() }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let (mut rows, mut cols, mut field) = (None, None, None);
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Header(format!("expected key=value, got {line:?}")))?;
            let value = value.trim();
            let count = || {
                value.parse::<usize>().map_err(|_| Error::Header(format!("bad count {value:?}")))
            };
            match key.trim() {
                "rows" => rows = Some(count()?),
                "cols" => cols = Some(count()?),
                "field" => {
                    field = Some(match value {
                        "real" => Field::Real,
                        "complex" => Field::Complex,
                        _ => return Err(Error::Header(format!("unknown field {value:?}"))),
                    })
                }
                other => return Err(Error::Header(format!("unknown key {other:?}"))),
            }
        }
        match (rows, cols, field) {
            (Some(rows), Some(cols), Some(field)) if rows > 0 && cols > 0 => {
                Ok(Header { rows, cols, field })
            }
            _ => Err(Error::Header("rows, cols and field are all required".into())),
        }
    }

    pub fn render(&self) -> String {
        let field = match self.field {
            Field::Real => "real",
            Field::Complex => "complex",
        };
        format!("rows={}\ncols={}\nfield={}\n", self.rows, self.cols, field)
    }
}

/// Conventional sidecar location: the data path with `.hdr` appended.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".hdr");
    PathBuf::from(s)
}

pub fn read_matrix(path: &Path, header: &Path) -> Result<Matrix> {
    let h = Header::parse(&fs::read_to_string(header)?)?;
    let bytes = fs::read(path)?;
    decode(&bytes, h)
}

pub fn decode(bytes: &[u8], h: Header) -> Result<Matrix> {
    let planes = if h.field == Field::Complex { 2 } else { 1 };
    let len = h.rows * h.cols;
    let expected = len * planes;
    if bytes.len() % 8 != 0 || bytes.len() / 8 != expected {
        return Err(Error::SizeMismatch { expected, found: bytes.len() / 8 });
    }
    let mut values = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")));
    let re: Vec<f64> = values.by_ref().take(len).collect();
    let im = (planes == 2).then(|| values.collect::<Vec<f64>>());
    Matrix::from_planes(h.rows, h.cols, re, im)
}

pub fn encode(m: &Matrix) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 * m.re().len() * if m.is_complex() { 2 } else { 1 });
    for v in m.re().iter().chain(m.im().unwrap_or(&[])) {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn write_matrix(m: &Matrix, path: &Path) -> Result<()> {
    let mut file = fs::File::create(path)?;
    file.write_all(&encode(m))?;
    Ok(())
}

pub fn write_header(m: &Matrix, path: &Path) -> Result<()> {
    fs::write(path, Header::of(m).render())?;
    Ok(())
}

/// Writes the data file and its sidecar.
pub fn save(m: &Matrix, path: &Path) -> Result<()> {
    write_matrix(m, path)?;
    write_header(m, &sidecar_path(path))
}

/// Reads a data file using its conventional sidecar.
pub fn load(path: &Path) -> Result<Matrix> {
    read_matrix(path, &sidecar_path(path))
}
