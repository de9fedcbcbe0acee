//! Flat binary field container with a JSON sidecar.
//!
//! ```text
//! magic      8 bytes  "VFPNSFLD"
//! version    u32
//! endian     u32      0x01020304 written little-endian
//! name_len   u32, then UTF-8 name
//! n_x u64, side f64, n_v u64 (0 for spatial fields), v_max f64
//! components u64, values u64
//! values     f64 little-endian, row-major, component-major
//! ```
//!
//! The sidecar `<path>.json` repeats the descriptors and carries free-form
//! metadata.

use crate::error::{Error, Result};
use crate::grid::{PhaseDensity, ScalarField, SpatialGrid, VectorField, VelocityGrid};
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

const MAGIC: &[u8; 8] = b"VFPNSFLD";
const VERSION: u32 = 1;
const ENDIAN_TAG: u32 = 0x0102_0304;

#[derive(Clone, Debug, PartialEq)]
pub enum Field {
    Scalar(ScalarField),
    Vector(VectorField),
    Phase(PhaseDensity),
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct Sidecar {
    pub field: String,
    pub kind: String,
    pub n_x: usize,
    pub side: f64,
    pub n_v: usize,
    pub v_max: f64,
    pub components: usize,
    pub values: usize,
    pub meta: serde_json::Value,
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

impl Field {
    fn kind(&self) -> &'static str {
        match self {
            Field::Scalar(_) => "scalar",
            Field::Vector(_) => "vector",
            Field::Phase(_) => "phase",
        }
    }
}

pub fn write_field(path: impl AsRef<Path>, name: &str, field: &Field, meta: serde_json::Value) -> Result<()> {
    let path = path.as_ref();
    let (space, vel, comps): (SpatialGrid, Option<VelocityGrid>, Vec<&[f64]>) = match field {
        Field::Scalar(s) => (*s.grid(), None, vec![s.data()]),
        Field::Vector(v) => (*v.grid(), None, vec![v.comp(0), v.comp(1)]),
        Field::Phase(f) => (*f.space(), Some(*f.vel()), vec![f.data()]),
    };
    let values: usize = comps.iter().map(|c| c.len()).sum();
    let mut buf = Vec::with_capacity(64 + name.len() + 8 * values);
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&ENDIAN_TAG.to_le_bytes());
    buf.extend_from_slice(&(name.len() as u32).to_le_bytes());
    buf.extend_from_slice(name.as_bytes());
    buf.extend_from_slice(&(space.n() as u64).to_le_bytes());
    buf.extend_from_slice(&space.side().to_le_bytes());
    buf.extend_from_slice(&(vel.map_or(0, |v| v.n()) as u64).to_le_bytes());
    buf.extend_from_slice(&vel.map_or(0.0, |v| v.v_max()).to_le_bytes());
    buf.extend_from_slice(&(comps.len() as u64).to_le_bytes());
    buf.extend_from_slice(&(values as u64).to_le_bytes());
    for c in &comps {
        for x in c.iter() {
            buf.extend_from_slice(&x.to_le_bytes());
        }
    }
    let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(&buf).map_err(|e| Error::io(path, e))?;

    let side = Sidecar {
        field: name.to_string(),
        kind: field.kind().to_string(),
        n_x: space.n(),
        side: space.side(),
        n_v: vel.map_or(0, |v| v.n()),
        v_max: vel.map_or(0.0, |v| v.v_max()),
        components: comps.len(),
        values,
        meta,
    };
    let sp = sidecar_path(path);
    let text = serde_json::to_string_pretty(&side)?;
    std::fs::write(&sp, text).map_err(|e| Error::io(&sp, e))?;
    Ok(())
}

struct Cursor<'a> {
    b: &'a [u8],
    at: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.at + n > self.b.len() {
            return Err(Error::Format("truncated file".into()));
        }
        let s = &self.b[self.at..self.at + n];
        self.at += n;
        Ok(s)
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

/// Reads a field written by [`write_field`]; returns its name and data.
pub fn read_field(path: impl AsRef<Path>) -> Result<(String, Field)> {
    let path = path.as_ref();
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    let mut c = Cursor { b: &bytes, at: 0 };
    if c.take(8)? != MAGIC {
        return Err(Error::Format("bad magic".into()));
    }
    let version = c.u32()?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    if c.u32()? != ENDIAN_TAG {
        return Err(Error::Format("endianness tag mismatch".into()));
    }
    let name_len = c.u32()? as usize;
    let name = String::from_utf8(c.take(name_len)?.to_vec()).map_err(|_| Error::Format("name is not UTF-8".into()))?;
    let n_x = c.u64()? as usize;
    let side = c.f64()?;
    let n_v = c.u64()? as usize;
    let v_max = c.f64()?;
    let comps = c.u64()? as usize;
    let values = c.u64()? as usize;
    let mut data = Vec::with_capacity(values);
    for _ in 0..values {
        data.push(c.f64()?);
    }
    if c.at != bytes.len() {
        return Err(Error::Format("trailing bytes".into()));
    }
    let space = SpatialGrid::new(n_x, side)?;
    let field = if n_v > 0 {
        Field::Phase(PhaseDensity::from_vec(space, VelocityGrid::new(n_v, v_max)?, data)?)
    } else if comps == 1 {
        Field::Scalar(ScalarField::from_vec(space, data)?)
    } else if comps == 2 {
        let b = data.split_off(space.cells());
        Field::Vector(VectorField::from_vecs(space, data, b)?)
    } else {
        return Err(Error::Format(format!("unsupported component count {comps}")));
    };
    Ok((name, field))
}

pub fn read_sidecar(path: impl AsRef<Path>) -> Result<Sidecar> {
    let sp = sidecar_path(path.as_ref());
    let text = std::fs::read_to_string(&sp).map_err(|e| Error::io(&sp, e))?;
    Ok(serde_json::from_str(&text)?)
}
