//! Binary tensor container.
//!
//! Layout, all little-endian: magic `DSTP`, `u32` version (1), `u8` dtype
//! (1 = f32, 2 = f64, 3 = u8, 4 = i32), `u32` rank, `u32` per dimension,
//! then the row-major payload.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::numerics::Tensor;

const MAGIC: &[u8; 4] = b"DSTP";
const VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DType {
    F32 = 1,
    F64 = 2,
    U8 = 3,
    I32 = 4,
}

impl DType {
    pub fn size(self) -> usize {
        match self {
            DType::F32 | DType::I32 => 4,
            DType::F64 => 8,
            DType::U8 => 1,
        }
    }

    fn from_code(code: u8) -> Result<Self> {
        Ok(match code {
            1 => DType::F32,
            2 => DType::F64,
            3 => DType::U8,
            4 => DType::I32,
            other => return Err(Error::Format(format!("unknown dtype code {other}"))),
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum TensorData {
    F32(Vec<f32>),
    F64(Vec<f64>),
    U8(Vec<u8>),
    I32(Vec<i32>),
}

impl TensorData {
    pub fn dtype(&self) -> DType {
        match self {
            TensorData::F32(_) => DType::F32,
            TensorData::F64(_) => DType::F64,
            TensorData::U8(_) => DType::U8,
            TensorData::I32(_) => DType::I32,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            TensorData::F32(v) => v.len(),
            TensorData::F64(v) => v.len(),
            TensorData::U8(v) => v.len(),
            TensorData::I32(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TensorFile {
    dims: Vec<u32>,
    data: TensorData,
}

impl TensorFile {
    pub fn new(dims: Vec<u32>, data: TensorData) -> Result<Self> {
        let expected = dims
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d as usize));
        match expected {
            Some(n) if n == data.len() => Ok(Self { dims, data }),
            _ => Err(Error::Format(format!(
                "shape {dims:?} does not match {} elements",
                data.len()
            ))),
        }
    }

    pub fn dims(&self) -> &[u32] {
        &self.dims
    }

    pub fn data(&self) -> &TensorData {
        &self.data
    }

    pub fn from_tensor(t: &Tensor) -> Result<Self> {
        Self::new(dims_u32(t.dims())?, TensorData::F64(t.data().to_vec()))
    }

    pub fn from_labels(labels: &[usize]) -> Result<Self> {
        let values = labels
            .iter()
            .map(|&l| i32::try_from(l).map_err(|_| Error::Format(format!("label {l} exceeds i32"))))
            .collect::<Result<Vec<_>>>()?;
        Self::new(vec![labels.len() as u32], TensorData::I32(values))
    }

    /// Converts any dtype to an `f64` tensor.
    pub fn to_tensor(&self) -> Result<Tensor> {
        let data: Vec<f64> = match &self.data {
            TensorData::F32(v) => v.iter().map(|&x| x as f64).collect(),
            TensorData::F64(v) => v.clone(),
            TensorData::U8(v) => v.iter().map(|&x| x as f64).collect(),
            TensorData::I32(v) => v.iter().map(|&x| x as f64).collect(),
        };
        Tensor::new(self.dims.iter().map(|&d| d as usize).collect(), data)
    }

    /// Reads a rank-1 integer tensor as class indices.
    pub fn to_labels(&self) -> Result<Vec<usize>> {
        if self.dims.len() != 1 {
            return Err(Error::Format("labels must be a rank-1 tensor".into()));
        }
        match &self.data {
            TensorData::U8(v) => Ok(v.iter().map(|&x| x as usize).collect()),
            TensorData::I32(v) => v
                .iter()
                .map(|&x| {
                    usize::try_from(x).map_err(|_| Error::Format(format!("negative label {x}")))
                })
                .collect(),
            _ => Err(Error::Format("labels must be u8 or i32".into())),
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        let dtype = self.data.dtype();
        let mut out = Vec::with_capacity(13 + 4 * self.dims.len() + self.data.len() * dtype.size());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.push(dtype as u8);
        out.extend_from_slice(&(self.dims.len() as u32).to_le_bytes());
        for d in &self.dims {
            out.extend_from_slice(&d.to_le_bytes());
        }
        match &self.data {
            TensorData::F32(v) => v
                .iter()
                .for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
            TensorData::F64(v) => v
                .iter()
                .for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
            TensorData::U8(v) => out.extend_from_slice(v),
            TensorData::I32(v) => v
                .iter()
                .for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(Error::Format("bad magic".into()));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::Format(format!("unsupported version {version}")));
        }
        let dtype = DType::from_code(r.take(1)?[0])?;
        let rank = r.u32()? as usize;
        let dims = (0..rank).map(|_| r.u32()).collect::<Result<Vec<_>>>()?;
        let count = dims
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d as usize))
            .ok_or_else(|| Error::Format("shape overflows".into()))?;
        let payload_len = count
            .checked_mul(dtype.size())
            .ok_or_else(|| Error::Format("shape overflows".into()))?;
        let payload = r.take(payload_len)?;
        if r.pos != bytes.len() {
            return Err(Error::Format("trailing bytes after payload".into()));
        }
        let data = match dtype {
            DType::F32 => TensorData::F32(
                payload
                    .chunks_exact(4)
                    .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                    .collect(),
            ),
            DType::F64 => TensorData::F64(
                payload
                    .chunks_exact(8)
                    .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                    .collect(),
            ),
            DType::U8 => TensorData::U8(payload.to_vec()),
            DType::I32 => TensorData::I32(
                payload
                    .chunks_exact(4)
                    .map(|c| i32::from_le_bytes(c.try_into().unwrap()))
                    .collect(),
            ),
        };
        Self::new(dims, data)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::decode(&fs::read(path)?)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.encode())
    }
}

fn dims_u32(dims: &[usize]) -> Result<Vec<u32>> {
    dims.iter()
        .map(|&d| u32::try_from(d).map_err(|_| Error::Format(format!("dimension {d} exceeds u32"))))
        .collect()
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Format("truncated file".into()))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

/// Writes to a temporary file beside `path`, then renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}
