//! Reader for IDX files (the MNIST distribution format), uncompressed.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::numerics::Tensor;

/// Decodes an IDX payload into an `f64` tensor with the file's shape.
pub fn decode_idx(bytes: &[u8]) -> Result<Tensor> {
    if bytes.len() < 4 || bytes[0] != 0 || bytes[1] != 0 {
        return Err(Error::Format("not an IDX file".into()));
    }
    let (code, rank) = (bytes[2], bytes[3] as usize);
    let size = match code {
        0x08 | 0x09 => 1,
        0x0B => 2,
        0x0C | 0x0D => 4,
        0x0E => 8,
        other => return Err(Error::Format(format!("unknown IDX type 0x{other:02x}"))),
    };
    let header = 4 + 4 * rank;
    if bytes.len() < header {
        return Err(Error::Format("truncated IDX header".into()));
    }
    let dims: Vec<usize> = bytes[4..header]
        .chunks_exact(4)
        .map(|c| u32::from_be_bytes(c.try_into().unwrap()) as usize)
        .collect();
    let count: usize = dims.iter().product();
    let payload = &bytes[header..];
    if payload.len() != count * size {
        return Err(Error::Format(format!(
            "IDX payload has {} bytes, shape needs {}",
            payload.len(),
            count * size
        )));
    }
    let data: Vec<f64> = match code {
        0x08 => payload.iter().map(|&b| b as f64).collect(),
        0x09 => payload.iter().map(|&b| b as i8 as f64).collect(),
        0x0B => payload
            .chunks_exact(2)
            .map(|c| i16::from_be_bytes(c.try_into().unwrap()) as f64)
            .collect(),
        0x0C => payload
            .chunks_exact(4)
            .map(|c| i32::from_be_bytes(c.try_into().unwrap()) as f64)
            .collect(),
        0x0D => payload
            .chunks_exact(4)
            .map(|c| f32::from_be_bytes(c.try_into().unwrap()) as f64)
            .collect(),
        _ => payload
            .chunks_exact(8)
            .map(|c| f64::from_be_bytes(c.try_into().unwrap()))
            .collect(),
    };
    Tensor::new(dims, data)
}

/// Loads `N x H x W` images as `N x 1 x H x W`, scaled by `scale`.
pub fn read_idx_images(path: &Path, scale: f64) -> Result<Tensor> {
    let t = decode_idx(&fs::read(path)?)?;
    if t.dims().len() != 3 {
        return Err(Error::Format("IDX images must have rank 3".into()));
    }
    let d = t.dims().to_vec();
    let data = t.into_data().into_iter().map(|v| v * scale).collect();
    Tensor::new(vec![d[0], 1, d[1], d[2]], data)
}

pub fn read_idx_labels(path: &Path) -> Result<Vec<usize>> {
    let t = decode_idx(&fs::read(path)?)?;
    if t.dims().len() != 1 {
        return Err(Error::Format("IDX labels must have rank 1".into()));
    }
    t.data()
        .iter()
        .map(|&v| {
            if v >= 0.0 && v.fract() == 0.0 {
                Ok(v as usize)
            } else {
                Err(Error::Format(format!("invalid label {v}")))
            }
        })
        .collect()
}
