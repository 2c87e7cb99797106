use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use thiserror::Error;

use super::annotation::BBox;

pub const VDM_MAGIC: &[u8; 4] = b"VDM1";
const HEADER_LEN: usize = 12;

#[derive(Debug, Error)]
pub enum VdmError {
    #[error("unsupported magic {0:?}")]
    BadMagic([u8; 4]),
    #[error("truncated file: expected {expected} payload bytes, found {found}")]
    Truncated { expected: usize, found: usize },
    #[error("{0} trailing bytes after payload")]
    Trailing(usize),
    #[error("negative or non-finite value {value} at index {index}")]
    BadValue { index: usize, value: f64 },
    #[error("map has {values} values but is {width}x{height}")]
    Shape {
        width: usize,
        height: usize,
        values: usize,
    },
    #[error("bbox {0:?} outside {1}x{2} map")]
    OutOfBounds([f64; 4], usize, usize),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// Single-channel raster in dm³ per pixel, row-major from the top-left.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMap {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl DensityMap {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            values: vec![0.0; width * height],
        }
    }

    pub fn from_values(width: usize, height: usize, values: Vec<f64>) -> Result<Self, VdmError> {
        if width * height != values.len() {
            return Err(VdmError::Shape {
                width,
                height,
                values: values.len(),
            });
        }
        if let Some((index, &value)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.is_finite() && **v >= 0.0))
        {
            return Err(VdmError::BadValue { index, value });
        }
        Ok(Self {
            width,
            height,
            values,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }

    /// Add `v` at pixel `(x, y)`. Callers keep values non-negative.
    pub(crate) fn add_at(&mut self, x: usize, y: usize, v: f64) {
        debug_assert!(v >= 0.0);
        self.values[y * self.width + x] += v;
    }

    /// Total mass, summed row-major with compensation.
    pub fn sum(&self) -> f64 {
        crate::numeric::sum(self.values.iter().copied())
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    /// Sum over pixels `x0 <= x < x1`, `y0 <= y < y1` with pixel centres at
    /// integer coordinates. The box must lie within `[0, w] x [0, h]`.
    pub fn integrate(&self, bbox: &BBox) -> Result<f64, VdmError> {
        let (w, h) = (self.width as f64, self.height as f64);
        let inside = bbox.x_min >= 0.0
            && bbox.y_min >= 0.0
            && bbox.x_max <= w
            && bbox.y_max <= h
            && bbox.x_min <= bbox.x_max
            && bbox.y_min <= bbox.y_max;
        if !inside {
            return Err(VdmError::OutOfBounds(bbox.as_array(), self.width, self.height));
        }
        let x0 = bbox.x_min.ceil() as usize;
        let x1 = bbox.x_max.ceil() as usize;
        let y0 = bbox.y_min.ceil() as usize;
        let y1 = bbox.y_max.ceil() as usize;
        let mut acc = crate::numeric::NeumaierSum::new();
        for y in y0..y1.min(self.height) {
            for x in x0..x1.min(self.width) {
                acc.add(self.get(x, y));
            }
        }
        Ok(acc.value())
    }

    /// Copy with every value rounded to binary32, as stored on disk.
    pub fn quantized(&self) -> DensityMap {
        DensityMap {
            width: self.width,
            height: self.height,
            values: self.values.iter().map(|&v| v as f32 as f64).collect(),
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + 4 * self.values.len());
        out.extend_from_slice(VDM_MAGIC);
        out.extend_from_slice(&(self.width as u32).to_le_bytes());
        out.extend_from_slice(&(self.height as u32).to_le_bytes());
        for &v in &self.values {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, VdmError> {
        if bytes.len() < HEADER_LEN {
            if bytes.len() >= 4 && &bytes[..4] != VDM_MAGIC {
                return Err(VdmError::BadMagic(bytes[..4].try_into().unwrap()));
            }
            return Err(VdmError::Truncated {
                expected: HEADER_LEN,
                found: bytes.len(),
            });
        }
        let magic: [u8; 4] = bytes[..4].try_into().unwrap();
        if &magic != VDM_MAGIC {
            return Err(VdmError::BadMagic(magic));
        }
        let width = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
        let height = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
        let payload = &bytes[HEADER_LEN..];
        let expected = width * height * 4;
        if payload.len() < expected {
            return Err(VdmError::Truncated {
                expected,
                found: payload.len(),
            });
        }
        if payload.len() > expected {
            return Err(VdmError::Trailing(payload.len() - expected));
        }
        let values = payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
            .collect();
        Self::from_values(width, height, values)
    }
}

pub fn write_vdm(map: &DensityMap, path: impl AsRef<Path>) -> Result<(), VdmError> {
    let mut out = BufWriter::new(File::create(path)?);
    out.write_all(&map.to_bytes())?;
    out.flush()?;
    Ok(())
}

pub fn read_vdm(path: impl AsRef<Path>) -> Result<DensityMap, VdmError> {
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;
    DensityMap::from_bytes(&bytes)
}
