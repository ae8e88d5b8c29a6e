//! LWF1 tensor files and the on-disk field-set layout.
//!
//! Layout (little-endian): magic `LWF1`, `u8` ndim, `ndim` x `u32` dims,
//! then the row-major `f32` payload. A field set is a directory holding one
//! LWF1 file per channel plus a `fields.json` sidecar.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, FormatError, Result};
use crate::grid::{FieldSet, Grid, Spectrogram, CHANNEL_NAMES};

pub const MAGIC: &[u8; 4] = b"LWF1";

/// An n-dimensional row-major `f32` array.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    pub dims: Vec<usize>,
    pub data: Vec<f32>,
}

impl Tensor {
    pub fn new(dims: Vec<usize>, data: Vec<f32>) -> Result<Self> {
        let n: usize = dims.iter().product();
        if n != data.len() {
            return Err(Error::shape("tensor", format!("{n} values for dims {dims:?}"), data.len()));
        }
        Ok(Tensor { dims, data })
    }

    pub fn from_grid(g: &Grid) -> Self {
        Tensor {
            dims: vec![g.rows(), g.cols()],
            data: g.as_slice().to_vec(),
        }
    }

    pub fn from_vector(v: &[f32]) -> Self {
        Tensor {
            dims: vec![v.len()],
            data: v.to_vec(),
        }
    }

    pub fn into_grid(self) -> std::result::Result<Grid, FormatError> {
        match self.dims[..] {
            [r, c] => Ok(Grid::from_vec(r, c, self.data).expect("dims checked at decode")),
            _ => Err(FormatError::DimMismatch(format!("expected 2 dims, found {}", self.dims.len()))),
        }
    }

    pub fn into_vector(self) -> std::result::Result<Vec<f32>, FormatError> {
        match self.dims[..] {
            [_] => Ok(self.data),
            _ => Err(FormatError::DimMismatch(format!("expected 1 dim, found {}", self.dims.len()))),
        }
    }
}

pub fn encode(t: &Tensor) -> Vec<u8> {
    let mut out = Vec::with_capacity(5 + 4 * t.dims.len() + 4 * t.data.len());
    out.extend_from_slice(MAGIC);
    out.push(u8::try_from(t.dims.len()).expect("at most 255 dims"));
    for &d in &t.dims {
        out.extend_from_slice(&u32::try_from(d).expect("dim fits u32").to_le_bytes());
    }
    for &v in &t.data {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode(bytes: &[u8]) -> std::result::Result<Tensor, FormatError> {
    if bytes.len() < 5 {
        if bytes.len() >= 4 && &bytes[..4] != MAGIC {
            return Err(FormatError::BadMagic {
                found: bytes[..4].try_into().unwrap(),
            });
        }
        return Err(FormatError::Truncated {
            expected: 5,
            found: bytes.len(),
        });
    }
    if &bytes[..4] != MAGIC {
        return Err(FormatError::BadMagic {
            found: bytes[..4].try_into().unwrap(),
        });
    }
    let ndim = bytes[4] as usize;
    if ndim == 0 {
        return Err(FormatError::DimMismatch("ndim is 0".into()));
    }
    let header = 5 + 4 * ndim;
    if bytes.len() < header {
        return Err(FormatError::Truncated {
            expected: header,
            found: bytes.len(),
        });
    }
    let dims: Vec<usize> = bytes[5..header]
        .chunks_exact(4)
        .map(|c| u32::from_le_bytes(c.try_into().unwrap()) as usize)
        .collect();
    let count = dims
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| FormatError::DimMismatch(format!("dims {dims:?} overflow")))?;
    let expected = count
        .checked_mul(4)
        .and_then(|p| p.checked_add(header))
        .ok_or_else(|| FormatError::DimMismatch(format!("dims {dims:?} overflow")))?;
    if bytes.len() < expected {
        return Err(FormatError::Truncated {
            expected,
            found: bytes.len(),
        });
    }
    if bytes.len() > expected {
        return Err(FormatError::DimMismatch(format!(
            "dims {dims:?} describe {expected} bytes but file has {}",
            bytes.len()
        )));
    }
    let data = bytes[header..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(Tensor { dims, data })
}

pub fn write_tensor(path: impl AsRef<Path>, t: &Tensor) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode(t)).map_err(|e| Error::io(path, e))
}

pub fn read_tensor(path: impl AsRef<Path>) -> Result<Tensor> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes).map_err(|source| Error::Format {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_spectrogram(path: impl AsRef<Path>, s: &Spectrogram) -> Result<()> {
    write_tensor(path, &Tensor::from_grid(s.grid()))
}

pub fn read_spectrogram(path: impl AsRef<Path>) -> Result<Spectrogram> {
    let path = path.as_ref();
    let grid = read_tensor(path)?.into_grid().map_err(|source| Error::Format {
        path: path.to_path_buf(),
        source,
    })?;
    Spectrogram::new(grid)
}

pub const FIELDS_SIDECAR: &str = "fields.json";

/// `fields.json`: grid shape plus the file name of each channel.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldSetSidecar {
    pub f_bins: usize,
    pub t_frames: usize,
    pub files: BTreeMap<String, String>,
}

fn json_err(path: &Path, source: serde_json::Error) -> Error {
    Error::Json {
        path: path.to_path_buf(),
        source,
    }
}

pub fn write_fieldset(dir: impl AsRef<Path>, fields: &FieldSet) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let (f_bins, t_frames) = fields.shape();
    let mut files = BTreeMap::new();
    for (name, _) in fields.channels() {
        files.insert(name.to_string(), format!("{name}.lwf1"));
    }
    write_tensor(dir.join(&files["phi_time"]), &Tensor::from_vector(&fields.phi_time))?;
    write_tensor(dir.join(&files["phi_freq"]), &Tensor::from_vector(&fields.phi_freq))?;
    write_tensor(dir.join(&files["phi_ut"]), &Tensor::from_grid(&fields.phi_ut))?;
    write_tensor(dir.join(&files["phi_uf"]), &Tensor::from_grid(&fields.phi_uf))?;
    write_tensor(dir.join(&files["phi_amp"]), &Tensor::from_grid(&fields.phi_amp))?;
    let sidecar = FieldSetSidecar { f_bins, t_frames, files };
    let path = dir.join(FIELDS_SIDECAR);
    let text = serde_json::to_string_pretty(&sidecar).map_err(|e| json_err(&path, e))?;
    fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))
}

pub fn read_fieldset(dir: impl AsRef<Path>) -> Result<FieldSet> {
    let dir = dir.as_ref();
    let path = dir.join(FIELDS_SIDECAR);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let sidecar: FieldSetSidecar = serde_json::from_str(&text).map_err(|e| json_err(&path, e))?;
    let file_of = |name: &str| -> Result<PathBuf> {
        sidecar
            .files
            .get(name)
            .map(|f| dir.join(f))
            .ok_or_else(|| Error::invalid("fields sidecar", format!("no file listed for {name}")))
    };
    fn fmt(p: &Path) -> impl FnOnce(FormatError) -> Error + '_ {
        move |source| Error::Format {
            path: p.to_path_buf(),
            source,
        }
    }
    let mut vectors = Vec::new();
    for name in &CHANNEL_NAMES[..2] {
        let p = file_of(name)?;
        vectors.push(read_tensor(&p)?.into_vector().map_err(fmt(&p))?);
    }
    let mut grids = Vec::new();
    for name in &CHANNEL_NAMES[2..] {
        let p = file_of(name)?;
        grids.push(read_tensor(&p)?.into_grid().map_err(fmt(&p))?);
    }
    let phi_amp = grids.pop().unwrap();
    let phi_uf = grids.pop().unwrap();
    let phi_ut = grids.pop().unwrap();
    let phi_freq = vectors.pop().unwrap();
    let phi_time = vectors.pop().unwrap();
    let fields = FieldSet::new(phi_time, phi_freq, phi_ut, phi_uf, phi_amp)?;
    if fields.shape() != (sidecar.f_bins, sidecar.t_frames) {
        let (f, t) = fields.shape();
        return Err(Error::shape(
            "fields sidecar",
            format!("{}x{}", sidecar.f_bins, sidecar.t_frames),
            format!("{f}x{t}"),
        ));
    }
    Ok(fields)
}
